//! Exact event-driven simulation of the latent book.
//!
//! Four independent Poisson clocks drive the book: background market orders
//! (rate `mu`), meta-order actions (`mu * phi` while a meta-order is live),
//! depositions (`lambda_w` per admissible level and side, tilted by the refill
//! bias) and cancellations (`nu` per cancellable unit). [`Engine::step`] draws
//! the next event by the standard Gillespie direct method and advances both
//! clocks: real time `time` by the exponential waiting time, trade time
//! `trades` by one per market order.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp1, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::book::{BookError, Direction, OrderBook, Side};
use crate::flow::{FlowError, RefillPolicy, SignMode, SignStream, VolumePolicy};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Book(#[from] BookError),
    #[error("invalid model parameter: {0}")]
    Param(String),
}

/// Physical parameters of the background market.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Background market-order rate (1/s).
    pub mu: f64,
    /// Deposition rate per price level (1/s).
    pub lambda_w: f64,
    /// Cancellation rate per resting unit (1/s).
    pub nu: f64,
    pub signs: SignMode,
    pub background: VolumePolicy,
    /// Refill bias; 0 means fair-coin deposition sides.
    pub alpha: f64,
    pub tick_size: f64,
    /// Half-width of the simulated price window, in levels.
    pub half_width: usize,
    /// Cap on the stationary depth `lambda_w / nu` used to seed levels.
    pub max_depth: f64,
    /// Width (ticks) of the mean-field liquidity hole used by stationary
    /// seeding. `None` seeds a flat book.
    pub seed_pstar: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu: 0.1,
            lambda_w: 5e-3,
            nu: 1e-4,
            signs: SignMode::Lmf { gamma: 0.5 },
            background: VolumePolicy::Zeta(0.95),
            alpha: 0.0,
            tick_size: 0.01,
            half_width: 400,
            max_depth: 1e6,
            seed_pstar: None,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), EngineError> {
        for (name, v) in [("mu", self.mu), ("lambda_w", self.lambda_w), ("nu", self.nu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EngineError::Param(format!("{name} must be a positive rate, got {v}")));
            }
        }
        if !(self.tick_size > 0.0) {
            return Err(EngineError::Param("tick_size must be > 0".into()));
        }
        if self.half_width < 4 {
            return Err(EngineError::Param("half_width must be at least 4 levels".into()));
        }
        if !(self.max_depth >= 1.0) {
            return Err(EngineError::Param("max_depth must be >= 1".into()));
        }
        self.background.validate()?;
        RefillPolicy::new(self.alpha)?;
        Ok(())
    }

    /// Stationary no-trade occupancy of a level, `lambda_w / nu`, capped.
    pub fn depth(&self) -> f64 {
        let d = self.lambda_w / self.nu;
        if d > self.max_depth {
            log::warn!(
                "stationary depth {d:.3e} exceeds max_depth {:.3e}; seeding with the cap",
                self.max_depth
            );
            self.max_depth
        } else {
            d
        }
    }

    /// Mean-field expected volume at distance `p` (ticks) from the price:
    /// `depth * (1 - exp(-p / pstar))`.
    pub fn seed_profile(&self, p: f64, pstar: f64) -> f64 {
        seed_profile(p, pstar, self.depth())
    }
}

pub fn seed_profile(p: f64, pstar: f64, depth: f64) -> f64 {
    if pstar <= 0.0 {
        depth
    } else {
        depth * (1.0 - (-p.abs() / pstar).exp())
    }
}

/// How a meta-order trades.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetaStyle {
    /// Buy market orders sized by the given policy.
    Market(VolumePolicy),
    /// Non-cancellable buy limit orders at the best bid, sized as
    /// `max(floor(f V_bid), 1)` where `V_bid` excludes the trader's own units.
    Limit { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Stop once `q` units are executed.
    Volume(u64),
    /// Stop after `t` seconds.
    Duration(f64),
    /// Unit execution only: stop at whichever of the two comes first.
    Both { volume: u64, duration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaOrderSpec {
    pub style: MetaStyle,
    /// Meta-order event rate in units of `mu`.
    pub phi: f64,
    pub termination: Termination,
    /// Trades to keep recording after completion.
    pub post_horizon: u64,
}

impl MetaOrderSpec {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(EngineError::Param(format!("phi must be > 0, got {}", self.phi)));
        }
        match self.style {
            MetaStyle::Market(p) => {
                p.validate()?;
            }
            MetaStyle::Limit { fraction } => {
                VolumePolicy::fraction(fraction)?;
            }
        }
        match self.termination {
            Termination::Duration(t) if !(t > 0.0) => {
                Err(EngineError::Param("meta duration must be > 0".into()))
            }
            Termination::Both { .. } if self.style != MetaStyle::Market(VolumePolicy::Unit) => {
                Err(EngineError::Param(
                    "fixing both Q and T is only possible with unit execution".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Participation rate under equal order sizes, `phi / (1 + phi)`.
    pub fn participation(&self) -> f64 {
        self.phi / (1.0 + self.phi)
    }
}

#[derive(Debug, Clone)]
struct MetaAgent {
    spec: MetaOrderSpec,
    start_time: f64,
    executed: u64,
    deposited: u64,
}

impl MetaAgent {
    fn target(&self) -> Option<u64> {
        match self.spec.termination {
            Termination::Volume(q) | Termination::Both { volume: q, .. } => Some(q),
            Termination::Duration(_) => None,
        }
    }

    fn deadline(&self) -> Option<f64> {
        match self.spec.termination {
            Termination::Duration(t) | Termination::Both { duration: t, .. } => {
                Some(self.start_time + t)
            }
            Termination::Volume(_) => None,
        }
    }

    fn remaining(&self) -> u64 {
        self.target().map_or(u64::MAX, |q| q.saturating_sub(self.executed))
    }
}

/// One market order as seen by the measurement layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRecord {
    /// Trade-time index, starting at 0.
    pub index: u64,
    /// Real time of the trade (s).
    pub time: f64,
    pub sign: i8,
    pub volume: u64,
    /// Execution level (ticks).
    pub level: i64,
    pub pre_bid: i64,
    pub pre_ask: i64,
    pub post_bid: i64,
    pub post_ask: i64,
    pub meta: bool,
}

impl TradeRecord {
    pub fn pre_mid(&self) -> f64 {
        0.5 * (self.pre_bid + self.pre_ask) as f64
    }

    pub fn post_mid(&self) -> f64 {
        0.5 * (self.post_bid + self.post_ask) as f64
    }

    pub fn pre_best_volume_side(&self) -> i64 {
        if self.sign > 0 {
            self.pre_ask
        } else {
            self.pre_bid
        }
    }
}

/// Mid-price record of one meta-order execution, in half-ticks (`bid + ask`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTrajectory {
    pub start: i64,
    /// `(q, mid)` when cumulative executed volume first reached each grid
    /// value `q`.
    pub milestones: Vec<(u64, i64)>,
    /// Mid after each trade during execution.
    pub path: Vec<i64>,
    /// Mid after each trade following completion.
    pub post: Vec<i64>,
    pub executed: u64,
    /// False when the trade horizon ran out before termination.
    pub complete: bool,
    /// Trades during execution that came from the meta-order.
    pub meta_trades: u64,
    /// Real time spent executing (s).
    pub duration: f64,
}

impl ImpactTrajectory {
    /// Mid at completion.
    pub fn end(&self) -> i64 {
        self.path.last().copied().unwrap_or(self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Deposit { side: Side, level: i64 },
    /// Level of the cancelled unit.
    Cancel(i64),
    Trade(TradeRecord),
    MetaDeposit { level: i64, volume: u64 },
}

/// Fraction of the window width kept between a quote and the window edge.
const EDGE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Engine {
    params: ModelParams,
    book: OrderBook,
    signs: SignStream,
    refill: RefillPolicy,
    rng: Xoshiro256PlusPlus,
    time: f64,
    trades: u64,
    meta: Option<MetaAgent>,
    depth: f64,
}

impl Engine {
    /// Builds a seeded book around price level 0 (mean-field profile when
    /// `seed_pstar` is set, flat otherwise). No warm-up is run.
    pub fn new(params: ModelParams, seed: u64) -> Result<Self, EngineError> {
        params.validate()?;
        let depth = params.depth();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, 0));
        let signs = SignStream::new(params.signs, derive_seed(seed, 1))?;
        let refill = RefillPolicy::new(params.alpha)?;
        let book = seeded_book(&params, depth, &mut rng)?;
        Ok(Self {
            params,
            book,
            signs,
            refill,
            rng,
            time: 0.0,
            trades: 0,
            meta: None,
            depth,
        })
    }

    /// Seeds the book and evolves it for `warmup` seconds.
    pub fn init_stationary(params: ModelParams, seed: u64, warmup: f64) -> Result<Self, EngineError> {
        let mut e = Self::new(params, seed)?;
        e.run_for(warmup)?;
        e.time = 0.0;
        e.trades = 0;
        Ok(e)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn trades(&self) -> u64 {
        self.trades
    }

    pub fn meta_active(&self) -> bool {
        self.meta.is_some()
    }

    pub fn meta_executed(&self) -> u64 {
        self.meta.as_ref().map_or(0, |m| m.executed)
    }

    pub fn meta_deposited(&self) -> u64 {
        self.meta.as_ref().map_or(0, |m| m.deposited)
    }

    /// Starts a meta-order now.
    pub fn start_meta(&mut self, spec: MetaOrderSpec) -> Result<(), EngineError> {
        spec.validate()?;
        self.meta = Some(MetaAgent {
            spec,
            start_time: self.time,
            executed: 0,
            deposited: 0,
        });
        Ok(())
    }

    /// True once the live meta-order met its termination rule.
    pub fn meta_done(&self) -> bool {
        match &self.meta {
            None => true,
            Some(m) => {
                m.remaining() == 0 || m.deadline().is_some_and(|d| self.time >= d)
            }
        }
    }

    /// Stops the meta-order; protected limit orders become ordinary orders.
    pub fn stop_meta(&mut self) -> u64 {
        self.book.clear_protected();
        self.meta.take().map_or(0, |m| m.executed)
    }

    /// Total event rate in the current state.
    pub fn total_rate(&self) -> f64 {
        let (mu, meta, dep, canc) = self.rates();
        mu + meta + dep + canc
    }

    fn rates(&self) -> (f64, f64, f64, f64) {
        let meta = match &self.meta {
            Some(m) if m.remaining() > 0 => self.params.mu * m.spec.phi,
            _ => 0.0,
        };
        let (buy, sell) = self.deposition_weights();
        (
            self.params.mu,
            meta,
            self.params.lambda_w * (buy + sell),
            self.params.nu * self.book.cancellable_volume() as f64,
        )
    }

    /// Effective number of levels fed per side. Every admissible level
    /// receives `lambda_w (1 -/+ alpha eps)` on the buy/sell side, so the
    /// per-level rate does not depend on where the price sits in the window.
    fn deposition_weights(&self) -> (f64, f64) {
        let count = |side| {
            let (a, b) = self.book.admissible(side);
            (b - a + 1).max(0) as f64
        };
        let sell_p = self.refill.sell_probability();
        (
            count(Side::Buy) * 2.0 * (1.0 - sell_p),
            count(Side::Sell) * 2.0 * sell_p,
        )
    }

    fn recenter(&mut self) {
        let w = self.book.width() as i64;
        let margin = ((w as f64 * EDGE_FRACTION) as i64).max(1);
        let half = self.params.half_width as i64;
        let mid = (self.book.best_bid() + self.book.best_ask()) / 2;
        if self.book.best_bid() - self.book.lo() < margin {
            let n = (self.book.lo() - (mid - half)).max(margin) as usize;
            self.book.extend_window(Direction::Down, n, self.depth, &mut self.rng);
        }
        if self.book.hi() - self.book.best_ask() < margin {
            let n = ((mid + half) - self.book.hi()).max(margin) as usize;
            self.book.extend_window(Direction::Up, n, self.depth, &mut self.rng);
        }
    }

    fn grow(&mut self, direction: Direction) {
        let n = (self.params.half_width / 2).max(1);
        self.book.extend_window(direction, n, self.depth.max(1.0), &mut self.rng);
    }

    /// Runs `op` on the book, extending the window on exhaustion.
    fn with_window<T>(
        &mut self,
        mut op: impl FnMut(&mut OrderBook, &mut Xoshiro256PlusPlus) -> Result<T, BookError>,
    ) -> Result<T, EngineError> {
        for _ in 0..64 {
            match op(&mut self.book, &mut self.rng) {
                Err(BookError::WindowExhausted(d)) => self.grow(d),
                other => return other.map_err(EngineError::from),
            }
        }
        Err(EngineError::Book(BookError::WindowExhausted(Direction::Up)))
    }

    /// Draws and applies the next event.
    pub fn step(&mut self) -> Result<Event, EngineError> {
        self.recenter();
        let (mu, meta, dep, canc) = self.rates();
        let total = mu + meta + dep + canc;
        let wait: f64 = Exp1.sample(&mut self.rng);
        self.time += wait / total;
        let u = self.rng.random::<f64>() * total;
        if u < mu {
            self.background_trade()
        } else if u < mu + meta {
            self.meta_action()
        } else if u < mu + meta + dep {
            let (buy, _) = self.deposition_weights();
            let side = if (u - mu - meta) < self.params.lambda_w * buy {
                Side::Buy
            } else {
                Side::Sell
            };
            let level = self.with_window(|b, r| b.deposit(side, r))?;
            Ok(Event::Deposit { side, level })
        } else {
            let out = self.with_window(|b, r| b.cancel(r))?;
            Ok(Event::Cancel(out))
        }
    }

    fn background_trade(&mut self) -> Result<Event, EngineError> {
        let sign = self.signs.next_sign();
        let policy = self.params.background;
        let rec = self.market_order(sign, policy, u64::MAX, false)?;
        debug_assert!(!rec.meta);
        Ok(Event::Trade(rec))
    }

    fn market_order(
        &mut self,
        sign: i8,
        policy: VolumePolicy,
        cap: u64,
        meta: bool,
    ) -> Result<TradeRecord, EngineError> {
        let exec = self.with_window(|b, r| {
            let best = if sign > 0 {
                b.best_ask_volume()
            } else {
                b.best_bid_volume()
            };
            let v = policy.draw(best, r).min(cap).max(1);
            b.execute_market(sign, v, r)
        })?;
        if exec.protected_filled > 0 {
            if let Some(m) = self.meta.as_mut() {
                m.executed += exec.protected_filled;
            }
        }
        self.refill.record_trade(sign);
        let rec = TradeRecord {
            index: self.trades,
            time: self.time,
            sign,
            volume: exec.volume,
            level: exec.level,
            pre_bid: exec.pre_bid,
            pre_ask: exec.pre_ask,
            post_bid: self.book.best_bid(),
            post_ask: self.book.best_ask(),
            meta,
        };
        self.trades += 1;
        Ok(rec)
    }

    fn meta_action(&mut self) -> Result<Event, EngineError> {
        let m = self.meta.as_ref().expect("meta rate is zero without a meta-order");
        let remaining = m.remaining();
        match m.spec.style {
            MetaStyle::Market(policy) => {
                let rec = self.market_order(1, policy, remaining, true)?;
                if let Some(m) = self.meta.as_mut() {
                    m.executed += rec.volume;
                }
                Ok(Event::Trade(rec))
            }
            MetaStyle::Limit { fraction } => {
                let level = self.book.best_bid();
                // Own resting units are excluded, otherwise the size compounds
                // with every deposit that is not hit.
                let others = self.book.best_bid_volume() - u64::from(self.book.protected_at(level));
                let v = if others == 0 {
                    1
                } else {
                    VolumePolicy::Fraction(fraction).volume_from_uniform(others, 0.0)
                };
                self.book.deposit_protected(level, v as u32)?;
                if let Some(m) = self.meta.as_mut() {
                    m.deposited += v;
                }
                Ok(Event::MetaDeposit { level, volume: v })
            }
        }
    }

    /// Runs one meta-order from the current state to termination, then
    /// records `spec.post_horizon` further trades. Gives up (incomplete)
    /// after `max_trades` trades of execution. `observer` sees every trade.
    pub fn run_meta(
        &mut self,
        spec: MetaOrderSpec,
        q_grid: &[u64],
        max_trades: u64,
        mut observer: impl FnMut(&TradeRecord),
    ) -> Result<ImpactTrajectory, EngineError> {
        let mut tr = self.execute_meta(spec, q_grid, max_trades, &mut observer)?;
        if tr.complete {
            self.record_post(&mut tr, spec.post_horizon, observer)?;
        }
        Ok(tr)
    }

    /// Execution part of [`Engine::run_meta`]; the meta-order is stopped on
    /// return and `post` is empty.
    pub fn execute_meta(
        &mut self,
        spec: MetaOrderSpec,
        q_grid: &[u64],
        max_trades: u64,
        mut observer: impl FnMut(&TradeRecord),
    ) -> Result<ImpactTrajectory, EngineError> {
        let start = self.book.best_bid() + self.book.best_ask();
        let t0 = self.time;
        self.start_meta(spec)?;
        let mut tr = ImpactTrajectory {
            start,
            milestones: Vec::with_capacity(q_grid.len()),
            path: Vec::new(),
            post: Vec::new(),
            executed: 0,
            complete: true,
            meta_trades: 0,
            duration: 0.0,
        };
        let mut next_q = 0;
        let mut mark = |tr: &mut ImpactTrajectory, executed: u64, mid: i64| {
            while next_q < q_grid.len() && q_grid[next_q] <= executed {
                tr.milestones.push((q_grid[next_q], mid));
                next_q += 1;
            }
        };
        mark(&mut tr, 0, start);
        while !self.meta_done() {
            if tr.path.len() as u64 >= max_trades {
                tr.complete = false;
                break;
            }
            if let Event::Trade(rec) = self.step()? {
                observer(&rec);
                let mid = rec.post_bid + rec.post_ask;
                tr.path.push(mid);
                tr.meta_trades += u64::from(rec.meta);
                mark(&mut tr, self.meta_executed(), mid);
            }
        }
        tr.duration = self.time - t0;
        tr.executed = self.stop_meta();
        Ok(tr)
    }

    /// Appends the mids after the next `trades` trades to `tr.post`.
    pub fn record_post(
        &mut self,
        tr: &mut ImpactTrajectory,
        trades: u64,
        mut observer: impl FnMut(&TradeRecord),
    ) -> Result<(), EngineError> {
        for _ in 0..trades {
            let rec = self.next_trade()?;
            observer(&rec);
            tr.post.push(rec.post_bid + rec.post_ask);
        }
        Ok(())
    }

    /// Steps until real time has advanced by `duration`.
    pub fn run_for(&mut self, duration: f64) -> Result<(), EngineError> {
        let end = self.time + duration;
        while self.time < end {
            self.step()?;
        }
        Ok(())
    }

    /// Steps until the next market order and returns it.
    pub fn next_trade(&mut self) -> Result<TradeRecord, EngineError> {
        loop {
            if let Event::Trade(t) = self.step()? {
                return Ok(t);
            }
        }
    }
}

fn seeded_book<R: Rng + ?Sized>(
    params: &ModelParams,
    depth: f64,
    rng: &mut R,
) -> Result<OrderBook, EngineError> {
    let h = params.half_width as i64;
    let pstar = params.seed_pstar.unwrap_or(0.0);
    // Levels -h..=h-1; the initial price sits between levels -1 and 0.
    let mut volumes = Vec::with_capacity(2 * h as usize);
    for level in -h..h {
        let p = (level as f64 + 0.5).abs();
        let mean = seed_profile(p, pstar, depth);
        let v = if mean > 0.0 {
            Poisson::new(mean).expect("finite mean").sample(rng) as u32
        } else {
            0
        };
        volumes.push(v);
    }
    // Guarantee both sides exist.
    if volumes[..h as usize].iter().all(|&v| v == 0) {
        volumes[0] = 1;
    }
    if volumes[h as usize..].iter().all(|&v| v == 0) {
        *volumes.last_mut().expect("nonempty") = 1;
    }
    Ok(OrderBook::from_levels(params.tick_size, -h, volumes, 0)?)
}
