//! The latent order book: a sliding window of integer price levels holding
//! unit orders.
//!
//! Levels are addressed by absolute tick index. Side labels are implicit: a
//! nonempty level at or below the best bid holds buy orders, a nonempty level
//! at or above the best ask holds sell orders, and nothing rests strictly
//! inside the spread. Both quotes always exist; operations that would remove
//! the last level of a side fail with [`BookError::WindowExhausted`] before
//! mutating anything, so the caller can extend the window and retry.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Hypergeometric, Poisson};
use thiserror::Error;

use crate::fenwick::Fenwick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "BUY",
            Side::Sell => "SELL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSide {
    Buy,
    Sell,
    Empty,
}

/// Direction along the price axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BookError {
    #[error("price window exhausted ({0:?})")]
    WindowExhausted(Direction),
    #[error("nothing to cancel")]
    NothingToCancel,
    #[error("market order volume {volume} not in [1, {available}]")]
    InvalidVolume { volume: u64, available: u64 },
    #[error("level {level} is not admissible for a {side:?} deposit")]
    InadmissibleLevel { level: i64, side: Side },
    #[error("initial book needs at least one buy and one sell level")]
    OneSided,
}

/// What a market order did to the book.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Execution {
    pub sign: i8,
    pub volume: u64,
    pub level: i64,
    pub pre_bid: i64,
    pub pre_ask: i64,
    /// Units consumed that belonged to protected (meta-order) deposits.
    pub protected_filled: u64,
}

#[derive(Debug, Clone)]
pub struct OrderBook {
    tick_size: f64,
    origin: i64,
    volumes: Vec<u32>,
    fenwick: Fenwick,
    total: u64,
    bid: i64,
    ask: i64,
    last_trade: i64,
    protected: BTreeMap<i64, u32>,
    protected_total: u64,
}

impl OrderBook {
    /// Builds a book over levels `origin .. origin + volumes.len()`. Nonempty
    /// levels below `boundary` are buy orders, the rest sell orders.
    pub fn from_levels(
        tick_size: f64,
        origin: i64,
        volumes: Vec<u32>,
        boundary: i64,
    ) -> Result<Self, BookError> {
        let split = (boundary - origin).clamp(0, volumes.len() as i64) as usize;
        let bid = volumes[..split]
            .iter()
            .rposition(|&v| v > 0)
            .ok_or(BookError::OneSided)?;
        let ask = volumes[split..]
            .iter()
            .position(|&v| v > 0)
            .ok_or(BookError::OneSided)?
            + split;
        let fenwick = Fenwick::from_counts(&volumes);
        let total = volumes.iter().map(|&v| u64::from(v)).sum();
        let bid = origin + bid as i64;
        Ok(Self {
            tick_size,
            origin,
            volumes,
            fenwick,
            total,
            bid,
            ask: origin + ask as i64,
            last_trade: bid,
            protected: BTreeMap::new(),
            protected_total: 0,
        })
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    /// Lowest level in the window.
    pub fn lo(&self) -> i64 {
        self.origin
    }

    /// Highest level in the window.
    pub fn hi(&self) -> i64 {
        self.origin + self.volumes.len() as i64 - 1
    }

    pub fn width(&self) -> usize {
        self.volumes.len()
    }

    pub fn best_bid(&self) -> i64 {
        self.bid
    }

    pub fn best_ask(&self) -> i64 {
        self.ask
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask) as f64
    }

    pub fn half_spread(&self) -> f64 {
        0.5 * (self.ask - self.bid) as f64
    }

    pub fn last_trade(&self) -> i64 {
        self.last_trade
    }

    pub fn total_volume(&self) -> u64 {
        self.total
    }

    pub fn protected_volume(&self) -> u64 {
        self.protected_total
    }

    /// Units the cancellation process may remove.
    pub fn cancellable_volume(&self) -> u64 {
        self.total - self.protected_total
    }

    pub fn protected_at(&self, level: i64) -> u32 {
        self.protected.get(&level).copied().unwrap_or(0)
    }

    pub fn volume_at(&self, level: i64) -> u32 {
        self.slot(level).map_or(0, |s| self.volumes[s])
    }

    pub fn best_bid_volume(&self) -> u64 {
        u64::from(self.volume_at(self.bid))
    }

    pub fn best_ask_volume(&self) -> u64 {
        u64::from(self.volume_at(self.ask))
    }

    pub fn side_at(&self, level: i64) -> LevelSide {
        if self.volume_at(level) == 0 {
            LevelSide::Empty
        } else if level <= self.bid {
            LevelSide::Buy
        } else {
            LevelSide::Sell
        }
    }

    /// Raw per-level volumes, lowest level first.
    pub fn volumes(&self) -> &[u32] {
        &self.volumes
    }

    fn slot(&self, level: i64) -> Option<usize> {
        let s = level - self.origin;
        (s >= 0 && (s as usize) < self.volumes.len()).then_some(s as usize)
    }

    fn level(&self, slot: usize) -> i64 {
        self.origin + slot as i64
    }

    fn add_units(&mut self, slot: usize, n: u32) {
        self.volumes[slot] += n;
        self.fenwick.add(slot, i64::from(n));
        self.total += u64::from(n);
    }

    fn remove_units(&mut self, slot: usize, n: u32) {
        self.volumes[slot] -= n;
        self.fenwick.add(slot, -i64::from(n));
        self.total -= u64::from(n);
    }

    /// Highest nonempty level strictly below `level`.
    fn next_below(&self, level: i64) -> Option<i64> {
        let s = self.slot(level)?;
        if s == 0 {
            return None;
        }
        let p = self.fenwick.prefix(s - 1);
        if p == 0 {
            return None;
        }
        self.fenwick.find(p - 1).map(|x| self.level(x))
    }

    /// Lowest nonempty level strictly above `level`.
    fn next_above(&self, level: i64) -> Option<i64> {
        let s = self.slot(level)?;
        let p = self.fenwick.prefix(s);
        self.fenwick.find(p).map(|x| self.level(x))
    }

    /// Levels a deposit of `side` may land on: buys strictly below the ask,
    /// sells strictly above the bid.
    pub fn admissible(&self, side: Side) -> (i64, i64) {
        match side {
            Side::Buy => (self.lo(), self.ask - 1),
            Side::Sell => (self.bid + 1, self.hi()),
        }
    }

    /// Adds one unit at a level drawn uniformly from the admissible range.
    pub fn deposit<R: Rng + ?Sized>(&mut self, side: Side, rng: &mut R) -> Result<i64, BookError> {
        let (a, b) = self.admissible(side);
        if a > b {
            return Err(BookError::WindowExhausted(match side {
                Side::Buy => Direction::Down,
                Side::Sell => Direction::Up,
            }));
        }
        let level = rng.random_range(a..=b);
        self.deposit_at(level, side, 1)?;
        Ok(level)
    }

    /// Adds `n` units at an explicit level.
    pub fn deposit_at(&mut self, level: i64, side: Side, n: u32) -> Result<(), BookError> {
        let (a, b) = self.admissible(side);
        if level < a || level > b {
            return Err(BookError::InadmissibleLevel { level, side });
        }
        if n == 0 {
            return Ok(());
        }
        let slot = self.slot(level).expect("admissible levels lie in the window");
        self.add_units(slot, n);
        match side {
            Side::Buy if level > self.bid => self.bid = level,
            Side::Sell if level < self.ask => self.ask = level,
            _ => {}
        }
        Ok(())
    }

    /// Adds `n` non-cancellable buy units at `level`.
    pub fn deposit_protected(&mut self, level: i64, n: u32) -> Result<(), BookError> {
        self.deposit_at(level, Side::Buy, n)?;
        if n > 0 {
            *self.protected.entry(level).or_insert(0) += n;
            self.protected_total += u64::from(n);
        }
        Ok(())
    }

    /// Removes one unit chosen uniformly among the cancellable units and
    /// returns its level. Protected units are skipped exactly, so the
    /// cancellation clock runs at `nu * cancellable_volume`.
    pub fn cancel<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<i64, BookError> {
        let cancellable = self.total - self.protected_total;
        if cancellable == 0 {
            return Err(BookError::NothingToCancel);
        }
        let k = rng.random_range(0..cancellable) as i64;
        // Units within a level are ordered cancellable-first. `skip` is the
        // number of protected units stored before the chosen one.
        let mut skip = 0i64;
        let slot = loop {
            let slot = self.fenwick.find(k + skip).expect("index below total");
            let level = self.level(slot);
            let before: i64 = self.protected.range(..level).map(|(_, &c)| i64::from(c)).sum();
            if before != skip {
                skip = before;
                continue;
            }
            let at = i64::from(self.protected_at(level));
            let offset = k + skip - if slot == 0 { 0 } else { self.fenwick.prefix(slot - 1) };
            if offset < i64::from(self.volumes[slot]) - at {
                break slot;
            }
            skip = before + at;
        };
        let level = self.level(slot);
        if self.volumes[slot] == 1 {
            if level == self.bid {
                let nb = self.next_below(level).ok_or(BookError::WindowExhausted(Direction::Down))?;
                self.bid = nb;
            } else if level == self.ask {
                let na = self.next_above(level).ok_or(BookError::WindowExhausted(Direction::Up))?;
                self.ask = na;
            }
        }
        self.remove_units(slot, 1);
        Ok(level)
    }

    /// Executes a market order of `volume` units against the opposite best.
    /// `sign = +1` buys at the ask, `-1` sells at the bid.
    pub fn execute_market<R: Rng + ?Sized>(
        &mut self,
        sign: i8,
        volume: u64,
        rng: &mut R,
    ) -> Result<Execution, BookError> {
        let level = if sign > 0 { self.ask } else { self.bid };
        let slot = self.slot(level).expect("quotes lie in the window");
        let available = u64::from(self.volumes[slot]);
        if volume == 0 || volume > available {
            return Err(BookError::InvalidVolume { volume, available });
        }
        let empties = volume == available;
        let next = if empties {
            if sign > 0 {
                Some(self.next_above(level).ok_or(BookError::WindowExhausted(Direction::Up))?)
            } else {
                Some(self.next_below(level).ok_or(BookError::WindowExhausted(Direction::Down))?)
            }
        } else {
            None
        };
        let pre_bid = self.bid;
        let pre_ask = self.ask;
        let prot = u64::from(self.protected_at(level));
        let protected_filled = if prot == 0 {
            0
        } else if empties {
            prot
        } else {
            Hypergeometric::new(available, prot, volume)
                .expect("valid hypergeometric parameters")
                .sample(rng)
        };
        if protected_filled > 0 {
            self.take_protected(level, protected_filled as u32);
        }
        self.remove_units(slot, volume as u32);
        if let Some(n) = next {
            if sign > 0 {
                self.ask = n;
            } else {
                self.bid = n;
            }
        }
        self.last_trade = level;
        Ok(Execution {
            sign,
            volume,
            level,
            pre_bid,
            pre_ask,
            protected_filled,
        })
    }

    fn take_protected(&mut self, level: i64, n: u32) {
        if let Some(c) = self.protected.get_mut(&level) {
            let n = n.min(*c);
            *c -= n;
            self.protected_total -= u64::from(n);
            if *c == 0 {
                self.protected.remove(&level);
            }
        }
    }

    /// Drops every protected flag (the units stay as ordinary orders).
    pub fn clear_protected(&mut self) {
        self.protected.clear();
        self.protected_total = 0;
    }

    /// Appends `n_levels` levels in `direction`, each seeded with a Poisson
    /// draw of mean `seed_mean`, and trims as many levels from the opposite
    /// end as possible without touching the quotes.
    pub fn extend_window<R: Rng + ?Sized>(
        &mut self,
        direction: Direction,
        n_levels: usize,
        seed_mean: f64,
        rng: &mut R,
    ) {
        if n_levels == 0 {
            return;
        }
        let poisson = (seed_mean > 0.0).then(|| Poisson::new(seed_mean).expect("finite mean"));
        let fresh = |rng: &mut R| -> u32 {
            poisson.as_ref().map_or(0, |p| p.sample(rng) as u32)
        };
        let w = self.volumes.len();
        match direction {
            Direction::Up => {
                // Never trim the bid itself.
                let bid_slot = (self.bid - self.origin) as usize;
                let trim = n_levels.min(bid_slot);
                let mut v = Vec::with_capacity(w - trim + n_levels);
                v.extend_from_slice(&self.volumes[trim..]);
                for _ in 0..n_levels {
                    v.push(fresh(rng));
                }
                self.drop_protected_outside(self.origin + trim as i64, i64::MAX);
                self.origin += trim as i64;
                self.rebuild(v);
            }
            Direction::Down => {
                let ask_slot = (self.ask - self.origin) as usize;
                let trim = n_levels.min(w - 1 - ask_slot);
                let mut v = Vec::with_capacity(w - trim + n_levels);
                for _ in 0..n_levels {
                    v.push(fresh(rng));
                }
                v.extend_from_slice(&self.volumes[..w - trim]);
                self.drop_protected_outside(i64::MIN, self.origin + (w - trim) as i64 - 1);
                self.origin -= n_levels as i64;
                self.rebuild(v);
            }
        }
    }

    fn drop_protected_outside(&mut self, lo: i64, hi: i64) {
        let gone: Vec<i64> = self
            .protected
            .keys()
            .copied()
            .filter(|&l| l < lo || l > hi)
            .collect();
        for l in gone {
            let c = self.protected.remove(&l).unwrap_or(0);
            self.protected_total -= u64::from(c);
        }
    }

    fn rebuild(&mut self, volumes: Vec<u32>) {
        self.fenwick = Fenwick::from_counts(&volumes);
        self.total = volumes.iter().map(|&v| u64::from(v)).sum();
        self.volumes = volumes;
    }

    /// Verifies every structural invariant; used by tests and debug checks.
    pub fn check_invariants(&self) -> Result<(), String> {
        let direct: u64 = self.volumes.iter().map(|&v| u64::from(v)).sum();
        if direct != self.total || self.fenwick.total() as u64 != direct {
            return Err(format!(
                "volume mismatch: direct {direct}, cached {}, tree {}",
                self.total,
                self.fenwick.total()
            ));
        }
        if self.bid >= self.ask {
            return Err(format!("crossed quotes {} >= {}", self.bid, self.ask));
        }
        if self.volume_at(self.bid) == 0 || self.volume_at(self.ask) == 0 {
            return Err("empty best quote".into());
        }
        for l in self.bid + 1..self.ask {
            if self.volume_at(l) != 0 {
                return Err(format!("volume inside spread at {l}"));
            }
        }
        let mut prot = 0u64;
        for (&l, &c) in &self.protected {
            if c == 0 || c > self.volume_at(l) || l > self.bid {
                return Err(format!("bad protected count {c} at {l}"));
            }
            prot += u64::from(c);
        }
        if prot != self.protected_total {
            return Err("protected total mismatch".into());
        }
        Ok(())
    }

    /// Writes `level_price,side,volume` for every nonempty level.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "level_price,side,volume")?;
        for (s, &v) in self.volumes.iter().enumerate() {
            if v == 0 {
                continue;
            }
            let level = self.level(s);
            let side = if level <= self.bid { Side::Buy } else { Side::Sell };
            writeln!(out, "{},{},{}", level as f64 * self.tick_size, side.as_str(), v)?;
        }
        Ok(())
    }
}
