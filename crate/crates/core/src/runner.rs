//! Replica orchestration: independent engines on a bounded worker pool,
//! merged in replica order so results do not depend on the thread count.

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{Engine, EngineError, MetaOrderSpec, ModelParams, TradeRecord};
use crate::measure::{BestVolumeHist, ImpactAcc, MarkovAcc, Origins, ProfileAcc, SignAutocorr, VariogramAcc};
use crate::seed::replica_seed;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("replica {replica}: {source}")]
    Engine {
        replica: usize,
        #[source]
        source: EngineError,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// How many replicas, on how many threads (0 = all cores), under which
/// master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaPlan {
    pub replicas: usize,
    pub threads: usize,
    pub master_seed: u64,
}

impl ReplicaPlan {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replicas as u64)
            .map(|r| replica_seed(self.master_seed, r))
            .collect()
    }

    /// Runs `job(replica, seed)` for every replica and returns the results
    /// in replica order.
    pub fn run<T, F>(&self, job: F) -> Result<Vec<T>, RunError>
    where
        T: Send,
        F: Fn(usize, u64) -> Result<T, EngineError> + Sync,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| RunError::Pool(e.to_string()))?;
        let seeds = self.seeds();
        pool.install(|| {
            seeds
                .par_iter()
                .enumerate()
                .map(|(i, &s)| job(i, s).map_err(|source| RunError::Engine { replica: i, source }))
                .collect()
        })
    }
}

/// Warm-up used when none is given: `5 / nu`, or `0.2 / nu` with
/// mean-field seeding.
pub fn default_warmup(params: &ModelParams) -> f64 {
    if params.seed_pstar.is_some() {
        0.2 / params.nu
    } else {
        5.0 / params.nu
    }
}

/// Background-only run measured in trade time.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySpec {
    pub params: ModelParams,
    pub warmup: Option<f64>,
    /// Trades measured per replica.
    pub trades: u64,
    /// Variogram lags (trades).
    pub lags: Vec<usize>,
    pub profile_max_offset: usize,
    /// Book snapshot every this many trades; 0 disables the profile.
    pub profile_every: u64,
    pub bestvol_max: u64,
    pub bestvol_per_decade: usize,
    /// Empty disables the Markov accumulator.
    pub markov_lags: Vec<usize>,
    /// Empty disables the sign autocorrelation.
    pub sign_lags: Vec<usize>,
}

impl StationarySpec {
    pub fn new(params: ModelParams, trades: u64, lags: Vec<usize>) -> Self {
        Self {
            params,
            warmup: None,
            trades,
            lags,
            profile_max_offset: 200,
            profile_every: 0,
            bestvol_max: 10_000_000,
            bestvol_per_decade: 10,
            markov_lags: Vec::new(),
            sign_lags: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryStats {
    /// Mid-price in half-ticks, trade time.
    pub variogram: VariogramAcc,
    pub profile: ProfileAcc,
    /// Volume at both best quotes, sampled after every trade.
    pub bestvol: BestVolumeHist,
    pub markov: MarkovAcc,
    pub signs: SignAutocorr,
    pub trades: u64,
    pub duration: f64,
}

impl StationaryStats {
    fn new(spec: &StationarySpec) -> Self {
        Self {
            variogram: VariogramAcc::new(spec.lags.clone(), 0.5),
            profile: ProfileAcc::new(spec.profile_max_offset),
            bestvol: BestVolumeHist::new(spec.bestvol_max, spec.bestvol_per_decade),
            markov: MarkovAcc::new(spec.markov_lags.clone(), Origins::Sliding),
            signs: SignAutocorr::new(spec.sign_lags.clone()),
            trades: 0,
            duration: 0.0,
        }
    }

    pub fn merge(&mut self, o: &Self) {
        self.variogram.merge(&o.variogram);
        self.profile.merge(&o.profile);
        self.bestvol.merge(&o.bestvol);
        self.markov.merge(&o.markov);
        self.signs.merge(&o.signs);
        self.trades += o.trades;
        self.duration += o.duration;
    }
}

pub fn stationary_replica(spec: &StationarySpec, seed: u64) -> Result<StationaryStats, EngineError> {
    let warmup = spec.warmup.unwrap_or_else(|| default_warmup(&spec.params));
    let mut engine = Engine::init_stationary(spec.params.clone(), seed, warmup)?;
    let mut st = StationaryStats::new(spec);
    let book_mid = |e: &Engine| e.book().best_bid() + e.book().best_ask();
    st.variogram.push(book_mid(&engine));
    let markov = !spec.markov_lags.is_empty();
    let signs = !spec.sign_lags.is_empty();
    for k in 1..=spec.trades {
        let rec = engine.next_trade()?;
        st.variogram.push(rec.post_bid + rec.post_ask);
        st.bestvol.record(engine.book().best_bid_volume());
        st.bestvol.record(engine.book().best_ask_volume());
        if markov {
            st.markov.push(&rec);
        }
        if signs {
            st.signs.push(rec.sign);
        }
        if spec.profile_every > 0 && k % spec.profile_every == 0 {
            st.profile.record(engine.book());
        }
    }
    st.trades = spec.trades;
    st.duration = engine.time();
    Ok(st)
}

/// Per-replica statistics, in replica order.
pub fn run_stationary(spec: &StationarySpec, plan: &ReplicaPlan) -> Result<Vec<StationaryStats>, RunError> {
    plan.run(|_, seed| stationary_replica(spec, seed))
}

pub fn merge_stationary(parts: &[StationaryStats]) -> Option<StationaryStats> {
    let (first, rest) = parts.split_first()?;
    let mut m = first.clone();
    for p in rest {
        m.merge(p);
    }
    Some(m)
}

/// One meta-order per replica, started from a warmed-up book.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactSpec {
    pub params: ModelParams,
    pub warmup: Option<f64>,
    pub meta: MetaOrderSpec,
    pub q_grid: Vec<u64>,
    /// Execution trades after which a trajectory is declared incomplete.
    pub max_trades: u64,
    /// Length of the recorded execution path (trades).
    pub path_len: usize,
    pub markov_lags: Vec<usize>,
    /// Profile of the book right after completion; 0 disables.
    pub profile_max_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactStats {
    pub impact: ImpactAcc,
    /// Lags measured from the first trade after the meta-order starts.
    pub markov: MarkovAcc,
    pub profile_after: ProfileAcc,
}

impl ImpactStats {
    fn new(spec: &ImpactSpec) -> Self {
        Self {
            impact: ImpactAcc::new(spec.q_grid.clone(), spec.path_len, spec.meta.post_horizon as usize),
            markov: MarkovAcc::new(spec.markov_lags.clone(), Origins::First),
            profile_after: ProfileAcc::new(spec.profile_max_offset),
        }
    }

    pub fn merge(&mut self, o: &Self) {
        self.impact.merge(&o.impact);
        self.markov.merge(&o.markov);
        self.profile_after.merge(&o.profile_after);
    }
}

pub fn impact_replica(spec: &ImpactSpec, seed: u64) -> Result<ImpactStats, EngineError> {
    let warmup = spec.warmup.unwrap_or_else(|| default_warmup(&spec.params));
    let mut engine = Engine::init_stationary(spec.params.clone(), seed, warmup)?;
    let mut st = ImpactStats::new(spec);
    let markov = !spec.markov_lags.is_empty();
    let ImpactStats { markov: acc, profile_after, .. } = &mut st;
    let mut observe = |rec: &TradeRecord| {
        if markov {
            acc.push(rec);
        }
    };
    let mut tr = engine.execute_meta(spec.meta, &spec.q_grid, spec.max_trades, &mut observe)?;
    if tr.complete {
        if spec.profile_max_offset > 0 {
            profile_after.record(engine.book());
        }
        engine.record_post(&mut tr, spec.meta.post_horizon, &mut observe)?;
    }
    st.impact.add(&tr);
    Ok(st)
}

pub fn run_impact(spec: &ImpactSpec, plan: &ReplicaPlan) -> Result<Vec<ImpactStats>, RunError> {
    plan.run(|_, seed| impact_replica(spec, seed))
}

pub fn merge_impact(parts: &[ImpactStats]) -> Option<ImpactStats> {
    let (first, rest) = parts.split_first()?;
    let mut m = first.clone();
    for p in rest {
        m.merge(p);
    }
    Some(m)
}
