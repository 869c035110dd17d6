//! Linear propagator model of price formation.
//!
//! The price after `t` trades is `p_t = sum_{t' < t} G_{t - t'} e_{t'}`,
//! where each sign belongs to a meta-order (always `+1`) with probability
//! `phi` and is otherwise drawn from a correlated background stream with
//! autocorrelation `g`. With that mixture,
//!
//! ```text
//! <e_t>                 = phi
//! <e_t e_t'> - phi^2    = (1 - phi)^2 g_{t - t'}     for t != t'
//! <e_t^2> - phi^2       = 1 - phi^2
//! ```
//!
//! so the lag-0 term of the variance sum uses `(1 + phi) / (1 - phi)` in
//! place of `g_0`.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::flow::{lmf_autocorrelation, FlowError, SignMode, SignStream};
use crate::seed::derive_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("meta fraction must lie in [0, 1), got {0}")]
    MetaFraction(f64),
    #[error("tabulated {what} has {got} entries, horizon needs {needed}")]
    ShortTable {
        what: &'static str,
        got: usize,
        needed: usize,
    },
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("time {t} exceeds horizon {horizon}")]
    Horizon { t: usize, horizon: usize },
    #[error("Monte Carlo paths need a sign generator (iid or LMF correlations)")]
    NoGenerator,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Response kernel `G_lag`, zero for negative lags.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `values[lag]` for `lag = 0..`; `asymptote` is the permanent part.
    Tabulated { values: Vec<f64>, asymptote: f64 },
    /// `g0 (t0 + lag)^-beta`, whose permanent part is 0 for `beta > 0`.
    Power { g0: f64, beta: f64, t0: f64 },
}

impl Kernel {
    pub fn power(g0: f64, beta: f64) -> Self {
        Kernel::Power { g0, beta, t0: 1.0 }
    }

    pub fn asymptote(&self) -> f64 {
        match self {
            Kernel::Tabulated { asymptote, .. } => *asymptote,
            Kernel::Power { g0, beta, .. } => {
                if *beta > 0.0 {
                    0.0
                } else if *beta == 0.0 {
                    *g0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn table(&self, horizon: usize) -> Result<Vec<f64>, PropagatorError> {
        match self {
            Kernel::Tabulated { values, .. } => {
                if values.len() <= horizon {
                    return Err(PropagatorError::ShortTable {
                        what: "kernel",
                        got: values.len(),
                        needed: horizon + 1,
                    });
                }
                Ok(values[..=horizon].to_vec())
            }
            Kernel::Power { g0, beta, t0 } => {
                if !(*t0 > 0.0 && g0.is_finite() && beta.is_finite()) {
                    return Err(PropagatorError::Kernel(format!(
                        "need finite g0, beta and t0 > 0 (g0 {g0}, beta {beta}, t0 {t0})"
                    )));
                }
                Ok((0..=horizon).map(|l| g0 * (t0 + l as f64).powf(-beta)).collect())
            }
        }
    }
}

/// Autocorrelation `g` of the background signs.
#[derive(Debug, Clone, PartialEq)]
pub enum SignCorrelation {
    Iid,
    /// `g_lag = lag^-gamma` for `lag >= 1`.
    Power { gamma: f64 },
    /// The exact stationary autocorrelation of the LMF generator.
    Lmf { gamma: f64 },
    /// `values[lag]`, `values[0] = 1`.
    Tabulated(Vec<f64>),
}

impl SignCorrelation {
    fn table(&self, horizon: usize) -> Result<Vec<f64>, PropagatorError> {
        Ok(match self {
            SignCorrelation::Iid => {
                let mut g = vec![0.0; horizon + 1];
                g[0] = 1.0;
                g
            }
            SignCorrelation::Power { gamma } => (0..=horizon)
                .map(|l| if l == 0 { 1.0 } else { (l as f64).powf(-gamma) })
                .collect(),
            SignCorrelation::Lmf { gamma } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(FlowError::Gamma(*gamma).into());
                }
                lmf_autocorrelation(*gamma, horizon)
            }
            SignCorrelation::Tabulated(v) => {
                if v.len() <= horizon {
                    return Err(PropagatorError::ShortTable {
                        what: "sign correlation",
                        got: v.len(),
                        needed: horizon + 1,
                    });
                }
                v[..=horizon].to_vec()
            }
        })
    }

    fn generator(&self) -> Option<SignMode> {
        match self {
            SignCorrelation::Iid => Some(SignMode::Iid),
            SignCorrelation::Lmf { gamma } => Some(SignMode::Lmf { gamma: *gamma }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorSpec {
    pub kernel: Kernel,
    pub signs: SignCorrelation,
    /// Meta-order share of trades.
    pub phi: f64,
    pub horizon: usize,
}

/// Expected price change split into its permanent (linear in `t`) and
/// transient parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactSplit {
    pub total: f64,
    pub linear: f64,
    pub transient: f64,
}

/// A validated spec with its kernel and covariance tables.
#[derive(Debug, Clone)]
pub struct Propagator {
    spec: PropagatorSpec,
    kernel: Vec<f64>,
    corr: Vec<f64>,
}

impl Propagator {
    pub fn new(spec: PropagatorSpec) -> Result<Self, PropagatorError> {
        if !(0.0..1.0).contains(&spec.phi) {
            return Err(PropagatorError::MetaFraction(spec.phi));
        }
        let kernel = spec.kernel.table(spec.horizon)?;
        let mut corr = spec.signs.table(spec.horizon)?;
        corr[0] = (1.0 + spec.phi) / (1.0 - spec.phi);
        Ok(Self { spec, kernel, corr })
    }

    pub fn spec(&self) -> &PropagatorSpec {
        &self.spec
    }

    fn check(&self, t: usize) -> Result<(), PropagatorError> {
        if t > self.spec.horizon {
            Err(PropagatorError::Horizon { t, horizon: self.spec.horizon })
        } else {
            Ok(())
        }
    }

    /// `phi sum_{t'=0}^{t-1} G_{t-t'}` and its split.
    pub fn impact(&self, t: usize) -> Result<ImpactSplit, PropagatorError> {
        self.check(t)?;
        let phi = self.spec.phi;
        let g_inf = self.spec.kernel.asymptote();
        let lags = &self.kernel[1..=t];
        let total = phi * lags.iter().sum::<f64>();
        let (linear, transient) = if g_inf.is_finite() {
            (
                phi * g_inf * t as f64,
                phi * lags.iter().map(|g| g - g_inf).sum::<f64>(),
            )
        } else {
            (0.0, total)
        };
        Ok(ImpactSplit { total, linear, transient })
    }

    /// Variance of `p_t` by direct double summation.
    pub fn variance(&self, t: usize) -> Result<f64, PropagatorError> {
        self.check(t)?;
        let g = &self.kernel;
        let mut s = 0.0;
        for a in 1..=t {
            for b in 1..=t {
                s += g[a] * g[b] * self.corr[a.abs_diff(b)];
            }
        }
        Ok((1.0 - self.spec.phi).powi(2) * s)
    }

    /// Variance for every `t = 0..=horizon`, built incrementally in
    /// `O(horizon^2)`.
    pub fn variance_curve(&self) -> Vec<f64> {
        let g = &self.kernel;
        let scale = (1.0 - self.spec.phi).powi(2);
        let mut out = Vec::with_capacity(self.spec.horizon + 1);
        let mut s = 0.0;
        out.push(0.0);
        for a in 1..=self.spec.horizon {
            let cross: f64 = (1..a).map(|b| g[b] * self.corr[a - b]).sum();
            s += g[a] * g[a] * self.corr[0] + 2.0 * g[a] * cross;
            out.push(scale * s);
        }
        out
    }

    /// Simulates `paths` independent price paths of length `max(times)` and
    /// returns the sample mean and variance of `p_t` at each requested time.
    pub fn monte_carlo(
        &self,
        times: &[usize],
        paths: usize,
        seed: u64,
    ) -> Result<Vec<McRow>, PropagatorError> {
        let mode = self.spec.signs.generator().ok_or(PropagatorError::NoGenerator)?;
        let t_max = times.iter().copied().max().unwrap_or(0);
        self.check(t_max)?;
        let phi = self.spec.phi;
        let mut sums = vec![[0.0f64; 4]; times.len()];
        let mut eps = vec![0.0f64; t_max];
        for k in 0..paths as u64 {
            let mut stream = SignStream::new(mode, derive_seed(seed, 2 * k))?;
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(seed, 2 * k + 1));
            for e in eps.iter_mut() {
                let bg = stream.next_sign();
                *e = if phi > 0.0 && rng.random::<f64>() < phi {
                    1.0
                } else {
                    f64::from(bg)
                };
            }
            for (acc, &t) in sums.iter_mut().zip(times) {
                // p_t = sum_{s < t} G_{t-s} e_s
                let p: f64 = (0..t).map(|s| self.kernel[t - s] * eps[s]).sum();
                let p2 = p * p;
                acc[0] += p;
                acc[1] += p2;
                acc[2] += p2 * p;
                acc[3] += p2 * p2;
            }
        }
        let n = paths as f64;
        Ok(times
            .iter()
            .zip(&sums)
            .map(|(&t, s)| {
                let m = s[0] / n;
                let raw2 = s[1] / n;
                let var = (raw2 - m * m) * n / (n - 1.0);
                // Central fourth moment for the stderr of the variance.
                let m4 = s[3] / n - 4.0 * m * s[2] / n + 6.0 * m * m * raw2 - 3.0 * m.powi(4);
                McRow {
                    t,
                    mean: m,
                    mean_stderr: (var / n).sqrt(),
                    variance: var,
                    variance_stderr: ((m4 - var * var).max(0.0) / n).sqrt(),
                }
            })
            .collect())
    }

    /// Rows of `propagator.csv` at the given times.
    pub fn table(&self, times: &[usize], mc: Option<&[McRow]>) -> Result<Vec<PropagatorRow>, PropagatorError> {
        let curve = self.variance_curve();
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let imp = self.impact(t)?;
                let m = mc.and_then(|rows| rows.get(i)).filter(|r| r.t == t);
                Ok(PropagatorRow {
                    t,
                    impact: imp.total,
                    impact_linear: imp.linear,
                    impact_transient: imp.transient,
                    variance_analytic: curve[t],
                    variance_mc: m.map(|r| r.variance),
                    mc_stderr: m.map(|r| r.variance_stderr),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRow {
    pub t: usize,
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorRow {
    pub t: usize,
    pub impact: f64,
    pub impact_linear: f64,
    pub impact_transient: f64,
    pub variance_analytic: f64,
    pub variance_mc: Option<f64>,
    pub mc_stderr: Option<f64>,
}

pub fn prop_impact(spec: &PropagatorSpec, t: usize) -> Result<ImpactSplit, PropagatorError> {
    Propagator::new(spec.clone())?.impact(t)
}

pub fn prop_variance(spec: &PropagatorSpec, t: usize) -> Result<f64, PropagatorError> {
    Propagator::new(spec.clone())?.variance(t)
}

/// Missing Monte Carlo values are written as empty fields.
pub fn write_propagator_csv<W: Write>(rows: &[PropagatorRow], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "t,impact,impact_linear,impact_transient,variance_analytic,variance_mc,mc_stderr"
    )?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.impact,
            r.impact_linear,
            r.impact_transient,
            r.variance_analytic,
            opt(r.variance_mc),
            opt(r.mc_stderr)
        )?;
    }
    Ok(())
}
