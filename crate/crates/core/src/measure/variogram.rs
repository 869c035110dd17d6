//! Price variogram `D(t) = <(p(t0 + t) - p(t0))^2>` and the quantities
//! derived from it: signature plot, phase statistic, Hurst exponent and the
//! confined-regime fit.
//!
//! Prices enter as integers in units of a fixed quantum (half a tick for
//! mid-prices), so all accumulator sums are exact and merging replicas is
//! associative and commutative bit for bit.

use std::io::{self, Write};

use super::fit::{line_fit, power_fit, PowerFit};
use super::MeasureError;

/// Integer lags spaced roughly evenly in `log t`, `per_decade` points per
/// decade, always including the powers of ten, up to `max_lag`.
pub fn log_lags(max_lag: usize, per_decade: usize) -> Vec<usize> {
    let mut lags = Vec::new();
    let per_decade = per_decade.max(1);
    let mut k = 0u32;
    loop {
        let t = 10f64.powf(f64::from(k) / per_decade as f64).round() as usize;
        if t > max_lag {
            break;
        }
        if lags.last() != Some(&t) {
            lags.push(t);
        }
        k += 1;
    }
    lags
}

#[derive(Debug, Clone)]
pub struct VariogramAcc {
    quantum: f64,
    lags: Vec<usize>,
    sum2: Vec<u128>,
    sum4: Vec<u128>,
    count: Vec<u64>,
    // Ring buffer of the most recent prices of the current series.
    history: Vec<i64>,
    head: usize,
    filled: usize,
}

impl VariogramAcc {
    /// `quantum` is the price value of one integer unit (in ticks).
    pub fn new(lags: Vec<usize>, quantum: f64) -> Self {
        assert!(lags.iter().all(|&l| l > 0), "lags must be positive");
        let max = lags.iter().copied().max().unwrap_or(0);
        let n = lags.len();
        Self {
            quantum,
            lags,
            sum2: vec![0; n],
            sum4: vec![0; n],
            count: vec![0; n],
            history: vec![0; max + 1],
            head: 0,
            filled: 0,
        }
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    /// Appends the next price of the current series.
    pub fn push(&mut self, price: i64) {
        let cap = self.history.len();
        self.head = (self.head + 1) % cap;
        self.history[self.head] = price;
        self.filled = (self.filled + 1).min(cap);
        for (i, &lag) in self.lags.iter().enumerate() {
            if lag >= self.filled {
                continue;
            }
            let past = self.history[(self.head + cap - lag) % cap];
            let d = u128::from((price - past).unsigned_abs());
            let d2 = d * d;
            self.sum2[i] += d2;
            self.sum4[i] += d2 * d2;
            self.count[i] += 1;
        }
    }

    /// Starts an independent series; no increment spans the break.
    pub fn break_series(&mut self) {
        self.filled = 0;
    }

    /// Adds the sums of `other`, which must share lags and quantum.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.lags, other.lags, "merging variograms with different lags");
        assert_eq!(self.quantum, other.quantum);
        for i in 0..self.lags.len() {
            self.sum2[i] += other.sum2[i];
            self.sum4[i] += other.sum4[i];
            self.count[i] += other.count[i];
        }
    }

    /// Exact integer sums `(sum d^2, sum d^4, count)` per lag.
    pub fn raw(&self) -> Vec<(usize, u128, u128, u64)> {
        (0..self.lags.len())
            .map(|i| (self.lags[i], self.sum2[i], self.sum4[i], self.count[i]))
            .collect()
    }

    /// Signature table, one row per lag with at least two samples.
    ///
    /// Increments taken from overlapping windows are correlated. For
    /// independent steps, squared increments `L` apart in origin overlap in
    /// a fraction `(1 - k/L)` of their steps, which inflates the variance
    /// of the mean by `kappa(L) = 1 + 2 sum_{k<L} (1 - k/L)^2
    /// = 1 + (L-1)(2L-1)/(3L)` (about `2L/3`). The reported stderr is
    /// `sqrt(var(d^2) * min(kappa, n) / n)`.
    pub fn signature(&self) -> Vec<SignatureRow> {
        let q2 = self.quantum * self.quantum;
        let mut rows = Vec::new();
        for i in 0..self.lags.len() {
            let n = self.count[i];
            if n < 2 {
                continue;
            }
            let nf = n as f64;
            let m2 = self.sum2[i] as f64 / nf;
            let m4 = self.sum4[i] as f64 / nf;
            let var = (m4 - m2 * m2).max(0.0) * nf / (nf - 1.0);
            let lag = self.lags[i] as f64;
            let kappa = 1.0 + (lag - 1.0) * (2.0 * lag - 1.0) / (3.0 * lag);
            let stderr = (var * kappa.min(nf) / nf).sqrt() * q2;
            let d = m2 * q2;
            rows.push(SignatureRow {
                t: self.lags[i],
                d,
                sigma2: d / lag,
                stderr,
                n,
            });
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignatureRow {
    pub t: usize,
    /// `D(t)` in ticks squared.
    pub d: f64,
    /// `D(t) / t`.
    pub sigma2: f64,
    /// Standard error of `d`.
    pub stderr: f64,
    pub n: u64,
}

pub fn write_signature_csv<W: Write>(rows: &[SignatureRow], mut out: W) -> io::Result<()> {
    writeln!(out, "t,D,sigma2,stderr,n")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.t, r.d, r.sigma2, r.stderr, r.n)?;
    }
    Ok(())
}

fn row_at(rows: &[SignatureRow], t: usize) -> Result<&SignatureRow, MeasureError> {
    rows.iter()
        .find(|r| r.t == t)
        .ok_or(MeasureError::MissingLag(t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseStatistic {
    pub s: f64,
    pub stderr: f64,
}

/// `S = ln[(1/100) D(1000) / D(10)]`: zero for diffusion, positive for
/// trending and negative for mean-reverting prices. The stderr propagates
/// the two variogram errors as if independent.
pub fn phase_statistic(rows: &[SignatureRow]) -> Result<PhaseStatistic, MeasureError> {
    let short = row_at(rows, 10)?;
    let long = row_at(rows, 1000)?;
    if !(short.d > 0.0 && long.d > 0.0) {
        return Err(MeasureError::Degenerate("zero variogram at t = 10 or t = 1000"));
    }
    let s = (long.d / short.d / 100.0).ln();
    let stderr = ((short.stderr / short.d).powi(2) + (long.stderr / long.d).powi(2)).sqrt();
    Ok(PhaseStatistic { s, stderr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HurstFit {
    pub h: f64,
    pub stderr: f64,
    pub fit: PowerFit,
}

/// Hurst exponent from a weighted log-log fit of `D(t)` over `range`.
/// Needs at least eight lags with positive `D`.
pub fn hurst_fit(rows: &[SignatureRow], range: (f64, f64)) -> Result<HurstFit, MeasureError> {
    let t: Vec<f64> = rows.iter().map(|r| r.t as f64).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.d).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.stderr).collect();
    let fit = power_fit(&t, &d, Some(&e), range, 8)?;
    if fit.excluded > 0 {
        log::warn!("hurst fit dropped {} lags with D <= 0", fit.excluded);
    }
    Ok(HurstFit {
        h: fit.exponent / 2.0,
        stderr: fit.stderr / 2.0,
        fit,
    })
}

/// Fit of `y(t) = plateau - c / sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfinedFit {
    pub plateau: f64,
    pub plateau_stderr: f64,
    pub c: f64,
    pub c_stderr: f64,
    pub r2: f64,
    pub n: usize,
}

/// Which column of the signature table a confined fit describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Variogram,
    Signature,
}

/// Weighted fit of `plateau - c / sqrt(t)` to `D(t)` or `sigma^2_t` over
/// `range`.
pub fn confined_fit(
    rows: &[SignatureRow],
    range: (f64, f64),
    observable: Observable,
) -> Result<ConfinedFit, MeasureError> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for r in rows {
        let t = r.t as f64;
        if t < range.0 || t > range.1 {
            continue;
        }
        let (v, e) = match observable {
            Observable::Variogram => (r.d, r.stderr),
            Observable::Signature => (r.sigma2, r.stderr / t),
        };
        x.push(1.0 / t.sqrt());
        y.push(v);
        w.push(if e > 0.0 { 1.0 / (e * e) } else { 1.0 });
    }
    let f = line_fit(&x, &y, &w)?;
    Ok(ConfinedFit {
        plateau: f.intercept,
        plateau_stderr: f.intercept_stderr,
        c: -f.slope,
        c_stderr: f.slope_stderr,
        r2: f.r2,
        n: f.n,
    })
}

/// Inverse-variance weighted mean of `sigma^2_t` over `range`, in ticks
/// squared per trade. Multiplying by the trade rate gives the diffusion
/// constant in ticks squared per second.
pub fn mean_sigma2(rows: &[SignatureRow], range: (f64, f64)) -> Result<(f64, f64), MeasureError> {
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut n = 0;
    for r in rows {
        let t = r.t as f64;
        if t < range.0 || t > range.1 || !(r.stderr > 0.0) {
            continue;
        }
        let e = r.stderr / t;
        let w = 1.0 / (e * e);
        sw += w;
        swx += w * r.sigma2;
        n += 1;
    }
    if n == 0 {
        return Err(MeasureError::TooFewPoints { needed: 1, got: 0 });
    }
    Ok((swx / sw, (1.0 / sw).sqrt()))
}
