//! Meta-order impact: `I(Q)` at volume milestones, the time-resolved path
//! during execution and the relaxation after completion.
//!
//! Mid-prices arrive in half-ticks (`bid + ask`), so every sum is an exact
//! integer and replica merges commute and associate exactly.

use std::io::{self, Write};

use super::fit::{power_fit, PowerFit};
use super::MeasureError;
use crate::engine::ImpactTrajectory;

/// Price value of one accumulator unit, in ticks.
const QUANTUM: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Moments {
    sum: i128,
    sumsq: u128,
    n: u64,
}

impl Moments {
    fn add(&mut self, x: i64) {
        self.sum += i128::from(x);
        self.sumsq += u128::from(x.unsigned_abs()) * u128::from(x.unsigned_abs());
        self.n += 1;
    }

    fn merge(&mut self, o: &Self) {
        self.sum += o.sum;
        self.sumsq += o.sumsq;
        self.n += o.n;
    }

    /// Mean and standard error in units of `scale`.
    fn summary(&self, scale: f64) -> (f64, f64) {
        if self.n == 0 {
            return (f64::NAN, f64::NAN);
        }
        let n = self.n as f64;
        let m = self.sum as f64 / n;
        let se = if self.n > 1 {
            let v = (self.sumsq as f64 / n - m * m).max(0.0) * n / (n - 1.0);
            (v / n).sqrt()
        } else {
            f64::NAN
        };
        (m * scale, se * scale)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpactAcc {
    q_grid: Vec<u64>,
    at_q: Vec<Moments>,
    path: Vec<Moments>,
    post: Vec<Moments>,
    // I_T - I_{T+t} per trajectory, for the decay fit.
    drop: Vec<Moments>,
    final_impact: Moments,
    plateau: Moments,
    plateau_window: usize,
    complete: u64,
    incomplete: u64,
    trades: u64,
    meta_trades: u64,
}

impl ImpactAcc {
    /// `path_len` and `post_len` bound the recorded time-resolved paths.
    /// The plateau is the mean over the last quarter of the post path.
    pub fn new(q_grid: Vec<u64>, path_len: usize, post_len: usize) -> Self {
        let nq = q_grid.len();
        Self {
            q_grid,
            at_q: vec![Moments::default(); nq],
            path: vec![Moments::default(); path_len],
            post: vec![Moments::default(); post_len],
            drop: vec![Moments::default(); post_len],
            final_impact: Moments::default(),
            plateau: Moments::default(),
            plateau_window: post_len / 4,
            complete: 0,
            incomplete: 0,
            trades: 0,
            meta_trades: 0,
        }
    }

    pub fn q_grid(&self) -> &[u64] {
        &self.q_grid
    }

    pub fn complete(&self) -> u64 {
        self.complete
    }

    pub fn incomplete(&self) -> u64 {
        self.incomplete
    }

    /// Fraction of execution-period trades that belonged to the meta-order.
    pub fn meta_fraction(&self) -> f64 {
        self.meta_trades as f64 / self.trades as f64
    }

    /// Adds one trajectory. Incomplete ones are only counted.
    pub fn add(&mut self, tr: &ImpactTrajectory) {
        if !tr.complete {
            self.incomplete += 1;
            return;
        }
        self.complete += 1;
        self.trades += tr.path.len() as u64;
        self.meta_trades += tr.meta_trades;
        for (i, &q) in self.q_grid.iter().enumerate() {
            if let Some(&(_, p)) = tr.milestones.iter().find(|m| m.0 == q) {
                self.at_q[i].add(p - tr.start);
            }
        }
        for (m, &p) in self.path.iter_mut().zip(&tr.path) {
            m.add(p - tr.start);
        }
        let end = tr.end();
        self.final_impact.add(end - tr.start);
        for ((m, d), &p) in self.post.iter_mut().zip(self.drop.iter_mut()).zip(&tr.post) {
            m.add(p - tr.start);
            d.add(end - p);
        }
        let w = self.plateau_window;
        if w > 0 && tr.post.len() >= self.post.len() {
            let tail = &tr.post[self.post.len() - w..self.post.len()];
            let s: i64 = tail.iter().map(|p| p - tr.start).sum();
            self.plateau.add(s);
        }
    }

    pub fn merge(&mut self, o: &Self) {
        assert_eq!(self.q_grid, o.q_grid);
        assert_eq!(self.path.len(), o.path.len());
        assert_eq!(self.post.len(), o.post.len());
        for (a, b) in self.at_q.iter_mut().zip(&o.at_q) {
            a.merge(b);
        }
        for (a, b) in self.path.iter_mut().zip(&o.path) {
            a.merge(b);
        }
        for (a, b) in self.post.iter_mut().zip(&o.post) {
            a.merge(b);
        }
        for (a, b) in self.drop.iter_mut().zip(&o.drop) {
            a.merge(b);
        }
        self.final_impact.merge(&o.final_impact);
        self.plateau.merge(&o.plateau);
        self.complete += o.complete;
        self.incomplete += o.incomplete;
        self.trades += o.trades;
        self.meta_trades += o.meta_trades;
    }

    /// Mean impact at each volume milestone, in ticks.
    pub fn curve(&self) -> Vec<ImpactRow> {
        self.q_grid
            .iter()
            .zip(&self.at_q)
            .map(|(&q, m)| {
                let (mean, stderr) = m.summary(QUANTUM);
                ImpactRow { q, mean, stderr, n: m.n }
            })
            .collect()
    }

    /// Mean price change after `t + 1` trades from the start of execution.
    pub fn path(&self) -> Vec<PathRow> {
        rows(&self.path, 1)
    }

    /// Mean impact at completion, `I_T`, with stderr.
    pub fn final_impact(&self) -> (f64, f64) {
        self.final_impact.summary(QUANTUM)
    }

    /// Relaxation after completion.
    pub fn decay(&self, early: (f64, f64)) -> DecayReport {
        let rows = rows(&self.post, 1);
        let drop_rows = rows_of(&self.drop);
        let t: Vec<f64> = drop_rows.iter().map(|r| r.t as f64).collect();
        let y: Vec<f64> = drop_rows.iter().map(|r| r.mean).collect();
        let e: Vec<f64> = drop_rows.iter().map(|r| r.stderr).collect();
        let theta = power_fit(&t, &y, Some(&e), early, 4);
        let scale = if self.plateau_window > 0 {
            QUANTUM / self.plateau_window as f64
        } else {
            QUANTUM
        };
        let (plateau, plateau_stderr) = self.plateau.summary(scale);
        let (final_mean, final_stderr) = self.final_impact();
        DecayReport {
            rows,
            theta,
            plateau,
            plateau_stderr,
            final_mean,
            final_stderr,
        }
    }
}

fn rows_of(ms: &[Moments]) -> Vec<PathRow> {
    rows(ms, 1)
}

fn rows(ms: &[Moments], offset: usize) -> Vec<PathRow> {
    ms.iter()
        .enumerate()
        .filter(|(_, m)| m.n > 0)
        .map(|(i, m)| {
            let (mean, stderr) = m.summary(QUANTUM);
            PathRow { t: i + offset, mean, stderr, n: m.n }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactRow {
    pub q: u64,
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRow {
    pub t: usize,
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    /// `I_{T+t}` for `t = 1..`, relative to the price at the start.
    pub rows: Vec<PathRow>,
    /// Power-law fit of `I_T - I_{T+t}` over the early range.
    pub theta: Result<PowerFit, MeasureError>,
    /// Mean of `I_{T+t}` over the last quarter of the recorded horizon.
    pub plateau: f64,
    pub plateau_stderr: f64,
    pub final_mean: f64,
    pub final_stderr: f64,
}

/// `I(Q) ~ Q^delta` over `q_range`. Needs six bins with at least 100
/// samples; bins with a nonpositive mean are dropped and counted.
pub fn impact_fit(rows: &[ImpactRow], q_range: (f64, f64)) -> Result<PowerFit, MeasureError> {
    let usable: Vec<&ImpactRow> = rows
        .iter()
        .filter(|r| r.n >= 100 && (r.q as f64) >= q_range.0 && (r.q as f64) <= q_range.1)
        .collect();
    if usable.len() < 6 {
        return Err(MeasureError::TooFewPoints {
            needed: 6,
            got: usable.len(),
        });
    }
    let x: Vec<f64> = usable.iter().map(|r| r.q as f64).collect();
    let y: Vec<f64> = usable.iter().map(|r| r.mean).collect();
    let e: Vec<f64> = usable.iter().map(|r| r.stderr).collect();
    let fit = power_fit(&x, &y, Some(&e), q_range, 6)?;
    if fit.excluded > 0 {
        log::warn!("impact fit dropped {} bins with nonpositive impact", fit.excluded);
    }
    Ok(fit)
}

pub fn write_impact_csv<W: Write>(rows: &[ImpactRow], mut out: W) -> io::Result<()> {
    writeln!(out, "Q,I_mean,I_stderr,n")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.q, r.mean, r.stderr, r.n)?;
    }
    Ok(())
}

pub fn write_decay_csv<W: Write>(rows: &[PathRow], mut out: W) -> io::Result<()> {
    writeln!(out, "t,I_mean,I_stderr,n")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.t, r.mean, r.stderr, r.n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(start: i64, path: Vec<i64>, post: Vec<i64>, milestones: Vec<(u64, i64)>) -> ImpactTrajectory {
        ImpactTrajectory {
            start,
            milestones,
            path,
            post,
            executed: 0,
            complete: true,
            meta_trades: 0,
            duration: 0.0,
        }
    }

    #[test]
    fn linear_synthetic_gives_unit_exponent() {
        let rows: Vec<ImpactRow> = (1..=100)
            .map(|q| ImpactRow { q, mean: 0.3 * q as f64, stderr: 0.01, n: 1000 })
            .collect();
        let f = impact_fit(&rows, (1.0, 100.0)).unwrap();
        assert!((f.exponent - 1.0).abs() < 1e-12);
        assert!((f.prefactor - 0.3).abs() < 1e-12);
    }

    #[test]
    fn noisy_square_root_gives_half() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(4);
        let rows: Vec<ImpactRow> = (1..=100)
            .map(|q| {
                let base = (q as f64).sqrt();
                let noise: f64 = rng.random_range(-1.0..1.0) * 0.05 * 3f64.sqrt();
                ImpactRow { q, mean: base * (1.0 + noise), stderr: 0.05 * base, n: 1000 }
            })
            .collect();
        let f = impact_fit(&rows, (1.0, 100.0)).unwrap();
        assert!((f.exponent - 0.5).abs() < 0.02, "{}", f.exponent);
    }

    #[test]
    fn impact_fit_needs_populated_bins() {
        let rows: Vec<ImpactRow> = (1..=10)
            .map(|q| ImpactRow { q, mean: q as f64, stderr: 0.1, n: if q < 6 { 500 } else { 50 } })
            .collect();
        assert!(matches!(
            impact_fit(&rows, (1.0, 10.0)),
            Err(MeasureError::TooFewPoints { needed: 6, got: 5 })
        ));
    }

    #[test]
    fn zero_length_trajectory_has_zero_impact() {
        let mut acc = ImpactAcc::new(vec![1], 4, 4);
        acc.add(&traj(10, vec![], vec![10, 10, 10, 10], vec![]));
        assert_eq!(acc.final_impact().0, 0.0);
        assert_eq!(acc.curve()[0].n, 0);
    }

    #[test]
    fn flat_market_has_flat_decay() {
        let mut acc = ImpactAcc::new(vec![1, 2], 3, 8);
        for _ in 0..5 {
            acc.add(&traj(0, vec![0, 0, 0], vec![0; 8], vec![(1, 0), (2, 0)]));
        }
        let d = acc.decay((1.0, 8.0));
        assert!(d.rows.iter().all(|r| r.mean == 0.0));
        assert_eq!(d.plateau, 0.0);
    }

    #[test]
    fn accounting_in_ticks() {
        let mut acc = ImpactAcc::new(vec![1, 2], 2, 4);
        acc.add(&traj(100, vec![102, 106], vec![104, 104, 102, 102], vec![(1, 102), (2, 106)]));
        acc.add(&traj(0, vec![2, 2], vec![2, 2, 0, 0], vec![(1, 2), (2, 2)]));
        let mut inc = traj(0, vec![], vec![], vec![]);
        inc.complete = false;
        acc.add(&inc);
        let c = acc.curve();
        assert_eq!(c[0].mean, 1.0);
        assert_eq!(c[1].mean, 2.0);
        assert_eq!(acc.final_impact().0, 2.0);
        assert_eq!(acc.incomplete(), 1);
        let d = acc.decay((1.0, 4.0));
        assert_eq!(d.rows[0].mean, 1.5);
        assert_eq!(d.plateau, 0.5);
    }

    #[test]
    fn merge_commutes() {
        let mut a = ImpactAcc::new(vec![1], 2, 2);
        let mut b = a.clone();
        a.add(&traj(0, vec![1, 3], vec![2, 2], vec![(1, 3)]));
        b.add(&traj(5, vec![9, 7], vec![5, 6], vec![(1, 9)]));
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab, ba);
    }
}
