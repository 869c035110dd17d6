//! Average book shape around the mid-price and the mean-field comparison
//! `rho(p) = (lambda / nu) (1 - exp(-p / p*))`, `p* = sqrt(D / 2 nu)`.

use std::io::{self, Write};

use crate::book::{OrderBook, Side};
use crate::engine::seed_profile;

/// Volume sums per half-tick offset from the mid-price. Offset index `j`
/// means `j / 2` ticks; a level sits at an odd or even `j` depending on the
/// parity of `bid + ask`, so each bin keeps its own sample count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileAcc {
    max_j: usize,
    bid_sum: Vec<u64>,
    ask_sum: Vec<u64>,
    bid_n: Vec<u64>,
    ask_n: Vec<u64>,
    snapshots: u64,
}

impl ProfileAcc {
    /// Covers offsets up to `max_offset` ticks.
    pub fn new(max_offset: usize) -> Self {
        let max_j = 2 * max_offset;
        Self {
            max_j,
            bid_sum: vec![0; max_j + 1],
            ask_sum: vec![0; max_j + 1],
            bid_n: vec![0; max_j + 1],
            ask_n: vec![0; max_j + 1],
            snapshots: 0,
        }
    }

    pub fn snapshots(&self) -> u64 {
        self.snapshots
    }

    pub fn record(&mut self, book: &OrderBook) {
        let twice_mid = book.best_bid() + book.best_ask();
        let max = self.max_j as i64;
        let lo = (twice_mid - max).div_euclid(2);
        let hi = (twice_mid + max).div_euclid(2) + 1;
        for level in lo.max(book.lo())..=hi.min(book.hi()) {
            let j = 2 * level - twice_mid;
            if j == 0 || j.abs() > max {
                continue;
            }
            let v = u64::from(book.volume_at(level));
            let k = j.unsigned_abs() as usize;
            if j > 0 {
                self.ask_sum[k] += v;
                self.ask_n[k] += 1;
            } else {
                self.bid_sum[k] += v;
                self.bid_n[k] += 1;
            }
        }
        self.snapshots += 1;
    }

    pub fn merge(&mut self, o: &Self) {
        assert_eq!(self.max_j, o.max_j);
        for k in 0..=self.max_j {
            self.bid_sum[k] += o.bid_sum[k];
            self.ask_sum[k] += o.ask_sum[k];
            self.bid_n[k] += o.bid_n[k];
            self.ask_n[k] += o.ask_n[k];
        }
        self.snapshots += o.snapshots;
    }

    /// `(offset_ticks, mean_volume)` for one side, populated bins only.
    pub fn side(&self, side: Side) -> Vec<(f64, f64)> {
        let (sum, n) = match side {
            Side::Buy => (&self.bid_sum, &self.bid_n),
            Side::Sell => (&self.ask_sum, &self.ask_n),
        };
        (1..=self.max_j)
            .filter(|&k| n[k] > 0)
            .map(|k| (k as f64 / 2.0, sum[k] as f64 / n[k] as f64))
            .collect()
    }

    /// Mean volume per level over offsets in `[lo, hi]` ticks.
    pub fn band_mean(&self, side: Side, lo: f64, hi: f64) -> f64 {
        let pts: Vec<f64> = self
            .side(side)
            .into_iter()
            .filter(|(o, _)| *o >= lo && *o <= hi)
            .map(|(_, v)| v)
            .collect();
        pts.iter().sum::<f64>() / pts.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub offset: f64,
    pub side: Side,
    pub measured: f64,
    pub mean_field: f64,
}

#[derive(Debug, Clone)]
pub struct ProfileComparison {
    pub pstar: f64,
    pub rows: Vec<ProfileRow>,
    /// Largest `|measured / mean_field - 1|` over offsets in
    /// `[0.5 p*, 3 p*]`, both sides.
    pub worst_deviation: f64,
}

/// Overlays the mean-field profile. `diffusion` is the price diffusion
/// constant in ticks squared per second, measured from the same run.
pub fn profile_compare(acc: &ProfileAcc, depth: f64, diffusion: f64, nu: f64) -> ProfileComparison {
    let pstar = (diffusion / (2.0 * nu)).sqrt();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for side in [Side::Buy, Side::Sell] {
        for (offset, measured) in acc.side(side) {
            let mean_field = seed_profile(offset, pstar, depth);
            if offset >= 0.5 * pstar && offset <= 3.0 * pstar {
                worst = worst.max((measured / mean_field - 1.0).abs());
            }
            rows.push(ProfileRow {
                offset,
                side,
                measured,
                mean_field,
            });
        }
    }
    ProfileComparison {
        pstar,
        rows,
        worst_deviation: worst,
    }
}

pub fn write_profile_csv<W: Write>(rows: &[ProfileRow], mut out: W) -> io::Result<()> {
    writeln!(out, "offset_ticks,side,mean_volume,mf_volume")?;
    for r in rows {
        let side = match r.side {
            Side::Buy => "bid",
            Side::Sell => "ask",
        };
        writeln!(out, "{},{},{},{}", r.offset, side, r.measured, r.mean_field)?;
    }
    Ok(())
}
