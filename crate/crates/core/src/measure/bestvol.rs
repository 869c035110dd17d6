//! Log-binned histogram of the volume at the best quotes.

use std::io::{self, Write};

use super::fit::{power_fit, PowerFit};
use super::MeasureError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestVolumeHist {
    /// Lower bin edges; bin `i` holds `[edges[i], edges[i + 1])`, the last
    /// bin is open-ended.
    edges: Vec<u64>,
    counts: Vec<u64>,
}

impl BestVolumeHist {
    /// Bins of roughly equal log width, `per_decade` per decade, covering
    /// volumes up to `max_volume` (larger ones land in the last bin).
    pub fn new(max_volume: u64, per_decade: usize) -> Self {
        let mut edges = vec![1u64];
        let mut k = 1u32;
        loop {
            let e = 10f64.powf(f64::from(k) / per_decade.max(1) as f64).round() as u64;
            if e > max_volume {
                break;
            }
            if e > *edges.last().expect("nonempty") {
                edges.push(e);
            }
            k += 1;
        }
        let n = edges.len();
        Self {
            edges,
            counts: vec![0; n],
        }
    }

    pub fn record(&mut self, volume: u64) {
        if volume == 0 {
            return;
        }
        let i = self.edges.partition_point(|&e| e <= volume) - 1;
        self.counts[i] += 1;
    }

    pub fn merge(&mut self, o: &Self) {
        assert_eq!(self.edges, o.edges);
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(lo, hi, count)`; `hi` is `u64::MAX` for the open last bin.
    pub fn bins(&self) -> Vec<(u64, u64, u64)> {
        (0..self.edges.len())
            .map(|i| {
                let hi = self.edges.get(i + 1).copied().unwrap_or(u64::MAX);
                (self.edges[i], hi, self.counts[i])
            })
            .collect()
    }

    /// Probability density at the log-centre of each closed, nonempty bin.
    pub fn density(&self) -> Vec<(f64, f64, u64)> {
        let total = self.total() as f64;
        self.bins()
            .into_iter()
            .filter(|&(_, hi, c)| hi != u64::MAX && c > 0)
            .map(|(lo, hi, c)| {
                let centre = log_centre(lo, hi);
                (centre, c as f64 / (total * (hi - lo) as f64), c)
            })
            .collect()
    }

    /// Power-law fit of the density over volumes in `range`, weighted by
    /// bin counts. At least four populated bins are required.
    pub fn tail_fit(&self, range: (f64, f64)) -> Result<PowerFit, MeasureError> {
        let d = self.density();
        let x: Vec<f64> = d.iter().map(|p| p.0).collect();
        let y: Vec<f64> = d.iter().map(|p| p.1).collect();
        let e: Vec<f64> = d.iter().map(|p| p.1 / (p.2 as f64).sqrt()).collect();
        power_fit(&x, &y, Some(&e), range, 4)
    }

    /// Volume of the most populated bin at or above `from`: the peak of
    /// never-traded levels sitting near the stationary depth.
    pub fn peak_above(&self, from: f64) -> Option<f64> {
        self.bins()
            .into_iter()
            .filter(|&(lo, hi, c)| lo as f64 >= from && hi != u64::MAX && c > 0)
            .max_by_key(|&(_, _, c)| c)
            .map(|(lo, hi, _)| log_centre(lo, hi))
    }
}

// exp(mean ln k) over the integers k in [lo, hi).
fn log_centre(lo: u64, hi: u64) -> f64 {
    if hi - lo > 64 {
        ((lo as f64) * ((hi - 1) as f64)).sqrt()
    } else {
        let s: f64 = (lo..hi).map(|k| (k as f64).ln()).sum();
        (s / (hi - lo) as f64).exp()
    }
}

pub fn write_bestvol_csv<W: Write>(h: &BestVolumeHist, mut out: W) -> io::Result<()> {
    writeln!(out, "volume_bin_lo,volume_bin_hi,count")?;
    for (lo, hi, c) in h.bins() {
        if hi == u64::MAX {
            writeln!(out, "{lo},inf,{c}")?;
        } else {
            writeln!(out, "{lo},{hi},{c}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn binning_edges() {
        let mut h = BestVolumeHist::new(1000, 10);
        assert_eq!(&h.edges[..6], &[1, 2, 3, 4, 5, 6]);
        h.record(1);
        h.record(10);
        h.record(5000);
        let bins = h.bins();
        assert_eq!(bins[0], (1, 2, 1));
        assert_eq!(bins.last().unwrap().2, 1);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn recovers_discrete_power_law_tail() {
        // Inverse-transform samples of a Pareto tail with density ~ v^-1.5.
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
        let mut h = BestVolumeHist::new(100_000, 10);
        for _ in 0..500_000 {
            let u: f64 = rng.random();
            let v = (1.0 / (1.0 - u)).powf(2.0);
            h.record(v.floor() as u64);
        }
        let f = h.tail_fit((10.0, 5000.0)).unwrap();
        assert!((f.exponent + 1.5).abs() < 0.05, "{}", f.exponent);
    }

    #[test]
    fn peak_location() {
        let mut h = BestVolumeHist::new(10_000, 10);
        for v in [3, 3, 500, 500, 500, 2000] {
            h.record(v);
        }
        let p = h.peak_above(100.0).unwrap();
        assert!(p > 398.0 && p < 502.0, "{p}");
    }
}
