//! Autocorrelation of trade signs, `C(t) = <e_s e_{s+t}> - <e>^2`.

use super::fit::{power_fit, PowerFit};
use super::MeasureError;

#[derive(Debug, Clone)]
pub struct SignAutocorr {
    lags: Vec<usize>,
    products: Vec<i64>,
    count: Vec<u64>,
    sum: i64,
    n: u64,
    history: Vec<i8>,
    head: usize,
    filled: usize,
}

impl SignAutocorr {
    pub fn new(lags: Vec<usize>) -> Self {
        let max = lags.iter().copied().max().unwrap_or(0);
        let k = lags.len();
        Self {
            lags,
            products: vec![0; k],
            count: vec![0; k],
            sum: 0,
            n: 0,
            history: vec![0; max + 1],
            head: 0,
            filled: 0,
        }
    }

    pub fn push(&mut self, sign: i8) {
        let cap = self.history.len();
        self.head = (self.head + 1) % cap;
        self.history[self.head] = sign;
        self.filled = (self.filled + 1).min(cap);
        self.sum += i64::from(sign);
        self.n += 1;
        for (i, &lag) in self.lags.iter().enumerate() {
            if lag >= self.filled {
                continue;
            }
            let past = self.history[(self.head + cap - lag) % cap];
            self.products[i] += i64::from(sign * past);
            self.count[i] += 1;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.lags, other.lags);
        for i in 0..self.lags.len() {
            self.products[i] += other.products[i];
            self.count[i] += other.count[i];
        }
        self.sum += other.sum;
        self.n += other.n;
    }

    /// `(lag, C(lag))` for every lag with samples.
    pub fn table(&self) -> Vec<(usize, f64)> {
        let mean = if self.n > 0 { self.sum as f64 / self.n as f64 } else { 0.0 };
        (0..self.lags.len())
            .filter(|&i| self.count[i] > 0)
            .map(|i| {
                (
                    self.lags[i],
                    self.products[i] as f64 / self.count[i] as f64 - mean * mean,
                )
            })
            .collect()
    }
}

/// Unweighted log-log fit `C(t) ~ t^(-gamma)` over `range`; returns the
/// fit with `exponent = -gamma`.
pub fn autocorr_fit(table: &[(usize, f64)], range: (f64, f64)) -> Result<PowerFit, MeasureError> {
    let x: Vec<f64> = table.iter().map(|r| r.0 as f64).collect();
    let y: Vec<f64> = table.iter().map(|r| r.1).collect();
    power_fit(&x, &y, None, range, 4)
}
