//! Estimators for the Markovian book description in the frame of the last
//! execution price.
//!
//! For an origin trade `k` with sign `e0` and pre-trade half-spread `s0`,
//! lag `t >= 1` refers to trade `j = k + t`:
//!
//! * `pi_t`: pre-trade mid of trade `j` minus the execution price of trade `j - 1`,
//! * `s_t`: pre-trade half-spread of trade `j`,
//! * `dl_t`: execution price of `j` minus that of `j - 1`, which equals
//!   `pi_t + e_j s_t` path by path,
//! * `dl_0 = e0 s0` (the origin is measured from its own pre-trade mid).
//!
//! Conditional averages `<.>_+` / `<.>_-` select origins by `e0`. Prices
//! are stored in half-ticks so every sum is an exact integer; standard
//! errors come from a jackknife over independent accumulators (replicas or
//! time blocks).

use std::io::{self, Write};

use crate::engine::TradeRecord;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Cell {
    n: i128,
    pi: i128,
    s: i128,
    dl: i128,
    s0: i128,
    s0_pi: i128,
    s0_s: i128,
    // e0 * e_t, for the connected sign correlation.
    sign_prod: i128,
    sign_t: i128,
    // dl_t * dl_0.
    dl_dl0: i128,
}

impl Cell {
    fn merge(&mut self, o: &Self, sgn: i128) {
        self.n += sgn * o.n;
        self.pi += sgn * o.pi;
        self.s += sgn * o.s;
        self.dl += sgn * o.dl;
        self.s0 += sgn * o.s0;
        self.s0_pi += sgn * o.s0_pi;
        self.s0_s += sgn * o.s0_s;
        self.sign_prod += sgn * o.sign_prod;
        self.sign_t += sgn * o.sign_t;
        self.dl_dl0 += sgn * o.dl_dl0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TradeObs {
    sign: i8,
    // All in half-ticks.
    pi: i64,
    s: i64,
    dl: i64,
}

/// Where lag origins are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origins {
    /// Every trade of a stationary series is an origin.
    Sliding,
    /// Only the first trade of each series (e.g. the first trade after a
    /// meta-order starts).
    First,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovAcc {
    lags: Vec<usize>,
    origins: Origins,
    // [lag][0 = e0 negative, 1 = e0 positive]
    cells: Vec<[Cell; 2]>,
    history: Vec<Option<TradeObs>>,
    head: usize,
    filled: usize,
    last_exec: Option<i64>,
}

impl MarkovAcc {
    pub fn new(lags: Vec<usize>, origins: Origins) -> Self {
        assert!(lags.iter().all(|&l| l >= 1));
        let max = lags.iter().copied().max().unwrap_or(1);
        let n = lags.len();
        Self {
            lags,
            origins,
            cells: vec![[Cell::default(); 2]; n],
            history: vec![None; max + 1],
            head: 0,
            filled: 0,
            last_exec: None,
        }
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    /// Starts a new independent series.
    pub fn break_series(&mut self) {
        self.filled = 0;
        self.last_exec = None;
    }

    /// Feeds the next trade of the current series.
    pub fn push(&mut self, tr: &TradeRecord) {
        let exec2 = 2 * tr.level;
        let s = tr.pre_ask - tr.pre_bid;
        let obs = match self.last_exec {
            Some(prev) => TradeObs {
                sign: tr.sign,
                pi: tr.pre_ask + tr.pre_bid - prev,
                s,
                dl: exec2 - prev,
            },
            // First trade of a series: measured from its own pre-trade mid.
            None => TradeObs {
                sign: tr.sign,
                pi: 0,
                s,
                dl: exec2 - (tr.pre_ask + tr.pre_bid),
            },
        };
        self.last_exec = Some(exec2);
        let cap = self.history.len();
        self.head = (self.head + 1) % cap;
        self.history[self.head] = Some(obs);
        self.filled += 1;
        for (i, &lag) in self.lags.iter().enumerate() {
            if lag >= self.filled.min(cap) {
                continue;
            }
            let origin_index = self.filled - 1 - lag;
            if self.origins == Origins::First && origin_index != 0 {
                continue;
            }
            let o = self.history[(self.head + cap - lag) % cap].expect("filled slot");
            let e0 = i128::from(o.sign);
            let s0 = i128::from(o.s);
            let dl0 = e0 * s0;
            let c = &mut self.cells[i][usize::from(o.sign > 0)];
            c.n += 1;
            c.pi += i128::from(obs.pi);
            c.s += i128::from(obs.s);
            c.dl += i128::from(obs.dl);
            c.s0 += s0;
            c.s0_pi += s0 * i128::from(obs.pi);
            c.s0_s += s0 * i128::from(obs.s);
            c.sign_prod += e0 * i128::from(obs.sign);
            c.sign_t += i128::from(obs.sign);
            c.dl_dl0 += i128::from(obs.dl) * dl0;
        }
    }

    pub fn merge(&mut self, o: &Self) {
        self.combine(o, 1);
    }

    fn combine(&mut self, o: &Self, sgn: i128) {
        assert_eq!(self.lags, o.lags);
        for (a, b) in self.cells.iter_mut().zip(&o.cells) {
            a[0].merge(&b[0], sgn);
            a[1].merge(&b[1], sgn);
        }
    }

    /// Per-lag sample counts `(n_minus, n_plus)`.
    pub fn counts(&self) -> Vec<(usize, i128, i128)> {
        self.lags
            .iter()
            .zip(&self.cells)
            .map(|(&l, c)| (l, c[0].n, c[1].n))
            .collect()
    }
}

/// Per-lag estimates, in ticks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MarkovEstimates {
    pub pi_uncond: f64,
    pub pi_plus: f64,
    pub pi_minus: f64,
    pub s_uncond: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub dl_mean: f64,
    /// Connected sign correlation `<e0 e_t> - <e>^2`, i.e. `(1 - phi)^2 g_t`.
    pub sign_corr: f64,
    /// `<dl_t> - <pi_t> - phi <s_t>`.
    pub resid_impact: f64,
    /// Measured connected `<dl_t dl_0>` minus its Markovian prediction.
    pub resid_ac: f64,
    /// `<pi_t> - (<pi_t>_+ + <pi_t>_-) / 2`.
    pub resid_pi_avg: f64,
    /// `<s_t>_+ - <s_t>_-`.
    pub resid_s_sym: f64,
    /// `(<pi_t> - <pi_t>_+) + (<s_t> - <s_t>_+)`, the `e0 = +1` case of
    /// `<pi> - <pi>_e0 = -e0 (<s> - <s>_e0)`.
    pub resid_pi_s: f64,
}

impl MarkovEstimates {
    /// Field values in a fixed order, for jackknife bookkeeping and CSV.
    fn values(&self) -> [f64; 13] {
        [
            self.pi_uncond,
            self.pi_plus,
            self.pi_minus,
            self.s_uncond,
            self.s_plus,
            self.s_minus,
            self.dl_mean,
            self.sign_corr,
            self.resid_impact,
            self.resid_ac,
            self.resid_pi_avg,
            self.resid_s_sym,
            self.resid_pi_s,
        ]
    }

    fn from_values(v: [f64; 13]) -> Self {
        Self {
            pi_uncond: v[0],
            pi_plus: v[1],
            pi_minus: v[2],
            s_uncond: v[3],
            s_plus: v[4],
            s_minus: v[5],
            dl_mean: v[6],
            sign_corr: v[7],
            resid_impact: v[8],
            resid_ac: v[9],
            resid_pi_avg: v[10],
            resid_s_sym: v[11],
            resid_pi_s: v[12],
        }
    }
}

fn estimate(c: &[Cell; 2], phi: f64) -> Option<MarkovEstimates> {
    let (m, p) = (&c[0], &c[1]);
    if m.n + p.n == 0 {
        return None;
    }
    // Conditional ratios are NaN when the origin sign never occurred.
    let ratio = |x: i128, d: i128| if d == 0 { f64::NAN } else { x as f64 / d as f64 };
    let h = 0.5; // half-tick to tick
    let n = (m.n + p.n) as f64;
    let mean = |a: i128, b: i128| (a + b) as f64 / n;
    let pi_uncond = mean(m.pi, p.pi) * h;
    let s_uncond = mean(m.s, p.s) * h;
    let dl_mean = mean(m.dl, p.dl) * h;
    let pi_plus = ratio(p.pi, p.n) * h;
    let pi_minus = ratio(m.pi, m.n) * h;
    let s_plus = ratio(p.s, p.n) * h;
    let s_minus = ratio(m.s, m.n) * h;
    // Origin sign statistics.
    let e_mean = (p.n - m.n) as f64 / n;
    let sign_corr = mean(m.sign_prod, p.sign_prod) - e_mean * mean(m.sign_t, p.sign_t);
    // dl_0 = e0 s0.
    let dl0_mean = (p.s0 - m.s0) as f64 / n * h;
    let lhs = mean(m.dl_dl0, p.dl_dl0) * h * h - dl_mean * dl0_mean;
    // s0-weighted conditional averages handle a fluctuating initial spread.
    let s0_bar = mean(m.s0, p.s0) * h;
    let w = |cell: &Cell, x: i128| ratio(x, cell.s0) * h;
    let (pi_p_w, pi_m_w) = (w(p, p.s0_pi), w(m, m.s0_pi));
    let (s_p_w, s_m_w) = (w(p, p.s0_s), w(m, m.s0_s));
    let rhs = s0_bar * (1.0 - phi * phi) * (pi_p_w - pi_m_w) / 2.0
        + s0_bar * (s_p_w + s_m_w) / 2.0 * sign_corr;
    Some(MarkovEstimates {
        pi_uncond,
        pi_plus,
        pi_minus,
        s_uncond,
        s_plus,
        s_minus,
        dl_mean,
        sign_corr,
        resid_impact: dl_mean - pi_uncond - phi * s_uncond,
        resid_ac: lhs - rhs,
        resid_pi_avg: pi_uncond - 0.5 * (pi_plus + pi_minus),
        resid_s_sym: s_plus - s_minus,
        resid_pi_s: (pi_uncond - pi_plus) + (s_uncond - s_plus),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovRow {
    pub t: usize,
    pub est: MarkovEstimates,
    pub stderr: MarkovEstimates,
    pub n: i128,
}

/// Per-lag estimates from the merged accumulators, with jackknife standard
/// errors over the given independent accumulators. `phi` is the
/// participation rate of the biased flow (0 without a meta-order).
pub fn markov_check(parts: &[MarkovAcc], phi: f64) -> Vec<MarkovRow> {
    let Some(first) = parts.first() else {
        return Vec::new();
    };
    let mut total = first.clone();
    for p in &parts[1..] {
        total.merge(p);
    }
    let k = parts.len();
    let mut rows = Vec::new();
    for (i, &lag) in total.lags.iter().enumerate() {
        let Some(full) = estimate(&total.cells[i], phi) else {
            continue;
        };
        let mut se = [f64::NAN; 13];
        if k > 1 {
            let mut loo: Vec<[f64; 13]> = Vec::with_capacity(k);
            for p in parts {
                let mut c = total.cells[i];
                c[0].merge(&p.cells[i][0], -1);
                c[1].merge(&p.cells[i][1], -1);
                if let Some(e) = estimate(&c, phi) {
                    loo.push(e.values());
                }
            }
            if loo.len() == k {
                let kf = k as f64;
                for (f, slot) in se.iter_mut().enumerate() {
                    let m = loo.iter().map(|v| v[f]).sum::<f64>() / kf;
                    let ss: f64 = loo.iter().map(|v| (v[f] - m).powi(2)).sum();
                    *slot = ((kf - 1.0) / kf * ss).sqrt();
                }
            }
        }
        rows.push(MarkovRow {
            t: lag,
            est: full,
            stderr: MarkovEstimates::from_values(se),
            n: total.cells[i][0].n + total.cells[i][1].n,
        });
    }
    rows
}

pub fn write_markov_csv<W: Write>(rows: &[MarkovRow], mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "t,pi_uncond,pi_plus,pi_minus,s_uncond,dl_mean,resid_impact,resid_ac,\
         pi_uncond_se,pi_plus_se,pi_minus_se,s_uncond_se,dl_mean_se,resid_impact_se,resid_ac_se,\
         s_plus,s_minus,sign_corr,resid_pi_avg,resid_s_sym,resid_pi_s,\
         resid_pi_avg_se,resid_s_sym_se,resid_pi_s_se,n"
    )?;
    for r in rows {
        let (e, s) = (&r.est, &r.stderr);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            e.pi_uncond,
            e.pi_plus,
            e.pi_minus,
            e.s_uncond,
            e.dl_mean,
            e.resid_impact,
            e.resid_ac,
            s.pi_uncond,
            s.pi_plus,
            s.pi_minus,
            s.s_uncond,
            s.dl_mean,
            s.resid_impact,
            s.resid_ac,
            e.s_plus,
            e.s_minus,
            e.sign_corr,
            e.resid_pi_avg,
            e.resid_s_sym,
            e.resid_pi_s,
            s.resid_pi_avg,
            s.resid_s_sym,
            s.resid_pi_s,
            r.n
        )?;
    }
    Ok(())
}
