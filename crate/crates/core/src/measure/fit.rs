//! Least-squares helpers shared by the observables.

use super::MeasureError;

/// Weighted straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// Weighted coefficient of determination.
    pub r2: f64,
    pub n: usize,
}

/// Weighted least squares. Standard errors are scaled by the residual
/// variance (reduced chi-square), so weights only need to be relative.
pub fn line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit, MeasureError> {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    let n = x.len();
    if n < 2 {
        return Err(MeasureError::TooFewPoints { needed: 2, got: n });
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(MeasureError::Degenerate("all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = (0..n)
        .map(|i| {
            let r = y[i] - intercept - slope * x[i];
            w[i] * r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let s2 = ss_res / (n - 2) as f64;
        ((s2 / sxx).sqrt(), (s2 * (1.0 / sw + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        r2,
        n,
    })
}

/// Power law `y = prefactor * x^exponent` fitted on log-log axes.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub stderr: f64,
    pub range: (f64, f64),
    pub n: usize,
    /// Points inside the range dropped because `y <= 0`.
    pub excluded: usize,
    pub r2: f64,
}

/// Log-log weighted fit over points with `x` in `range` (inclusive).
/// `y_err` gives per-point standard errors; the log-space weight is
/// `(y / y_err)^2`. Points with nonpositive `y` are dropped and counted.
pub fn power_fit(
    x: &[f64],
    y: &[f64],
    y_err: Option<&[f64]>,
    range: (f64, f64),
    min_points: usize,
) -> Result<PowerFit, MeasureError> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut w = Vec::new();
    let mut excluded = 0;
    for i in 0..x.len() {
        if x[i] < range.0 || x[i] > range.1 {
            continue;
        }
        if !(y[i] > 0.0) {
            excluded += 1;
            continue;
        }
        let weight = match y_err {
            Some(e) if e[i] > 0.0 => (y[i] / e[i]).powi(2),
            _ => 1.0,
        };
        lx.push(x[i].ln());
        ly.push(y[i].ln());
        w.push(weight);
    }
    if lx.len() < min_points {
        return Err(MeasureError::TooFewPoints {
            needed: min_points,
            got: lx.len(),
        });
    }
    let f = line_fit(&lx, &ly, &w)?;
    Ok(PowerFit {
        exponent: f.slope,
        prefactor: f.intercept.exp(),
        stderr: f.slope_stderr,
        range,
        n: f.n,
        excluded,
        r2: f.r2,
    })
}

/// Mean and standard error of a sample.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, f64::NAN);
    }
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (v / n as f64).sqrt())
}
