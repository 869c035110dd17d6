//! Minimal SVG charts. Presentation only: every plotted number also lives in
//! a CSV.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Drawn as markers instead of a line.
    pub markers: bool,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log { v.log10() } else { v };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn label(&self, f: f64) -> String {
        let v = self.lo + f * (self.hi - self.lo);
        if self.log {
            format!("{:.3}", 10f64.powf(v))
        } else {
            format!("{v:.3}")
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        W / 2.0,
        esc(title),
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 12.0,
        esc(xlabel),
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(ylabel)
    );
}

fn ticks(out: &mut String, x: &Axis, y: &Axis) {
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
    );
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let px = LEFT + f * pw;
        let py = TOP + ph - f * ph;
        let _ = writeln!(
            out,
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            TOP + ph + 16.0,
            x.label(f),
            LEFT - 4.0,
            py + 4.0,
            y.label(f)
        );
    }
}

/// Line or marker chart of several series.
pub fn line_chart(series: &[Series], log_x: bool, log_y: bool, title: &str, xlabel: &str, ylabel: &str) -> String {
    let x = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), log_x);
    let y = Axis::fit(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), log_y);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel);
    ticks(&mut out, &x, &y);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter_map(|&(a, b)| Some((LEFT + x.frac(a)? * pw, TOP + ph - y.frac(b)? * ph)))
            .collect();
        if s.markers {
            for (px, py) in &pts {
                let _ = writeln!(out, "<circle cx=\"{px:.1}\" cy=\"{py:.1}\" r=\"2.5\" fill=\"{color}\"/>");
            }
        } else if !pts.is_empty() {
            let d: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.1},{b:.1}")).collect();
            let _ = writeln!(
                out,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                d.join(" ")
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>",
            LEFT + 10.0,
            TOP + 16.0 + 15.0 * k as f64,
            esc(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map of `values[iy][ix]` with cell edges where the sign changes
/// drawn in black (the zero contour).
pub fn heat_map(xs: &[f64], ys: &[f64], values: &[Vec<f64>], title: &str, xlabel: &str, ylabel: &str) -> String {
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let (nx, ny) = (xs.len().max(1), ys.len().max(1));
    let cw = pw / nx as f64;
    let chh = ph / ny as f64;
    let vmax = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel);
    let cell = |ix: usize, iy: usize| (LEFT + ix as f64 * cw, TOP + ph - (iy + 1) as f64 * chh);
    for (iy, row) in values.iter().enumerate() {
        for (ix, &v) in row.iter().enumerate() {
            let (px, py) = cell(ix, iy);
            let color = if !v.is_finite() {
                "#cccccc".to_string()
            } else {
                // Red above zero, blue below.
                let a = (v.abs() / vmax).min(1.0);
                let fade = (255.0 * (1.0 - a)) as u8;
                if v >= 0.0 {
                    format!("rgb(255,{fade},{fade})")
                } else {
                    format!("rgb({fade},{fade},255)")
                }
            };
            let _ = writeln!(
                out,
                "<rect x=\"{px:.1}\" y=\"{py:.1}\" width=\"{cw:.1}\" height=\"{chh:.1}\" fill=\"{color}\"/>"
            );
            let sign_change = |o: f64| v.is_finite() && o.is_finite() && (v >= 0.0) != (o >= 0.0);
            if let Some(&r) = row.get(ix + 1) {
                if sign_change(r) {
                    let _ = writeln!(
                        out,
                        "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
                        px + cw,
                        py,
                        py + chh
                    );
                }
            }
            if let Some(&u) = values.get(iy + 1).and_then(|r| r.get(ix)) {
                if sign_change(u) {
                    let _ = writeln!(
                        out,
                        "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{2:.1}\" y2=\"{1:.1}\" stroke=\"black\" stroke-width=\"2\"/>",
                        px,
                        py,
                        px + cw
                    );
                }
            }
        }
    }
    for (ix, x) in xs.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x}</text>",
            LEFT + (ix as f64 + 0.5) * cw,
            TOP + ph + 16.0
        );
    }
    for (iy, y) in ys.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{y}</text>",
            LEFT - 4.0,
            TOP + ph - (iy as f64 + 0.5) * chh + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}
