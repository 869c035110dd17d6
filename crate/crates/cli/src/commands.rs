use std::time::Instant;

use latentlob::book::Side;
use latentlob::engine::MetaStyle;
use latentlob::measure::bestvol::write_bestvol_csv;
use latentlob::measure::impact::{write_decay_csv, write_impact_csv};
use latentlob::measure::markov::write_markov_csv;
use latentlob::measure::profile::{write_profile_csv, ProfileAcc};
use latentlob::measure::variogram::{mean_sigma2, write_signature_csv, SignatureRow};
use latentlob::measure::{hurst_fit, impact_fit, log_lags, markov_check, phase_statistic, profile_compare};
use latentlob::propagator::{write_propagator_csv, Propagator};
use latentlob::runner::{merge_impact, merge_stationary, run_impact, run_stationary, ReplicaPlan, RunError};
use serde_json::json;
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::output::{finite, OutputDir};
use crate::svg::{heat_map, line_chart, Series};

#[derive(Debug, Error)]
pub enum CmdError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub struct Options {
    pub out: std::path::PathBuf,
    pub svg: bool,
}

fn plan(cfg: &Config) -> ReplicaPlan {
    ReplicaPlan {
        replicas: cfg.run.replicas,
        threads: cfg.run.threads,
        master_seed: cfg.run.seed,
    }
}

fn profile_rows(acc: &ProfileAcc, cfg: &Config, rows: &[SignatureRow]) -> Result<(f64, f64, Vec<latentlob::measure::profile::ProfileRow>, f64), CmdError> {
    let params = cfg.model_params()?;
    let (s2, _) = mean_sigma2(rows, cfg.measure.diffusion_range)
        .map_err(|e| CmdError::Runtime(format!("diffusion estimate: {e}")))?;
    let diffusion = params.mu * s2;
    let c = profile_compare(acc, params.lambda_w / params.nu, diffusion, params.nu);
    Ok((diffusion, c.pstar, c.rows, c.worst_deviation))
}

pub fn simulate(cfg: &Config, opts: &Options) -> Result<(), CmdError> {
    let started = Instant::now();
    let spec = cfg.stationary_spec()?;
    let plan = plan(cfg);
    let parts = run_stationary(&spec, &plan)?;
    let merged = merge_stationary(&parts).ok_or_else(|| CmdError::Runtime("no replicas".into()))?;
    let rows = merged.variogram.signature();
    let mut out = OutputDir::create(&opts.out)?;
    out.write("variogram.csv", |w| write_signature_csv(&rows, w))?;
    out.write("bestvol.csv", |w| write_bestvol_csv(&merged.bestvol, w))?;
    let (diffusion, pstar, prof, worst) = profile_rows(&merged.profile, cfg, &rows)?;
    out.write("profile.csv", |w| write_profile_csv(&prof, w))?;

    let phase = phase_statistic(&rows).ok();
    let hurst = hurst_fit(&rows, cfg.measure.hurst_range).ok();
    let params = cfg.model_params()?;
    let tail_range = cfg
        .measure
        .bestvol_range
        .unwrap_or((10.0, 0.1 * params.lambda_w / params.nu));
    let tail = merged.bestvol.tail_fit(tail_range).ok();
    out.write_json(
        "summary.json",
        &json!({
            "replicas": parts.len(),
            "trades": merged.trades,
            "phase_s": phase.map(|p| p.s).and_then(finite),
            "phase_s_stderr": phase.map(|p| p.stderr).and_then(finite),
            "hurst": hurst.as_ref().map(|h| h.h).and_then(finite),
            "hurst_stderr": hurst.as_ref().map(|h| h.stderr).and_then(finite),
            "diffusion_ticks2_per_s": finite(diffusion),
            "pstar_ticks": finite(pstar),
            "profile_worst_deviation": finite(worst),
            "bestvol_tail_exponent": tail.as_ref().map(|t| t.exponent).and_then(finite),
            "bestvol_tail_stderr": tail.as_ref().map(|t| t.stderr).and_then(finite),
        }),
    )?;
    if opts.svg {
        let sig = Series {
            label: "sigma^2_t".into(),
            points: rows.iter().map(|r| (r.t as f64, r.sigma2)).collect(),
            markers: true,
        };
        let chart = line_chart(&[sig], true, true, "Signature plot", "lag t (trades)", "D(t)/t (ticks^2)");
        out.write("variogram.svg", |w| w.write_all(chart.as_bytes()))?;
        let side = |s: Side, measured: bool| Series {
            label: format!(
                "{} {}",
                if s == Side::Buy { "bid" } else { "ask" },
                if measured { "measured" } else { "mean field" }
            ),
            points: prof
                .iter()
                .filter(|r| r.side == s)
                .map(|r| {
                    let x = if s == Side::Buy { -r.offset } else { r.offset };
                    (x, if measured { r.measured } else { r.mean_field })
                })
                .collect(),
            markers: measured,
        };
        let chart = line_chart(
            &[side(Side::Buy, true), side(Side::Sell, true), side(Side::Buy, false), side(Side::Sell, false)],
            false,
            false,
            "Average book",
            "offset from mid (ticks)",
            "volume",
        );
        out.write("profile.svg", |w| w.write_all(chart.as_bytes()))?;
    }
    out.finish(cfg, "simulate", plan.seeds(), started)?;
    Ok(())
}

pub fn sweep(cfg: &Config, opts: &Options) -> Result<(), CmdError> {
    let started = Instant::now();
    let me = &cfg.measure;
    let x_name = me
        .sweep_x
        .clone()
        .ok_or(ConfigError::Invalid { key: "measure.sweep_x", msg: "required for sweep".into() })?;
    if me.sweep_x_values.is_empty() {
        return Err(ConfigError::Invalid { key: "measure.sweep_x_values", msg: "empty grid".into() }.into());
    }
    let y_values: Vec<Option<f64>> = match &me.sweep_y {
        Some(_) if me.sweep_y_values.is_empty() => {
            return Err(ConfigError::Invalid { key: "measure.sweep_y_values", msg: "empty grid".into() }.into())
        }
        Some(_) => me.sweep_y_values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    // Validate every grid point before running any of them.
    let mut points = Vec::new();
    for &y in &y_values {
        for &x in &me.sweep_x_values {
            let mut c = cfg.with_param(&x_name, x)?;
            if let (Some(name), Some(v)) = (&me.sweep_y, y) {
                c = c.with_param(name, v)?;
            }
            let mut spec = c.stationary_spec()?;
            spec.profile_every = 0;
            points.push((x, y, spec));
        }
    }
    let plan = plan(cfg);
    let mut table = Vec::new();
    for (x, y, spec) in &points {
        let parts = run_stationary(spec, &plan)?;
        let merged = merge_stationary(&parts).ok_or_else(|| CmdError::Runtime("no replicas".into()))?;
        let s = phase_statistic(&merged.variogram.signature())
            .map_err(|e| CmdError::Runtime(format!("phase statistic at ({x}, {y:?}): {e}")))?;
        log::info!("{x_name} = {x}, {:?} = {y:?}: S = {:.4} +- {:.4}", me.sweep_y, s.s, s.stderr);
        table.push((*x, *y, s.s, s.stderr));
    }
    let mut out = OutputDir::create(&opts.out)?;
    out.write("phase.csv", |w| {
        writeln!(w, "param1,param2,S,stderr")?;
        for (x, y, s, e) in &table {
            let y = y.map_or(String::new(), |v| v.to_string());
            writeln!(w, "{x},{y},{s},{e}")?;
        }
        Ok(())
    })?;
    if opts.svg {
        let nx = me.sweep_x_values.len();
        let grid: Vec<Vec<f64>> = table.chunks(nx).map(|c| c.iter().map(|r| r.2).collect()).collect();
        let ys: Vec<f64> = y_values.iter().map(|v| v.unwrap_or(0.0)).collect();
        let chart = heat_map(
            &me.sweep_x_values,
            &ys,
            &grid,
            "Phase statistic S (black: S = 0)",
            &x_name,
            me.sweep_y.as_deref().unwrap_or(""),
        );
        out.write("phase.svg", |w| w.write_all(chart.as_bytes()))?;
    }
    out.finish(cfg, "sweep", plan.seeds(), started)?;
    Ok(())
}

pub fn impact(cfg: &Config, opts: &Options) -> Result<(), CmdError> {
    let started = Instant::now();
    let spec = cfg.impact_spec()?;
    let plan = plan(cfg);
    let parts = run_impact(&spec, &plan)?;
    let merged = merge_impact(&parts).ok_or_else(|| CmdError::Runtime("no replicas".into()))?;
    let acc = &merged.impact;
    let curve = acc.curve();
    let decay = acc.decay(cfg.measure.decay_range);
    // Mean trade sign: meta market orders are all buys, limit ones trade none.
    let participation = match spec.meta.style {
        MetaStyle::Market(_) => spec.meta.participation(),
        MetaStyle::Limit { .. } => 0.0,
    };
    let markov_parts: Vec<_> = parts.iter().map(|p| p.markov.clone()).collect();
    let markov = markov_check(&markov_parts, participation);
    let mut out = OutputDir::create(&opts.out)?;
    out.write("impact.csv", |w| write_impact_csv(&curve, w))?;
    out.write("decay.csv", |w| write_decay_csv(&decay.rows, w))?;
    out.write("path.csv", |w| write_decay_csv(&acc.path(), w))?;
    out.write("markov.csv", |w| write_markov_csv(&markov, w))?;
    if merged.profile_after.snapshots() > 0 {
        let rows: Vec<_> = [Side::Buy, Side::Sell]
            .into_iter()
            .flat_map(|s| {
                merged.profile_after.side(s).into_iter().map(move |(offset, v)| {
                    latentlob::measure::profile::ProfileRow { offset, side: s, measured: v, mean_field: f64::NAN }
                })
            })
            .collect();
        out.write("profile_after.csv", |w| write_profile_csv(&rows, w))?;
    }
    let delta = impact_fit(&curve, cfg.measure.impact_range);
    if let Err(e) = &delta {
        log::warn!("impact fit: {e}");
    }
    let delta = delta.ok();
    let theta = decay.theta.as_ref().ok();
    out.write_json(
        "summary.json",
        &json!({
            "replicas": parts.len(),
            "complete": acc.complete(),
            "incomplete": acc.incomplete(),
            "participation": participation,
            "meta_trade_fraction": finite(acc.meta_fraction()),
            "delta": delta.as_ref().map(|f| f.exponent).and_then(finite),
            "delta_stderr": delta.as_ref().map(|f| f.stderr).and_then(finite),
            "delta_prefactor": delta.as_ref().map(|f| f.prefactor).and_then(finite),
            "theta": theta.map(|f| f.exponent).and_then(finite),
            "theta_stderr": theta.map(|f| f.stderr).and_then(finite),
            "final_impact": finite(decay.final_mean),
            "final_impact_stderr": finite(decay.final_stderr),
            "plateau": finite(decay.plateau),
            "plateau_stderr": finite(decay.plateau_stderr),
        }),
    )?;
    if opts.svg {
        let s = Series {
            label: "I(Q)".into(),
            points: curve.iter().map(|r| (r.q as f64, r.mean)).collect(),
            markers: true,
        };
        let chart = line_chart(&[s], true, true, "Meta-order impact", "Q", "I (ticks)");
        out.write("impact.svg", |w| w.write_all(chart.as_bytes()))?;
        let d = Series {
            label: "I(T + t)".into(),
            points: decay.rows.iter().map(|r| (r.t as f64, r.mean)).collect(),
            markers: false,
        };
        let chart = line_chart(&[d], true, false, "Relaxation after completion", "t (trades)", "I (ticks)");
        out.write("decay.svg", |w| w.write_all(chart.as_bytes()))?;
    }
    out.finish(cfg, "impact", plan.seeds(), started)?;
    Ok(())
}

pub fn propagator(cfg: &Config, opts: &Options) -> Result<(), CmdError> {
    let started = Instant::now();
    let spec = cfg.propagator_spec()?;
    let horizon = spec.horizon;
    let p = Propagator::new(spec).map_err(|e| ConfigError::Invalid { key: "measure", msg: e.to_string() })?;
    let times = log_lags(horizon, cfg.measure.lags_per_decade);
    let mc = match p.monte_carlo(&times, cfg.measure.prop_paths, cfg.run.seed) {
        Ok(rows) => Some(rows),
        Err(latentlob::propagator::PropagatorError::NoGenerator) => None,
        Err(e) => return Err(CmdError::Runtime(e.to_string())),
    };
    let rows = p
        .table(&times, mc.as_deref())
        .map_err(|e| CmdError::Runtime(e.to_string()))?;
    let mut out = OutputDir::create(&opts.out)?;
    out.write("propagator.csv", |w| write_propagator_csv(&rows, w))?;
    let t: Vec<f64> = rows.iter().map(|r| r.t as f64).collect();
    let imp: Vec<f64> = rows.iter().map(|r| r.impact).collect();
    let var: Vec<f64> = rows.iter().map(|r| r.variance_analytic).collect();
    let range = (horizon as f64 / 10.0, horizon as f64);
    let fit = |y: &[f64]| latentlob::measure::fit::power_fit(&t, y, None, range, 3).ok();
    let (fi, fv) = (fit(&imp), fit(&var));
    let worst_z = mc.as_ref().map(|m| {
        m.iter()
            .zip(&rows)
            .filter(|(r, _)| r.t > 0 && r.variance_stderr > 0.0)
            .map(|(r, a)| (r.variance - a.variance_analytic).abs() / r.variance_stderr)
            .fold(0.0f64, f64::max)
    });
    out.write_json(
        "summary.json",
        &json!({
            "impact_exponent": fi.as_ref().map(|f| f.exponent).and_then(finite),
            "variance_exponent": fv.as_ref().map(|f| f.exponent).and_then(finite),
            "fit_range": [range.0, range.1],
            "mc_paths": mc.as_ref().map(|_| cfg.measure.prop_paths),
            "mc_worst_variance_z": worst_z.and_then(finite),
        }),
    )?;
    if opts.svg {
        let s = vec![
            Series { label: "impact".into(), points: t.iter().copied().zip(imp.iter().copied()).collect(), markers: false },
            Series { label: "variance".into(), points: t.iter().copied().zip(var.iter().copied()).collect(), markers: false },
        ];
        let chart = line_chart(&s, true, true, "Propagator model", "t (trades)", "");
        out.write("propagator.svg", |w| w.write_all(chart.as_bytes()))?;
    }
    out.finish(cfg, "propagator", Vec::new(), started)?;
    Ok(())
}

pub fn markov_check_cmd(cfg: &Config, opts: &Options) -> Result<(), CmdError> {
    let started = Instant::now();
    let mut spec = cfg.stationary_spec()?;
    spec.markov_lags = cfg.measure.markov_lags.clone();
    spec.profile_every = 0;
    let plan = plan(cfg);
    let parts = run_stationary(&spec, &plan)?;
    let accs: Vec<_> = parts.iter().map(|p| p.markov.clone()).collect();
    let rows = markov_check(&accs, 0.0);
    let mut out = OutputDir::create(&opts.out)?;
    out.write("markov.csv", |w| write_markov_csv(&rows, w))?;
    let worst = |f: fn(&latentlob::measure::markov::MarkovRow) -> (f64, f64)| {
        rows.iter()
            .map(f)
            .filter(|(_, se)| *se > 0.0)
            .map(|(v, se)| v.abs() / se)
            .fold(0.0f64, f64::max)
    };
    out.write_json(
        "summary.json",
        &json!({
            "replicas": parts.len(),
            "lags": cfg.measure.markov_lags,
            "worst_z_impact": finite(worst(|r| (r.est.resid_impact, r.stderr.resid_impact))),
            "worst_z_autocorrelation": finite(worst(|r| (r.est.resid_ac, r.stderr.resid_ac))),
            "worst_z_pi_average": finite(worst(|r| (r.est.resid_pi_avg, r.stderr.resid_pi_avg))),
            "worst_z_spread_symmetry": finite(worst(|r| (r.est.resid_s_sym, r.stderr.resid_s_sym))),
            "worst_z_pi_spread": finite(worst(|r| (r.est.resid_pi_s, r.stderr.resid_pi_s))),
        }),
    )?;
    out.finish(cfg, "markov-check", plan.seeds(), started)?;
    Ok(())
}
