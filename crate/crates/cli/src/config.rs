//! Experiment configuration: a TOML file with `[model]`, `[meta]`,
//! `[measure]` and `[run]` sections. Rates are in 1/s. Only `model.mu` is
//! required; other defaults follow the reference desk parameters except
//! `nu`, whose default is the long-memory value 1e-7.

use std::path::Path;

use latentlob::engine::{MetaOrderSpec, MetaStyle, ModelParams, Termination};
use latentlob::flow::{SignMode, VolumePolicy};
use latentlob::measure::log_lags;
use latentlob::propagator::{Kernel, PropagatorSpec, SignCorrelation};
use latentlob::runner::{ImpactSpec, StationarySpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    #[serde(default)]
    pub meta: MetaSection,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SignsKind {
    Lmf,
    Iid,
}

/// Execution laws that take no parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Unit,
    Greedy,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mu: f64,
    #[serde(default = "d_lambda_w")]
    pub lambda_w: f64,
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(default = "d_signs")]
    pub signs: SignsKind,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    /// Background volume law: at most one of `zeta`, `psi`, `execution`.
    /// With none set, `zeta = 0.95`.
    pub zeta: Option<f64>,
    pub psi: Option<f64>,
    pub execution: Option<Execution>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "d_tick")]
    pub tick: f64,
    #[serde(default = "d_half_width")]
    pub half_width: usize,
    #[serde(default = "d_max_depth")]
    pub max_depth: f64,
    /// Mean-field seeding width in ticks; absent means a flat seed.
    pub seed_pstar: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum StyleKind {
    Market,
    Limit,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    #[serde(default = "d_style")]
    pub style: StyleKind,
    #[serde(default = "d_phi")]
    pub phi: f64,
    /// Trader volume law for market execution (same rules as the model).
    pub zeta: Option<f64>,
    pub psi: Option<f64>,
    pub execution: Option<Execution>,
    /// Limit execution: deposit `max(floor(f V_bid), 1)`.
    #[serde(default = "d_fraction")]
    pub fraction: f64,
    /// Target volume; defaults to the largest grid value.
    pub q: Option<u64>,
    /// Duration (s) for fixed-time execution.
    pub duration: Option<f64>,
    /// Volume milestones; defaults to 1..=q on a log grid.
    pub q_grid: Option<Vec<u64>>,
    #[serde(default = "d_post_horizon")]
    pub post_horizon: u64,
    #[serde(default = "d_max_trades")]
    pub max_trades: u64,
    #[serde(default = "d_path_len")]
    pub path_len: usize,
}

impl Default for MetaSection {
    fn default() -> Self {
        toml::from_str("").expect("meta defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    /// Trades per replica for stationary runs.
    #[serde(default = "d_trades")]
    pub trades: u64,
    #[serde(default = "d_max_lag")]
    pub max_lag: usize,
    #[serde(default = "d_per_decade")]
    pub lags_per_decade: usize,
    #[serde(default = "d_hurst_range")]
    pub hurst_range: (f64, f64),
    /// Lag range whose mean `sigma^2` sets the diffusion constant.
    #[serde(default = "d_diffusion_range")]
    pub diffusion_range: (f64, f64),
    #[serde(default = "d_profile_max_offset")]
    pub profile_max_offset: usize,
    #[serde(default = "d_profile_every")]
    pub profile_every: u64,
    #[serde(default = "d_bestvol_max")]
    pub bestvol_max: u64,
    #[serde(default = "d_per_decade")]
    pub bestvol_per_decade: usize,
    /// Tail-fit range of the best-volume histogram; defaults to
    /// `[10, 0.1 lambda_w / nu]`.
    pub bestvol_range: Option<(f64, f64)>,
    #[serde(default = "d_markov_lags")]
    pub markov_lags: Vec<usize>,
    #[serde(default = "d_impact_range")]
    pub impact_range: (f64, f64),
    #[serde(default = "d_decay_range")]
    pub decay_range: (f64, f64),
    /// Sweep axes: parameter names among gamma, zeta, psi, alpha, nu.
    pub sweep_x: Option<String>,
    #[serde(default)]
    pub sweep_x_values: Vec<f64>,
    pub sweep_y: Option<String>,
    #[serde(default)]
    pub sweep_y_values: Vec<f64>,
    /// Propagator kernel `g0 (1 + t)^-beta`.
    #[serde(default = "d_prop_beta")]
    pub prop_beta: f64,
    #[serde(default = "d_one")]
    pub prop_g0: f64,
    #[serde(default = "d_prop_horizon")]
    pub prop_horizon: usize,
    #[serde(default = "d_prop_paths")]
    pub prop_paths: usize,
    /// Background correlation: "lmf" (generator-exact), "power", or "iid".
    #[serde(default = "d_prop_signs")]
    pub prop_signs: String,
}

impl Default for MeasureSection {
    fn default() -> Self {
        toml::from_str("").expect("measure defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_replicas")]
    pub replicas: usize,
    /// 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    /// Seconds; default `5 / nu`, or `0.2 / nu` with mean-field seeding.
    pub warmup: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("run defaults")
    }
}

fn d_lambda_w() -> f64 {
    5e-3
}
fn d_nu() -> f64 {
    1e-7
}
fn d_signs() -> SignsKind {
    SignsKind::Lmf
}
fn d_gamma() -> f64 {
    0.5
}
fn d_tick() -> f64 {
    0.01
}
fn d_half_width() -> usize {
    400
}
fn d_max_depth() -> f64 {
    1e6
}
fn d_style() -> StyleKind {
    StyleKind::Market
}
fn d_phi() -> f64 {
    1.0
}
fn d_fraction() -> f64 {
    0.5
}
fn d_post_horizon() -> u64 {
    1000
}
fn d_max_trades() -> u64 {
    100_000
}
fn d_path_len() -> usize {
    1000
}
fn d_trades() -> u64 {
    100_000
}
fn d_max_lag() -> usize {
    10_000
}
fn d_per_decade() -> usize {
    10
}
fn d_hurst_range() -> (f64, f64) {
    (100.0, 10_000.0)
}
fn d_diffusion_range() -> (f64, f64) {
    (100.0, 1000.0)
}
fn d_profile_max_offset() -> usize {
    200
}
fn d_profile_every() -> u64 {
    10
}
fn d_bestvol_max() -> u64 {
    10_000_000
}
fn d_markov_lags() -> Vec<usize> {
    vec![1, 2, 3, 5, 10, 20, 50, 100]
}
fn d_impact_range() -> (f64, f64) {
    (1.0, 100.0)
}
fn d_decay_range() -> (f64, f64) {
    (1.0, 100.0)
}
fn d_prop_beta() -> f64 {
    0.25
}
fn d_one() -> f64 {
    1.0
}
fn d_prop_horizon() -> usize {
    1000
}
fn d_prop_paths() -> usize {
    10_000
}
fn d_prop_signs() -> String {
    "lmf".into()
}
fn d_seed() -> u64 {
    1
}
fn d_replicas() -> usize {
    8
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the `config` member of a run manifest when
    /// the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
            let cfg = v
                .get("config")
                .ok_or_else(|| ConfigError::Parse("manifest has no `config` member".into()))?;
            let cfg: Config =
                serde_json::from_value(cfg.clone()).map_err(|e| ConfigError::Parse(e.to_string()))?;
            cfg.validate()?;
            Ok(cfg)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model_params()?;
        if self.run.replicas == 0 {
            return Err(invalid("run.replicas", "must be at least 1"));
        }
        if self.measure.max_lag < 1000 {
            return Err(invalid("measure.max_lag", "must be at least 1000 (phase statistic)"));
        }
        Ok(())
    }

    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let m = &self.model;
        let background = volume_law(m.zeta, m.psi, m.execution, "model")?;
        let signs = match m.signs {
            SignsKind::Lmf => SignMode::Lmf { gamma: m.gamma },
            SignsKind::Iid => SignMode::Iid,
        };
        let p = ModelParams {
            mu: m.mu,
            lambda_w: m.lambda_w,
            nu: m.nu,
            signs,
            background,
            alpha: m.alpha,
            tick_size: m.tick,
            half_width: m.half_width,
            max_depth: m.max_depth,
            seed_pstar: m.seed_pstar,
        };
        p.validate().map_err(|e| invalid("model", e.to_string()))?;
        Ok(p)
    }

    pub fn q_grid(&self) -> Vec<u64> {
        match (&self.meta.q_grid, self.meta.q) {
            (Some(g), _) => g.clone(),
            (None, Some(q)) => log_lags(q.max(1) as usize, 10).into_iter().map(|x| x as u64).collect(),
            (None, None) => log_lags(100, 10).into_iter().map(|x| x as u64).collect(),
        }
    }

    pub fn meta_spec(&self) -> Result<MetaOrderSpec, ConfigError> {
        let m = &self.meta;
        let style = match m.style {
            StyleKind::Market => MetaStyle::Market(volume_law(m.zeta, m.psi, m.execution, "meta")?),
            StyleKind::Limit => MetaStyle::Limit { fraction: m.fraction },
        };
        let q = m.q.or_else(|| {
            if m.duration.is_none() {
                self.q_grid().iter().copied().max()
            } else {
                None
            }
        });
        let termination = match (q, m.duration) {
            (Some(q), None) => Termination::Volume(q),
            (None, Some(t)) => Termination::Duration(t),
            (Some(q), Some(t)) => Termination::Both { volume: q, duration: t },
            (None, None) => return Err(invalid("meta.q", "set q, duration or q_grid")),
        };
        let spec = MetaOrderSpec {
            style,
            phi: m.phi,
            termination,
            post_horizon: m.post_horizon,
        };
        spec.validate().map_err(|e| invalid("meta", e.to_string()))?;
        let mut grid = self.q_grid();
        grid.sort_unstable();
        if grid.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("meta.q_grid", "values must be distinct"));
        }
        Ok(spec)
    }

    pub fn lags(&self) -> Vec<usize> {
        log_lags(self.measure.max_lag, self.measure.lags_per_decade)
    }

    pub fn stationary_spec(&self) -> Result<StationarySpec, ConfigError> {
        let me = &self.measure;
        Ok(StationarySpec {
            params: self.model_params()?,
            warmup: self.run.warmup,
            trades: me.trades,
            lags: self.lags(),
            profile_max_offset: me.profile_max_offset,
            profile_every: me.profile_every,
            bestvol_max: me.bestvol_max,
            bestvol_per_decade: me.bestvol_per_decade,
            markov_lags: Vec::new(),
            sign_lags: Vec::new(),
        })
    }

    pub fn impact_spec(&self) -> Result<ImpactSpec, ConfigError> {
        let mut q_grid = self.q_grid();
        q_grid.sort_unstable();
        Ok(ImpactSpec {
            params: self.model_params()?,
            warmup: self.run.warmup,
            meta: self.meta_spec()?,
            q_grid,
            max_trades: self.meta.max_trades,
            path_len: self.meta.path_len,
            markov_lags: self.measure.markov_lags.clone(),
            profile_max_offset: self.measure.profile_max_offset,
        })
    }

    pub fn propagator_spec(&self) -> Result<PropagatorSpec, ConfigError> {
        let me = &self.measure;
        let gamma = self.model.gamma;
        let signs = match (me.prop_signs.as_str(), self.model.signs) {
            (_, SignsKind::Iid) | ("iid", _) => SignCorrelation::Iid,
            ("lmf", SignsKind::Lmf) => SignCorrelation::Lmf { gamma },
            ("power", SignsKind::Lmf) => SignCorrelation::Power { gamma },
            (other, _) => {
                return Err(invalid("measure.prop_signs", format!("unknown correlation `{other}`")))
            }
        };
        let phi = self.meta.phi / (1.0 + self.meta.phi);
        Ok(PropagatorSpec {
            kernel: Kernel::power(me.prop_g0, me.prop_beta),
            signs,
            phi,
            horizon: me.prop_horizon,
        })
    }

    /// Copy with one named parameter replaced, for sweeps.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        match name {
            "gamma" => c.model.gamma = value,
            "zeta" => {
                c.model.zeta = Some(value);
                c.model.psi = None;
                c.model.execution = None;
            }
            "psi" => {
                c.model.psi = Some(value);
                c.model.zeta = None;
                c.model.execution = None;
            }
            "alpha" => c.model.alpha = value,
            "nu" => c.model.nu = value,
            "lambda_w" => c.model.lambda_w = value,
            _ => return Err(invalid("measure.sweep_x", format!("unknown sweep parameter `{name}`"))),
        }
        c.validate()?;
        Ok(c)
    }
}

fn volume_law(
    zeta: Option<f64>,
    psi: Option<f64>,
    execution: Option<Execution>,
    section: &'static str,
) -> Result<VolumePolicy, ConfigError> {
    let key = if section == "model" { "model.zeta" } else { "meta.zeta" };
    let set = usize::from(zeta.is_some()) + usize::from(psi.is_some()) + usize::from(execution.is_some());
    if set > 1 {
        return Err(invalid(key, "set at most one of zeta, psi, execution"));
    }
    let policy = match (zeta, psi, execution) {
        (Some(z), _, _) if z.is_infinite() => Ok(VolumePolicy::Unit),
        (Some(z), _, _) => VolumePolicy::zeta(z),
        (_, Some(p), _) => VolumePolicy::psi(p),
        (_, _, Some(Execution::Unit)) => Ok(VolumePolicy::Unit),
        (_, _, Some(Execution::Greedy)) => Ok(VolumePolicy::Greedy),
        _ => VolumePolicy::zeta(0.95),
    };
    policy.map_err(|e| invalid(key, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = Config::from_toml("[model]\nmu = 0.1\n").unwrap();
        let p = c.model_params().unwrap();
        assert_eq!(p.lambda_w, 5e-3);
        assert_eq!(p.nu, 1e-7);
        assert_eq!(p.background, VolumePolicy::Zeta(0.95));
        assert_eq!(c.run.replicas, 8);
        assert_eq!(c.q_grid().last(), Some(&100));
    }

    #[test]
    fn missing_mu_is_named() {
        let err = Config::from_toml("[model]\nnu = 1e-4\n").unwrap_err();
        assert!(err.to_string().contains("mu"), "{err}");
    }

    #[test]
    fn conflicting_volume_laws_rejected() {
        let err = Config::from_toml("[model]\nmu = 0.1\nzeta = 0.5\npsi = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("model.zeta"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_toml("[model]\nmu = 0.1\nmuu = 2\n").is_err());
    }

    #[test]
    fn meta_termination_modes() {
        let c = Config::from_toml("[model]\nmu = 0.1\n[meta]\nq = 50\n").unwrap();
        assert_eq!(c.meta_spec().unwrap().termination, Termination::Volume(50));
        let c = Config::from_toml("[model]\nmu = 0.1\n[meta]\nduration = 100.0\nq_grid = [1]\n").unwrap();
        assert_eq!(c.meta_spec().unwrap().termination, Termination::Duration(100.0));
        let c = Config::from_toml("[model]\nmu = 0.1\n[meta]\nq = 5\nduration = 9.0\n").unwrap();
        assert!(c.meta_spec().is_err());
        let c = Config::from_toml(
            "[model]\nmu = 0.1\n[meta]\nq = 5\nduration = 9.0\nexecution = \"unit\"\n",
        )
        .unwrap();
        assert!(c.meta_spec().is_ok());
    }

    #[test]
    fn sweep_override() {
        let c = Config::from_toml("[model]\nmu = 0.1\npsi = 0.5\n").unwrap();
        let z = c.with_param("zeta", 2.0).unwrap();
        assert_eq!(z.model_params().unwrap().background, VolumePolicy::Zeta(2.0));
        assert!(c.with_param("bogus", 1.0).is_err());
    }
}
