//! Run configuration: a JSON file merged under command-line flags, then
//! validated into a [`RunConfig`].

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use replicator_core::io::read_payoff_tables;
use replicator_core::simulate::InitQ;
use replicator_core::{GameSpec, Grid, InitProfile, LearningParams, Quadrature, SimConfig, SteadyOptions};

pub const DEFAULT_GRID_SIZE: usize = 201;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Steady,
    AnalyticBilinear,
    AnalyticQuadratic,
    Simulate,
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Steady => "steady",
            Command::AnalyticBilinear => "analytic-bilinear",
            Command::AnalyticQuadratic => "analytic-quadratic",
            Command::Simulate => "simulate",
            Command::Scan => "scan",
        }
    }
}

/// One named initial profile, or every profile in turn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitChoice {
    #[default]
    Uniform,
    LeftTilt,
    RightTilt,
    Asymmetric,
    All,
}

impl InitChoice {
    pub fn profiles(self) -> Vec<InitProfile> {
        match self {
            InitChoice::Uniform => vec![InitProfile::Uniform],
            InitChoice::LeftTilt => vec![InitProfile::LeftTilt],
            InitChoice::RightTilt => vec![InitProfile::RightTilt],
            InitChoice::Asymmetric => vec![InitProfile::Asymmetric],
            InitChoice::All => InitProfile::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSettings {
    pub profile: InitChoice,
    /// Exponential tilt rate of the non-uniform profiles.
    pub tilt: f64,
}

impl Default for InitSettings {
    fn default() -> Self {
        Self {
            profile: InitChoice::Uniform,
            tilt: InitProfile::DEFAULT_TILT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSettings {
    pub dt: f64,
    pub t_max: f64,
    pub tol: f64,
    pub sample_interval: f64,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        let p = LearningParams::new(1.0);
        Self {
            dt: p.dt,
            t_max: p.t_max,
            tol: p.tol,
            sample_interval: p.sample_interval,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadySettings {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SteadySettings {
    fn default() -> Self {
        let o = SteadyOptions::default();
        Self {
            damping: o.damping,
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

impl SteadySettings {
    pub fn options(&self) -> SteadyOptions {
        SteadyOptions {
            damping: self.damping,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub alpha: f64,
    pub batch: usize,
    pub updates: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            alpha: SimConfig::DEFAULT_ALPHA,
            batch: SimConfig::DEFAULT_BATCH,
            updates: SimConfig::DEFAULT_UPDATES,
        }
    }
}

/// Inclusive `β` range `beta_min, beta_min + beta_step, ..., <= beta_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_step: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            beta_min: 1.0,
            beta_max: 100.0,
            beta_step: 1.0,
        }
    }
}

impl ScanSettings {
    pub fn betas(&self) -> Vec<f64> {
        // Multiplying from the start keeps every β free of accumulated error.
        let n = ((self.beta_max - self.beta_min) / self.beta_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.beta_min + i as f64 * self.beta_step).collect()
    }
}

/// Fully resolved run description; also the `config` record of a manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub game: GameSpec,
    /// Required by every command except `scan`.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_quadrature")]
    pub quadrature: Quadrature,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub init: InitSettings,
    #[serde(default)]
    pub evolve: EvolveSettings,
    #[serde(default)]
    pub steady: SteadySettings,
    #[serde(default)]
    pub simulate: SimSettings,
    #[serde(default)]
    pub scan: ScanSettings,
}

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_quadrature() -> Quadrature {
    Quadrature::Simpson
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_jobs() -> usize {
    1
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::with_rule(self.grid_size, self.quadrature).context("grid_size")
    }

    /// `β` for single-point commands.
    pub fn beta(&self) -> Result<f64> {
        self.beta
            .ok_or_else(|| anyhow!("beta: required for `{}`", self.command.name()))
    }

    pub fn learning_params(&self) -> Result<LearningParams> {
        let e = &self.evolve;
        Ok(LearningParams {
            dt: e.dt,
            t_max: e.t_max,
            tol: e.tol,
            sample_interval: e.sample_interval,
            ..LearningParams::new(self.beta()?)
        })
    }

    /// Simulation settings; Q-tables start at the Boltzmann preimage of `profile`.
    pub fn sim_config(&self, profile: InitProfile) -> Result<SimConfig> {
        let beta = self.beta()?;
        let slope = |sign: f64| InitQ::Linear {
            slope: sign * self.init.tilt / beta,
        };
        let init_q = match profile {
            InitProfile::Uniform => [InitQ::Zero; 2],
            InitProfile::LeftTilt => [slope(-1.0); 2],
            InitProfile::RightTilt => [slope(1.0); 2],
            InitProfile::Asymmetric => [slope(-1.0), slope(1.0)],
        };
        Ok(SimConfig {
            alpha: self.simulate.alpha,
            batch: self.simulate.batch,
            updates: self.simulate.updates,
            init_q,
            ..SimConfig::new(beta, self.seed)
        })
    }

    /// Checks every numeric parameter before any run starts.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.game.validate().context("game")?;
        if let GameSpec::Tabulated { m, .. } = self.game {
            if m != grid.len() {
                bail!("grid_size: must equal the payoff table size {m}, got {}", grid.len());
            }
        }
        if self.jobs == 0 {
            bail!("jobs: must be at least 1");
        }
        if !self.init.tilt.is_finite() {
            bail!("init.tilt: must be finite, got {}", self.init.tilt);
        }
        if self.output.exists() && !self.output.is_dir() {
            bail!("output: {} exists and is not a directory", self.output.display());
        }
        match self.command {
            Command::Scan => {
                let s = &self.scan;
                if !(s.beta_min > 0.0 && s.beta_min.is_finite()) {
                    bail!("scan.beta_min: must be positive and finite, got {}", s.beta_min);
                }
                if !(s.beta_max >= s.beta_min && s.beta_max.is_finite()) {
                    bail!("scan.beta_max: must be finite and at least beta_min, got {}", s.beta_max);
                }
                if !(s.beta_step > 0.0 && s.beta_step.is_finite()) {
                    bail!("scan.beta_step: must be positive and finite, got {}", s.beta_step);
                }
            }
            _ => {
                let beta = self.beta()?;
                if !(beta > 0.0 && beta.is_finite()) {
                    bail!("beta: must be positive and finite, got {beta}");
                }
            }
        }
        match self.command {
            Command::Evolve => self.learning_params()?.validate().context("evolve")?,
            Command::Steady => self.steady.options().validate().context("steady")?,
            Command::Simulate => {
                self.sim_config(InitProfile::Uniform)?.validate().context("simulate")?;
                self.steady.options().validate().context("steady")?;
            }
            Command::AnalyticBilinear => {
                if !matches!(self.game, GameSpec::Bilinear { .. }) || !self.game.is_symmetric() {
                    bail!("game: analytic-bilinear needs a symmetric bilinear game (a1 = a2, b1 = b2)");
                }
            }
            Command::AnalyticQuadratic => {
                if !matches!(self.game, GameSpec::Quadratic { .. }) {
                    bail!("game: analytic-quadratic needs a quadratic game");
                }
            }
            Command::Scan => self.steady.options().validate().context("steady")?,
        }
        Ok(())
    }
}

/// Parses and validates a run from an optional JSON file and flag overrides.
///
/// `file` may be a plain config or a `manifest.json`, whose `config` record
/// is used. `flags` is a partial config object; its values win.
pub fn parse_config(file: Option<&Path>, flags: Value) -> Result<RunConfig> {
    let base = match file {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("config: cannot open {}", path.display()))?;
            serde_json::from_reader(BufReader::new(f))
                .with_context(|| format!("config: malformed JSON in {}", path.display()))?
        }
        None => Value::Object(Map::new()),
    };
    resolve(base, flags)
}

/// [`parse_config`] on JSON text.
pub fn parse_config_str(text: &str, flags: Value) -> Result<RunConfig> {
    let base = serde_json::from_str(text).context("config: malformed JSON")?;
    resolve(base, flags)
}

fn resolve(base: Value, flags: Value) -> Result<RunConfig> {
    let mut base = match base {
        Value::Object(mut m) if m.contains_key("config") && m.contains_key("version") => {
            m.remove("config").unwrap_or(Value::Null)
        }
        v => v,
    };
    if !base.is_object() {
        bail!("config: top level must be a JSON object");
    }
    merge(&mut base, flags);
    load_payoff_table(&mut base)?;
    let cfg: RunConfig = serde_json::from_value(base).context("config")?;
    cfg.validate()?;
    Ok(cfg)
}

/// Overlays `top` onto `base`. A `game` whose `kind` changes is replaced
/// whole, since parameters of one kind mean nothing to another.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (key, value) in t {
                let kind_changed = key == "game"
                    && match (b.get("game").and_then(|g| g.get("kind")), value.get("kind")) {
                        (Some(old), Some(new)) => old != new,
                        _ => false,
                    };
                match b.get_mut(&key) {
                    Some(slot) if !kind_changed => merge(slot, value),
                    _ => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

/// Replaces `{"kind":"tabulated","path":...}` with the tables read from the
/// CSV so the resolved config is self-contained.
fn load_payoff_table(cfg: &mut Value) -> Result<()> {
    let m = match cfg.get("grid_size") {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| anyhow!("grid_size: must be a positive integer"))? as usize,
        None => DEFAULT_GRID_SIZE,
    };
    let Some(game) = cfg.get_mut("game").and_then(Value::as_object_mut) else {
        return Ok(());
    };
    if game.get("kind").and_then(Value::as_str) != Some("tabulated") {
        game.remove("path");
        return Ok(());
    }
    let Some(path) = game.remove("path") else {
        return Ok(());
    };
    let path = path.as_str().ok_or_else(|| anyhow!("game.path: must be a string"))?;
    let f = File::open(path).with_context(|| format!("game.path: cannot open {path}"))?;
    let (k1, k2) = read_payoff_tables(BufReader::new(f), m).with_context(|| format!("game.path: {path}"))?;
    game.insert("m".into(), m.into());
    game.insert("k1".into(), serde_json::to_value(k1)?);
    game.insert("k2".into(), serde_json::to_value(k2)?);
    Ok(())
}
