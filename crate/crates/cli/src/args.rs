//! Command-line surface. Flags become a partial JSON config that overrides
//! the `--config` file.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::config::{parse_config, Command, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "replicator", version, about = "Replicator dynamics of Boltzmann Q-learners on [0, 1]")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Integrate the coupled replicator equations in time.
    Evolve(Flags),
    /// Solve the steady-state equations by damped fixed-point iteration.
    Steady(Flags),
    /// Closed-form exponential steady states of a symmetric bilinear game.
    AnalyticBilinear(Flags),
    /// Closed-form truncated-Gaussian steady states of a quadratic game.
    AnalyticQuadratic(Flags),
    /// Monte Carlo batch Q-learning against the steady state.
    Simulate(Flags),
    /// Sweep a β range: analytic branches when available, else steady states.
    Scan(Flags),
    /// Re-run the command recorded in `--config` (a config or a manifest).
    Run(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON config or manifest; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// bilinear, quadratic, polad, investment or tabulated.
    #[arg(long)]
    pub game: Option<String>,
    /// Payoff CSV `i,j,f1,f2`; implies `--game tabulated`.
    #[arg(long)]
    pub payoff: Option<PathBuf>,
    /// Sets a1 and a2.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Sets b1 and b2.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// simpson (odd grid size) or trapezoid.
    #[arg(long)]
    pub quadrature: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for `scan`.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// uniform, left-tilt, right-tilt, asymmetric or all.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub tilt: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Convergence tolerance of the command's solver.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub sample_interval: Option<f64>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Q-learning step.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub updates: Option<usize>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long)]
    pub beta_step: Option<f64>,
}

fn set<T: Into<Value>>(obj: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        obj.insert(key.into(), v.into());
    }
}

fn section(obj: &mut Map<String, Value>, key: &str, inner: Map<String, Value>) {
    if !inner.is_empty() {
        obj.insert(key.into(), Value::Object(inner));
    }
}

impl Flags {
    /// Partial config holding only the flags that were given. `--tol` goes
    /// to the solver `command` uses.
    pub fn overrides(&self, command: Option<Command>) -> Value {
        let mut top = Map::new();
        if let Some(c) = command {
            top.insert("command".into(), json!(c));
        }

        let mut game = Map::new();
        set(&mut game, "kind", self.game.clone());
        if let Some(path) = &self.payoff {
            game.insert("kind".into(), "tabulated".into());
            game.insert("path".into(), path.to_string_lossy().into_owned().into());
        }
        // Shorthands first so explicit per-agent flags win.
        set(&mut game, "a1", self.a);
        set(&mut game, "a2", self.a);
        set(&mut game, "b1", self.b);
        set(&mut game, "b2", self.b);
        set(&mut game, "a1", self.a1);
        set(&mut game, "a2", self.a2);
        set(&mut game, "b1", self.b1);
        set(&mut game, "b2", self.b2);
        section(&mut top, "game", game);

        set(&mut top, "beta", self.beta);
        set(&mut top, "grid_size", self.grid_size);
        set(&mut top, "quadrature", self.quadrature.clone());
        set(&mut top, "output", self.output.as_ref().map(|p| p.to_string_lossy().into_owned()));
        set(&mut top, "seed", self.seed);
        set(&mut top, "jobs", self.jobs);

        let mut init = Map::new();
        set(&mut init, "profile", self.init.clone());
        set(&mut init, "tilt", self.tilt);
        section(&mut top, "init", init);

        let evolve_tol = matches!(command, Some(Command::Evolve));
        let mut evolve = Map::new();
        set(&mut evolve, "dt", self.dt);
        set(&mut evolve, "t_max", self.t_max);
        set(&mut evolve, "sample_interval", self.sample_interval);
        if evolve_tol {
            set(&mut evolve, "tol", self.tol);
        }
        section(&mut top, "evolve", evolve);

        let mut steady = Map::new();
        set(&mut steady, "damping", self.damping);
        set(&mut steady, "max_iter", self.max_iter);
        if !evolve_tol {
            set(&mut steady, "tol", self.tol);
        }
        section(&mut top, "steady", steady);

        let mut sim = Map::new();
        set(&mut sim, "alpha", self.alpha);
        set(&mut sim, "batch", self.batch);
        set(&mut sim, "updates", self.updates);
        section(&mut top, "simulate", sim);

        let mut scan = Map::new();
        set(&mut scan, "beta_min", self.beta_min);
        set(&mut scan, "beta_max", self.beta_max);
        set(&mut scan, "beta_step", self.beta_step);
        section(&mut top, "scan", scan);

        Value::Object(top)
    }
}

impl Sub {
    fn parts(&self) -> (Option<Command>, &Flags) {
        match self {
            Sub::Evolve(f) => (Some(Command::Evolve), f),
            Sub::Steady(f) => (Some(Command::Steady), f),
            Sub::AnalyticBilinear(f) => (Some(Command::AnalyticBilinear), f),
            Sub::AnalyticQuadratic(f) => (Some(Command::AnalyticQuadratic), f),
            Sub::Simulate(f) => (Some(Command::Simulate), f),
            Sub::Scan(f) => (Some(Command::Scan), f),
            Sub::Run(f) => (None, f),
        }
    }

    /// Resolves the subcommand, its flags and any `--config` file.
    pub fn resolve(&self) -> Result<RunConfig> {
        let (command, flags) = self.parts();
        let command = match command {
            Some(c) => Some(c),
            None => Some(recorded_command(flags)?),
        };
        parse_config(flags.config.as_deref(), flags.overrides(command))
    }
}

/// The `command` stored in a config or manifest file.
fn recorded_command(flags: &Flags) -> Result<Command> {
    let path = flags
        .config
        .as_deref()
        .ok_or_else(|| anyhow!("config: `run` needs --config"))?;
    let f = File::open(path).with_context(|| format!("config: cannot open {}", path.display()))?;
    let v: Value = serde_json::from_reader(BufReader::new(f))
        .with_context(|| format!("config: malformed JSON in {}", path.display()))?;
    let cmd = v
        .get("config")
        .and_then(|c| c.get("command"))
        .or_else(|| v.get("command"))
        .ok_or_else(|| anyhow!("command: missing from {}", path.display()))?;
    serde_json::from_value(cmd.clone()).context("command")
}
