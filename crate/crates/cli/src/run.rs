//! Run orchestration: executes one command and writes its artifacts plus a
//! `manifest.json` into the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use replicator_core::analytic::{
    critical_beta_multistable, critical_beta_period2, solve_at_beta, solve_constraint_family, SCAN_PANELS,
};
use replicator_core::io;
use replicator_core::simulate::{run_simulation_on, RNG_ALGORITHM};
use replicator_core::{
    evolve, solve_steady, tabulate, BifurcationDiagram, Density, ExponentialFamilyFit, GameFamily, GameSpec, Grid,
    PayoffKernel, TruncatedGaussianFit,
};

use crate::config::{Command, RunConfig};

pub const MANIFEST: &str = "manifest.json";

/// Tolerance of the critical-β searches reported by the bilinear commands.
const CRITICAL_BETA_TOL: f64 = 1e-6;

/// Convergence record of one solved unit (an init profile or a scan point).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub label: String,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub converged: bool,
    pub residuals: Vec<Residual>,
    /// Artifact paths in write order, manifest last.
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    /// 0 when every unit converged, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.converged {
            0
        } else {
            2
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    grid: GridRecord,
    rng: &'static str,
    converged: bool,
    residuals: &'a [Residual],
    outputs: Vec<String>,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct GridRecord {
    size: usize,
    quadrature: replicator_core::Quadrature,
}

/// Output directory; every file lands through write-then-rename.
struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("output: cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            names: Vec::new(),
        })
    }

    fn put(&mut self, name: String, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(&name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("output: cannot stage {}", target.display()))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target)
            .with_context(|| format!("output: cannot write {}", target.display()))?;
        self.names.push(name);
        Ok(())
    }

    fn csv<F>(&mut self, name: String, write: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> replicator_core::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf).context("io")?;
        self.put(name, &buf)
    }

    fn jsonl(&mut self, name: String, records: &[serde_json::Value]) -> Result<()> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        self.put(name, &buf)
    }
}

/// Executes `cfg` and writes its artifacts. Non-convergence is reported in
/// the returned report with all outputs written; errors abort the run.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut out = Artifacts::create(&cfg.output)?;
    let residuals = match cfg.command {
        Command::Evolve => run_evolve(cfg, grid, &mut out)?,
        Command::Steady => run_steady(cfg, grid, &mut out)?,
        Command::Simulate => run_simulate(cfg, grid, &mut out)?,
        Command::AnalyticBilinear => run_analytic_bilinear(cfg, grid, &mut out)?,
        Command::AnalyticQuadratic => run_analytic_quadratic(cfg, grid, &mut out)?,
        Command::Scan => run_scan(cfg, grid, &mut out)?,
    };
    let converged = residuals.iter().all(|r| r.converged);
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name(),
        seed: cfg.seed,
        grid: GridRecord {
            size: grid.len(),
            quadrature: grid.rule(),
        },
        rng: RNG_ALGORITHM,
        converged,
        residuals: &residuals,
        outputs: out.names.clone(),
        config: cfg,
    };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    out.put(MANIFEST.into(), &text)?;
    Ok(RunReport {
        converged,
        residuals,
        outputs: out.names.iter().map(|n| out.dir.join(n)).collect(),
    })
}

/// `<command>_<game>_<beta>`.
fn stem(cfg: &RunConfig, beta: f64) -> String {
    format!("{}_{}_{}", cfg.command.name(), cfg.game.name(), beta)
}

fn kernel(cfg: &RunConfig, grid: Grid) -> Result<PayoffKernel> {
    tabulate(&cfg.game, grid).context("games")
}

fn run_evolve(cfg: &RunConfig, grid: Grid, out: &mut Artifacts) -> Result<Vec<Residual>> {
    let beta = cfg.beta()?;
    let stem = stem(cfg, beta);
    let kernel = kernel(cfg, grid)?;
    let params = cfg.learning_params()?;
    let mut records = Vec::new();
    let mut residuals = Vec::new();
    for profile in cfg.init.profile.profiles() {
        let rec = evolve(&profile.state(grid, cfg.init.tilt), &kernel, &params).context("dynamics")?;
        let init = profile.name();
        out.csv(format!("{stem}_{init}_p1.csv"), |w| io::write_trajectory(w, &rec, 0))?;
        out.csv(format!("{stem}_{init}_p2.csv"), |w| io::write_trajectory(w, &rec, 1))?;
        out.csv(format!("{stem}_{init}_summary.csv"), |w| io::write_trajectory_summary(w, &rec))?;
        let last = rec.final_state();
        records.push(json!({
            "beta": beta,
            "init": init,
            "converged": rec.converged,
            "steps": rec.steps,
            "t": last.t,
            "residual": rec.final_residual(),
            "free_energy": rec.free_energy.last(),
            "max_mass_drift": rec.max_mass_drift,
            "mean1": last.p1.mean(),
            "mean2": last.p2.mean(),
        }));
        residuals.push(Residual {
            label: init.into(),
            residual: rec.final_residual(),
            converged: rec.converged,
        });
    }
    out.jsonl(format!("{stem}.jsonl"), &records)?;
    Ok(residuals)
}

fn run_steady(cfg: &RunConfig, grid: Grid, out: &mut Artifacts) -> Result<Vec<Residual>> {
    let beta = cfg.beta()?;
    let stem = stem(cfg, beta);
    let kernel = kernel(cfg, grid)?;
    let opts = cfg.steady.options();
    let mut records = Vec::new();
    let mut residuals = Vec::new();
    for profile in cfg.init.profile.profiles() {
        let mut res =
            solve_steady(&kernel, beta, profile.densities(grid, cfg.init.tilt), &opts).context("steady")?;
        res.attach_fit(&cfg.game, beta);
        let init = profile.name();
        out.csv(format!("{stem}_{init}_p1.csv"), |w| io::write_density(w, &res.p1))?;
        out.csv(format!("{stem}_{init}_p2.csv"), |w| io::write_density(w, &res.p2))?;
        records.push(json!({
            "beta": beta,
            "damping": res.damping,
            "init": init,
            "iterations": res.iterations,
            "residual": res.residual,
            "converged": res.converged,
            "mean1": res.p1.mean(),
            "mean2": res.p2.mean(),
            "fit": res.fit,
        }));
        residuals.push(Residual {
            label: init.into(),
            residual: res.residual,
            converged: res.converged,
        });
    }
    out.jsonl(format!("{stem}.jsonl"), &records)?;
    Ok(residuals)
}

/// Runs the Q-learners against the steady state reached from the same
/// profile; convergence refers to that reference solve.
fn run_simulate(cfg: &RunConfig, grid: Grid, out: &mut Artifacts) -> Result<Vec<Residual>> {
    let beta = cfg.beta()?;
    let stem = stem(cfg, beta);
    let kernel = kernel(cfg, grid)?;
    let opts = cfg.steady.options();
    let mut records = Vec::new();
    let mut residuals = Vec::new();
    for profile in cfg.init.profile.profiles() {
        let reference =
            solve_steady(&kernel, beta, profile.densities(grid, cfg.init.tilt), &opts).context("steady")?;
        let sim_cfg = cfg.sim_config(profile)?;
        let sim = run_simulation_on(&kernel, &sim_cfg, Some((&reference.p1, &reference.p2))).context("simulate")?;
        let init = profile.name();
        out.csv(format!("{stem}_{init}_p1.csv"), |w| io::write_density(w, &sim.p1))?;
        out.csv(format!("{stem}_{init}_p2.csv"), |w| io::write_density(w, &sim.p2))?;
        out.csv(format!("{stem}_{init}_trace.csv"), |w| io::write_trace(w, &sim.trace))?;
        let last = sim.trace.last();
        records.push(json!({
            "init": init,
            "config": sim_cfg,
            "rng": RNG_ALGORITHM,
            "reference_residual": reference.residual,
            "reference_converged": reference.converged,
            "ks1": last.map(|r| r.ks1),
            "ks2": last.map(|r| r.ks2),
            "mean1": sim.p1.mean(),
            "mean2": sim.p2.mean(),
        }));
        residuals.push(Residual {
            label: init.into(),
            residual: reference.residual,
            converged: reference.converged,
        });
    }
    out.jsonl(format!("{stem}.jsonl"), &records)?;
    Ok(residuals)
}

#[derive(Serialize)]
struct DensityPairRow<'a> {
    branch: &'a str,
    x: f64,
    p1: f64,
    p2: f64,
}

/// `branch,x,p1,p2` for every solution of a single-`β` diagram.
fn write_branch_densities<W: Write>(w: W, rows: &[(&str, Density, Density)]) -> replicator_core::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (branch, p1, p2) in rows {
        for (i, (a, b)) in p1.values().iter().zip(p2.values()).enumerate() {
            out.serialize(DensityPairRow {
                branch,
                x: p1.grid().node(i),
                p1: *a,
                p2: *b,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

fn diagram_residuals(d: &BifurcationDiagram) -> Vec<Residual> {
    d.points
        .iter()
        .map(|p| Residual {
            label: format!("{}@{}", p.branch.name(), p.beta),
            residual: p.residual,
            converged: p.residual.is_finite(),
        })
        .collect()
}

fn run_analytic_bilinear(cfg: &RunConfig, grid: Grid, out: &mut Artifacts) -> Result<Vec<Residual>> {
    let beta = cfg.beta()?;
    let stem = stem(cfg, beta);
    let family = family_of(&cfg.game).context("game")?;
    let GameFamily::Bilinear { a, b } = family else {
        anyhow::bail!("game: analytic-bilinear needs a symmetric bilinear game");
    };
    let sols = solve_at_beta(&family, beta).context("analytic")?;
    let roots: Vec<f64> = sols.pairs.iter().map(|p| p.0).collect();
    let cycle = sols.cycle;
    let diagram = BifurcationDiagram::from_solutions(family, vec![sols]).context("analytic")?;
    out.csv(format!("{stem}.csv"), |w| io::write_bifurcation(w, &diagram))?;
    let densities: Vec<_> = diagram
        .points
        .iter()
        .map(|p| {
            let (d1, d2) = ExponentialFamilyFit { gamma1: p.value1, gamma2: p.value2 }.densities(grid);
            (p.branch.name(), d1, d2)
        })
        .collect();
    out.csv(format!("{stem}_densities.csv"), |w| write_branch_densities(w, &densities))?;
    let (lo, hi) = (cfg.scan.beta_min, cfg.scan.beta_max);
    let multistable = critical_beta_multistable(a, b, lo, hi, CRITICAL_BETA_TOL, SCAN_PANELS).context("analytic")?;
    let period2 = critical_beta_period2(a, b, lo, hi, CRITICAL_BETA_TOL).context("analytic")?;
    out.jsonl(
        format!("{stem}.jsonl"),
        &[json!({
            "beta": beta,
            "a": a,
            "b": b,
            "symmetric_roots": roots,
            "period2": cycle,
            "critical_beta_search": [lo, hi],
            "critical_beta_multistable": multistable,
            "critical_beta_period2": period2,
        })],
    )?;
    Ok(diagram_residuals(&diagram))
}

fn run_analytic_quadratic(cfg: &RunConfig, grid: Grid, out: &mut Artifacts) -> Result<Vec<Residual>> {
    let beta = cfg.beta()?;
    let stem = stem(cfg, beta);
    let family = family_of(&cfg.game).context("game")?;
    let GameFamily::Quadratic { a1, a2 } = family else {
        anyhow::bail!("game: analytic-quadratic needs a quadratic game");
    };
    let sols = solve_at_beta(&family, beta).context("analytic")?;
    let centers = sols.pairs.clone();
    let diagram = BifurcationDiagram::from_solutions(family, vec![sols]).context("analytic")?;
    out.csv(format!("{stem}.csv"), |w| io::write_bifurcation(w, &diagram))?;
    let densities = diagram
        .points
        .iter()
        .map(|p| {
            let (d1, d2) = TruncatedGaussianFit::new(p.value1, p.value2, beta)?.densities(grid);
            Ok((p.branch.name(), d1, d2))
        })
        .collect::<replicator_core::Result<Vec<_>>>()
        .context("analytic")?;
    out.csv(format!("{stem}_densities.csv"), |w| write_branch_densities(w, &densities))?;
    let constraint = if a1 == a2 {
        let fam = solve_constraint_family(a1, beta).context("analytic")?;
        Some(json!({
            "roots": fam.roots,
            "plateau": fam.plateau,
            "plateau_width": fam.plateau_width(),
            "band_tol": fam.band_tol,
        }))
    } else {
        None
    };
    out.jsonl(
        format!("{stem}.jsonl"),
        &[json!({
            "beta": beta,
            "a1": a1,
            "a2": a2,
            "centers": centers,
            "constraint_family": constraint,
        })],
    )?;
    Ok(diagram_residuals(&diagram))
}

/// The analytic family of `game`, if it has one.
fn family_of(game: &GameSpec) -> Result<GameFamily> {
    match *game {
        GameSpec::Bilinear { a1, b1, .. } if game.is_symmetric() => Ok(GameFamily::Bilinear { a: a1, b: b1 }),
        GameSpec::Quadratic { a1, a2 } => Ok(GameFamily::Quadratic { a1, a2 }),
        _ => anyhow::bail!("{} has no analytic steady-state family", game.name()),
    }
}

#[derive(Serialize)]
struct SteadyScanRow {
    beta: f64,
    init: &'static str,
    iterations: usize,
    damping: f64,
    residual: f64,
    converged: bool,
    mean1: f64,
    mean2: f64,
}

/// Analytic bifurcation diagram for games with a family, else a steady-state
/// sweep over `β` and init profiles. Points run on a pool of `jobs` threads
/// and are collected in input order, so output bytes do not depend on `jobs`.
fn run_scan(cfg: &RunConfig, grid: Grid, out: &mut Artifacts) -> Result<Vec<Residual>> {
    let betas = cfg.scan.betas();
    let stem = format!(
        "scan_{}_{}-{}",
        cfg.game.name(),
        cfg.scan.beta_min,
        betas.last().copied().unwrap_or(cfg.scan.beta_min)
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .context("jobs")?;
    if let Ok(family) = family_of(&cfg.game) {
        let solutions = pool
            .install(|| betas.par_iter().map(|b| solve_at_beta(&family, *b)).collect::<Vec<_>>())
            .into_iter()
            .collect::<replicator_core::Result<Vec<_>>>()
            .context("analytic")?;
        let diagram = BifurcationDiagram::from_solutions(family, solutions).context("analytic")?;
        out.csv(format!("{stem}.csv"), |w| io::write_bifurcation(w, &diagram))?;
        let mut record = json!({
            "family": family,
            "betas": betas.len(),
            "points": diagram.points.len(),
        });
        if let GameFamily::Bilinear { a, b } = family {
            let (lo, hi) = (cfg.scan.beta_min, cfg.scan.beta_max);
            record["critical_beta_multistable"] =
                json!(critical_beta_multistable(a, b, lo, hi, CRITICAL_BETA_TOL, SCAN_PANELS).context("analytic")?);
            record["critical_beta_period2"] =
                json!(critical_beta_period2(a, b, lo, hi, CRITICAL_BETA_TOL).context("analytic")?);
        }
        out.jsonl(format!("{stem}.jsonl"), &[record])?;
        return Ok(diagram_residuals(&diagram));
    }

    let kernel = kernel(cfg, grid)?;
    let opts = cfg.steady.options();
    let tasks: Vec<_> = betas
        .iter()
        .flat_map(|b| cfg.init.profile.profiles().into_iter().map(move |p| (*b, p)))
        .collect();
    let rows = pool
        .install(|| {
            tasks
                .par_iter()
                .map(|&(beta, profile)| {
                    let res = solve_steady(&kernel, beta, profile.densities(grid, cfg.init.tilt), &opts)?;
                    Ok(SteadyScanRow {
                        beta,
                        init: profile.name(),
                        iterations: res.iterations,
                        damping: res.damping,
                        residual: res.residual,
                        converged: res.converged,
                        mean1: res.p1.mean(),
                        mean2: res.p2.mean(),
                    })
                })
                .collect::<Vec<replicator_core::Result<_>>>()
        })
        .into_iter()
        .collect::<replicator_core::Result<Vec<_>>>()
        .context("steady")?;
    out.csv(format!("{stem}.csv"), |w| {
        let mut csv = csv::Writer::from_writer(w);
        for row in &rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    })?;
    Ok(rows
        .iter()
        .map(|r| Residual {
            label: format!("{}@{}", r.init, r.beta),
            residual: r.residual,
            converged: r.converged,
        })
        .collect())
}
