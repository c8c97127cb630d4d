//! Monte Carlo Q-learning on the grid's actions with Boltzmann selection.
//!
//! Each update, both agents draw `batch` actions from their Boltzmann
//! densities. Every node's Q-value then moves toward its payoff against the
//! opponent's empirical batch distribution.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Agent;
use crate::error::{Error, Result};
use crate::games::{tabulate, GameSpec, PayoffKernel};
use crate::grid::{self, Density, Grid};

/// Generator behind every simulation, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha, seed_from_u64)";

#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    grid: Grid,
    q: Vec<f64>,
}

impl QTable {
    pub fn new(grid: Grid, q: Vec<f64>) -> Result<Self> {
        grid.check_len(q.len())?;
        if let Some(i) = q.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("q", format!("entry {i} is {}", q[i])));
        }
        Ok(Self { grid, q })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, q: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }
}

/// Initial Q profile.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitQ {
    #[default]
    Zero,
    /// `q(x) = slope · x`.
    Linear { slope: f64 },
}

impl InitQ {
    pub fn table(self, grid: Grid) -> QTable {
        match self {
            InitQ::Zero => QTable::zeros(grid),
            InitQ::Linear { slope } => QTable {
                grid,
                q: grid.nodes().iter().map(|x| slope * x).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub beta: f64,
    /// Q-update step, in `(0, 1]`.
    pub alpha: f64,
    /// Interactions per update.
    pub batch: usize,
    pub updates: usize,
    pub seed: u64,
    pub init_q: [InitQ; 2],
}

impl SimConfig {
    pub const DEFAULT_BATCH: usize = 1000;
    pub const DEFAULT_ALPHA: f64 = 0.1;
    pub const DEFAULT_UPDATES: usize = 2000;

    pub fn new(beta: f64, seed: u64) -> Self {
        Self {
            beta,
            alpha: Self::DEFAULT_ALPHA,
            batch: Self::DEFAULT_BATCH,
            updates: Self::DEFAULT_UPDATES,
            seed,
            init_q: [InitQ::Zero; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        grid::positive("beta", self.beta)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        if self.batch == 0 {
            return Err(Error::param("batch", "must be at least 1"));
        }
        for q in &self.init_q {
            if let InitQ::Linear { slope } = q {
                if !slope.is_finite() {
                    return Err(Error::param("init_q", format!("slope must be finite, got {slope}")));
                }
            }
        }
        Ok(())
    }
}

/// Boltzmann density `∝ exp(β q)` on the table's grid.
pub fn boltzmann_density(q: &QTable, beta: f64) -> Result<Density> {
    Density::gibbs(q.grid, &q.q, beta)
}

/// Draws grid nodes with probability proportional to cell weight times density.
#[derive(Clone, Debug)]
pub struct ActionSampler {
    index: WeightedIndex<f64>,
}

impl ActionSampler {
    pub fn new(d: &Density) -> Result<Self> {
        let weights: Vec<f64> = d
            .grid()
            .cell_weights()
            .iter()
            .zip(d.values())
            .map(|(w, p)| w * p)
            .collect();
        let index = WeightedIndex::new(weights)
            .map_err(|e| Error::DegenerateDensity(format!("cannot sample from density: {e}")))?;
        Ok(Self { index })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// One draw; build an [`ActionSampler`] when drawing repeatedly.
pub fn sample_action<R: Rng + ?Sized>(d: &Density, rng: &mut R) -> Result<usize> {
    Ok(ActionSampler::new(d)?.sample(rng))
}

/// `q' = q + α (r̂ - q)`.
pub fn q_update(q: &QTable, rewards: &[f64], alpha: f64) -> Result<QTable> {
    q.grid.check_len(rewards.len())?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    let values = q
        .q
        .iter()
        .zip(rewards)
        .map(|(q, r)| if alpha == 1.0 { *r } else { q + alpha * (r - q) })
        .collect();
    Ok(QTable { grid: q.grid, q: values })
}

/// Payoff of every node against an opponent's batch histogram `counts`.
pub fn empirical_reward(kernel: &PayoffKernel, counts: &[u32], batch: usize, agent: Agent) -> Vec<f64> {
    let m = kernel.grid().len();
    let scale = 1.0 / batch as f64;
    let mut r = vec![0.0; m];
    match agent {
        Agent::One => {
            let cols: Vec<(usize, f64)> = counts
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(|(j, c)| (j, f64::from(*c) * scale))
                .collect();
            for (ri, row) in r.iter_mut().zip(kernel.table1().chunks_exact(m)) {
                *ri = cols.iter().map(|(j, f)| row[*j] * f).sum();
            }
        }
        Agent::Two => {
            for (i, c) in counts.iter().enumerate().filter(|(_, c)| **c > 0) {
                let f = f64::from(*c) * scale;
                let row = &kernel.table2()[i * m..(i + 1) * m];
                for (rj, k) in r.iter_mut().zip(row) {
                    *rj += k * f;
                }
            }
        }
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub update: usize,
    pub ks1: f64,
    pub ks2: f64,
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub p1: Density,
    pub p2: Density,
    /// KS distance to the reference after every update; empty without one.
    pub trace: Vec<TraceRow>,
}

/// Runs `cfg.updates` batch-and-update rounds of two Q-learners.
pub fn run_simulation(
    game: &GameSpec,
    grid: Grid,
    cfg: &SimConfig,
    reference: Option<(&Density, &Density)>,
) -> Result<SimOutcome> {
    cfg.validate()?;
    let kernel = tabulate(game, grid)?;
    run_simulation_on(&kernel, cfg, reference)
}

pub fn run_simulation_on(
    kernel: &PayoffKernel,
    cfg: &SimConfig,
    reference: Option<(&Density, &Density)>,
) -> Result<SimOutcome> {
    cfg.validate()?;
    let grid = *kernel.grid();
    if let Some((r1, r2)) = reference {
        grid.check_same(r1.grid())?;
        grid.check_same(r2.grid())?;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut q1 = cfg.init_q[0].table(grid);
    let mut q2 = cfg.init_q[1].table(grid);
    let mut d1 = boltzmann_density(&q1, cfg.beta)?;
    let mut d2 = boltzmann_density(&q2, cfg.beta)?;
    let mut trace = Vec::with_capacity(if reference.is_some() { cfg.updates } else { 0 });
    let mut counts1 = vec![0u32; grid.len()];
    let mut counts2 = vec![0u32; grid.len()];

    for update in 1..=cfg.updates {
        let s1 = ActionSampler::new(&d1)?;
        let s2 = ActionSampler::new(&d2)?;
        counts1.iter_mut().for_each(|c| *c = 0);
        counts2.iter_mut().for_each(|c| *c = 0);
        for _ in 0..cfg.batch {
            counts1[s1.sample(&mut rng)] += 1;
            counts2[s2.sample(&mut rng)] += 1;
        }
        let r1 = empirical_reward(kernel, &counts2, cfg.batch, Agent::One);
        let r2 = empirical_reward(kernel, &counts1, cfg.batch, Agent::Two);
        q1 = q_update(&q1, &r1, cfg.alpha)?;
        q2 = q_update(&q2, &r2, cfg.alpha)?;
        d1 = boltzmann_density(&q1, cfg.beta)?;
        d2 = boltzmann_density(&q2, cfg.beta)?;
        if let Some((r1, r2)) = reference {
            trace.push(TraceRow {
                update,
                ks1: grid::ks_distance(&d1, r1)?,
                ks2: grid::ks_distance(&d2, r2)?,
            });
        }
    }
    Ok(SimOutcome { p1: d1, p2: d2, trace })
}
