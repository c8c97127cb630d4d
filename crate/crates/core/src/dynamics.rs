//! Time integration of the coupled two-agent replicator equations
//!
//! ```text
//! ∂pᵢ/∂(αt) = pᵢ · [ (rᵢ - ⟨rᵢ⟩) - T (ln pᵢ - ⟨ln pᵢ⟩) ]
//! ```
//!
//! The integrator steps the log-density `u = ln p` with classical RK4 and
//! renormalizes after every step. Dividing the equation by `p` gives a smooth
//! right-hand side for `u`, so densities stay strictly positive wherever they
//! start positive. Nodes that start at exactly zero density stay at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::PayoffKernel;
use crate::grid::{self, Density, Grid, LearningParams};

/// Log-density floor on supported nodes; `exp(-745)` is the smallest
/// positive double, so this is machine zero.
pub const LOG_FLOOR: f64 = -745.0;

/// Real-axis stability limit of classical RK4 (≈ 2.785), rounded down.
const RK4_REAL_LIMIT: f64 = 2.78;

/// Largest log-density change accepted in a single step.
const MAX_LOG_STEP: f64 = 50.0;

/// Steps between convergence checks.
const CHECK_EVERY: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Agent {
    One,
    Two,
}

impl Agent {
    pub fn index(self) -> usize {
        match self {
            Agent::One => 0,
            Agent::Two => 1,
        }
    }
}

/// Average reward `r(x) = ∫ f(x, y) p_opp(y) dy` felt by `agent` at every
/// node, against the opponent's density.
pub fn average_reward(kernel: &PayoffKernel, opponent: &Density, agent: Agent) -> Result<Vec<f64>> {
    kernel.grid().check_same(opponent.grid())?;
    Ok(reward_against(kernel, opponent.values(), agent))
}

pub(crate) fn reward_against(kernel: &PayoffKernel, opponent: &[f64], agent: Agent) -> Vec<f64> {
    let grid = kernel.grid();
    let m = grid.len();
    let wp: Vec<f64> = opponent
        .iter()
        .enumerate()
        .map(|(j, p)| grid.weight(j) * p)
        .collect();
    let mut r = vec![0.0; m];
    match agent {
        Agent::One => {
            for (ri, row) in r.iter_mut().zip(kernel.table1().chunks_exact(m)) {
                *ri = row.iter().zip(&wp).map(|(k, w)| k * w).sum();
            }
        }
        Agent::Two => {
            // Column sums, accumulated in the same order as agent one's rows so
            // that symmetric games give bitwise-symmetric rewards.
            for (row, w) in kernel.table2().chunks_exact(m).zip(&wp) {
                for (rj, k) in r.iter_mut().zip(row) {
                    *rj += k * w;
                }
            }
        }
    }
    if let Some(corners) = kernel.corners() {
        let a = agent.index();
        let (k00, kmm) = match agent {
            Agent::One => (kernel.k1(0, 0), kernel.k1(m - 1, m - 1)),
            Agent::Two => (kernel.k2(0, 0), kernel.k2(m - 1, m - 1)),
        };
        r[0] += wp[0] * (corners.0[a][0] - k00);
        r[m - 1] += wp[m - 1] * (corners.0[a][1] - kmm);
    }
    r
}

/// Both agents' densities at time `t` (in units of `αt`).
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicatorState {
    pub t: f64,
    pub p1: Density,
    pub p2: Density,
}

impl ReplicatorState {
    pub fn new(p1: Density, p2: Density) -> Result<Self> {
        p1.grid().check_same(p2.grid())?;
        Ok(Self { t: 0.0, p1, p2 })
    }

    pub fn grid(&self) -> &Grid {
        self.p1.grid()
    }
}

/// Right-hand side `∂pᵢ/∂(αt)` at every node for both agents.
pub fn replicator_rhs(state: &ReplicatorState, kernel: &PayoffKernel, beta: f64) -> Result<[Vec<f64>; 2]> {
    kernel.grid().check_same(state.grid())?;
    grid::positive("beta", beta)?;
    let r1 = reward_against(kernel, state.p2.values(), Agent::One);
    let r2 = reward_against(kernel, state.p1.values(), Agent::Two);
    Ok([
        rhs_one(&state.p1, &r1, 1.0 / beta),
        rhs_one(&state.p2, &r2, 1.0 / beta),
    ])
}

fn rhs_one(p: &Density, r: &[f64], temperature: f64) -> Vec<f64> {
    let grid = p.grid();
    let values = p.values();
    let mut mean_r = 0.0;
    let mut mean_ln = 0.0;
    for (i, (&pi, &ri)) in values.iter().zip(r).enumerate() {
        if pi > 0.0 {
            let w = grid.weight(i) * pi;
            mean_r += w * ri;
            mean_ln += w * pi.ln();
        }
    }
    values
        .iter()
        .zip(r)
        .map(|(&pi, &ri)| {
            if pi > 0.0 {
                pi * ((ri - mean_r) - temperature * (pi.ln() - mean_ln))
            } else {
                0.0
            }
        })
        .collect()
}

/// Sampled trajectory of an [`evolve`] run.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub p1: Vec<Density>,
    pub p2: Vec<Density>,
    /// `[F₁, F₂]` per sample, each agent against the opponent's current density.
    pub free_energy: Vec<[f64; 2]>,
    /// Sup-norm of the replicator right-hand side per sample.
    pub residual: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
    /// Largest `|∫p - 1|` seen after a step, before renormalization.
    pub max_mass_drift: f64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> ReplicatorState {
        let last = self.times.len() - 1;
        ReplicatorState {
            t: self.times[last],
            p1: self.p1[last].clone(),
            p2: self.p2[last].clone(),
        }
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual.last().expect("at least one sample")
    }
}

/// Integrates both densities from `init` until `t_max` or until the sup-norm
/// of the right-hand side drops to `tol`.
pub fn evolve(init: &ReplicatorState, kernel: &PayoffKernel, params: &LearningParams) -> Result<TrajectoryRecord> {
    evolve_with_frozen(init, kernel, params, None)
}

/// Like [`evolve`], but the density of `frozen` (if any) is held fixed.
pub fn evolve_with_frozen(
    init: &ReplicatorState,
    kernel: &PayoffKernel,
    params: &LearningParams,
    frozen: Option<Agent>,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    let grid = *init.grid();
    kernel.grid().check_same(&grid)?;

    let temperature = params.temperature();
    let stiffness = temperature + 2.0 * kernel.max_abs();
    if params.dt * stiffness > RK4_REAL_LIMIT {
        return Err(Error::Integration(format!(
            "dt = {} is unstable for this game and beta (need dt <= {:.4}); use a smaller dt",
            params.dt,
            RK4_REAL_LIMIT / stiffness
        )));
    }

    let mut sys = LogSystem::new(kernel, temperature, [&init.p1, &init.p2], frozen);
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        p1: Vec::new(),
        p2: Vec::new(),
        free_energy: Vec::new(),
        residual: Vec::new(),
        converged: false,
        steps: 0,
        max_mass_drift: 0.0,
    };

    let mut t = init.t;
    let t_end = init.t + params.t_max;
    let mut state = sys.state(t)?;
    let mut residual = sys.residual(&state, params.beta)?;
    sys.record(&mut rec, &state, residual, params.beta)?;
    let mut next_sample = t + params.sample_interval;
    if residual <= params.tol {
        rec.converged = true;
        return Ok(rec);
    }

    while t < t_end - 1e-12 * params.dt {
        let h = params.dt.min(t_end - t);
        let drift = sys.step(h)?;
        rec.max_mass_drift = rec.max_mass_drift.max(drift);
        rec.steps += 1;
        t += h;

        let at_end = t >= t_end - 1e-12 * params.dt;
        let sample_due = t >= next_sample - 1e-9 * params.dt;
        if rec.steps % CHECK_EVERY == 0 || sample_due || at_end {
            state = sys.state(t)?;
            residual = sys.residual(&state, params.beta)?;
            let done = residual <= params.tol;
            if sample_due || at_end || done {
                sys.record(&mut rec, &state, residual, params.beta)?;
                while next_sample <= t + 1e-9 * params.dt {
                    next_sample += params.sample_interval;
                }
            }
            if done {
                rec.converged = true;
                break;
            }
        }
    }
    Ok(rec)
}

/// Log-space representation of both agents.
struct LogSystem<'k> {
    kernel: &'k PayoffKernel,
    temperature: f64,
    u: [Vec<f64>; 2],
    support: [Vec<bool>; 2],
    frozen: Option<Agent>,
    /// Exact initial density of the frozen agent, reported unchanged.
    held: Option<Density>,
}

impl<'k> LogSystem<'k> {
    fn new(kernel: &'k PayoffKernel, temperature: f64, init: [&Density; 2], frozen: Option<Agent>) -> Self {
        let logs = |d: &Density| -> (Vec<f64>, Vec<bool>) {
            let support: Vec<bool> = d.values().iter().map(|p| *p > 0.0).collect();
            let u = d
                .values()
                .iter()
                .map(|p| if *p > 0.0 { p.ln().max(LOG_FLOOR) } else { f64::NEG_INFINITY })
                .collect();
            (u, support)
        };
        let (u1, s1) = logs(init[0]);
        let (u2, s2) = logs(init[1]);
        Self {
            kernel,
            temperature,
            u: [u1, u2],
            support: [s1, s2],
            frozen,
            held: frozen.map(|a| init[a.index()].clone()),
        }
    }

    fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    /// Normalized node densities for log-densities `u`.
    fn densities(&self, u: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let grid = self.grid();
        let one = |u: &[f64]| -> Vec<f64> {
            let top = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = u.iter().map(|v| (v - top).exp()).collect();
            let mass = grid::weighted_sum(grid, &e);
            e.into_iter().map(|v| v / mass).collect()
        };
        [one(&u[0]), one(&u[1])]
    }

    /// Time derivative of both log-densities.
    fn derivative(&self, u: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let p = self.densities(u);
        let r = [
            reward_against(self.kernel, &p[1], Agent::One),
            reward_against(self.kernel, &p[0], Agent::Two),
        ];
        let grid = self.grid();
        let mut out = [Vec::new(), Vec::new()];
        for a in 0..2 {
            let m = u[a].len();
            if self.frozen.map(Agent::index) == Some(a) {
                out[a] = vec![0.0; m];
                continue;
            }
            let mut mean_r = 0.0;
            let mut mean_u = 0.0;
            for i in 0..m {
                if self.support[a][i] {
                    let w = grid.weight(i) * p[a][i];
                    mean_r += w * r[a][i];
                    mean_u += w * u[a][i];
                }
            }
            out[a] = (0..m)
                .map(|i| {
                    if self.support[a][i] {
                        (r[a][i] - mean_r) - self.temperature * (u[a][i] - mean_u)
                    } else {
                        0.0
                    }
                })
                .collect();
        }
        out
    }

    fn offset(&self, base: &[Vec<f64>; 2], k: &[Vec<f64>; 2], h: f64) -> [Vec<f64>; 2] {
        let shift = |b: &[f64], k: &[f64]| -> Vec<f64> { b.iter().zip(k).map(|(b, k)| b + h * k).collect() };
        [shift(&base[0], &k[0]), shift(&base[1], &k[1])]
    }

    /// One RK4 step; returns the mass drift before renormalization.
    fn step(&mut self, h: f64) -> Result<f64> {
        let k1 = self.derivative(&self.u);
        let k2 = self.derivative(&self.offset(&self.u, &k1, 0.5 * h));
        let k3 = self.derivative(&self.offset(&self.u, &k2, 0.5 * h));
        let k4 = self.derivative(&self.offset(&self.u, &k3, h));

        let grid = *self.grid();
        let mut drift: f64 = 0.0;
        for a in 0..2 {
            let mut largest: f64 = 0.0;
            for i in 0..self.u[a].len() {
                if !self.support[a][i] {
                    continue;
                }
                let du = h / 6.0 * (k1[a][i] + 2.0 * k2[a][i] + 2.0 * k3[a][i] + k4[a][i]);
                largest = largest.max(du.abs());
                self.u[a][i] += du;
            }
            if !largest.is_finite() || largest > MAX_LOG_STEP {
                return Err(Error::Integration(format!(
                    "log-density changed by {largest:e} in one step; use a smaller dt"
                )));
            }
            let mass: f64 = self.u[a]
                .iter()
                .enumerate()
                .map(|(i, u)| grid.weight(i) * u.exp())
                .sum();
            if !(mass.is_finite() && mass > 0.0) {
                return Err(Error::Integration(format!(
                    "density mass became {mass}; use a smaller dt"
                )));
            }
            drift = drift.max((mass - 1.0).abs());
            let shift = mass.ln();
            for (u, s) in self.u[a].iter_mut().zip(&self.support[a]) {
                if *s {
                    *u = (*u - shift).max(LOG_FLOOR);
                }
            }
        }
        Ok(drift)
    }

    fn state(&self, t: f64) -> Result<ReplicatorState> {
        let grid = *self.grid();
        let [p1, p2] = self.densities(&self.u);
        let mut p = [grid::normalize(&grid, p1)?, grid::normalize(&grid, p2)?];
        if let (Some(agent), Some(held)) = (self.frozen, &self.held) {
            p[agent.index()] = held.clone();
        }
        let [p1, p2] = p;
        Ok(ReplicatorState { t, p1, p2 })
    }

    fn residual(&self, state: &ReplicatorState, beta: f64) -> Result<f64> {
        let [a, b] = replicator_rhs(state, self.kernel, beta)?;
        let mut res = [grid::sup_norm(&a), grid::sup_norm(&b)];
        if let Some(agent) = self.frozen {
            res[agent.index()] = 0.0;
        }
        Ok(res[0].max(res[1]))
    }

    fn record(&self, rec: &mut TrajectoryRecord, state: &ReplicatorState, residual: f64, beta: f64) -> Result<()> {
        let r1 = reward_against(self.kernel, state.p2.values(), Agent::One);
        let r2 = reward_against(self.kernel, state.p1.values(), Agent::Two);
        rec.free_energy.push([
            grid::free_energy(&state.p1, &r1, beta)?,
            grid::free_energy(&state.p2, &r2, beta)?,
        ]);
        rec.times.push(state.t);
        rec.p1.push(state.p1.clone());
        rec.p2.push(state.p2.clone());
        rec.residual.push(residual);
        Ok(())
    }
}

/// Named initial density pairs used to reach coexisting steady-state branches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitProfile {
    Uniform,
    /// Both agents tilted toward 0.
    LeftTilt,
    /// Both agents tilted toward 1.
    RightTilt,
    /// Agent 1 tilted toward 0, agent 2 toward 1.
    Asymmetric,
}

impl InitProfile {
    pub const DEFAULT_TILT: f64 = 3.0;
    pub const ALL: [InitProfile; 4] = [
        InitProfile::Uniform,
        InitProfile::LeftTilt,
        InitProfile::RightTilt,
        InitProfile::Asymmetric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitProfile::Uniform => "uniform",
            InitProfile::LeftTilt => "left-tilt",
            InitProfile::RightTilt => "right-tilt",
            InitProfile::Asymmetric => "asymmetric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Exponential-tilt densities `∝ exp(±tilt · x)` for both agents.
    pub fn densities(self, grid: Grid, tilt: f64) -> (Density, Density) {
        let (k1, k2) = match self {
            InitProfile::Uniform => (0.0, 0.0),
            InitProfile::LeftTilt => (-tilt, -tilt),
            InitProfile::RightTilt => (tilt, tilt),
            InitProfile::Asymmetric => (-tilt, tilt),
        };
        (Density::exp_tilt(grid, k1), Density::exp_tilt(grid, k2))
    }

    pub fn state(self, grid: Grid, tilt: f64) -> ReplicatorState {
        let (p1, p2) = self.densities(grid, tilt);
        ReplicatorState { t: 0.0, p1, p2 }
    }
}
