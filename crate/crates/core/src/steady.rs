//! Direct solution of the Gibbs steady-state system
//! `P₁ ∝ exp(β r₁[P₂])`, `P₂ ∝ exp(β r₂[P₁])` by damped fixed-point iteration.

use serde::{Deserialize, Serialize};

use crate::analytic::{ExponentialFamilyFit, TruncatedGaussianFit};
use crate::dynamics::{reward_against, Agent};
use crate::error::{Error, Result};
use crate::games::{GameSpec, PayoffKernel};
use crate::grid::{self, Density};

/// Applies the Gibbs map to both agents.
pub fn gibbs_map(p1: &Density, p2: &Density, kernel: &PayoffKernel, beta: f64) -> Result<(Density, Density)> {
    grid::positive("beta", beta)?;
    kernel.grid().check_same(p1.grid())?;
    kernel.grid().check_same(p2.grid())?;
    Ok((
        gibbs_one(kernel, p2.values(), Agent::One, beta)?,
        gibbs_one(kernel, p1.values(), Agent::Two, beta)?,
    ))
}

fn gibbs_one(kernel: &PayoffKernel, opponent: &[f64], agent: Agent, beta: f64) -> Result<Density> {
    let r = reward_against(kernel, opponent, agent);
    if let Some(i) = r.iter().position(|v| !v.is_finite()) {
        return Err(Error::Kernel(format!(
            "average reward of agent {} is {} at node {i}",
            agent.index() + 1,
            r[i]
        )));
    }
    Density::gibbs(*kernel.grid(), &r, beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    /// Initial mixing weight of the Gibbs image, in `(0, 1]`.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

impl SteadyOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param("damping", format!("must lie in (0, 1], got {}", self.damping)));
        }
        grid::positive("tol", self.tol)?;
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Parametric description of a steady state, when the game has one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ParametricFit {
    Exponential(ExponentialFamilyFit),
    TruncatedGaussian(TruncatedGaussianFit),
}

#[derive(Clone, Debug)]
pub struct SteadyStateResult {
    pub p1: Density,
    pub p2: Density,
    /// `sup |P - GibbsMap(P)|` over both agents at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Damping in effect when the iteration stopped.
    pub damping: f64,
    pub fit: Option<ParametricFit>,
}

impl SteadyStateResult {
    /// Fills `fit` by least squares for the bilinear and quadratic families.
    pub fn attach_fit(&mut self, game: &GameSpec, beta: f64) {
        self.fit = match game {
            GameSpec::Bilinear { .. } => Some(ParametricFit::Exponential(ExponentialFamilyFit {
                gamma1: fit_exponential_slope(&self.p1),
                gamma2: fit_exponential_slope(&self.p2),
            })),
            GameSpec::Quadratic { .. } => TruncatedGaussianFit::new(
                fit_gaussian_center(&self.p1, beta),
                fit_gaussian_center(&self.p2, beta),
                beta,
            )
            .ok()
            .map(ParametricFit::TruncatedGaussian),
            _ => None,
        };
    }
}

/// Smallest damping the backoff will reach.
const MIN_DAMPING: f64 = 1e-6;
/// Minimum iterations without progress before the damping is halved.
const STALL_LIMIT: usize = 100;
/// Residual growth over the best seen that triggers a restart from the best.
const BLOWUP_FACTOR: f64 = 10.0;

/// Damped Picard iteration `p ← (1-d) p + d G(p)` on both agents.
///
/// Stops once `sup |G(p) - p| <= tol`. The residual is not monotone along
/// the iteration, so `d` adapts: it halves when the residual has not
/// improved for `max(100, 2/d)` iterations, and halves with a restart from
/// the best iterate when the residual exceeds ten times the best seen. This
/// breaks the two-cycles that plain iteration falls into when the game has
/// period-2 attractors. Non-convergence is reported in the result, not as an
/// error.
pub fn solve_steady(
    kernel: &PayoffKernel,
    beta: f64,
    init: (Density, Density),
    opts: &SteadyOptions,
) -> Result<SteadyStateResult> {
    opts.validate()?;
    grid::positive("beta", beta)?;
    let g = *kernel.grid();
    let (mut p1, mut p2) = init;
    g.check_same(p1.grid())?;
    g.check_same(p2.grid())?;

    let mut d = opts.damping;
    let mut best = (p1.clone(), p2.clone(), f64::INFINITY);
    // Best residual since the last change of `d`.
    let mut window_best = f64::INFINITY;
    let mut stall = 0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    while iterations < opts.max_iter {
        let (g1, g2) = gibbs_map(&p1, &p2, kernel, beta)?;
        residual = grid::sup_diff(g1.values(), p1.values()).max(grid::sup_diff(g2.values(), p2.values()));
        if residual <= opts.tol {
            break;
        }
        iterations += 1;

        if residual < best.2 {
            best = (p1.clone(), p2.clone(), residual);
        }
        if residual < window_best {
            window_best = residual;
            stall = 0;
        } else {
            stall += 1;
        }
        if d > MIN_DAMPING {
            if residual > BLOWUP_FACTOR * best.2 {
                d = (0.5 * d).max(MIN_DAMPING);
                p1 = best.0.clone();
                p2 = best.1.clone();
                window_best = f64::INFINITY;
                stall = 0;
                continue;
            }
            if stall as f64 >= (STALL_LIMIT as f64).max(2.0 / d) {
                d = (0.5 * d).max(MIN_DAMPING);
                window_best = residual;
                stall = 0;
            }
        }
        p1 = mix(&p1, &g1, d)?;
        p2 = mix(&p2, &g2, d)?;
    }

    if residual > opts.tol && best.2 < residual {
        // Report the best iterate seen, not the last one.
        p1 = best.0;
        p2 = best.1;
        residual = best.2;
    }
    Ok(SteadyStateResult {
        p1,
        p2,
        residual,
        iterations,
        converged: residual <= opts.tol,
        damping: d,
        fit: None,
    })
}

fn mix(p: &Density, q: &Density, d: f64) -> Result<Density> {
    let values = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(a, b)| (1.0 - d) * a + d * b)
        .collect();
    grid::normalize(p.grid(), values)
}

/// Least-squares slope of `ln p` against `x`: the `γ` of `p ∝ exp(γx)`.
pub fn fit_exponential_slope(d: &Density) -> f64 {
    let (slope, _) = log_regression(d, |_| 0.0);
    slope
}

/// Least-squares center `z` of `p ∝ exp(-β (x - z)²)`.
pub fn fit_gaussian_center(d: &Density, beta: f64) -> f64 {
    // ln p + βx² = const + 2βz·x
    let (slope, _) = log_regression(d, |x| beta * x * x);
    slope / (2.0 * beta)
}

/// Ordinary least squares of `ln p(x) + shift(x)` on `x` over positive nodes.
fn log_regression(d: &Density, shift: impl Fn(f64) -> f64) -> (f64, f64) {
    let grid = d.grid();
    let pts: Vec<(f64, f64)> = d
        .values()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(i, p)| {
            let x = grid.node(i);
            (x, p.ln() + shift(x))
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
