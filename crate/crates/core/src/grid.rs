//! Uniform grids on the action interval [0,1] and the strategy densities that
//! live on them.
//!
//! Densities are stored as node values of the density function, not as cell
//! masses. Every integral in the crate goes through [`integrate`], so the
//! quadrature rule carried by the [`Grid`] decides how the functional
//! equations are discretized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance enforced by [`Density::new`].
pub const NORM_TOL: f64 = 1e-9;

/// Composite quadrature rule used by a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    /// Composite trapezoid, any node count.
    Trapezoid,
    /// Composite Simpson, odd node count only.
    Simpson,
}

impl Quadrature {
    pub fn name(self) -> &'static str {
        match self {
            Quadrature::Trapezoid => "trapezoid",
            Quadrature::Simpson => "simpson",
        }
    }
}

/// `m` equally spaced nodes covering [0,1], endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    m: usize,
    rule: Quadrature,
}

impl Grid {
    pub const DEFAULT_SIZE: usize = 201;

    /// Simpson grid. `m` must be odd and at least 3.
    pub fn new(m: usize) -> Result<Self> {
        Self::with_rule(m, Quadrature::Simpson)
    }

    pub fn with_rule(m: usize, rule: Quadrature) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {m}")));
        }
        if rule == Quadrature::Simpson && m % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "Simpson quadrature needs an odd node count, got {m}"
            )));
        }
        Ok(Self { m, rule })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn rule(&self) -> Quadrature {
        self.rule
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / (self.m - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / (self.m - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.node(i)).collect()
    }

    /// Quadrature weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        let end = i == 0 || i == self.m - 1;
        match self.rule {
            Quadrature::Trapezoid => {
                if end {
                    0.5 * h
                } else {
                    h
                }
            }
            Quadrature::Simpson => {
                let k = if end {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                k * h / 3.0
            }
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.weight(i)).collect()
    }

    /// Trapezoid cell weights (h/2 at the ends, h inside), independent of the
    /// integration rule. Used for sampling and for cumulative distributions.
    pub fn cell_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.m)
            .map(|i| if i == 0 || i == self.m - 1 { 0.5 * h } else { h })
            .collect()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                actual: n,
            });
        }
        Ok(())
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(self.m, other.m));
        }
        Ok(())
    }
}

/// Integral over [0,1] of a node-wise function.
pub fn integrate(grid: &Grid, values: &[f64]) -> Result<f64> {
    grid.check_len(values.len())?;
    Ok(weighted_sum(grid, values))
}

#[inline]
pub(crate) fn weighted_sum(grid: &Grid, values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| grid.weight(i) * v)
        .sum()
}

/// A nonnegative, normalized strategy density on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    grid: Grid,
    values: Vec<f64>,
}

impl Density {
    /// Wraps node values that are already a density.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::DegenerateDensity(format!(
                "value {v} at node {i} is negative or not finite"
            )));
        }
        let mass = weighted_sum(&grid, &values);
        if (mass - 1.0).abs() > NORM_TOL {
            return Err(Error::DegenerateDensity(format!(
                "mass {mass} differs from 1 by more than {NORM_TOL}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn uniform(grid: Grid) -> Self {
        let mass: f64 = grid.weights().iter().sum();
        Self {
            grid,
            values: vec![1.0 / mass; grid.len()],
        }
    }

    /// Density proportional to `exp(exponent)`; the exponent is shifted by its
    /// maximum before exponentiation. Entries equal to `-inf` give zero density.
    pub fn from_exponent(grid: Grid, exponent: &[f64]) -> Result<Self> {
        grid.check_len(exponent.len())?;
        if exponent.iter().any(|e| e.is_nan() || *e == f64::INFINITY) {
            return Err(Error::Kernel("exponent contains NaN or +inf".into()));
        }
        let top = exponent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::DegenerateDensity("every node has zero weight".into()));
        }
        let values = exponent.iter().map(|e| (e - top).exp()).collect();
        normalize(&grid, values)
    }

    /// Gibbs density proportional to `exp(beta * reward)`.
    pub fn gibbs(grid: Grid, reward: &[f64], beta: f64) -> Result<Self> {
        let exponent: Vec<f64> = reward.iter().map(|r| beta * r).collect();
        Self::from_exponent(grid, &exponent)
    }

    /// Exponential tilt proportional to `exp(kappa * x)`; `kappa = 0` is uniform.
    pub fn exp_tilt(grid: Grid, kappa: f64) -> Self {
        let exponent: Vec<f64> = grid.nodes().iter().map(|x| kappa * x).collect();
        Self::from_exponent(grid, &exponent).expect("finite tilt exponent")
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫ f(x) p(x) dx` for a node-wise `f`.
    pub fn expect(&self, f: &[f64]) -> Result<f64> {
        self.grid.check_len(f.len())?;
        Ok(self
            .values
            .iter()
            .zip(f)
            .enumerate()
            .map(|(i, (p, v))| self.grid.weight(i) * p * v)
            .sum())
    }

    pub fn mean(&self) -> f64 {
        self.expect(&self.grid.nodes()).expect("same grid")
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let sq: Vec<f64> = self.grid.nodes().iter().map(|x| (x - mean).powi(2)).collect();
        self.expect(&sq).expect("same grid")
    }

    /// Cumulative distribution at the nodes, built from trapezoid panels and
    /// scaled to end exactly at 1.
    pub fn cdf(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for pair in self.values.windows(2) {
            acc += 0.5 * h * (pair[0] + pair[1]);
            out.push(acc);
        }
        let total = acc;
        if total > 0.0 {
            out.iter_mut().for_each(|c| *c /= total);
        }
        out
    }

    /// Sup-norm distance between the node values of two densities.
    pub fn sup_distance(&self, other: &Density) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(sup_diff(&self.values, &other.values))
    }
}

/// Rescales nonnegative node values to unit mass.
pub fn normalize(grid: &Grid, values: Vec<f64>) -> Result<Density> {
    grid.check_len(values.len())?;
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::DegenerateDensity(
            "values must be finite and nonnegative".into(),
        ));
    }
    let mass = weighted_sum(grid, &values);
    if mass <= 0.0 || !mass.is_finite() {
        return Err(Error::DegenerateDensity(format!(
            "cannot normalize mass {mass}"
        )));
    }
    let scale = 1.0 / mass;
    Ok(Density {
        grid: *grid,
        values: values.into_iter().map(|v| v * scale).collect(),
    })
}

/// Differential entropy `-∫ p ln p dx`, with `0 ln 0 = 0`.
pub fn entropy(d: &Density) -> f64 {
    d.values
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(i, p)| -d.grid.weight(i) * p * p.ln())
        .sum()
}

/// `F[p] = ∫ r p dx + entropy(p) / beta`.
///
/// The Gibbs density proportional to `exp(beta r)` is the unique maximizer of
/// `F` over normalized densities on the same grid.
pub fn free_energy(d: &Density, reward: &[f64], beta: f64) -> Result<f64> {
    Ok(d.expect(reward)? + entropy(d) / beta)
}

/// Kolmogorov-Smirnov distance between two densities on the same grid.
pub fn ks_distance(a: &Density, b: &Density) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    Ok(sup_diff(&a.cdf(), &b.cdf()))
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn sup_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Learning and integration controls shared by the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    /// Inverse temperature.
    pub beta: f64,
    /// Learning-rate time scale; absorbed into the time unit `alpha * t`.
    pub alpha: f64,
    /// Integrator step in units of `alpha * t`.
    pub dt: f64,
    /// Integration horizon in units of `alpha * t`.
    pub t_max: f64,
    /// Convergence tolerance on the sup-norm of the replicator right-hand side.
    pub tol: f64,
    /// Time between recorded snapshots.
    pub sample_interval: f64,
}

impl LearningParams {
    pub const DEFAULT_DT: f64 = 0.05;
    pub const DEFAULT_T_MAX: f64 = 200.0;
    pub const DEFAULT_TOL: f64 = 1e-8;

    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            alpha: 1.0,
            dt: Self::DEFAULT_DT,
            t_max: Self::DEFAULT_T_MAX,
            tol: Self::DEFAULT_TOL,
            sample_interval: 1.0,
        }
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        positive("alpha", self.alpha)?;
        positive("dt", self.dt)?;
        positive("tol", self.tol)?;
        positive("sample_interval", self.sample_interval)?;
        if !self.t_max.is_finite() || self.t_max < 0.0 {
            return Err(Error::param("t_max", "must be finite and >= 0"));
        }
        Ok(())
    }
}

pub(crate) fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be finite and > 0, got {v}")))
    }
}
