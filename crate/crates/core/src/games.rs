//! Two-player continuous-action games on [0,1]² and their payoff tables on a
//! grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `(a₁xy + b₁x, a₂xy + b₂y)`.
#[inline]
pub fn payoff_bilinear(x: f64, y: f64, a1: f64, b1: f64, a2: f64, b2: f64) -> (f64, f64) {
    (a1 * x * y + b1 * x, a2 * x * y + b2 * y)
}

/// Coordination game `(-(x+y-2a₁)², -(x+y-2a₂)²)`.
#[inline]
pub fn payoff_quadratic(x: f64, y: f64, a1: f64, a2: f64) -> (f64, f64) {
    let s = x + y;
    (-(s - 2.0 * a1).powi(2), -(s - 2.0 * a2).powi(2))
}

/// Political advertisement: vote share minus expenditure. The share is 1/2
/// for both parties when neither spends.
#[inline]
pub fn payoff_polad(x: f64, y: f64) -> (f64, f64) {
    let s = x + y;
    if s > 0.0 {
        (x / s - x, y / s - y)
    } else {
        (0.5 - x, 0.5 - y)
    }
}

/// Investment race: the higher investment wins a market of unit value, ties
/// split it, both pay their own investment.
#[inline]
pub fn payoff_investment(x: f64, y: f64) -> (f64, f64) {
    if x > y {
        (1.0 - x, -y)
    } else if x < y {
        (-x, 1.0 - y)
    } else {
        (0.5 - x, 0.5 - y)
    }
}

/// A game from the catalog, or payoff tables supplied on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GameSpec {
    Bilinear { a1: f64, b1: f64, a2: f64, b2: f64 },
    Quadratic { a1: f64, a2: f64 },
    #[serde(rename = "polad", alias = "political-ad", alias = "politicalad")]
    PoliticalAd,
    Investment,
    /// Row-major `m × m` tables, `k1[i*m + j] = f₁(xᵢ, yⱼ)`.
    Tabulated { m: usize, k1: Vec<f64>, k2: Vec<f64> },
}

impl GameSpec {
    /// Symmetric bilinear game `a xy + b x`.
    pub fn bilinear(a: f64, b: f64) -> Self {
        GameSpec::Bilinear { a1: a, b1: b, a2: a, b2: b }
    }

    pub fn quadratic(a1: f64, a2: f64) -> Self {
        GameSpec::Quadratic { a1, a2 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GameSpec::Bilinear { .. } => "bilinear",
            GameSpec::Quadratic { .. } => "quadratic",
            GameSpec::PoliticalAd => "polad",
            GameSpec::Investment => "investment",
            GameSpec::Tabulated { .. } => "tabulated",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GameSpec::Bilinear { a1, b1, a2, b2 } => {
                finite("a1", a1)?;
                finite("b1", b1)?;
                finite("a2", a2)?;
                finite("b2", b2)
            }
            GameSpec::Quadratic { a1, a2 } => {
                unit_open("a1", a1)?;
                unit_open("a2", a2)
            }
            GameSpec::PoliticalAd | GameSpec::Investment => Ok(()),
            GameSpec::Tabulated { m, ref k1, ref k2 } => {
                if k1.len() != m * m || k2.len() != m * m {
                    return Err(Error::param("payoff", format!("tables must hold {m}x{m} entries")));
                }
                if k1.iter().chain(k2).any(|v| !v.is_finite()) {
                    return Err(Error::Kernel("payoff table has non-finite entries".into()));
                }
                Ok(())
            }
        }
    }

    /// Closed-form payoff, `None` for tabulated games.
    pub fn payoff(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        match *self {
            GameSpec::Bilinear { a1, b1, a2, b2 } => Some(payoff_bilinear(x, y, a1, b1, a2, b2)),
            GameSpec::Quadratic { a1, a2 } => Some(payoff_quadratic(x, y, a1, a2)),
            GameSpec::PoliticalAd => Some(payoff_polad(x, y)),
            GameSpec::Investment => Some(payoff_investment(x, y)),
            GameSpec::Tabulated { .. } => None,
        }
    }

    /// Whether `f₂(x, y) = f₁(y, x)` holds by construction.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            GameSpec::Bilinear { a1, b1, a2, b2 } => a1 == a2 && b1 == b2,
            GameSpec::Quadratic { a1, a2 } => a1 == a2,
            GameSpec::PoliticalAd | GameSpec::Investment => true,
            GameSpec::Tabulated { .. } => false,
        }
    }
}

fn finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, "must be finite"))
    }
}

fn unit_open(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(field, format!("must lie in (0, 1), got {v}")))
    }
}

/// Payoff tables of a game on a grid.
///
/// `k1[i][j] = f₁(xᵢ, yⱼ)` and `k2[i][j] = f₂(xᵢ, yⱼ)` where `i` indexes
/// agent 1's action and `j` agent 2's. Games whose payoff jumps across the
/// diagonal carry one-sided limits for the two corner nodes: there the
/// quadrature panel lies on one side of the tie only, so the tie value is
/// replaced by the limit from inside the interval when integrating.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffKernel {
    grid: Grid,
    k1: Vec<f64>,
    k2: Vec<f64>,
    corners: Option<CornerLimits>,
}

/// Quadrature values at `(0,0)` and `(1,1)`, indexed `[agent][corner]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct CornerLimits(pub(crate) [[f64; 2]; 2]);

impl PayoffKernel {
    pub fn from_tables(grid: Grid, k1: Vec<f64>, k2: Vec<f64>) -> Result<Self> {
        let m = grid.len();
        if k1.len() != m * m || k2.len() != m * m {
            return Err(Error::Dimension {
                expected: m * m,
                actual: k1.len().min(k2.len()),
            });
        }
        if k1.iter().chain(&k2).any(|v| !v.is_finite()) {
            return Err(Error::Kernel("payoff table has non-finite entries".into()));
        }
        Ok(Self {
            grid,
            k1,
            k2,
            corners: None,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn k1(&self, i: usize, j: usize) -> f64 {
        self.k1[i * self.grid.len() + j]
    }

    #[inline]
    pub fn k2(&self, i: usize, j: usize) -> f64 {
        self.k2[i * self.grid.len() + j]
    }

    /// Row-major table for agent 1.
    pub fn table1(&self) -> &[f64] {
        &self.k1
    }

    /// Row-major table for agent 2.
    pub fn table2(&self) -> &[f64] {
        &self.k2
    }

    pub fn max_abs(&self) -> f64 {
        self.k1
            .iter()
            .chain(&self.k2)
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn corners(&self) -> Option<&CornerLimits> {
        self.corners.as_ref()
    }
}

/// Evaluates a game on every node pair of `grid`.
pub fn tabulate(game: &GameSpec, grid: Grid) -> Result<PayoffKernel> {
    game.validate()?;
    let m = grid.len();
    if let GameSpec::Tabulated { m: tm, k1, k2 } = game {
        if *tm != m {
            return Err(Error::GridMismatch(*tm, m));
        }
        return PayoffKernel::from_tables(grid, k1.clone(), k2.clone());
    }
    let nodes = grid.nodes();
    let mut k1 = Vec::with_capacity(m * m);
    let mut k2 = Vec::with_capacity(m * m);
    for &x in &nodes {
        for &y in &nodes {
            let (f1, f2) = game.payoff(x, y).expect("closed-form game");
            k1.push(f1);
            k2.push(f2);
        }
    }
    let mut kernel = PayoffKernel::from_tables(grid, k1, k2)?;
    if let GameSpec::Investment = game {
        // At x = y = 0 the opponent's panel lies above the tie (x < y branch);
        // at x = y = 1 it lies below (x > y branch).
        let low = payoff_investment(0.0, f64::MIN_POSITIVE);
        let high = payoff_investment(1.0, 1.0 - f64::EPSILON);
        // Agent 2 integrates over x, so its limits come from the mirrored pairs.
        let low2 = payoff_investment(f64::MIN_POSITIVE, 0.0);
        let high2 = payoff_investment(1.0 - f64::EPSILON, 1.0);
        kernel.corners = Some(CornerLimits([
            [low.0, high.0],
            [low2.1, high2.1],
        ]));
    }
    Ok(kernel)
}
