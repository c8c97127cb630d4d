//! Closed-form reductions for the bilinear and quadratic games.
//!
//! Bilinear steady states are exponential tilts `P ∝ exp(γx)`, so the Gibbs
//! system reduces to scalar equations in `γ` built from
//! `g(γ) = b + a [1/(1 - e^{-γ}) - 1/γ]`, the opponent-mean response.
//! Quadratic steady states are truncated Gaussians
//! `c(z) exp(-β (x - z)²)` whose centers solve `x₀ = 2a₁ - μ(y₀)`,
//! `y₀ = 2a₂ - μ(x₀)`, with `μ` the truncated mean.

use serde::{Deserialize, Serialize};
use libm::{erf, erfc};

use crate::error::{Error, Result};
use crate::grid::{self, Density, Grid};

/// Below this `|γ|` the bracket of `g` is evaluated by its Taylor series.
const SERIES_SWITCH: f64 = 1e-3;

/// Panels used by dense sign-change scans.
pub const SCAN_PANELS: usize = 4096;

/// Residual required of every reported symmetric root.
pub const ROOT_TOL: f64 = 1e-12;

/// `1/(1 - e^{-γ}) - 1/γ`, the mean of `∝ exp(γx)` on `[0, 1]`.
fn tilt_mean(gamma: f64) -> f64 {
    if gamma.abs() < SERIES_SWITCH {
        let g2 = gamma * gamma;
        0.5 + gamma * (1.0 / 12.0 + g2 * (-1.0 / 720.0 + g2 / 30240.0))
    } else {
        1.0 / -(-gamma).exp_m1() - 1.0 / gamma
    }
}

/// Opponent-mean response `b + a·mean(exp(γx))`.
pub fn g(gamma: f64, a: f64, b: f64) -> f64 {
    b + a * tilt_mean(gamma)
}

fn scan_extent(a: f64, b: f64, beta: f64) -> f64 {
    beta * (a.abs() + b.abs() + 1.0)
}

/// All roots of `γ/β = g(γ)`, ascending.
pub fn solve_symmetric_gamma(a: f64, b: f64, beta: f64) -> Result<Vec<f64>> {
    solve_symmetric_gamma_with_panels(a, b, beta, SCAN_PANELS)
}

pub fn solve_symmetric_gamma_with_panels(a: f64, b: f64, beta: f64, panels: usize) -> Result<Vec<f64>> {
    grid::positive("beta", beta)?;
    finite("a", a)?;
    finite("b", b)?;
    if panels < 2 {
        return Err(Error::param("panels", "must be at least 2"));
    }
    let extent = scan_extent(a, b, beta);
    let h = |gamma: f64| gamma / beta - g(gamma, a, b);
    Ok(scan_roots(h, -extent, extent, panels))
}

/// Dense sign-change scan plus bisection. A node where `f` is exactly zero is
/// reported once.
fn scan_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> Vec<f64> {
    let node = |k: usize| {
        if k == panels {
            hi
        } else {
            lo + (hi - lo) * (k as f64 / panels as f64)
        }
    };
    let mut roots = Vec::new();
    let mut x0 = node(0);
    let mut f0 = f(x0);
    if f0 == 0.0 {
        roots.push(x0);
    }
    for k in 1..=panels {
        let x1 = node(k);
        let f1 = f(x1);
        if f1 == 0.0 {
            roots.push(x1);
        } else if f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            roots.push(bisect(&f, x0, x1, f0));
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Bisects to adjacent doubles; `f(lo)` and `f(hi)` have opposite signs.
fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if f(hi).abs() < flo.abs() {
        hi
    } else {
        lo
    }
}

/// Smallest `β` in `[lo, hi]` at which `γ/β = g(γ)` has three roots, located
/// by bisection to width `tol`. `None` unless `lo` has one root and `hi` three.
pub fn critical_beta_multistable(a: f64, b: f64, lo: f64, hi: f64, tol: f64, panels: usize) -> Result<Option<f64>> {
    let count = |beta: f64| solve_symmetric_gamma_with_panels(a, b, beta, panels).map(|r| r.len());
    grid::positive("tol", tol)?;
    if count(lo)? >= 3 || count(hi)? < 3 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if count(mid)? >= 3 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Iteration cap when following the twice-composed map.
const PERIOD2_MAX_ITER: usize = 100_000;
/// Starts in the lattice for the twice-composed map.
const PERIOD2_STARTS: usize = 17;
/// Minimum separation of a genuine two-cycle.
pub const PERIOD2_MIN_GAP: f64 = 1e-8;

/// Period-2 attractor `(γ₁, γ₂)` of `z ↦ β g(z)`, ordered `γ₁ < γ₂`, with
/// `γ₁ = β g(γ₂)` and `γ₂ = β g(γ₁)`.
///
/// Follows the twice-composed map from a lattice of starts spanning the
/// range of `β g`, then polishes the limit by bracketing and bisection.
pub fn find_period2(a: f64, b: f64, beta: f64) -> Result<Option<(f64, f64)>> {
    grid::positive("beta", beta)?;
    finite("a", a)?;
    finite("b", b)?;
    let map = |z: f64| beta * g(z, a, b);
    let twice = |z: f64| map(map(z));
    let excess = |z: f64| twice(z) - z;

    let lo = beta * b.min(a + b);
    let hi = beta * b.max(a + b);
    let mut best: Option<(f64, f64)> = None;
    for k in 0..PERIOD2_STARTS {
        let mut z = lo + (hi - lo) * k as f64 / (PERIOD2_STARTS - 1) as f64;
        for _ in 0..PERIOD2_MAX_ITER {
            let next = twice(z);
            let done = (next - z).abs() <= 1e-12 * (1.0 + z.abs());
            z = next;
            if done {
                break;
            }
        }
        let z = polish(&excess, z);
        let partner = map(z);
        if (z - partner).abs() <= PERIOD2_MIN_GAP {
            continue;
        }
        let pair = (z.min(partner), z.max(partner));
        let gap = pair.1 - pair.0;
        if best.map_or(true, |b| gap > b.1 - b.0) {
            best = Some(pair);
        }
    }
    Ok(best)
}

/// Nearest sign change of `f` around `z`, refined by bisection.
fn polish(f: &impl Fn(f64) -> f64, z: f64) -> f64 {
    let fz = f(z);
    if fz == 0.0 || !fz.is_finite() {
        return z;
    }
    let mut step = fz.abs().max(f64::EPSILON * (1.0 + z.abs()));
    for _ in 0..80 {
        for x in [z - step, z + step] {
            let fx = f(x);
            if (fx < 0.0) != (fz < 0.0) || fx == 0.0 {
                if fx == 0.0 {
                    return x;
                }
                let (l, h) = if x < z { (x, z) } else { (z, x) };
                return bisect(f, l, h, f(l));
            }
        }
        step *= 2.0;
    }
    z
}

/// Back-substitution residual of a two-cycle.
pub fn period2_residual(a: f64, b: f64, beta: f64, pair: (f64, f64)) -> f64 {
    let (g1, g2) = pair;
    (g1 - beta * g(g2, a, b)).abs().max((g2 - beta * g(g1, a, b)).abs())
}

/// Smallest `β` in `[lo, hi]` at which a period-2 attractor exists, to width
/// `tol`. `None` unless there is none at `lo` and one at `hi`.
pub fn critical_beta_period2(a: f64, b: f64, lo: f64, hi: f64, tol: f64) -> Result<Option<f64>> {
    grid::positive("tol", tol)?;
    if find_period2(a, b, lo)?.is_some() || find_period2(a, b, hi)?.is_none() {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if find_period2(a, b, mid)?.is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// `erf(u) + erf(v)` where `u + v > 0`, without cancellation when one is negative.
fn erf_sum(u: f64, v: f64) -> f64 {
    if u >= 0.0 && v >= 0.0 {
        erf(u) + erf(v)
    } else if u < 0.0 {
        erfc(-u) - erfc(v)
    } else {
        erfc(-v) - erfc(u)
    }
}

/// Normalizer `c(z) = 1 / ∫₀¹ exp(-β (x - z)²) dx` of a truncated Gaussian.
pub fn c_norm(z: f64, beta: f64) -> f64 {
    let s = beta.sqrt();
    2.0 * (beta / std::f64::consts::PI).sqrt() / erf_sum(s * z, s * (1.0 - z))
}

/// `μ(z) - z`, computed directly so its sign is exact.
pub fn mu_offset(z: f64, beta: f64) -> f64 {
    let upper = (-beta * (1.0 - z) * (1.0 - z)).exp();
    let lower = (-beta * z * z).exp();
    -c_norm(z, beta) * (upper - lower) / (2.0 * beta)
}

/// Mean of the truncated Gaussian `c(z) exp(-β (x - z)²)` on `[0, 1]`.
pub fn mu(z: f64, beta: f64) -> f64 {
    z + mu_offset(z, beta)
}

fn check_unit_open(field: &'static str, a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::param(field, format!("must lie in (0, 1), got {a}")))
    }
}

fn finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be finite, got {v}")))
    }
}

/// Residual required of every reported center pair.
pub const CENTER_TOL: f64 = 1e-10;

/// Residual of the center equations at `(x0, y0)`.
pub fn centers_residual(a1: f64, a2: f64, beta: f64, (x0, y0): (f64, f64)) -> f64 {
    (x0 - 2.0 * a1 + mu(y0, beta)).abs().max((y0 - 2.0 * a2 + mu(x0, beta)).abs())
}

/// Solutions of `x₀ = 2a₁ - μ(y₀)`, `y₀ = 2a₂ - μ(x₀)`, sorted by `x₀`.
///
/// Damped iteration from a lattice of starts, Newton polish, then
/// deduplication. When `a₁ = a₂` the symmetric root is added by bisection.
pub fn solve_quadratic_centers(a1: f64, a2: f64, beta: f64) -> Result<Vec<(f64, f64)>> {
    check_unit_open("a1", a1)?;
    check_unit_open("a2", a2)?;
    grid::positive("beta", beta)?;

    let residual = |p: (f64, f64)| centers_residual(a1, a2, beta, p);
    let mut found: Vec<(f64, f64)> = Vec::new();
    let push = |p: (f64, f64), found: &mut Vec<(f64, f64)>| {
        if residual(p) <= CENTER_TOL
            && !found
                .iter()
                .any(|q| (q.0 - p.0).abs() < 1e-7 && (q.1 - p.1).abs() < 1e-7)
        {
            found.push(p);
        }
    };

    if a1 == a2 {
        let h = |x: f64| x - 2.0 * a1 + mu(x, beta);
        let (lo, hi) = (2.0 * a1 - 1.0, 2.0 * a1);
        let x = match (h(lo), h(hi)) {
            (0.0, _) => lo,
            (_, 0.0) => hi,
            (f, _) => bisect(&h, lo, hi, f),
        };
        push((x, x), &mut found);
    }

    const STARTS: usize = 5;
    for i in 0..STARTS {
        for j in 0..STARTS {
            let mut x = 2.0 * a1 - 1.0 + (i as f64 + 0.5) / STARTS as f64;
            let mut y = 2.0 * a2 - 1.0 + (j as f64 + 0.5) / STARTS as f64;
            for _ in 0..5_000 {
                let nx = 0.5 * x + 0.5 * (2.0 * a1 - mu(y, beta));
                let ny = 0.5 * y + 0.5 * (2.0 * a2 - mu(x, beta));
                let step = (nx - x).abs().max((ny - y).abs());
                x = nx;
                y = ny;
                if step < 1e-13 {
                    break;
                }
            }
            let p = newton_centers(a1, a2, beta, (x, y));
            push(p, &mut found);
        }
    }
    found.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(found)
}

fn mu_slope(z: f64, beta: f64) -> f64 {
    let h = 1e-6;
    (mu(z + h, beta) - mu(z - h, beta)) / (2.0 * h)
}

fn newton_centers(a1: f64, a2: f64, beta: f64, start: (f64, f64)) -> (f64, f64) {
    let (mut x, mut y) = start;
    let mut best = (x, y);
    let mut best_res = centers_residual(a1, a2, beta, best);
    for _ in 0..50 {
        let r1 = x - 2.0 * a1 + mu(y, beta);
        let r2 = y - 2.0 * a2 + mu(x, beta);
        // Jacobian [[1, μ'(y)], [μ'(x), 1]]
        let (my, mx) = (mu_slope(y, beta), mu_slope(x, beta));
        let det = 1.0 - mx * my;
        if det.abs() < 1e-14 {
            break;
        }
        x -= (r1 - my * r2) / det;
        y -= (r2 - mx * r1) / det;
        let res = centers_residual(a1, a2, beta, (x, y));
        if !res.is_finite() {
            break;
        }
        if res < best_res {
            best = (x, y);
            best_res = res;
        }
        if res == 0.0 {
            break;
        }
    }
    best
}

/// Roots and near-root band of the constraint-line equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFamily {
    pub roots: Vec<f64>,
    /// Contiguous `x₀` interval around the main root where `|lhs - rhs| < band_tol`.
    pub plateau: (f64, f64),
    pub band_tol: f64,
}

impl ConstraintFamily {
    pub fn plateau_width(&self) -> f64 {
        self.plateau.1 - self.plateau.0
    }
}

/// Default band threshold for the near-root plateau.
pub const PLATEAU_TOL: f64 = 1e-3;

/// Roots of `x₀ = 2a - μ(2a - x₀)` over `x₀ ∈ [2a - 1, 2a]`, plus the width
/// of the near-root plateau, a diagnostic for metastability at large `β`.
pub fn solve_constraint_family(a: f64, beta: f64) -> Result<ConstraintFamily> {
    solve_constraint_family_with(a, beta, PLATEAU_TOL, SCAN_PANELS)
}

pub fn solve_constraint_family_with(a: f64, beta: f64, band_tol: f64, panels: usize) -> Result<ConstraintFamily> {
    check_unit_open("a", a)?;
    grid::positive("beta", beta)?;
    grid::positive("band_tol", band_tol)?;
    let h = |x0: f64| mu_offset(2.0 * a - x0, beta);
    let (lo, hi) = (2.0 * a - 1.0, 2.0 * a);
    let roots = scan_roots(h, lo, hi, panels);

    let xs: Vec<f64> = (0..=panels)
        .map(|k| lo + (hi - lo) * k as f64 / panels as f64)
        .collect();
    let inside: Vec<bool> = xs.iter().map(|x| h(*x).abs() < band_tol).collect();
    // Band around the root closest to the symmetric point, else the widest band.
    let anchor = roots
        .iter()
        .map(|r| ((r - lo) / (hi - lo) * panels as f64).round() as usize)
        .find(|k| inside[*k]);
    let plateau = match anchor {
        Some(k) => {
            let mut l = k;
            while l > 0 && inside[l - 1] {
                l -= 1;
            }
            let mut r = k;
            while r < panels && inside[r + 1] {
                r += 1;
            }
            (xs[l], xs[r])
        }
        None => {
            let mut best = (f64::NAN, f64::NAN);
            let mut k = 0;
            while k <= panels {
                if inside[k] {
                    let start = k;
                    while k < panels && inside[k + 1] {
                        k += 1;
                    }
                    if best.0.is_nan() || xs[k] - xs[start] > best.1 - best.0 {
                        best = (xs[start], xs[k]);
                    }
                }
                k += 1;
            }
            if best.0.is_nan() {
                (0.0, 0.0)
            } else {
                best
            }
        }
    };
    Ok(ConstraintFamily { roots, plateau, band_tol })
}

/// Exponential-tilt steady state `P₁ ∝ exp(γ₁x)`, `P₂ ∝ exp(γ₂y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFamilyFit {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl ExponentialFamilyFit {
    pub fn symmetric(gamma: f64) -> Self {
        Self { gamma1: gamma, gamma2: gamma }
    }

    /// Both densities, normalized on `grid`.
    pub fn densities(&self, grid: Grid) -> (Density, Density) {
        (Density::exp_tilt(grid, self.gamma1), Density::exp_tilt(grid, self.gamma2))
    }
}

/// Truncated-Gaussian steady state with centers `x0`, `y0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedGaussianFit {
    pub x0: f64,
    pub y0: f64,
    pub beta: f64,
    pub c_x0: f64,
    pub c_y0: f64,
}

impl TruncatedGaussianFit {
    pub fn new(x0: f64, y0: f64, beta: f64) -> Result<Self> {
        grid::positive("beta", beta)?;
        finite("x0", x0)?;
        finite("y0", y0)?;
        let fit = Self {
            x0,
            y0,
            beta,
            c_x0: c_norm(x0, beta),
            c_y0: c_norm(y0, beta),
        };
        if !(fit.c_x0.is_finite() && fit.c_y0.is_finite() && fit.c_x0 > 0.0 && fit.c_y0 > 0.0) {
            return Err(Error::DegenerateDensity(format!(
                "truncated Gaussian normalizer not representable for centers ({x0}, {y0}) at beta {beta}"
            )));
        }
        Ok(fit)
    }

    /// Closed-form node values `c(z) exp(-β (x - z)²)` for both agents.
    pub fn values(&self, grid: &Grid) -> (Vec<f64>, Vec<f64>) {
        let one = |z: f64, c: f64| -> Vec<f64> {
            grid.nodes()
                .iter()
                .map(|x| c * (-self.beta * (x - z) * (x - z)).exp())
                .collect()
        };
        (one(self.x0, self.c_x0), one(self.y0, self.c_y0))
    }

    /// Both densities, normalized on `grid`.
    pub fn densities(&self, grid: Grid) -> (Density, Density) {
        let one = |z: f64| -> Density {
            let e: Vec<f64> = grid.nodes().iter().map(|x| -self.beta * (x - z) * (x - z)).collect();
            Density::from_exponent(grid, &e).expect("finite exponent")
        };
        (one(self.x0), one(self.y0))
    }
}

/// One-parameter game families with analytic steady states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GameFamily {
    Bilinear { a: f64, b: f64 },
    Quadratic { a1: f64, a2: f64 },
}

impl GameFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GameFamily::Bilinear { a, b } => {
                finite("a", a)?;
                finite("b", b)
            }
            GameFamily::Quadratic { a1, a2 } => {
                check_unit_open("a1", a1)?;
                check_unit_open("a2", a2)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Symmetric,
    SymmetricLower,
    SymmetricUpper,
    AsymmetricLower,
    AsymmetricUpper,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Symmetric => "symmetric",
            Branch::SymmetricLower => "symmetric-lower",
            Branch::SymmetricUpper => "symmetric-upper",
            Branch::AsymmetricLower => "asymmetric-lower",
            Branch::AsymmetricUpper => "asymmetric-upper",
        }
    }
}

/// One solution at one `β`: `(γ₁, γ₂)` for bilinear, `(x₀, y₀)` for quadratic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub beta: f64,
    pub branch: Branch,
    pub value1: f64,
    pub value2: f64,
    pub residual: f64,
}

/// Unlabeled solutions at one `β`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaSolutions {
    pub beta: f64,
    /// Symmetric roots ascending (bilinear) or center pairs (quadratic).
    pub pairs: Vec<(f64, f64)>,
    /// Period-2 pair, bilinear only.
    pub cycle: Option<(f64, f64)>,
    residuals: Vec<f64>,
    cycle_residual: f64,
}

/// Solves one `β` of a scan; independent across `β`.
pub fn solve_at_beta(family: &GameFamily, beta: f64) -> Result<BetaSolutions> {
    match *family {
        GameFamily::Bilinear { a, b } => {
            let roots = solve_symmetric_gamma(a, b, beta)?;
            let residuals = roots.iter().map(|r| (r / beta - g(*r, a, b)).abs()).collect();
            let cycle = find_period2(a, b, beta)?;
            Ok(BetaSolutions {
                beta,
                pairs: roots.iter().map(|r| (*r, *r)).collect(),
                cycle,
                residuals,
                cycle_residual: cycle.map_or(0.0, |c| period2_residual(a, b, beta, c)),
            })
        }
        GameFamily::Quadratic { a1, a2 } => {
            let pairs = solve_quadratic_centers(a1, a2, beta)?;
            let residuals = pairs.iter().map(|p| centers_residual(a1, a2, beta, *p)).collect();
            Ok(BetaSolutions {
                beta,
                pairs,
                cycle: None,
                residuals,
                cycle_residual: 0.0,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub family: GameFamily,
    pub betas: Vec<f64>,
    pub points: Vec<BranchPoint>,
}

impl BifurcationDiagram {
    /// Labels per-`β` solutions; `solutions` must be ordered by increasing `β`.
    pub fn from_solutions(family: GameFamily, solutions: Vec<BetaSolutions>) -> Result<Self> {
        if solutions.windows(2).any(|w| w[1].beta <= w[0].beta) {
            return Err(Error::param("beta_grid", "must be strictly increasing"));
        }
        let mut points = Vec::new();
        let mut previous: Option<f64> = None;
        for s in &solutions {
            let symmetric_ix: Vec<usize> = (0..s.pairs.len())
                .filter(|i| (s.pairs[*i].0 - s.pairs[*i].1).abs() <= 1e-9)
                .collect();
            // Continue the symmetric branch from the previous β, else take the median root.
            let main = match previous {
                Some(v) => symmetric_ix
                    .iter()
                    .copied()
                    .min_by(|i, j| (s.pairs[*i].0 - v).abs().total_cmp(&(s.pairs[*j].0 - v).abs())),
                None => symmetric_ix.get(symmetric_ix.len() / 2).copied(),
            };
            if let Some(m) = main {
                previous = Some(s.pairs[m].0);
            }
            for (i, &(v1, v2)) in s.pairs.iter().enumerate() {
                let branch = if Some(i) == main {
                    Branch::Symmetric
                } else if symmetric_ix.contains(&i) {
                    if v1 < s.pairs[main.unwrap_or(i)].0 {
                        Branch::SymmetricLower
                    } else {
                        Branch::SymmetricUpper
                    }
                } else if v1 < v2 {
                    Branch::AsymmetricLower
                } else {
                    Branch::AsymmetricUpper
                };
                points.push(BranchPoint {
                    beta: s.beta,
                    branch,
                    value1: v1,
                    value2: v2,
                    residual: s.residuals[i],
                });
            }
            if let Some((lo, hi)) = s.cycle {
                for (branch, v1, v2) in [(Branch::AsymmetricLower, lo, hi), (Branch::AsymmetricUpper, hi, lo)] {
                    points.push(BranchPoint {
                        beta: s.beta,
                        branch,
                        value1: v1,
                        value2: v2,
                        residual: s.cycle_residual,
                    });
                }
            }
        }
        Ok(Self {
            family,
            betas: solutions.iter().map(|s| s.beta).collect(),
            points,
        })
    }

    pub fn at(&self, beta: f64) -> impl Iterator<Item = &BranchPoint> {
        self.points.iter().filter(move |p| p.beta == beta)
    }
}

/// Scans `betas` sequentially and labels branches by continuity in `β`.
pub fn scan_bifurcation(family: &GameFamily, betas: &[f64]) -> Result<BifurcationDiagram> {
    family.validate()?;
    let solutions = betas
        .iter()
        .map(|b| solve_at_beta(family, *b))
        .collect::<Result<Vec<_>>>()?;
    BifurcationDiagram::from_solutions(*family, solutions)
}
