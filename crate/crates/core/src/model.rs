//! Shared domain types: problems, solutions, ground truth and solver settings.

use nalgebra::DMatrix;

use crate::error::{Result, SpcpError};
use crate::subproblem::ThetaMethod;

/// Dense real matrix used for every matrix-valued quantity.
pub type Matrix = DMatrix<f64>;

/// An SPCP instance: `min ||X||_* + xi ||S||_1` s.t. `||X + S - D||_F <= delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpcpProblem {
    pub d: Matrix,
    pub delta: f64,
    pub xi: f64,
}

impl SpcpProblem {
    /// Builds a problem with the default weight `xi = 1/sqrt(max(m, n))`.
    pub fn new(d: Matrix, delta: f64) -> Self {
        let xi = default_xi(d.nrows(), d.ncols());
        Self { d, delta, xi }
    }

    pub fn with_xi(d: Matrix, delta: f64, xi: f64) -> Self {
        Self { d, delta, xi }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.d.shape()
    }

    /// `||X||_* + xi ||S||_1`.
    pub fn objective(&self, x: &Matrix, s: &Matrix) -> Result<f64> {
        Ok(crate::prox::nuclear_norm(x)? + self.xi * l1_norm(s))
    }

    /// `||X + S - D||_F`.
    pub fn infeasibility(&self, x: &Matrix, s: &Matrix) -> f64 {
        residual_norm(x, s, &self.d)
    }
}

pub fn default_xi(m: usize, n: usize) -> f64 {
    1.0 / (m.max(n) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// The iteration cap was hit; the last iterate is returned.
    MaxItersReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpcpSolution {
    pub x: Matrix,
    pub s: Matrix,
    /// Multiplier of the `X = Z` coupling; zero for methods without one.
    pub y: Matrix,
    /// Multiplier of the ball constraint.
    pub theta: f64,
    pub iters: usize,
    pub svd_count: usize,
    pub objective: f64,
    pub infeasibility: f64,
    pub status: SolveStatus,
}

/// Planted decomposition behind a generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub x0: Matrix,
    pub s0: Matrix,
    pub zeta0: Matrix,
    /// Column-major linear indices of the nonzeros of `s0`, sorted.
    pub support: Vec<usize>,
    pub rank0: usize,
    pub varrho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Fully smoothed accelerated proximal gradient.
    SmoothApg,
    /// Proximal gradient smoothing only the nuclear norm.
    PartialApg,
    /// Alternating linearization with skipping steps.
    AlmS,
    /// Non-smooth augmented Lagrangian.
    Nsa,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SmoothApg => "apg",
            Algorithm::PartialApg => "papg",
            Algorithm::AlmS => "alms",
            Algorithm::Nsa => "nsa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "apg" => Some(Algorithm::SmoothApg),
            "papg" => Some(Algorithm::PartialApg),
            "alms" | "alm-s" => Some(Algorithm::AlmS),
            "nsa" => Some(Algorithm::Nsa),
            _ => None,
        }
    }
}

/// Penalty growth for NSA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoGrowth {
    /// `rho0 * sqrt(k+1)`: both `sum 1/rho_k` and `sum 1/rho_k^2` diverge.
    SqrtK,
    /// `rho0 * (k+1)`: only `sum 1/rho_k` diverges.
    Arithmetic,
    /// `rho0 * factor^k`, capped at `rho_max`. Neither sum diverges, so there
    /// is no convergence guarantee; it is a fast heuristic.
    Geometric(f64),
}

impl RhoGrowth {
    /// Parses `sqrtk`, `arithmetic` or `geometric:<factor>`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "sqrtk" | "sqrt" => return Some(RhoGrowth::SqrtK),
            "arithmetic" | "linear" => return Some(RhoGrowth::Arithmetic),
            _ => {}
        }
        let rest = s.strip_prefix("geometric")?;
        let rest = rest.strip_prefix(':').or_else(|| rest.strip_prefix('='))?;
        let f: f64 = rest.parse().ok()?;
        Some(RhoGrowth::Geometric(f))
    }

    pub fn label(&self) -> String {
        match self {
            RhoGrowth::SqrtK => "sqrtk".into(),
            RhoGrowth::Arithmetic => "arithmetic".into(),
            RhoGrowth::Geometric(f) => format!("geometric:{f}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdMode {
    Full,
    /// Leading triplets only, sized by a rank predictor.
    PartialWithPrediction,
}

/// Solver settings. `None` entries are resolved from the data:
/// `mu = nu = tol * ||D||_2 / 2` and `rho0 = 1 / ||D||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub rho0: Option<f64>,
    pub rho_growth: RhoGrowth,
    /// Cap for geometric growth; defaults to `1e10 * rho0`.
    pub rho_max: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub feas_slack: f64,
    pub svd_mode: SvdMode,
    pub rank_init_frac: f64,
    pub rank_grow_frac: f64,
    pub theta_method: ThetaMethod,
    /// Seed of the random start blocks used by the partial SVD.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Nsa,
            mu: None,
            nu: None,
            rho0: None,
            rho_growth: RhoGrowth::SqrtK,
            rho_max: None,
            tol: 1e-6,
            max_iters: 5000,
            feas_slack: 1e-12,
            svd_mode: SvdMode::Full,
            rank_init_frac: 0.1,
            rank_grow_frac: 0.05,
            theta_method: ThetaMethod::Bracketed,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    /// NSA settings used by the benchmark protocol: `rho0 = 1/||D||_2`
    /// doubling every iteration.
    pub fn nsa_benchmark(tol: f64) -> Self {
        Self {
            algorithm: Algorithm::Nsa,
            rho_growth: RhoGrowth::Geometric(2.0),
            tol,
            max_iters: 500,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SpcpError::InvalidConfig(msg));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.feas_slack >= 0.0) {
            return bad(format!("feas_slack must be nonnegative, got {}", self.feas_slack));
        }
        for (name, v) in [("mu", self.mu), ("nu", self.nu), ("rho0", self.rho0), ("rho_max", self.rho_max)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if let RhoGrowth::Geometric(f) = self.rho_growth {
            if !(f >= 1.0 && f.is_finite()) {
                return bad(format!("geometric growth factor must be >= 1, got {f}"));
            }
        }
        if !(self.rank_init_frac > 0.0 && self.rank_init_frac <= 1.0) {
            return bad(format!("rank_init_frac must lie in (0, 1], got {}", self.rank_init_frac));
        }
        if !(self.rank_grow_frac > 0.0 && self.rank_grow_frac <= 1.0) {
            return bad(format!("rank_grow_frac must lie in (0, 1], got {}", self.rank_grow_frac));
        }
        Ok(())
    }
}

/// Checks the matrix and problem invariants.
pub fn validate_problem(p: &SpcpProblem) -> Result<()> {
    validate_matrix(&p.d)?;
    if !(p.delta >= 0.0) || !p.delta.is_finite() {
        return Err(SpcpError::NegativeDelta(p.delta));
    }
    if !(p.xi > 0.0) || !p.xi.is_finite() {
        return Err(SpcpError::NonPositiveXi(p.xi));
    }
    Ok(())
}

pub fn validate_matrix(a: &Matrix) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(SpcpError::EmptyMatrix);
    }
    if let Some(idx) = a.iter().position(|v| !v.is_finite()) {
        let (row, col) = (idx % a.nrows(), idx / a.nrows());
        return Err(SpcpError::NonFiniteEntry { row, col });
    }
    Ok(())
}

pub(crate) fn check_shape(expected: (usize, usize), a: &Matrix) -> Result<()> {
    if a.shape() != expected {
        return Err(SpcpError::ShapeMismatch {
            expected,
            found: a.shape(),
        });
    }
    Ok(())
}

pub fn l1_norm(a: &Matrix) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// `||X + S - D||_F` without allocating.
pub fn residual_norm(x: &Matrix, s: &Matrix, d: &Matrix) -> f64 {
    x.iter()
        .zip(s.iter())
        .zip(d.iter())
        .map(|((a, b), c)| {
            let r = a + b - c;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(||A||_F^2 + ||B||_F^2)`.
pub fn pair_norm(a: &Matrix, b: &Matrix) -> f64 {
    (a.norm_squared() + b.norm_squared()).sqrt()
}
