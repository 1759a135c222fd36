//! The four iterative methods, penalty schedules and the stopping rule.
//!
//! | [`Algorithm`]  | objective                  | per-iteration work            |
//! |----------------|----------------------------|-------------------------------|
//! | `SmoothApg`    | `f_mu(X) + xi g_nu(S)`     | 1 SVD, 2 smooth subproblems   |
//! | `PartialApg`   | `f_mu(X) + xi ||S||_1`     | 1 SVD, 1 non-smooth subproblem|
//! | `AlmS`         | `f_mu(X) + xi ||S||_1`     | 1 SVD (2 on a skip)           |
//! | `Nsa`          | `||X||_* + xi ||S||_1`     | 1 SVD, 1 non-smooth subproblem|
//!
//! Every method keeps its returned pair inside the feasible ball.

mod alms;
mod apg;
mod nsa;
mod papg;

pub use alms::solve_alm_s;
pub use apg::solve_smooth_apg;
pub use nsa::solve_nsa;
pub use papg::solve_partial_apg;

use crate::error::Result;
use crate::model::{
    pair_norm, validate_problem, Algorithm, Matrix, RhoGrowth, SolveStatus, SolverConfig, SpcpProblem,
    SpcpSolution,
};
use crate::prox::{spectral_norm, SvdEngine, RankPredictor};

/// Per-iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct IterStats {
    pub iter: usize,
    /// `||X||_* + xi ||S||_1` at the current iterate.
    pub objective: f64,
    /// Value of the smoothed objective the method minimizes, if any.
    pub smoothed_objective: Option<f64>,
    /// `||X + S - D||_F` of the reported pair. For NSA this is `(X_k, S_k)`,
    /// which may leave the ball; `(Z_k, S_k)` never does.
    pub infeasibility: f64,
    pub rel_change: f64,
    pub svd_count_cumulative: usize,
    pub theta: f64,
    pub rho: f64,
    /// ALM-S only: the linearized model failed and `X` was reset to `Z`.
    pub skipped: bool,
}

/// Borrowed iterates handed to an observer after each iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterateView<'a> {
    pub x: &'a Matrix,
    pub s: &'a Matrix,
    pub z: Option<&'a Matrix>,
    pub y: Option<&'a Matrix>,
    pub yhat: Option<&'a Matrix>,
    /// Penalty for the next iteration.
    pub rho_next: f64,
}

pub type Observer<'a> = dyn FnMut(&IterStats, &IterateView<'_>) + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub solution: crate::model::SpcpSolution,
    pub history: Vec<IterStats>,
}

impl SolveOutput {
    /// Iterations in which ALM-S reset `X` to `Z`.
    pub fn skip_count(&self) -> usize {
        self.history.iter().filter(|h| h.skipped).count()
    }

    /// Iterations in which ALM-S kept its linearized step.
    pub fn non_skip_count(&self) -> usize {
        self.history.len() - self.skip_count()
    }
}

/// Smoothing and penalty parameters after filling in data-driven defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedParams {
    pub mu: f64,
    pub nu: f64,
    pub rho0: f64,
    pub rho_max: f64,
    /// `||D||_2`, when it was needed.
    pub d_spectral: Option<f64>,
}

/// `mu = nu = tol ||D||_2 / 2`, `rho0 = 1/||D||_2`, `rho_max = 1e10 rho0`.
/// A zero `D` uses `||D||_2 = 1`.
pub fn resolve_params(p: &SpcpProblem, cfg: &SolverConfig) -> Result<ResolvedParams> {
    let need = cfg.mu.is_none() || cfg.nu.is_none() || cfg.rho0.is_none();
    let d_spectral = if need { Some(spectral_norm(&p.d)?) } else { None };
    let scale = d_spectral.filter(|&s| s > 0.0).unwrap_or(1.0);
    let mu = cfg.mu.unwrap_or(cfg.tol * scale / 2.0);
    let nu = cfg.nu.unwrap_or(cfg.tol * scale / 2.0);
    let rho0 = cfg.rho0.unwrap_or(1.0 / scale);
    let rho_max = cfg.rho_max.unwrap_or(1e10 * rho0);
    Ok(ResolvedParams { mu, nu, rho0, rho_max, d_spectral })
}

/// `||(X1, S1) - (X0, S0)||_F / (||(X0, S0)||_F + 1)`.
pub fn relative_change(prev: (&Matrix, &Matrix), cur: (&Matrix, &Matrix)) -> f64 {
    let dx = (cur.0 - prev.0).norm_squared();
    let ds = (cur.1 - prev.1).norm_squared();
    (dx + ds).sqrt() / (pair_norm(prev.0, prev.1) + 1.0)
}

/// Inclusive test `relative_change(prev, cur) <= tol`.
pub fn stopping_met(prev: (&Matrix, &Matrix), cur: (&Matrix, &Matrix), tol: f64) -> bool {
    relative_change(prev, cur) <= tol
}

/// Penalty at iteration `k`.
pub fn rho_schedule(k: usize, rho0: f64, growth: RhoGrowth, rho_max: f64) -> f64 {
    match growth {
        RhoGrowth::SqrtK => rho0 * ((k + 1) as f64).sqrt(),
        RhoGrowth::Arithmetic => rho0 * (k + 1) as f64,
        RhoGrowth::Geometric(f) => (rho0 * f.powf(k as f64)).min(rho_max.max(rho0)),
    }
}

pub(crate) fn engine_for(p: &SpcpProblem, cfg: &SolverConfig) -> SvdEngine {
    let (m, n) = p.shape();
    let pred = RankPredictor::with_fractions(m, n, cfg.rank_init_frac, cfg.rank_grow_frac);
    SvdEngine::with_predictor(cfg.svd_mode, pred).with_seed(cfg.seed)
}

pub(crate) fn prepare(p: &SpcpProblem, cfg: &SolverConfig) -> Result<ResolvedParams> {
    validate_problem(p)?;
    cfg.validate()?;
    resolve_params(p, cfg)
}

pub(crate) struct Finished {
    pub x: Matrix,
    pub s: Matrix,
    pub y: Matrix,
    pub theta: f64,
    pub svd_count: usize,
    pub converged: bool,
    pub history: Vec<IterStats>,
}

pub(crate) fn finish(p: &SpcpProblem, f: Finished) -> Result<SolveOutput> {
    let objective = p.objective(&f.x, &f.s)?;
    let infeasibility = p.infeasibility(&f.x, &f.s);
    let status = if f.converged {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxItersReached
    };
    Ok(SolveOutput {
        solution: SpcpSolution {
            x: f.x,
            s: f.s,
            y: f.y,
            theta: f.theta,
            iters: f.history.len(),
            svd_count: f.svd_count,
            objective,
            infeasibility,
            status,
        },
        history: f.history,
    })
}

/// Runs the configured algorithm.
pub fn solve(p: &SpcpProblem, cfg: &SolverConfig) -> Result<SolveOutput> {
    solve_observed(p, cfg, &mut |_, _| {})
}

/// Runs the configured algorithm, calling `observer` after every iteration.
pub fn solve_observed(p: &SpcpProblem, cfg: &SolverConfig, observer: &mut Observer<'_>) -> Result<SolveOutput> {
    match cfg.algorithm {
        Algorithm::SmoothApg => solve_smooth_apg(p, cfg, observer),
        Algorithm::PartialApg => solve_partial_apg(p, cfg, observer),
        Algorithm::AlmS => solve_alm_s(p, cfg, observer),
        Algorithm::Nsa => solve_nsa(p, cfg, observer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stopping_examples() {
        let a = Matrix::from_element(2, 2, 1.5);
        assert!(stopping_met((&a, &a), (&a, &a), 1e-12));
        let z = Matrix::zeros(2, 2);
        let tol = 1e-3;
        let cur = Matrix::from_element(2, 2, tol); // ||cur||_F = 2 tol
        assert!(!stopping_met((&z, &z), (&cur, &z), tol));
        assert!(stopping_met((&z, &z), (&cur, &z), 2.0 * tol));
    }

    #[test]
    fn relative_change_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut r = || Matrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
        let (a, b, c, d) = (r(), r(), r(), r());
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..12 {
            num += (c[i] - a[i]).powi(2) + (d[i] - b[i]).powi(2);
            den += a[i] * a[i] + b[i] * b[i];
        }
        let want = num.sqrt() / (den.sqrt() + 1.0);
        assert!((relative_change((&a, &b), (&c, &d)) - want).abs() <= 1e-15);
    }

    #[test]
    fn schedules() {
        assert_eq!(rho_schedule(0, 0.5, RhoGrowth::SqrtK, 1e9), 0.5);
        assert_eq!(rho_schedule(3, 0.5, RhoGrowth::SqrtK, 1e9), 1.0);
        assert_eq!(rho_schedule(3, 0.5, RhoGrowth::Arithmetic, 1e9), 2.0);
        assert_eq!(rho_schedule(3, 0.5, RhoGrowth::Geometric(2.0), 1e9), 4.0);
        assert_eq!(rho_schedule(60, 0.5, RhoGrowth::Geometric(2.0), 1e3), 1e3);
        for g in [RhoGrowth::SqrtK, RhoGrowth::Arithmetic, RhoGrowth::Geometric(1.3)] {
            let mut prev = 0.0;
            for k in 0..200 {
                let r = rho_schedule(k, 0.7, g, 1e6);
                assert!(r >= prev);
                prev = r;
            }
        }
    }

    #[test]
    fn sqrtk_reciprocal_sums_diverge() {
        // sum_{k<N} 1/sqrt(k+1) >= 2(sqrt(N+1) - 1)
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for k in 0..1_000_000usize {
            let r = rho_schedule(k, 1.0, RhoGrowth::SqrtK, f64::INFINITY);
            sum += 1.0 / r;
            sum_sq += 1.0 / (r * r);
            let n = (k + 1) as f64;
            if (k + 1).is_power_of_two() {
                assert!(sum >= 2.0 * ((n + 1.0).sqrt() - 1.0) - 1e-9);
                assert!(sum_sq >= (n + 1.0).ln() - 1e-9);
            }
        }
    }
}
