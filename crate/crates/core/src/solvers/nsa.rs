use super::{
    engine_for, finish, prepare, relative_change, rho_schedule, Finished, IterStats, IterateView, Observer,
    SolveOutput,
};
use crate::error::Result;
use crate::model::{l1_norm, Matrix, SolverConfig, SpcpProblem};
use crate::subproblem::{l1_feasible_completion, solve_pns_with, PnsInput};

/// Non-smooth augmented Lagrangian method on the exact objective.
///
/// Iteration `k` with penalty `rho_k`:
///
/// ```text
/// X    = svt(Z - Y/rho_k, 1/rho_k)
/// Yhat = Y + rho_k (X - Z)
/// Z, S = argmin xi ||S||_1 - <Y, Z - X> + rho_k/2 ||Z - X||^2  over the ball
/// Y    = Y + rho_k (X - Z)
/// ```
///
/// starting from `Z = Y = 0`. The stopping test compares consecutive `(X, S)`
/// pairs from the second iteration on, since a small `rho_0` can leave the
/// first pair at `(0, 0)`. The returned `X` is the last
/// thresholded (low-rank) iterate, and `S` is the smallest-l1 matrix that makes
/// the pair feasible.
pub fn solve_nsa(p: &SpcpProblem, cfg: &SolverConfig, observer: &mut Observer<'_>) -> Result<SolveOutput> {
    let prm = prepare(p, cfg)?;
    let xi = p.xi;
    let (m, n) = p.shape();
    let mut eng = engine_for(p, cfg);
    let rho_at = |k: usize| rho_schedule(k, prm.rho0, cfg.rho_growth, prm.rho_max);
    let mut x = Matrix::zeros(m, n);
    let mut s = Matrix::zeros(m, n);
    let mut z = Matrix::zeros(m, n);
    let mut y = Matrix::zeros(m, n);
    let mut theta = 0.0;
    let mut history = Vec::new();
    let mut converged = false;
    for k in 0..cfg.max_iters {
        let rho = rho_at(k);
        let (xn, nuclear) = eng.svt(&(&z - &y / rho), 1.0 / rho)?;
        let yhat = &y + (&xn - &z) * rho;
        let neg_y = -&y;
        let r = solve_pns_with(
            &PnsInput { xtilde: &xn, q: &neg_y, rho, xi, d: &p.d, delta: p.delta },
            cfg.theta_method,
        )?;
        y += (&xn - &r.x) * rho;
        let change = relative_change((&x, &s), (&xn, &r.s));
        x = xn;
        z = r.x;
        s = r.s;
        theta = r.theta;
        let stats = IterStats {
            iter: k,
            objective: nuclear + xi * l1_norm(&s),
            smoothed_objective: None,
            infeasibility: p.infeasibility(&x, &s),
            rel_change: change,
            svd_count_cumulative: eng.count(),
            theta,
            rho,
            skipped: false,
        };
        observer(
            &stats,
            &IterateView { x: &x, s: &s, z: Some(&z), y: Some(&y), yhat: Some(&yhat), rho_next: rho_at(k + 1) },
        );
        history.push(stats);
        if k >= 1 && change <= cfg.tol {
            converged = true;
            break;
        }
    }
    let s = l1_feasible_completion(&x, &p.d, p.delta);
    finish(p, Finished { x, s, y, theta, svd_count: eng.count(), converged, history })
}
