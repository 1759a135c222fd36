use super::{engine_for, finish, prepare, relative_change, Finished, IterStats, IterateView, Observer, SolveOutput};
use crate::error::{Result, SpcpError};
use crate::model::{l1_norm, residual_norm, Matrix, SolverConfig, SpcpProblem};
use crate::prox::{f_mu_from_sigma, singular_values};
use crate::subproblem::{solve_pns_with, PnsInput};

/// Alternating linearization with skipping steps on `f_mu(X) + xi ||S||_1`,
/// split as `X = Z` with `(Z, S)` in the feasible ball.
///
/// The penalty is fixed and must be at least `1/mu`; it defaults to `1/mu`.
/// Starts from `Z = 0`, `S = D`, `Y = 0` and returns the feasible pair `(Z, S)`.
pub fn solve_alm_s(p: &SpcpProblem, cfg: &SolverConfig, observer: &mut Observer<'_>) -> Result<SolveOutput> {
    let prm = prepare(p, cfg)?;
    let (mu, xi) = (prm.mu, p.xi);
    let rho = match cfg.rho0 {
        Some(r) if r < 1.0 / mu => return Err(SpcpError::InvalidRho { rho: r, min: 1.0 / mu }),
        Some(r) => r,
        None => 1.0 / mu,
    };
    let (m, n) = p.shape();
    let mut eng = engine_for(p, cfg);
    let mut z = Matrix::zeros(m, n);
    let mut s = p.d.clone();
    let mut y = Matrix::zeros(m, n);
    let mut theta = 0.0;
    let mut history = Vec::new();
    let mut converged = false;
    for k in 0..cfg.max_iters {
        let (mut x, mut gx) = eng.prox_smoothed_nuclear(&z, &y, rho, mu)?;
        // The linearized model overestimates the objective unless (X, S_k)
        // leaves the ball or <Y, X - Z> + rho/2 ||X - Z||^2 turns negative.
        let dx = &x - &z;
        let model_gap = y.dot(&dx) + 0.5 * rho * dx.norm_squared();
        let skipped = residual_norm(&x, &s, &p.d) > p.delta || model_gap < 0.0;
        if skipped {
            x = z.clone();
            gx = eng.grad_f_mu(&x, mu)?;
        }
        let r = solve_pns_with(
            &PnsInput { xtilde: &x, q: &gx, rho, xi, d: &p.d, delta: p.delta },
            cfg.theta_method,
        )?;
        y = (&x - &r.x) * rho - &gx;
        let change = relative_change((&z, &s), (&r.x, &r.s));
        z = r.x;
        s = r.s;
        theta = r.theta;
        let sigma = singular_values(&z)?;
        let l1 = xi * l1_norm(&s);
        let stats = IterStats {
            iter: k,
            objective: sigma.iter().sum::<f64>() + l1,
            smoothed_objective: Some(f_mu_from_sigma(&sigma, mu) + l1),
            infeasibility: p.infeasibility(&z, &s),
            rel_change: change,
            svd_count_cumulative: eng.count(),
            theta,
            rho,
            skipped,
        };
        observer(
            &stats,
            &IterateView { x: &x, s: &s, z: Some(&z), y: Some(&y), yhat: None, rho_next: rho },
        );
        history.push(stats);
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }
    finish(p, Finished { x: z, s, y, theta, svd_count: eng.count(), converged, history })
}
