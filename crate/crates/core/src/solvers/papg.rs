use super::{engine_for, finish, prepare, relative_change, Finished, IterStats, IterateView, Observer, SolveOutput};
use crate::error::Result;
use crate::model::{l1_norm, Matrix, SolverConfig, SpcpProblem};
use crate::prox::{f_mu_from_sigma, singular_values};
use crate::subproblem::{enforce_ball, solve_pns_with, PnsInput};

/// Proximal gradient on `f_mu(X) + xi ||S||_1` over the feasible ball, started
/// from `(0, D)`.
///
/// The memory step minimizes `w_k xi ||S||_1 + <G_k, X> + 1/(2 mu) ||X||^2`
/// with `w_k = sum (i+1)/2` and `G_k` the matching weighted gradient sum, which
/// is the non-smooth subproblem with weight `w_k xi`, `Q = G_k`, `rho = 1/mu`
/// centered at the start point.
pub fn solve_partial_apg(p: &SpcpProblem, cfg: &SolverConfig, observer: &mut Observer<'_>) -> Result<SolveOutput> {
    let prm = prepare(p, cfg)?;
    let (mu, xi) = (prm.mu, p.xi);
    let l_mu = 1.0 / mu;
    let (m, n) = p.shape();
    let mut eng = engine_for(p, cfg);
    let x0 = Matrix::zeros(m, n);
    let (mut x, mut s) = (x0.clone(), p.d.clone());
    let mut zx = x.clone();
    let mut gsum = Matrix::zeros(m, n);
    let mut wsum = 0.0;
    let mut theta = 0.0;
    let mut history = Vec::new();
    let mut converged = false;
    for k in 0..cfg.max_iters {
        let a = k as f64 / (k + 2) as f64;
        let b = 2.0 / (k + 2) as f64;
        let yx = &x * a + &zx * b;
        let g = eng.grad_f_mu(&yx, mu)?;
        let w = (k + 1) as f64 / 2.0;
        gsum += &g * w;
        wsum += w;
        let z = solve_pns_with(
            &PnsInput { xtilde: &x0, q: &gsum, rho: l_mu, xi: wsum * xi, d: &p.d, delta: p.delta },
            cfg.theta_method,
        )?;
        theta = z.theta;
        let xn = &x * a + &z.x * b;
        let sn = &s * a + &z.s * b;
        zx = z.x;
        let change = relative_change((&x, &s), (&xn, &sn));
        x = xn;
        s = sn;
        let sigma = singular_values(&x)?;
        let l1 = xi * l1_norm(&s);
        let stats = IterStats {
            iter: k,
            objective: sigma.iter().sum::<f64>() + l1,
            smoothed_objective: Some(f_mu_from_sigma(&sigma, mu) + l1),
            infeasibility: p.infeasibility(&x, &s),
            rel_change: change,
            svd_count_cumulative: eng.count(),
            theta,
            rho: l_mu,
            skipped: false,
        };
        observer(
            &stats,
            &IterateView { x: &x, s: &s, z: Some(&zx), y: None, yhat: None, rho_next: l_mu },
        );
        history.push(stats);
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }
    enforce_ball(&mut x, &s, &p.d, p.delta);
    finish(
        p,
        Finished { x, s, y: Matrix::zeros(m, n), theta, svd_count: eng.count(), converged, history },
    )
}
