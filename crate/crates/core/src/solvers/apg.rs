use super::{engine_for, finish, prepare, relative_change, Finished, IterStats, IterateView, Observer, SolveOutput};
use crate::error::Result;
use crate::model::{l1_norm, Matrix, SolverConfig, SpcpProblem};
use crate::prox::{f_mu_from_sigma, g_nu, grad_g_nu, singular_values};
use crate::subproblem::{enforce_ball, solve_ps, PsInput};

/// Nesterov's method on `f_mu(X) + xi g_nu(S)` over the feasible ball,
/// started from `(0, D)`.
///
/// Each iteration takes a gradient step from `(X_k, S_k)`, a step from the
/// start point along the running weighted gradient sum, and combines them with
/// weights `(k+1)/(k+3)` and `2/(k+3)`. Both steps are smooth subproblems with
/// `L = 1/mu + 1/nu`.
pub fn solve_smooth_apg(p: &SpcpProblem, cfg: &SolverConfig, observer: &mut Observer<'_>) -> Result<SolveOutput> {
    let prm = prepare(p, cfg)?;
    let (mu, nu, xi) = (prm.mu, prm.nu, p.xi);
    let l = 1.0 / mu + 1.0 / nu;
    let (m, n) = p.shape();
    let mut eng = engine_for(p, cfg);
    let x0 = Matrix::zeros(m, n);
    let s0 = p.d.clone();
    let (mut x, mut s) = (x0.clone(), s0.clone());
    let mut gsum_x = Matrix::zeros(m, n);
    let mut gsum_s = Matrix::zeros(m, n);
    let mut wsum = 0.0;
    let mut theta = 0.0;
    let mut history = Vec::new();
    let mut converged = false;
    for k in 0..cfg.max_iters {
        let gx = eng.grad_f_mu(&x, mu)?;
        let gs = grad_g_nu(&s, nu) * xi;
        let y = solve_ps(&PsInput {
            xtilde: &x,
            stilde: &s,
            qx: &gx,
            qs: &gs,
            l,
            d: &p.d,
            delta: p.delta,
        })?;
        let w = (k + 1) as f64 / 2.0;
        gsum_x += &gx * w;
        gsum_s += &gs * w;
        wsum += w;
        let z = solve_ps(&PsInput {
            xtilde: &x0,
            stilde: &s0,
            qx: &gsum_x,
            qs: &gsum_s,
            l,
            d: &p.d,
            delta: p.delta,
        })?;
        debug_assert!((wsum - ((k + 1) * (k + 2)) as f64 / 4.0).abs() < 1e-9 * wsum);
        let a = (k + 1) as f64 / (k + 3) as f64;
        let b = 2.0 / (k + 3) as f64;
        let xn = &y.x * a + &z.x * b;
        let sn = &y.s * a + &z.s * b;
        theta = y.theta;
        let change = relative_change((&x, &s), (&xn, &sn));
        x = xn;
        s = sn;
        let sigma = singular_values(&x)?;
        let stats = IterStats {
            iter: k,
            objective: sigma.iter().sum::<f64>() + xi * l1_norm(&s),
            smoothed_objective: Some(f_mu_from_sigma(&sigma, mu) + xi * g_nu(&s, nu)),
            infeasibility: p.infeasibility(&x, &s),
            rel_change: change,
            svd_count_cumulative: eng.count(),
            theta,
            rho: l,
            skipped: false,
        };
        observer(
            &stats,
            &IterateView { x: &x, s: &s, z: Some(&z.x), y: None, yhat: None, rho_next: l },
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
