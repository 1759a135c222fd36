use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spcp::instance::{generate_instance, GenParams};
use spcp::model::{default_xi, Algorithm, Matrix, SolveStatus, SolverConfig, SpcpProblem, SvdMode};
use spcp::prox::{nuclear_norm, spectral_norm};
use spcp::solvers::{solve, solve_observed, IterStats, IterateView};
use spcp::SpcpError;

const ALL: [Algorithm; 4] = [Algorithm::SmoothApg, Algorithm::PartialApg, Algorithm::AlmS, Algorithm::Nsa];

fn small_instance(seed: u64) -> SpcpProblem {
    generate_instance(&GenParams::new(30, 0.1, 0.05, 40.0, seed)).unwrap().0
}

fn config(alg: Algorithm, p: &SpcpProblem, iters: usize) -> SolverConfig {
    let mu = 1e-2 * spectral_norm(&p.d).unwrap();
    SolverConfig { mu: Some(mu), nu: Some(mu), tol: 1e-9, max_iters: iters, ..SolverConfig::new(alg) }
}

#[test]
fn zero_data_gives_zero_solution() {
    let p = SpcpProblem::new(Matrix::zeros(6, 4), 0.0);
    for alg in ALL {
        let out = solve(&p, &SolverConfig::new(alg)).unwrap();
        assert_eq!(out.solution.x.amax(), 0.0, "{alg:?}");
        assert_eq!(out.solution.s.amax(), 0.0, "{alg:?}");
    }
    let nsa = solve(&p, &SolverConfig::new(Algorithm::Nsa)).unwrap();
    assert_eq!(nsa.solution.iters, 2);
    assert_eq!(nsa.solution.theta, 0.0);
    assert_eq!(nsa.solution.status, SolveStatus::Converged);
}

#[test]
fn apg_first_step_two_by_two() {
    // grad f_mu(0) = 0 and grad g_nu(D) = I for nu = 1, so both smooth
    // subproblems project onto the ball with L = 2.
    let d = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    let p = SpcpProblem::new(d.clone(), 0.1);
    let xi = p.xi;
    let cfg = SolverConfig { mu: Some(1.0), nu: Some(1.0), max_iters: 1, ..SolverConfig::new(Algorithm::SmoothApg) };
    let out = solve(&p, &cfg).unwrap();
    let eye = Matrix::identity(2, 2);
    let want_x = &eye * (7.0 * xi / 60.0);
    let want_s = &d - &eye * (13.0 * xi / 60.0);
    assert!((&out.solution.x - want_x).amax() < 1e-13);
    assert!((&out.solution.s - want_s).amax() < 1e-13);
    assert!((out.history[0].theta - 4.0).abs() < 1e-12);
}

#[test]
fn partial_apg_first_step_halves_weight() {
    // At k = 0 the memory step is min xi/2 ||S||_1 + ||X||^2 / 2 over the
    // ball, whose minimizer on this diagonal instance is X = xi/2 I.
    let d = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
    let p = SpcpProblem::new(d.clone(), 0.1);
    let xi = p.xi;
    let cfg = SolverConfig { mu: Some(1.0), max_iters: 1, ..SolverConfig::new(Algorithm::PartialApg) };
    let out = solve(&p, &cfg).unwrap();
    let eye = Matrix::identity(2, 2);
    assert!((&out.solution.x - &eye * (xi / 2.0)).amax() < 1e-13);
    assert!((&out.solution.s - (&d - &eye * (0.6 * xi))).amax() < 1e-13);
    assert!((out.history[0].theta - 5.0).abs() < 1e-12);
}

#[test]
fn apg_feasible_origin_shrinks_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = Matrix::from_fn(40, 2, |_, _| rng.random_range(-1.0..1.0));
    let v = Matrix::from_fn(2, 40, |_, _| rng.random_range(-1.0..1.0));
    let d = u * v;
    let p = SpcpProblem::new(d.clone(), 1.1 * d.norm());
    let cfg = SolverConfig { mu: Some(1e-3), nu: Some(1e-3), tol: 1e-10, max_iters: 3000, ..SolverConfig::new(Algorithm::SmoothApg) };
    let out = solve(&p, &cfg).unwrap();
    assert!(out.solution.s.norm() < 1e-6 * d.norm(), "{}", out.solution.s.norm());
    assert!(out.solution.x.norm() < 1e-6 * d.norm());
}

#[test]
fn apg_rate_on_fifty_by_fifty() {
    let (p, _) = generate_instance(&GenParams::new(50, 0.1, 0.05, 40.0, 3)).unwrap();
    let mut cfg = config(Algorithm::SmoothApg, &p, 1500);
    cfg.tol = 1e-15;
    let out = solve(&p, &cfg).unwrap();
    let vals: Vec<f64> = out.history.iter().map(|h| h.smoothed_objective.unwrap()).collect();
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = |k: usize| vals[k] - best;
    for k in [10, 20, 40, 80, 160] {
        assert!(gap(2 * k) <= 0.35 * gap(k), "k={k}: {} vs {}", gap(2 * k), gap(k));
    }
}

#[test]
fn outputs_feasible_and_objective_consistent() {
    for (i, alg) in ALL.into_iter().enumerate() {
        let p = small_instance(10 + i as u64);
        let mut worst: f64 = 0.0;
        let out = solve_observed(&p, &config(alg, &p, 300), &mut |_: &IterStats, v: &IterateView<'_>| {
            let lowrank = match alg {
                Algorithm::AlmS | Algorithm::Nsa => v.z.unwrap(),
                _ => v.x,
            };
            worst = worst.max(p.infeasibility(lowrank, v.s));
        })
        .unwrap();
        assert!(worst <= p.delta * (1.0 + 1e-12), "{alg:?}");
        let sol = &out.solution;
        assert!(sol.infeasibility <= p.delta * (1.0 + 1e-12), "{alg:?}");
        assert!(p.infeasibility(&sol.x, &sol.s) <= p.delta * (1.0 + 1e-12));
        let obj = nuclear_norm(&sol.x).unwrap() + p.xi * sol.s.abs().sum();
        assert!((obj - sol.objective).abs() <= 1e-10 * obj, "{alg:?}");
        assert_eq!(sol.iters, out.history.len());
        assert_eq!(sol.svd_count, out.history.last().unwrap().svd_count_cumulative);
    }
}

#[test]
fn deterministic_histories() {
    let p = small_instance(4);
    for alg in ALL {
        for mode in [SvdMode::Full, SvdMode::PartialWithPrediction] {
            let cfg = SolverConfig { svd_mode: mode, ..config(alg, &p, 60) };
            let a = solve(&p, &cfg).unwrap();
            let b = solve(&p, &cfg).unwrap();
            assert_eq!(a, b, "{alg:?} {mode:?}");
        }
    }
}

#[test]
fn alms_rejects_small_penalty() {
    let p = small_instance(1);
    let mut cfg = config(Algorithm::AlmS, &p, 10);
    let mu = cfg.mu.unwrap();
    cfg.rho0 = Some(0.5 / mu);
    assert!(matches!(solve(&p, &cfg), Err(SpcpError::InvalidRho { .. })));
    cfg.rho0 = Some(1.0 / mu);
    assert!(solve(&p, &cfg).is_ok());
}

#[test]
fn alms_skip_resets_to_previous_z() {
    let p = small_instance(5);
    let cfg = config(Algorithm::AlmS, &p, 200);
    let mut prev_z = Matrix::zeros(30, 30);
    let mut fired = 0;
    let out = solve_observed(&p, &cfg, &mut |st: &IterStats, v: &IterateView<'_>| {
        if st.skipped {
            assert_eq!(v.x, &prev_z);
            fired += 1;
        }
        prev_z = v.z.unwrap().clone();
    })
    .unwrap();
    assert!(fired > 0);
    assert_eq!(out.skip_count(), fired);
    assert_eq!(out.skip_count() + out.non_skip_count(), out.history.len());
    for (k, _) in out.history.iter().enumerate() {
        let skips = out.history[..=k].iter().filter(|h| h.skipped).count();
        assert!(skips <= k + 1);
    }
}

#[test]
fn nsa_multiplier_identity_and_subgradient() {
    let p = small_instance(6);
    let cfg = SolverConfig { tol: 1e-8, max_iters: 40, ..SolverConfig::new(Algorithm::Nsa) };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut y_prev = Matrix::zeros(30, 30);
    let mut rho_prev = 0.0;
    let mut worst: f64 = 0.0;
    solve_observed(&p, &cfg, &mut |st: &IterStats, v: &IterateView<'_>| {
        let (x, z, y, yhat) = (v.x, v.z.unwrap(), v.y.unwrap(), v.yhat.unwrap());
        let lhs = x - z;
        let rhs = (y - &y_prev) / st.rho;
        worst = worst.max((lhs - rhs).amax() / (1.0 + x.amax()));
        assert!(st.rho >= rho_prev);
        assert!(v.rho_next >= st.rho);
        rho_prev = st.rho;
        y_prev = y.clone();
        let base = nuclear_norm(x).unwrap();
        for _ in 0..10 {
            let w = Matrix::from_fn(30, 30, |_, _| rng.random_range(-5.0..5.0)) + x;
            let lower = base - yhat.dot(&(&w - x));
            assert!(nuclear_norm(&w).unwrap() >= lower - 1e-9 * (1.0 + lower.abs()));
        }
    })
    .unwrap();
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn default_xi_used() {
    let p = small_instance(1);
    assert_eq!(p.xi, default_xi(30, 30));
    assert_eq!(default_xi(10, 40), 1.0 / 40f64.sqrt());
}
