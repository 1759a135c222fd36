//! Closed-form solvers for the two constrained subproblems used by every
//! algorithm, the scalar multiplier search, and optimality certificates.
//!
//! Smooth subproblem:
//! `min <Qx, X - Xt> + <Qs, S - St> + L/2 (||X - Xt||^2 + ||S - St||^2)`
//! over `||X + S - D||_F <= delta`.
//!
//! Non-smooth subproblem:
//! `min xi ||S||_1 + <Q, X - Xt> + rho/2 ||X - Xt||^2`
//! over `||X + S - D||_F <= delta`.

use crate::error::{Result, SpcpError};
use crate::model::{check_shape, residual_norm, Matrix};
use crate::prox::soft;
use crate::quartic::quartic_real_roots;

/// How the multiplier equation of the non-smooth subproblem is solved on its
/// bracketing interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaMethod {
    /// Safeguarded Newton with bisection fallback.
    #[default]
    Bracketed,
    /// Closed-form quartic roots, polished by Newton. Falls back to
    /// `Bracketed` if no admissible root survives.
    Quartic,
}

#[derive(Debug, Clone, Copy)]
pub struct PsInput<'a> {
    pub xtilde: &'a Matrix,
    pub stilde: &'a Matrix,
    pub qx: &'a Matrix,
    pub qs: &'a Matrix,
    pub l: f64,
    pub d: &'a Matrix,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PnsInput<'a> {
    pub xtilde: &'a Matrix,
    pub q: &'a Matrix,
    pub rho: f64,
    pub xi: f64,
    pub d: &'a Matrix,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub x: Matrix,
    pub s: Matrix,
    pub theta: f64,
}

/// Residuals of the optimality system; all zero at an exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// Norm of the gradient of the Lagrangian in `X`.
    pub stationarity_x: f64,
    /// Smooth case: gradient in `S`. Non-smooth case: distance of
    /// `-theta (X + S - D) / xi` from the l1 subdifferential at `S`.
    pub stationarity_s: f64,
    /// `max(0, ||X + S - D||_F - delta)`.
    pub primal_excess: f64,
    /// `|theta (||X + S - D||_F - delta)|`.
    pub complementarity: f64,
    /// `max(0, -theta)`.
    pub dual_sign: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        [
            self.stationarity_x,
            self.stationarity_s,
            self.primal_excess,
            self.complementarity,
            self.dual_sign,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn check_ps(inp: &PsInput) -> Result<()> {
    let shape = inp.d.shape();
    for m in [inp.xtilde, inp.stilde, inp.qx, inp.qs] {
        check_shape(shape, m)?;
    }
    if !(inp.l > 0.0) {
        return Err(SpcpError::InvalidConfig(format!("L must be positive, got {}", inp.l)));
    }
    if !(inp.delta >= 0.0) {
        return Err(SpcpError::NegativeDelta(inp.delta));
    }
    Ok(())
}

fn check_pns(inp: &PnsInput) -> Result<()> {
    let shape = inp.d.shape();
    for m in [inp.xtilde, inp.q] {
        check_shape(shape, m)?;
    }
    if !(inp.rho > 0.0) {
        return Err(SpcpError::InvalidConfig(format!("rho must be positive, got {}", inp.rho)));
    }
    if !(inp.xi > 0.0) {
        return Err(SpcpError::NonPositiveXi(inp.xi));
    }
    if !(inp.delta >= 0.0) {
        return Err(SpcpError::NegativeDelta(inp.delta));
    }
    Ok(())
}

/// Pulls `X` toward `D - S` so that `||X + S - D||_F <= delta` holds exactly in
/// floating point. Moves by at most a few ulps of the residual.
pub(crate) fn enforce_ball(x: &mut Matrix, s: &Matrix, d: &Matrix, delta: f64) {
    for _ in 0..4 {
        let r = residual_norm(x, s, d);
        if r <= delta {
            return;
        }
        let f = (1.0 - delta / r) * (1.0 + 1e-15);
        x.zip_zip_apply(s, d, |xv, sv, dv| *xv -= f * (*xv + sv - dv));
    }
}

/// Solves the smooth subproblem in closed form.
pub fn solve_ps(inp: &PsInput) -> Result<SubproblemResult> {
    check_ps(inp)?;
    let l = inp.l;
    let qx = inp.xtilde - inp.qx / l;
    let qs = inp.stilde - inp.qs / l;
    if inp.delta == 0.0 {
        let x = (inp.d - &qs + &qx) * 0.5;
        let s = inp.d - &x;
        return Ok(SubproblemResult { x, s, theta: 0.0 });
    }
    let nr = residual_norm(&qx, &qs, inp.d);
    let theta = (0.5 * l * (nr / inp.delta - 1.0)).max(0.0);
    if theta == 0.0 {
        return Ok(SubproblemResult { x: qx, s: qs, theta });
    }
    let a = theta / (l + 2.0 * theta);
    let b = (l + theta) / (l + 2.0 * theta);
    let mut x = (inp.d - &qs) * a + &qx * b;
    let s = (inp.d - &qx) * a + &qs * b;
    enforce_ball(&mut x, &s, inp.d, inp.delta);
    Ok(SubproblemResult { x, s, theta })
}

pub fn ps_kkt(res: &SubproblemResult, inp: &PsInput) -> KktReport {
    let r = &res.x + &res.s - inp.d;
    let rn = r.norm();
    let (gx, gs) = if inp.delta == 0.0 {
        // equality constraint: both blocks must imply the same multiplier
        let wx = (&res.x - inp.xtilde) * inp.l + inp.qx;
        let ws = (&res.s - inp.stilde) * inp.l + inp.qs;
        let w = (&wx + &ws) * 0.5;
        (wx - &w, ws - w)
    } else {
        (
            (&res.x - inp.xtilde) * inp.l + &r * res.theta + inp.qx,
            (&res.s - inp.stilde) * inp.l + &r * res.theta + inp.qs,
        )
    };
    let (primal_excess, complementarity) = ball_terms(rn, res.theta, inp.delta);
    KktReport {
        stationarity_x: gx.norm(),
        stationarity_s: gs.norm(),
        primal_excess,
        complementarity,
        dual_sign: (-res.theta).max(0.0),
    }
}

fn ball_terms(rn: f64, theta: f64, delta: f64) -> (f64, f64) {
    if delta == 0.0 {
        (rn, 0.0)
    } else {
        ((rn - delta).max(0.0), (theta * (rn - delta)).abs())
    }
}

/// `||min(xi/theta, rho a/(rho + theta))||_F`, with `phi(0) = ||a||_F`.
pub fn phi(theta: f64, a: &[f64], rho: f64, xi: f64) -> f64 {
    if theta == 0.0 {
        return a.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let cap = xi / theta;
    let f = rho / (rho + theta);
    a.iter()
        .map(|&v| {
            let m = cap.min(f * v);
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

/// Unique root `theta > 0` of `phi(theta) = delta`, or 0 when
/// `||a||_F <= delta`.
///
/// Works in `t = 1/theta`. Entry `i` sits at its cap `xi t` exactly when
/// `t <= a_i/xi - 1/rho`, so sorting these breakpoints splits the axis into
/// intervals on which `phi^2` has a fixed algebraic form. Prefix sums locate
/// the interval containing the root, which is then solved there.
pub fn solve_theta_star(a: &[f64], rho: f64, xi: f64, delta: f64) -> Result<f64> {
    solve_theta_star_with(a, rho, xi, delta, ThetaMethod::Bracketed)
}

pub fn solve_theta_star_with(
    a: &[f64],
    rho: f64,
    xi: f64,
    delta: f64,
    method: ThetaMethod,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(SpcpError::NonPositiveDelta(delta));
    }
    let mut sorted: Vec<f64> = a.iter().map(|v| v.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in &sorted {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let total = prefix[n];
    if total.sqrt() <= delta {
        return Ok(0.0);
    }
    let inv_rho = 1.0 / rho;
    let bp = |i: usize| sorted[i] / xi - inv_rho;
    let d2 = delta * delta;
    // phi^2 at t when exactly j entries are uncapped
    let phi2 = |t: f64, j: usize| {
        let f = rho * t / (rho * t + 1.0);
        f * f * prefix[j] + (n - j) as f64 * xi * xi * t * t
    };

    // First positive breakpoint (in ascending order) at which phi >= delta.
    let mut t_lo = 0.0;
    let mut interval = None;
    let mut i = 0;
    while i < n {
        let t = bp(i);
        if t > 0.0 && t > t_lo {
            if phi2(t, i) >= d2 {
                interval = Some((t_lo, t, i));
                break;
            }
            t_lo = t;
        }
        // skip duplicates: the first occurrence already counted them as capped
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        i = j;
    }
    let (t_lo, t_hi, j) = match interval {
        Some(iv) => iv,
        None => {
            // every entry uncapped: rho t/(rho t + 1) ||a|| = delta
            let norm = total.sqrt();
            return Ok(rho * (norm / delta - 1.0));
        }
    };
    let c = (n - j) as f64;
    let p = prefix[j];
    let t = if p == 0.0 {
        (delta / (xi * c.sqrt())).clamp(t_lo, t_hi)
    } else {
        let root = match method {
            ThetaMethod::Quartic => quartic_root(p, c, rho, xi, delta, t_lo, t_hi),
            ThetaMethod::Bracketed => None,
        };
        root.unwrap_or_else(|| bracketed_root(p, c, rho, xi, delta, t_lo, t_hi))
    };
    Ok(1.0 / t)
}

/// `F(t) = (rho t/(rho t + 1))^2 P + c xi^2 t^2 - delta^2` and `F'(t)`.
fn interval_eq(t: f64, p: f64, c: f64, rho: f64, xi: f64, delta: f64) -> (f64, f64) {
    let g = rho * t + 1.0;
    let f = rho * t / g;
    let val = f * f * p + c * xi * xi * t * t - delta * delta;
    let der = 2.0 * f * p * rho / (g * g) + 2.0 * c * xi * xi * t;
    (val, der)
}

fn bracketed_root(p: f64, c: f64, rho: f64, xi: f64, delta: f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = interval_eq(t, p, c, rho, xi, delta);
        if f == 0.0 {
            return t;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let newton = t - f / df;
        let next = if df > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 1e-16 * t.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            t = next;
            break;
        }
        t = next;
    }
    t
}

fn quartic_root(p: f64, c: f64, rho: f64, xi: f64, delta: f64, lo: f64, hi: f64) -> Option<f64> {
    let d2 = delta * delta;
    let x2 = xi * xi;
    let roots = quartic_real_roots(
        c * x2 * rho * rho,
        2.0 * c * x2 * rho,
        c * x2 + rho * rho * p - d2 * rho * rho,
        -2.0 * d2 * rho,
        -d2,
    );
    let slack = 1e-8 * hi;
    let mut t = roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= lo - slack && *r <= hi + slack)
        .min_by(|a, b| {
            let fa = interval_eq(*a, p, c, rho, xi, delta).0.abs();
            let fb = interval_eq(*b, p, c, rho, xi, delta).0.abs();
            fa.total_cmp(&fb)
        })?
        .clamp(lo, hi);
    for _ in 0..3 {
        let (f, df) = interval_eq(t, p, c, rho, xi, delta);
        if df <= 0.0 {
            break;
        }
        t = (t - f / df).clamp(lo, hi);
    }
    let (f, _) = interval_eq(t, p, c, rho, xi, delta);
    (f.abs() <= 1e-10 * d2).then_some(t)
}

/// Solves the non-smooth subproblem in closed form.
pub fn solve_pns(inp: &PnsInput) -> Result<SubproblemResult> {
    solve_pns_with(inp, ThetaMethod::Bracketed)
}

pub fn solve_pns_with(inp: &PnsInput, method: ThetaMethod) -> Result<SubproblemResult> {
    check_pns(inp)?;
    let rho = inp.rho;
    let q = inp.xtilde - inp.q / rho;
    let b = inp.d - &q;
    if inp.delta == 0.0 {
        let tau = inp.xi / rho;
        let s = b.map(|v| soft(v, tau));
        let x = inp.d - &s;
        return Ok(SubproblemResult { x, s, theta: 0.0 });
    }
    let a: Vec<f64> = b.iter().map(|v| v.abs()).collect();
    let theta = solve_theta_star_with(&a, rho, inp.xi, inp.delta, method)?;
    if theta == 0.0 {
        let s = Matrix::zeros(q.nrows(), q.ncols());
        return Ok(SubproblemResult { x: q, s, theta });
    }
    let tau = inp.xi * (rho + theta) / (rho * theta);
    let s = b.map(|v| soft(v, tau));
    let w = theta / (rho + theta);
    let mut x = (inp.d - &s) * w + &q * (rho / (rho + theta));
    enforce_ball(&mut x, &s, inp.d, inp.delta);
    Ok(SubproblemResult { x, s, theta })
}

/// Distance of `g` from the l1 subdifferential at `s`, entrywise maximum.
fn l1_subgradient_gap(g: &Matrix, s: &Matrix) -> f64 {
    g.iter()
        .zip(s.iter())
        .map(|(&gv, &sv)| {
            if sv > 0.0 {
                (gv - 1.0).abs()
            } else if sv < 0.0 {
                (gv + 1.0).abs()
            } else {
                (gv.abs() - 1.0).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// `W = -Q + rho (Xt - X)`: the multiplier implied by stationarity in `X`.
fn implied_multiplier(res: &SubproblemResult, inp: &PnsInput) -> Matrix {
    (inp.xtilde - &res.x) * inp.rho - inp.q
}

pub fn pns_kkt(res: &SubproblemResult, inp: &PnsInput) -> KktReport {
    let r = &res.x + &res.s - inp.d;
    let rn = r.norm();
    let w = implied_multiplier(res, inp);
    // With delta = 0 the constraint is an equality and W is its multiplier.
    let (stat_x, mult) = if inp.delta == 0.0 {
        (0.0, w)
    } else {
        ((&w - &r * res.theta).norm(), &r * res.theta)
    };
    let g = mult / -inp.xi;
    let (primal_excess, complementarity) = ball_terms(rn, res.theta, inp.delta);
    KktReport {
        stationarity_x: stat_x,
        stationarity_s: l1_subgradient_gap(&g, &res.s),
        primal_excess,
        complementarity,
        dual_sign: (-res.theta).max(0.0),
    }
}

/// Returns `W* = -Q + rho (Xt - X*)`, the common block of a normal vector to the
/// feasible set at `(X*, S*)`, after checking `W* = theta (X* + S* - D)` and
/// `||W*||_F = theta delta`.
pub fn chi_subgradient_certificate(res: &SubproblemResult, inp: &PnsInput) -> Result<Matrix> {
    let w = implied_multiplier(res, inp);
    if inp.delta == 0.0 {
        return Ok(w);
    }
    let r = &res.x + &res.s - inp.d;
    let tol = 1e-8;
    let gap = (&w - &r * res.theta).norm();
    if gap > tol * (1.0 + w.norm()) {
        return Err(SpcpError::CertificateViolation(format!(
            "W differs from theta (X + S - D) by {gap:e}"
        )));
    }
    if res.theta > 0.0 {
        let gap = (w.norm() - res.theta * inp.delta).abs();
        if gap > tol * (1.0 + res.theta * inp.delta) {
            return Err(SpcpError::CertificateViolation(format!(
                "||W||_F differs from theta delta by {gap:e}"
            )));
        }
    }
    Ok(w)
}

/// Smallest-l1 `S` with `||X + S - D||_F <= delta` for a fixed `X`.
///
/// Equals `soft(D - X, tau)` with `tau` chosen so that
/// `||min(|D - X|, tau)||_F = delta`.
pub fn l1_feasible_completion(x: &Matrix, d: &Matrix, delta: f64) -> Matrix {
    let b = d - x;
    let norm = b.norm();
    if norm <= delta {
        return Matrix::zeros(b.nrows(), b.ncols());
    }
    if delta == 0.0 {
        return b;
    }
    let mut a: Vec<f64> = b.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    // find j with sum_{i<j} a_i^2 + (n - j) tau^2 = delta^2 and tau in [a_{j-1}, a_j]
    let d2 = delta * delta;
    let mut acc = 0.0;
    let mut tau = 0.0;
    for j in 0..n {
        let at_aj = acc + (n - j) as f64 * a[j] * a[j];
        if at_aj >= d2 {
            tau = ((d2 - acc).max(0.0) / (n - j) as f64).sqrt();
            break;
        }
        acc += a[j] * a[j];
    }
    let mut s = b.map(|v| soft(v, tau));
    // guard the ball in floating point by shrinking the threshold
    let mut t = tau;
    for _ in 0..8 {
        if residual_norm(x, &s, d) <= delta {
            break;
        }
        t *= 1.0 - 1e-14;
        s = b.map(|v| soft(v, t));
    }
    s
}
