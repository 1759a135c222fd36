//! SVD access and the elementary proximal and gradient maps.

use nalgebra::linalg::SVD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SpcpError};
use crate::model::{validate_matrix, Matrix, SvdMode};

/// Thin SVD factors `A ~ U diag(sigma) V^T` with `sigma` nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdTriple {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Number of singular values strictly above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.sigma.iter().take_while(|&&s| s > threshold).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        compose(&self.u, &self.sigma, &self.v)
    }

    /// `U diag(w) V^T`, skipping zero weights.
    pub fn with_values(&self, w: &[f64]) -> Matrix {
        compose(&self.u, w, &self.v)
    }

    fn truncate(mut self, k: usize) -> Self {
        if k < self.sigma.len() {
            self.sigma.truncate(k);
            self.u = self.u.columns(0, k).into_owned();
            self.v = self.v.columns(0, k).into_owned();
        }
        self
    }
}

fn compose(u: &Matrix, w: &[f64], v: &Matrix) -> Matrix {
    let (m, n) = (u.nrows(), v.nrows());
    let idx: Vec<usize> = (0..w.len()).filter(|&i| w[i] != 0.0).collect();
    if idx.is_empty() {
        return Matrix::zeros(m, n);
    }
    let mut us = u.select_columns(idx.iter());
    for (j, &i) in idx.iter().enumerate() {
        us.column_mut(j).scale_mut(w[i]);
    }
    let vs = v.select_columns(idx.iter());
    us * vs.transpose()
}

fn iteration_cap(a: &Matrix) -> usize {
    2000 + 200 * a.nrows().min(a.ncols())
}

/// Full thin SVD, `k = min(m, n)`.
pub fn svd_full(a: &Matrix) -> Result<SvdTriple> {
    validate_matrix(a)?;
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, iteration_cap(a))
        .ok_or(SpcpError::ConvergenceFailure)?;
    let u = svd.u.ok_or(SpcpError::ConvergenceFailure)?;
    let v = svd.v_t.ok_or(SpcpError::ConvergenceFailure)?.transpose();
    let sigma = svd.singular_values.iter().copied().collect();
    Ok(SvdTriple { u, sigma, v })
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    validate_matrix(a)?;
    let svd = SVD::try_new(a.clone(), false, false, f64::EPSILON, iteration_cap(a))
        .ok_or(SpcpError::ConvergenceFailure)?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn nuclear_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Predicts how many singular values the next thresholding step keeps.
///
/// Starts at `ceil(init_frac * min(m, n))`. After each decomposition with
/// `r` values above threshold: if `r` is below the prediction the next one is
/// `r + 1`, otherwise `r + ceil(grow_frac * min(m, n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankPredictor {
    pub predicted_rank: usize,
    /// Effective rank seen by the last decomposition.
    pub history: Option<usize>,
    min_dim: usize,
    step: usize,
}

impl RankPredictor {
    pub fn new(m: usize, n: usize) -> Self {
        Self::with_fractions(m, n, 0.1, 0.05)
    }

    pub fn with_fractions(m: usize, n: usize, init_frac: f64, grow_frac: f64) -> Self {
        let min_dim = m.min(n).max(1);
        let start = ((init_frac * min_dim as f64).ceil() as usize).clamp(1, min_dim);
        let step = ((grow_frac * min_dim as f64).ceil() as usize).max(1);
        Self {
            predicted_rank: start,
            history: None,
            min_dim,
            step,
        }
    }

    /// Starts from an explicit prediction, clamped to `[1, min(m, n)]`.
    pub fn with_rank(m: usize, n: usize, rank: usize) -> Self {
        let mut p = Self::new(m, n);
        p.predicted_rank = rank.clamp(1, p.min_dim);
        p
    }

    pub fn observe(&mut self, r_eff: usize) {
        self.history = Some(r_eff);
        self.predicted_rank = if r_eff < self.predicted_rank {
            r_eff + 1
        } else {
            r_eff + self.step
        }
        .clamp(1, self.min_dim);
    }

    fn grown(&self, k: usize) -> usize {
        (k + self.step.max(k)).min(self.min_dim)
    }
}

const SUBSPACE_MAX_ITERS: usize = 20;
const RESIDUAL_TOL: f64 = 1e-11;

enum Subspace {
    Done(SvdTriple),
    Grow,
    Stalled,
}

/// Leading singular triplets of `a` containing every singular value above
/// `threshold`.
///
/// Uses block subspace iteration with Rayleigh-Ritz extraction. If the
/// predicted rank turns out too small the block grows and the computation
/// restarts. Once the rank exceeds a quarter of `min(m, n)`, or the iteration
/// stalls, it falls back to [`svd_full`].
pub fn svd_partial(a: &Matrix, pred: &mut RankPredictor, threshold: f64) -> Result<SvdTriple> {
    svd_partial_seeded(a, pred, threshold, 0)
}

/// [`svd_partial`] with a caller-chosen seed for the random start block.
pub fn svd_partial_seeded(a: &Matrix, pred: &mut RankPredictor, threshold: f64, seed: u64) -> Result<SvdTriple> {
    validate_matrix(a)?;
    let min_dim = a.nrows().min(a.ncols());
    let mut k = pred.predicted_rank.clamp(1, min_dim);
    let triple = loop {
        if 4 * k >= min_dim || min_dim <= 8 {
            break svd_full(a)?;
        }
        match subspace_svd(a, k, threshold, seed) {
            Subspace::Done(t) => break t,
            Subspace::Grow => k = pred.grown(k),
            Subspace::Stalled => break svd_full(a)?,
        }
    };
    let r_eff = triple.count_above(threshold);
    pred.predicted_rank = k;
    pred.observe(r_eff);
    let keep = (r_eff + 1).max(k).min(triple.len());
    Ok(triple.truncate(keep))
}

fn orthonormalize(a: Matrix) -> Matrix {
    a.qr().q()
}

fn subspace_svd(a: &Matrix, k: usize, threshold: f64, seed: u64) -> Subspace {
    let (m, n) = a.shape();
    let b = (k + (k / 4).max(5)).min(m.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5350_4350 ^ ((m as u64) << 32) ^ n as u64);
    let omega = Matrix::from_fn(n, b, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(a * omega);
    for sweep in 0..SUBSPACE_MAX_ITERS {
        let w = orthonormalize(a.tr_mul(&q));
        q = orthonormalize(a * w);
        if !(sweep < 2 || sweep % 3 == 0 || sweep + 1 == SUBSPACE_MAX_ITERS) {
            continue;
        }
        // Rayleigh-Ritz on span(q).
        let bt = a.tr_mul(&q); // n x b, equals (q^T a)^T
        let Some(small) = SVD::try_new(bt, true, true, f64::EPSILON, 10_000) else {
            return Subspace::Stalled;
        };
        let (Some(vb), Some(ubt)) = (small.u, small.v_t) else {
            return Subspace::Stalled;
        };
        let mut order: Vec<usize> = (0..small.singular_values.len()).collect();
        order.sort_by(|&i, &j| small.singular_values[j].total_cmp(&small.singular_values[i]));
        let sigma: Vec<f64> = order.iter().map(|&i| small.singular_values[i]).collect();
        if sigma.len() < k {
            return Subspace::Stalled;
        }
        let ub = ubt.transpose().select_columns(order.iter());
        let v = vb.select_columns(order.iter());
        let u = &q * ub;
        if sigma[k - 1] > threshold {
            // Ritz values never exceed the true ones, so the k-th true value is
            // above the threshold as well.
            return Subspace::Grow;
        }
        let av = a * &v;
        let scale = sigma[0].max(f64::MIN_POSITIVE);
        let res = |i: usize| (av.column(i) - u.column(i) * sigma[i]).norm();
        let wanted = sigma.iter().take(k).take_while(|&&s| s > threshold).count();
        let leading_ok = (0..wanted).all(|i| res(i) <= RESIDUAL_TOL * scale);
        let r = res(k - 1);
        let sentinel_ok = sigma[k - 1] + r <= threshold || r <= RESIDUAL_TOL * scale;
        if leading_ok && sentinel_ok {
            return Subspace::Done(SvdTriple { u, sigma, v }.truncate(k));
        }
    }
    Subspace::Stalled
}

/// Counts decompositions and routes them to the full or partial backend.
#[derive(Debug, Clone)]
pub struct SvdEngine {
    mode: SvdMode,
    predictor: RankPredictor,
    count: usize,
    seed: u64,
}

impl SvdEngine {
    pub fn new(mode: SvdMode, m: usize, n: usize) -> Self {
        Self::with_predictor(mode, RankPredictor::new(m, n))
    }

    pub fn with_predictor(mode: SvdMode, predictor: RankPredictor) -> Self {
        Self {
            mode,
            predictor,
            count: 0,
            seed: 0,
        }
    }

    /// Seed of the partial SVD start blocks.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn predictor(&self) -> &RankPredictor {
        &self.predictor
    }

    /// Triplets covering every singular value above `threshold`; the full set
    /// in `Full` mode.
    pub fn decompose(&mut self, a: &Matrix, threshold: f64) -> Result<SvdTriple> {
        self.count += 1;
        match self.mode {
            SvdMode::Full => svd_full(a),
            SvdMode::PartialWithPrediction => svd_partial_seeded(a, &mut self.predictor, threshold, self.seed),
        }
    }

    /// Singular value thresholding; also returns `||svt(a, tau)||_*`.
    pub fn svt(&mut self, a: &Matrix, tau: f64) -> Result<(Matrix, f64)> {
        let t = self.decompose(a, tau)?;
        let w: Vec<f64> = t.sigma.iter().map(|s| (s - tau).max(0.0)).collect();
        let nuc = w.iter().sum();
        Ok((t.with_values(&w), nuc))
    }

    /// `grad f_mu(x)` computed as `(x - svt(x, mu)) / mu`.
    pub fn grad_f_mu(&mut self, x: &Matrix, mu: f64) -> Result<Matrix> {
        let (shrunk, _) = self.svt(x, mu)?;
        Ok((x - shrunk) / mu)
    }

    /// Minimizer of `f_mu(X) + <Q, X - Xt> + rho/2 ||X - Xt||_F^2` together
    /// with the gradient of `f_mu` there, from one decomposition.
    pub fn prox_smoothed_nuclear(
        &mut self,
        xtilde: &Matrix,
        q: &Matrix,
        rho: f64,
        mu: f64,
    ) -> Result<(Matrix, Matrix)> {
        let w = xtilde - q / rho;
        let tau = mu + 1.0 / rho;
        let (shrunk, _) = self.svt(&w, tau)?;
        let c = rho * mu / (1.0 + rho * mu);
        let x = &w * c + &shrunk / (1.0 + rho * mu);
        let grad = (&x - shrunk) / mu;
        Ok((x, grad))
    }
}

/// `argmin_X tau ||X||_* + 1/2 ||X - A||_F^2`.
pub fn svt(a: &Matrix, tau: f64) -> Result<Matrix> {
    let t = svd_full(a)?;
    let w: Vec<f64> = t.sigma.iter().map(|s| (s - tau).max(0.0)).collect();
    Ok(t.with_values(&w))
}

/// Entrywise `sign(a) * max(|a| - tau, 0)`.
pub fn soft_threshold(a: &Matrix, tau: f64) -> Matrix {
    a.map(|v| soft(v, tau))
}

#[inline]
pub(crate) fn soft(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Huber function: `s^2/(2 mu)` for `|s| <= mu`, else `|s| - mu/2`.
pub fn huber(s: f64, mu: f64) -> f64 {
    let a = s.abs();
    if a <= mu {
        a * a / (2.0 * mu)
    } else {
        a - mu / 2.0
    }
}

/// Smoothed nuclear norm: Huber applied to the singular values.
pub fn f_mu(x: &Matrix, mu: f64) -> Result<f64> {
    Ok(f_mu_from_sigma(&singular_values(x)?, mu))
}

pub fn f_mu_from_sigma(sigma: &[f64], mu: f64) -> f64 {
    sigma.iter().map(|&s| huber(s, mu)).sum()
}

/// `U diag(min(sigma/mu, 1)) V^T`.
pub fn grad_f_mu(x: &Matrix, mu: f64) -> Result<Matrix> {
    let t = svd_full(x)?;
    let w: Vec<f64> = t.sigma.iter().map(|&s| (s / mu).min(1.0)).collect();
    Ok(t.with_values(&w))
}

/// Smoothed l1 norm: entrywise Huber.
pub fn g_nu(s: &Matrix, nu: f64) -> f64 {
    s.iter().map(|&v| huber(v, nu)).sum()
}

/// Entrywise `clamp(s/nu, -1, 1)`.
pub fn grad_g_nu(s: &Matrix, nu: f64) -> Matrix {
    s.map(|v| (v / nu).clamp(-1.0, 1.0))
}

/// `U diag(sigma - sigma / max(rho sigma, 1 + rho mu)) V^T` for the SVD of
/// `Xt - Q/rho`.
pub fn prox_smoothed_nuclear(xtilde: &Matrix, q: &Matrix, rho: f64, mu: f64) -> Result<Matrix> {
    let w = xtilde - q / rho;
    let t = svd_full(&w)?;
    let vals: Vec<f64> = t
        .sigma
        .iter()
        .map(|&s| if s > 0.0 { s - s / (rho * s).max(1.0 + rho * mu) } else { 0.0 })
        .collect();
    Ok(t.with_values(&vals))
}
