//! Seeded random instances `D = X0 + S0 + zeta0`.
//!
//! Draw order from a ChaCha8 stream seeded with `seed`: the `m x r` factor
//! `U`, the `n x r` factor `V` (both column-major, standard normal), the
//! support (uniform without replacement), the sparse values
//! (`U[-100, 100]`, in increasing support order), then the noise
//! (`varrho * N(0, 1)`, column-major).

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SpcpError};
use crate::model::{default_xi, GroundTruth, Matrix, SpcpProblem};

/// Magnitude bound of the sparse entries.
pub const SPARSE_BOUND: f64 = 100.0;

/// How the noise radius is derived from `varrho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaRule {
    /// `sqrt(n + sqrt(8 n)) * varrho` with `n` the column count.
    #[default]
    Dimension,
    /// `sqrt(N + sqrt(8 N)) * varrho` with `N = m n` the entry count; bounds
    /// `||zeta0||_F` with probability about 0.98.
    EntryCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    /// Column count; also the row count unless `rows` is set.
    pub n: usize,
    pub rows: Option<usize>,
    pub c_r: f64,
    pub c_p: f64,
    pub snr_db: f64,
    pub seed: u64,
    pub delta_rule: DeltaRule,
}

impl GenParams {
    pub fn new(n: usize, c_r: f64, c_p: f64, snr_db: f64, seed: u64) -> Self {
        Self { n, rows: None, c_r, c_p, snr_db, seed, delta_rule: DeltaRule::Dimension }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.unwrap_or(self.n), self.n)
    }

    /// `ceil(c_r * min(m, n))`.
    pub fn rank(&self) -> usize {
        let (m, n) = self.shape();
        ceil_count(self.c_r * m.min(n) as f64)
    }

    /// `ceil(c_p * m * n)`.
    pub fn sparsity(&self) -> usize {
        let (m, n) = self.shape();
        ceil_count(self.c_p * (m * n) as f64)
    }

    pub fn varrho(&self) -> f64 {
        snr_to_varrho(self.n, self.c_r, self.c_p, self.snr_db)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.shape();
        let bad = |msg: String| Err(SpcpError::InvalidConfig(msg));
        if m == 0 || n == 0 {
            return bad("matrix dimensions must be positive".into());
        }
        if !(self.c_r > 0.0 && self.c_r <= 1.0) {
            return bad(format!("rank ratio must lie in (0, 1], got {}", self.c_r));
        }
        if !(self.c_p >= 0.0 && self.c_p <= 1.0) {
            return bad(format!("sparsity ratio must lie in [0, 1], got {}", self.c_p));
        }
        if !self.snr_db.is_finite() {
            return bad(format!("SNR must be finite, got {}", self.snr_db));
        }
        if self.rank() < 1 || self.sparsity() > m * n {
            return bad("rank or sparsity count out of range".into());
        }
        Ok(())
    }
}

/// `ceil` that ignores representation error just above an integer.
fn ceil_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Noise scale giving the requested SNR:
/// `sqrt((c_r n + c_p 100^2/3) / 10^(snr/10))`.
pub fn snr_to_varrho(n: usize, c_r: f64, c_p: f64, snr_db: f64) -> f64 {
    let signal = c_r * n as f64 + c_p * SPARSE_BOUND * SPARSE_BOUND / 3.0;
    (signal / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Inverse of [`snr_to_varrho`].
pub fn varrho_to_snr(n: usize, c_r: f64, c_p: f64, varrho: f64) -> f64 {
    let signal = c_r * n as f64 + c_p * SPARSE_BOUND * SPARSE_BOUND / 3.0;
    10.0 * (signal / (varrho * varrho)).log10()
}

/// `sqrt(n + sqrt(8 n)) * varrho`.
pub fn default_delta(n: usize, varrho: f64) -> f64 {
    let n = n as f64;
    (n + (8.0 * n).sqrt()).sqrt() * varrho
}

pub fn delta_for(rule: DeltaRule, m: usize, n: usize, varrho: f64) -> f64 {
    match rule {
        DeltaRule::Dimension => default_delta(n, varrho),
        DeltaRule::EntryCount => default_delta(m * n, varrho),
    }
}

pub fn generate_instance(g: &GenParams) -> Result<(SpcpProblem, GroundTruth)> {
    g.validate()?;
    let (m, n) = g.shape();
    let r = g.rank();
    let p = g.sparsity();
    let varrho = g.varrho();
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let u = Matrix::from_fn(m, r, |_, _| rng.sample(StandardNormal));
    let v = Matrix::from_fn(n, r, |_, _| rng.sample(StandardNormal));
    let x0 = &u * v.transpose();
    let mut support = index::sample(&mut rng, m * n, p).into_vec();
    support.sort_unstable();
    let mut s0 = Matrix::zeros(m, n);
    for &i in &support {
        s0[i] = rng.random_range(-SPARSE_BOUND..=SPARSE_BOUND);
    }
    let zeta0 = Matrix::from_fn(m, n, |_, _| varrho * rng.sample::<f64, _>(StandardNormal));
    let d = &x0 + &s0 + &zeta0;
    let delta = delta_for(g.delta_rule, m, n, varrho);
    let problem = SpcpProblem::with_xi(d, delta, default_xi(m, n));
    let truth = GroundTruth { x0, s0, zeta0, support, rank0: r, varrho };
    Ok((problem, truth))
}
