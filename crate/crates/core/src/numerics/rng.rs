use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Matrix;
use crate::error::{contract, domain, Result};

/// Deterministic random source keyed by `(seed, stream)`.
///
/// Backed by ChaCha8, a counter-based generator: each stream id selects an
/// independent keystream, so per-sample or per-point states can be derived
/// in any order and on any thread without changing the draws. Gaussian
/// variates use the trigonometric Box-Muller transform with the second value of
/// each pair cached.
///
/// The state is deliberately not `Clone`; consumers that need parallel
/// sources derive them with [`RngState::derive`].
#[derive(Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    core: ChaCha8Rng,
    spare: Option<f64>,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut core = ChaCha8Rng::seed_from_u64(seed);
        core.set_stream(stream);
        Self {
            seed,
            stream,
            core,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh state on the same seed with a different stream id.
    pub fn derive(&self, stream: u64) -> Self {
        Self::new(self.seed, stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in `0..n`, rejection-sampled so there is no modulo bias.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal draw (Box-Muller).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Shuffles the first `k` positions of `items` into a uniform random
    /// `k`-subset (partial Fisher-Yates).
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], k: usize) {
        let n = items.len();
        for i in 0..k.min(n) {
            let j = i + self.below(n - i);
            items.swap(i, j);
        }
    }
}

/// Vector of independent Bernoulli(p) draws encoded as 0.0 / 1.0.
pub fn sample_bernoulli_vector(p: f64, dim: usize, rng: &mut RngState) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("bernoulli probability {p} outside [0, 1]")));
    }
    if dim == 0 {
        return Err(contract("bernoulli vector needs dim >= 1"));
    }
    Ok((0..dim)
        .map(|_| if rng.bernoulli(p) { 1.0 } else { 0.0 })
        .collect())
}

/// Matrix of i.i.d. `N(mean, std^2)` entries. `std = 0` yields exactly `mean`.
pub fn sample_gaussian_matrix(
    rows: usize,
    cols: usize,
    mean: f64,
    std: f64,
    rng: &mut RngState,
) -> Result<Matrix> {
    if !(std >= 0.0) {
        return Err(domain(format!("negative standard deviation {std}")));
    }
    let data = (0..rows * cols).map(|_| mean + std * rng.normal()).collect();
    Matrix::from_vec(rows, cols, data)
}
