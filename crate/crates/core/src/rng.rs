//! Seeded, platform-independent random streams.
//!
//! Every random quantity in an experiment is drawn from a ChaCha8 generator
//! keyed by the experiment seed, with a separate stream per purpose so that
//! changing how many draws one consumer makes never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Orthogonal eigenbasis of a synthesized problem.
    Basis = 1,
    /// Initial point `x0`.
    Init = 2,
    /// Interior eigenvalues of a random spectrum.
    Spectrum = 3,
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Draws `n` components independently from uniform `[0, 1)`.
pub fn uniform01(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, Stream::Init);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// An ascending spectrum with `λ_1 = 1`, `λ_n = kappa` and log-uniform interior.
///
/// Returns `None` when `n == 0`, `kappa < 1`, or `n == 1` with `kappa != 1`.
pub fn random_spectrum(n: usize, kappa: f64, seed: u64) -> Option<Vec<f64>> {
    if n == 0 || !(kappa >= 1.0) || !kappa.is_finite() {
        return None;
    }
    if n == 1 {
        return (kappa == 1.0).then(|| vec![1.0]);
    }
    let mut rng = stream(seed, Stream::Spectrum);
    let log_kappa = kappa.ln();
    let mut lam = Vec::with_capacity(n);
    lam.push(1.0);
    lam.extend((0..n - 2).map(|_| (rng.random::<f64>() * log_kappa).exp().clamp(1.0, kappa)));
    lam.push(kappa);
    lam.sort_by(f64::total_cmp);
    Some(lam)
}
