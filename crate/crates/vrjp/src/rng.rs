//! Seed derivation and the two exact scalar samplers everything else is
//! built from.
//!
//! All randomness in the crate flows through [`ChaCha8Rng`] streams derived
//! deterministically from a master seed and a textual label, so every
//! experiment is reproducible bit-for-bit from `(master seed, label,
//! index)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};

/// splitmix64 step; the standard 64-bit finalizer used to decorrelate seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent RNG stream from a master seed, a label and an
/// index.
///
/// The label is folded byte-wise into the state so that distinct test or
/// worker names get decorrelated streams; `index` separates replicates of
/// the same labelled task.
pub fn stream(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut state = master;
    let _ = splitmix64(&mut state);
    for &b in label.as_bytes() {
        state ^= u64::from(b);
        let _ = splitmix64(&mut state);
    }
    state ^= index.wrapping_mul(0xA076_1D64_78BD_642F);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Draws from Gamma(1/2, rate 1/2) as the square of a standard normal.
///
/// This is the chi-squared law with one degree of freedom; squaring a
/// normal is exact and constant-time, unlike generic Gamma rejection
/// samplers at shape 1/2.
pub fn gamma_half_rate_half<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * z
}

/// Draws from Gamma(1/2, rate 1).
pub fn gamma_half_rate_one<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    0.5 * gamma_half_rate_half(rng)
}

/// Draws an inverse-Gaussian variable with the given mean and shape via the
/// Michael–Schucany–Haas transform.
pub fn inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, shape: f64) -> f64 {
    let ig = InverseGaussian::new(mean, shape).expect("inverse-Gaussian parameters");
    ig.sample(rng)
}

/// Density of the inverse-Gaussian law with mean `mu` and shape `lambda`.
pub fn inverse_gaussian_pdf(x: f64, mu: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (lambda / (2.0 * std::f64::consts::PI * x.powi(3))).sqrt()
        * (-lambda * (x - mu).powi(2) / (2.0 * mu * mu * x)).exp()
}
