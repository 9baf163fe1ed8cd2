//! Random draws with a fixed consumption contract: every sample takes exactly one `next_u64`.

use rand_core::RngCore;

/// Name of the generator used for runs, recorded in manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Seedable generator used throughout the crate.
pub type RunRng = rand_chacha::ChaCha8Rng;

/// Uniform draw in `[0, 1)` with 53 bits of precision.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Samples an index from a probability vector by inverse CDF.
///
/// Rounding at the top of the CDF falls back to the last index with positive weight.
pub fn categorical<R: RngCore + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u = uniform(rng);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::SeedableRng;

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = RunRng::seed_from_u64(3);
        for _ in 0..10_000 {
            let u = uniform(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn categorical_skips_zero_mass() {
        let mut rng = RunRng::seed_from_u64(9);
        for _ in 0..1000 {
            assert_eq!(categorical(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }
}
