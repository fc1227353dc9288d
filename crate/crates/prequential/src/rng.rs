//! Deterministic random streams for the simulation lab and Monte-Carlo
//! tables.
//!
//! Everything stochastic in this crate draws from one fixed scheme so that
//! results are reproducible bit-for-bit across runs, platforms and thread
//! counts:
//!
//! * replication `r` of a job with user seed `s` uses a [`ChaCha8Rng`] whose
//!   256-bit key is expanded from `(s, r)` with SplitMix64 ([`mix64`]);
//! * uniforms come from the top 53 bits of `next_u64`, centered into the
//!   open interval (0, 1);
//! * Gaussians are produced by applying the standard normal quantile
//!   function to such a uniform (no rejection steps, so draw counts are
//!   predictable).
//!
//! Parallel drivers hand each replication its own stream id instead of
//! sharing a sequential generator, which keeps output independent of the
//! worker count.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

/// SplitMix64 finalizer. Maps `(seed, stream)` to a well-mixed 64-bit word;
/// successive `stream` values give statistically independent outputs.
pub fn mix64(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// ChaCha8 generator for stream `stream` of user seed `seed`.
///
/// The key is four SplitMix64 words chained off `mix64(seed, stream)`, so
/// distinct `(seed, stream)` pairs get unrelated keys.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let base = mix64(seed, stream);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&mix64(base, i as u64 + 1).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw in the open interval (0, 1) with 53-bit resolution.
pub fn u01(rng: &mut impl RngCore) -> f64 {
    // Midpoint placement keeps 0 and 1 unreachable, so inverse-CDF
    // transforms never see a boundary.
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw via the inverse CDF applied to [`u01`].
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    normal_quantile(u01(rng))
}

/// Standard normal quantile function Φ⁻¹.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Standard normal CDF Φ.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..8).map(|_| stream_rng(42, 0).next_u64()).collect();
        assert!(a.iter().all(|&x| x == a[0]));

        let mut r0 = stream_rng(42, 0);
        let mut r1 = stream_rng(42, 1);
        let same = (0..64).filter(|_| r0.next_u64() == r1.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn u01_stays_in_open_interval() {
        let mut rng = stream_rng(7, 0);
        for _ in 0..10_000 {
            let u = u01(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-9, 0.01, 0.25, 0.5, 0.9, 0.975, 1.0 - 1e-9] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-9, "p = {p}");
        }
        assert_eq!(normal_quantile(0.5), 0.0);
    }

    #[test]
    fn standard_normal_moments() {
        let mut rng = stream_rng(123, 5);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            s1 += z;
            s2 += z * z;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
    }
}
