//! Counter-based deterministic randomness.
//!
//! Nothing here keeps state: every draw is a pure function of a key, so a
//! pixel's noise does not depend on iteration order, tiling, or worker count.
//! Keys are mixed with SplitMix64 finalizers.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `value` into `key`. Not commutative, so `mix(mix(k, a), b)` and
/// `mix(mix(k, b), a)` differ.
#[inline]
pub fn mix(key: u64, value: u64) -> u64 {
    splitmix64(key ^ splitmix64(value.wrapping_add(0x6A09_E667_F3BC_C909)))
}

/// Stable 64-bit hash of a byte string (FNV-1a, then finalized).
pub fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(h)
}

/// Uniform in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw number `counter` under `key`.
#[inline]
pub fn uniform(key: u64, counter: u64) -> f64 {
    unit_f64(mix(key, counter))
}

/// Standard normal draw number `counter` under `key` (Box-Muller).
#[inline]
pub fn standard_normal(key: u64, counter: u64) -> f64 {
    let base = mix(key, counter);
    // u1 in (0, 1] keeps the log finite.
    let u1 = 1.0 - unit_f64(splitmix64(base));
    let u2 = unit_f64(splitmix64(base ^ GOLDEN));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Key for the noise sample at `(pixel, channel)` under `seed`.
#[inline]
pub fn sample_key(seed: u64, pixel: usize, channel: usize) -> u64 {
    mix(seed, (pixel as u64) * 3 + channel as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_moments() {
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|i| uniform(42, i)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 0.002, "var {var}");
        assert!(xs.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn normal_moments() {
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|i| standard_normal(7, i)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let kurt = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64 / (var * var);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.015, "var {var}");
        assert!((kurt - 3.0).abs() < 0.08, "kurtosis {kurt}");
    }

    #[test]
    fn keys_are_order_sensitive_and_stable() {
        assert_ne!(mix(mix(1, 2), 3), mix(mix(1, 3), 2));
        assert_eq!(hash_bytes(b"item-7"), hash_bytes(b"item-7"));
        assert_ne!(hash_bytes(b"item-7"), hash_bytes(b"item-8"));
        assert_ne!(sample_key(1, 0, 1), sample_key(1, 1, 0));
    }
}
