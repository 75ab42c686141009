//! Small numeric helpers shared across the crate: stable log-sum-exp forms,
//! the Gaussian tail function, and deterministic seed derivation.

/// Speed of light in vacuum, m/s (exact by definition).
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Numerically stable `log Σ exp(x_i)` via max subtraction.
///
/// Returns `-inf` for an empty slice (the empty sum).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// `log(exp(t) + exp(-t)) = log(2 cosh t)`, stable for large |t|.
pub fn log2cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Gaussian right-tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Derives a child seed from a master seed and a path of indices.
///
/// Uses a splitmix64-style finalizer folded over the parts so that
/// per-trial streams are independent of worker scheduling and stable across
/// releases. Not cryptographic; collision-resistant enough for Monte Carlo
/// stream separation.
pub fn mix_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = master ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h = splitmix64(h.wrapping_add(p).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
