//! Gaussian-approximation reliability estimates for polar bit-channels.

use crate::{Error, Result};

const A: f64 = -0.4527;
const B: f64 = 0.86;
const C: f64 = 0.0218;
const SPLIT: f64 = 10.0;

/// `ln φ(x)` for the Chung approximation of `φ(x) = 1 − E[tanh(L/2)]`, `L ~ N(x, 2x)`.
pub fn ln_phi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < SPLIT {
        (A * x.powf(B) + C).min(0.0)
    } else {
        0.5 * (std::f64::consts::PI / x).ln() - x / 4.0 + (1.0 - 10.0 / (7.0 * x)).ln()
    }
}

/// Inverse of [`ln_phi`].
pub fn ln_phi_inv(l: f64) -> f64 {
    if l >= 0.0 {
        return 0.0;
    }
    if l >= A * SPLIT.powf(B) + C {
        return ((l - C) / A).powf(1.0 / B);
    }
    // Large-mean branch: monotone decreasing, solve by safeguarded Newton.
    let g = |x: f64| ln_phi(x) - l;
    let (mut lo, mut hi) = (SPLIT, SPLIT.max(-8.0 * l));
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut x = (-4.0 * l).clamp(lo, hi);
    for _ in 0..60 {
        let gx = g(x);
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = -0.5 / x - 0.25 + (10.0 / (7.0 * x * x)) / (1.0 - 10.0 / (7.0 * x));
        let mut next = x - gx / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-12 * x {
            return next;
        }
        x = next;
    }
    x
}

/// Mean of the check-node output for independent inputs of means `a` and `b`.
pub fn check_mean(a: f64, b: f64) -> f64 {
    if a.is_infinite() {
        return b;
    }
    if b.is_infinite() {
        return a;
    }
    let (la, lb) = (ln_phi(a), ln_phi(b));
    let (hi, lo) = if la >= lb { (la, lb) } else { (lb, la) };
    // φ_out = 1 − (1 − φa)(1 − φb) = φa + φb − φa·φb
    let l = hi + (1.0 + (lo - hi).exp() - lo.exp()).ln();
    ln_phi_inv(l)
}

/// Propagates per-position LLR means through the polar transform.
///
/// `means[j]` is the mean at position `j` of `x = u·F^⊗n` (no bit reversal);
/// `f64::INFINITY` marks a known position. Returns the mean for each `u_i`.
pub fn bit_channel_means(means: &[f64]) -> Vec<f64> {
    let n = means.len();
    if n == 1 {
        return means.to_vec();
    }
    let h = n / 2;
    let upper: Vec<f64> = (0..h).map(|j| check_mean(means[j], means[j + h])).collect();
    let lower: Vec<f64> = (0..h).map(|j| means[j] + means[j + h]).collect();
    let mut out = bit_channel_means(&upper);
    out.extend(bit_channel_means(&lower));
    out
}

/// Channel LLR mean for a BPSK design point with `snr_db` = 10·log10(1/σ²).
pub fn llr_mean(snr_db: f64) -> f64 {
    2.0 * 10f64.powf(snr_db / 10.0)
}

// Brännström et al. fit of the BI-AWGN capacity J(σ), σ² = 2·(LLR mean).
const H1: f64 = 0.3073;
const H2: f64 = 0.8935;
const H3: f64 = 1.1064;

/// Capacity of a BPSK channel whose LLRs are N(σ²/2, σ²).
pub fn j_function(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    (1.0 - 2f64.powf(-H1 * sigma.powf(2.0 * H2))).powf(H3)
}

/// Inverse of [`j_function`] on `(0, 1)`.
pub fn j_inverse(capacity: f64) -> f64 {
    let c = capacity.clamp(1e-12, 1.0 - 1e-12);
    (-(1.0 - c.powf(1.0 / H3)).log2() / H1).powf(1.0 / (2.0 * H2))
}

/// Design SNR (dB) of the BPSK channel whose capacity equals `capacity` bits.
pub fn capacity_matched_snr_db(capacity: f64) -> f64 {
    let sigma = j_inverse(capacity.clamp(1e-6, 0.9999));
    // LLR mean σ²/2 = 2·snr
    10.0 * (sigma * sigma / 4.0).log10()
}

/// Selects the `k` most reliable indices among those not in `forbidden`.
///
/// Result is sorted ascending.
pub fn select_info_set(reliability: &[f64], k: usize, forbidden: &[bool]) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..reliability.len()).filter(|&i| !forbidden[i]).collect();
    if k > order.len() {
        return Err(Error::Domain(format!(
            "requested {k} information bits but only {} usable bit-channels",
            order.len()
        )));
    }
    order.sort_by(|&a, &b| reliability[b].total_cmp(&reliability[a]).then(b.cmp(&a)));
    let mut set = order[..k].to_vec();
    set.sort_unstable();
    Ok(set)
}

/// GA construction for an unshortened length-`n` code.
pub fn construct_ga(n: usize, k: usize, design_snr_db: f64) -> Result<Vec<usize>> {
    if !n.is_power_of_two() {
        return Err(Error::Domain(format!("block length {n} is not a power of two")));
    }
    if k == 0 || k > n {
        return Err(Error::Domain(format!("information length {k} outside 1..={n}")));
    }
    let means = bit_channel_means(&vec![llr_mean(design_snr_db); n]);
    select_info_set(&means, k, &vec![false; n])
}
