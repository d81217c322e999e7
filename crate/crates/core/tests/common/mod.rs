//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rsma_lls::channel::{inner, ChannelMatrix};
use rsma_lls::modem::QamAlphabet;
use rsma_lls::polar::{bit_reverse, PolarCode, SATURATION};
use rsma_lls::precoder::{PrecoderMatrix, RateAllocation};
use rsma_lls::transceiver::{propagate_noiseless, receive_sic, transmit, BlockPlan, CodeCache, LinkParams, SplitMessage};
use rsma_lls::{Complex64, Scheme, StreamId};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// BPSK over real AWGN with noise variance `sigma2`; returns channel LLRs.
pub fn bpsk_llrs(code: &[u8], sigma2: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sigma = sigma2.sqrt();
    code.iter()
        .map(|&b| {
            let n: f64 = rng.sample(StandardNormal);
            let y = 1.0 - 2.0 * b as f64 + sigma * n;
            2.0 * y / sigma2
        })
        .collect()
}

fn min_sum(a: f64, b: f64) -> f64 {
    a.signum() * b.signum() * a.abs().min(b.abs())
}

fn tanh_rule(a: f64, b: f64) -> f64 {
    let t = (a / 2.0).tanh() * (b / 2.0).tanh();
    2.0 * t.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh()
}

/// Recursive SC on `x = u·F^⊗n` (natural order). Returns the codeword of
/// this sub-tree and appends decisions to `u`. With `genie`, feedback uses
/// the all-zero truth and `errors[i]` records wrong hard decisions.
fn sc_rec(
    l: &[f64],
    frozen: &[bool],
    exact: bool,
    genie: bool,
    u: &mut Vec<u8>,
    errors: &mut Vec<bool>,
) -> Vec<u8> {
    let n = l.len();
    if n == 1 {
        let hard = if l[0] >= 0.0 { 0 } else { 1 };
        errors.push(hard != 0);
        let b = if frozen[0] || genie { 0 } else { hard };
        u.push(b);
        return vec![b];
    }
    let h = n / 2;
    let f = if exact { tanh_rule } else { min_sum };
    let la: Vec<f64> = (0..h).map(|i| f(l[i], l[h + i])).collect();
    let ca = sc_rec(&la, &frozen[..h], exact, genie, u, errors);
    let lb: Vec<f64> = (0..h).map(|i| l[h + i] + if ca[i] == 0 { l[i] } else { -l[i] }).collect();
    let cb = sc_rec(&lb, &frozen[h..], exact, genie, u, errors);
    let mut x: Vec<u8> = ca.iter().zip(&cb).map(|(a, b)| a ^ b).collect();
    x.extend_from_slice(&cb);
    x
}

/// Mother-length LLRs in natural `x` order from transmitted `ν`-order LLRs.
fn to_natural(code: &PolarCode, llrs: &[f64]) -> Vec<f64> {
    let n = code.mother_length();
    let bits = n.trailing_zeros();
    let mut nu = vec![SATURATION; n];
    let shortened = code.shortened();
    let mut it = llrs.iter();
    for (p, slot) in nu.iter_mut().enumerate() {
        if !shortened.contains(&p) {
            *slot = *it.next().unwrap();
        }
    }
    (0..n).map(|j| nu[bit_reverse(j, bits)]).collect()
}

/// Min-sum SC decoder; returns the information bits (CRC included).
pub fn sc_decode(code: &PolarCode, llrs: &[f64]) -> Vec<u8> {
    let n = code.mother_length();
    let frozen: Vec<bool> = (0..n).map(|i| code.is_frozen(i)).collect();
    let mut u = Vec::new();
    sc_rec(&to_natural(code, llrs), &frozen, false, false, &mut u, &mut Vec::new());
    code.info_set().iter().map(|&i| u[i]).collect()
}

/// Genie-aided SC error indicators per bit channel, all-zero codeword, exact f.
pub fn genie_errors(llrs_natural: &[f64]) -> Vec<bool> {
    let frozen = vec![false; llrs_natural.len()];
    let mut errors = Vec::new();
    sc_rec(llrs_natural, &frozen, true, true, &mut Vec::new(), &mut errors);
    errors
}

/// Exhaustive ML over all `2^K` codewords for BPSK LLRs (no CRC).
pub struct MlDecoder {
    words: Vec<(Vec<u8>, Vec<u8>)>,
}

impl MlDecoder {
    pub fn new(code: &PolarCode) -> Self {
        let k = code.k();
        assert!(code.crc().is_empty() && k <= 16);
        let words = (0..1usize << k)
            .map(|m| {
                let info: Vec<u8> = (0..k).map(|j| ((m >> j) & 1) as u8).collect();
                let cw = code.encode(&info).unwrap();
                (info, cw)
            })
            .collect();
        Self { words }
    }

    pub fn decode(&self, llrs: &[f64]) -> &[u8] {
        let score = |cw: &[u8]| -> f64 { cw.iter().zip(llrs).map(|(&b, &l)| if b == 0 { l } else { -l }).sum() };
        let mut best = &self.words[0];
        let mut best_score = f64::NEG_INFINITY;
        for w in &self.words {
            let s = score(&w.1);
            if s > best_score {
                best_score = s;
                best = w;
            }
        }
        &best.0
    }
}

/// Max-log LLRs by enumerating every constellation point.
pub fn brute_force_llrs(a: QamAlphabet, z: Complex64, gamma: f64) -> Vec<f64> {
    let pts = a.points();
    let m = a.bits_per_symbol();
    let rho = gamma / (1.0 + gamma);
    (0..m)
        .map(|i| {
            let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
            for (label, p) in pts.iter().enumerate() {
                let d = (z / rho - p).norm_sqr();
                if (label >> (m - 1 - i)) & 1 == 0 {
                    d0 = d0.min(d);
                } else {
                    d1 = d1.min(d);
                }
            }
            gamma * (d1 - d0)
        })
        .collect()
}

/// `argmin_g E|g·y − s_target|²` for `y = Σ_l a_l s_l + z` by Newton steps
/// on the expanded MSE with finite-difference derivatives.
pub fn numerical_mmse(gains: &[Complex64], target: usize) -> Complex64 {
    let mse = |g: [f64; 2]| -> f64 {
        let g = Complex64::new(g[0], g[1]);
        let signal: f64 = gains
            .iter()
            .enumerate()
            .map(|(l, a)| (g * a - if l == target { 1.0 } else { 0.0 }).norm_sqr())
            .sum();
        signal + g.norm_sqr()
    };
    let mut x = [0.0f64; 2];
    let h = 1e-3;
    for _ in 0..4 {
        let mut grad = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            grad[i] = (mse(p) - mse(m)) / (2.0 * h);
            for j in 0..2 {
                let shift = |di: f64, dj: f64| {
                    let mut y = x;
                    y[i] += di;
                    y[j] += dj;
                    mse(y)
                };
                hess[i][j] = (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
            }
        }
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        let dx = [
            (hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
            (-hess[1][0] * grad[0] + hess[0][0] * grad[1]) / det,
        ];
        x = [x[0] - dx[0], x[1] - dx[1]];
    }
    Complex64::new(x[0], x[1])
}

/// Link gains `h_kᴴ p_l` for the common and both private streams.
pub fn link_gains(h: &[Complex64], p: &PrecoderMatrix) -> [Complex64; 3] {
    [inner(h, p.common()), inner(h, p.private(0)), inner(h, p.private(1))]
}

/// Orthogonal unit channels; common stream far above both private streams.
pub fn orthogonal_setup() -> (ChannelMatrix, PrecoderMatrix) {
    let c = |re: f64| Complex64::new(re, 0.0);
    let h = ChannelMatrix::from_columns(&[vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]]).unwrap();
    let p = PrecoderMatrix::new(vec![c(3e3), c(3e3)], vec![c(1e2), c(0.0)], vec![c(0.0), c(1e2)]);
    (h, p)
}

/// Scheme-shaped rates that select `alphabet` for every active stream.
pub fn scheme_rates(scheme: Scheme, alphabet: QamAlphabet) -> RateAllocation {
    let r = alphabet.bits_per_symbol() as f64 * 0.85;
    match scheme {
        Scheme::Rsma => RateAllocation { common_rates: [r; 2], private_rates: [r; 2], common_shares: [r * 0.4, r * 0.6] },
        Scheme::Sdma => RateAllocation { common_rates: [0.0; 2], private_rates: [r; 2], common_shares: [0.0; 2] },
        Scheme::Noma => RateAllocation { common_rates: [r; 2], private_rates: [r, 0.0], common_shares: [0.0, r] },
    }
}

/// Noiseless transmit/receive of one block; true if every active stream
/// is recovered exactly at every intended receiver.
pub fn noiseless_block(scheme: Scheme, alphabet: QamAlphabet, seed: u64, cache: &CodeCache) -> bool {
    let (h, p) = orthogonal_setup();
    let rates = scheme_rates(scheme, alphabet);
    let plan = BlockPlan::new(&p, &rates, &LinkParams::default(), [seed, seed + 1, seed + 2], cache).unwrap();
    for s in StreamId::ALL {
        if let Some(code) = plan.stream(s) {
            assert_eq!(code.mcs.alphabet, alphabet);
        }
    }
    let msg = SplitMessage::random(&plan, &mut rng(seed));
    let block = transmit(&msg, &plan).unwrap();
    (0..2).all(|k| {
        let y = propagate_noiseless(&block, h.column(k));
        let r = receive_sic(&y, h.column(k), k, &plan).unwrap();
        let common = plan.stream(StreamId::Common).is_none()
            || r.common.as_ref().is_some_and(|d| d.crc_ok && d.info == msg.common_payload());
        let private = plan.stream(StreamId::private(k)).is_none()
            || r.private.as_ref().is_some_and(|d| d.crc_ok && d.info == msg.private[k]);
        common && private
    })
}
