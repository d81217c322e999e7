//! CRC-aided polar codes with shortening and list decoding.
//!
//! Generator is `G = B_N·F^⊗n`. Encoder input and decoder output are in
//! natural bit-channel order; the bit-reversal permutation is internal.

mod construct;
mod crc;
mod scl;

pub use construct::{
    bit_channel_means, capacity_matched_snr_db, check_mean, construct_ga, j_function, j_inverse, llr_mean, ln_phi,
    ln_phi_inv,
};
pub use crc::Crc;

use crate::{Error, Result};

/// Bits over GF(2), one per byte with value 0 or 1.
pub type BitVector = Vec<u8>;

/// LLR assigned to shortened (known-zero) code bits.
pub const SATURATION: f64 = 1e12;

/// Default list size.
pub const DEFAULT_LIST: usize = 8;

/// Reverses the low `bits` bits of `i`.
pub fn bit_reverse(i: usize, bits: u32) -> usize {
    if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }
}

/// In-place `x ← x·F^⊗n` over GF(2).
pub fn polar_transform(x: &mut [u8]) {
    let n = x.len();
    let mut h = 1;
    while h < n {
        for block in x.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (p, q) in a.iter_mut().zip(b.iter()) {
                *p ^= *q;
            }
        }
        h *= 2;
    }
}

/// Code-bit positions of a length-`mother` code removed to reach `target`.
///
/// The last `mother − target` positions of `u·F^⊗n` depend only on frozen
/// inputs and are zero; after bit reversal they land at the returned `ν`
/// indices (ascending).
pub fn shorten(mother: usize, target: usize) -> Result<Vec<usize>> {
    if !mother.is_power_of_two() {
        return Err(Error::Domain(format!("mother length {mother} is not a power of two")));
    }
    if target > mother || (mother > 1 && target <= mother / 2) || target == 0 {
        return Err(Error::Domain(format!(
            "shortened length {target} outside ({}, {mother}]",
            mother / 2
        )));
    }
    let bits = mother.trailing_zeros();
    let mut pos: Vec<usize> = (target..mother).map(|j| bit_reverse(j, bits)).collect();
    pos.sort_unstable();
    Ok(pos)
}

/// Decoder result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    /// Payload estimate (CRC removed).
    pub info: BitVector,
    pub crc_ok: bool,
}

/// A shortened, CRC-aided polar code.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCode {
    mother: usize,
    length: usize,
    k: usize,
    crc: Crc,
    info_set: Vec<usize>,
    frozen: Vec<bool>,
    // ν indices transmitted, ascending
    kept: Vec<usize>,
}

impl PolarCode {
    /// GA-constructed code of transmitted length `length` carrying `k` bits
    /// (CRC included), designed for a BPSK-equivalent SNR in dB.
    pub fn new(length: usize, k: usize, crc: Crc, design_snr_db: f64) -> Result<Self> {
        let mother = length.max(1).next_power_of_two();
        shorten(mother, length)?;
        if k <= crc.len() || k > length {
            return Err(Error::Domain(format!(
                "information length {k} must exceed the CRC length {} and not exceed {length}",
                crc.len()
            )));
        }
        let mut means = vec![llr_mean(design_snr_db); mother];
        means[length..].iter_mut().for_each(|m| *m = f64::INFINITY);
        let reliability = bit_channel_means(&means);
        let forbidden: Vec<bool> = (0..mother).map(|i| i >= length).collect();
        let info_set = construct::select_info_set(&reliability, k, &forbidden)?;
        Self::with_info_set(length, info_set, crc)
    }

    /// Code with an explicit information set (indices into the mother code).
    pub fn with_info_set(length: usize, info_set: Vec<usize>, crc: Crc) -> Result<Self> {
        let mother = length.max(1).next_power_of_two();
        let removed = shorten(mother, length)?;
        let k = info_set.len();
        if k < crc.len() {
            return Err(Error::Domain("information set smaller than the CRC".into()));
        }
        let mut frozen = vec![true; mother];
        for w in info_set.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Domain("information set must be strictly increasing".into()));
            }
        }
        for &i in &info_set {
            // Shortening relies on inputs at or beyond `length` being frozen.
            if i >= length {
                return Err(Error::Domain(format!("information index {i} is shortened")));
            }
            frozen[i] = false;
        }
        let mut is_removed = vec![false; mother];
        removed.iter().for_each(|&p| is_removed[p] = true);
        let kept = (0..mother).filter(|&p| !is_removed[p]).collect();
        Ok(PolarCode { mother, length, k, crc, info_set, frozen, kept })
    }

    /// Mother block length `N`.
    pub fn mother_length(&self) -> usize {
        self.mother
    }

    /// Transmitted length.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Information bits including CRC.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Payload bits carried per block.
    pub fn payload_len(&self) -> usize {
        self.k - self.crc.len()
    }

    pub fn crc(&self) -> Crc {
        self.crc
    }

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    /// `ν` indices of shortened code bits.
    pub fn shortened(&self) -> Vec<usize> {
        let mut keep = vec![false; self.mother];
        self.kept.iter().for_each(|&p| keep[p] = true);
        (0..self.mother).filter(|&p| !keep[p]).collect()
    }

    /// Full mother codeword `ν = u·G` for an information vector of length `k` (CRC included).
    pub fn encode_mother(&self, u_info: &[u8]) -> Result<BitVector> {
        if u_info.len() != self.k {
            return Err(Error::LengthMismatch { expected: self.k, actual: u_info.len() });
        }
        let mut x = vec![0u8; self.mother];
        for (&i, &b) in self.info_set.iter().zip(u_info) {
            x[i] = b & 1;
        }
        polar_transform(&mut x);
        let bits = self.mother.trailing_zeros();
        Ok((0..self.mother).map(|i| x[bit_reverse(i, bits)]).collect())
    }

    /// Encodes a payload of `payload_len()` bits into `length()` code bits.
    pub fn encode(&self, payload: &[u8]) -> Result<BitVector> {
        if payload.len() != self.payload_len() {
            return Err(Error::LengthMismatch { expected: self.payload_len(), actual: payload.len() });
        }
        let nu = self.encode_mother(&self.crc.attach(payload))?;
        Ok(self.kept.iter().map(|&p| nu[p]).collect())
    }

    /// CRC-aided SCL decoding of `length()` channel LLRs (positive favours 0).
    pub fn decode(&self, llrs: &[f64], list: usize) -> Result<Decoded> {
        self.decode_with_saturation(llrs, list, SATURATION)
    }

    /// As [`decode`](Self::decode) with an explicit LLR for shortened positions.
    pub fn decode_with_saturation(&self, llrs: &[f64], list: usize, saturation: f64) -> Result<Decoded> {
        if llrs.len() != self.length {
            return Err(Error::LengthMismatch { expected: self.length, actual: llrs.len() });
        }
        let mut full = vec![saturation; self.mother];
        for (&p, &l) in self.kept.iter().zip(llrs) {
            full[p] = l;
        }
        let paths = scl::decode_list(&full, &self.frozen, list);
        let payload = self.payload_len();
        if let Some(p) = paths.iter().find(|p| self.crc.check(p)) {
            return Ok(Decoded { info: p[..payload].to_vec(), crc_ok: true });
        }
        Ok(Decoded { info: paths[0][..payload].to_vec(), crc_ok: false })
    }

    /// All surviving list paths (information bits incl. CRC), best metric first.
    pub fn decode_paths(&self, llrs: &[f64], list: usize) -> Result<Vec<BitVector>> {
        if llrs.len() != self.length {
            return Err(Error::LengthMismatch { expected: self.length, actual: llrs.len() });
        }
        let mut full = vec![SATURATION; self.mother];
        for (&p, &l) in self.kept.iter().zip(llrs) {
            full[p] = l;
        }
        Ok(scl::decode_list(&full, &self.frozen, list))
    }
}
