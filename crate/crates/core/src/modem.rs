//! Gray-labelled square QAM, bit interleaving and max-log demapping.
//!
//! Labelling: the first `m/2` bits of a symbol select the in-phase level and
//! the last `m/2` the quadrature level. On each axis the leading bit is the
//! sign (0 → positive) and the remaining bits follow the reflected Gray code,
//! so 4-QAM maps `(0, 0)` to `(1 + j)/√2`.

use std::fmt;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Square QAM alphabet with unit average energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct QamAlphabet {
    bits: u32,
}

impl QamAlphabet {
    pub const QAM4: Self = Self { bits: 2 };
    pub const QAM16: Self = Self { bits: 4 };
    pub const QAM64: Self = Self { bits: 6 };
    pub const QAM256: Self = Self { bits: 8 };
    /// Supported alphabets in increasing order.
    pub const ALL: [Self; 4] = [Self::QAM4, Self::QAM16, Self::QAM64, Self::QAM256];

    /// Alphabet of the given size.
    pub fn new(order: u32) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.order() == order)
            .ok_or_else(|| Error::Domain(format!("unsupported QAM order {order} (use 4, 16, 64 or 256)")))
    }

    /// `|ℳ|`.
    pub fn order(self) -> u32 {
        1 << self.bits
    }

    /// `m = log2 |ℳ|`.
    pub fn bits_per_symbol(self) -> usize {
        self.bits as usize
    }

    fn axis_bits(self) -> usize {
        self.bits as usize / 2
    }

    fn scale(self) -> f64 {
        let levels = (1u64 << self.axis_bits()) as f64;
        (2.0 * (levels * levels - 1.0) / 3.0).sqrt()
    }

    /// Normalized amplitude of one axis for its `m/2` label bits.
    fn axis_level(self, bits: &[u8]) -> f64 {
        let k = bits.len();
        let mut v = 1.0;
        for j in (1..k).rev() {
            v = f64::from(1u32 << (k - j)) - (1.0 - 2.0 * f64::from(bits[j])) * v;
        }
        (1.0 - 2.0 * f64::from(bits[0])) * v / self.scale()
    }

    /// Normalized amplitudes of one axis, indexed by label read MSB first.
    fn axis_table(self) -> Vec<f64> {
        let k = self.axis_bits();
        (0..1usize << k)
            .map(|label| {
                let bits: Vec<u8> = (0..k).map(|j| ((label >> (k - 1 - j)) & 1) as u8).collect();
                self.axis_level(&bits)
            })
            .collect()
    }

    /// Constellation point for one `m`-bit label.
    pub fn point(self, bits: &[u8]) -> Complex64 {
        let k = self.axis_bits();
        Complex64::new(self.axis_level(&bits[..k]), self.axis_level(&bits[k..2 * k]))
    }

    /// All points, indexed by label read MSB first.
    pub fn points(self) -> Vec<Complex64> {
        let m = self.bits_per_symbol();
        (0..1usize << m)
            .map(|label| {
                let bits: Vec<u8> = (0..m).map(|j| ((label >> (m - 1 - j)) & 1) as u8).collect();
                self.point(&bits)
            })
            .collect()
    }

    /// Maps bits to symbols, `m` bits per symbol.
    pub fn modulate(self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let m = self.bits_per_symbol();
        if bits.len() % m != 0 {
            return Err(Error::Domain(format!("{} bits do not fill {m}-bit symbols", bits.len())));
        }
        let table = self.axis_table();
        let k = self.axis_bits();
        let index = |b: &[u8]| b.iter().fold(0usize, |acc, &x| (acc << 1) | usize::from(x & 1));
        Ok(bits
            .chunks_exact(m)
            .map(|c| Complex64::new(table[index(&c[..k])], table[index(&c[k..])]))
            .collect())
    }

    /// Nearest-point hard decisions.
    pub fn demodulate_hard(self, symbols: &[Complex64]) -> Vec<u8> {
        let points = self.points();
        let m = self.bits_per_symbol();
        let mut out = Vec::with_capacity(symbols.len() * m);
        for y in symbols {
            let best = (0..points.len())
                .min_by(|&a, &b| (y - points[a]).norm_sqr().total_cmp(&(y - points[b]).norm_sqr()))
                .unwrap_or(0);
            out.extend((0..m).map(|j| ((best >> (m - 1 - j)) & 1) as u8));
        }
        out
    }

    /// Max-log LLRs `λ = γ[min_{θ₁} |z/ρ − a|² − min_{θ₀} |z/ρ − a|²]`, `ρ = γ/(1 + γ)`.
    ///
    /// `equalized` holds `g′y`. Positive values favour bit 0.
    pub fn llrs(self, equalized: &[Complex64], gamma: f64) -> Vec<f64> {
        let m = self.bits_per_symbol();
        if !(gamma > 0.0) {
            return vec![0.0; equalized.len() * m];
        }
        let rho = gamma / (1.0 + gamma);
        let table = self.axis_table();
        let k = self.axis_bits();
        let mut out = Vec::with_capacity(equalized.len() * m);
        let axis = |x: f64, out: &mut Vec<f64>| {
            for j in 0..k {
                let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
                for (label, &a) in table.iter().enumerate() {
                    let d = (x - a) * (x - a);
                    if (label >> (k - 1 - j)) & 1 == 0 {
                        d0 = d0.min(d);
                    } else {
                        d1 = d1.min(d);
                    }
                }
                out.push(gamma * (d1 - d0));
            }
        };
        for z in equalized {
            let s = z / rho;
            axis(s.re, &mut out);
            axis(s.im, &mut out);
        }
        out
    }
}

impl TryFrom<u32> for QamAlphabet {
    type Error = Error;

    fn try_from(order: u32) -> Result<Self> {
        Self::new(order)
    }
}

impl From<QamAlphabet> for u32 {
    fn from(a: QamAlphabet) -> u32 {
        a.order()
    }
}

impl fmt::Display for QamAlphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-QAM", self.order())
    }
}

/// Bit permutation with `out[i] = in[π(i)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn identity(len: usize) -> Self {
        Self { perm: (0..len).collect() }
    }

    /// Uniform random permutation drawn from `seed`.
    pub fn from_seed(len: usize, seed: u64) -> Self {
        Self::random(len, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform random permutation drawn from `rng`.
    pub fn random<R: rand::Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(rng);
        Self { perm }
    }

    /// Wraps an explicit permutation.
    pub fn from_permutation(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Domain("interleaver is not a permutation".into()));
            }
        }
        Ok(Self { perm })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        Ok(self.perm.iter().map(|&p| input[p]).collect())
    }

    pub fn deinterleave<T: Copy + Default>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        let mut out = vec![T::default(); input.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = input[i];
        }
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len == self.perm.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected: self.perm.len(), actual: len })
        }
    }
}
