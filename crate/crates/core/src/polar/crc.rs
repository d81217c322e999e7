//! Bitwise CRC over MSB-first bit vectors.

/// A CRC generator polynomial of degree `len`.
///
/// `poly` holds the low `len` coefficients (the leading `x^len` term is
/// implicit). Register starts at zero and no bit reflection is applied, so
/// the checksum of an empty payload is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Crc {
    poly: u32,
    len: usize,
}

impl Crc {
    /// 11-bit CRC with generator `x^11 + x^10 + x^9 + x^5 + 1`.
    pub const CRC11: Crc = Crc { poly: 0x621, len: 11 };

    /// No outer code.
    pub const NONE: Crc = Crc { poly: 0, len: 0 };

    /// Builds a CRC from the full generator (leading term included), e.g. `0xE21`.
    pub fn from_generator(generator: u32) -> Option<Crc> {
        if generator < 2 {
            return None;
        }
        let len = (31 - generator.leading_zeros()) as usize;
        Some(Crc { poly: generator & ((1 << len) - 1), len })
    }

    /// Number of parity bits.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Full generator including the leading term.
    pub fn generator(&self) -> u32 {
        if self.len == 0 {
            0
        } else {
            self.poly | (1 << self.len)
        }
    }

    /// Remainder of `bits(x)·x^len` modulo the generator.
    pub fn remainder(&self, bits: &[u8]) -> u32 {
        if self.len == 0 {
            return 0;
        }
        let mask = (1u32 << self.len) - 1;
        let top = self.len - 1;
        let mut reg = 0u32;
        for &b in bits {
            let feedback = ((reg >> top) & 1) ^ u32::from(b & 1);
            reg = (reg << 1) & mask;
            if feedback == 1 {
                reg ^= self.poly;
            }
        }
        reg
    }

    /// Appends the parity bits, MSB first.
    pub fn attach(&self, bits: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(bits.len() + self.len);
        out.extend_from_slice(bits);
        let r = self.remainder(bits);
        out.extend((0..self.len).rev().map(|i| ((r >> i) & 1) as u8));
        out
    }

    /// True when `bits` (payload followed by parity) is a codeword.
    pub fn check(&self, bits: &[u8]) -> bool {
        if bits.len() < self.len {
            return false;
        }
        self.remainder(bits) == 0
    }
}

impl Default for Crc {
    fn default() -> Self {
        Crc::CRC11
    }
}
