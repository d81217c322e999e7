//! Seeded random substreams.
//!
//! A campaign has one master seed. Every consumer of randomness (channel
//! estimates, CSIT errors, SAA samples, noise, payload bits, interleavers)
//! derives its own ChaCha stream from the master seed and a small key, so a
//! component can be replayed in isolation and trials can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Purpose tags that separate the substreams of one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Estimate = 1,
    CsitError = 2,
    SaaSamples = 3,
    Noise = 4,
    Payload = 5,
    Interleaver = 6,
    Generic = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a purpose tag and a key sequence into a 64-bit stream id.
pub fn stream_id(purpose: Purpose, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(purpose as u64), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Derives an independent generator from the master seed.
pub fn substream(master_seed: u64, purpose: Purpose, keys: &[u64]) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(purpose, keys));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_key_same_stream() {
        let a: Vec<u64> = substream(7, Purpose::Noise, &[1, 2]).random_iter().take(8).collect();
        let b: Vec<u64> = substream(7, Purpose::Noise, &[1, 2]).random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn keys_and_purposes_separate_streams() {
        let a: u64 = substream(7, Purpose::Noise, &[1, 2]).random();
        let b: u64 = substream(7, Purpose::Noise, &[2, 1]).random();
        let c: u64 = substream(7, Purpose::Payload, &[1, 2]).random();
        let d: u64 = substream(8, Purpose::Noise, &[1, 2]).random();
        assert!(a != b && a != c && a != d);
    }
}
