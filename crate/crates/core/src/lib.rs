//! Link-level simulation of rate-splitting multiple access (RSMA) in the
//! two-user downlink MISO broadcast channel.
//!
//! The crate covers the whole physical layer: imperfect-CSIT channel
//! generation ([`channel`]), sample-average precoder optimization for RSMA,
//! SDMA and NOMA ([`precoder`]), a CRC-aided polar codec with list decoding
//! ([`polar`]), Gray-mapped QAM with bit interleaving ([`modem`]), adaptive
//! modulation and coding ([`amc`]), the transmit and SIC receive chains
//! ([`transceiver`]) and the Monte-Carlo campaign driver ([`sim`]).
//!
//! Trials are independent and run on rayon when the `parallel` feature is
//! enabled (the default); every trial draws from its own seeded substream, so
//! results do not depend on the execution order.

pub mod amc;
pub mod channel;
pub mod cli;
mod error;
pub mod modem;
pub mod polar;
pub mod precoder;
pub mod qcqp;
pub mod rng;
pub mod sim;
pub mod transceiver;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Multiple-access schemes compared by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Rate splitting: one common stream plus two private streams.
    Rsma,
    /// Linear precoding only; the common stream is switched off.
    Sdma,
    /// Superposition coding: the weak user's private stream is switched off
    /// and its message rides on the common stream.
    Noma,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Rsma, Scheme::Sdma, Scheme::Noma];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rsma => "rsma",
            Scheme::Sdma => "sdma",
            Scheme::Noma => "noma",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rsma" => Ok(Scheme::Rsma),
            "sdma" => Ok(Scheme::Sdma),
            "noma" => Ok(Scheme::Noma),
            other => Err(Error::Config(format!(
                "unknown scheme `{other}` (valid schemes: rsma, sdma, noma)"
            ))),
        }
    }
}

/// Identifies one of the three transmitted streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum StreamId {
    Common,
    Private1,
    Private2,
}

impl StreamId {
    pub const ALL: [StreamId; 3] = [StreamId::Common, StreamId::Private1, StreamId::Private2];

    pub fn index(self) -> usize {
        match self {
            StreamId::Common => 0,
            StreamId::Private1 => 1,
            StreamId::Private2 => 2,
        }
    }

    /// Private stream of user `k` (0-based).
    pub fn private(k: usize) -> StreamId {
        if k == 0 {
            StreamId::Private1
        } else {
            StreamId::Private2
        }
    }
}

/// Converts a value in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
