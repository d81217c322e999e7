//! Adaptive modulation and coding from average rates.
//!
//! Each stream picks the smallest QAM alphabet whose bits per symbol cover
//! `min(R̄/β, 8)`, then the code rate `r = ⌈N·min(R̄/m, β)⌉ / N` with
//! `N = S·m`. Energy back-off divides the per-sample SINRs before the rate
//! averages are taken.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::modem::QamAlphabet;
use crate::precoder::{RateAllocation, SinrSamples};
use crate::{db_to_linear, Error, Result, Scheme, StreamId};

/// Largest supported bits per symbol (256-QAM).
pub const MAX_BITS_PER_SYMBOL: usize = 8;

/// Alphabets with `log2|ℳ| ≥ min(rate/β, 8)`, smallest first.
pub fn feasible_set(rate: f64, beta: f64) -> Vec<QamAlphabet> {
    let need = (rate.max(0.0) / beta).min(MAX_BITS_PER_SYMBOL as f64);
    QamAlphabet::ALL.into_iter().filter(|a| a.bits_per_symbol() as f64 >= need).collect()
}

/// Modulation and code of one stream for one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamMcs {
    pub alphabet: QamAlphabet,
    /// `S`, symbols per block.
    pub symbols: usize,
    /// `N_l = S·log2|ℳ_l|`.
    pub coded_len: usize,
    /// `K_l`, information bits including CRC.
    pub info_len: usize,
}

impl StreamMcs {
    /// `r_l = K_l / N_l`.
    pub fn code_rate(&self) -> f64 {
        self.info_len as f64 / self.coded_len as f64
    }

    /// Information bits per channel use, `r_l·log2|ℳ_l|`.
    pub fn spectral_efficiency(&self) -> f64 {
        self.info_len as f64 / self.symbols as f64
    }
}

/// MCS for a stream of average rate `rate`; `None` when the rate is not positive.
pub fn select_mcs(rate: f64, beta: f64, symbols: usize) -> Result<Option<StreamMcs>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!("maximum code rate must lie in (0, 1], got {beta}")));
    }
    if symbols == 0 {
        return Err(Error::Domain("stream length must be positive".into()));
    }
    if !(rate > 0.0) {
        return Ok(None);
    }
    let alphabet = feasible_set(rate, beta)[0];
    let m = alphabet.bits_per_symbol();
    let coded_len = symbols * m;
    let fraction = (rate / m as f64).min(beta);
    // Guard the ceiling against products like 512·0.5 landing a hair above an integer.
    let exact = coded_len as f64 * fraction;
    let info_len = if (exact - exact.round()).abs() < 1e-9 { exact.round() } else { exact.ceil() } as usize;
    Ok(Some(StreamMcs { alphabet, symbols, coded_len, info_len }))
}

/// Per-stream MCS for one block; `None` marks a disabled stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct McsDecision {
    pub streams: [Option<StreamMcs>; 3],
}

impl McsDecision {
    /// Selects an MCS for each stream rate (`[R̄_c, R̄_1, R̄_2]`); streams whose
    /// `K` cannot hold the CRC plus one payload bit are disabled.
    pub fn select(rates: [f64; 3], beta: f64, symbols: usize, crc_len: usize) -> Result<Self> {
        let mut streams = [None; 3];
        for (slot, rate) in streams.iter_mut().zip(rates) {
            *slot = select_mcs(rate, beta, symbols)?.filter(|m| m.info_len > crc_len);
        }
        Ok(Self { streams })
    }

    pub fn stream(&self, s: StreamId) -> Option<&StreamMcs> {
        self.streams[s.index()].as_ref()
    }
}

/// Back-off groups: one value for the common stream, one for both private streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamClass {
    Common,
    Private,
}

impl StreamClass {
    pub const ALL: [StreamClass; 2] = [StreamClass::Common, StreamClass::Private];

    pub fn of(s: StreamId) -> Self {
        match s {
            StreamId::Common => StreamClass::Common,
            _ => StreamClass::Private,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamClass::Common => "common",
            StreamClass::Private => "private",
        }
    }
}

impl fmt::Display for StreamClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StreamClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "common" => Ok(StreamClass::Common),
            "private" => Ok(StreamClass::Private),
            other => Err(Error::Config(format!("unknown stream class `{other}` (expected common or private)"))),
        }
    }
}

/// Back-off in dB applied to each stream class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Backoff {
    pub common_db: f64,
    pub private_db: f64,
}

impl Backoff {
    pub const NONE: Backoff = Backoff { common_db: 0.0, private_db: 0.0 };

    pub fn get(&self, class: StreamClass) -> f64 {
        match class {
            StreamClass::Common => self.common_db,
            StreamClass::Private => self.private_db,
        }
    }

    pub fn set(&mut self, class: StreamClass, db: f64) {
        match class {
            StreamClass::Common => self.common_db = db,
            StreamClass::Private => self.private_db = db,
        }
    }
}

/// Average rates after dividing every SINR sample by the class back-off.
///
/// Common shares keep their proportions and are rescaled to the reduced
/// common rate.
pub fn apply_backoff(samples: &SinrSamples, base: &RateAllocation, backoff: Backoff) -> RateAllocation {
    let mut r = samples.average_rates_scaled(db_to_linear(backoff.common_db), db_to_linear(backoff.private_db));
    let total: f64 = base.common_shares.iter().sum();
    if total > 0.0 {
        let rc = r.common_rate();
        for k in 0..2 {
            r.common_shares[k] = base.common_shares[k] / total * rc;
        }
    }
    r
}

/// One CSV row of a back-off table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackoffRecord {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub stream: StreamClass,
    pub backoff_db: f64,
}

/// Back-off values per (scheme, SNR, stream class); lookups use the nearest SNR.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BackoffTable {
    // SNR keyed in milli-dB
    entries: BTreeMap<(Scheme, StreamClass, i64), f64>,
}

fn snr_key(snr_db: f64) -> i64 {
    (snr_db * 1000.0).round() as i64
}

impl BackoffTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, scheme: Scheme, snr_db: f64, stream: StreamClass, backoff_db: f64) -> Result<()> {
        if !(backoff_db >= 0.0) || !backoff_db.is_finite() {
            return Err(Error::Domain(format!("back-off must be a non-negative number of dB, got {backoff_db}")));
        }
        self.entries.insert((scheme, stream, snr_key(snr_db)), backoff_db);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Value at the nearest tabulated SNR (lower SNR on ties); 0 dB if none.
    pub fn lookup(&self, scheme: Scheme, snr_db: f64, stream: StreamClass) -> f64 {
        let key = snr_key(snr_db);
        let below = self.entries.range((scheme, stream, i64::MIN)..=(scheme, stream, key)).next_back();
        let above = self.entries.range((scheme, stream, key)..=(scheme, stream, i64::MAX)).next();
        match (below, above) {
            (Some((kb, vb)), Some((ka, va))) => {
                if key - kb.2 <= ka.2 - key { *vb } else { *va }
            }
            (Some((_, v)), None) | (None, Some((_, v))) => *v,
            (None, None) => 0.0,
        }
    }

    pub fn backoff(&self, scheme: Scheme, snr_db: f64) -> Backoff {
        Backoff {
            common_db: self.lookup(scheme, snr_db, StreamClass::Common),
            private_db: self.lookup(scheme, snr_db, StreamClass::Private),
        }
    }

    pub fn records(&self) -> Vec<BackoffRecord> {
        self.entries
            .iter()
            .map(|(&(scheme, stream, key), &backoff_db)| BackoffRecord {
                scheme,
                snr_db: key as f64 / 1000.0,
                stream,
                backoff_db,
            })
            .collect()
    }

    pub fn from_records(records: impl IntoIterator<Item = BackoffRecord>) -> Result<Self> {
        let mut t = Self::new();
        for r in records {
            t.insert(r.scheme, r.snr_db, r.stream, r.backoff_db)?;
        }
        Ok(t)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in self.records() {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let records: std::result::Result<Vec<BackoffRecord>, _> = input.deserialize().collect();
        Self::from_records(records?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelMatrix;
    use crate::precoder::{PrecoderMatrix, SaaProblem};
    use num_complex::Complex64;

    #[test]
    fn feasible_sets() {
        assert_eq!(feasible_set(7.2, 0.9), vec![QamAlphabet::QAM256]);
        assert_eq!(feasible_set(0.0, 0.9), QamAlphabet::ALL.to_vec());
        assert_eq!(feasible_set(1.0, 0.9), QamAlphabet::ALL.to_vec());
        assert_eq!(feasible_set(2.0, 0.9), QamAlphabet::ALL[1..].to_vec());
        assert_eq!(feasible_set(50.0, 0.9), vec![QamAlphabet::QAM256]);
    }

    #[test]
    fn mcs_examples() {
        let m = select_mcs(1.0, 0.9, 256).unwrap().unwrap();
        assert_eq!((m.alphabet, m.coded_len, m.info_len), (QamAlphabet::QAM4, 512, 256));
        assert_eq!(m.code_rate(), 0.5);

        let m = select_mcs(7.2, 0.9, 256).unwrap().unwrap();
        assert_eq!((m.alphabet, m.coded_len, m.info_len), (QamAlphabet::QAM256, 2048, 1844));

        let m = select_mcs(40.0, 0.9, 256).unwrap().unwrap();
        assert_eq!((m.alphabet, m.info_len), (QamAlphabet::QAM256, 1844));

        let m = select_mcs(5.0, 0.9, 256).unwrap().unwrap();
        assert_eq!((m.alphabet, m.coded_len, m.info_len), (QamAlphabet::QAM64, 1536, 1280));

        assert_eq!(select_mcs(0.0, 0.9, 256).unwrap(), None);
        assert_eq!(select_mcs(-1.0, 0.9, 256).unwrap(), None);
        assert!(select_mcs(1.0, 0.0, 256).is_err());
    }

    #[test]
    fn alphabet_is_minimal_and_efficiency_bounded() {
        for i in 1..800 {
            let rate = i as f64 * 0.01;
            let m = select_mcs(rate, 0.9, 256).unwrap().unwrap();
            let smaller_ok = feasible_set(rate, 0.9).iter().any(|a| a < &m.alphabet);
            assert!(!smaller_ok);
            let bound = rate.min(7.2) + 1.0 / 256.0;
            assert!(m.spectral_efficiency() <= bound + 1e-12, "rate {rate}: {}", m.spectral_efficiency());
            assert!(m.spectral_efficiency() >= rate.min(7.2) - 1e-12);
        }
    }

    #[test]
    fn tiny_streams_are_disabled() {
        let d = McsDecision::select([0.01, 1.0, 0.0], 0.9, 256, 11).unwrap();
        assert!(d.stream(StreamId::Common).is_none());
        assert_eq!(d.stream(StreamId::Private1).unwrap().info_len, 256);
        assert!(d.stream(StreamId::Private2).is_none());
    }

    fn single_link(gain: f64) -> (SaaProblem, PrecoderMatrix) {
        let h = ChannelMatrix::from_columns(&[
            vec![Complex64::new(gain, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ])
        .unwrap();
        let pr = SaaProblem::from_samples(h.clone(), vec![h], 1.0);
        let z = Complex64::new(0.0, 0.0);
        let p = PrecoderMatrix::new(vec![z, z], vec![Complex64::new(1.0, 0.0), z], vec![z, z]);
        (pr, p)
    }

    #[test]
    fn backoff_in_sinr_domain() {
        let (pr, p) = single_link(1000.0);
        let samples = pr.sinr_samples(&p);
        let base = samples.average_rates();
        assert_eq!(apply_backoff(&samples, &base, Backoff::NONE), base);
        let halved = apply_backoff(&samples, &base, Backoff { common_db: 0.0, private_db: 10.0 * 2f64.log10() });
        let drop = base.private_rates[0] - halved.private_rates[0];
        assert!((drop - 1.0).abs() < 1e-5, "{drop}");
        let mut prev = base.private_rates[0];
        for db in 1..12 {
            let r = apply_backoff(&samples, &base, Backoff { common_db: 0.0, private_db: db as f64 * 0.5 });
            assert!(r.private_rates[0] <= prev);
            prev = r.private_rates[0];
        }
    }

    #[test]
    fn table_lookup_and_csv() {
        let mut t = BackoffTable::new();
        t.insert(Scheme::Rsma, 10.0, StreamClass::Common, 1.5).unwrap();
        t.insert(Scheme::Rsma, 20.0, StreamClass::Common, 2.5).unwrap();
        t.insert(Scheme::Sdma, 10.0, StreamClass::Private, 0.5).unwrap();
        assert!(t.insert(Scheme::Sdma, 10.0, StreamClass::Private, -0.5).is_err());
        assert_eq!(t.lookup(Scheme::Rsma, 14.0, StreamClass::Common), 1.5);
        assert_eq!(t.lookup(Scheme::Rsma, 15.0, StreamClass::Common), 1.5);
        assert_eq!(t.lookup(Scheme::Rsma, 16.0, StreamClass::Common), 2.5);
        assert_eq!(t.lookup(Scheme::Rsma, 40.0, StreamClass::Common), 2.5);
        assert_eq!(t.lookup(Scheme::Rsma, 10.0, StreamClass::Private), 0.0);
        assert_eq!(t.lookup(Scheme::Noma, 10.0, StreamClass::Common), 0.0);

        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("scheme,snr_db,stream,backoff_db\n"));
        assert!(text.contains("rsma,10.0,common,1.5"));
        assert_eq!(BackoffTable::read_csv(buf.as_slice()).unwrap(), t);
    }
}
