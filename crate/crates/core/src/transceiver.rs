//! Per-block transmit and receive chains.
//!
//! Transmit: split payload → CRC + polar encode → interleave → QAM → precode.
//! Receive (user `k`): MMSE-equalize the common stream, decode, and on CRC
//! success rebuild `ŝ_c` bit-exactly and cancel `h_kᴴp_c·ŝ_c` before
//! decoding the private stream. A failed common CRC leaves the signal
//! uncancelled and the private equalizer treats the common stream as noise.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::Rng;

use crate::amc::{McsDecision, StreamMcs};
use crate::channel::{complex_normal, inner, ChannelMatrix};
use crate::modem::Interleaver;
use crate::polar::{capacity_matched_snr_db, BitVector, Crc, Decoded, PolarCode, DEFAULT_LIST};
use crate::precoder::{PrecoderMatrix, RateAllocation};
use crate::{Error, Result, StreamId};

/// Link-level constants shared by transmitter and receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Maximum code rate `β`.
    pub beta: f64,
    /// Symbols per stream per block, `S`.
    pub symbols: usize,
    pub crc: Crc,
    pub list_size: usize,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self { beta: 0.9, symbols: 256, crc: Crc::CRC11, list_size: DEFAULT_LIST }
    }
}

type CodeKey = (usize, usize, u32, i64);

/// Memoizes code construction; design SNRs are rounded to 0.01 dB.
#[derive(Debug, Default)]
pub struct CodeCache {
    codes: Mutex<HashMap<CodeKey, Arc<PolarCode>>>,
}

impl CodeCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, length: usize, k: usize, crc: Crc, design_snr_db: f64) -> Result<Arc<PolarCode>> {
        let q = (design_snr_db * 100.0).round() as i64;
        let key = (length, k, crc.generator(), q);
        if let Some(c) = self.codes.lock().expect("code cache poisoned").get(&key) {
            return Ok(Arc::clone(c));
        }
        let code = Arc::new(PolarCode::new(length, k, crc, q as f64 / 100.0)?);
        self.codes.lock().expect("code cache poisoned").insert(key, Arc::clone(&code));
        Ok(code)
    }

    pub fn len(&self) -> usize {
        self.codes.lock().expect("code cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Code and interleaver of one active stream.
#[derive(Debug, Clone)]
pub struct StreamCode {
    pub mcs: StreamMcs,
    pub code: Arc<PolarCode>,
    pub interleaver: Interleaver,
}

impl StreamCode {
    /// Payload → channel symbols.
    pub fn symbols(&self, payload: &[u8]) -> Result<Vec<Complex64>> {
        let coded = self.code.encode(payload)?;
        self.mcs.alphabet.modulate(&self.interleaver.interleave(&coded)?)
    }

    /// Equalized symbols → payload estimate.
    pub fn decode(&self, equalized: &[Complex64], gamma: f64, list: usize) -> Result<Decoded> {
        let llrs = self.mcs.alphabet.llrs(equalized, gamma);
        self.code.decode(&self.interleaver.deinterleave(&llrs)?, list)
    }
}

/// Splits `payload` bits in proportion to `shares` by largest remainder.
///
/// Ties in the remainder go to the lower user index. Zero total share gives
/// an even split.
pub fn split_lengths(payload: usize, shares: [f64; 2]) -> [usize; 2] {
    let s = [shares[0].max(0.0), shares[1].max(0.0)];
    let total = s[0] + s[1];
    let weights = if total > 0.0 { [s[0] / total, s[1] / total] } else { [0.5, 0.5] };
    let exact = [payload as f64 * weights[0], payload as f64 * weights[1]];
    let mut out = [exact[0].floor() as usize, exact[1].floor() as usize];
    let mut left = payload - out[0] - out[1];
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[k] += 1;
        left -= 1;
    }
    out
}

/// Everything both ends need to process one block of one scheme.
#[derive(Debug, Clone)]
pub struct BlockPlan {
    /// Precoder with the columns of disabled streams zeroed.
    pub precoder: PrecoderMatrix,
    pub streams: [Option<StreamCode>; 3],
    /// `K_{c,1}`, `K_{c,2}`: common payload bits per user.
    pub common_split: [usize; 2],
    pub list_size: usize,
}

impl BlockPlan {
    /// Picks MCSs from `rates`, builds codes and draws the interleavers.
    ///
    /// Each code is designed for the BPSK-equivalent SNR whose capacity
    /// matches the stream's average rate per coded bit.
    pub fn new(
        precoder: &PrecoderMatrix,
        rates: &RateAllocation,
        params: &LinkParams,
        interleaver_seeds: [u64; 3],
        cache: &CodeCache,
    ) -> Result<Self> {
        let stream_rates = StreamId::ALL.map(|s| rates.stream_rate(s));
        let mcs = McsDecision::select(stream_rates, params.beta, params.symbols, params.crc.len())?;
        let mut p = precoder.clone();
        let mut streams: [Option<StreamCode>; 3] = [None, None, None];
        for s in StreamId::ALL {
            match mcs.stream(s) {
                Some(m) => {
                    let capacity = stream_rates[s.index()] / m.alphabet.bits_per_symbol() as f64;
                    let design = capacity_matched_snr_db(capacity);
                    let code = cache.get(m.coded_len, m.info_len, params.crc, design)?;
                    let interleaver = Interleaver::from_seed(m.coded_len, interleaver_seeds[s.index()]);
                    streams[s.index()] = Some(StreamCode { mcs: *m, code, interleaver });
                }
                None => p.stream_mut(s).iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0)),
            }
        }
        let common_split = match &streams[0] {
            Some(c) => split_lengths(c.code.payload_len(), rates.common_shares),
            None => [0, 0],
        };
        Ok(Self { precoder: p, streams, common_split, list_size: params.list_size.max(1) })
    }

    pub fn stream(&self, s: StreamId) -> Option<&StreamCode> {
        self.streams[s.index()].as_ref()
    }

    pub fn symbols(&self) -> usize {
        self.streams.iter().flatten().map(|c| c.mcs.symbols).next().unwrap_or(0)
    }

    /// Payload bits of a private stream (0 if disabled).
    pub fn private_payload(&self, k: usize) -> usize {
        self.stream(StreamId::private(k)).map_or(0, |c| c.code.payload_len())
    }
}

/// Independent payloads `w_{c,1}`, `w_{c,2}`, `w_{p,1}`, `w_{p,2}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMessage {
    pub common: [BitVector; 2],
    pub private: [BitVector; 2],
}

impl SplitMessage {
    /// Uniform random payloads sized by the plan.
    pub fn random<R: Rng + ?Sized>(plan: &BlockPlan, rng: &mut R) -> Self {
        let mut bits = |n: usize| -> BitVector { (0..n).map(|_| rng.random_range(0..2u8)).collect() };
        let common = [bits(plan.common_split[0]), bits(plan.common_split[1])];
        let private = [bits(plan.private_payload(0)), bits(plan.private_payload(1))];
        Self { common, private }
    }

    /// `w_c = [w_{c,1}, w_{c,2}]`.
    pub fn common_payload(&self) -> BitVector {
        [self.common[0].as_slice(), self.common[1].as_slice()].concat()
    }
}

/// Stream symbols and the antenna signal of one block.
#[derive(Debug, Clone)]
pub struct TransmitBlock {
    /// `s_c`, `s_1`, `s_2`; zero for disabled streams.
    pub streams: [Vec<Complex64>; 3],
    /// `x`, one row per antenna.
    pub antennas: Vec<Vec<Complex64>>,
}

/// Encodes, modulates and precodes one block.
pub fn transmit(msg: &SplitMessage, plan: &BlockPlan) -> Result<TransmitBlock> {
    let s_len = plan.symbols();
    let n_t = plan.precoder.n_t();
    let mut streams: [Vec<Complex64>; 3] = Default::default();
    for s in StreamId::ALL {
        streams[s.index()] = match plan.stream(s) {
            Some(c) => {
                let payload = match s {
                    StreamId::Common => msg.common_payload(),
                    StreamId::Private1 => msg.private[0].clone(),
                    StreamId::Private2 => msg.private[1].clone(),
                };
                c.symbols(&payload)?
            }
            None => vec![Complex64::new(0.0, 0.0); s_len],
        };
    }
    let mut antennas = vec![vec![Complex64::new(0.0, 0.0); s_len]; n_t];
    for s in StreamId::ALL {
        let p = plan.precoder.stream(s);
        for (a, row) in antennas.iter_mut().enumerate() {
            for (x, sym) in row.iter_mut().zip(&streams[s.index()]) {
                *x += p[a] * sym;
            }
        }
    }
    Ok(TransmitBlock { streams, antennas })
}

/// `y_t = hᴴx_t + z_t` with `z_t ~ CN(0, 1)`.
pub fn propagate<R: Rng + ?Sized>(block: &TransmitBlock, h: &[Complex64], rng: &mut R) -> Vec<Complex64> {
    let mut y = propagate_noiseless(block, h);
    y.iter_mut().for_each(|v| *v += complex_normal(rng));
    y
}

/// `y_t = hᴴx_t`.
pub fn propagate_noiseless(block: &TransmitBlock, h: &[Complex64]) -> Vec<Complex64> {
    let s_len = block.antennas.first().map_or(0, Vec::len);
    (0..s_len)
        .map(|t| h.iter().zip(&block.antennas).map(|(ha, row)| ha.conj() * row[t]).sum())
        .collect()
}

/// Received powers `|hᴴp_c|²`, `|hᴴp_k|²`, `|hᴴp_j|²` at user `k`.
fn link_powers(h: &[Complex64], p: &PrecoderMatrix, k: usize) -> [f64; 3] {
    [
        inner(h, p.common()).norm_sqr(),
        inner(h, p.private(k)).norm_sqr(),
        inner(h, p.private(1 - k)).norm_sqr(),
    ]
}

/// MMSE equalizers `(g′_{c,k}, g′_k)` at user `k`.
///
/// `g′_{c,k} = p_cᴴh / (|hᴴp_c|² + Σ_j |hᴴp_j|² + 1)` and
/// `g′_k = p_kᴴh / (Σ_j |hᴴp_j|² + 1)`.
pub fn mmse_equalizers(h: &[Complex64], p: &PrecoderMatrix, k: usize) -> (Complex64, Complex64) {
    let [c, own, other] = link_powers(h, p, k);
    let gc = inner(p.common(), h) / (c + own + other + 1.0);
    let gk = inner(p.private(k), h) / (own + other + 1.0);
    (gc, gk)
}

/// Output of one user's receiver.
#[derive(Debug, Clone)]
pub struct ReceiveResult {
    pub user: usize,
    /// Common decode, `None` if the stream is disabled.
    pub common: Option<Decoded>,
    /// Private decode of this user, `None` if the stream is disabled.
    pub private: Option<Decoded>,
    pub g_common: Complex64,
    pub g_private: Complex64,
    /// Whether the common stream was cancelled before private decoding.
    pub cancelled: bool,
}

impl ReceiveResult {
    pub fn common_ok(&self) -> bool {
        self.common.as_ref().is_some_and(|d| d.crc_ok)
    }

    pub fn private_ok(&self) -> bool {
        self.private.as_ref().is_some_and(|d| d.crc_ok)
    }
}

/// Rebuilt common-stream symbols from a decoded payload.
pub fn reconstruct_common(plan: &BlockPlan, payload: &[u8]) -> Result<Vec<Complex64>> {
    plan.stream(StreamId::Common)
        .ok_or_else(|| Error::Domain("common stream is disabled".into()))?
        .symbols(payload)
}

/// `ỹ = y − hᴴp_c·ŝ_c`.
pub fn cancel_common(y: &[Complex64], h: &[Complex64], p: &PrecoderMatrix, s_c: &[Complex64]) -> Vec<Complex64> {
    let a = inner(h, p.common());
    y.iter().zip(s_c).map(|(v, s)| v - a * s).collect()
}

/// HD-SIC receiver of user `k` with perfect knowledge of its channel `h`.
pub fn receive_sic(y: &[Complex64], h: &[Complex64], k: usize, plan: &BlockPlan) -> Result<ReceiveResult> {
    if y.len() != plan.symbols() {
        return Err(Error::LengthMismatch { expected: plan.symbols(), actual: y.len() });
    }
    let p = &plan.precoder;
    if h.len() != p.n_t() {
        return Err(Error::LengthMismatch { expected: p.n_t(), actual: h.len() });
    }
    let [c, own, other] = link_powers(h, p, k);
    let (g_common, g_cancelled) = mmse_equalizers(h, p, k);

    let mut common = None;
    let mut cancelled = false;
    let mut residual = y.to_vec();
    if let Some(sc) = plan.stream(StreamId::Common) {
        let gamma = c / (own + other + 1.0);
        let z: Vec<Complex64> = y.iter().map(|v| g_common * v).collect();
        let d = sc.decode(&z, gamma, plan.list_size)?;
        if d.crc_ok {
            let s_hat = sc.symbols(&d.info)?;
            residual = cancel_common(y, h, p, &s_hat);
            cancelled = true;
        }
        common = Some(d);
    }

    let (g_private, gamma) = if cancelled || plan.stream(StreamId::Common).is_none() {
        (g_cancelled, own / (other + 1.0))
    } else {
        (inner(p.private(k), h) / (c + own + other + 1.0), own / (c + other + 1.0))
    };
    let private = match plan.stream(StreamId::private(k)) {
        Some(sp) => {
            let z: Vec<Complex64> = residual.iter().map(|v| g_private * v).collect();
            Some(sp.decode(&z, gamma, plan.list_size)?)
        }
        None => None,
    };
    Ok(ReceiveResult { user: k, common, private, g_common, g_private, cancelled })
}

/// `D_{s,k} = |w_{c,k}|·[common CRC ok] + |w_{p,k}|·[private CRC ok]`.
pub fn merge_messages(result: &ReceiveResult, plan: &BlockPlan) -> usize {
    let k = result.user;
    let common = if result.common_ok() { plan.common_split[k] } else { 0 };
    let private = if result.private_ok() { plan.private_payload(k) } else { 0 };
    common + private
}

/// Recovered bits of user `k` counting only payloads that match what was sent.
pub fn recovered_bits(result: &ReceiveResult, plan: &BlockPlan, sent: &SplitMessage) -> usize {
    let k = result.user;
    let mut bits = 0;
    if let Some(d) = result.common.as_ref().filter(|d| d.crc_ok) {
        let (lo, len) = if k == 0 { (0, plan.common_split[0]) } else { (plan.common_split[0], plan.common_split[1]) };
        if d.info[lo..lo + len] == sent.common[k][..] {
            bits += len;
        }
    }
    if let Some(d) = result.private.as_ref().filter(|d| d.crc_ok) {
        if d.info == sent.private[k] {
            bits += d.info.len();
        }
    }
    bits
}

/// Sends one block over `channel` and runs both receivers.
pub fn run_block<R: Rng + ?Sized>(
    plan: &BlockPlan,
    channel: &ChannelMatrix,
    msg: &SplitMessage,
    noise: &mut R,
) -> Result<[ReceiveResult; 2]> {
    let block = transmit(msg, plan)?;
    let y0 = propagate(&block, channel.column(0), noise);
    let y1 = propagate(&block, channel.column(1), noise);
    Ok([receive_sic(&y0, channel.column(0), 0, plan)?, receive_sic(&y1, channel.column(1), 1, plan)?])
}

#[cfg(test)]
mod tests;
