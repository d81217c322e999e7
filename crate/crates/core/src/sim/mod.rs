//! Monte-Carlo campaigns: per-trial pipeline, throughput aggregation,
//! Shannon bounds and back-off calibration.
//!
//! A trial at one SNR point draws `Ĥ` (shared by every SNR point and scheme),
//! the true channel and the SAA samples, optimizes every requested scheme on
//! the same samples, then pushes one block per scheme through the
//! transceiver. Each random quantity has its own keyed substream, so results
//! are independent of execution order.

mod calibrate;
mod stats;

pub use calibrate::{calibrate_backoff, Calibration, CalibrationEntry, CalibrationOptions};
pub use stats::{mean_and_se, paired_difference, wilson_upper};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::amc::{apply_backoff, Backoff, BackoffTable};
use crate::channel::{sample_conditional, sample_estimate, ChannelMatrix, CsitModel};
use crate::polar::Crc;
use crate::precoder::{optimize_schemes, PrecoderSolution, RateAllocation, SaaProblem, SinrSamples, SolverOptions};
use crate::rng::{stream_id, substream, Purpose};
use crate::transceiver::{
    propagate, propagate_noiseless, receive_sic, transmit, BlockPlan, CodeCache, LinkParams, SplitMessage,
};
use crate::{db_to_linear, Error, Result, Scheme, StreamId};

/// Campaign settings. Every field has a default, so an empty file is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub schemes: Vec<Scheme>,
    /// SNR grid in dB; `Pt = 10^(SNR/10)` with unit noise.
    pub snr_db: Vec<f64>,
    /// CSIT quality exponent, `σe² = Pt^(−α)`.
    pub alpha: f64,
    /// Per-user QoS `R₀` in bps/Hz.
    pub qos_rate: f64,
    /// Symbols per stream per block, `S`.
    pub symbols: usize,
    /// Trials per SNR point.
    pub trials: usize,
    /// SAA samples `M` per channel estimate.
    pub saa_samples: usize,
    /// Maximum code rate `β`.
    pub beta: f64,
    pub seed: u64,
    pub antennas: usize,
    pub list_size: usize,
    /// CRC generator including the leading term; 0 disables the CRC.
    pub crc_polynomial: u32,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Back-off table (CSV); missing entries mean 0 dB.
    pub backoff_table: Option<PathBuf>,
    /// Skip receiver noise (diagnostics only).
    pub noiseless: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            snr_db: (1..=7).map(|i| 5.0 * i as f64).collect(),
            alpha: 0.6,
            qos_rate: 0.0,
            symbols: 256,
            trials: 200,
            saa_samples: 200,
            beta: 0.9,
            seed: 0,
            antennas: 2,
            list_size: 8,
            crc_polynomial: Crc::CRC11.generator(),
            max_iterations: 200,
            tolerance: 1e-4,
            backoff_table: None,
            noiseless: false,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("`{key}`: {why}")));
        if self.schemes.is_empty() {
            return bad("schemes", "at least one scheme is required");
        }
        if self.snr_db.is_empty() {
            return bad("snr_db", "the SNR grid is empty");
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db", "SNR values must be finite");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha", "must be non-negative");
        }
        if !(self.qos_rate >= 0.0) || !self.qos_rate.is_finite() {
            return bad("qos_rate", "must be a non-negative rate");
        }
        if self.symbols == 0 {
            return bad("symbols", "must be positive");
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if self.saa_samples == 0 {
            return bad("saa_samples", "must be at least 1");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta", "must lie in (0, 1]");
        }
        if self.antennas == 0 {
            return bad("antennas", "must be at least 1");
        }
        if self.list_size == 0 {
            return bad("list_size", "must be at least 1");
        }
        if self.crc_polynomial == 1 {
            return bad("crc_polynomial", "a degree-0 generator is not a CRC");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance", "must be positive");
        }
        Ok(())
    }

    pub fn crc(&self) -> Crc {
        Crc::from_generator(self.crc_polynomial).unwrap_or(Crc::NONE)
    }

    pub fn link(&self) -> LinkParams {
        LinkParams { beta: self.beta, symbols: self.symbols, crc: self.crc(), list_size: self.list_size }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            saa_samples: self.saa_samples,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            qos_rate: self.qos_rate,
        }
    }
}

/// How trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rayon work stealing; falls back to sequential without the `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

pub(crate) fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// An optimized scheme together with its per-sample SINRs.
#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: PrecoderSolution,
    pub samples: SinrSamples,
}

/// Channel draws and precoder solutions of one trial at one SNR point.
#[derive(Debug, Clone)]
pub struct PreparedTrial {
    pub snr_db: f64,
    pub trial: usize,
    pub estimate: ChannelMatrix,
    pub realization: ChannelMatrix,
    /// `None` marks a QoS-infeasible scheme.
    pub schemes: Vec<(Scheme, Option<Solved>)>,
}

impl PreparedTrial {
    pub fn solved(&self, scheme: Scheme) -> Option<&Solved> {
        self.schemes.iter().find(|(s, _)| *s == scheme).and_then(|(_, x)| x.as_ref())
    }
}

fn snr_key(snr_db: f64) -> u64 {
    snr_db.to_bits()
}

/// Draws the channels and optimizes every configured scheme.
pub fn prepare_trial(cfg: &CampaignConfig, snr_db: f64, trial: usize) -> Result<PreparedTrial> {
    let pt = db_to_linear(snr_db);
    let model = CsitModel::new(pt, cfg.alpha)?;
    let t = trial as u64;
    let estimate = sample_estimate(cfg.antennas, 2, &mut substream(cfg.seed, Purpose::Estimate, &[t]));
    let realization = sample_conditional(
        &estimate,
        model,
        &mut substream(cfg.seed, Purpose::CsitError, &[t, snr_key(snr_db)]),
    )
    .realization;
    let mut saa_rng = substream(cfg.seed, Purpose::SaaSamples, &[t, snr_key(snr_db)]);
    let problem = SaaProblem::draw(&estimate, model, cfg.saa_samples, &mut saa_rng);
    let solutions = optimize_schemes(&problem, &cfg.schemes, &cfg.solver());
    let mut schemes = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        let outcome = match solutions.get(scheme) {
            Some(Ok(solution)) => {
                let samples = problem.sinr_samples(&solution.precoder);
                Some(Solved { solution: solution.clone(), samples })
            }
            Some(Err(Error::Infeasible(_))) | None => None,
            Some(Err(e)) => return Err(Error::Domain(format!("{scheme} solver failed: {e}"))),
        };
        schemes.push((scheme, outcome));
    }
    Ok(PreparedTrial { snr_db, trial, estimate, realization, schemes })
}

/// Outcome of one scheme in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeTrial {
    pub scheme: Scheme,
    pub feasible: bool,
    /// Optimized SAA sum rate (0 when infeasible).
    pub objective: f64,
    /// `D_{s,k}`: information bits recovered by user `k`.
    pub delivered: [u64; 2],
    /// Recovered bits per stream (common counts each user's own part).
    pub stream_bits: [u64; 3],
    pub active: [bool; 3],
    /// Block error per stream; the common stream fails if any user misses it.
    pub failed: [bool; 3],
    /// Channel uses, `S`.
    pub symbols: u64,
    /// Rates after back-off, as used by the AMC.
    pub rates: RateAllocation,
    /// Stream powers over total power of the optimized precoder.
    pub power_fractions: [f64; 3],
}

impl SchemeTrial {
    fn outage(scheme: Scheme, symbols: usize) -> Self {
        Self {
            scheme,
            feasible: false,
            objective: 0.0,
            delivered: [0; 2],
            stream_bits: [0; 3],
            active: [false; 3],
            failed: [false; 3],
            symbols: symbols as u64,
            rates: RateAllocation::default(),
            power_fractions: [0.0; 3],
        }
    }

    pub fn total_bits(&self) -> u64 {
        self.delivered[0] + self.delivered[1]
    }

    /// `(D_{s,1} + D_{s,2}) / S`.
    pub fn throughput(&self) -> f64 {
        self.total_bits() as f64 / self.symbols as f64
    }
}

/// Sends one block of `scheme` through the prepared channel.
pub fn run_scheme(
    cfg: &CampaignConfig,
    prepared: &PreparedTrial,
    scheme: Scheme,
    backoff: Backoff,
    cache: &CodeCache,
) -> Result<SchemeTrial> {
    let Some(solved) = prepared.solved(scheme) else {
        return Ok(SchemeTrial::outage(scheme, cfg.symbols));
    };
    let solution = &solved.solution;
    let rates = apply_backoff(&solved.samples, &solution.rates, backoff);
    let t = prepared.trial as u64;
    let seeds = StreamId::ALL.map(|s| stream_id(Purpose::Interleaver, &[cfg.seed, t, s.index() as u64]));
    let plan = BlockPlan::new(&solution.precoder, &rates, &cfg.link(), seeds, cache)?;
    let keys = [t, snr_key(prepared.snr_db), scheme as u64];
    let msg = SplitMessage::random(&plan, &mut substream(cfg.seed, Purpose::Payload, &keys));
    let block = transmit(&msg, &plan)?;
    let mut noise = substream(cfg.seed, Purpose::Noise, &keys);

    let common_sent = msg.common_payload();
    let active = StreamId::ALL.map(|s| plan.stream(s).is_some());
    let mut common_ok = [false; 2];
    let mut private_ok = [false; 2];
    for k in 0..2 {
        let h = prepared.realization.column(k);
        let y = if cfg.noiseless { propagate_noiseless(&block, h) } else { propagate(&block, h, &mut noise) };
        let r = receive_sic(&y, h, k, &plan)?;
        common_ok[k] = r.common.as_ref().is_some_and(|d| d.crc_ok && d.info == common_sent);
        private_ok[k] = r.private.as_ref().is_some_and(|d| d.crc_ok && d.info == msg.private[k]);
    }

    let mut delivered = [0u64; 2];
    let mut stream_bits = [0u64; 3];
    for k in 0..2 {
        let c = if common_ok[k] { plan.common_split[k] as u64 } else { 0 };
        let p = if private_ok[k] { plan.private_payload(k) as u64 } else { 0 };
        delivered[k] = c + p;
        stream_bits[0] += c;
        stream_bits[1 + k] = p;
    }
    let failed = [
        active[0] && !(common_ok[0] && common_ok[1]),
        active[1] && !private_ok[0],
        active[2] && !private_ok[1],
    ];
    let powers = solution.precoder.stream_powers();
    let total: f64 = powers.iter().sum();
    let power_fractions = if total > 0.0 { powers.map(|p| p / total) } else { [0.0; 3] };
    Ok(SchemeTrial {
        scheme,
        feasible: true,
        objective: solution.objective,
        delivered,
        stream_bits,
        active,
        failed,
        symbols: cfg.symbols as u64,
        rates,
        power_fractions,
    })
}

/// Every configured scheme at one (SNR, trial), using `table` for back-off.
pub fn run_trial(
    cfg: &CampaignConfig,
    table: &BackoffTable,
    snr_db: f64,
    trial: usize,
    cache: &CodeCache,
) -> Result<Vec<SchemeTrial>> {
    let prepared = prepare_trial(cfg, snr_db, trial)?;
    cfg.schemes
        .iter()
        .map(|&s| run_scheme(cfg, &prepared, s, table.backoff(s, snr_db), cache))
        .collect()
}

/// All trials of one scheme at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub trials: Vec<SchemeTrial>,
}

impl PointResult {
    fn channel_uses(&self) -> u64 {
        self.trials.iter().map(|t| t.symbols).sum()
    }

    /// `Σ_l (D_{s,1} + D_{s,2}) / Σ_l S`.
    pub fn throughput(&self) -> f64 {
        let bits: u64 = self.trials.iter().map(SchemeTrial::total_bits).sum();
        bits as f64 / self.channel_uses() as f64
    }

    /// Standard error of the per-trial throughput mean.
    pub fn throughput_se(&self) -> f64 {
        mean_and_se(&self.per_trial_throughput()).1
    }

    /// Recovered bits per channel use for the common and both private streams.
    pub fn stream_throughput(&self) -> [f64; 3] {
        let uses = self.channel_uses() as f64;
        [0, 1, 2].map(|s| self.trials.iter().map(|t| t.stream_bits[s]).sum::<u64>() as f64 / uses)
    }

    /// Blocks in which the stream carried data.
    pub fn active_blocks(&self, s: StreamId) -> u64 {
        self.trials.iter().filter(|t| t.active[s.index()]).count() as u64
    }

    pub fn failed_blocks(&self, s: StreamId) -> u64 {
        self.trials.iter().filter(|t| t.failed[s.index()]).count() as u64
    }

    /// Block error rate over active blocks; `None` if the stream never ran.
    pub fn bler(&self, s: StreamId) -> Option<f64> {
        let n = self.active_blocks(s);
        (n > 0).then(|| self.failed_blocks(s) as f64 / n as f64)
    }

    pub fn infeasible_count(&self) -> usize {
        self.trials.iter().filter(|t| !t.feasible).count()
    }

    /// Ergodic sum-rate bound: mean optimized objective, outages count as 0.
    pub fn esr(&self) -> f64 {
        mean_and_se(&self.per_trial_objective()).0
    }

    pub fn per_trial_throughput(&self) -> Vec<f64> {
        self.trials.iter().map(SchemeTrial::throughput).collect()
    }

    pub fn per_trial_objective(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.objective).collect()
    }
}

/// Results of a campaign, one entry per (scheme, SNR) in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub points: Vec<PointResult>,
}

impl CampaignResult {
    pub fn point(&self, scheme: Scheme, snr_db: f64) -> Option<&PointResult> {
        self.points.iter().find(|p| p.scheme == scheme && p.snr_db == snr_db)
    }
}

fn regroup(cfg: &CampaignConfig, per_unit: Vec<Vec<SchemeTrial>>) -> CampaignResult {
    let mut points = Vec::with_capacity(cfg.schemes.len() * cfg.snr_db.len());
    for (i, &snr_db) in cfg.snr_db.iter().enumerate() {
        for (j, &scheme) in cfg.schemes.iter().enumerate() {
            let trials = (0..cfg.trials).map(|t| per_unit[i * cfg.trials + t][j].clone()).collect();
            points.push(PointResult { scheme, snr_db, trials });
        }
    }
    // scheme-major order for output
    points.sort_by_key(|p| cfg.schemes.iter().position(|&s| s == p.scheme));
    CampaignResult { points }
}

/// Runs every (SNR, trial, scheme) with back-off from `table`.
pub fn run_campaign(cfg: &CampaignConfig, table: &BackoffTable, exec: Execution) -> Result<CampaignResult> {
    cfg.validate()?;
    let cache = CodeCache::new();
    let n = cfg.snr_db.len() * cfg.trials;
    let units = map_indices(exec, n, |u| run_trial(cfg, table, cfg.snr_db[u / cfg.trials], u % cfg.trials, &cache));
    Ok(regroup(cfg, units.into_iter().collect::<Result<Vec<_>>>()?))
}

/// ESR of one scheme at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub esr: f64,
    pub se: f64,
    pub infeasible_count: usize,
    /// Optimized objective per trial (0 when infeasible).
    pub per_trial: Vec<f64>,
}

/// Ergodic sum-rate curves on the same estimate draws as [`run_campaign`]; no codec involved.
pub fn shannon_bounds(cfg: &CampaignConfig, exec: Execution) -> Result<Vec<BoundPoint>> {
    cfg.validate()?;
    let n = cfg.snr_db.len() * cfg.trials;
    let units = map_indices(exec, n, |u| prepare_trial(cfg, cfg.snr_db[u / cfg.trials], u % cfg.trials));
    let units = units.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        for (i, &snr_db) in cfg.snr_db.iter().enumerate() {
            let trials = &units[i * cfg.trials..(i + 1) * cfg.trials];
            let per_trial: Vec<f64> =
                trials.iter().map(|t| t.solved(scheme).map_or(0.0, |s| s.solution.objective)).collect();
            let infeasible_count = trials.iter().filter(|t| t.solved(scheme).is_none()).count();
            let (esr, se) = mean_and_se(&per_trial);
            out.push(BoundPoint { scheme, snr_db, esr, se, infeasible_count, per_trial });
        }
    }
    Ok(out)
}
