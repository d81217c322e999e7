//! Back-off calibration.
//!
//! For each (scheme, SNR) the common class is swept first with the private
//! back-off at 0 dB: the common stream is decoded before any private stream,
//! so its block errors do not depend on the private back-off. The private
//! class is then swept with the chosen common value, and finally the common
//! class once more with the private value fixed, since a common failure also
//! costs the private blocks that depend on SIC. A candidate passes when the
//! block error rate of every stream in its class (every stream, in the last
//! pass) meets the target; among passing candidates the one with the highest
//! throughput wins.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{map_indices, prepare_trial, run_scheme, wilson_upper, CampaignConfig, Execution, SchemeTrial};
use crate::amc::{Backoff, BackoffTable, StreamClass};
use crate::transceiver::CodeCache;
use crate::{Result, Scheme, StreamId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Candidate back-offs in dB, ascending.
    pub grid: Vec<f64>,
    pub target_bler: f64,
    /// One-sided normal quantile of the Wilson bound.
    pub z: f64,
    /// Below this many active blocks the point estimate is used instead of the bound.
    pub min_blocks: u64,
    /// Stop a sweep after this many consecutive throughput drops among passing candidates.
    pub patience: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            grid: (0..=20).map(|i| 0.5 * i as f64).collect(),
            target_bler: 0.1,
            z: 1.645,
            min_blocks: 30,
            patience: 2,
        }
    }
}

/// Chosen back-off and its measured performance at one (scheme, SNR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub backoff: Backoff,
    pub throughput: f64,
    pub bler: [Option<f64>; 3],
    /// Classes for which no candidate met the target; the largest back-off was used.
    pub flagged: Vec<StreamClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub table: BackoffTable,
    pub entries: Vec<CalibrationEntry>,
}

#[derive(Debug, Clone, Copy)]
struct Score {
    throughput: f64,
    failed: [u64; 3],
    active: [u64; 3],
}

impl Score {
    fn of(trials: &[SchemeTrial]) -> Self {
        let bits: u64 = trials.iter().map(SchemeTrial::total_bits).sum();
        let uses: u64 = trials.iter().map(|t| t.symbols).sum();
        let mut failed = [0; 3];
        let mut active = [0; 3];
        for t in trials {
            for s in 0..3 {
                failed[s] += t.failed[s] as u64;
                active[s] += t.active[s] as u64;
            }
        }
        Self { throughput: bits as f64 / uses.max(1) as f64, failed, active }
    }

    fn bler(&self) -> [Option<f64>; 3] {
        [0, 1, 2].map(|s| (self.active[s] > 0).then(|| self.failed[s] as f64 / self.active[s] as f64))
    }

    fn passes(&self, class: Option<StreamClass>, opts: &CalibrationOptions) -> bool {
        StreamId::ALL.iter().filter(|s| class.is_none_or(|c| StreamClass::of(**s) == c)).all(|s| {
            let (f, n) = (self.failed[s.index()], self.active[s.index()]);
            if n == 0 {
                true
            } else if n < opts.min_blocks {
                f as f64 <= opts.target_bler * n as f64
            } else {
                wilson_upper(f, n, opts.z) <= opts.target_bler
            }
        })
    }
}

/// Sweeps one class; `None` if no candidate passes. `judged` selects the
/// streams that must meet the target (`None`: all).
fn sweep(
    opts: &CalibrationOptions,
    class: StreamClass,
    judged: Option<StreamClass>,
    base: Backoff,
    mut eval: impl FnMut(Backoff) -> Result<Score>,
) -> Result<Option<f64>> {
    let mut best: Option<(f64, f64)> = None;
    let mut last: Option<f64> = None;
    let mut drops = 0;
    for &db in &opts.grid {
        let mut b = base;
        b.set(class, db);
        let score = eval(b)?;
        if !score.passes(judged, opts) {
            continue;
        }
        if best.is_none_or(|(_, t)| score.throughput > t) {
            best = Some((db, score.throughput));
        }
        match last {
            Some(prev) if score.throughput < prev => drops += 1,
            _ => drops = 0,
        }
        last = Some(score.throughput);
        if drops >= opts.patience {
            break;
        }
    }
    Ok(best.map(|(db, _)| db))
}

fn key(b: Backoff) -> (i64, i64) {
    ((b.common_db * 1000.0).round() as i64, (b.private_db * 1000.0).round() as i64)
}

/// Calibrates every (scheme, SNR) of `cfg` on its own trials.
pub fn calibrate_backoff(cfg: &CampaignConfig, opts: &CalibrationOptions, exec: Execution) -> Result<Calibration> {
    cfg.validate()?;
    let cache = CodeCache::new();
    let mut table = BackoffTable::new();
    let mut entries = Vec::new();
    for &snr_db in &cfg.snr_db {
        let prepared = map_indices(exec, cfg.trials, |t| prepare_trial(cfg, snr_db, t));
        let prepared = prepared.into_iter().collect::<Result<Vec<_>>>()?;
        for &scheme in &cfg.schemes {
            let mut memo: HashMap<(i64, i64), Score> = HashMap::new();
            let mut eval = |b: Backoff| -> Result<Score> {
                if let Some(s) = memo.get(&key(b)) {
                    return Ok(*s);
                }
                let trials = map_indices(exec, prepared.len(), |i| run_scheme(cfg, &prepared[i], scheme, b, &cache));
                let score = Score::of(&trials.into_iter().collect::<Result<Vec<_>>>()?);
                memo.insert(key(b), score);
                Ok(score)
            };
            let largest = opts.grid.last().copied().unwrap_or(0.0);
            let mut chosen = Backoff::NONE;
            for class in StreamClass::ALL {
                let db = sweep(opts, class, Some(class), chosen, &mut eval)?.unwrap_or(largest);
                chosen.set(class, db);
            }
            if let Some(db) = sweep(opts, StreamClass::Common, None, chosen, &mut eval)? {
                chosen.common_db = db;
            }
            let score = eval(chosen)?;
            let flagged: Vec<StreamClass> =
                StreamClass::ALL.into_iter().filter(|&c| !score.passes(Some(c), opts)).collect();
            for class in StreamClass::ALL {
                table.insert(scheme, snr_db, class, chosen.get(class))?;
            }
            entries.push(CalibrationEntry {
                scheme,
                snr_db,
                backoff: chosen,
                throughput: score.throughput,
                bler: score.bler(),
                flagged,
            });
        }
    }
    Ok(Calibration { table, entries })
}
