//! Precoder optimization for RSMA, SDMA and NOMA.
//!
//! Average rates (ARs) are sample averages of `log2(1 + SINR)` over `M`
//! channel realizations drawn conditionally on the transmitter's estimate.
//! The average sum rate is maximized by alternating optimization: MMSE
//! equalizers and MSE weights are updated in closed form per sample, and the
//! precoders (plus the common-rate split) are then found by solving the convex
//! weighted-MSE subproblem with [`crate::qcqp`]. SDMA and NOMA are the same
//! problem with some streams and rate shares pinned to zero.

mod solver;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{inner, norm_sqr, sample_conditional, sample_estimate, ChannelMatrix, CsitModel};
use crate::{Scheme, StreamId};

pub use solver::{
    optimize, optimize_noma, optimize_rsma, optimize_schemes, optimize_sdma, rsma_alternating, SchemeSolutions,
};

/// `P = [p_c, p_1, p_2]`, amplitude scale.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderMatrix {
    columns: [Vec<Complex64>; 3],
}

impl PrecoderMatrix {
    pub fn zeros(n_t: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n_t];
        Self { columns: [z.clone(), z.clone(), z] }
    }

    pub fn new(common: Vec<Complex64>, private1: Vec<Complex64>, private2: Vec<Complex64>) -> Self {
        assert!(common.len() == private1.len() && common.len() == private2.len());
        Self { columns: [common, private1, private2] }
    }

    pub fn n_t(&self) -> usize {
        self.columns[0].len()
    }

    pub fn stream(&self, s: StreamId) -> &[Complex64] {
        &self.columns[s.index()]
    }

    pub fn stream_mut(&mut self, s: StreamId) -> &mut Vec<Complex64> {
        &mut self.columns[s.index()]
    }

    pub fn common(&self) -> &[Complex64] {
        &self.columns[0]
    }

    /// Private precoder of user `k` (0-based).
    pub fn private(&self, k: usize) -> &[Complex64] {
        &self.columns[1 + k]
    }

    /// `‖p_s‖²` for each stream.
    pub fn stream_powers(&self) -> [f64; 3] {
        [norm_sqr(&self.columns[0]), norm_sqr(&self.columns[1]), norm_sqr(&self.columns[2])]
    }

    /// `tr(P Pᴴ)`.
    pub fn total_power(&self) -> f64 {
        self.stream_powers().iter().sum()
    }

    /// Copy with stream `s` zeroed.
    pub fn without(&self, s: StreamId) -> Self {
        let mut p = self.clone();
        p.columns[s.index()].iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        p
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut p = self.clone();
        for col in &mut p.columns {
            col.iter_mut().for_each(|z| *z *= a);
        }
        p
    }
}

/// SINRs seen by one user.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserSinr {
    /// Common stream with both private streams treated as noise.
    pub common: f64,
    /// Own private stream after the common stream is removed.
    pub private: f64,
}

/// Unit-noise SINRs of both users for one channel realization.
pub fn instantaneous_sinrs(realization: &ChannelMatrix, p: &PrecoderMatrix) -> [UserSinr; 2] {
    let mut out = [UserSinr { common: 0.0, private: 0.0 }; 2];
    for (k, o) in out.iter_mut().enumerate() {
        let h = realization.column(k);
        let gc = inner(h, p.common()).norm_sqr();
        let g1 = inner(h, p.private(0)).norm_sqr();
        let g2 = inner(h, p.private(1)).norm_sqr();
        let (own, other) = if k == 0 { (g1, g2) } else { (g2, g1) };
        o.common = gc / (g1 + g2 + 1.0);
        o.private = own / (other + 1.0);
    }
    out
}

/// Average (or instantaneous) rates in bps/Hz.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RateAllocation {
    /// `R̄_{c,k}`: common-stream rate decodable by user `k`.
    pub common_rates: [f64; 2],
    /// `R̄_k`: private-stream rates.
    pub private_rates: [f64; 2],
    /// `C̄_k`: portion of the common rate carrying user `k`'s message.
    pub common_shares: [f64; 2],
}

impl RateAllocation {
    /// `R̄_c = min(R̄_{c,1}, R̄_{c,2})`.
    pub fn common_rate(&self) -> f64 {
        self.common_rates[0].min(self.common_rates[1])
    }

    /// `C̄_k + R̄_k`.
    pub fn user_rate(&self, k: usize) -> f64 {
        self.common_shares[k] + self.private_rates[k]
    }

    /// `Σ_k (C̄_k + R̄_k)`.
    pub fn sum_rate(&self) -> f64 {
        self.user_rate(0) + self.user_rate(1)
    }

    /// Rate of the given stream as seen by the AMC: `R̄_c` or `R̄_k`.
    pub fn stream_rate(&self, s: StreamId) -> f64 {
        match s {
            StreamId::Common => self.common_rate(),
            StreamId::Private1 => self.private_rates[0],
            StreamId::Private2 => self.private_rates[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    /// SAA sample count `M`.
    pub saa_samples: usize,
    pub max_iterations: usize,
    /// Relative objective change that ends the alternating optimization.
    pub tolerance: f64,
    /// Minimum per-user rate `R₀` (bps/Hz).
    pub qos_rate: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { saa_samples: 1000, max_iterations: 200, tolerance: 1e-4, qos_rate: 0.0 }
    }
}

/// Per-sample SINRs of one precoder over the SAA set, kept so that AMC
/// back-off can recompute the averages at reduced SINR.
#[derive(Clone, Debug, Default)]
pub struct SinrSamples {
    samples: Vec<[UserSinr; 2]>,
}

impl SinrSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Average rates with every common SINR divided by `common_factor` and
    /// every private SINR by `private_factor` (both ≥ 1 for a back-off).
    pub fn average_rates_scaled(&self, common_factor: f64, private_factor: f64) -> RateAllocation {
        let mut r = RateAllocation::default();
        if self.samples.is_empty() {
            return r;
        }
        for s in &self.samples {
            for k in 0..2 {
                r.common_rates[k] += (s[k].common / common_factor).ln_1p();
                r.private_rates[k] += (s[k].private / private_factor).ln_1p();
            }
        }
        let scale = 1.0 / (self.samples.len() as f64 * std::f64::consts::LN_2);
        for k in 0..2 {
            r.common_rates[k] *= scale;
            r.private_rates[k] *= scale;
        }
        r
    }

    pub fn average_rates(&self) -> RateAllocation {
        self.average_rates_scaled(1.0, 1.0)
    }
}

/// The sample-average approximation of one precoder problem: a channel
/// estimate, `M` conditional realizations and the power budget.
#[derive(Clone, Debug)]
pub struct SaaProblem {
    pub estimate: ChannelMatrix,
    pub samples: Vec<ChannelMatrix>,
    pub pt: f64,
}

impl SaaProblem {
    /// Draws `count` realizations around `estimate`; they stay fixed for the
    /// whole optimization.
    pub fn draw<R: Rng + ?Sized>(estimate: &ChannelMatrix, model: CsitModel, count: usize, rng: &mut R) -> Self {
        assert!(count >= 1, "SAA needs at least one sample");
        let samples = (0..count).map(|_| sample_conditional(estimate, model, rng).realization).collect();
        Self { estimate: estimate.clone(), samples, pt: model.pt }
    }

    pub fn from_samples(estimate: ChannelMatrix, samples: Vec<ChannelMatrix>, pt: f64) -> Self {
        assert!(!samples.is_empty(), "SAA needs at least one sample");
        Self { estimate, samples, pt }
    }

    pub fn sinr_samples(&self, p: &PrecoderMatrix) -> SinrSamples {
        SinrSamples { samples: self.samples.iter().map(|h| instantaneous_sinrs(h, p)).collect() }
    }

    /// Sample-average rates of `p`; shares are left at zero.
    pub fn average_rates(&self, p: &PrecoderMatrix) -> RateAllocation {
        self.sinr_samples(p).average_rates()
    }
}

/// Average rates of `p` for `estimate` over `opts.saa_samples` fresh draws.
pub fn average_rates<R: Rng + ?Sized>(
    estimate: &ChannelMatrix,
    p: &PrecoderMatrix,
    model: CsitModel,
    opts: &SolverOptions,
    rng: &mut R,
) -> RateAllocation {
    SaaProblem::draw(estimate, model, opts.saa_samples, rng).average_rates(p)
}

/// How the alternating optimization ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

/// Result of one precoder optimization.
#[derive(Clone, Debug)]
pub struct PrecoderSolution {
    pub scheme: Scheme,
    pub precoder: PrecoderMatrix,
    /// SAA rates with the optimal common-rate split.
    pub rates: RateAllocation,
    /// Average sum rate `Σ_k (C̄_k + R̄_k)`.
    pub objective: f64,
    /// Objective after every accepted sum-rate iteration, starting with the
    /// initial point.
    pub history: Vec<f64>,
    pub status: SolveStatus,
    /// NOMA: the user whose private stream is off.
    pub weak_user: Option<usize>,
}

/// Mean optimized ASR over `n_estimates` estimate draws (one point of a
/// Shannon-bound curve). Infeasible draws count as zero.
pub fn ergodic_sum_rate<R: Rng + ?Sized>(
    scheme: Scheme,
    model: CsitModel,
    n_t: usize,
    n_estimates: usize,
    opts: &SolverOptions,
    rng: &mut R,
) -> f64 {
    assert!(n_estimates >= 1, "at least one estimate is required");
    let mut acc = 0.0;
    for _ in 0..n_estimates {
        let est = sample_estimate(n_t, 2, rng);
        let problem = SaaProblem::draw(&est, model, opts.saa_samples, rng);
        if let Ok(sol) = optimize(&problem, scheme, opts) {
            acc += sol.objective;
        }
    }
    acc / n_estimates as f64
}

/// Dominant left singular vector of the estimate (unit norm).
pub(crate) fn dominant_direction(estimate: &ChannelMatrix) -> Vec<Complex64> {
    let h = nalgebra::DMatrix::from_fn(estimate.n_t(), estimate.n_users(), |i, j| estimate.get(i, j));
    let svd = h.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let (best, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    u.column(best).iter().copied().collect()
}
