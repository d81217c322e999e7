//! Alternating optimization of the SAA average sum rate.
//!
//! For fixed precoders every sample's rate `log(1 + γ)` equals
//! `max_{u,g} [ln u − u·ε(g) + 1]` with `ε` the MSE of a scalar equalizer `g`.
//! Fixing `(u, g)` at their closed-form optima gives a concave quadratic lower
//! bound on each average rate that is tight at the current precoders; the
//! precoder step maximizes the sum of these bounds under the rate-split, QoS
//! and power constraints. Steps that would lower the true objective are
//! rejected, so the objective sequence never decreases.

use num_complex::Complex64;

use super::{dominant_direction, PrecoderMatrix, PrecoderSolution, RateAllocation, SaaProblem, SolveStatus, SolverOptions};
use crate::channel::inner;
use crate::qcqp::{BarrierOptions, Problem, Quadratic};
use crate::{Error, Result, Scheme, StreamId};

/// Which streams carry power and which users own a slice of the common rate.
#[derive(Clone, Copy, Debug)]
struct Structure {
    active: [bool; 3],
    shares: [bool; 2],
}

impl Structure {
    fn rsma() -> Self {
        Self { active: [true; 3], shares: [true; 2] }
    }

    fn sdma() -> Self {
        Self { active: [false, true, true], shares: [false; 2] }
    }

    fn noma(weak: usize) -> Self {
        let mut active = [true; 3];
        active[1 + weak] = false;
        let mut shares = [false; 2];
        shares[weak] = true;
        Self { active, shares }
    }

    fn share_count(&self) -> usize {
        self.shares.iter().filter(|&&s| s).count()
    }
}

/// True (SAA) quantities of one precoder under a given structure.
#[derive(Clone, Debug)]
struct Evaluation {
    rates: RateAllocation,
    objective: f64,
    /// Best achievable `min_k (C̄_k + R̄_k)`.
    max_min: f64,
    feasible: bool,
}

fn evaluate(problem: &SaaProblem, structure: &Structure, p: &PrecoderMatrix, qos: f64) -> Evaluation {
    let mut rates = problem.average_rates(p);
    for k in 0..2 {
        if !structure.active[1 + k] {
            rates.private_rates[k] = 0.0;
        }
    }
    let budget = if structure.active[0] && structure.share_count() > 0 { rates.common_rate() } else { 0.0 };
    let r = rates.private_rates;

    let max_min = match structure.shares {
        [false, false] => r[0].min(r[1]),
        [true, false] => (r[0] + budget).min(r[1]),
        [false, true] => r[0].min(r[1] + budget),
        [true, true] => {
            if (r[0] - r[1]).abs() >= budget {
                r[0].min(r[1]) + budget
            } else {
                (r[0] + r[1] + budget) / 2.0
            }
        }
    };

    let mut lower = [0.0; 2];
    let mut feasible = true;
    for k in 0..2 {
        if structure.shares[k] {
            lower[k] = (qos - r[k]).max(0.0);
        } else if r[k] < qos {
            feasible = false;
        }
    }
    let committed: f64 = lower.iter().sum();
    if committed > budget {
        feasible = false;
    }
    let n_share = structure.share_count();
    if n_share > 0 {
        let spare = (budget - committed).max(0.0) / n_share as f64;
        for k in 0..2 {
            if structure.shares[k] {
                rates.common_shares[k] = lower[k] + spare;
            }
        }
        if !feasible {
            // split that realizes the max-min value
            let extra = [(max_min - r[0]).max(0.0), (max_min - r[1]).max(0.0)];
            for k in 0..2 {
                rates.common_shares[k] = if structure.shares[k] { extra[k].min(budget) } else { 0.0 };
            }
        }
    }
    let objective = rates.common_shares.iter().sum::<f64>() + r[0] + r[1];
    Evaluation { rates, objective, max_min, feasible }
}

/// Position of each optimization variable in the real vector.
struct Layout {
    n_t: usize,
    streams: [Option<usize>; 3],
    shares: [Option<usize>; 2],
    tau: Option<usize>,
    n: usize,
}

impl Layout {
    fn new(structure: &Structure, n_t: usize, with_tau: bool) -> Self {
        let mut n = 0;
        let mut streams = [None; 3];
        for (s, slot) in streams.iter_mut().enumerate() {
            if structure.active[s] {
                *slot = Some(n);
                n += 2 * n_t;
            }
        }
        let mut shares = [None; 2];
        for (k, slot) in shares.iter_mut().enumerate() {
            if structure.shares[k] {
                *slot = Some(n);
                n += 1;
            }
        }
        let tau = with_tau.then(|| {
            n += 1;
            n - 1
        });
        Self { n_t, streams, shares, tau, n }
    }

    fn pack(&self, p: &PrecoderMatrix, shares: [f64; 2], tau: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (s, off) in self.streams.iter().enumerate() {
            if let Some(o) = *off {
                for (i, z) in p.stream(StreamId::ALL[s]).iter().enumerate() {
                    x[o + i] = z.re;
                    x[o + self.n_t + i] = z.im;
                }
            }
        }
        for k in 0..2 {
            if let Some(o) = self.shares[k] {
                x[o] = shares[k];
            }
        }
        if let Some(o) = self.tau {
            x[o] = tau;
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> PrecoderMatrix {
        let mut p = PrecoderMatrix::zeros(self.n_t);
        for (s, off) in self.streams.iter().enumerate() {
            if let Some(o) = *off {
                let col = p.stream_mut(StreamId::ALL[s]);
                for (i, z) in col.iter_mut().enumerate() {
                    *z = Complex64::new(x[o + i], x[o + self.n_t + i]);
                }
            }
        }
        p
    }
}

/// Concave quadratic lower bound (in bits) on one average rate:
/// `c0 − Σ_{i∈I} p_iᴴ A p_i + 2 Re(dᴴ p_signal)`.
struct Surrogate {
    a: Vec<Complex64>,
    d: Vec<Complex64>,
    c0: f64,
    signal: usize,
    interference: [bool; 3],
}

impl Surrogate {
    fn new(n_t: usize, signal: usize, interference: [bool; 3]) -> Self {
        Self {
            a: vec![Complex64::new(0.0, 0.0); n_t * n_t],
            d: vec![Complex64::new(0.0, 0.0); n_t],
            c0: 0.0,
            signal,
            interference,
        }
    }

    /// Adds one sample with MMSE equalizer `g` and weight `u`.
    fn accumulate(&mut self, h: &[Complex64], g: Complex64, u: f64) {
        let n_t = h.len();
        let w = u * g.norm_sqr();
        if w > 0.0 {
            for r in 0..n_t {
                for c in 0..n_t {
                    self.a[r * n_t + c] += h[r] * h[c].conj() * w;
                }
            }
        }
        let gc = g.conj() * u;
        for (d, hr) in self.d.iter_mut().zip(h) {
            *d += hr * gc;
        }
        self.c0 += u.ln() - w - u + 1.0;
    }

    fn scale(&mut self, s: f64) {
        self.a.iter_mut().for_each(|z| *z *= s);
        self.d.iter_mut().for_each(|z| *z *= s);
        self.c0 *= s;
    }

    /// The convex function `−r̃(x)` in the given layout.
    fn negated(&self, layout: &Layout) -> Quadratic {
        let n_t = layout.n_t;
        let mut f = Quadratic::zero(layout.n);
        for (s, &inside) in self.interference.iter().enumerate() {
            let Some(o) = layout.streams[s].filter(|_| inside) else { continue };
            for r in 0..n_t {
                for c in 0..n_t {
                    let z = self.a[r * n_t + c];
                    f.add_quad(o + r, o + c, z.re);
                    f.add_quad(o + r, o + n_t + c, -z.im);
                    f.add_quad(o + n_t + r, o + c, z.im);
                    f.add_quad(o + n_t + r, o + n_t + c, z.re);
                }
            }
        }
        if let Some(o) = layout.streams[self.signal] {
            for (r, z) in self.d.iter().enumerate() {
                f.add_lin(o + r, -2.0 * z.re);
                f.add_lin(o + n_t + r, -2.0 * z.im);
            }
        }
        f.add_const(-self.c0);
        f
    }
}

/// Lower bounds on `R̄_{c,k}` and `R̄_k`, tight at `p`.
fn surrogates(
    problem: &SaaProblem,
    structure: &Structure,
    p: &PrecoderMatrix,
) -> ([Option<Surrogate>; 2], [Option<Surrogate>; 2]) {
    let n_t = p.n_t();
    let private_set = [false, structure.active[1], structure.active[2]];
    let mut common: [Option<Surrogate>; 2] = [None, None];
    let mut private: [Option<Surrogate>; 2] = [None, None];
    for k in 0..2 {
        if structure.active[0] {
            common[k] = Some(Surrogate::new(n_t, 0, structure.active));
        }
        if structure.active[1 + k] {
            private[k] = Some(Surrogate::new(n_t, 1 + k, private_set));
        }
    }
    for sample in &problem.samples {
        for k in 0..2 {
            let h = sample.column(k);
            let a = [inner(h, p.common()), inner(h, p.private(0)), inner(h, p.private(1))];
            let pw = [a[0].norm_sqr(), a[1].norm_sqr(), a[2].norm_sqr()];
            if let Some(s) = common[k].as_mut() {
                let total = pw[0] + pw[1] + pw[2] + 1.0;
                let g = a[0].conj() / total;
                let u = total / (total - pw[0]);
                s.accumulate(h, g, u);
            }
            if let Some(s) = private[k].as_mut() {
                let total = pw[1] + pw[2] + 1.0;
                let g = a[1 + k].conj() / total;
                let u = total / (total - pw[1 + k]);
                s.accumulate(h, g, u);
            }
        }
    }
    let scale = 1.0 / (problem.samples.len() as f64 * std::f64::consts::LN_2);
    for s in common.iter_mut().chain(private.iter_mut()).flatten() {
        s.scale(scale);
    }
    (common, private)
}

#[derive(Clone, Copy, PartialEq)]
enum StepGoal {
    SumRate,
    MaxMin,
}

/// One precoder update; `None` when the convex step has no strictly feasible
/// point (the current iterate is then final).
fn precoder_step(
    problem: &SaaProblem,
    structure: &Structure,
    p: &PrecoderMatrix,
    current: &Evaluation,
    goal: StepGoal,
    qos: f64,
) -> Option<PrecoderMatrix> {
    let n_t = p.n_t();
    let layout = Layout::new(structure, n_t, goal == StepGoal::MaxMin);
    let (common, private) = surrogates(problem, structure, p);
    let neg_common: Vec<Option<Quadratic>> = common.iter().map(|s| s.as_ref().map(|s| s.negated(&layout))).collect();
    let neg_private: Vec<Option<Quadratic>> = private.iter().map(|s| s.as_ref().map(|s| s.negated(&layout))).collect();

    let mut objective = Quadratic::zero(layout.n);
    match goal {
        StepGoal::SumRate => {
            for f in neg_private.iter().flatten() {
                objective.add_scaled(f, 1.0);
            }
            for o in layout.shares.iter().flatten() {
                objective.add_lin(*o, -1.0);
            }
        }
        StepGoal::MaxMin => objective.add_lin(layout.tau.expect("max-min layout has τ"), -1.0),
    }

    let mut constraints = Vec::new();
    // Σ C̄ ≤ r̃_{c,k}
    if layout.shares.iter().any(Option::is_some) {
        for f in neg_common.iter().flatten() {
            let mut g = f.clone();
            for o in layout.shares.iter().flatten() {
                g.add_lin(*o, 1.0);
            }
            constraints.push(g);
        }
    }
    for o in layout.shares.iter().flatten() {
        let mut g = Quadratic::zero(layout.n);
        g.add_lin(*o, -1.0);
        constraints.push(g);
    }
    // per-user rate floor: R₀ (sum-rate step) or τ (max-min step)
    let floor_needed = goal == StepGoal::MaxMin || qos > 0.0;
    if floor_needed {
        for k in 0..2 {
            let mut g = Quadratic::zero(layout.n);
            match goal {
                StepGoal::SumRate => g.add_const(qos),
                StepGoal::MaxMin => g.add_lin(layout.tau.unwrap(), 1.0),
            }
            if let Some(o) = layout.shares[k] {
                g.add_lin(o, -1.0);
            }
            if let Some(f) = &neg_private[k] {
                g.add_scaled(f, 1.0);
            }
            constraints.push(g);
        }
    }
    // tr(PPᴴ) ≤ Pt
    let mut power = Quadratic::zero(layout.n);
    for o in layout.streams.iter().flatten() {
        for i in 0..2 * n_t {
            power.add_quad(o + i, o + i, 1.0);
        }
    }
    power.add_const(-problem.pt);
    constraints.push(power);

    let total = p.total_power();
    let shrink = if total > 0.0 { ((1.0 - 1e-7) * problem.pt / total).min(1.0).sqrt() } else { 1.0 };
    let shares = current.rates.common_shares.map(|c| c * (1.0 - 1e-4));
    let tau = current.max_min - 1e-3 * current.max_min.abs().max(1e-3);
    let x0 = layout.pack(&p.scaled(shrink), shares, tau);

    let qp = Problem { objective, constraints };
    let sol = qp.solve(&x0, &BarrierOptions::default()).ok()?;
    Some(layout.unpack(&sol.x))
}

fn run_alternating(
    problem: &SaaProblem,
    scheme: Scheme,
    structure: Structure,
    init: PrecoderMatrix,
    opts: &SolverOptions,
) -> Result<PrecoderSolution> {
    let qos = opts.qos_rate;
    let mut p = init;
    let mut ev = evaluate(problem, &structure, &p, qos);
    let mut iterations = 0;

    // feasibility restoration: raise the worst user rate until R₀ is met
    while !ev.feasible {
        if iterations >= opts.max_iterations {
            return Err(Error::Infeasible(format!("{scheme}: QoS {qos} bps/Hz not reached")));
        }
        iterations += 1;
        let next = precoder_step(problem, &structure, &p, &ev, StepGoal::MaxMin, qos)
            .ok_or_else(|| Error::Infeasible(format!("{scheme}: no interior point while restoring QoS")))?;
        let next_ev = evaluate(problem, &structure, &next, qos);
        let gain = next_ev.max_min - ev.max_min;
        if !(gain > 0.0) && !next_ev.feasible {
            return Err(Error::Infeasible(format!(
                "{scheme}: best worst-user rate {:.4} below QoS {qos}",
                ev.max_min
            )));
        }
        let rel = gain / ev.max_min.abs().max(1e-12);
        p = next;
        ev = next_ev;
        if !ev.feasible && rel < opts.tolerance {
            return Err(Error::Infeasible(format!(
                "{scheme}: best worst-user rate {:.4} below QoS {qos}",
                ev.max_min
            )));
        }
    }

    let mut history = vec![ev.objective];
    let mut status = SolveStatus::MaxIterations;
    while iterations < opts.max_iterations {
        iterations += 1;
        let Some(next) = precoder_step(problem, &structure, &p, &ev, StepGoal::SumRate, qos) else {
            status = SolveStatus::Converged;
            break;
        };
        let next_ev = evaluate(problem, &structure, &next, qos);
        if !next_ev.feasible || !(next_ev.objective >= ev.objective) {
            status = SolveStatus::Converged;
            break;
        }
        let rel = (next_ev.objective - ev.objective) / ev.objective.abs().max(1e-12);
        let (next, next_ev) = extrapolate(problem, &structure, &p, next, next_ev, qos);
        p = next;
        ev = next_ev;
        history.push(ev.objective);
        if rel < opts.tolerance {
            status = SolveStatus::Converged;
            break;
        }
    }

    let weak_user = (structure.share_count() == 1).then(|| if structure.shares[0] { 0 } else { 1 });
    Ok(PrecoderSolution {
        scheme,
        precoder: p,
        rates: ev.rates,
        objective: ev.objective,
        history,
        status,
        weak_user,
    })
}

/// Tries longer steps along `to − from`; the AO direction is usually
/// consistent for many iterations, so this cuts the iteration count. Only
/// strict improvements of the true objective are taken.
fn extrapolate(
    problem: &SaaProblem,
    structure: &Structure,
    from: &PrecoderMatrix,
    to: PrecoderMatrix,
    to_ev: Evaluation,
    qos: f64,
) -> (PrecoderMatrix, Evaluation) {
    let mut best = (to, to_ev);
    for omega in [2.0, 4.0] {
        let mut cand = from.clone();
        for s in StreamId::ALL {
            for ((c, a), b) in cand.stream_mut(s).iter_mut().zip(from.stream(s)).zip(best.0.stream(s)) {
                *c = a + (b - a) * omega;
            }
        }
        let power = cand.total_power();
        if power > problem.pt {
            cand = cand.scaled((problem.pt / power).sqrt());
        }
        let cand_ev = evaluate(problem, structure, &cand, qos);
        if cand_ev.feasible && cand_ev.objective > best.1.objective {
            best = (cand, cand_ev);
        } else {
            break;
        }
    }
    best
}

fn matched(h: &[Complex64], power: f64) -> Vec<Complex64> {
    let norm = crate::channel::norm_sqr(h).sqrt();
    if norm == 0.0 || power <= 0.0 {
        return vec![Complex64::new(0.0, 0.0); h.len()];
    }
    let a = (power).sqrt() / norm;
    h.iter().map(|z| z * a).collect()
}

/// Warm start: matched beamformers on the private streams, the dominant
/// direction of `Ĥ` on the common stream with `common_fraction` of the power.
fn initial_precoder(problem: &SaaProblem, structure: &Structure, common_fraction: f64) -> PrecoderMatrix {
    let est = &problem.estimate;
    let pt = problem.pt;
    let n_private = structure.active[1..].iter().filter(|&&a| a).count();
    let pc = if structure.active[0] { common_fraction * pt } else { 0.0 };
    let pk = if n_private > 0 { (pt - pc) / n_private as f64 } else { 0.0 };
    let common = if structure.active[0] {
        dominant_direction(est).iter().map(|z| z * pc.sqrt()).collect()
    } else {
        vec![Complex64::new(0.0, 0.0); est.n_t()]
    };
    let private = |k: usize| {
        if structure.active[1 + k] {
            matched(est.column(k), pk)
        } else {
            vec![Complex64::new(0.0, 0.0); est.n_t()]
        }
    };
    PrecoderMatrix::new(common, private(0), private(1))
}

const RSMA_COMMON_FRACTION: f64 = 0.1;
const NOMA_COMMON_FRACTION: f64 = 0.5;

fn best_of(candidates: Vec<Result<PrecoderSolution>>) -> Result<PrecoderSolution> {
    let mut best: Option<PrecoderSolution> = None;
    let mut last_err = None;
    for c in candidates {
        match c {
            Ok(s) => {
                if best.as_ref().is_none_or(|b| s.objective > b.objective) {
                    best = Some(s);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Infeasible("no candidate".into())))
}

/// SDMA: common stream off. Besides the matched-beamformer start, the two
/// single-user starts are tried, since the sum-rate optimum under
/// interference is often single-user transmission.
pub fn optimize_sdma(problem: &SaaProblem, opts: &SolverOptions) -> Result<PrecoderSolution> {
    let structure = Structure::sdma();
    let mut candidates = vec![run_alternating(
        problem,
        Scheme::Sdma,
        structure,
        initial_precoder(problem, &structure, 0.0),
        opts,
    )];
    for k in 0..2 {
        let mut init = PrecoderMatrix::zeros(problem.estimate.n_t());
        *init.stream_mut(StreamId::private(k)) = matched(problem.estimate.column(k), problem.pt);
        candidates.push(run_alternating(problem, Scheme::Sdma, structure, init, opts));
    }
    best_of(candidates)
}

/// Users whose private stream NOMA may switch off: the one with the smaller
/// estimated channel norm, or both when the norms are within 1 dB.
fn noma_weak_candidates(problem: &SaaProblem) -> Vec<usize> {
    let n0 = problem.estimate.column_norm_sqr(0);
    let n1 = problem.estimate.column_norm_sqr(1);
    let weak = if n0 <= n1 { 0 } else { 1 };
    let ratio_db = 10.0 * (n0.max(n1) / n0.min(n1).max(f64::MIN_POSITIVE)).log10();
    if ratio_db < 1.0 {
        vec![weak, 1 - weak]
    } else {
        vec![weak]
    }
}

/// NOMA: the weak user's private stream is off and its message rides on the
/// common stream, which both users decode.
pub fn optimize_noma(problem: &SaaProblem, opts: &SolverOptions) -> Result<PrecoderSolution> {
    let candidates = noma_weak_candidates(problem)
        .into_iter()
        .map(|w| {
            let structure = Structure::noma(w);
            let init = initial_precoder(problem, &structure, NOMA_COMMON_FRACTION);
            run_alternating(problem, Scheme::Noma, structure, init, opts)
        })
        .collect();
    best_of(candidates)
}

/// Re-expresses a restricted-scheme solution as an RSMA point.
fn as_rsma(problem: &SaaProblem, sol: &PrecoderSolution, qos: f64) -> Option<PrecoderSolution> {
    let ev = evaluate(problem, &Structure::rsma(), &sol.precoder, qos);
    ev.feasible.then(|| PrecoderSolution {
        scheme: Scheme::Rsma,
        precoder: sol.precoder.clone(),
        rates: ev.rates,
        objective: ev.objective,
        history: vec![ev.objective],
        status: SolveStatus::Converged,
        weak_user: None,
    })
}

fn rsma_from(
    problem: &SaaProblem,
    opts: &SolverOptions,
    sdma: &Result<PrecoderSolution>,
    noma: &Result<PrecoderSolution>,
) -> Result<PrecoderSolution> {
    let structure = Structure::rsma();
    let own = run_alternating(
        problem,
        Scheme::Rsma,
        structure,
        initial_precoder(problem, &structure, RSMA_COMMON_FRACTION),
        opts,
    );
    // SDMA and NOMA points are feasible for RSMA and are fixed points of
    // its iteration, so they enter as finished candidates.
    let mut candidates = vec![own];
    for restricted in [sdma, noma].into_iter().flatten() {
        if let Some(s) = as_rsma(problem, restricted, opts.qos_rate) {
            candidates.push(Ok(s));
        }
    }
    best_of(candidates)
}

/// RSMA: one common stream and two private streams with a free common-rate
/// split. The SDMA and NOMA optima are included as candidates, so the result
/// is never below either.
pub fn optimize_rsma(problem: &SaaProblem, opts: &SolverOptions) -> Result<PrecoderSolution> {
    let sdma = optimize_sdma(problem, opts);
    let noma = optimize_noma(problem, opts);
    rsma_from(problem, opts, &sdma, &noma)
}

pub fn optimize(problem: &SaaProblem, scheme: Scheme, opts: &SolverOptions) -> Result<PrecoderSolution> {
    match scheme {
        Scheme::Rsma => optimize_rsma(problem, opts),
        Scheme::Sdma => optimize_sdma(problem, opts),
        Scheme::Noma => optimize_noma(problem, opts),
    }
}

/// Solutions of several schemes on one SAA problem, sharing work.
#[derive(Debug)]
pub struct SchemeSolutions {
    pub rsma: Option<Result<PrecoderSolution>>,
    pub sdma: Option<Result<PrecoderSolution>>,
    pub noma: Option<Result<PrecoderSolution>>,
}

impl SchemeSolutions {
    pub fn get(&self, scheme: Scheme) -> Option<&Result<PrecoderSolution>> {
        match scheme {
            Scheme::Rsma => self.rsma.as_ref(),
            Scheme::Sdma => self.sdma.as_ref(),
            Scheme::Noma => self.noma.as_ref(),
        }
    }
}

pub fn optimize_schemes(problem: &SaaProblem, schemes: &[Scheme], opts: &SolverOptions) -> SchemeSolutions {
    let want = |s| schemes.contains(&s);
    let need_restricted = want(Scheme::Rsma);
    let sdma = (want(Scheme::Sdma) || need_restricted).then(|| optimize_sdma(problem, opts));
    let noma = (want(Scheme::Noma) || need_restricted).then(|| optimize_noma(problem, opts));
    let rsma = want(Scheme::Rsma).then(|| rsma_from(problem, opts, sdma.as_ref().unwrap(), noma.as_ref().unwrap()));
    SchemeSolutions {
        rsma,
        sdma: if want(Scheme::Sdma) { sdma } else { None },
        noma: if want(Scheme::Noma) { noma } else { None },
    }
}

/// Plain alternating optimization for RSMA from the standard warm start,
/// without the restricted-scheme candidates.
pub fn rsma_alternating(problem: &SaaProblem, opts: &SolverOptions) -> Result<PrecoderSolution> {
    let s = Structure::rsma();
    run_alternating(problem, Scheme::Rsma, s, initial_precoder(problem, &s, RSMA_COMMON_FRACTION), opts)
}
