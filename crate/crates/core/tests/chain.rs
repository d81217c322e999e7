mod common;

use common::*;
use rand::Rng;
use rsma_lls::amc::BackoffTable;
use rsma_lls::channel::{sample_conditional, sample_estimate, CsitModel};
use rsma_lls::modem::QamAlphabet;
use rsma_lls::precoder::{optimize, PrecoderMatrix, RateAllocation, SaaProblem, SolverOptions};
use rsma_lls::sim::{run_trial, CampaignConfig, PointResult, SchemeTrial};
use rsma_lls::transceiver::{mmse_equalizers, CodeCache};
use rsma_lls::{Complex64, Scheme};

#[test]
fn noiseless_round_trip_all_schemes_and_alphabets() {
    let cache = CodeCache::new();
    for scheme in Scheme::ALL {
        for (i, a) in QamAlphabet::ALL.into_iter().enumerate() {
            assert!(noiseless_block(scheme, a, 10 + i as u64, &cache), "{scheme} {a}");
        }
    }
}

fn random_vec(r: &mut impl Rng, scale: f64) -> Vec<Complex64> {
    (0..2).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) * scale).collect()
}

#[test]
fn equalizers_match_numerical_mmse() {
    let mut r = rng(5);
    for _ in 0..200 {
        let h = random_vec(&mut r, 1.5);
        let p = PrecoderMatrix::new(random_vec(&mut r, 2.0), random_vec(&mut r, 1.0), random_vec(&mut r, 1.0));
        for k in 0..2 {
            let (gc, gp) = mmse_equalizers(&h, &p, k);
            let a = link_gains(&h, &p);
            let want_c = numerical_mmse(&a, 0);
            let want_p = numerical_mmse(&[a[1 + k], a[2 - k]], 0);
            assert!((gc - want_c).norm() < 1e-9, "{gc} vs {want_c}");
            assert!((gp - want_p).norm() < 1e-9, "{gp} vs {want_p}");
        }
    }
}

#[test]
fn llrs_match_enumeration() {
    let mut r = rng(6);
    for a in QamAlphabet::ALL {
        for _ in 0..500 {
            let z = Complex64::new(r.random_range(-1.6..1.6), r.random_range(-1.6..1.6));
            let gamma = r.random_range(0.05..500.0);
            let got = a.llrs(&[z], gamma);
            for (g, w) in got.iter().zip(brute_force_llrs(a, z, gamma)) {
                assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{a}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn channel_reconstruction_identity() {
    let mut r = rng(7);
    for snr_db in [0.0, 10.0, 30.0] {
        let model = CsitModel::new(10f64.powf(snr_db / 10.0), 0.6).unwrap();
        for _ in 0..100 {
            let est = sample_estimate(2, 2, &mut r);
            let set = sample_conditional(&est, model, &mut r);
            let (a, b) = ((1.0 - model.sigma_e2).sqrt(), model.sigma_e2.sqrt());
            for ((h, e), t) in set.realization.entries().iter().zip(est.entries()).zip(set.error.entries()) {
                assert!((h - (e * a + t * b)).norm() < 1e-12);
            }
        }
    }
}

fn check_solution(rates: &RateAllocation, p: &PrecoderMatrix, pt: f64, qos: f64, history: &[f64]) {
    assert!(history.windows(2).all(|w| w[1] >= w[0] - 1e-12), "non-monotone {history:?}");
    assert!(p.total_power() <= pt * (1.0 + 1e-6), "power {} > {pt}", p.total_power());
    let shares: f64 = rates.common_shares.iter().sum();
    assert!(rates.common_shares.iter().all(|&c| c >= -1e-6));
    assert!(shares <= rates.common_rate() + 1e-6, "shares {shares} > common rate {}", rates.common_rate());
    for k in 0..2 {
        assert!(rates.user_rate(k) >= qos - 1e-6, "user {k} rate {} < {qos}", rates.user_rate(k));
    }
}

#[test]
fn solver_ascent_and_constraints_on_random_instances() {
    let mut r = rng(8);
    for i in 0..50 {
        let snr_db = r.random_range(0.0..30.0);
        let pt = 10f64.powf(snr_db / 10.0);
        let model = CsitModel::new(pt, 0.6).unwrap();
        let est = sample_estimate(2, 2, &mut r);
        let problem = SaaProblem::draw(&est, model, 40, &mut r);
        let qos = if i % 2 == 0 { 0.0 } else { 0.1 };
        let opts = SolverOptions { saa_samples: 40, max_iterations: 100, tolerance: 1e-5, qos_rate: qos };
        for scheme in Scheme::ALL {
            match optimize(&problem, scheme, &opts) {
                Ok(sol) => {
                    check_solution(&sol.rates, &sol.precoder, pt, qos, &sol.history);
                    // reported rates are the SAA rates of the returned precoder
                    let fresh = problem.average_rates(&sol.precoder);
                    for k in 0..2 {
                        assert!((fresh.private_rates[k] - sol.rates.private_rates[k]).abs() < 1e-9);
                    }
                    assert!((sol.objective - sol.rates.sum_rate()).abs() < 1e-9);
                }
                Err(e) => assert!(qos > 0.0 && scheme == Scheme::Sdma, "{scheme} failed: {e}"),
            }
        }
    }
}

#[test]
fn trials_are_deterministic() {
    let cfg = CampaignConfig { trials: 1, saa_samples: 30, seed: 9, ..CampaignConfig::default() };
    let cache = CodeCache::new();
    let a = run_trial(&cfg, &BackoffTable::new(), 20.0, 3, &cache).unwrap();
    let b = run_trial(&cfg, &BackoffTable::new(), 20.0, 3, &CodeCache::new()).unwrap();
    assert_eq!(a, b);
    let c = run_trial(&cfg, &BackoffTable::new(), 20.0, 4, &cache).unwrap();
    assert_ne!(a, c);
}

fn trial(delivered: [u64; 2], symbols: u64) -> SchemeTrial {
    SchemeTrial {
        scheme: Scheme::Rsma,
        feasible: true,
        objective: 0.0,
        delivered,
        stream_bits: [0, delivered[0], delivered[1]],
        active: [false, true, true],
        failed: [false; 3],
        symbols,
        rates: RateAllocation::default(),
        power_fractions: [0.0; 3],
    }
}

#[test]
fn throughput_is_a_ratio_of_integer_sums() {
    let one = PointResult { scheme: Scheme::Rsma, snr_db: 0.0, trials: vec![trial([256, 256], 256)] };
    assert_eq!(one.throughput(), 2.0);
    let none = PointResult { scheme: Scheme::Rsma, snr_db: 0.0, trials: vec![trial([0, 0], 256); 4] };
    assert_eq!(none.throughput(), 0.0);
    let mixed = PointResult {
        scheme: Scheme::Rsma,
        snr_db: 0.0,
        trials: vec![trial([1, 0], 3), trial([0, 0], 3), trial([1, 0], 3)],
    };
    assert_eq!(mixed.throughput(), 2.0 / 9.0);
}
