use super::*;
use crate::modem::QamAlphabet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn zero2() -> Vec<Complex64> {
    vec![c(0.0, 0.0); 2]
}

fn rates(rc: f64, r1: f64, r2: f64, shares: [f64; 2]) -> RateAllocation {
    RateAllocation { common_rates: [rc, rc], private_rates: [r1, r2], common_shares: shares }
}

fn params(symbols: usize) -> LinkParams {
    LinkParams { symbols, ..LinkParams::default() }
}

/// Orthogonal users; received powers `pc` (common) and `pp` (private) at both users.
fn orthogonal(pc: f64, pp: f64) -> (ChannelMatrix, PrecoderMatrix) {
    let h = ChannelMatrix::from_columns(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]).unwrap();
    let a = pc.sqrt();
    let p = PrecoderMatrix::new(vec![c(a, 0.0), c(0.0, a)], vec![c(pp.sqrt(), 0.0), c(0.0, 0.0)], vec![
        c(0.0, 0.0),
        c(pp.sqrt(), 0.0),
    ]);
    (h, p)
}

#[test]
fn split_examples() {
    assert_eq!(split_lengths(101, [1.0, 1.0]), [51, 50]);
    assert_eq!(split_lengths(100, [0.7, 0.0]), [100, 0]);
    assert_eq!(split_lengths(100, [2.0, 1.0]), [67, 33]);
    assert_eq!(split_lengths(100, [0.0, 0.0]), [50, 50]);
    assert_eq!(split_lengths(0, [1.0, 3.0]), [0, 0]);
    for n in 0..300 {
        let s = split_lengths(n, [0.37, 1.91]);
        assert_eq!(s[0] + s[1], n);
        assert!((s[0] as f64 - n as f64 * 0.37 / 2.28).abs() < 1.0);
    }
}

#[test]
fn equalizer_closed_forms() {
    let z = PrecoderMatrix::zeros(2);
    let h = vec![c(0.3, -1.0), c(0.7, 0.2)];
    assert_eq!(mmse_equalizers(&h, &z, 0), (c(0.0, 0.0), c(0.0, 0.0)));

    let pc = vec![c(0.5, 0.1), c(-0.3, 0.8)];
    let single = PrecoderMatrix::new(pc.clone(), zero2(), zero2());
    let (g, _) = mmse_equalizers(&h, &single, 0);
    let gamma = inner(&h, &pc).norm_sqr();
    assert!((g * inner(&h, &pc) - c(gamma / (1.0 + gamma), 0.0)).norm() < 1e-12);

    let p = PrecoderMatrix::new(pc, vec![c(0.2, 0.4), c(1.1, -0.5)], vec![c(-0.6, 0.3), c(0.1, 0.9)]);
    for k in 0..2 {
        let (gc, gk) = mmse_equalizers(&h, &p, k);
        let a = [inner(&h, p.common()), inner(&h, p.private(k)), inner(&h, p.private(1 - k))];
        let total: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>() + 1.0;
        assert!((gc - a[0].conj() / total).norm() < 1e-12);
        assert!((gk - a[1].conj() / (total - a[0].norm_sqr())).norm() < 1e-12);

        // The closed form is a stationary point of E|g·y − s|².
        let mse = |g: Complex64, gain: Complex64, power: f64| g.norm_sqr() * power - 2.0 * (g * gain).re + 1.0;
        for (g, gain, power) in [(gc, a[0], total), (gk, a[1], total - a[0].norm_sqr())] {
            let base = mse(g, gain, power);
            for d in [c(1e-5, 0.0), c(0.0, 1e-5), c(-1e-5, 0.0), c(0.0, -1e-5)] {
                assert!(mse(g + d, gain, power) >= base);
                let slope = (mse(g + d, gain, power) - base) / 1e-5;
                assert!(slope.abs() < 1e-4);
            }
        }
    }
}

#[test]
fn zero_precoder_transmits_nothing() {
    let cache = CodeCache::new();
    let plan = BlockPlan::new(&PrecoderMatrix::zeros(2), &rates(1.0, 1.0, 1.0, [0.5, 0.5]), &params(64), [1, 2, 3], &cache).unwrap();
    let msg = SplitMessage::random(&plan, &mut ChaCha8Rng::seed_from_u64(1));
    let block = transmit(&msg, &plan).unwrap();
    assert!(block.antennas.iter().flatten().all(|x| x.norm() == 0.0));
}

#[test]
fn common_only_is_rank_one() {
    let cache = CodeCache::new();
    let pc = vec![c(0.6, 0.2), c(-0.1, 0.7)];
    let p = PrecoderMatrix::new(pc.clone(), zero2(), zero2());
    let plan = BlockPlan::new(&p, &rates(2.0, 0.0, 0.0, [1.0, 1.0]), &params(64), [1, 2, 3], &cache).unwrap();
    assert!(plan.stream(StreamId::Private1).is_none());
    let block = transmit(&SplitMessage::random(&plan, &mut ChaCha8Rng::seed_from_u64(2)), &plan).unwrap();
    for t in 0..64 {
        let s = block.streams[0][t];
        assert!((block.antennas[0][t] - pc[0] * s).norm() < 1e-15);
        assert!((block.antennas[1][t] - pc[1] * s).norm() < 1e-15);
    }
}

#[test]
fn empirical_transmit_power() {
    let cache = CodeCache::new();
    let p = PrecoderMatrix::new(vec![c(0.6, 0.2), c(-0.1, 0.7)], vec![c(0.3, 0.0), c(0.2, -0.4)], vec![
        c(-0.5, 0.5),
        c(0.0, 0.3),
    ]);
    let plan = BlockPlan::new(&p, &rates(3.0, 5.0, 7.0, [1.0, 2.0]), &params(64), [4, 5, 6], &cache).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut energy = 0.0;
    let blocks = 1000;
    for _ in 0..blocks {
        let block = transmit(&SplitMessage::random(&plan, &mut rng), &plan).unwrap();
        energy += block.antennas.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>() / 64.0;
    }
    let measured = energy / blocks as f64;
    assert!((measured / p.total_power() - 1.0).abs() < 0.02, "{measured} vs {}", p.total_power());
}

#[test]
fn noiseless_round_trip_every_mcs() {
    let cache = CodeCache::new();
    let (h, p) = orthogonal(1e7, 1e4);
    let levels = [1.0, 3.0, 5.0, 7.2];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for &rc in &levels {
        for &r1 in &levels {
            for &r2 in &[1.0, 7.2] {
                let plan = BlockPlan::new(&p, &rates(rc, r1, r2, [1.0, 1.5]), &params(256), [7, 8, 9], &cache).unwrap();
                let msg = SplitMessage::random(&plan, &mut rng);
                let block = transmit(&msg, &plan).unwrap();
                for k in 0..2 {
                    let y = propagate_noiseless(&block, h.column(k));
                    let r = receive_sic(&y, h.column(k), k, &plan).unwrap();
                    assert!(r.common_ok() && r.private_ok(), "rc {rc} r1 {r1} r2 {r2} user {k}");
                    assert_eq!(recovered_bits(&r, &plan, &msg), merge_messages(&r, &plan));
                    assert_eq!(
                        merge_messages(&r, &plan),
                        plan.common_split[k] + plan.private_payload(k)
                    );
                }
            }
        }
    }
}

#[test]
fn alphabets_follow_rates() {
    let cache = CodeCache::new();
    let (_, p) = orthogonal(1.0, 1.0);
    let plan = BlockPlan::new(&p, &rates(1.0, 3.5, 7.2, [1.0, 1.0]), &params(256), [0; 3], &cache).unwrap();
    let a = StreamId::ALL.map(|s| plan.stream(s).unwrap().mcs.alphabet);
    assert_eq!(a, [QamAlphabet::QAM4, QamAlphabet::QAM16, QamAlphabet::QAM256]);
}

#[test]
fn reconstruction_is_bit_exact() {
    let cache = CodeCache::new();
    let h = ChannelMatrix::from_columns(&[vec![c(1.2, 0.3), c(-0.4, 0.9)], vec![c(0.2, -0.8), c(1.1, 0.1)]]).unwrap();
    let p = PrecoderMatrix::new(vec![c(3.0, 0.0), c(2.0, 1.0)], vec![c(1.0, 0.2), c(-0.5, 0.0)], vec![
        c(0.1, 0.4),
        c(0.9, -0.2),
    ]);
    let rates = crate::precoder::SaaProblem::from_samples(h.clone(), vec![h.clone()], 20.0).average_rates(&p);
    let mut backed = rates;
    for k in 0..2 {
        backed.common_rates[k] *= 0.6;
        backed.private_rates[k] *= 0.6;
    }
    backed.common_shares = [0.4, 0.6];
    let plan = BlockPlan::new(&p, &backed, &params(256), [10, 11, 12], &cache).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut passed = 0;
    for _ in 0..20 {
        let msg = SplitMessage::random(&plan, &mut rng);
        let block = transmit(&msg, &plan).unwrap();
        for k in 0..2 {
            let y = propagate(&block, h.column(k), &mut rng);
            let r = receive_sic(&y, h.column(k), k, &plan).unwrap();
            if r.common_ok() {
                passed += 1;
                let s_hat = reconstruct_common(&plan, &r.common.as_ref().unwrap().info).unwrap();
                assert_eq!(s_hat, block.streams[0]);
                let genie = cancel_common(&y, h.column(k), &plan.precoder, &block.streams[0]);
                let real = cancel_common(&y, h.column(k), &plan.precoder, &s_hat);
                assert_eq!(genie, real);
                assert!(r.cancelled);
            }
        }
    }
    assert!(passed > 30, "common decoded only {passed} times");
}

#[test]
fn silent_common_reduces_to_private_receiver() {
    let cache = CodeCache::new();
    let h = ChannelMatrix::from_columns(&[vec![c(1.0, 0.3), c(-0.4, 0.9)], vec![c(0.2, -0.8), c(1.1, 0.1)]]).unwrap();
    let p1 = vec![c(2.0, 0.2), c(-0.5, 0.0)];
    let p2 = vec![c(0.1, 0.4), c(2.5, -0.2)];
    let faint = PrecoderMatrix::new(vec![c(1e-9, 0.0), c(0.0, 1e-9)], p1.clone(), p2.clone());
    let none = PrecoderMatrix::new(zero2(), p1, p2);
    let r = rates(0.0, 2.0, 2.5, [0.0, 0.0]);
    let a = BlockPlan::new(&faint, &r, &params(128), [1, 2, 3], &cache).unwrap();
    let b = BlockPlan::new(&none, &r, &params(128), [1, 2, 3], &cache).unwrap();
    assert!(a.stream(StreamId::Common).is_none());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let msg = SplitMessage::random(&a, &mut rng);
        let block_a = transmit(&msg, &a).unwrap();
        let block_b = transmit(&msg, &b).unwrap();
        for k in 0..2 {
            let noise: Vec<Complex64> = (0..128).map(|_| complex_normal(&mut rng)).collect();
            let ya: Vec<Complex64> =
                propagate_noiseless(&block_a, h.column(k)).iter().zip(&noise).map(|(y, z)| y + z).collect();
            let yb: Vec<Complex64> =
                propagate_noiseless(&block_b, h.column(k)).iter().zip(&noise).map(|(y, z)| y + z).collect();
            let ra = receive_sic(&ya, h.column(k), k, &a).unwrap();
            let rb = receive_sic(&yb, h.column(k), k, &b).unwrap();
            assert_eq!(ra.private, rb.private);
            assert!(ra.common.is_none() && !ra.cancelled);
        }
    }
}

#[test]
fn merge_counts() {
    let cache = CodeCache::new();
    let (_, p) = orthogonal(1.0, 1.0);
    let plan = BlockPlan::new(&p, &rates(1.0, 1.0, 1.0, [1.0, 1.0]), &params(256), [0; 3], &cache).unwrap();
    let ok = |b: bool| Some(Decoded { info: vec![], crc_ok: b });
    let mk = |common, private| ReceiveResult {
        user: 0,
        common,
        private,
        g_common: c(0.0, 0.0),
        g_private: c(0.0, 0.0),
        cancelled: false,
    };
    let (kc, kp) = (plan.common_split[0], plan.private_payload(0));
    assert_eq!(merge_messages(&mk(ok(true), ok(true)), &plan), kc + kp);
    assert_eq!(merge_messages(&mk(ok(false), ok(true)), &plan), kp);
    assert_eq!(merge_messages(&mk(ok(true), ok(false)), &plan), kc);
    assert_eq!(merge_messages(&mk(ok(false), ok(false)), &plan), 0);
}

#[test]
fn length_mismatch_is_reported() {
    let cache = CodeCache::new();
    let (h, p) = orthogonal(1.0, 1.0);
    let plan = BlockPlan::new(&p, &rates(1.0, 1.0, 1.0, [1.0, 1.0]), &params(64), [0; 3], &cache).unwrap();
    assert!(receive_sic(&[c(0.0, 0.0); 10], h.column(0), 0, &plan).is_err());
}

#[test]
fn codes_are_cached() {
    let cache = CodeCache::new();
    let a = cache.get(512, 200, Crc::CRC11, 3.004).unwrap();
    let b = cache.get(512, 200, Crc::CRC11, 2.996).unwrap();
    assert!(Arc::ptr_eq(&a, &b));
    assert_eq!(cache.len(), 1);
}
