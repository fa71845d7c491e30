//! Simulated statistics against closed forms over a randomized grid of strategies.

use effguard::adversary::{AdversaryStrategy, BlindingModel, EtaDependence, QuantumModel};
use effguard::analysis::{analytic_oracle, estimate, Thresholds};
use effguard::engine::{run_simulation, simulate_tally, tally};
use effguard::protocol::{EtaIndex, ProtocolParams, ValidatedParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Expected error rate on sifted Diagonal detections under setting `k`,
/// counted directly from the round model: Alice and Bob both pick Diagonal;
/// blinding clicks need Eve in Diagonal too and never err unless a double
/// click replaces the bit; single photons err at rate lambda.
fn diagonal_error_rate(s: &AdversaryStrategy, p: &ValidatedParams, k: EtaIndex) -> f64 {
    let scale = s.blinding.scale(k);
    let blind_clicks = s.q * s.p_c * (1.0 - s.blinding.p_e) * s.blinding.f_match * scale;
    let photon_clicks = s.q * (1.0 - s.p_c) * p.eta(k);
    let errors = photon_clicks * s.quantum.lambda + blind_clicks * s.blinding.p_double * 0.5;
    errors / (blind_clicks + photon_clicks)
}

fn random_case(rng: &mut ChaCha8Rng) -> (ValidatedParams, AdversaryStrategy) {
    let p_x = rng.gen_range(0.6..0.95);
    let eta1 = rng.gen_range(0.1..1.0);
    let params = ProtocolParams {
        p_x,
        eta1,
        eta2: eta1 * rng.gen_range(0.1..0.8),
        p_eta1: rng.gen_range(0.5..0.9),
        rounds: 1_000_000,
        ec_efficiency: 1.0,
    }
    .validate()
    .unwrap();
    let strategy = AdversaryStrategy {
        q: rng.gen_range(0.3..1.0),
        p_c: rng.gen_range(0.0..0.8),
        blinding: BlindingModel {
            p_e: if rng.gen_bool(0.5) { 0.5 } else { rng.gen_range(0.0..1.0) },
            f_match: rng.gen_range(0.5..1.0),
            p_double: 0.0,
            eta_dependence: EtaDependence::Independent,
        },
        quantum: QuantumModel {
            lambda: rng.gen_range(0.0..0.1),
        },
    };
    (params, strategy)
}

#[test]
fn empirical_rates_converge_to_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for case in 0..6 {
        let (p, s) = random_case(&mut rng);
        let o = analytic_oracle(&s, &p).unwrap();
        let t = simulate_tally(&p, &s, 1000 + case, 4);
        let r = estimate(&t, &p, &Thresholds::default()).unwrap();
        let band = |x: f64, n: u64| 4.0 * (x * (1.0 - x) / n as f64).sqrt();
        let ctx = format!("case {case}: {s:?} {p:?}");

        assert!((r.stats.r1 - o.r1).abs() <= band(o.r1, r.stats.n1), "R1 {ctx}");
        assert!((r.stats.r2 - o.r2).abs() <= band(o.r2, r.stats.n2), "R2 {ctx}");
        // the clamp at 0 only ever moves gamma towards a non-negative truth
        assert!((r.gamma - o.gamma).abs() <= 4.0 * r.gamma_sigma, "gamma {ctx}");

        for k in [EtaIndex::One, EtaIndex::Two] {
            let expected = diagonal_error_rate(&s, &p, k);
            let n = t.pe_count(k);
            let got = r.stats.e_obs(k).unwrap();
            assert!((got - expected).abs() <= band(expected, n).max(4.0 / n as f64), "e_obs{k:?} {ctx}");
        }

        // With Eve's basis choice unbiased, blinding clicks are basis
        // independent and the per-signal ratio g_k / R_k is the same quantity.
        if s.blinding.p_e == 0.5 || s.p_c == 0.0 {
            assert!((diagonal_error_rate(&s, &p, EtaIndex::One) - o.e_obs1).abs() < 1e-12);
            assert!((diagonal_error_rate(&s, &p, EtaIndex::Two) - o.e_obs2.unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn quantum_only_error_rate_is_lambda() {
    let p = ProtocolParams {
        p_x: 0.9,
        eta1: 1.0,
        eta2: 0.5,
        p_eta1: 0.9,
        rounds: 1_000_000,
        ec_efficiency: 1.0,
    }
    .validate()
    .unwrap();
    let s = AdversaryStrategy {
        q: 1.0,
        p_c: 0.0,
        blinding: BlindingModel::matched(0.5),
        quantum: QuantumModel { lambda: 0.03 },
    };
    let t = simulate_tally(&p, &s, 3, 4);
    let sifted = t.pe_count[0] + t.pe_count[1] + t.raw_key_len;
    let errors = t.pe_errors[0] + t.pe_errors[1] + t.raw_key_errors;
    let rate = errors as f64 / sifted as f64;
    let sigma = (0.03 * 0.97 / sifted as f64).sqrt();
    assert!((rate - 0.03).abs() <= 4.0 * sigma, "rate {rate}");
    assert_eq!(analytic_oracle(&s, &p).unwrap().e_obs1, 0.03);
}

#[test]
fn honest_run_gives_lambda_phase_error() {
    let p = ProtocolParams {
        p_x: 0.9,
        eta1: 0.10,
        eta2: 0.05,
        p_eta1: 0.9,
        rounds: 1_000_000,
        ec_efficiency: 1.0,
    }
    .validate()
    .unwrap();
    let s = effguard::adversary::honest_channel_as_strategy(0.25, 0.01).unwrap();
    let t = simulate_tally(&p, &s, 5, 4);
    let r = estimate(&t, &p, &Thresholds::default()).unwrap();
    let sigma_r2 = (0.0125 * 0.9875 / r.stats.n2 as f64).sqrt();
    assert!((r.stats.r2 - 0.0125).abs() <= 4.0 * sigma_r2);
    assert!(!r.abort(), "{}", r.render());
    assert!(r.key_fraction > 0.7);
}

#[test]
fn dependent_blinding_hides_from_gamma_but_not_from_eve() {
    let p = ProtocolParams {
        p_x: 0.9,
        eta1: 0.10,
        eta2: 0.05,
        p_eta1: 0.7,
        rounds: 400_000,
        ec_efficiency: 1.0,
    }
    .validate()
    .unwrap();
    let s = AdversaryStrategy {
        q: 1.0,
        p_c: 1.0,
        blinding: BlindingModel {
            eta_dependence: EtaDependence::Dependent {
                scale1: 1.0,
                scale2: 0.5,
            },
            ..BlindingModel::matched(0.9)
        },
        quantum: QuantumModel { lambda: 0.0 },
    };
    let records = run_simulation(&p, &s, 99);
    let t = tally(&records).unwrap();
    let r = estimate(&t, &p, &Thresholds::default()).unwrap();
    assert!(r.gamma <= 5.0 * r.gamma_sigma);
    assert!(!r.abort());
    assert_eq!(t.raw_key_errors, 0);
    let leaked = records
        .iter()
        .filter(|r| r.in_raw_key())
        .all(|r| r.eve.and_then(|e| e.bit()) == r.outcome.bit());
    assert!(leaked);
}

#[test]
fn double_clicks_count_as_detections() {
    let p = ProtocolParams {
        p_x: 0.9,
        eta1: 0.10,
        eta2: 0.05,
        p_eta1: 0.5,
        rounds: 200_000,
        ec_efficiency: 1.0,
    }
    .validate()
    .unwrap();
    let s = AdversaryStrategy {
        q: 1.0,
        p_c: 1.0,
        blinding: BlindingModel {
            p_double: 0.4,
            ..BlindingModel::matched(0.9)
        },
        quantum: QuantumModel { lambda: 0.0 },
    };
    let records = run_simulation(&p, &s, 4);
    let t = tally(&records).unwrap();
    assert!(t.double_clicks > 0);
    assert!(records.iter().filter(|r| r.double_click).all(|r| r.outcome.is_conclusive()));
    let o = analytic_oracle(&s, &p).unwrap();
    let r1 = t.detected[0] as f64 / t.sent[0] as f64;
    assert!((r1 - o.r1).abs() <= 4.0 * (o.r1 * (1.0 - o.r1) / t.sent[0] as f64).sqrt());
    // half of the replaced bits are wrong
    let rate = t.raw_key_errors as f64 / t.raw_key_len as f64;
    assert!((rate - 0.2).abs() <= 4.0 * (0.16 / t.raw_key_len as f64).sqrt());
}
