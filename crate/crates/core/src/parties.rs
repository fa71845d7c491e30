//! Alice's single-photon source and Bob's passive-loss detector with a
//! randomly chosen efficiency level.

use rand::Rng;

use crate::adversary::BlindingModel;
use crate::protocol::{Basis, Bit, EtaIndex, Outcome, Polarization, ValidatedParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreparedState {
    pub basis: Basis,
    pub bit: Bit,
}

impl PreparedState {
    pub fn polarization(&self) -> Polarization {
        Polarization::encode(self.basis, self.bit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BobSettings {
    pub basis: Basis,
    pub eta: EtaIndex,
}

/// What arrives at Bob's device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Blocked,
    SinglePhoton(Polarization),
    /// Bright trigger pulse encoding Eve's fake-state measurement.
    Trigger { y_e: Basis, b_e: Bit },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub outcome: Outcome,
    pub double_click: bool,
}

fn biased_basis<R: Rng + ?Sized>(rng: &mut R, p_x: f64) -> Basis {
    if rng.gen::<f64>() < p_x {
        Basis::Linear
    } else {
        Basis::Diagonal
    }
}

fn random_bit<R: Rng + ?Sized>(rng: &mut R) -> Bit {
    rng.gen_range(0..=1)
}

pub fn alice_prepare<R: Rng + ?Sized>(rng: &mut R, params: &ValidatedParams) -> PreparedState {
    let basis = biased_basis(rng, params.p_x);
    let bit = random_bit(rng);
    PreparedState { basis, bit }
}

pub fn bob_choose_settings<R: Rng + ?Sized>(rng: &mut R, params: &ValidatedParams) -> BobSettings {
    let basis = biased_basis(rng, params.p_x);
    let eta = if rng.gen::<f64>() < params.p_eta1 {
        EtaIndex::One
    } else {
        EtaIndex::Two
    };
    BobSettings { basis, eta }
}

/// Single photons are thinned by the attenuator (Bernoulli(eta_k)) and
/// then measured; mismatched bases give a uniform bit. Triggers bypass the
/// attenuator and click only when Bob's basis equals Eve's.
pub fn bob_detect<R: Rng + ?Sized>(
    signal: Signal,
    settings: BobSettings,
    rng: &mut R,
    params: &ValidatedParams,
    blinding: &BlindingModel,
) -> Detection {
    let outcome = match signal {
        Signal::Blocked => Outcome::Inconclusive,
        Signal::SinglePhoton(pol) => {
            if rng.gen::<f64>() >= params.eta(settings.eta) {
                Outcome::Inconclusive
            } else if pol.basis() == settings.basis {
                Outcome::Bit(pol.bit())
            } else {
                Outcome::Bit(random_bit(rng))
            }
        }
        Signal::Trigger { y_e, b_e } => {
            if settings.basis == y_e && rng.gen::<f64>() < blinding.match_probability(settings.eta)
            {
                if rng.gen::<f64>() < blinding.p_double {
                    return Detection {
                        outcome: Outcome::Bit(random_bit(rng)),
                        double_click: true,
                    };
                }
                Outcome::Bit(b_e)
            } else {
                Outcome::Inconclusive
            }
        }
    };
    Detection {
        outcome,
        double_click: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::EtaDependence;
    use crate::protocol::ProtocolParams;
    use crate::rng::{round_rng, StreamLabel};

    fn params(eta1: f64, eta2: f64, p_eta1: f64) -> ValidatedParams {
        ProtocolParams {
            p_x: 0.9,
            eta1,
            eta2,
            p_eta1,
            rounds: 1,
            ec_efficiency: 1.0,
        }
        .validate()
        .unwrap()
    }

    fn sigma4(n: u64, p: f64) -> f64 {
        4.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn alice_statistics() {
        let p = params(0.1, 0.05, 0.9);
        let n = 1_000_000u64;
        let (mut linear, mut ones) = (0u64, 0u64);
        for i in 0..n {
            let s = alice_prepare(&mut round_rng(9, i, StreamLabel::Alice), &p);
            assert_eq!(s.polarization().basis(), s.basis);
            assert_eq!(s.polarization().bit(), s.bit);
            linear += u64::from(s.basis == Basis::Linear);
            ones += u64::from(s.bit);
        }
        assert!((linear as f64 / n as f64 - 0.9).abs() <= sigma4(n, 0.9));
        assert!((ones as f64 / n as f64 - 0.5).abs() <= sigma4(n, 0.5));
        let s = PreparedState {
            basis: Basis::Linear,
            bit: 1,
        };
        assert_eq!(s.polarization(), Polarization::V);
    }

    #[test]
    fn bob_settings_statistics() {
        let p = params(0.1, 0.05, 0.9);
        let n = 1_000_000u64;
        let (mut eta1, mut joint) = (0u64, 0u64);
        for i in 0..n {
            let s = bob_choose_settings(&mut round_rng(10, i, StreamLabel::Bob), &p);
            eta1 += u64::from(s.eta == EtaIndex::One);
            joint += u64::from(s.eta == EtaIndex::One && s.basis == Basis::Linear);
        }
        let f = eta1 as f64 / n as f64;
        assert!((f - 0.9).abs() <= 0.0012, "eta1 fraction {f}");
        assert!((joint as f64 / n as f64 - 0.81).abs() <= sigma4(n, 0.81));
    }

    #[test]
    fn matched_single_photon_at_unit_efficiency() {
        let p = params(1.0, 0.5, 0.5);
        let blind = BlindingModel::matched(0.9);
        let settings = BobSettings {
            basis: Basis::Linear,
            eta: EtaIndex::One,
        };
        for i in 0..1000 {
            let d = bob_detect(
                Signal::SinglePhoton(Polarization::H),
                settings,
                &mut round_rng(11, i, StreamLabel::Bob),
                &p,
                &blind,
            );
            assert_eq!(d.outcome, Outcome::Bit(0));
            assert!(!d.double_click);
        }
    }

    #[test]
    fn trigger_in_other_basis_is_inconclusive() {
        let p = params(0.1, 0.05, 0.9);
        let blind = BlindingModel::matched(0.9);
        for eta in [EtaIndex::One, EtaIndex::Two] {
            let settings = BobSettings {
                basis: Basis::Diagonal,
                eta,
            };
            for i in 0..1000 {
                let d = bob_detect(
                    Signal::Trigger {
                        y_e: Basis::Linear,
                        b_e: 1,
                    },
                    settings,
                    &mut round_rng(12, i, StreamLabel::Bob),
                    &p,
                    &blind,
                );
                assert_eq!(d.outcome, Outcome::Inconclusive);
            }
        }
    }

    #[test]
    fn blocked_is_inconclusive() {
        let p = params(0.1, 0.05, 0.9);
        let blind = BlindingModel::matched(0.9);
        let d = bob_detect(
            Signal::Blocked,
            BobSettings {
                basis: Basis::Linear,
                eta: EtaIndex::One,
            },
            &mut round_rng(13, 0, StreamLabel::Bob),
            &p,
            &blind,
        );
        assert_eq!(
            d,
            Detection {
                outcome: Outcome::Inconclusive,
                double_click: false
            }
        );
    }

    #[test]
    fn mismatched_single_photon_is_uniform() {
        let p = params(1.0, 0.5, 0.5);
        let blind = BlindingModel::matched(0.9);
        let settings = BobSettings {
            basis: Basis::Linear,
            eta: EtaIndex::One,
        };
        let n = 200_000u64;
        let mut ones = 0u64;
        for i in 0..n {
            let d = bob_detect(
                Signal::SinglePhoton(Polarization::Plus),
                settings,
                &mut round_rng(14, i, StreamLabel::Bob),
                &p,
                &blind,
            );
            ones += u64::from(d.outcome.bit().expect("unit efficiency always detects"));
        }
        // chi-square with one degree of freedom; 4 sigma is chi2 < 16
        let expected = n as f64 / 2.0;
        let chi2 = 2.0 * (ones as f64 - expected).powi(2) / expected;
        assert!(chi2 < 16.0, "chi2={chi2}");
    }

    #[test]
    fn single_photon_detection_tracks_efficiency_in_every_cell() {
        let p = params(0.1, 0.05, 0.5);
        let blind = BlindingModel::matched(0.9);
        let n = 200_000u64;
        for (c, basis) in [Basis::Linear, Basis::Diagonal].into_iter().enumerate() {
            for eta in [EtaIndex::One, EtaIndex::Two] {
                let settings = BobSettings { basis, eta };
                let mut hits = 0u64;
                for i in 0..n {
                    let rng = &mut round_rng(15 + c as u64, i, StreamLabel::Bob);
                    let d = bob_detect(Signal::SinglePhoton(Polarization::V), settings, rng, &p, &blind);
                    hits += u64::from(d.outcome.is_conclusive());
                }
                let e = p.eta(eta);
                assert!((hits as f64 / n as f64 - e).abs() <= sigma4(n, e));
            }
        }
    }

    #[test]
    fn trigger_response_is_efficiency_independent() {
        let p = params(0.1, 0.05, 0.5);
        let blind = BlindingModel {
            f_match: 0.7,
            ..BlindingModel::matched(0.9)
        };
        let n = 200_000u64;
        let mut rate = [0.0; 2];
        for (slot, eta) in [EtaIndex::One, EtaIndex::Two].into_iter().enumerate() {
            let settings = BobSettings {
                basis: Basis::Linear,
                eta,
            };
            let mut hits = 0u64;
            for i in 0..n {
                let d = bob_detect(
                    Signal::Trigger {
                        y_e: Basis::Linear,
                        b_e: 0,
                    },
                    settings,
                    &mut round_rng(20 + slot as u64, i, StreamLabel::Bob),
                    &p,
                    &blind,
                );
                if let Outcome::Bit(b) = d.outcome {
                    assert_eq!(b, 0);
                    hits += 1;
                }
            }
            rate[slot] = hits as f64 / n as f64;
        }
        let sd = (2.0 * 0.7 * 0.3 / n as f64).sqrt();
        assert!((rate[0] - rate[1]).abs() <= 4.0 * sd);
        assert!((rate[0] - 0.7).abs() <= sigma4(n, 0.7));
    }

    #[test]
    fn dependent_trigger_response_scales() {
        let p = params(0.1, 0.05, 0.5);
        let blind = BlindingModel {
            eta_dependence: EtaDependence::Dependent {
                scale1: 1.0,
                scale2: 0.5,
            },
            ..BlindingModel::matched(0.9)
        };
        let settings = BobSettings {
            basis: Basis::Linear,
            eta: EtaIndex::Two,
        };
        let n = 100_000u64;
        let mut hits = 0u64;
        for i in 0..n {
            let d = bob_detect(
                Signal::Trigger {
                    y_e: Basis::Linear,
                    b_e: 1,
                },
                settings,
                &mut round_rng(30, i, StreamLabel::Bob),
                &p,
                &blind,
            );
            hits += u64::from(d.outcome.is_conclusive());
        }
        assert!((hits as f64 / n as f64 - 0.5).abs() <= sigma4(n, 0.5));
    }

    #[test]
    fn double_clicks_replace_bit_and_set_flag() {
        let p = params(0.1, 0.05, 0.5);
        let blind = BlindingModel {
            p_double: 0.3,
            ..BlindingModel::matched(0.9)
        };
        let settings = BobSettings {
            basis: Basis::Diagonal,
            eta: EtaIndex::One,
        };
        let n = 100_000u64;
        let (mut doubles, mut wrong) = (0u64, 0u64);
        for i in 0..n {
            let d = bob_detect(
                Signal::Trigger {
                    y_e: Basis::Diagonal,
                    b_e: 0,
                },
                settings,
                &mut round_rng(31, i, StreamLabel::Bob),
                &p,
                &blind,
            );
            assert!(d.outcome.is_conclusive());
            if d.double_click {
                doubles += 1;
                wrong += u64::from(d.outcome == Outcome::Bit(1));
            } else {
                assert_eq!(d.outcome, Outcome::Bit(0));
            }
        }
        assert!((doubles as f64 / n as f64 - 0.3).abs() <= sigma4(n, 0.3));
        assert!((wrong as f64 / doubles as f64 - 0.5).abs() <= sigma4(doubles, 0.5));
    }
}
