//! Eve's per-round strategy mixture: blinding (fake-state) attack with
//! probability `q * p_c`, single-photon quantum attack with probability
//! `q * (1 - p_c)`, blocking otherwise.

use rand::Rng;

use crate::error::{Error, Result};
use crate::parties::{PreparedState, Signal};
use crate::protocol::{Basis, Bit, EtaIndex, ValidatedParams};

/// How the blinded device's conclusive probability depends on Bob's
/// efficiency setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaDependence {
    /// Response independent of the efficiency setting.
    Independent,
    /// Conclusive probability multiplied by `scale1` / `scale2` under
    /// eta1 / eta2. Models attacks the estimator cannot see, such as
    /// time-shifting, where the response tracks the efficiency.
    Dependent { scale1: f64, scale2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlindingModel {
    /// Probability that Eve measures in the Linear basis during the
    /// fake-state phase.
    pub p_e: f64,
    /// Conclusive probability when Bob's basis matches Eve's.
    pub f_match: f64,
    /// Double-click probability on conclusive triggers.
    pub p_double: f64,
    pub eta_dependence: EtaDependence,
}

impl BlindingModel {
    /// Ideal blinding with Eve's basis distribution matched to the
    /// protocol's basis bias.
    pub fn matched(p_x: f64) -> Self {
        BlindingModel {
            p_e: p_x,
            f_match: 1.0,
            p_double: 0.0,
            eta_dependence: EtaDependence::Independent,
        }
    }

    pub fn scale(&self, k: EtaIndex) -> f64 {
        match (self.eta_dependence, k) {
            (EtaDependence::Independent, _) => 1.0,
            (EtaDependence::Dependent { scale1, .. }, EtaIndex::One) => scale1,
            (EtaDependence::Dependent { scale2, .. }, EtaIndex::Two) => scale2,
        }
    }

    /// Probability of a conclusive trigger given a basis match and setting `k`.
    pub fn match_probability(&self, k: EtaIndex) -> f64 {
        self.f_match * self.scale(k)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("p_e", self.p_e)?;
        check_unit("f_match", self.f_match)?;
        check_unit("p_double", self.p_double)?;
        if let EtaDependence::Dependent { scale1, scale2 } = self.eta_dependence {
            check_unit("scale1", scale1)?;
            check_unit("scale2", scale2)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumModel {
    /// Single-photon error rate, in [0, 1/2].
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversaryStrategy {
    /// Probability that Eve attacks rather than blocks.
    pub q: f64,
    /// Fraction of attacks that are blinding attacks.
    pub p_c: f64,
    pub blinding: BlindingModel,
    pub quantum: QuantumModel,
}

impl AdversaryStrategy {
    pub fn validate(&self) -> Result<()> {
        check_unit("q", self.q)?;
        check_unit("p_c", self.p_c)?;
        if !(0.0..=0.5).contains(&self.quantum.lambda) {
            return Err(Error::ProbabilityRange {
                name: "lambda",
                value: self.quantum.lambda,
                range: "[0, 1/2]",
            });
        }
        self.blinding.validate()
    }

    pub fn blind_probability(&self) -> f64 {
        self.q * self.p_c
    }

    pub fn quantum_probability(&self) -> f64 {
        self.q * (1.0 - self.p_c)
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ProbabilityRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EveAction {
    Blind,
    Quantum,
    Block,
}

impl EveAction {
    pub fn name(self) -> &'static str {
        match self {
            EveAction::Blind => "blind",
            EveAction::Quantum => "quantum",
            EveAction::Block => "block",
        }
    }
}

/// Eve's private record of one round. Only blinding rounds carry the
/// fake-state measurement basis and outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EveLog {
    Blind { y_e: Basis, b_e: Bit },
    Quantum,
    Block,
}

impl EveLog {
    pub fn action(&self) -> EveAction {
        match self {
            EveLog::Blind { .. } => EveAction::Blind,
            EveLog::Quantum => EveAction::Quantum,
            EveLog::Block => EveAction::Block,
        }
    }

    pub fn basis(&self) -> Option<Basis> {
        match *self {
            EveLog::Blind { y_e, .. } => Some(y_e),
            _ => None,
        }
    }

    pub fn bit(&self) -> Option<Bit> {
        match *self {
            EveLog::Blind { b_e, .. } => Some(b_e),
            _ => None,
        }
    }
}

pub fn eve_intercept<R: Rng + ?Sized>(
    state: PreparedState,
    rng: &mut R,
    strategy: &AdversaryStrategy,
) -> (Signal, EveLog) {
    let u: f64 = rng.gen();
    if u < strategy.blind_probability() {
        let y_e = if rng.gen::<f64>() < strategy.blinding.p_e {
            Basis::Linear
        } else {
            Basis::Diagonal
        };
        // Measuring a single photon in the wrong basis gives a uniform bit.
        let b_e = if y_e == state.basis {
            state.bit
        } else {
            rng.gen_range(0..=1)
        };
        (Signal::Trigger { y_e, b_e }, EveLog::Blind { y_e, b_e })
    } else if u < strategy.q {
        let pol = state.polarization();
        let pol = if rng.gen::<f64>() < strategy.quantum.lambda {
            pol.flipped()
        } else {
            pol
        };
        (Signal::SinglePhoton(pol), EveLog::Quantum)
    } else {
        (Signal::Blocked, EveLog::Block)
    }
}

/// An honest channel with transmissivity `t` and error rate `e_ch`,
/// expressed as a pure quantum "attack" with `q = t`.
pub fn honest_channel_as_strategy(t: f64, e_ch: f64) -> Result<AdversaryStrategy> {
    check_unit("t", t)?;
    if !(0.0..=0.5).contains(&e_ch) {
        return Err(Error::ProbabilityRange {
            name: "e_ch",
            value: e_ch,
            range: "[0, 1/2]",
        });
    }
    Ok(AdversaryStrategy {
        q: t,
        p_c: 0.0,
        blinding: BlindingModel::matched(0.5),
        quantum: QuantumModel { lambda: e_ch },
    })
}

/// Closed-form probability of a conclusive outcome in a blinding round
/// under setting `k`: P(Eve's basis = Bob's basis) * f_match * scale_k.
pub fn effective_fc(strategy: &AdversaryStrategy, params: &ValidatedParams, k: EtaIndex) -> f64 {
    let p_e = strategy.blinding.p_e;
    let p_x = params.p_x;
    let basis_match = p_e * p_x + (1.0 - p_e) * (1.0 - p_x);
    basis_match * strategy.blinding.match_probability(k)
}

/// The reference ceiling 1 - 2 p_x (1 - p_x) on the blinded response.
pub fn fc_reference_bound(p_x: f64) -> f64 {
    1.0 - 2.0 * p_x * (1.0 - p_x)
}
