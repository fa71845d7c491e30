//! Domain types shared across the simulator: bases, polarizations,
//! measurement outcomes and the public protocol parameters.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// A bit value, always 0 or 1.
pub type Bit = u8;

/// Measurement / preparation basis. `Linear` is the key basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Linear,
    Diagonal,
}

impl Basis {
    pub fn other(self) -> Basis {
        match self {
            Basis::Linear => Basis::Diagonal,
            Basis::Diagonal => Basis::Linear,
        }
    }

    /// Single-letter tag used in record logs.
    pub fn tag(self) -> char {
        match self {
            Basis::Linear => 'L',
            Basis::Diagonal => 'D',
        }
    }

    pub fn from_tag(tag: &str) -> Option<Basis> {
        match tag {
            "L" => Some(Basis::Linear),
            "D" => Some(Basis::Diagonal),
            _ => None,
        }
    }
}

/// Encoding: H = + = 0, V = − = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    Plus,
    Minus,
}

impl Polarization {
    pub fn encode(basis: Basis, bit: Bit) -> Polarization {
        match (basis, bit) {
            (Basis::Linear, 0) => Polarization::H,
            (Basis::Linear, _) => Polarization::V,
            (Basis::Diagonal, 0) => Polarization::Plus,
            (Basis::Diagonal, _) => Polarization::Minus,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            Polarization::H | Polarization::V => Basis::Linear,
            Polarization::Plus | Polarization::Minus => Basis::Diagonal,
        }
    }

    pub fn bit(self) -> Bit {
        match self {
            Polarization::H | Polarization::Plus => 0,
            Polarization::V | Polarization::Minus => 1,
        }
    }

    /// The orthogonal state in the same basis.
    pub fn flipped(self) -> Polarization {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
            Polarization::Plus => Polarization::Minus,
            Polarization::Minus => Polarization::Plus,
        }
    }
}

/// Result of one detection. Double clicks are resolved to a random `Bit`
/// before they reach this type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Bit(Bit),
    Inconclusive,
}

impl Outcome {
    pub fn is_conclusive(self) -> bool {
        matches!(self, Outcome::Bit(_))
    }

    pub fn bit(self) -> Option<Bit> {
        match self {
            Outcome::Bit(b) => Some(b),
            Outcome::Inconclusive => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Bit(b) => write!(f, "{b}"),
            Outcome::Inconclusive => f.write_str("-"),
        }
    }
}

/// Which of Bob's two efficiency levels was active in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EtaIndex {
    One,
    Two,
}

impl EtaIndex {
    pub fn number(self) -> u8 {
        match self {
            EtaIndex::One => 1,
            EtaIndex::Two => 2,
        }
    }

    pub(crate) fn slot(self) -> usize {
        match self {
            EtaIndex::One => 0,
            EtaIndex::Two => 1,
        }
    }

    pub fn from_number(n: u8) -> Option<EtaIndex> {
        match n {
            1 => Some(EtaIndex::One),
            2 => Some(EtaIndex::Two),
            _ => None,
        }
    }
}

/// Public settings agreed by Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Probability of the Linear (key) basis, shared by Alice and Bob.
    pub p_x: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Probability that Bob selects `eta1`.
    pub p_eta1: f64,
    pub rounds: u64,
    /// Multiplier on the h2 error-correction cost.
    pub ec_efficiency: f64,
}

impl ProtocolParams {
    pub fn validate(self) -> Result<ValidatedParams> {
        validate_params(self)
    }
}

/// Protocol parameters that passed [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams(ProtocolParams);

impl ValidatedParams {
    pub fn eta(&self, k: EtaIndex) -> f64 {
        match k {
            EtaIndex::One => self.0.eta1,
            EtaIndex::Two => self.0.eta2,
        }
    }

    pub fn into_inner(self) -> ProtocolParams {
        self.0
    }
}

impl Deref for ValidatedParams {
    type Target = ProtocolParams;

    fn deref(&self) -> &ProtocolParams {
        &self.0
    }
}

fn in_open(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x < hi
}

pub fn validate_params(params: ProtocolParams) -> Result<ValidatedParams> {
    let range = |name, value, range| Error::ProbabilityRange { name, value, range };

    if !in_open(params.p_x, 0.5, 1.0) {
        return Err(range("p_x", params.p_x, "(1/2, 1)"));
    }
    if !(params.eta1 > 0.0 && params.eta1 <= 1.0) {
        return Err(range("eta1", params.eta1, "(0, 1]"));
    }
    if !(params.eta2 >= 0.0 && params.eta2 < 1.0) {
        return Err(range("eta2", params.eta2, "[0, 1)"));
    }
    if params.eta1 <= params.eta2 {
        return Err(Error::EtaOrdering {
            eta1: params.eta1,
            eta2: params.eta2,
        });
    }
    if !in_open(params.p_eta1, 0.0, 1.0) {
        return Err(range("p_eta1", params.p_eta1, "(0, 1)"));
    }
    if !(params.ec_efficiency >= 1.0 && params.ec_efficiency.is_finite()) {
        return Err(range("ec_efficiency", params.ec_efficiency, "[1, inf)"));
    }
    if params.rounds == 0 {
        return Err(Error::ZeroRounds);
    }
    Ok(ValidatedParams(params))
}
