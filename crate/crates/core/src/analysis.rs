//! Estimation from the sorted detection statistics: conditional detection
//! rates, the blinding-rate estimator gamma, the phase-error bound, the
//! secret key fraction and the abort decision, plus the closed-form
//! expectations for a given adversary strategy.

use std::fmt::{self, Write as _};

use crate::adversary::{effective_fc, fc_reference_bound, AdversaryStrategy, EtaDependence};
use crate::engine::Tally;
use crate::error::{Error, Result};
use crate::protocol::{EtaIndex, ValidatedParams};

/// Binary entropy in bits, with 0 log 0 = 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            name: "p",
            value: p,
            domain: "[0, 1]",
        });
    }
    let term = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    Ok(term(p) + term(1.0 - p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalStats {
    pub r1: f64,
    pub r2: f64,
    /// `None` when there were no sifted Diagonal detections at that setting.
    pub e_obs1: Option<f64>,
    pub e_obs2: Option<f64>,
    /// Rounds sent under each setting.
    pub n1: u64,
    pub n2: u64,
}

impl ConditionalStats {
    /// Computes rates, leaving undefined error rates as `None`.
    pub fn from_tally(tally: &Tally) -> Result<Self> {
        for k in [EtaIndex::One, EtaIndex::Two] {
            if tally.sent(k) == 0 {
                return Err(Error::NoSamples(k.number()));
            }
        }
        let rate = |k| tally.detected(k) as f64 / tally.sent(k) as f64;
        let e_obs = |k| match tally.pe_count(k) {
            0 => None,
            n => Some(tally.pe_errors(k) as f64 / n as f64),
        };
        Ok(ConditionalStats {
            r1: rate(EtaIndex::One),
            r2: rate(EtaIndex::Two),
            e_obs1: e_obs(EtaIndex::One),
            e_obs2: e_obs(EtaIndex::Two),
            n1: tally.sent(EtaIndex::One),
            n2: tally.sent(EtaIndex::Two),
        })
    }

    pub fn r(&self, k: EtaIndex) -> f64 {
        match k {
            EtaIndex::One => self.r1,
            EtaIndex::Two => self.r2,
        }
    }

    pub fn e_obs(&self, k: EtaIndex) -> Result<f64> {
        match k {
            EtaIndex::One => self.e_obs1,
            EtaIndex::Two => self.e_obs2,
        }
        .ok_or(Error::EObsUndefined(k.number()))
    }
}

/// Strict form: every rate, including both error rates, must be defined.
pub fn conditional_stats(tally: &Tally) -> Result<ConditionalStats> {
    let stats = ConditionalStats::from_tally(tally)?;
    stats.e_obs(EtaIndex::One)?;
    stats.e_obs(EtaIndex::Two)?;
    Ok(stats)
}

fn check_eta_order(eta1: f64, eta2: f64) -> Result<()> {
    if eta1 > eta2 {
        Ok(())
    } else {
        Err(Error::EtaOrdering { eta1, eta2 })
    }
}

/// gamma = max{(eta1 R2 - eta2 R1) / (eta1 - eta2), 0}.
pub fn gamma(r1: f64, r2: f64, eta1: f64, eta2: f64) -> Result<f64> {
    check_eta_order(eta1, eta2)?;
    Ok(((eta1 * r2 - eta2 * r1) / (eta1 - eta2)).max(0.0))
}

/// First-order propagation of the binomial errors of R1 and R2 through the
/// unclamped gamma expression.
pub fn gamma_sigma(r1: f64, r2: f64, n1: u64, n2: u64, eta1: f64, eta2: f64) -> Result<f64> {
    check_eta_order(eta1, eta2)?;
    let var = |r: f64, n: u64| if n == 0 { 0.0 } else { r * (1.0 - r) / n as f64 };
    let d = eta1 - eta2;
    Ok(((eta1 / d).powi(2) * var(r2, n2) + (eta2 / d).powi(2) * var(r1, n1)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseErrorBound {
    /// gamma / (2 R1) + e_obs1 before clamping.
    pub raw: f64,
    /// `raw` clamped to [0, 1/2].
    pub value: f64,
    pub saturated: bool,
}

pub fn phase_error_bound(gamma: f64, r1: f64, e_obs1: f64) -> Result<PhaseErrorBound> {
    if r1 <= 0.0 {
        return Err(Error::ZeroDetectionRate);
    }
    let raw = gamma / (2.0 * r1) + e_obs1;
    Ok(PhaseErrorBound {
        raw,
        value: raw.clamp(0.0, 0.5),
        saturated: raw > 0.5,
    })
}

/// 1 - h2(e_ph) - ec_efficiency * h2(e_obs1). May be negative.
pub fn key_fraction(e_ph: f64, e_obs1: f64, ec_efficiency: f64) -> Result<f64> {
    for (name, value) in [("e_ph", e_ph), ("e_obs1", e_obs1)] {
        if !(0.0..=0.5).contains(&value) {
            return Err(Error::Domain {
                name,
                value,
                domain: "[0, 1/2]",
            });
        }
    }
    Ok(1.0 - binary_entropy(e_ph)? - ec_efficiency * binary_entropy(e_obs1)?)
}

/// Closed-form expectations for an efficiency-independent strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValues {
    pub fc: f64,
    pub r1: f64,
    pub r2: f64,
    /// Error probability per sent signal under each setting.
    pub g1: f64,
    pub g2: f64,
    pub e_obs1: f64,
    /// `None` when R2 = 0.
    pub e_obs2: Option<f64>,
    pub gamma: f64,
    pub e_ph: PhaseErrorBound,
    pub key_fraction: f64,
}

impl OracleValues {
    /// gamma_sigma expected for a run of `params.rounds` rounds.
    pub fn expected_gamma_sigma(&self, params: &ValidatedParams) -> Result<f64> {
        let n1 = (params.rounds as f64 * params.p_eta1).round() as u64;
        let n2 = params.rounds - n1.min(params.rounds);
        gamma_sigma(self.r1, self.r2, n1, n2, params.eta1, params.eta2)
    }

    pub fn decide(&self, params: &ValidatedParams, thresholds: &Thresholds) -> Result<Decision> {
        let sigma = self.expected_gamma_sigma(params)?;
        Ok(decide(self.gamma, sigma, self.key_fraction, thresholds))
    }
}

pub fn analytic_oracle(strategy: &AdversaryStrategy, params: &ValidatedParams) -> Result<OracleValues> {
    if matches!(strategy.blinding.eta_dependence, EtaDependence::Dependent { .. }) {
        return Err(Error::UnsupportedModel);
    }
    let fc = effective_fc(strategy, params, EtaIndex::One);
    let blind = strategy.blind_probability() * fc;
    let quantum = strategy.quantum_probability();
    let rate = |eta: f64| blind + quantum * eta;
    let error = |eta: f64| quantum * eta * strategy.quantum.lambda;
    let (r1, r2) = (rate(params.eta1), rate(params.eta2));
    let (g1, g2) = (error(params.eta1), error(params.eta2));
    let ratio = |g: f64, r: f64| if g == 0.0 { Some(0.0) } else if r > 0.0 { Some(g / r) } else { None };
    let e_obs1 = ratio(g1, r1).ok_or(Error::ZeroDetectionRate)?;
    let gamma = gamma(r1, r2, params.eta1, params.eta2)?;
    let e_ph = phase_error_bound(gamma, r1, e_obs1)?;
    let key_fraction = key_fraction(e_ph.value, e_obs1.min(0.5), params.ec_efficiency)?;
    Ok(OracleValues {
        fc,
        r1,
        r2,
        g1,
        g2,
        e_obs1,
        e_obs2: ratio(g2, r2),
        gamma,
        e_ph,
        key_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Sigma multiplier for the gamma discrepancy test.
    pub z_gamma: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { z_gamma: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AbortReason {
    GammaDiscrepancy,
    NonPositiveKey,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbortReason::GammaDiscrepancy => "GammaDiscrepancy",
            AbortReason::NonPositiveKey => "NonPositiveKey",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Decision {
    pub reasons: Vec<AbortReason>,
}

impl Decision {
    pub fn abort(&self) -> bool {
        !self.reasons.is_empty()
    }

    pub fn has(&self, reason: AbortReason) -> bool {
        self.reasons.contains(&reason)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.reasons.is_empty() {
            return f.write_str("none");
        }
        for (i, r) in self.reasons.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

pub fn decide(gamma: f64, gamma_sigma: f64, key_fraction: f64, thresholds: &Thresholds) -> Decision {
    let mut reasons = Vec::new();
    if gamma > thresholds.z_gamma * gamma_sigma {
        reasons.push(AbortReason::GammaDiscrepancy);
    }
    if key_fraction <= 0.0 {
        reasons.push(AbortReason::NonPositiveKey);
    }
    Decision { reasons }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub stats: ConditionalStats,
    pub gamma: f64,
    pub gamma_sigma: f64,
    pub e_ph: PhaseErrorBound,
    pub key_fraction: f64,
    pub fc_reference_bound: f64,
    pub decision: Decision,
}

impl EstimationReport {
    pub fn abort(&self) -> bool {
        self.decision.abort()
    }

    /// `key = value` lines; floats carry 17 significant digits.
    pub fn render(&self) -> String {
        let num = |x: f64| format!("{x:.16e}");
        let opt = |x: Option<f64>| x.map_or_else(|| "undefined".to_string(), num);
        let s = &self.stats;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("R1", num(s.r1));
        line("R2", num(s.r2));
        line("e_obs1", opt(s.e_obs1));
        line("e_obs2", opt(s.e_obs2));
        line("gamma", num(self.gamma));
        line("gamma_sigma", num(self.gamma_sigma));
        line("e_ph_bound", num(self.e_ph.value));
        line("e_ph_saturated", self.e_ph.saturated.to_string());
        line("key_fraction", num(self.key_fraction));
        line("fc_reference_bound", num(self.fc_reference_bound));
        line("abort", self.abort().to_string());
        line("abort_reason", self.decision.to_string());
        line("n1", s.n1.to_string());
        line("n2", s.n2.to_string());
        out
    }
}

impl fmt::Display for EstimationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Full estimation pipeline over a tally. Fails if either setting has no
/// rounds or if e_obs1 is undefined; an undefined e_obs2 is reported as such.
pub fn estimate(tally: &Tally, params: &ValidatedParams, thresholds: &Thresholds) -> Result<EstimationReport> {
    let stats = ConditionalStats::from_tally(tally)?;
    let e_obs1 = stats.e_obs(EtaIndex::One)?;
    let gamma = gamma(stats.r1, stats.r2, params.eta1, params.eta2)?;
    let gamma_sigma = gamma_sigma(stats.r1, stats.r2, stats.n1, stats.n2, params.eta1, params.eta2)?;
    let e_ph = phase_error_bound(gamma, stats.r1, e_obs1)?;
    // beyond 1/2 h2 decreases, so the error-correction term is held at its maximum
    let key_fraction = key_fraction(e_ph.value, e_obs1.min(0.5), params.ec_efficiency)?;
    let decision = decide(gamma, gamma_sigma, key_fraction, thresholds);
    Ok(EstimationReport {
        stats,
        gamma,
        gamma_sigma,
        e_ph,
        key_fraction,
        fc_reference_bound: fc_reference_bound(params.p_x),
        decision,
    })
}
