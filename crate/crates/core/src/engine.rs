//! Round loop, transcript records and per-efficiency tallies.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::adversary::{eve_intercept, AdversaryStrategy, EveLog};
use crate::error::{Error, Result};
use crate::parties::{alice_prepare, bob_choose_settings, bob_detect};
use crate::protocol::{Basis, Bit, EtaIndex, Outcome, ValidatedParams};
use crate::rng::{round_rng, StreamLabel};

pub const RECORD_LOG_HEADER: &str =
    "round,alice_basis,alice_bit,bob_basis,eta_index,outcome,double_click";
pub const GROUND_TRUTH_HEADER: &str =
    "round,alice_basis,alice_bit,bob_basis,eta_index,outcome,double_click,eve_action,eve_basis,eve_bit";

/// One protocol round as seen by Alice and Bob, plus Eve's private log
/// when the record comes from the simulator. Records read back from a
/// public log carry `eve: None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoundRecord {
    pub round: u64,
    pub alice_basis: Basis,
    pub alice_bit: Bit,
    pub bob_basis: Basis,
    pub eta: EtaIndex,
    pub outcome: Outcome,
    pub double_click: bool,
    pub eve: Option<EveLog>,
}

impl RoundRecord {
    pub fn sifted(&self) -> bool {
        self.outcome.is_conclusive() && self.alice_basis == self.bob_basis
    }

    /// Sifted Linear-basis detection at eta1.
    pub fn in_raw_key(&self) -> bool {
        self.sifted() && self.bob_basis == Basis::Linear && self.eta == EtaIndex::One
    }
}

pub fn simulate_round(
    params: &ValidatedParams,
    strategy: &AdversaryStrategy,
    seed: u64,
    round: u64,
) -> RoundRecord {
    let state = alice_prepare(&mut round_rng(seed, round, StreamLabel::Alice), params);
    let (signal, eve) = eve_intercept(state, &mut round_rng(seed, round, StreamLabel::Eve), strategy);
    let mut bob_rng = round_rng(seed, round, StreamLabel::Bob);
    let settings = bob_choose_settings(&mut bob_rng, params);
    let detection = bob_detect(signal, settings, &mut bob_rng, params, &strategy.blinding);
    RoundRecord {
        round,
        alice_basis: state.basis,
        alice_bit: state.bit,
        bob_basis: settings.basis,
        eta: settings.eta,
        outcome: detection.outcome,
        double_click: detection.double_click,
        eve: Some(eve),
    }
}

/// Runs `params.rounds` rounds on the current rayon pool.
pub fn run_simulation(
    params: &ValidatedParams,
    strategy: &AdversaryStrategy,
    seed: u64,
) -> Vec<RoundRecord> {
    (0..params.rounds)
        .into_par_iter()
        .map(|i| simulate_round(params, strategy, seed, i))
        .collect()
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("failed to start worker pool")
        .install(job)
}

pub fn run_simulation_with_workers(
    params: &ValidatedParams,
    strategy: &AdversaryStrategy,
    seed: u64,
    workers: usize,
) -> Vec<RoundRecord> {
    with_workers(workers, || run_simulation(params, strategy, seed))
}

/// Simulates and tallies without materializing the record sequence.
pub fn simulate_tally(
    params: &ValidatedParams,
    strategy: &AdversaryStrategy,
    seed: u64,
    workers: usize,
) -> Tally {
    with_workers(workers, || {
        (0..params.rounds)
            .into_par_iter()
            .fold(Tally::default, |mut t, i| {
                t.add(&simulate_round(params, strategy, seed, i));
                t
            })
            .reduce(Tally::default, Tally::merge)
    })
}

/// Counts sorted by Bob's efficiency setting. Index 0 holds eta1, index 1 eta2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Tally {
    pub sent: [u64; 2],
    pub detected: [u64; 2],
    /// Sifted Diagonal-basis detections (parameter estimation pairs).
    pub pe_count: [u64; 2],
    pub pe_errors: [u64; 2],
    pub raw_key_len: u64,
    /// Raw-key errors against Alice's bits. Ground truth for validation;
    /// Bob only learns this through error correction.
    pub raw_key_errors: u64,
    pub double_clicks: u64,
}

impl Tally {
    pub fn add(&mut self, r: &RoundRecord) {
        let k = r.eta.slot();
        self.sent[k] += 1;
        if let Outcome::Bit(bit) = r.outcome {
            self.detected[k] += 1;
            let error = u64::from(bit != r.alice_bit);
            if r.alice_basis == r.bob_basis {
                match r.bob_basis {
                    Basis::Diagonal => {
                        self.pe_count[k] += 1;
                        self.pe_errors[k] += error;
                    }
                    Basis::Linear if r.eta == EtaIndex::One => {
                        self.raw_key_len += 1;
                        self.raw_key_errors += error;
                    }
                    Basis::Linear => {}
                }
            }
        }
        self.double_clicks += u64::from(r.double_click);
    }

    pub fn merge(self, other: Tally) -> Tally {
        let add2 = |a: [u64; 2], b: [u64; 2]| [a[0] + b[0], a[1] + b[1]];
        Tally {
            sent: add2(self.sent, other.sent),
            detected: add2(self.detected, other.detected),
            pe_count: add2(self.pe_count, other.pe_count),
            pe_errors: add2(self.pe_errors, other.pe_errors),
            raw_key_len: self.raw_key_len + other.raw_key_len,
            raw_key_errors: self.raw_key_errors + other.raw_key_errors,
            double_clicks: self.double_clicks + other.double_clicks,
        }
    }

    pub fn total_rounds(&self) -> u64 {
        self.sent[0] + self.sent[1]
    }

    pub fn sent(&self, k: EtaIndex) -> u64 {
        self.sent[k.slot()]
    }

    pub fn detected(&self, k: EtaIndex) -> u64 {
        self.detected[k.slot()]
    }

    pub fn pe_count(&self, k: EtaIndex) -> u64 {
        self.pe_count[k.slot()]
    }

    pub fn pe_errors(&self, k: EtaIndex) -> u64 {
        self.pe_errors[k.slot()]
    }
}

/// Tallies one run. Round indices must be exactly `0..records.len()`,
/// in any order.
pub fn tally(records: &[RoundRecord]) -> Result<Tally> {
    let n = records.len();
    let mut seen = vec![false; n];
    let mut t = Tally::default();
    for r in records {
        let i = usize::try_from(r.round)
            .ok()
            .filter(|&i| i < n)
            .ok_or_else(|| Error::MixedRun(format!("round {} outside 0..{n}", r.round)))?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::MixedRun(format!("round {} appears twice", r.round)));
        }
        t.add(r);
    }
    Ok(t)
}

fn write_public_fields<W: Write>(w: &mut W, r: &RoundRecord) -> std::io::Result<()> {
    write!(
        w,
        "{},{},{},{},{},{},{}",
        r.round,
        r.alice_basis.tag(),
        r.alice_bit,
        r.bob_basis.tag(),
        r.eta.number(),
        r.outcome,
        u8::from(r.double_click)
    )
}

/// Writes the public detection log (no Eve columns).
pub fn write_record_log<W: Write>(records: &[RoundRecord], mut w: W) -> Result<()> {
    writeln!(w, "{RECORD_LOG_HEADER}")?;
    for r in records {
        write_public_fields(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the debug log including Eve's private actions.
pub fn write_ground_truth_log<W: Write>(records: &[RoundRecord], mut w: W) -> Result<()> {
    writeln!(w, "{GROUND_TRUTH_HEADER}")?;
    for r in records {
        write_public_fields(&mut w, r)?;
        match r.eve {
            Some(eve) => {
                let basis = eve.basis().map(|b| b.tag().to_string()).unwrap_or_default();
                let bit = eve.bit().map(|b| b.to_string()).unwrap_or_default();
                writeln!(w, ",{},{basis},{bit}", eve.action().name())?;
            }
            None => writeln!(w, ",,,")?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a public detection log. Row numbers in errors are file line numbers.
pub fn read_record_log<R: BufRead>(input: R) -> Result<Vec<RoundRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::Log {
            row: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header != RECORD_LOG_HEADER {
        return Err(Error::Log {
            row: 1,
            message: format!("expected header `{RECORD_LOG_HEADER}`"),
        });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Log {
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Log { row: line, message };
        if row.len() != 7 {
            return Err(bad(format!("expected 7 columns, found {}", row.len())));
        }
        let basis = |col: usize| {
            Basis::from_tag(&row[col]).ok_or_else(|| bad(format!("invalid basis `{}`", &row[col])))
        };
        let bit = |col: usize| match &row[col] {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(bad(format!("invalid bit `{other}`"))),
        };
        let round = row[0]
            .parse::<u64>()
            .map_err(|_| bad(format!("invalid round index `{}`", &row[0])))?;
        let eta = row[4]
            .parse::<u8>()
            .ok()
            .and_then(EtaIndex::from_number)
            .ok_or_else(|| bad(format!("invalid eta_index `{}`", &row[4])))?;
        let outcome = match &row[5] {
            "-" => Outcome::Inconclusive,
            _ => Outcome::Bit(bit(5)?),
        };
        let double_click = bit(6)? == 1;
        if double_click && outcome == Outcome::Inconclusive {
            return Err(bad("double click on an inconclusive outcome".into()));
        }
        records.push(RoundRecord {
            round,
            alice_basis: basis(1)?,
            alice_bit: bit(2)?,
            bob_basis: basis(3)?,
            eta,
            outcome,
            double_click,
            eve: None,
        });
    }
    Ok(records)
}
