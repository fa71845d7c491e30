//! Flat `key = value` run configuration.
//!
//! ```text
//! # protocol
//! p_x = 0.9
//! eta1 = 0.10
//! eta2 = 0.05
//! p_eta1 = 0.9
//! rounds = 1000000
//!
//! # honest channel ...
//! t = 0.25
//! e_ch = 0.01
//! # ... or an explicit attack mixture
//! q = 1
//! p_c = 0.5
//! lambda = 0.02
//! ```
//!
//! Blinding keys: `p_e` (default `p_x`), `f_match` (1), `p_double` (0),
//! `eta_dependence` = `independent` | `dependent` (needs `scale1`, `scale2`)
//! | `proportional` (scale_k = eta_k / eta1). Run keys: `seed` (0),
//! `z_gamma` (5), `workers` (available parallelism), `out` (output dir).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::adversary::{AdversaryStrategy, BlindingModel, EtaDependence, QuantumModel};
use crate::analysis::Thresholds;
use crate::error::{Error, Result};
use crate::protocol::{ProtocolParams, ValidatedParams};

const KNOWN_KEYS: &[&str] = &[
    "p_x",
    "eta1",
    "eta2",
    "p_eta1",
    "rounds",
    "ec_efficiency",
    "t",
    "e_ch",
    "q",
    "p_c",
    "lambda",
    "p_e",
    "f_match",
    "p_double",
    "eta_dependence",
    "scale1",
    "scale2",
    "seed",
    "z_gamma",
    "workers",
    "out",
];

/// Parsed key-value pairs with the line each came from (0 for overrides).
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
}

impl FromStr for Config {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (line, value.to_string())) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
        }
        Ok(Config { entries })
    }
}

/// Strategy fields before resolution against protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    pub q: f64,
    pub p_c: f64,
    pub lambda: f64,
    /// Defaults to `p_x` when unset.
    pub p_e: Option<f64>,
    pub f_match: f64,
    pub p_double: f64,
    pub dependence: DependenceConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DependenceConfig {
    Independent,
    Dependent { scale1: f64, scale2: f64 },
    Proportional,
}

impl StrategyConfig {
    pub fn resolve(&self, params: &ValidatedParams) -> Result<AdversaryStrategy> {
        let eta_dependence = match self.dependence {
            DependenceConfig::Independent => EtaDependence::Independent,
            DependenceConfig::Dependent { scale1, scale2 } => EtaDependence::Dependent { scale1, scale2 },
            DependenceConfig::Proportional => EtaDependence::Dependent {
                scale1: 1.0,
                scale2: params.eta2 / params.eta1,
            },
        };
        let strategy = AdversaryStrategy {
            q: self.q,
            p_c: self.p_c,
            blinding: BlindingModel {
                p_e: self.p_e.unwrap_or(params.p_x),
                f_match: self.f_match,
                p_double: self.p_double,
                eta_dependence,
            },
            quantum: QuantumModel { lambda: self.lambda },
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        text.parse()
    }

    /// Sets a value as if it appeared in the file; later sets win.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }

    fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| Error::Config {
                line: *line,
                message: format!("invalid value `{value}` for `{key}`"),
            }),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_opt(key)?.ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing required key `{key}`"),
        })
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    /// Protocol parameters; `rounds` may be supplied by the caller instead.
    pub fn protocol(&self, rounds: Option<u64>) -> Result<ValidatedParams> {
        let rounds = match rounds {
            Some(r) => r,
            None => self.required("rounds")?,
        };
        ProtocolParams {
            p_x: self.required("p_x")?,
            eta1: self.required("eta1")?,
            eta2: self.required("eta2")?,
            p_eta1: self.required("p_eta1")?,
            rounds,
            ec_efficiency: self.or("ec_efficiency", 1.0)?,
        }
        .validate()
    }

    pub fn strategy_config(&self) -> Result<StrategyConfig> {
        if let Some(t) = self.parse_opt::<f64>("t")? {
            for key in ["q", "p_c", "lambda"] {
                if let Some((line, _)) = self.raw(key) {
                    return Err(Error::Config {
                        line: *line,
                        message: format!("`{key}` conflicts with honest-channel key `t`"),
                    });
                }
            }
            let s = crate::adversary::honest_channel_as_strategy(t, self.or("e_ch", 0.0)?)?;
            return Ok(StrategyConfig {
                q: s.q,
                p_c: s.p_c,
                lambda: s.quantum.lambda,
                p_e: None,
                f_match: 1.0,
                p_double: 0.0,
                dependence: DependenceConfig::Independent,
            });
        }
        let dependence = match self.raw("eta_dependence").map(|(l, v)| (*l, v.as_str())) {
            None | Some((_, "independent")) => DependenceConfig::Independent,
            Some((_, "proportional")) => DependenceConfig::Proportional,
            Some((_, "dependent")) => DependenceConfig::Dependent {
                scale1: self.required("scale1")?,
                scale2: self.required("scale2")?,
            },
            Some((line, other)) => {
                return Err(Error::Config {
                    line,
                    message: format!(
                        "eta_dependence must be independent, dependent or proportional, not `{other}`"
                    ),
                })
            }
        };
        Ok(StrategyConfig {
            q: self.required("q")?,
            p_c: self.required("p_c")?,
            lambda: self.or("lambda", 0.0)?,
            p_e: self.parse_opt("p_e")?,
            f_match: self.or("f_match", 1.0)?,
            p_double: self.or("p_double", 0.0)?,
            dependence,
        })
    }

    pub fn seed(&self) -> Result<u64> {
        self.or("seed", 0)
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Ok(Thresholds {
            z_gamma: self.or("z_gamma", Thresholds::default().z_gamma)?,
        })
    }

    pub fn workers(&self) -> Result<usize> {
        let default = std::thread::available_parallelism().map_or(1, |n| n.get());
        Ok(self.or("workers", default)?.max(1))
    }

    pub fn out_dir(&self) -> Option<PathBuf> {
        self.raw("out").map(|(_, v)| PathBuf::from(v))
    }
}
