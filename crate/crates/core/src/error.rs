use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("efficiency levels must satisfy eta1 > eta2 (got eta1={eta1}, eta2={eta2})")]
    EtaOrdering { eta1: f64, eta2: f64 },

    #[error("{name}={value} is outside its allowed range {range}")]
    ProbabilityRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("round count must be at least 1")]
    ZeroRounds,

    #[error("record log is not a single run: {0}")]
    MixedRun(String),

    #[error("no rounds recorded with efficiency setting eta{0}")]
    NoSamples(u8),

    #[error("error rate e_obs{0} is undefined: no sifted diagonal-basis detections at eta{0}")]
    EObsUndefined(u8),

    #[error("{name}={value} is outside the function domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("detection rate R1 is zero; phase error bound is undefined")]
    ZeroDetectionRate,

    #[error("no closed form for efficiency-dependent blinding")]
    UnsupportedModel,

    /// `line` is 0 when the problem is not tied to a line (missing keys, overrides).
    #[error("config{}: {message}", at_line(*.line))]
    Config { line: usize, message: String },

    #[error("record log row {row}: {message}")]
    Log { row: u64, message: String },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" line {line}")
    }
}
