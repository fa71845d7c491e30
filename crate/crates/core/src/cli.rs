//! `effguard simulate | analyze | sweep`.
//!
//! Exit codes: 0 accept (or sweep written), 1 usage / config / input error,
//! 2 protocol aborted.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::analysis::{analytic_oracle, estimate, EstimationReport};
use crate::config::{Config, StrategyConfig};
use crate::engine::{
    read_record_log, run_simulation_with_workers, simulate_tally, tally, write_ground_truth_log,
    write_record_log,
};
use crate::error::{Error, Result};
use crate::protocol::ProtocolParams;

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ABORT: i32 = 2;

pub const RECORD_LOG_FILE: &str = "records.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Debug, Parser)]
#[command(name = "effguard", version, about = "BB84 with randomized detector efficiency: simulate, analyze, sweep")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat key = value run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rounds: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long = "z-gamma")]
    pub z_gamma: Option<f64>,
    /// simulate: output directory; analyze: report file; sweep: table file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the protocol and write the detection log and estimation report.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write Eve's per-round actions (requires an output directory).
        #[arg(long)]
        debug_ground_truth: bool,
    },
    /// Estimate from a detection log.
    Analyze {
        log: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a parameter grid from the closed forms (and optionally by simulation).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Add Monte Carlo columns.
        #[arg(long)]
        mc: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Q,
    #[value(name = "p_c")]
    PC,
    Lambda,
    Eta2,
    #[value(name = "p_x")]
    PX,
    #[value(name = "p_e")]
    PE,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Q => "q",
            SweepParam::PC => "p_c",
            SweepParam::Lambda => "lambda",
            SweepParam::Eta2 => "eta2",
            SweepParam::PX => "p_x",
            SweepParam::PE => "p_e",
        }
    }

    fn apply(self, value: f64, protocol: &mut ProtocolParams, strategy: &mut StrategyConfig) {
        match self {
            SweepParam::Q => strategy.q = value,
            SweepParam::PC => strategy.p_c = value,
            SweepParam::Lambda => strategy.lambda = value,
            SweepParam::Eta2 => protocol.eta2 = value,
            SweepParam::PX => protocol.p_x = value,
            SweepParam::PE => strategy.p_e = Some(value),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_ACCEPT };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            common,
            debug_ground_truth,
        } => simulate(&common, debug_ground_truth, stdout, stderr),
        Command::Analyze { log, common } => analyze(&log, &common, stdout),
        Command::Sweep {
            common,
            param,
            from,
            to,
            steps,
            mc,
        } => sweep(&common, param, from, to, steps, mc, stdout).map(|()| EXIT_ACCEPT),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.set("seed", seed);
    }
    if let Some(rounds) = common.rounds {
        cfg.set("rounds", rounds);
    }
    if let Some(workers) = common.workers {
        cfg.set("workers", workers);
    }
    if let Some(z) = common.z_gamma {
        cfg.set("z_gamma", z);
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))
}

fn exit_code(report: &EstimationReport) -> i32 {
    if report.abort() {
        EXIT_ABORT
    } else {
        EXIT_ACCEPT
    }
}

fn simulate(common: &Common, ground_truth: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let mut cfg = load_config(common)?;
    if let Some(out) = &common.out {
        cfg.set("out", out.display());
    }
    let params = cfg.protocol(None)?;
    let strategy = cfg.strategy_config()?.resolve(&params)?;
    let thresholds = cfg.thresholds()?;
    let out_dir = cfg.out_dir();
    if ground_truth && out_dir.is_none() {
        return Err(Error::Io("--debug-ground-truth needs an output directory (--out)".into()));
    }

    let records = run_simulation_with_workers(&params, &strategy, cfg.seed()?, cfg.workers()?);
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        write_record_log(&records, create(&dir.join(RECORD_LOG_FILE))?)?;
        if ground_truth {
            write_ground_truth_log(&records, create(&dir.join(GROUND_TRUTH_FILE))?)?;
        }
    }
    let t = tally(&records)?;
    let report = estimate(&t, &params, &thresholds)?;
    let text = report.render();
    if let Some(dir) = &out_dir {
        fs::write(dir.join(REPORT_FILE), &text)?;
    }
    stdout.write_all(text.as_bytes())?;
    // simulator-side ground truth, not available to a real receiver
    let _ = writeln!(
        stderr,
        "raw key: {} bits, {} errors against Alice (ground truth)",
        t.raw_key_len, t.raw_key_errors
    );
    Ok(exit_code(&report))
}

fn analyze(log: &Path, common: &Common, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = load_config(common)?;
    let file = File::open(log).map_err(|e| Error::Io(format!("cannot open {}: {e}", log.display())))?;
    let records = read_record_log(BufReader::new(file))?;
    let t = tally(&records)?;
    if t.total_rounds() == 0 {
        return Err(Error::NoSamples(1));
    }
    let params = cfg.protocol(Some(t.total_rounds()))?;
    let report = estimate(&t, &params, &cfg.thresholds()?)?;
    let text = report.render();
    if let Some(path) = &common.out {
        fs::write(path, &text)?;
    }
    stdout.write_all(text.as_bytes())?;
    Ok(exit_code(&report))
}

pub fn grid(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n)
            .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn sweep(
    common: &Common,
    param: SweepParam,
    from: f64,
    to: f64,
    steps: usize,
    mc: bool,
    stdout: &mut dyn Write,
) -> Result<()> {
    if steps == 0 {
        return Err(Error::Io("--steps must be at least 1".into()));
    }
    let cfg = load_config(common)?;
    let base_protocol = cfg.protocol(None)?.into_inner();
    let base_strategy = cfg.strategy_config()?;
    let thresholds = cfg.thresholds()?;
    let (seed, workers) = (cfg.seed()?, cfg.workers()?);

    let rows = grid(from, to, steps)
        .into_par_iter()
        .map(|value| {
            let (mut protocol, mut strategy) = (base_protocol, base_strategy);
            param.apply(value, &mut protocol, &mut strategy);
            let params = protocol.validate()?;
            let resolved = strategy.resolve(&params)?;

            let mut row = format!("{value}");
            match analytic_oracle(&resolved, &params) {
                Ok(o) => {
                    let abort = o.decide(&params, &thresholds)?.abort();
                    row += &format!(
                        ",{},{},{},{},{},{}",
                        o.r1,
                        o.r2,
                        o.gamma,
                        o.e_ph.value,
                        o.key_fraction,
                        fmt_bool(abort)
                    );
                }
                Err(Error::ZeroDetectionRate) => row += ",0,0,NaN,NaN,NaN,1",
                Err(e) => return Err(e),
            }
            if mc {
                let t = simulate_tally(&params, &resolved, seed, workers);
                match estimate(&t, &params, &thresholds) {
                    Ok(r) => {
                        row += &format!(
                            ",{},{},{},{},{},{}",
                            r.stats.r1,
                            r.stats.r2,
                            r.gamma,
                            r.e_ph.value,
                            r.key_fraction,
                            fmt_bool(r.abort())
                        );
                    }
                    Err(_) => row += ",NaN,NaN,NaN,NaN,NaN,1",
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut header = format!("{},R1,R2,gamma,e_ph_bound,key_fraction,abort", param.name());
    if mc {
        header += ",R1_mc,R2_mc,gamma_mc,e_ph_bound_mc,key_fraction_mc,abort_mc";
    }
    let mut table = header + "\n";
    for row in rows {
        table += &row;
        table.push('\n');
    }
    match &common.out {
        Some(path) => fs::write(path, &table)?,
        None => stdout.write_all(table.as_bytes())?,
    }
    Ok(())
}
