//! `mason`: runs scenarios, sweeps and ROC tables, checks the classifier
//! against brute-force oracles, and validates protocol traces.
//!
//! Exit status is 0 on success, 1 when a verification fails and 2 when the
//! input or configuration is bad.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mason::experiments::{
    knee, roc_curve, roc_samples, run_trials, sweep_grid, trial_trace, write_csv, ScenarioConfig, Summary,
};
use mason::protocol::Trace;
use mason::verify::{run_suite, SuiteOptions};

#[derive(Parser)]
#[command(name = "mason", version, about = "Sybil classification experiments over simulated RSSI signalprints")]
struct Cli {
    /// Worker threads; defaults to the number of cores. Never changes outputs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs every trial of a scenario; writes trials.csv and summary.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write one protocol trace per trial under traces/.
        #[arg(long)]
        traces: bool,
    },
    /// Runs the scenario over its (conforming, lying) grid; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Sweeps the dimension-4 threshold; writes roc.csv.
    Roc {
        #[command(flatten)]
        common: Common,
    },
    /// Checks the classifier against exhaustive search and closed forms.
    Verify {
        /// Largest scenario, initiator included.
        #[arg(long, default_value_t = 10)]
        max_identities: usize,
        /// Scenarios per oracle check.
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Candidate-growth runs per grid point.
        #[arg(long, default_value_t = 2000)]
        growth_runs: usize,
    },
    /// Checks a trace file against the protocol phase grammar.
    Replay {
        trace: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Without one, every default applies.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Master seed; overrides the scenario's.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count; overrides the scenario's.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, env = "MASON_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

/// Failure modes mapped to exit codes.
enum Failure {
    Verification(String),
    Input(String),
}

impl From<mason::Error> for Failure {
    fn from(e: mason::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig, Failure> {
        let mut cfg = match &self.scenario {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                ScenarioConfig::from_toml(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.validate()?;
        fs::create_dir_all(&self.out).map_err(|e| io_err(&self.out, e))?;
        Ok(cfg)
    }
}

fn write_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_csv(std::io::BufWriter::new(file), rows)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run { common, traces } => {
            let cfg = common.load()?;
            let trials = run_trials(&cfg)?;
            let summary = Summary::from_trials(&trials);
            write_rows(&common.out.join("trials.csv"), &trials)?;
            write_rows(&common.out.join("summary.csv"), std::slice::from_ref(&summary))?;
            if traces {
                let dir = common.out.join("traces");
                fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
                for k in 0..cfg.trials {
                    if let Some(t) = trial_trace(&cfg, k)? {
                        let path = dir.join(format!("trial-{k:06}.trace"));
                        fs::write(&path, t.render()).map_err(|e| io_err(&path, e))?;
                    }
                }
            }
            println!(
                "{}: {} trials, {} aborted, {} deferred, final Sybil ratio {:.6}",
                cfg.name, summary.trials, summary.aborted, summary.deferred, summary.sybil_ratio_mean
            );
        }
        Command::Sweep { common } => {
            let cfg = common.load()?;
            let rows = sweep_grid(&cfg)?;
            write_rows(&common.out.join("sweep.csv"), &rows)?;
            println!("{}: {} grid points", cfg.name, rows.len());
        }
        Command::Roc { common } => {
            let cfg = common.load()?;
            let samples = roc_samples(&cfg)?;
            let points = roc_curve(&samples, &cfg.roc.thresholds);
            write_rows(&common.out.join("roc.csv"), &points)?;
            match knee(&points) {
                Some(k) => println!("{}: {} samples, knee at {k}", cfg.name, samples.len()),
                None => println!("{}: no thresholds", cfg.name),
            }
        }
        Command::Verify { max_identities, cases, seed, growth_runs } => {
            let opts = SuiteOptions { max_identities, cases, seed, growth_runs, ..SuiteOptions::default() };
            let reports = run_suite(&opts)?;
            let mut out = std::io::stdout().lock();
            for r in &reports {
                let verdict = if r.passed() { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "{verdict} {}: {}/{} failed; {}", r.check, r.failures, r.cases, r.detail);
            }
            if let Some(r) = reports.iter().find(|r| !r.passed()) {
                return Err(Failure::Verification(format!("{} failed", r.check)));
            }
        }
        Command::Replay { trace } => {
            let text = fs::read_to_string(&trace).map_err(|e| io_err(&trace, e))?;
            let parsed = Trace::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", trace.display())))?;
            parsed.validate().map_err(|e| Failure::Verification(format!("{}: {e}", trace.display())))?;
            println!("{}: {} records, grammar ok", trace.display(), parsed.lines.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
