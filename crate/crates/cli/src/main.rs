//! `gamma-stab`: file-driven front end for the stability toolkit.

mod run;
mod spec;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use run::{Report, Settings, Subcommand};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "GAMMA_STAB_THREADS";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Frame constants of exponential families.
    Frames,
    /// Resolvent certificate pipeline.
    Stability,
    /// Solutions, invariant measures and perturbations of the stochastic Cauchy problem.
    Scp,
    /// The full acceptance battery.
    Verify,
}

#[derive(Debug, Parser)]
#[command(name = "gamma-stab", version, about = "Stability analysis of linear systems through Gaussian sums")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// System specification (JSON). Optional for `verify`.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Report destination (JSON), written atomically.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `mc.samples`.
    #[arg(long)]
    samples: Option<usize>,
    /// Accuracy target for truncated series and grids.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Record wall-clock times in the report (breaks byte reproducibility).
    #[arg(long)]
    timings: bool,
}

fn fail(message: String) -> ExitCode {
    eprintln!("gamma-stab: {message}");
    ExitCode::from(1)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err(format!("{THREADS_VAR} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(e);
    }
    if !(cli.tolerance > 0.0 && cli.tolerance.is_finite()) {
        return fail(format!("--tolerance must be positive, got {}", cli.tolerance));
    }
    if cli.samples == Some(0) {
        return fail("--samples must be positive".into());
    }
    let system = match &cli.spec {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(format!("cannot read {}: {e}", path.display())),
            };
            match spec::parse(&text).and_then(spec::validate) {
                Ok(s) => Some(s),
                Err(e) => return fail(format!("{}: {e}", path.display())),
            }
        }
        None if matches!(cli.command, Command::Verify) => None,
        None => return fail("--spec is required for this subcommand".into()),
    };
    let settings = Settings {
        seed: cli.seed.or(system.as_ref().map(|s| s.mc.seed)).unwrap_or(0),
        samples: cli.samples.or(system.as_ref().map(|s| s.mc.samples)).unwrap_or(100_000),
        tolerance: cli.tolerance,
    };
    let report: Report = match (cli.command, &system) {
        (Command::Verify, _) => run::verify(system.as_ref().map(|s| s.file.clone()), settings, cli.timings),
        (Command::Frames, Some(s)) => run::analyze(s, Subcommand::Frames, settings, cli.timings),
        (Command::Stability, Some(s)) => run::analyze(s, Subcommand::Stability, settings, cli.timings),
        (Command::Scp, Some(s)) => run::analyze(s, Subcommand::Scp, settings, cli.timings),
        (_, None) => unreachable!("spec presence checked above"),
    };
    let mut bytes = match serde_json::to_vec_pretty(&report) {
        Ok(b) => b,
        Err(e) => return fail(format!("cannot serialize report: {e}")),
    };
    bytes.push(b'\n');
    if let Err(e) = write_atomic(&cli.out, &bytes) {
        eprintln!("gamma-stab: cannot write {}: {e}", cli.out.display());
        return ExitCode::from(2);
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("gamma-stab: one or more analyses failed; see {}", cli.out.display());
        ExitCode::from(2)
    }
}
