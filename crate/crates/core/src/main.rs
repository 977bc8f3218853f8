use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use himap::harness::{emit_csv, parse_spec, run_experiment, ExperimentKind, ExperimentSpec, KEYS};

#[derive(Parser)]
#[command(name = "himap", version, about = "Hybrid interference mitigation simulator")]
struct Cli {
    /// Worker threads for the Monte-Carlo trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a spec file and write its CSV.
    Run {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List experiment kinds and spec-file keys.
    ListExperiments,
    /// Parse and check a spec file without running it.
    Validate { spec: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentSpec, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let spec = parse_spec(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    spec.validate().map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(spec)
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), String> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.to_string()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), String> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    match cli.command {
        Command::ListExperiments => {
            let mut text = String::from("experiment kinds:\n");
            for kind in ExperimentKind::ALL {
                let _ = writeln!(text, "  {:<24} {}", kind.name(), kind.description());
            }
            text.push_str("\nspec-file keys:\n");
            for (k, doc) in KEYS {
                let _ = writeln!(text, "  {k:<32} {doc}");
            }
            emit(&text)?;
        }
        Command::Validate { spec } => {
            let s = load(&spec)?;
            emit(&format!("ok: {} with {} trials, spec sha256 {}\n", s.kind, s.trials, s.hash_hex()))?;
        }
        Command::Run { spec, seed, trials, out } => {
            let mut s = load(&spec)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(t) = trials {
                s.trials = t;
            }
            let table = run_experiment(&s).map_err(|e| e.to_string())?;
            match out {
                Some(path) => emit_csv(&table, &path).map_err(|e| e.to_string())?,
                None => emit(&table.to_csv_string())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
