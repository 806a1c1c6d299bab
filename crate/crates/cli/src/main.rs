use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pgl_core::error::PglError;
use pgl_core::instance::{gen_instance, Instance, KINDS};
use pgl_core::linalg::DEFAULT_TOL;
use pgl_core::parallel::Execution;
use pgl_core::suites::{list_suites, run_suite, SuiteConfig, DEFAULT_TRIALS};

/// Seeded verification suites for finite-dimensional Poisson geometry.
///
/// Exits 0 when every check passes, 1 when some check fails and 2 on a
/// usage or input error.
#[derive(Parser, Debug)]
#[command(name = "pgl", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Suite to run, or `all`.
    #[arg(long, default_value = "all")]
    suite: String,

    #[arg(long, default_value_t = DEFAULT_TRIALS, value_parser = clap::value_parser!(usize))]
    trials: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Comma-separated dimensions; meaning depends on the suite.
    #[arg(long = "dim", value_delimiter = ',')]
    dims: Vec<usize>,

    #[arg(long, env = "PGL_TOL", default_value_t = DEFAULT_TOL)]
    tol: f64,

    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Instance file produced by `gen-instance`.
    #[arg(long)]
    instance: Option<PathBuf>,

    #[arg(long)]
    list_suites: bool,

    /// Run the corrupted variant of each suite; failures are expected.
    #[arg(long)]
    mutate: bool,

    /// Run trials on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded instance file.
    GenInstance {
        /// One of: subspace, poisson-space, group-spec, algebra-spec, operator-sample, structure-constants.
        kind: String,
        #[arg(long = "dim", value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), PglError> {
    match path {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn listing() -> String {
    let mut out = String::new();
    for s in list_suites() {
        out += &format!("{:<24} {:<20} {}\n", s.name, s.module, s.summary);
        out += &format!("{:<24} dim: {}\n", "", s.dims);
        out += &format!("{:<24} mutation: {}\n", "", s.mutation);
        if !s.instances.is_empty() {
            out += &format!("{:<24} instances: {}\n", "", s.instances.join(", "));
        }
    }
    out += &format!("{:<24} every suite above\n", "all");
    out
}

fn run(cli: Cli) -> Result<bool, PglError> {
    if let Some(Command::GenInstance { kind, dims, seed, out }) = &cli.command {
        if !KINDS.contains(&kind.as_str()) {
            return Err(PglError::UnknownKind(kind.clone()));
        }
        emit(&gen_instance(kind, dims, *seed)?.to_json(), out.as_ref())?;
        return Ok(true);
    }
    if cli.list_suites {
        print!("{}", listing());
        return Ok(true);
    }
    let instance = cli.instance.as_deref().map(Instance::load).transpose()?;
    let execution = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let cfg = SuiteConfig::new(&cli.suite)
        .trials(cli.trials)
        .seed(cli.seed)
        .dims(cli.dims.clone())
        .tol(cli.tol)
        .mutated(cli.mutate)
        .execution(execution)
        .instance(instance);
    let report = run_suite(&cfg)?;
    let text = match cli.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.to_text(),
    };
    emit(&text, cli.report.as_ref())?;
    Ok(report.failures == 0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("pgl: {e}");
            if let PglError::UnknownSuite(_) = e {
                eprintln!("run `pgl --list-suites` for the registered names");
            }
            ExitCode::from(2)
        }
    }
}
