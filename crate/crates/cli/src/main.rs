//! `qpc`: run cocycle experiments from TOML documents and write CSV.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::{AcceptRun, Document, FrequencyConfig};
use output::Table;

#[derive(Debug)]
pub enum CliError {
    /// Bad command line or configuration; exit 1.
    Validation(String),
    /// Output could not be written; exit 1.
    Io(String),
    /// The input is numerically degenerate (e.g. nilpotent); exit 2.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical degeneracy: {m}"),
        }
    }
}

impl From<cocycle_lab::Error> for CliError {
    fn from(e: cocycle_lab::Error) -> Self {
        match e {
            cocycle_lab::Error::Input(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "qpc", version, about = "Quasi-periodic cocycle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment document (TOML).
    config: PathBuf,
    /// Write the CSV here instead of the path in the document (or stdout).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AcceptArgs {
    /// Optional document with `[run] criteria = [...]`.
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-scale top Lyapunov exponent.
    Le(RunArgs),
    /// Full Lyapunov spectrum by QR iteration.
    Spectrum(RunArgs),
    /// u_n(x) on a phase sample.
    UnProfile(RunArgs),
    /// Reduction of an identically singular cocycle.
    Reduce(RunArgs),
    /// Avalanche Principle on block chains.
    ApCheck(RunArgs),
    /// Deviation-set measures.
    Ldt(RunArgs),
    /// Dip-set measures.
    Dip(RunArgs),
    /// Birkhoff averages of u_n0.
    Birkhoff(RunArgs),
    /// Diophantine condition scan.
    DcCheck(RunArgs),
    /// Schrödinger energy sweep against the potential integral.
    Schrodinger(RunArgs),
    /// Lyapunov spectrum of a block Jacobi cocycle.
    JacobiLe(RunArgs),
    /// Integrated density of states.
    Ids(RunArgs),
    /// Thouless-type identity.
    Thouless(RunArgs),
    /// Positivity margins and gaps over a (lambda, E) grid.
    Positivity(RunArgs),
    /// Run the acceptance criteria.
    Accept(AcceptArgs),
}

fn threads_from_env() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("QPC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Validation(format!("QPC_THREADS must be a positive integer, got {v:?}")))?;
        cocycle_lab::par::configure_threads(n);
    }
    Ok(())
}

fn execute<R>(
    name: &str,
    args: &RunArgs,
    f: fn(&mut Document<R>) -> Result<Table, CliError>,
) -> Result<(), CliError>
where
    R: DeserializeOwned + Serialize,
{
    let start = Instant::now();
    let mut doc = Document::<R>::load(&args.config)?;
    let table = f(&mut doc)?;
    let dest = args.output.clone().or_else(|| doc.output.as_ref().map(PathBuf::from));
    let text = table.render(name, &doc.resolved(), start.elapsed().as_secs_f64());
    output::emit(&text, dest.as_deref())
}

fn accept(args: &AcceptArgs) -> Result<ExitCode, CliError> {
    let start = Instant::now();
    let mut doc = match &args.config {
        Some(p) => Document::<AcceptRun>::load(p)?,
        None => Document { output: None, frequency: FrequencyConfig::default(), model: None, run: AcceptRun::default() },
    };
    let (table, all) = commands::accept(&mut doc.run)?;
    let dest = args.output.clone().or_else(|| doc.output.as_ref().map(PathBuf::from));
    let text = table.render("accept", &doc.resolved(), start.elapsed().as_secs_f64());
    output::emit(&text, dest.as_deref())?;
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn dispatch(cmd: &Command) -> Result<ExitCode, CliError> {
    threads_from_env()?;
    match cmd {
        Command::Le(a) => execute("le", a, commands::le),
        Command::Spectrum(a) => execute("spectrum", a, commands::spectrum),
        Command::UnProfile(a) => execute("un-profile", a, commands::un_profile),
        Command::Reduce(a) => execute("reduce", a, commands::reduce),
        Command::ApCheck(a) => execute("ap-check", a, commands::ap_check),
        Command::Ldt(a) => execute("ldt", a, commands::ldt),
        Command::Dip(a) => execute("dip", a, commands::dip),
        Command::Birkhoff(a) => execute("birkhoff", a, commands::birkhoff),
        Command::DcCheck(a) => execute("dc-check", a, commands::dc_check),
        Command::Schrodinger(a) => execute("schrodinger", a, commands::schrodinger),
        Command::JacobiLe(a) => execute("jacobi-le", a, commands::jacobi_le),
        Command::Ids(a) => execute("ids", a, commands::ids_cmd),
        Command::Thouless(a) => execute("thouless", a, commands::thouless),
        Command::Positivity(a) => execute("positivity", a, commands::positivity),
        Command::Accept(a) => return accept(a),
    }
    .map(|()| ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qpc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

