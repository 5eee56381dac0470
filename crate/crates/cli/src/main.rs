mod commands;
mod render;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gausscover::io::parse;
use gausscover::selftest::DEFAULT_SEED;
use serde_json::json;

use commands::{Family, Options, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gausscover::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

/// Vacuum phases, cover cocycles and Wick moments of bosonic and fermionic Gaussian unitaries.
///
/// Inputs are JSON files ("-" reads stdin). Matrices are arrays of rows in the
/// basis (q1..qN, p1..pN); complex numbers are [re, im]; indices are 1-based.
#[derive(Debug, Parser)]
#[command(name = "gausscover", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output encoding; `text` is only available for `selftest`, which defaults to it.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Seed for randomly drawn generators and self-test samples.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Fock-space cutoff for bosonic oracle runs (total excitation number).
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Agreement tolerance for oracle comparisons.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// ⟨J|e^{K̂}|J⟩ for one generator.
    Phase {
        #[arg(long, short)]
        input: PathBuf,
        /// Also evaluate the Fock-space oracle and report the difference.
        #[arg(long)]
        compare_oracle: bool,
    },
    /// ⟨J|e^{tK̂}|J⟩ along a time grid, with unwrapped and naive phases.
    Trajectory {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        compare_oracle: bool,
    },
    /// Brute-force Fock-space amplitude or moment.
    Oracle {
        #[arg(long, short)]
        input: PathBuf,
        /// Comma-separated 1-based indices; omitted means the plain amplitude.
        #[arg(long, value_delimiter = ',')]
        indices: Vec<usize>,
    },
    /// ⟨J|ξ^{a1}⋯ξ^{ad} 𝒰|J⟩ for a cover element.
    Wick {
        #[arg(long, short)]
        input: PathBuf,
        /// Comma-separated 1-based indices; overrides those in the input.
        #[arg(long, value_delimiter = ',')]
        indices: Vec<usize>,
    },
    /// Overlap matrix and norm of a superposition of Gaussian states.
    Overlap {
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Step-by-step evolution of a superposition with continued overlap signs.
    Evolve {
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Grid sweep of the one-boson or two-fermion closed-form family.
    CaseStudy {
        #[arg(value_enum)]
        family: Family,
        #[arg(long, default_value_t = 21)]
        points: usize,
        /// Half-width of the symmetric parameter range.
        #[arg(long, default_value_t = 3.0)]
        range: f64,
    },
    /// Run the acceptance criteria; exits nonzero if a gating one fails.
    Selftest {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

fn read_input(path: &Path) -> Result<String, CliError> {
    let io_err = |source| CliError::Io { path: path.display().to_string(), source };
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).map_err(io_err)?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).map_err(io_err)
    }
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let opts = Options { seed: cli.seed, cutoff: cli.cutoff, tol: cli.tol };
    match &cli.command {
        Command::Phase { input, compare_oracle } => commands::phase(&parse(&read_input(input)?)?, *compare_oracle, &opts),
        Command::Trajectory { input, compare_oracle } => {
            commands::trajectory(&parse(&read_input(input)?)?, *compare_oracle, &opts)
        }
        Command::Oracle { input, indices } => commands::oracle(&parse(&read_input(input)?)?, indices, &opts),
        Command::Wick { input, indices } => commands::wick(&parse(&read_input(input)?)?, indices),
        Command::Overlap { input } => commands::overlap(&parse(&read_input(input)?)?),
        Command::Evolve { input } => commands::evolve(&parse(&read_input(input)?)?),
        Command::CaseStudy { family, points, range } => commands::case_study(*family, *points, *range),
        Command::Selftest { criteria } => commands::selftest(criteria, cli.seed),
    }
}

fn encode(report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(render::to_json_string(&report.json) + "\n"),
        Format::Csv => report.table.as_ref().map(render::Table::to_csv).ok_or_else(|| CliError::Usage("no CSV form".into())),
        Format::Text => report.text.clone().ok_or_else(|| CliError::Usage("text output is only available for selftest".into())),
    }
}

fn emit(cli: &Cli, body: &str) -> Result<(), CliError> {
    match &cli.output {
        Some(path) => std::fs::write(path, body).map_err(|source| CliError::Io { path: path.display().to_string(), source }),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_format = if matches!(cli.command, Command::Selftest { .. }) { Format::Text } else { Format::Json };
    let outcome = execute(&cli).and_then(|report| {
        let body = encode(&report, cli.format.unwrap_or(default_format))?;
        emit(&cli, &body)?;
        Ok(report.success)
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let error = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            println!("{}", render::to_json_string(&error));
            ExitCode::from(2)
        }
    }
}
