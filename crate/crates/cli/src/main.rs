//! `tree-ising`: command-line front-end for tree Ising models.
//!
//! Exit codes: 0 ok, 1 input error, 2 constraint violation, 3 numerical
//! tolerance failure.

mod commands;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tree_ising::model_file::Parameterization;
use tree_ising::sampler::SamplingMethod;

use crate::commands::{SampleArgs, DEFAULT_SEED};
use crate::error::CliError;
use crate::output::render;

#[derive(Parser, Debug)]
#[command(
    name = "tree-ising",
    version,
    about = "Tree-structured Ising models: exact sum distribution, sampling, Poisson approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Target {
    Natural,
    Canonical,
    Centered,
    Mean,
}

impl From<Target> for Parameterization {
    fn from(t: Target) -> Self {
        match t {
            Target::Natural => Parameterization::Natural,
            Target::Canonical => Parameterization::Canonical,
            Target::Centered => Parameterization::Centered,
            Target::Mean => Parameterization::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Direct,
    SymmetricFlip,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Model file (TOML)
    #[arg(long)]
    model: PathBuf,
    /// Write to this file instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit JSON instead of CSV
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model file and report inadmissible correlations
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Rewrite a model file in another parameterization
    Convert {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        to: Target,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exact pmf of the number of ones
    PmfSum {
        #[command(flatten)]
        common: Common,
        /// Transform length (power of two above the vertex count)
        #[arg(long)]
        n_fft: Option<usize>,
    },
    /// Expected allocations E[J_v 1{K = k}]
    Allocations {
        #[command(flatten)]
        common: Common,
        /// Vertex label; all vertices when omitted
        #[arg(long)]
        vertex: Option<String>,
        #[arg(long)]
        n_fft: Option<usize>,
    },
    /// Draw realizations, an empirical pmf, or Monte-Carlo intervals
    Sample {
        #[command(flatten)]
        common: Common,
        /// Draws (per replication when --reps is given)
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Replications for interval estimates
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 0.9)]
        level: f64,
        #[arg(long, value_enum, default_value_t = Method::Direct)]
        method: Method,
        /// Output each realization instead of the empirical pmf
        #[arg(long)]
        realizations: bool,
    },
    /// Compare the sum pmf with its Poisson approximation
    PoissonCompare {
        #[command(flatten)]
        common: Common,
        /// Transform length for the approximation (grown automatically when omitted)
        #[arg(long)]
        n_fft: Option<usize>,
    },
    /// Regenerate the four study tables into a directory
    ReproduceTables {
        /// Output directory
        #[arg(long, default_value = "tables")]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { model } => {
            let (report, ok) = commands::validate_cmd(&model)?;
            print!("{report}");
            if !ok {
                return Err(CliError::constraint(
                    "model violates the admissibility constraints",
                ));
            }
        }
        Command::Convert { model, to, output } => {
            let text = commands::convert_cmd(&model, to.into())?;
            emit(&text, output.as_deref())?;
        }
        Command::PmfSum { common, n_fft } => {
            let tables = commands::pmf_sum_cmd(&common.model, n_fft)?;
            emit(&render(&tables, common.json), common.output.as_deref())?;
        }
        Command::Allocations {
            common,
            vertex,
            n_fft,
        } => {
            let tables = commands::allocations_cmd(&common.model, vertex.as_deref(), n_fft)?;
            emit(&render(&tables, common.json), common.output.as_deref())?;
        }
        Command::Sample {
            common,
            n,
            seed,
            reps,
            level,
            method,
            realizations,
        } => {
            let args = SampleArgs {
                n,
                seed,
                reps,
                level,
                method: match method {
                    Method::Direct => SamplingMethod::Direct,
                    Method::SymmetricFlip => SamplingMethod::SymmetricFlip,
                },
                realizations,
            };
            let tables = commands::sample_cmd(&common.model, &args)?;
            emit(&render(&tables, common.json), common.output.as_deref())?;
        }
        Command::PoissonCompare { common, n_fft } => {
            let (tables, ok) = commands::poisson_compare_cmd(&common.model, n_fft)?;
            emit(&render(&tables, common.json), common.output.as_deref())?;
            if !ok {
                return Err(CliError::numerical(
                    "total variation bound or convex order check failed",
                ));
            }
        }
        Command::ReproduceTables { output, seed, json } => {
            let tables = commands::reproduce_tables(seed)?;
            for path in commands::write_tables(&output, &tables, json)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage problems are input errors; help and version are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
