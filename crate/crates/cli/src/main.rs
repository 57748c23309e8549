//! `yhmm`: equivalence, local equivalence and exponential-family analysis of
//! hidden Markov models given as families of Y-indexed transition matrices.

mod commands;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use yhmm::{Error, Settings};

use commands::{Context, Failure, InitChoice, Outcome, SampleArgs};
use report::{ErrorInfo, Report};

#[derive(Debug, Parser)]
#[command(name = "yhmm", version, about = "Equivalence and local dimension of hidden Markov models")]
struct Cli {
    /// JSON file overriding any subset of the numeric tolerances.
    #[arg(long, global = true, value_name = "FILE")]
    settings: Option<PathBuf>,
    /// Indent the JSON report and print an aligned table to stderr.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct InitArgs {
    /// Initial law as comma-separated probabilities.
    #[arg(long, value_delimiter = ',', conflicts_with = "stationary", value_name = "P")]
    init: Option<Vec<f64>>,
    /// Use the stationary law even when the model file carries P0.
    #[arg(long)]
    stationary: bool,
}

impl From<&InitArgs> for InitChoice {
    fn from(a: &InitArgs) -> Self {
        InitChoice { init: a.init.clone(), stationary: a.stationary }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file against the schema and stochasticity constraints.
    Validate { model: PathBuf },
    /// Observability and reachability profiles and genericity flags.
    Stats {
        model: PathBuf,
        #[command(flatten)]
        init: InitArgs,
    },
    /// Decide whether two models generate the same output process.
    Equiv {
        a: PathBuf,
        b: PathBuf,
        /// Total-variation tolerance for the verdict.
        #[arg(long)]
        tol: Option<f64>,
        /// Compare the stationary processes even when both files carry P0.
        #[arg(long)]
        stationary: bool,
    },
    /// Tangent-space dimensions, local dimension and singularity verdict.
    Tangent {
        model: PathBuf,
        #[command(flatten)]
        init: InitArgs,
        /// Write a non-redundant generator set to this file.
        #[arg(long, value_name = "FILE")]
        emit_generators: Option<PathBuf>,
    },
    /// Factorization into an independent-type model and, for such inputs,
    /// identifiability, ERT generators and the two-state classification.
    Indep {
        model: PathBuf,
        #[command(flatten)]
        init: InitArgs,
        /// Write the ERT generators to this file.
        #[arg(long, value_name = "FILE")]
        emit_generators: Option<PathBuf>,
    },
    /// Evaluate the exponential family at theta.
    Expfam {
        model: PathBuf,
        generators: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        theta: Vec<f64>,
        /// Also report the gradient of the potential.
        #[arg(long)]
        grad: bool,
        /// Also report the divergence from theta to this point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "THETA2")]
        div: Option<Vec<f64>>,
    },
    /// Draw trajectories and compare their empirical output laws with the exact ones.
    Sample {
        model: PathBuf,
        /// Number of trajectories.
        #[arg(short, long)]
        n: usize,
        /// Steps per trajectory.
        #[arg(short, long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sample file to write.
        #[arg(short, long, default_value = "samples.txt")]
        out: PathBuf,
        #[command(flatten)]
        init: InitArgs,
    },
    /// Exact law of the first k outputs.
    Oracle {
        model: PathBuf,
        #[arg(short, long)]
        k: usize,
        #[command(flatten)]
        init: InitArgs,
    },
}

const EXIT_IO: u8 = 1;

/// Distinct exit code for every library error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) => 2,
        Error::Indeterminate(_) => 3,
        Error::CrossCheck(_) => 4,
        Error::InternalConsistency(_) => 5,
        Error::Parse(_) => 6,
        Error::InvalidDistribution(_) => 7,
        Error::InvalidArgument(_) => 8,
        Error::DimensionMismatch(_) => 9,
        Error::Reducible { .. } => 10,
        Error::NonConvergence { .. } => 11,
        Error::Inconsistent { .. } => 12,
        Error::Singular(_) => 13,
        Error::EnumerationCap { .. } => 14,
        Error::Overflow { .. } => 15,
        Error::RankMismatch { .. } => 16,
        Error::Precondition(_) => 17,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Validation(_) => "validation",
        Error::Indeterminate(_) => "indeterminate",
        Error::CrossCheck(_) => "cross_check",
        Error::InternalConsistency(_) => "internal_consistency",
        Error::Parse(_) => "parse",
        Error::InvalidDistribution(_) => "invalid_distribution",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::Reducible { .. } => "reducible",
        Error::NonConvergence { .. } => "non_convergence",
        Error::Inconsistent { .. } => "inconsistent",
        Error::Singular(_) => "singular",
        Error::EnumerationCap { .. } => "enumeration_cap",
        Error::Overflow { .. } => "overflow",
        Error::RankMismatch { .. } => "rank_mismatch",
        Error::Precondition(_) => "precondition",
    }
}

fn load_settings(ctx: &mut Context, path: &Option<PathBuf>) -> Result<(), Failure> {
    if let Some(p) = path {
        let bytes = ctx.read(p)?;
        ctx.settings = serde_json::from_slice(&bytes).map_err(|e| Failure::Library(Error::Parse(format!("settings: {e}"))))?;
    }
    Ok(())
}

fn run(cli: &Cli, ctx: &mut Context) -> Result<Outcome, Failure> {
    load_settings(ctx, &cli.settings)?;
    match &cli.command {
        Command::Validate { model } => commands::validate(ctx, model),
        Command::Stats { model, init } => commands::stats(ctx, model, &init.into()),
        Command::Equiv { a, b, tol, stationary } => commands::equiv(ctx, a, b, *tol, *stationary),
        Command::Tangent { model, init, emit_generators } => {
            commands::tangent(ctx, model, &init.into(), emit_generators.as_deref())
        }
        Command::Indep { model, init, emit_generators } => commands::indep(ctx, model, &init.into(), emit_generators.as_deref()),
        Command::Expfam { model, generators, theta, grad, div } => {
            commands::expfam(ctx, model, generators, theta, *grad, div.as_deref())
        }
        Command::Sample { model, n, k, seed, out, init } => {
            commands::sample_cmd(ctx, model, &init.into(), &SampleArgs { n: *n, k: *k, seed: *seed, out: out.clone() })
        }
        Command::Oracle { model, k, init } => commands::oracle(ctx, model, *k, &init.into()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_IO } else { 0 });
        }
    };
    let mut command = vec!["yhmm".to_string()];
    command.extend(std::env::args().skip(1));
    let mut ctx = Context { settings: Settings::default(), inputs: BTreeMap::new() };
    let (outcome, error, code) = match run(&cli, &mut ctx) {
        Ok(o) => {
            let code = if o.indeterminate { 3 } else { 0 };
            (o, None, code)
        }
        Err(Failure::Library(e)) => {
            let code = exit_code(&e);
            eprintln!("error: {e}");
            let info = ErrorInfo { exit_code: code as i32, kind: error_kind(&e).into(), message: e.to_string() };
            (Outcome::default(), Some(info), code)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            let info = ErrorInfo { exit_code: EXIT_IO as i32, kind: "io".into(), message: msg };
            (Outcome::default(), Some(info), EXIT_IO)
        }
    };
    let report = Report {
        command,
        inputs: ctx.inputs,
        settings: ctx.settings,
        results: outcome.results,
        warnings: outcome.warnings,
        error,
    };
    let value = serde_json::to_value(&report).expect("report serializes");
    print!("{}", report::to_json(&value, cli.pretty));
    if cli.pretty {
        eprint!("{}", report::table(&report));
    }
    ExitCode::from(code)
}
