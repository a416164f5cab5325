//! `eipl`: validate, grade and analyse function-name responses.
//!
//! Exit status: 0 on success, 1 on a domain error (invalid name, failed
//! grading, bad input file), 2 on a usage error.

mod analysis;
mod engine;
mod grading;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eipl_core::grading::GradingPolicy;

#[derive(Debug, Parser)]
#[command(name = "eipl", version, about = "Autograder and psychometrics for function-name questions")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Settings that override the config file and `EIPL_*` environment.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file (default: $EIPL_CONFIG, if set)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Question bank JSON (default: the built-in bank)
    #[arg(long, global = true, value_name = "FILE")]
    pub bank: Option<PathBuf>,
    /// Runner command line, e.g. "python3 -m eipl_runner"
    #[arg(long, global = true, value_name = "CMD")]
    pub runner: Option<String>,
    /// Variant cache JSONL
    #[arg(long, global = true, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true, value_name = "URL")]
    pub base_url: Option<String>,
    /// Concurrent gradings in `batch`
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub word_limit: Option<usize>,
    /// Generated functions per robustness grade
    #[arg(long, global = true, value_name = "N")]
    pub n_variants: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a function name against the naming rules
    Validate { name: String },
    /// Grade one function name against one question
    Grade {
        #[arg(long, value_name = "ID")]
        question: String,
        #[arg(long)]
        name: String,
        #[arg(long, value_parser = parse_policy)]
        policy: GradingPolicy,
        /// Offline fixture of scripted completions and executions
        #[arg(long, value_name = "FILE")]
        mock: Option<PathBuf>,
        #[arg(long, default_value = "cli")]
        student: String,
        #[arg(long, default_value_t = 1)]
        attempt: u32,
    },
    /// Grade a JSONL file of responses, appending grading records
    Batch {
        #[arg(long, value_name = "FILE")]
        responses: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: GradingPolicy,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_name = "FILE")]
        mock: Option<PathBuf>,
    },
    /// Fit the bounded 2PL model to a score matrix
    FitIrt {
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write ICC curves as CSV
        #[arg(long, value_name = "FILE")]
        icc: Option<PathBuf>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Classify fitted discriminations into bands
    Bands {
        #[arg(long, value_name = "FILE")]
        params: PathBuf,
    },
    /// Cohen's kappa between two raters' SOLO labels
    Kappa {
        #[arg(long, value_name = "FILE")]
        a: PathBuf,
        #[arg(long, value_name = "FILE")]
        b: PathBuf,
    },
    /// Length histograms, correctness proportions and ICC curves
    Report {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Plot these fitted parameters instead of fitting each policy
        #[arg(long, value_name = "FILE")]
        params: Option<PathBuf>,
    },
    /// Build a score matrix CSV from grading records
    Scores {
        #[arg(long, value_name = "FILE")]
        records: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: GradingPolicy,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Question-bank maintenance
    #[command(subcommand)]
    Bank(BankCommand),
    /// Variant-cache maintenance
    #[command(subcommand)]
    Cache(CacheCommand),
}

#[derive(Debug, Subcommand)]
enum BankCommand {
    /// Run every reference solution against its suite with the runner
    Check,
    /// List question ids and titles
    List,
}

#[derive(Debug, Subcommand)]
enum CacheCommand {
    /// Drop duplicate and superseded cache lines
    Compact,
}

fn parse_policy(s: &str) -> Result<GradingPolicy, String> {
    s.parse()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Validate { name } => grading::validate(g, &name),
        Command::Grade {
            question,
            name,
            policy,
            mock,
            student,
            attempt,
        } => grading::grade(g, &question, &name, policy, mock.as_deref(), &student, attempt),
        Command::Batch {
            responses,
            policy,
            out,
            mock,
        } => grading::batch(g, &responses, policy, &out, mock.as_deref()),
        Command::FitIrt {
            scores,
            out,
            icc,
            max_iters,
            tolerance,
        } => analysis::fit_irt(&scores, &out, icc.as_deref(), max_iters, tolerance),
        Command::Bands { params } => analysis::bands(&params),
        Command::Kappa { a, b } => analysis::kappa(&a, &b),
        Command::Report { records, out, params } => analysis::report(&records, &out, params.as_deref()),
        Command::Scores { records, policy, out } => analysis::scores(&records, policy, &out),
        Command::Bank(BankCommand::Check) => grading::bank_check(g),
        Command::Bank(BankCommand::List) => grading::bank_list(g),
        Command::Cache(CacheCommand::Compact) => grading::cache_compact(g),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
