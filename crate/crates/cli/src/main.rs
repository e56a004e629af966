use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use subtyper_cli::config;
use subtyper_cli::{cmd_cv, cmd_predict, cmd_prep, cmd_report, cmd_train, format_summary, CliResult, RunConfig};
use subtyper_core::preprocess::Subtype;

/// Breast-cancer subtype classification from gene expression with a
/// two-stage autoencoder + dense classifier.
#[derive(Parser)]
#[command(name = "subtyper", version)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Join expression and label files and report class counts.
    Prep(RunArgs),
    /// Train on a stratified train/validation/test split and save the model.
    Train(RunArgs),
    /// Stratified k-fold cross-validation.
    Cv(RunArgs),
    /// Predict subtypes for every sample of an expression file.
    Predict(RunArgs),
    /// Re-render confusion.csv and boxplot.svg from a cv_summary.json.
    Report {
        /// Path to cv_summary.json.
        #[arg(long)]
        summary: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a JSON config / manifest.json from an earlier run.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set training.lr=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Expression matrix (tab-separated, `.gz` accepted).
    #[arg(long)]
    expression: Option<PathBuf>,
    /// Label file with `sample_id` and `subtype` columns.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output directory [default: $SUBTYPER_OUT_DIR, else ./subtyper-out].
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Model file to write (train) or read (predict).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// The expression file has genes in rows and samples in columns.
    #[arg(long)]
    transpose: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Folds trained concurrently.
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let path = |p: &PathBuf| Value::String(p.to_string_lossy().into_owned());
        let mut flags: Vec<(&str, Value)> = Vec::new();
        if let Some(p) = &self.expression {
            flags.push(("expression", path(p)));
        }
        if let Some(p) = &self.labels {
            flags.push(("labels", path(p)));
        }
        if let Some(p) = &self.out {
            flags.push(("out_dir", path(p)));
        }
        if let Some(p) = &self.checkpoint {
            flags.push(("checkpoint", path(p)));
        }
        if self.transpose {
            flags.push(("transpose", Value::Bool(true)));
        }
        if let Some(s) = self.seed {
            flags.push(("seed", Value::from(s)));
        }
        if let Some(k) = self.folds {
            flags.push(("folds", Value::from(k)));
        }
        if let Some(j) = self.jobs {
            flags.push(("jobs", Value::from(j)));
        }
        config::load(self.config.as_deref(), &self.sets, flags)
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Prep(args) => {
            let r = cmd_prep(&args.resolve()?)?;
            println!(
                "{} expression samples, {} labeled, {} kept",
                r.expression_samples, r.labeled_samples, r.kept
            );
            for c in Subtype::ALL {
                println!("{c:<5} {}", r.counts.get(c));
            }
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let r = cmd_train(&cfg)?;
            println!(
                "train {} / val {} / test {}: test accuracy {:.4}",
                r.train_size, r.val_size, r.test_size, r.accuracy
            );
            println!("model written to {}", cfg.checkpoint_path().display());
        }
        Command::Cv(args) => {
            let s = cmd_cv(&args.resolve()?)?;
            print!("{}", format_summary(&s));
        }
        Command::Predict(args) => {
            let r = cmd_predict(&args.resolve()?)?;
            println!("{} samples written to {}", r.samples, r.output.display());
            if let Some(a) = r.accuracy {
                println!("accuracy against supplied labels {a:.4}");
            }
        }
        Command::Report { summary, run } => {
            let s = cmd_report(&summary, &run.resolve()?)?;
            print!("{}", format_summary(&s));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
