//! `fairaudit` command-line driver.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairaudit_core::mitigation::Strategy;
use fairaudit_core::models::ModelFamily;

#[derive(Parser, Debug)]
#[command(name = "fairaudit", version, about = "Disparate impact auditing and mitigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Data (and decision) disparate impact with confidence intervals.
    Audit(AuditArgs),
    /// Cross-validated training and evaluation of one model.
    TrainEval(TrainArgs),
    /// Cross-validated comparison of a mitigation strategy against the plain model.
    Mitigate(MitigateArgs),
    /// Runs a figure preset or an experiment file; writes JSON and CSV reports.
    Experiment(ExperimentArgs),
    /// Delta-method versus percentile-bootstrap intervals.
    BootstrapCompare(BootstrapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Human,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Built-in dataset name, config file path, or config name in $FAIRAUDIT_CONFIG_DIR.
    #[arg(long, short)]
    pub dataset: String,
    /// Directory that relative data file paths resolve against [env: FAIRAUDIT_DATA_DIR].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Sensitive column, overriding the dataset config.
    #[arg(long, requires = "protected")]
    pub sensitive: Option<String>,
    /// Value of the sensitive column marking the protected group (S = 0).
    #[arg(long, requires = "sensitive")]
    pub protected: Option<String>,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictionArgs {
    /// Single-column CSV of 0/1 decisions, row-aligned with the preprocessed data.
    #[arg(long, conflicts_with = "model")]
    pub predictions: Option<PathBuf>,
    /// Saved model whose decisions are audited.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub predictions: PredictionArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Run both one-sided tests of the disparate impact against this level.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long, short, default_value = "lr")]
    pub model: ModelFamily,
    /// JSON file of model hyperparameters (tagged with `family`), replacing the defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Subsample the majority group of every training fold to the minority size.
    #[arg(long)]
    pub balance_training: bool,
    /// Also fit on the full data and save the model here.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct MitigateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub strategy: Strategy,
    /// Disparate impact the positive-discrimination thresholds aim for.
    #[arg(long, default_value_t = 0.8)]
    pub target_di: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// Preset name (fig3 .. fig8) or a TOML/JSON file with an `experiments` list.
    pub preset: String,
    /// Master seed; replaces the seed of every configuration.
    #[arg(long)]
    pub seed: u64,
    /// Overrides the number of folds.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Directory receiving `<name>.json` and `<name>.csv`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub predictions: PredictionArgs,
    #[arg(long, default_value = "data_di")]
    pub metric: fairaudit_core::metrics::Metric,
    #[arg(long, short = 'b', default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Audit(a) => commands::audit(&a).map(|_| 0),
        Command::TrainEval(a) => commands::train_eval(&a).map(|_| 0),
        Command::Mitigate(a) => commands::mitigate(&a).map(|_| 0),
        Command::Experiment(a) => commands::experiment(&a),
        Command::BootstrapCompare(a) => commands::bootstrap_compare(&a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::category_code(e.category()))
        }
    }
}
