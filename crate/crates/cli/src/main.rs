mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tsvqr::{KernelSpec, SolverConfig, TsvqrError};

#[derive(Debug, Parser)]
#[command(
    name = "tsvqr",
    version,
    about = "Twin support vector quantile regression"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalOpts {
    /// Seed for data generation and shuffled coordinate order.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Projected-gradient tolerance of the dual solver.
    #[arg(long, global = true, default_value_t = 1e-6, value_parser = positive)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 1000)]
    pub max_epochs: usize,
    /// Visit coordinates in a seeded random order each epoch.
    #[arg(long, global = true)]
    pub shuffle: bool,
}

impl GlobalOpts {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_epochs: self.max_epochs,
            shuffle: self.shuffle,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic train/test pair.
    Gen(GenArgs),
    /// Fit a model on a dataset CSV.
    Train(TrainArgs),
    /// Write f_lower,f_upper,f for every row of a CSV.
    Predict(PredictArgs),
    /// Rank a hyperparameter grid by GACV and save the best model.
    Gridsearch(GridArgs),
    /// Report Risk, RMSE, MAE, MAPE and GACV of a model.
    Eval(EvalArgs),
    /// Export quantile curves over an evenly spaced grid.
    Plotdata(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Gaussian,
    Wavelet,
}

impl KernelKind {
    pub fn spec(self, p: f64) -> KernelSpec {
        match self {
            KernelKind::Linear => KernelSpec::Linear,
            KernelKind::Gaussian => KernelSpec::Gaussian { p },
            KernelKind::Wavelet => KernelSpec::Wavelet { a: p },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    /// A1, A2, A3, B1, B2, B3 or sinc.
    #[arg(long)]
    pub family: tsvqr::Family,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// File name prefix (defaults to the family name).
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Write the noise-free response.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DataOpts {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column (defaults to the last column).
    #[arg(long)]
    pub target_col: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[arg(long, value_parser = quantile_level)]
    pub tau: f64,
    /// Sets both C₁ and C₂.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub c: f64,
    #[arg(long, value_parser = positive)]
    pub c1: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub c2: Option<f64>,
    /// Sets both ε₁ and ε₂.
    #[arg(long, default_value_t = 0.01, value_parser = non_negative)]
    pub eps: f64,
    #[arg(long, value_parser = non_negative)]
    pub eps1: Option<f64>,
    #[arg(long, value_parser = non_negative)]
    pub eps2: Option<f64>,
    #[arg(long, value_enum, default_value_t = KernelKind::Gaussian)]
    pub kernel: KernelKind,
    /// Kernel width (Gaussian) or dilation (wavelet).
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub p: f64,
    /// Fit on the raw inputs instead of z-scored ones.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataOpts,
    /// Quantile levels to search (repeatable; defaults to 0.1, 0.25, 0.5, 0.75, 0.9).
    #[arg(long, value_parser = quantile_level)]
    pub tau: Vec<f64>,
    #[arg(long, value_enum, default_value_t = KernelKind::Gaussian)]
    pub kernel: KernelKind,
    /// Comma-separated C values (defaults to 2^-8 … 2^8).
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub c_values: Vec<f64>,
    /// Comma-separated kernel parameters (defaults to 2^-8 … 2^8).
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub p_values: Vec<f64>,
    /// Comma-separated ε values (defaults to 0.01 … 0.10).
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub eps_values: Vec<f64>,
    /// Search only C₁ = C₂.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub tie_c: bool,
    /// Search only ε₁ = ε₂.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub tie_eps: bool,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test set.
    #[command(flatten)]
    pub data: DataOpts,
    /// Training set the model was fit on; enables GACV.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PlotArgs {
    /// Single-feature model file (repeatable).
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Grid start (defaults to the smallest training input).
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    /// Grid end (defaults to the largest training input).
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Append the analytic sinc quantile curve as an `oracle` column.
    #[arg(long)]
    pub sinc_oracle: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("value must be finite".into())
    }
}

fn quantile_level(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("tau must lie strictly between 0 and 1, got {v}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a positive value, got {v}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a non-negative value, got {v}"))
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    match err.downcast_ref::<TsvqrError>() {
        Some(TsvqrError::InvalidArgument(_)) => "invalid_argument",
        Some(TsvqrError::DimensionMismatch { .. }) => "dimension_mismatch",
        Some(TsvqrError::Solver { .. }) => "solver",
        Some(TsvqrError::GramTooLarge { .. }) => "gram_too_large",
        Some(TsvqrError::Parse { .. }) | Some(TsvqrError::Csv(_)) => "parse",
        Some(TsvqrError::SchemaVersion(_)) | Some(TsvqrError::Json(_)) => "model_format",
        Some(TsvqrError::Io(_)) => "io",
        None if err.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "runtime",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!(
                "{}",
                serde_json::json!({ "error": "runtime", "message": e.to_string() })
            );
            return ExitCode::FAILURE;
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let body =
                serde_json::json!({ "error": error_kind(&err), "message": format!("{err:#}") });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(quantile_level("0.25"), Ok(0.25));
        assert!(quantile_level("0").is_err());
        assert!(quantile_level("1").is_err());
        assert!(quantile_level("nan").is_err());
        assert!(positive("0").is_err());
        assert_eq!(non_negative("0"), Ok(0.0));
        assert!(non_negative("-1e-9").is_err());
    }
}
