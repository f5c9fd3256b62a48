//! Command-line driver for the secor experiments: config resolution,
//! experiment dispatch, and machine-readable result emission (CSV/JSON plus
//! a schema file and a reproducibility manifest).

pub mod manifest;
pub mod writers;

use clap::{Parser, Subcommand, ValueEnum};
use secor::backtest::{TrimMode, TrimRule};
use secor::config::{ExperimentConfig, ExperimentKind, ExperimentParams};
use secor::experiments::{run_experiment, ExperimentResult};
use secor::io::{load_returns_csv, LoadedPanel};
use std::path::{Path, PathBuf};

/// Exit codes: 0 success, 1 validation error, 2 runtime/numerical error.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "secor",
    version,
    about = "Second-order risk experiments: estimation-error-aware volatility forecasts for optimized portfolios"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Experiment config file (flat key = value with `[sections]`); a
    /// previously written manifest.json is also accepted and reproduces
    /// that run exactly.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for results, schema and manifest.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Output format for result tables.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Worker threads (0 = library default). Changes wall time only, never
    /// output bytes.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Returns-panel CSV (required by `backtest`, optional for `bias-grid`).
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-asset toy model of active risk underforecasting.
    Toy(RunArgs),
    /// Constrained minimum-variance frontier under estimation noise.
    Frontier(RunArgs),
    /// Inverse-Wishart identity oracle and forecast-ratio block.
    Wishart(RunArgs),
    /// Bias-statistic grid over (N, T/N) cells.
    #[command(name = "bias-grid")]
    BiasGrid(RunArgs),
    /// Factor-model bias time series for optimized vs control ensembles.
    #[command(name = "factor-bias")]
    FactorBias(RunArgs),
    /// Rolling backtest on a user-supplied returns CSV.
    Backtest(RunArgs),
}

impl Command {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Command::Toy(_) => ExperimentKind::ToyModel,
            Command::Frontier(_) => ExperimentKind::Frontier,
            Command::Wishart(_) => ExperimentKind::WishartOracle,
            Command::BiasGrid(_) => ExperimentKind::AssetBiasGrid,
            Command::FactorBias(_) => ExperimentKind::FactorBias,
            Command::Backtest(_) => ExperimentKind::Backtest,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Toy(a)
            | Command::Frontier(a)
            | Command::Wishart(a)
            | Command::BiasGrid(a)
            | Command::FactorBias(a)
            | Command::Backtest(a) => a,
        }
    }
}

/// Default master seed when neither --seed nor a config supplies one.
pub const DEFAULT_SEED: u64 = 42;

/// Resolves the effective config: explicit config file (or manifest), with
/// --seed overriding the seed.
pub fn resolve_config(
    kind: ExperimentKind,
    args: &RunArgs,
) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.config {
        None => ExperimentConfig::default_for(kind, args.seed.unwrap_or(DEFAULT_SEED)),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Validation(format!("cannot read config {}: {e}", path.display()))
            })?;
            let cfg = if text.trim_start().starts_with('{') {
                manifest::config_from_manifest(&text).map_err(CliError::Validation)?
            } else {
                secor::config::parse_config_str(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
            };
            cfg
        }
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if config.kind != kind {
        return Err(CliError::Validation(format!(
            "config is for experiment `{}` but the `{}` subcommand was invoked",
            config.kind.as_str(),
            kind.as_str()
        )));
    }
    Ok(config)
}

fn backtest_trim(config: &ExperimentConfig) -> Option<TrimRule> {
    if let ExperimentParams::Backtest(b) = &config.params {
        let mode = match b.trim_mode.as_deref() {
            Some("clamp") => TrimMode::Clamp,
            Some("drop") => TrimMode::Drop,
            _ => return None,
        };
        return Some(TrimRule {
            mode,
            lower: b.trim_lower,
            upper: b.trim_upper,
            cross_sectional_sigma_cap: b.trim_sigma_cap,
        });
    }
    None
}

fn load_data(
    config: &ExperimentConfig,
    args: &RunArgs,
) -> Result<Option<LoadedPanel>, CliError> {
    let Some(path) = &args.data else {
        return Ok(None);
    };
    let trim = backtest_trim(config);
    let loaded = load_returns_csv(path, trim.as_ref())
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    for (asset, missing) in &loaded.excluded_assets {
        eprintln!("note: excluded {asset:?} ({missing} missing observations)");
    }
    Ok(Some(loaded))
}

fn dispatch(
    config: &ExperimentConfig,
    data: Option<&LoadedPanel>,
) -> Result<ExperimentResult, CliError> {
    let map_runtime = |e: secor::experiments::ExperimentError| CliError::Runtime(e.to_string());
    match (&config.params, data) {
        (ExperimentParams::Backtest(b), Some(panel)) => {
            secor::experiments::data_backtest::run(b, config, panel).map_err(map_runtime)
        }
        (ExperimentParams::Backtest(_), None) => Err(CliError::Validation(
            "the backtest experiment requires --data <returns.csv>".into(),
        )),
        (ExperimentParams::BiasGrid(b), Some(panel)) => {
            secor::experiments::bias_grid::run_on_panel(b, config, panel).map_err(map_runtime)
        }
        _ => run_experiment(config).map_err(map_runtime),
    }
}

/// Runs one subcommand end to end; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let kind = cli.command.kind();
    let args = cli.command.args();
    match run_inner(kind, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run_inner(kind: ExperimentKind, args: &RunArgs) -> Result<(), CliError> {
    let config = resolve_config(kind, args)?;
    let started = chrono::Utc::now();

    let data = load_data(&config, args)?;

    let result = if args.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot build thread pool: {e}")))?;
        pool.install(|| dispatch(&config, data.as_ref()))?
    } else {
        dispatch(&config, data.as_ref())?
    };

    std::fs::create_dir_all(&args.out).map_err(|e| {
        CliError::Runtime(format!("cannot create output dir {}: {e}", args.out.display()))
    })?;

    let written = match args.format {
        OutputFormat::Csv => writers::write_tables_csv(&args.out, &result),
        OutputFormat::Json => writers::write_tables_json(&args.out, &result),
    }
    .map_err(CliError::Runtime)?;
    let schema_path = writers::write_schema(&args.out, &result, args.format, &written)
        .map_err(CliError::Runtime)?;

    let finished = chrono::Utc::now();
    let manifest_path = manifest::write_manifest(
        &args.out,
        &result,
        args,
        &written,
        &schema_path,
        started,
        finished,
    )
    .map_err(CliError::Runtime)?;

    // headline summary to stdout
    print!("{}:", result.experiment);
    for item in &result.summary {
        match item.se {
            Some(se) => print!(" {} = {:.6} ± {:.6};", item.key, item.value, se),
            None => print!(" {} = {:.6};", item.key, item.value),
        }
    }
    println!();
    println!(
        "wrote {} table(s), schema {}, manifest {}",
        written.len(),
        schema_path.display(),
        manifest_path.display()
    );
    Ok(())
}

/// Computes the SHA-256 of a file, hex-encoded.
pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
