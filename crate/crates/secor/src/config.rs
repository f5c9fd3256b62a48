//! Experiment configuration: a flat `key = value` format with `[section]`
//! headers, chosen for zero-dependency parsing and diffability.
//!
//! One `[experiment]` section selects the experiment kind and master seed;
//! one optional kind-specific section overrides that experiment's defaults.
//! Unknown sections or keys are rejected with line diagnostics, as are type
//! mismatches. `#` and `;` start comments.

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {content:?}")]
    MalformedLine { line: usize, content: String },
    #[error("line {line}: unknown section {section:?}")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key {key:?} in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: duplicate key {key:?} in section [{section}]")]
    DuplicateKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: key {key:?}: expected {expected}, got {value:?}")]
    TypeMismatch {
        line: usize,
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("missing required field {key:?} in section [{section}]")]
    MissingField { section: String, key: String },
    #[error("key outside any section at line {line}")]
    KeyOutsideSection { line: usize },
    #[error("validation: {0}")]
    Validation(String),
    #[error("cannot read config {path:?}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ToyModel,
    Frontier,
    WishartOracle,
    AssetBiasGrid,
    FactorBias,
    Backtest,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::ToyModel => "toy",
            ExperimentKind::Frontier => "frontier",
            ExperimentKind::WishartOracle => "wishart",
            ExperimentKind::AssetBiasGrid => "bias_grid",
            ExperimentKind::FactorBias => "factor_bias",
            ExperimentKind::Backtest => "backtest",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        match s {
            "toy" | "toy_model" => Some(ExperimentKind::ToyModel),
            "frontier" => Some(ExperimentKind::Frontier),
            "wishart" | "wishart_oracle" => Some(ExperimentKind::WishartOracle),
            "bias_grid" | "bias-grid" | "asset_bias_grid" => Some(ExperimentKind::AssetBiasGrid),
            "factor_bias" | "factor-bias" => Some(ExperimentKind::FactorBias),
            "backtest" => Some(ExperimentKind::Backtest),
            _ => None,
        }
    }

    /// Config section name for the kind-specific settings.
    fn section(&self) -> &'static str {
        match self {
            ExperimentKind::ToyModel => "toy",
            ExperimentKind::Frontier => "frontier",
            ExperimentKind::WishartOracle => "wishart",
            ExperimentKind::AssetBiasGrid => "bias_grid",
            ExperimentKind::FactorBias => "factor_bias",
            ExperimentKind::Backtest => "backtest",
        }
    }
}

/// Toy-model settings (two assets, pick the lower sample stdev).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyConfig {
    pub t_obs: usize,
    pub true_sigma: f64,
    pub n_trials: usize,
    pub n_assets: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            t_obs: 10,
            true_sigma: 0.10,
            n_trials: 100_000,
            n_assets: 2,
        }
    }
}

/// Efficient-frontier Monte Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierConfig {
    pub n_assets: usize,
    pub t_obs: usize,
    /// Trials per target-return grid point.
    pub n_trials: usize,
    /// Offsets of the return grid above the minimum-variance return, in
    /// units of the frontier curvature scale.
    pub r_multipliers: Vec<f64>,
    pub eig_min: f64,
    pub eig_max: f64,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self {
            n_assets: 50,
            t_obs: 100,
            n_trials: 200,
            r_multipliers: vec![0.6, 1.0, 1.4, 1.8, 2.2],
            eig_min: 0.01,
            eig_max: 0.25,
        }
    }
}

/// Wishart-identity oracle settings (identity checks plus the optimized-
/// portfolio forecast-ratio block at the same dimensions).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WishartConfig {
    pub n_assets: usize,
    pub t_obs: usize,
    pub n_trials: usize,
    /// Use a seeded random SPD scale matrix instead of the identity.
    pub random_omega: bool,
}

impl Default for WishartConfig {
    fn default() -> Self {
        Self {
            n_assets: 2,
            t_obs: 10,
            n_trials: 100_000,
            random_omega: false,
        }
    }
}

/// Bias-statistic grid over (N, T/N) cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasGridConfig {
    pub n_list: Vec<usize>,
    pub t_over_n: Vec<f64>,
    /// Trials averaged per cell.
    pub n_trials: usize,
    /// Out-of-sample evaluation periods per trial.
    pub eval_len: usize,
    pub demean: bool,
    pub eig_min: f64,
    pub eig_max: f64,
    /// Uniform kurtosis of the synthetic returns (> 3 enables the
    /// fat-tailed generator and the matching effective-window correction).
    pub kurtosis: Option<f64>,
}

impl Default for BiasGridConfig {
    fn default() -> Self {
        Self {
            n_list: vec![10, 25, 50, 100],
            t_over_n: vec![1.5, 1.75, 2.0, 2.5, 3.0, 4.0],
            n_trials: 50,
            eval_len: 252,
            demean: false,
            eig_min: 0.01,
            eig_max: 0.25,
            kurtosis: None,
        }
    }
}

/// Factor-model bias time-series settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorBiasConfig {
    pub n_assets: usize,
    pub k_factors: usize,
    pub t_obs: usize,
    pub n_portfolios: usize,
    /// Weekly evaluation periods after the first full estimation window.
    pub eval_len: usize,
    pub trailing_window: usize,
    pub factor_vol: f64,
    pub specific_vol: f64,
    /// Exposure-noise scale of the synthetic world.
    pub rho: f64,
}

impl Default for FactorBiasConfig {
    fn default() -> Self {
        Self {
            n_assets: 500,
            k_factors: 20,
            t_obs: 156,
            n_portfolios: 500,
            eval_len: 156,
            trailing_window: 52,
            factor_vol: 0.006,
            specific_vol: 0.01,
            rho: 0.0,
        }
    }
}

/// CSV-driven rolling backtest settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestConfig {
    pub window_t: usize,
    /// Random asset subset size (all complete assets when absent).
    pub n_assets: Option<usize>,
    /// `optimized` or `random_control`.
    pub strategy: String,
    pub demean: bool,
    /// Optional trim: `clamp` or `drop` with bounds.
    pub trim_mode: Option<String>,
    pub trim_lower: f64,
    pub trim_upper: f64,
    pub trim_sigma_cap: Option<f64>,
    /// Trailing window for the bias series (full-sample B is always
    /// reported too).
    pub trailing_window: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window_t: 100,
            n_assets: None,
            strategy: "optimized".into(),
            demean: true,
            trim_mode: None,
            trim_lower: -0.5,
            trim_upper: 0.8,
            trim_sigma_cap: None,
            trailing_window: 52,
        }
    }
}

/// Kind-specific settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExperimentParams {
    Toy(ToyConfig),
    Frontier(FrontierConfig),
    Wishart(WishartConfig),
    BiasGrid(BiasGridConfig),
    FactorBias(FactorBiasConfig),
    Backtest(BacktestConfig),
}

/// A fully validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub params: ExperimentParams,
}

impl ExperimentConfig {
    /// Built-in defaults for a kind (used by the CLI when no config file is
    /// given).
    pub fn default_for(kind: ExperimentKind, master_seed: u64) -> Self {
        let params = match kind {
            ExperimentKind::ToyModel => ExperimentParams::Toy(ToyConfig::default()),
            ExperimentKind::Frontier => ExperimentParams::Frontier(FrontierConfig::default()),
            ExperimentKind::WishartOracle => ExperimentParams::Wishart(WishartConfig::default()),
            ExperimentKind::AssetBiasGrid => ExperimentParams::BiasGrid(BiasGridConfig::default()),
            ExperimentKind::FactorBias => ExperimentParams::FactorBias(FactorBiasConfig::default()),
            ExperimentKind::Backtest => ExperimentParams::Backtest(BacktestConfig::default()),
        };
        ExperimentConfig {
            kind,
            master_seed,
            params,
        }
    }

    /// Canonical text form: fixed section order, fixed key order. Parsing it
    /// back yields an equal config.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "kind = {}", self.kind.as_str());
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s);
        match &self.params {
            ExperimentParams::Toy(c) => {
                let _ = writeln!(s, "[toy]");
                let _ = writeln!(s, "t_obs = {}", c.t_obs);
                let _ = writeln!(s, "true_sigma = {}", c.true_sigma);
                let _ = writeln!(s, "n_trials = {}", c.n_trials);
                let _ = writeln!(s, "n_assets = {}", c.n_assets);
            }
            ExperimentParams::Frontier(c) => {
                let _ = writeln!(s, "[frontier]");
                let _ = writeln!(s, "n_assets = {}", c.n_assets);
                let _ = writeln!(s, "t_obs = {}", c.t_obs);
                let _ = writeln!(s, "n_trials = {}", c.n_trials);
                let _ = writeln!(s, "r_multipliers = {}", join_f64(&c.r_multipliers));
                let _ = writeln!(s, "eig_min = {}", c.eig_min);
                let _ = writeln!(s, "eig_max = {}", c.eig_max);
            }
            ExperimentParams::Wishart(c) => {
                let _ = writeln!(s, "[wishart]");
                let _ = writeln!(s, "n_assets = {}", c.n_assets);
                let _ = writeln!(s, "t_obs = {}", c.t_obs);
                let _ = writeln!(s, "n_trials = {}", c.n_trials);
                let _ = writeln!(s, "random_omega = {}", c.random_omega);
            }
            ExperimentParams::BiasGrid(c) => {
                let _ = writeln!(s, "[bias_grid]");
                let _ = writeln!(s, "n_list = {}", join_usize(&c.n_list));
                let _ = writeln!(s, "t_over_n = {}", join_f64(&c.t_over_n));
                let _ = writeln!(s, "n_trials = {}", c.n_trials);
                let _ = writeln!(s, "eval_len = {}", c.eval_len);
                let _ = writeln!(s, "demean = {}", c.demean);
                let _ = writeln!(s, "eig_min = {}", c.eig_min);
                let _ = writeln!(s, "eig_max = {}", c.eig_max);
                if let Some(k) = c.kurtosis {
                    let _ = writeln!(s, "kurtosis = {k}");
                }
            }
            ExperimentParams::FactorBias(c) => {
                let _ = writeln!(s, "[factor_bias]");
                let _ = writeln!(s, "n_assets = {}", c.n_assets);
                let _ = writeln!(s, "k_factors = {}", c.k_factors);
                let _ = writeln!(s, "t_obs = {}", c.t_obs);
                let _ = writeln!(s, "n_portfolios = {}", c.n_portfolios);
                let _ = writeln!(s, "eval_len = {}", c.eval_len);
                let _ = writeln!(s, "trailing_window = {}", c.trailing_window);
                let _ = writeln!(s, "factor_vol = {}", c.factor_vol);
                let _ = writeln!(s, "specific_vol = {}", c.specific_vol);
                let _ = writeln!(s, "rho = {}", c.rho);
            }
            ExperimentParams::Backtest(c) => {
                let _ = writeln!(s, "[backtest]");
                let _ = writeln!(s, "window_t = {}", c.window_t);
                if let Some(n) = c.n_assets {
                    let _ = writeln!(s, "n_assets = {n}");
                }
                let _ = writeln!(s, "strategy = {}", c.strategy);
                let _ = writeln!(s, "demean = {}", c.demean);
                if let Some(mode) = &c.trim_mode {
                    let _ = writeln!(s, "trim_mode = {mode}");
                    let _ = writeln!(s, "trim_lower = {}", c.trim_lower);
                    let _ = writeln!(s, "trim_upper = {}", c.trim_upper);
                    if let Some(cap) = c.trim_sigma_cap {
                        let _ = writeln!(s, "trim_sigma_cap = {cap}");
                    }
                }
                let _ = writeln!(s, "trailing_window = {}", c.trailing_window);
            }
        }
        s
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_usize(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// One parsed `key = value` with its source line for diagnostics.
struct RawValue {
    line: usize,
    value: String,
    consumed: std::cell::Cell<bool>,
}

struct Section {
    line: usize,
    entries: BTreeMap<String, RawValue>,
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find(['#', ';']) {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(ConfigError::MalformedLine {
                line: line_no,
                content: raw_line.trim().to_string(),
            })?;
            let name = name.trim().to_string();
            if name.is_empty() || name.contains(['[', ']', '=']) {
                return Err(ConfigError::MalformedLine {
                    line: line_no,
                    content: raw_line.trim().to_string(),
                });
            }
            sections.entry(name.clone()).or_insert(Section {
                line: line_no,
                entries: BTreeMap::new(),
            });
            current = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::MalformedLine {
            line: line_no,
            content: raw_line.trim().to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::MalformedLine {
                line: line_no,
                content: raw_line.trim().to_string(),
            });
        }
        let section_name = current
            .clone()
            .ok_or(ConfigError::KeyOutsideSection { line: line_no })?;
        let section = sections.get_mut(&section_name).expect("section exists");
        if section.entries.contains_key(key) {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                section: section_name,
                key: key.to_string(),
            });
        }
        section.entries.insert(
            key.to_string(),
            RawValue {
                line: line_no,
                value: value.to_string(),
                consumed: std::cell::Cell::new(false),
            },
        );
    }
    Ok(sections)
}

struct SectionReader<'a> {
    name: &'a str,
    section: Option<&'a Section>,
}

impl<'a> SectionReader<'a> {
    fn raw(&self, key: &str) -> Option<&'a RawValue> {
        let v = self.section.and_then(|s| s.entries.get(key));
        if let Some(v) = v {
            v.consumed.set(true);
        }
        v
    }

    fn require(&self, key: &str) -> Result<&'a RawValue, ConfigError> {
        self.raw(key).ok_or_else(|| ConfigError::MissingField {
            section: self.name.to_string(),
            key: key.to_string(),
        })
    }

    fn parse<T: std::str::FromStr>(
        &self,
        key: &str,
        expected: &'static str,
        raw: &RawValue,
    ) -> Result<T, ConfigError> {
        raw.value.parse().map_err(|_| ConfigError::TypeMismatch {
            line: raw.line,
            key: key.to_string(),
            expected,
            value: raw.value.clone(),
        })
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            Some(raw) => self.parse(key, "a non-negative integer", raw),
            None => Ok(default),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            Some(raw) => self.parse(key, "a number", raw),
            None => Ok(default),
        }
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            Some(raw) => Ok(Some(self.parse(key, "a number", raw)?)),
            None => Ok(None),
        }
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.raw(key) {
            Some(raw) => Ok(Some(self.parse(key, "a non-negative integer", raw)?)),
            None => Ok(None),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            Some(raw) => match raw.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(ConfigError::TypeMismatch {
                    line: raw.line,
                    key: key.to_string(),
                    expected: "a boolean (true/false)",
                    value: raw.value.clone(),
                }),
            },
            None => Ok(default),
        }
    }

    fn string_opt(&self, key: &str) -> Option<String> {
        self.raw(key).map(|r| r.value.clone())
    }

    fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .value
                .split(',')
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|_| ConfigError::TypeMismatch {
                        line: raw.line,
                        key: key.to_string(),
                        expected: "a comma-separated list of numbers",
                        value: raw.value.clone(),
                    })
                })
                .collect(),
        }
    }

    fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, ConfigError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .value
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|_| ConfigError::TypeMismatch {
                            line: raw.line,
                            key: key.to_string(),
                            expected: "a comma-separated list of integers",
                            value: raw.value.clone(),
                        })
                })
                .collect(),
        }
    }
}

/// Parses and validates a config from text. See the module docs for the
/// format; defaults fill every key that is not given.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let sections = parse_sections(text)?;

    // reject unknown sections up front
    const KNOWN: [&str; 7] = [
        "experiment",
        "toy",
        "frontier",
        "wishart",
        "bias_grid",
        "factor_bias",
        "backtest",
    ];
    for (name, sec) in &sections {
        if !KNOWN.contains(&name.as_str()) {
            return Err(ConfigError::UnknownSection {
                line: sec.line,
                section: name.clone(),
            });
        }
    }

    let experiment = SectionReader {
        name: "experiment",
        section: sections.get("experiment"),
    };
    if experiment.section.is_none() {
        return Err(ConfigError::MissingField {
            section: "experiment".into(),
            key: "kind".into(),
        });
    }
    let kind_raw = experiment.require("kind")?;
    let kind = ExperimentKind::from_str(kind_raw.value.as_str()).ok_or_else(|| {
        ConfigError::TypeMismatch {
            line: kind_raw.line,
            key: "kind".into(),
            expected: "one of toy, frontier, wishart, bias_grid, factor_bias, backtest",
            value: kind_raw.value.clone(),
        }
    })?;
    let seed_raw = experiment.require("master_seed")?;
    let master_seed: u64 = experiment.parse("master_seed", "a 64-bit unsigned integer", seed_raw)?;

    // the kind-specific section must be the only other section present
    for (name, sec) in &sections {
        if name != "experiment" && name != kind.section() {
            return Err(ConfigError::UnknownSection {
                line: sec.line,
                section: name.clone(),
            });
        }
    }

    let reader = SectionReader {
        name: kind.section(),
        section: sections.get(kind.section()),
    };

    let params = match kind {
        ExperimentKind::ToyModel => {
            let d = ToyConfig::default();
            ExperimentParams::Toy(ToyConfig {
                t_obs: reader.usize_or("t_obs", d.t_obs)?,
                true_sigma: reader.f64_or("true_sigma", d.true_sigma)?,
                n_trials: reader.usize_or("n_trials", d.n_trials)?,
                n_assets: reader.usize_or("n_assets", d.n_assets)?,
            })
        }
        ExperimentKind::Frontier => {
            let d = FrontierConfig::default();
            ExperimentParams::Frontier(FrontierConfig {
                n_assets: reader.usize_or("n_assets", d.n_assets)?,
                t_obs: reader.usize_or("t_obs", d.t_obs)?,
                n_trials: reader.usize_or("n_trials", d.n_trials)?,
                r_multipliers: reader.f64_list_or("r_multipliers", &d.r_multipliers)?,
                eig_min: reader.f64_or("eig_min", d.eig_min)?,
                eig_max: reader.f64_or("eig_max", d.eig_max)?,
            })
        }
        ExperimentKind::WishartOracle => {
            let d = WishartConfig::default();
            ExperimentParams::Wishart(WishartConfig {
                n_assets: reader.usize_or("n_assets", d.n_assets)?,
                t_obs: reader.usize_or("t_obs", d.t_obs)?,
                n_trials: reader.usize_or("n_trials", d.n_trials)?,
                random_omega: reader.bool_or("random_omega", d.random_omega)?,
            })
        }
        ExperimentKind::AssetBiasGrid => {
            let d = BiasGridConfig::default();
            ExperimentParams::BiasGrid(BiasGridConfig {
                n_list: reader.usize_list_or("n_list", &d.n_list)?,
                t_over_n: reader.f64_list_or("t_over_n", &d.t_over_n)?,
                n_trials: reader.usize_or("n_trials", d.n_trials)?,
                eval_len: reader.usize_or("eval_len", d.eval_len)?,
                demean: reader.bool_or("demean", d.demean)?,
                eig_min: reader.f64_or("eig_min", d.eig_min)?,
                eig_max: reader.f64_or("eig_max", d.eig_max)?,
                kurtosis: reader.f64_opt("kurtosis")?,
            })
        }
        ExperimentKind::FactorBias => {
            let d = FactorBiasConfig::default();
            ExperimentParams::FactorBias(FactorBiasConfig {
                n_assets: reader.usize_or("n_assets", d.n_assets)?,
                k_factors: reader.usize_or("k_factors", d.k_factors)?,
                t_obs: reader.usize_or("t_obs", d.t_obs)?,
                n_portfolios: reader.usize_or("n_portfolios", d.n_portfolios)?,
                eval_len: reader.usize_or("eval_len", d.eval_len)?,
                trailing_window: reader.usize_or("trailing_window", d.trailing_window)?,
                factor_vol: reader.f64_or("factor_vol", d.factor_vol)?,
                specific_vol: reader.f64_or("specific_vol", d.specific_vol)?,
                rho: reader.f64_or("rho", d.rho)?,
            })
        }
        ExperimentKind::Backtest => {
            let d = BacktestConfig::default();
            ExperimentParams::Backtest(BacktestConfig {
                window_t: reader.usize_or("window_t", d.window_t)?,
                n_assets: reader.usize_opt("n_assets")?,
                strategy: reader.string_opt("strategy").unwrap_or(d.strategy),
                demean: reader.bool_or("demean", d.demean)?,
                trim_mode: reader.string_opt("trim_mode"),
                trim_lower: reader.f64_or("trim_lower", d.trim_lower)?,
                trim_upper: reader.f64_or("trim_upper", d.trim_upper)?,
                trim_sigma_cap: reader.f64_opt("trim_sigma_cap")?,
                trailing_window: reader.usize_or("trailing_window", d.trailing_window)?,
            })
        }
    };

    // any key not consumed by a reader is unknown
    for (name, sec) in &sections {
        for (key, raw) in &sec.entries {
            if !raw.consumed.get() {
                return Err(ConfigError::UnknownKey {
                    line: raw.line,
                    section: name.clone(),
                    key: key.clone(),
                });
            }
        }
    }

    let config = ExperimentConfig {
        kind,
        master_seed,
        params,
    };
    validate(&config)?;
    Ok(config)
}

/// Reads and parses a config file.
pub fn parse_config(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

fn validate(config: &ExperimentConfig) -> Result<(), ConfigError> {
    let fail = |msg: String| Err(ConfigError::Validation(msg));
    match &config.params {
        ExperimentParams::Toy(c) => {
            if c.t_obs < 2 {
                return fail(format!("toy t_obs must be >= 2, got {}", c.t_obs));
            }
            if c.n_assets < 2 {
                return fail(format!("toy n_assets must be >= 2, got {}", c.n_assets));
            }
            if c.n_trials == 0 {
                return fail("toy n_trials must be >= 1".into());
            }
            if !(c.true_sigma >= 0.0) {
                return fail(format!("toy true_sigma must be >= 0, got {}", c.true_sigma));
            }
        }
        ExperimentParams::Frontier(c) => {
            if c.n_trials == 0 {
                return fail("frontier n_trials must be >= 1".into());
            }
            if c.n_assets >= c.t_obs {
                return fail(format!(
                    "frontier requires n_assets < t_obs: the correction diverges as the number of assets ({}) approaches the number of observations ({})",
                    c.n_assets, c.t_obs
                ));
            }
            if c.r_multipliers.is_empty() {
                return fail("frontier r_multipliers must be non-empty".into());
            }
            if !(c.eig_min > 0.0 && c.eig_max >= c.eig_min) {
                return fail("frontier eigenvalue range must satisfy 0 < eig_min <= eig_max".into());
            }
        }
        ExperimentParams::Wishart(c) => {
            if c.n_trials == 0 {
                return fail("wishart n_trials must be >= 1".into());
            }
            if c.t_obs <= c.n_assets + 3 {
                return fail(format!(
                    "wishart requires t_obs > n_assets + 3 (exact identities diverge): got n_assets={}, t_obs={}",
                    c.n_assets, c.t_obs
                ));
            }
        }
        ExperimentParams::BiasGrid(c) => {
            if c.n_list.is_empty() || c.t_over_n.is_empty() {
                return fail("bias_grid n_list and t_over_n must be non-empty".into());
            }
            if c.n_trials == 0 {
                return fail("bias_grid n_trials must be >= 1".into());
            }
            if c.eval_len < 10 {
                return fail(format!("bias_grid eval_len must be >= 10, got {}", c.eval_len));
            }
            for &n in &c.n_list {
                if n == 0 {
                    return fail("bias_grid n_list entries must be >= 1".into());
                }
                for &r in &c.t_over_n {
                    let t = (n as f64 * r).round() as usize;
                    if t <= n {
                        return fail(format!(
                            "bias_grid cell (n={n}, t/n={r}) gives t={t} <= n: the correction diverges as the number of assets approaches the number of observations"
                        ));
                    }
                }
            }
            if let Some(k) = c.kurtosis {
                if !(k > 3.0) {
                    return fail(format!(
                        "bias_grid kurtosis must exceed 3 (Gaussian) to enable the fat-tailed generator, got {k}"
                    ));
                }
            }
        }
        ExperimentParams::FactorBias(c) => {
            if c.k_factors == 0 || c.k_factors >= c.t_obs {
                return fail(format!(
                    "factor_bias requires 0 < k_factors < t_obs (correction diverges otherwise): got k={}, t={}",
                    c.k_factors, c.t_obs
                ));
            }
            if c.n_assets <= c.k_factors {
                return fail(format!(
                    "factor_bias requires n_assets > k_factors, got n={}, k={}",
                    c.n_assets, c.k_factors
                ));
            }
            if c.n_portfolios == 0 {
                return fail("factor_bias n_portfolios must be >= 1".into());
            }
            if c.trailing_window < 2 || c.eval_len <= c.trailing_window {
                return fail(format!(
                    "factor_bias needs eval_len > trailing_window >= 2, got eval_len={}, trailing_window={}",
                    c.eval_len, c.trailing_window
                ));
            }
            if !(c.factor_vol > 0.0 && c.specific_vol > 0.0) {
                return fail("factor_bias vols must be positive".into());
            }
            if c.rho < 0.0 {
                return fail("factor_bias rho must be non-negative".into());
            }
        }
        ExperimentParams::Backtest(c) => {
            if c.window_t < 2 {
                return fail(format!("backtest window_t must be >= 2, got {}", c.window_t));
            }
            if c.strategy != "optimized" && c.strategy != "random_control" {
                return fail(format!(
                    "backtest strategy must be `optimized` or `random_control`, got {:?}",
                    c.strategy
                ));
            }
            if let Some(mode) = &c.trim_mode {
                if mode != "clamp" && mode != "drop" {
                    return fail(format!("backtest trim_mode must be `clamp` or `drop`, got {mode:?}"));
                }
                if !(c.trim_lower < c.trim_upper) {
                    return fail(format!(
                        "backtest trim bounds must satisfy lower < upper, got {} >= {}",
                        c.trim_lower, c.trim_upper
                    ));
                }
            }
            if c.trailing_window < 2 {
                return fail("backtest trailing_window must be >= 2".into());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toy_config_gets_defaults() {
        let cfg = parse_config_str("[experiment]\nkind = toy\nmaster_seed = 42\n").unwrap();
        assert_eq!(cfg.kind, ExperimentKind::ToyModel);
        assert_eq!(cfg.master_seed, 42);
        match cfg.params {
            ExperimentParams::Toy(t) => {
                assert_eq!(t.t_obs, 10);
                assert_eq!(t.n_trials, 100_000);
                assert!((t.true_sigma - 0.10).abs() < 1e-15);
            }
            _ => panic!("wrong params"),
        }
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = parse_config_str(
            "[experiment]\nkind = toy\nmaster_seed = 1\n\n[toy]\nbogus_key = 3\n",
        )
        .unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key, .. } => {
                assert_eq!(line, 6);
                assert_eq!(key, "bogus_key");
            }
            other => panic!("expected UnknownKey, got {other}"),
        }
    }

    #[test]
    fn unknown_section_is_rejected() {
        let err = parse_config_str("[experiment]\nkind = toy\nmaster_seed = 1\n\n[frontier]\n")
            .unwrap_err();
        assert!(matches!(err, ConfigError::UnknownSection { .. }));
    }

    #[test]
    fn type_mismatch_reports_field_and_line() {
        let err = parse_config_str(
            "[experiment]\nkind = toy\nmaster_seed = 1\n[toy]\nt_obs = ten\n",
        )
        .unwrap_err();
        match err {
            ConfigError::TypeMismatch { line, key, value, .. } => {
                assert_eq!(line, 5);
                assert_eq!(key, "t_obs");
                assert_eq!(value, "ten");
            }
            other => panic!("expected TypeMismatch, got {other}"),
        }
    }

    #[test]
    fn missing_required_field() {
        let err = parse_config_str("[experiment]\nkind = toy\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingField { .. }));
        let err = parse_config_str("key = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::KeyOutsideSection { .. }));
    }

    #[test]
    fn divergent_dimensions_are_validation_errors() {
        let err = parse_config_str(
            "[experiment]\nkind = frontier\nmaster_seed = 7\n[frontier]\nn_assets = 100\nt_obs = 100\n",
        )
        .unwrap_err();
        match err {
            ConfigError::Validation(msg) => assert!(msg.contains("diverges"), "{msg}"),
            other => panic!("expected Validation, got {other}"),
        }
        let err = parse_config_str(
            "[experiment]\nkind = wishart\nmaster_seed = 7\n[wishart]\nn_assets = 10\nt_obs = 13\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)));
    }

    #[test]
    fn canonical_round_trip_all_kinds() {
        for kind in [
            ExperimentKind::ToyModel,
            ExperimentKind::Frontier,
            ExperimentKind::WishartOracle,
            ExperimentKind::AssetBiasGrid,
            ExperimentKind::FactorBias,
            ExperimentKind::Backtest,
        ] {
            let cfg = ExperimentConfig::default_for(kind, 987654321);
            let text = cfg.to_canonical_string();
            let back = parse_config_str(&text).unwrap();
            assert_eq!(back, cfg, "round trip failed for {kind:?}:\n{text}");
        }
    }

    #[test]
    fn comments_and_whitespace_are_ignored()
    {
        let cfg = parse_config_str(
            "# experiment file\n[experiment]  ; trailing\nkind = toy   # pick\nmaster_seed = 5\n\n[toy]\n  n_trials = 1000  \n",
        )
        .unwrap();
        match cfg.params {
            ExperimentParams::Toy(t) => assert_eq!(t.n_trials, 1000),
            _ => panic!(),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = parse_config_str(
            "[experiment]\nkind = toy\nkind = frontier\nmaster_seed = 1\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { .. }));
    }
}
