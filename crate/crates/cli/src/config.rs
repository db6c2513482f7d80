//! Command-line flags merged over an optional JSON config file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdqcd::estimators::{CovarianceMethod, PiecewiseLinear, ShrinkageRule};
use hdqcd::sim::ExperimentPlan;
use hdqcd::spectra::PopulationSpectrum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// Stream file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// `HDW1` magic selects binary, anything else is read as CSV.
    #[default]
    Auto,
    Csv,
    Binary,
}

#[derive(Debug, Parser)]
#[command(name = "hdqcd", version, about = "High-dimensional Gaussian change detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run WLCuSum over a recorded stream.
    Detect(DetectArgs),
    /// Estimate a covariance matrix from a recorded window.
    EstimateCov(EstimateArgs),
    /// Gaussian KL between two parameter files, or simulated estimator losses.
    Divergence(DivergenceArgs),
    /// Sample eigenvalues against the Marchenko–Pastur law.
    Spectra(SpectraArgs),
    /// Monte Carlo average run length to false alarm.
    SimulateArl(SimulateArgs),
    /// Monte Carlo worst-case detection delay.
    SimulateWadd(SimulateArgs),
    /// Run an experiment plan.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON file with default values; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path. Tables go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    /// sample, lwise, lwise-literal, identity, constant:<c> or table:<csv>
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub cap: Option<u64>,
    /// Slides between estimate refreshes.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Write per-step (t, llr, Y) records to this CSV file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub estimator: Option<String>,
}

#[derive(Debug, Args)]
pub struct DivergenceArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// JSON `{"mean": [...], "covariance": [[...], ...]}` of the true law.
    #[arg(long, requires = "estimate")]
    pub truth: Option<PathBuf>,
    /// JSON parameters of the estimated law.
    #[arg(long, requires = "truth")]
    pub estimate: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["truth", "estimate"])]
    pub p: Option<usize>,
    #[arg(long, conflicts_with_all = ["truth", "estimate"])]
    pub n: Option<usize>,
    #[arg(long, conflicts_with_all = ["truth", "estimate"])]
    pub gamma: Option<f64>,
    #[arg(long, conflicts_with_all = ["truth", "estimate"])]
    pub estimator: Option<String>,
    /// Population spectrum as `value:weight,...`.
    #[arg(long, conflicts_with_all = ["truth", "estimate"])]
    pub spectrum: Option<String>,
    #[arg(long, conflicts_with_all = ["truth", "estimate"])]
    pub draws: Option<usize>,
    #[arg(long, conflicts_with_all = ["truth", "estimate"])]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, conflicts_with_all = ["p", "n", "spectrum"])]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, requires = "input")]
    pub format: Option<Format>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub spectrum: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub p: Option<usize>,
    /// Window length.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Covariance estimator for WLCuSum, or `cusum` for known parameters.
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cap: Option<u64>,
    /// Post-change mean norm ‖μ‖.
    #[arg(long)]
    pub mean_norm: Option<f64>,
    #[arg(long)]
    pub spectrum: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub cap: Option<u64>,
}

/// Every setting a subcommand may take, after merging.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_norm: Option<f64>,
}

/// Population spectrum given either as `value:weight,...` or as JSON atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectrumArg {
    Text(String),
    Atoms(PopulationSpectrum),
}

impl SpectrumArg {
    pub fn resolve(&self) -> CliResult<PopulationSpectrum> {
        match self {
            Self::Atoms(h) => Ok(h.clone()),
            Self::Text(s) => parse_spectrum(s),
        }
    }
}

pub fn parse_spectrum(s: &str) -> CliResult<PopulationSpectrum> {
    let mut pairs = Vec::new();
    for part in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (v, w) = part.split_once(':').unwrap_or((part, "1"));
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad spectrum value in {part:?}")))?;
        let w: f64 = w
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad spectrum weight in {part:?}")))?;
        pairs.push((v, w));
    }
    PopulationSpectrum::from_pairs(&pairs).map_err(|e| CliError::Usage(e.to_string()))
}

/// Which subcommand a resolved configuration is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Detect,
    EstimateCov,
    Divergence,
    Spectra,
    SimulateArl,
    SimulateWadd,
    Experiment,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Detect => "detect",
            Self::EstimateCov => "estimate-cov",
            Self::Divergence => "divergence",
            Self::Spectra => "spectra",
            Self::SimulateArl => "simulate-arl",
            Self::SimulateWadd => "simulate-wadd",
            Self::Experiment => "experiment",
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            Self::Detect => &["input", "format", "out", "b", "window", "estimator", "cap", "stride", "trace"],
            Self::EstimateCov => &["input", "format", "out", "estimator"],
            Self::Divergence => &[
                "out", "truth", "estimate", "p", "n", "gamma", "estimator", "spectrum", "draws", "seed",
            ],
            Self::Spectra => &["input", "format", "out", "p", "n", "gamma", "spectrum", "seed"],
            Self::SimulateArl | Self::SimulateWadd => &[
                "out", "p", "n", "gamma", "b", "estimator", "reps", "seed", "cap", "mean_norm", "spectrum",
            ],
            Self::Experiment => &["out", "seed", "reps", "cap"],
        }
    }
}

/// Fully merged configuration for one invocation.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub command: CommandKind,
    pub settings: Settings,
    /// Present for `experiment`.
    pub plan: Option<ExperimentPlan>,
}

impl CliConfig {
    /// Resolved configuration as recorded in manifests.
    pub fn resolved(&self) -> Value {
        let mut v = serde_json::to_value(&self.settings).expect("settings serialize");
        if let Some(plan) = &self.plan {
            v.as_object_mut()
                .expect("settings are an object")
                .insert("plan".into(), serde_json::to_value(plan).expect("plan serializes"));
        }
        v
    }
}

fn flags_value(s: Settings) -> Map<String, Value> {
    match serde_json::to_value(s).expect("settings serialize") {
        Value::Object(m) => m,
        _ => unreachable!("settings serialize to an object"),
    }
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))
}

/// Parse `argv` (including the program name) and merge flags over the config
/// file named by `--config`. Help and version requests surface as clap errors.
pub fn parse_config<I, T>(argv: I) -> Result<CliConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ParseOutcome::Clap)?;
    resolve(cli).map_err(ParseOutcome::Cli)
}

/// Failure of [`parse_config`].
#[derive(Debug)]
pub enum ParseOutcome {
    /// clap's own error, including `--help` and `--version` output.
    Clap(clap::Error),
    Cli(CliError),
}

fn spectrum_flag(s: Option<String>) -> Option<SpectrumArg> {
    s.map(SpectrumArg::Text)
}

pub fn resolve(cli: Cli) -> CliResult<CliConfig> {
    let (kind, common, flags) = match cli.command {
        Command::Detect(a) => (
            CommandKind::Detect,
            a.common,
            Settings {
                input: a.input,
                format: a.format,
                b: a.b,
                window: a.window,
                estimator: a.estimator,
                cap: a.cap,
                stride: a.stride,
                trace: a.trace,
                ..Default::default()
            },
        ),
        Command::EstimateCov(a) => (
            CommandKind::EstimateCov,
            a.common,
            Settings {
                input: a.input,
                format: a.format,
                estimator: a.estimator,
                ..Default::default()
            },
        ),
        Command::Divergence(a) => (
            CommandKind::Divergence,
            a.common,
            Settings {
                truth: a.truth,
                estimate: a.estimate,
                p: a.p,
                n: a.n,
                gamma: a.gamma,
                estimator: a.estimator,
                spectrum: spectrum_flag(a.spectrum),
                draws: a.draws,
                seed: a.seed,
                ..Default::default()
            },
        ),
        Command::Spectra(a) => (
            CommandKind::Spectra,
            a.common,
            Settings {
                input: a.input,
                format: a.format,
                p: a.p,
                n: a.n,
                gamma: a.gamma,
                spectrum: spectrum_flag(a.spectrum),
                seed: a.seed,
                ..Default::default()
            },
        ),
        Command::SimulateArl(a) => {
            let (common, s) = simulate_settings(a);
            (CommandKind::SimulateArl, common, s)
        }
        Command::SimulateWadd(a) => {
            let (common, s) = simulate_settings(a);
            (CommandKind::SimulateWadd, common, s)
        }
        Command::Experiment(a) => (
            CommandKind::Experiment,
            a.common,
            Settings {
                seed: a.seed,
                reps: a.reps,
                cap: a.cap,
                ..Default::default()
            },
        ),
    };
    let mut flags = flags_value(flags);
    if let Some(out) = common.out {
        flags.insert("out".into(), Value::from(out.to_string_lossy().into_owned()));
    }

    // experiment: the config file is the plan itself
    if kind == CommandKind::Experiment {
        let path = common
            .config
            .ok_or_else(|| CliError::Usage("experiment needs --config <plan.json>".into()))?;
        let mut plan: ExperimentPlan = serde_json::from_value(read_json(&path)?)
            .map_err(|e| CliError::Usage(format!("invalid plan {}: {e}", path.display())))?;
        let settings: Settings = serde_json::from_value(Value::Object(flags)).expect("flags are valid settings");
        if let Some(seed) = settings.seed {
            plan.seed = seed;
        }
        if let Some(reps) = settings.reps {
            plan.reps = reps;
        }
        if let Some(cap) = settings.cap {
            plan.cap = cap;
        }
        plan.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        return Ok(CliConfig {
            command: kind,
            settings,
            plan: Some(plan),
        });
    }

    let mut merged = match &common.config {
        Some(path) => match read_json(path)? {
            Value::Object(m) => m,
            _ => return Err(CliError::Usage("config file must hold a JSON object".into())),
        },
        None => Map::new(),
    };
    for (k, v) in flags {
        merged.insert(k, v);
    }
    if let Some(bad) = merged.keys().find(|k| !kind.allowed().contains(&k.as_str())) {
        return Err(CliError::Usage(format!(
            "key {bad:?} is not accepted by {}",
            kind.name()
        )));
    }
    let mut settings: Settings = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    infer_n(&mut settings)?;
    if let Some(e) = &settings.estimator {
        resolve_estimator(e, kind)?;
    }
    Ok(CliConfig {
        command: kind,
        settings,
        plan: None,
    })
}

fn simulate_settings(a: SimulateArgs) -> (CommonArgs, Settings) {
    let s = Settings {
        p: a.p,
        n: a.n,
        gamma: a.gamma,
        b: a.b,
        estimator: a.estimator,
        reps: a.reps,
        seed: a.seed,
        cap: a.cap,
        mean_norm: a.mean_norm,
        spectrum: spectrum_flag(a.spectrum),
        ..Default::default()
    };
    (a.common, s)
}

/// `n = round(p / γ)` when only `p` and `γ` are given.
fn infer_n(s: &mut Settings) -> CliResult<()> {
    if let Some(g) = s.gamma {
        if !(g > 0.0) || !g.is_finite() {
            return Err(CliError::Usage(format!("gamma must be positive, got {g}")));
        }
        match (s.p, s.n) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "give at most two of --p, --n and --gamma".into(),
                ))
            }
            (Some(p), None) => s.n = Some((p as f64 / g).round() as usize),
            (None, Some(n)) => s.p = Some((n as f64 * g).round() as usize),
            (None, None) => {}
        }
    }
    Ok(())
}

/// Detector or covariance estimator named on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorChoice {
    KnownParameters,
    Covariance(CovarianceMethod),
}

/// Parse an estimator selector; `cusum` is only accepted by the simulators.
pub fn resolve_estimator(name: &str, kind: CommandKind) -> CliResult<EstimatorChoice> {
    if name == "cusum" {
        return match kind {
            CommandKind::SimulateArl | CommandKind::SimulateWadd => Ok(EstimatorChoice::KnownParameters),
            _ => Err(CliError::Usage(format!("estimator \"cusum\" is not valid for {}", kind.name()))),
        };
    }
    if let Some(path) = name.strip_prefix("table:") {
        return Ok(EstimatorChoice::Covariance(CovarianceMethod::Shrinkage(
            ShrinkageRule::Table(read_table(Path::new(path))?),
        )));
    }
    name.parse::<CovarianceMethod>()
        .map(EstimatorChoice::Covariance)
        .map_err(|_| {
            CliError::Usage(format!(
                "unknown estimator {name:?}; expected sample, lwise, lwise-literal, identity, \
                 constant:<c>, table:<path> or cusum"
            ))
        })
}

/// Two-column `x,δ(x)` CSV shrinkage table.
fn read_table(path: &Path) -> CliResult<PiecewiseLinear> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read table {}: {e}", path.display())))?;
    let mut knots = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || CliError::Usage(format!("{}:{}: expected x,value", path.display(), i + 1));
        let (x, y) = line.split_once(',').ok_or_else(bad)?;
        knots.push((
            x.trim().parse::<f64>().map_err(|_| bad())?,
            y.trim().parse::<f64>().map_err(|_| bad())?,
        ));
    }
    PiecewiseLinear::new(knots).map_err(|e| CliError::Usage(e.to_string()))
}
