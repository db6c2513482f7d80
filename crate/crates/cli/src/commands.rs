//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use hdqcd::detect::{wlcusum_run_traced, DetectorConfig, PlugIn, StepRecord};
use hdqcd::divergence::{d_infinity, inverse_stein_loss, kl_gaussian, nhdkl_finite, DInfinityOptions, GaussianParams};
use hdqcd::estimators::{sample_covariance, CovarianceMethod, DataWindow, ShrinkageRule};
use hdqcd::detect::WindowEstimator;
use hdqcd::sim::{
    derive_seed, draw_gaussian_window, estimate_arl, estimate_wadd, excess_delay_loss, mean_stderr, run_experiment,
    ChangeModel, McOptions, Procedure, ResultRow, RunLengthSummary, DEFAULT_CAP,
};
use hdqcd::spectra::{draw_population_covariance, eig_sym, esdf, mp_cdf, mp_support_edges, PopulationSpectrum};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{resolve_estimator, CliConfig, CommandKind, EstimatorChoice, Format, Settings};
use crate::error::{CliError, CliResult};
use crate::io::{emit_results, ingest_stream, render_results, stream_dimension, write_file, write_manifest, Manifest};

const DEFAULT_REPS: usize = 1000;
const DEFAULT_DRAWS: usize = 20;

pub fn execute(cfg: &CliConfig, stdout: &mut dyn Write) -> CliResult<()> {
    match cfg.command {
        CommandKind::Detect => detect(cfg, stdout),
        CommandKind::EstimateCov => estimate_cov(cfg, stdout),
        CommandKind::Divergence => divergence(cfg, stdout),
        CommandKind::Spectra => spectra(cfg, stdout),
        CommandKind::SimulateArl | CommandKind::SimulateWadd => simulate(cfg, stdout),
        CommandKind::Experiment => experiment(cfg, stdout),
    }
}

fn required<T: Copy>(v: Option<T>, flag: &str, kind: CommandKind) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("{} needs --{flag}", kind.name())))
}

fn required_path<'a>(v: &'a Option<PathBuf>, flag: &str, kind: CommandKind) -> CliResult<&'a Path> {
    v.as_deref()
        .ok_or_else(|| CliError::Usage(format!("{} needs --{flag}", kind.name())))
}

fn covariance_method(s: &Settings, kind: CommandKind) -> CliResult<CovarianceMethod> {
    match resolve_estimator(s.estimator.as_deref().unwrap_or("lwise"), kind)? {
        EstimatorChoice::Covariance(m) => Ok(m),
        EstimatorChoice::KnownParameters => unreachable!("rejected by resolve_estimator"),
    }
}

fn spectrum(s: &Settings) -> CliResult<PopulationSpectrum> {
    match &s.spectrum {
        Some(arg) => arg.resolve(),
        None => Ok(PopulationSpectrum::point_mass(1.0)?),
    }
}

fn write_json(value: &Value, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
    text.push('\n');
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn manifest<'a>(cfg: &CliConfig, seed: Option<u64>, details: Value, outputs: Vec<&'a str>) -> Manifest<'a> {
    Manifest {
        tool: "hdqcd",
        version: crate::io::VERSION,
        command: cfg.command.name(),
        seed,
        config: cfg.resolved(),
        details,
        outputs,
    }
}

/// CSV tables go to `--out` with a manifest, or to stdout without one.
fn emit_table(
    cfg: &CliConfig,
    rows: &[ResultRow],
    seed: u64,
    details: Value,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    match &cfg.settings.out {
        Some(path) => {
            let name = path.to_string_lossy();
            emit_results(rows, path, &manifest(cfg, Some(seed), details, vec![&name]))
        }
        None => Ok(stdout.write_all(render_results(rows, seed)?.as_bytes())?),
    }
}

fn load_stream(s: &Settings, kind: CommandKind) -> CliResult<Vec<DVector<f64>>> {
    let path = required_path(&s.input, "input", kind)?;
    let samples = ingest_stream(path, s.format.unwrap_or(Format::Auto))?;
    stream_dimension(&samples)?;
    Ok(samples)
}

fn detect(cfg: &CliConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let s = &cfg.settings;
    let kind = cfg.command;
    let b = required(s.b, "b", kind)?;
    let n = required(s.window, "window", kind)?;
    let samples = load_stream(s, kind)?;
    let estimator = PlugIn::new(covariance_method(s, kind)?);
    let mut config = DetectorConfig::new(b, n, s.cap.unwrap_or(samples.len() as u64));
    config.refresh_stride = s.stride.unwrap_or(1);
    config.validate_wlcusum().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut trace: Vec<StepRecord> = Vec::new();
    let record = wlcusum_run_traced(samples.iter().cloned(), &config, &estimator, |r| {
        if s.trace.is_some() {
            trace.push(r)
        }
    })?;
    if let Some(path) = &s.trace {
        let mut text = String::from("t,llr,statistic\n");
        for r in &trace {
            text.push_str(&format!("{},{},{}\n", r.t, r.llr, r.statistic));
        }
        write_file(path, text.as_bytes())?;
    }
    let value = json!({
        "time": record.time,
        "statistic": record.statistic,
        "censored": record.censored,
        "p": samples[0].len(),
        "n": n,
        "b": b,
        "cap": config.cap,
        "estimator": estimator.name(),
        "version": crate::io::VERSION,
    });
    write_json(&value, s.out.as_deref(), stdout)
}

fn estimate_cov(cfg: &CliConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let s = &cfg.settings;
    let samples = load_stream(s, cfg.command)?;
    let window = DataWindow::from_columns(&samples)?;
    let est = covariance_method(s, cfg.command)?.estimate(&window)?;
    let mut text = String::new();
    for row in est.matrix().row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    match &s.out {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            let details = json!({
                "provenance": est.provenance(),
                "singular": est.is_singular(),
                "log_det": est.log_det(),
                "shrunk_eigenvalues": est.shrunk_eigenvalues(),
            });
            let name = path.to_string_lossy();
            write_manifest(path, &manifest(cfg, None, details, vec![&name]))
        }
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

/// `{"mean": [...], "covariance": [[...], ...]}`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

fn read_params(path: &Path) -> CliResult<GaussianParams> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let f: ParamsFile =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let p = f.mean.len();
    if let Some(k) = f.covariance.iter().position(|r| r.len() != p) {
        return Err(CliError::Data(format!(
            "{}: covariance row {} has {} entries, expected {p}",
            path.display(),
            k + 1,
            f.covariance[k].len()
        )));
    }
    let cov = DMatrix::from_fn(f.covariance.len(), p, |i, j| f.covariance[i][j]);
    Ok(GaussianParams::new(DVector::from_vec(f.mean), cov)?)
}

fn divergence(cfg: &CliConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let s = &cfg.settings;
    if let (Some(t), Some(e)) = (&s.truth, &s.estimate) {
        let truth = read_params(t)?;
        let estimate = read_params(e)?;
        let b = nhdkl_finite(&truth, &estimate)?;
        let value = json!({
            "kl": kl_gaussian(&truth, &estimate)?,
            "normalized": b.normalized,
            "trace_term": b.trace_term,
            "logdet_term": b.logdet_term,
            "mean_term": b.mean_term,
            "p": truth.dim(),
            "version": crate::io::VERSION,
        });
        return write_json(&value, s.out.as_deref(), stdout);
    }
    let kind = cfg.command;
    let p = required(s.p, "p", kind)?;
    let n = required(s.n, "n", kind)?;
    let name = s.estimator.clone().unwrap_or_else(|| "lwise".into());
    let method = covariance_method(s, kind)?;
    let h = spectrum(s)?;
    let draws = s.draws.unwrap_or(DEFAULT_DRAWS);
    let seed = s.seed.unwrap_or(0);
    if draws == 0 || n < 2 {
        return Err(CliError::Usage("divergence needs --draws ≥ 1 and --n ≥ 2".into()));
    }
    let sigma = draw_population_covariance(&h, p, derive_seed(seed, &[0, 0]))?;
    let truth = GaussianParams::new(DVector::zeros(p), sigma.clone())?;
    let rule = match &method {
        CovarianceMethod::Sample => ShrinkageRule::Identity,
        CovarianceMethod::Shrinkage(r) => r.clone(),
    };
    let gamma = p as f64 / n as f64;
    let estimator = PlugIn::new(method.clone());
    let per_draw: Vec<[Result<f64, hdqcd::Error>; 3]> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let w = match draw_gaussian_window(&truth, n, derive_seed(seed, &[0, 3, k as u64])) {
                Ok(w) => w,
                Err(e) => return [Err(e.clone()), Err(e.clone()), Err(e)],
            };
            let stein = method
                .estimate(&w)
                .and_then(|est| inverse_stein_loss(est.matrix(), &sigma))
                .map(|l| 0.5 * l);
            let nhdkl = estimator
                .estimate(&w)
                .and_then(|est| nhdkl_finite(&truth, &est))
                .map(|b| b.normalized);
            let dinf = sample_covariance(&w).and_then(|c| eig_sym(c.matrix())).and_then(|d| {
                d_infinity(&rule, d.eigenvalues().as_slice(), &h, gamma, n, DInfinityOptions::default())
            });
            [stein, nhdkl, dinf]
        })
        .collect();
    let rows: Vec<ResultRow> = ["half_inverse_stein", "nhdkl", "d_infinity"]
        .iter()
        .enumerate()
        .map(|(j, metric)| {
            let values: Result<Vec<f64>, hdqcd::Error> = per_draw.iter().map(|d| d[j].clone()).collect();
            let (value, stderr, reps, error) = match values {
                Ok(v) => {
                    let (m, se) = mean_stderr(&v);
                    (m, se, draws, None)
                }
                Err(e) => (f64::NAN, f64::NAN, 0, Some(e.to_string())),
            };
            ResultRow {
                p,
                n,
                b: 0.0,
                estimator: name.clone(),
                metric: metric.to_string(),
                value,
                stderr,
                reps,
                censored: 0,
                error,
            }
        })
        .collect();
    emit_table(cfg, &rows, seed, Value::Null, stdout)
}

fn spectra(cfg: &CliConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let s = &cfg.settings;
    let kind = cfg.command;
    // Reference law: MP with the point-mass scale, or unit scale for files.
    let (eigs, p, n, scale, seed) = if s.input.is_some() {
        let samples = load_stream(s, kind)?;
        let w = DataWindow::from_columns(&samples)?;
        let e = eig_sym(sample_covariance(&w)?.matrix())?;
        (e.eigenvalues().as_slice().to_vec(), w.p(), w.n(), Some(1.0), None)
    } else {
        let p = required(s.p, "p", kind)?;
        let n = required(s.n, "n", kind)?;
        let h = spectrum(s)?;
        let seed = s.seed.unwrap_or(0);
        let sigma = draw_population_covariance(&h, p, derive_seed(seed, &[0, 0]))?;
        let law = GaussianParams::new(DVector::zeros(p), sigma)?;
        let w = draw_gaussian_window(&law, n, derive_seed(seed, &[0, 3]))?;
        let e = eig_sym(sample_covariance(&w)?.matrix())?;
        (e.eigenvalues().as_slice().to_vec(), p, n, h.as_point_mass(), Some(seed))
    };
    let gamma = p as f64 / n as f64;
    let mut sorted = eigs.clone();
    sorted.sort_by(f64::total_cmp);

    let mut text = String::from("eigenvalue,esdf,mp_cdf\n");
    let mut sup: Option<f64> = scale.map(|_| 0.0);
    for &x in &sorted {
        let f = esdf(&eigs, x);
        let mp = match scale {
            Some(v) => Some(mp_cdf(x / v, gamma)?),
            None => None,
        };
        if let (Some(m), Some(d)) = (mp, sup.as_mut()) {
            // the ESDF jumps at x, so compare both one-sided limits
            let left = f - 1.0 / eigs.len() as f64;
            *d = d.max((f - m).abs()).max((left - m).abs());
        }
        let mp_field = mp.map(|m| m.to_string()).unwrap_or_default();
        text.push_str(&format!("{x},{f},{mp_field}\n"));
    }
    let edges = match scale {
        Some(v) => {
            let (lo, hi) = mp_support_edges(gamma)?;
            Some((lo * v, hi * v))
        }
        None => None,
    };
    let details = json!({
        "p": p,
        "n": n,
        "gamma": gamma,
        "sup_distance": sup,
        "mp_edges": edges,
        "min_eigenvalue": sorted.first(),
        "max_eigenvalue": sorted.last(),
    });
    match &s.out {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            let name = path.to_string_lossy();
            write_manifest(path, &manifest(cfg, seed, details, vec![&name]))
        }
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn summary_row(p: usize, n: usize, b: f64, estimator: &str, metric: &str, s: &RunLengthSummary) -> ResultRow {
    ResultRow {
        p,
        n,
        b,
        estimator: estimator.to_string(),
        metric: metric.to_string(),
        value: s.mean,
        stderr: s.stderr,
        reps: s.reps,
        censored: s.censored,
        error: None,
    }
}

fn simulate(cfg: &CliConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let s = &cfg.settings;
    let kind = cfg.command;
    let p = required(s.p, "p", kind)?;
    let b = required(s.b, "b", kind)?;
    let name = s.estimator.clone().unwrap_or_else(|| "lwise".into());
    let choice = resolve_estimator(&name, kind)?;
    let seed = s.seed.unwrap_or(0);
    let reps = s.reps.unwrap_or(DEFAULT_REPS);
    let cap = s.cap.unwrap_or(DEFAULT_CAP);
    let mean_norm = s.mean_norm.unwrap_or(1.0);

    // same seed layout as the first cell of an experiment plan
    let sigma = draw_population_covariance(&spectrum(s)?, p, derive_seed(seed, &[0, 0]))?;
    let mean = DVector::from_element(p, mean_norm / (p as f64).sqrt());
    let post = GaussianParams::new(mean, sigma)?;
    let cusum = Procedure::Cusum(post.clone());
    let (procedure, n) = match choice {
        EstimatorChoice::KnownParameters => (cusum.clone(), s.n.unwrap_or(0)),
        EstimatorChoice::Covariance(m) => (
            Procedure::wlcusum(PlugIn::new(m)),
            required(s.n, "n", kind)?,
        ),
    };
    let config = DetectorConfig::new(b, n, cap);
    let wadd_opts = McOptions::new(reps, derive_seed(seed, &[0, 1]));
    let arl_opts = McOptions::new(reps, derive_seed(seed, &[0, 2]));

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    if kind == CommandKind::SimulateArl {
        let arl = estimate_arl(&procedure, &config, p, &arl_opts)?;
        warnings.extend(arl.warning.clone());
        rows.push(summary_row(p, n, b, &name, "arl", &arl));
    } else {
        let model = ChangeModel::immediate(post)?;
        let wadd = estimate_wadd(&procedure, &config, &model, &wadd_opts)?;
        warnings.extend(wadd.warning.clone());
        rows.push(summary_row(p, n, b, &name, "wadd", &wadd));
        if !matches!(procedure, Procedure::Cusum(_)) {
            let opt = estimate_wadd(&cusum, &config, &model, &wadd_opts)?;
            warnings.extend(opt.warning.clone());
            rows.push(summary_row(p, n, b, "cusum", "wadd", &opt));
            if b > 0.0 {
                let loss = excess_delay_loss(p, b, &wadd, &opt)?;
                rows.push(ResultRow {
                    metric: "loss".into(),
                    value: loss.value,
                    stderr: loss.stderr,
                    ..summary_row(p, n, b, &name, "loss", &wadd)
                });
            }
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    emit_table(cfg, &rows, seed, json!({ "warnings": warnings }), stdout)
}

fn experiment(cfg: &CliConfig, stdout: &mut dyn Write) -> CliResult<()> {
    let plan = cfg.plan.as_ref().expect("experiment config carries a plan");
    let rows = run_experiment(plan)?;
    let details = json!({ "cell_seeds": plan.cell_seeds() });
    emit_table(cfg, &rows, plan.seed, details, stdout)
}
