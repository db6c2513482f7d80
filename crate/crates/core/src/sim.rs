//! Simulated change-point streams, Monte Carlo run-length estimation and
//! experiment tables.
//!
//! Every replication owns a seed derived from `(master seed, rep index)`,
//! and every sample of a stream owns its own ChaCha stream keyed by its time
//! index. Results are therefore identical across thread counts and
//! independent of how a stream is consumed.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{cusum_run, wlcusum_run, DetectorConfig, PlugIn, StoppingRecord, WindowEstimator};
use crate::divergence::{d_infinity, kl_vs_standard, l_infinity, nhdkl_finite, DInfinityOptions, GaussianParams};
use crate::error::{Error, Result};
use crate::estimators::{sample_covariance, CovarianceMethod, DataWindow, ShrinkageRule};
use crate::spectra::{draw_population_covariance, eig_sym, PopulationSpectrum};

/// Default censoring cap for a single run.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Deterministic seed for a position in a hierarchy of replications.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &k| mix(acc ^ mix(k)))
}

/// Last pre-change time index, or no change at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangePoint {
    At(u64),
    Never,
}

/// `x_t ~ N(0, I)` for `t ≤ ν` and `x_t ~ N(μ, Σ)` afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeModel {
    change_point: ChangePoint,
    post: GaussianParams,
}

impl ChangeModel {
    pub fn new(change_point: ChangePoint, post: GaussianParams) -> Result<Self> {
        if matches!(change_point, ChangePoint::At(_)) && post.is_standard() {
            return Err(Error::InvalidInput(
                "post-change law equals the pre-change law".into(),
            ));
        }
        Ok(Self { change_point, post })
    }

    /// Pre-change data forever.
    pub fn never(p: usize) -> Self {
        Self {
            change_point: ChangePoint::Never,
            post: GaussianParams::standard(p),
        }
    }

    /// Post-change data from the first sample on.
    pub fn immediate(post: GaussianParams) -> Result<Self> {
        Self::new(ChangePoint::At(0), post)
    }

    pub fn change_point(&self) -> ChangePoint {
        self.change_point
    }

    pub fn post(&self) -> &GaussianParams {
        &self.post
    }

    pub fn dim(&self) -> usize {
        self.post.dim()
    }
}

/// Random-access, reproducible sample sequence for a [`ChangeModel`].
#[derive(Debug, Clone)]
pub struct GaussianStream {
    change_point: ChangePoint,
    mean: DVector<f64>,
    lower: Option<DMatrix<f64>>,
    p: usize,
    seed: u64,
    t: u64,
}

impl GaussianStream {
    /// Sample `t` (1-based).
    pub fn sample(&self, t: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t);
        let z = DVector::from_fn(self.p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let post = match self.change_point {
            ChangePoint::Never => false,
            ChangePoint::At(nu) => t > nu,
        };
        if !post {
            return z;
        }
        match &self.lower {
            Some(l) => l * z + &self.mean,
            None => z + &self.mean,
        }
    }

    pub fn dim(&self) -> usize {
        self.p
    }
}

impl Iterator for GaussianStream {
    type Item = DVector<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        self.t += 1;
        Some(self.sample(self.t))
    }
}

pub fn gen_stream(model: &ChangeModel, seed: u64) -> GaussianStream {
    let p = model.dim();
    let cov = model.post.covariance();
    let lower = (cov != &DMatrix::identity(p, p)).then(|| model.post.factor().lower());
    GaussianStream {
        change_point: model.change_point,
        mean: model.post.mean().clone(),
        lower,
        p,
        seed,
        t: 0,
    }
}

/// `n` consecutive samples starting at time 1 as a window.
pub fn draw_window(model: &ChangeModel, n: usize, seed: u64) -> Result<DataWindow> {
    let cols: Vec<DVector<f64>> = gen_stream(model, seed).take(n).collect();
    DataWindow::from_columns(&cols)
}

/// `n` independent draws from `law` as a window, with the same seeding as
/// [`draw_window`]. `law` may be `N(0, I)`.
pub fn draw_gaussian_window(law: &GaussianParams, n: usize, seed: u64) -> Result<DataWindow> {
    let model = ChangeModel {
        change_point: ChangePoint::At(0),
        post: law.clone(),
    };
    draw_window(&model, n, seed)
}

/// Detector under simulation.
#[derive(Debug, Clone)]
pub enum Procedure {
    /// CuSum with the true post-change parameters.
    Cusum(GaussianParams),
    /// WLCuSum with estimates from a window.
    WlCusum(Arc<dyn WindowEstimator>),
}

impl Procedure {
    pub fn wlcusum(estimator: impl WindowEstimator + 'static) -> Self {
        Self::WlCusum(Arc::new(estimator))
    }

    pub fn name(&self) -> String {
        match self {
            Self::Cusum(_) => "cusum".into(),
            Self::WlCusum(e) => e.name(),
        }
    }

    /// Samples consumed before the detector may stop.
    pub fn warmup(&self, config: &DetectorConfig) -> u64 {
        match self {
            Self::Cusum(_) => 0,
            Self::WlCusum(_) => config.window as u64,
        }
    }

    pub fn run<I>(&self, stream: I, config: &DetectorConfig) -> Result<StoppingRecord>
    where
        I: IntoIterator<Item = DVector<f64>>,
    {
        match self {
            Self::Cusum(post) => cusum_run(stream, post, config),
            Self::WlCusum(est) => wlcusum_run(stream, config, est.as_ref()),
        }
    }

    fn validate(&self, config: &DetectorConfig, p: usize) -> Result<()> {
        match self {
            Self::Cusum(post) => {
                config.validate_cusum()?;
                if post.dim() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: post.dim(),
                    });
                }
                Ok(())
            }
            Self::WlCusum(_) => config.validate_wlcusum(),
        }
    }
}

/// Replication count and seeding for a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOptions {
    pub reps: usize,
    pub seed: u64,
    pub keep_samples: bool,
}

impl McOptions {
    pub fn new(reps: usize, seed: u64) -> Self {
        Self {
            reps,
            seed,
            keep_samples: false,
        }
    }
}

/// Mean run length with its standard error and censoring count.
///
/// Censored runs enter the mean at the cap, so with `censored > 0` the mean
/// is a lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLengthSummary {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
    pub censored: usize,
    pub dimension: usize,
    pub threshold: f64,
    /// Fingerprint of the data-generating model, used to pair summaries.
    pub model_digest: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl RunLengthSummary {
    pub fn is_lower_bound(&self) -> bool {
        self.censored > 0
    }
}

fn model_digest(model: &ChangeModel) -> u64 {
    let mut h = DefaultHasher::new();
    match model.change_point {
        ChangePoint::At(nu) => nu.hash(&mut h),
        ChangePoint::Never => u64::MAX.hash(&mut h),
    }
    for v in model.post.mean().iter().chain(model.post.covariance().iter()) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Mean and standard error `sd / √k` with the `k − 1` denominator.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

fn simulate(
    procedure: &Procedure,
    config: &DetectorConfig,
    model: &ChangeModel,
    opts: &McOptions,
    offset: u64,
) -> Result<RunLengthSummary> {
    if opts.reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    procedure.validate(config, model.dim())?;
    let records: Vec<Result<StoppingRecord>> = (0..opts.reps)
        .into_par_iter()
        .map(|r| {
            let stream = gen_stream(model, derive_seed(opts.seed, &[r as u64]));
            procedure.run(stream, config)
        })
        .collect();
    let mut values = Vec::with_capacity(opts.reps);
    let mut censored = 0;
    for rec in records {
        let rec = rec?;
        censored += usize::from(rec.censored);
        values.push((rec.time - offset) as f64);
    }
    let (mean, stderr) = mean_stderr(&values);
    let warning = (censored == opts.reps).then(|| {
        format!(
            "all {} runs reached the cap of {}; the mean is only a lower bound",
            opts.reps, config.cap
        )
    });
    Ok(RunLengthSummary {
        mean,
        stderr,
        reps: opts.reps,
        censored,
        dimension: model.dim(),
        threshold: config.threshold,
        model_digest: model_digest(model),
        samples: opts.keep_samples.then_some(values),
        warning,
    })
}

/// Monte Carlo `E_∞[τ]` on pre-change streams. For WLCuSum the run length
/// includes the warm-up window.
pub fn estimate_arl(
    procedure: &Procedure,
    config: &DetectorConfig,
    p: usize,
    opts: &McOptions,
) -> Result<RunLengthSummary> {
    simulate(procedure, config, &ChangeModel::never(p), opts, 0)
}

/// Monte Carlo `E_0[τ]` on streams that change before the first sample.
/// WLCuSum delays are counted from `t = n + 1`, so the post-change warm-up
/// window does not inflate them.
pub fn estimate_wadd(
    procedure: &Procedure,
    config: &DetectorConfig,
    model: &ChangeModel,
    opts: &McOptions,
) -> Result<RunLengthSummary> {
    if model.change_point != ChangePoint::At(0) {
        return Err(Error::InvalidInput(
            "worst-case delay is simulated with the change before the first sample".into(),
        ));
    }
    simulate(procedure, config, model, opts, procedure.warmup(config))
}

/// Point estimate with standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// `L = p (WADD_hat − WADD_opt) / b` with independent standard errors.
pub fn excess_delay_loss(
    p: usize,
    b: f64,
    wadd_hat: &RunLengthSummary,
    wadd_opt: &RunLengthSummary,
) -> Result<Estimate> {
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!("threshold must be positive, got {b}")));
    }
    for s in [wadd_hat, wadd_opt] {
        if s.dimension != p || s.threshold != b {
            return Err(Error::InvalidPairing(format!(
                "summary for p = {}, b = {} used with p = {p}, b = {b}",
                s.dimension, s.threshold
            )));
        }
    }
    if wadd_hat.model_digest != wadd_opt.model_digest {
        return Err(Error::InvalidPairing(
            "summaries come from different change models".into(),
        ));
    }
    let scale = p as f64 / b;
    Ok(Estimate {
        value: scale * (wadd_hat.mean - wadd_opt.mean),
        stderr: scale * wadd_hat.stderr.hypot(wadd_opt.stderr),
    })
}

/// `b_n = β · n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSchedule {
    pub beta: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    2.5
}

impl ThresholdSchedule {
    pub fn threshold(&self, n: usize) -> f64 {
        self.beta * (n as f64).powf(self.exponent)
    }
}

fn default_cap() -> u64 {
    DEFAULT_CAP
}

fn default_nhdkl_draws() -> usize {
    20
}

fn default_true() -> bool {
    true
}

/// Grid of `(p, n, b, estimator)` cells to simulate.
///
/// The post-change mean is `μ = mean_norm · 1_p / √p`, so `‖μ‖` does not
/// depend on `p`. The population covariance has spectrum `spectrum` in a
/// Haar-random basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub gamma: f64,
    pub sizes: Vec<(usize, usize)>,
    /// Fixed thresholds applied to every size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// One threshold per size from a growth rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_schedule: Option<ThresholdSchedule>,
    pub spectrum: PopulationSpectrum,
    pub mean_norm: f64,
    /// Estimator names accepted by `CovarianceMethod::from_str`.
    pub estimators: Vec<String>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    /// Windows drawn per size for the divergence columns.
    #[serde(default = "default_nhdkl_draws")]
    pub nhdkl_draws: usize,
    /// Whether to simulate average run lengths to false alarm.
    #[serde(default = "default_true")]
    pub arl: bool,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.sizes.is_empty() {
            return bad("no sizes".into());
        }
        for &(p, n) in &self.sizes {
            if p == 0 || n < 2 {
                return bad(format!("invalid size ({p}, {n})"));
            }
            let ratio = p as f64 / n as f64;
            if (ratio - self.gamma).abs() > 0.05 * self.gamma {
                return bad(format!(
                    "size ({p}, {n}) has p/n = {ratio:.4}, more than 5% from gamma = {}",
                    self.gamma
                ));
            }
        }
        match (&self.b, &self.b_schedule) {
            (Some(_), Some(_)) | (None, None) => {
                return bad("give exactly one of b and b_schedule".into())
            }
            (Some(bs), None) => {
                if bs.is_empty() || bs.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
                    return bad("thresholds must be finite and ≥ 0".into());
                }
                if bs.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("thresholds must be strictly increasing".into());
                }
            }
            (None, Some(s)) => {
                if !(s.beta > 0.0) || !(s.exponent > 2.0) {
                    return bad(format!(
                        "schedule needs beta > 0 and exponent > 2 so that n = o(√b_n), got {s:?}"
                    ));
                }
                if self.sizes.windows(2).any(|w| w[1].1 <= w[0].1) {
                    return bad("scheduled sizes must have strictly increasing n".into());
                }
            }
        }
        if !(self.mean_norm >= 0.0) || !self.mean_norm.is_finite() {
            return bad(format!("mean_norm must be finite and ≥ 0, got {}", self.mean_norm));
        }
        if self.estimators.is_empty() {
            return bad("no estimators".into());
        }
        for e in &self.estimators {
            e.parse::<CovarianceMethod>()?;
        }
        if self.reps == 0 || self.cap == 0 {
            return bad("reps and cap must be positive".into());
        }
        Ok(())
    }

    /// Seeds used for each cell, in cell order.
    pub fn cell_seeds(&self) -> Vec<CellSeeds> {
        self.cells()
            .into_iter()
            .enumerate()
            .map(|(ci, (si, p, n, b))| CellSeeds {
                p,
                n,
                b,
                population: derive_seed(self.seed, &[si as u64, 0]),
                wadd: derive_seed(self.seed, &[ci as u64, 1]),
                arl: derive_seed(self.seed, &[ci as u64, 2]),
                divergence: derive_seed(self.seed, &[si as u64, 3]),
            })
            .collect()
    }

    /// `(size index, p, n, b)` for every cell in order.
    pub fn cells(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, &(p, n)) in self.sizes.iter().enumerate() {
            match (&self.b, &self.b_schedule) {
                (Some(bs), _) => out.extend(bs.iter().map(|&b| (i, p, n, b))),
                (None, Some(s)) => out.push((i, p, n, s.threshold(n))),
                (None, None) => {}
            }
        }
        out
    }
}

/// Seeds derived from the master seed for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub p: usize,
    pub n: usize,
    pub b: f64,
    pub population: u64,
    pub wadd: u64,
    pub arl: u64,
    pub divergence: u64,
}

/// One tidy row: a metric for one `(p, n, b, estimator)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub p: usize,
    pub n: usize,
    pub b: f64,
    pub estimator: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub reps: usize,
    pub censored: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Cell<'a> {
    p: usize,
    n: usize,
    b: f64,
    estimator: &'a str,
}

impl Cell<'_> {
    fn row(&self, metric: &str, out: Result<(Estimate, usize, usize)>) -> ResultRow {
        let (est, reps, censored, error) = match out {
            Ok((e, reps, censored)) => (e, reps, censored, None),
            Err(e) => (
                Estimate {
                    value: f64::NAN,
                    stderr: f64::NAN,
                },
                0,
                0,
                Some(e.to_string()),
            ),
        };
        ResultRow {
            p: self.p,
            n: self.n,
            b: self.b,
            estimator: self.estimator.to_string(),
            metric: metric.to_string(),
            value: est.value,
            stderr: est.stderr,
            reps,
            censored,
            error,
        }
    }
}

fn summary_estimate(s: &RunLengthSummary) -> (Estimate, usize, usize) {
    (
        Estimate {
            value: s.mean,
            stderr: s.stderr,
        },
        s.reps,
        s.censored,
    )
}

/// Post-change law for size index `i` of a plan.
pub fn plan_post_law(plan: &ExperimentPlan, size_index: usize) -> Result<GaussianParams> {
    let (p, _) = plan.sizes[size_index];
    let sigma = draw_population_covariance(
        &plan.spectrum,
        p,
        derive_seed(plan.seed, &[size_index as u64, 0]),
    )?;
    let mean = DVector::from_element(p, plan.mean_norm / (p as f64).sqrt());
    GaussianParams::new(mean, sigma)
}

/// Estimate with its replication and censoring counts.
type MetricResult = Result<(Estimate, usize, usize)>;
type DrawPair = (Result<f64>, Result<f64>);

/// Mean normalized divergence and plug-in `D∞` over fresh post-change windows.
fn divergence_columns(
    plan: &ExperimentPlan,
    method: &CovarianceMethod,
    model: &ChangeModel,
    n: usize,
    seed: u64,
) -> (MetricResult, MetricResult) {
    let draws = plan.nhdkl_draws.max(1);
    let estimator = PlugIn::new(method.clone());
    let rule = match method {
        CovarianceMethod::Sample => ShrinkageRule::Identity,
        CovarianceMethod::Shrinkage(r) => r.clone(),
    };
    let gamma = model.dim() as f64 / n as f64;
    let per_draw: Vec<DrawPair> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let w = match draw_window(model, n, derive_seed(seed, &[k as u64])) {
                Ok(w) => w,
                Err(e) => return (Err(e.clone()), Err(e)),
            };
            let nhdkl = estimator
                .estimate(&w)
                .and_then(|est| nhdkl_finite(model.post(), &est))
                .map(|b| b.normalized);
            let dinf = sample_covariance(&w)
                .and_then(|s| eig_sym(s.matrix()))
                .and_then(|d| {
                    d_infinity(
                        &rule,
                        d.eigenvalues().as_slice(),
                        &plan.spectrum,
                        gamma,
                        n,
                        DInfinityOptions::default(),
                    )
                });
            (nhdkl, dinf)
        })
        .collect();
    let gather = |pick: fn(&DrawPair) -> &Result<f64>| {
        let values = per_draw
            .iter()
            .map(|d| pick(d).clone())
            .collect::<Result<Vec<f64>>>()?;
        let (value, stderr) = mean_stderr(&values);
        Ok((Estimate { value, stderr }, draws, 0))
    };
    (gather(|d| &d.0), gather(|d| &d.1))
}

/// Simulate every cell of a plan.
///
/// Rows per cell: for the known-parameter CuSum baseline `wadd`, `arl` and
/// `d_post` (`p⁻¹ D(f ‖ f₀)`); for each estimator `wadd`, `arl`, `loss`
/// (normalized excess delay), `nhdkl`, `d_infinity` and `l_infinity`.
/// A failing metric produces a row with `NaN` and the error message instead
/// of aborting the experiment. All estimators share common random numbers.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ResultRow>> {
    plan.validate()?;
    let methods: Vec<CovarianceMethod> = plan
        .estimators
        .iter()
        .map(|e| e.parse())
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for ((si, p, n, b), seeds) in plan.cells().into_iter().zip(plan.cell_seeds()) {
        let post = match plan_post_law(plan, si) {
            Ok(post) => post,
            Err(e) => {
                let cell = Cell { p, n, b, estimator: "cusum" };
                rows.push(cell.row("d_post", Err(e)));
                continue;
            }
        };
        let d_post = kl_vs_standard(&post) / p as f64;
        let model = match ChangeModel::immediate(post.clone()) {
            Ok(m) => m,
            Err(e) => {
                let cell = Cell { p, n, b, estimator: "cusum" };
                rows.push(cell.row("d_post", Err(e)));
                continue;
            }
        };
        let config = DetectorConfig::new(b, n, plan.cap);
        let wadd_opts = McOptions::new(plan.reps, seeds.wadd);
        let arl_opts = McOptions::new(plan.reps, seeds.arl);

        let base = Cell { p, n, b, estimator: "cusum" };
        let cusum = Procedure::Cusum(post.clone());
        rows.push(base.row(
            "d_post",
            Ok((Estimate { value: d_post, stderr: 0.0 }, 1, 0)),
        ));
        let opt = estimate_wadd(&cusum, &config, &model, &wadd_opts);
        rows.push(base.row("wadd", opt.as_ref().map(summary_estimate).map_err(Clone::clone)));
        if plan.arl {
            rows.push(base.row(
                "arl",
                estimate_arl(&cusum, &config, p, &arl_opts).map(|s| summary_estimate(&s)),
            ));
        }

        for (name, method) in plan.estimators.iter().zip(&methods) {
            let cell = Cell { p, n, b, estimator: name };
            let proc = Procedure::wlcusum(PlugIn::new(method.clone()));
            let wadd = estimate_wadd(&proc, &config, &model, &wadd_opts);
            rows.push(cell.row("wadd", wadd.as_ref().map(summary_estimate).map_err(Clone::clone)));
            if plan.arl {
                rows.push(cell.row(
                    "arl",
                    estimate_arl(&proc, &config, p, &arl_opts).map(|s| summary_estimate(&s)),
                ));
            }
            let loss = match (&wadd, &opt) {
                (Ok(h), Ok(o)) => excess_delay_loss(p, b, h, o).map(|e| (e, h.reps, h.censored)),
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            };
            rows.push(cell.row("loss", loss));
            let (nhdkl, dinf) = divergence_columns(
                plan,
                method,
                &model,
                n,
                seeds.divergence,
            );
            let linf = dinf.clone().and_then(|(d, k, _)| {
                Ok((
                    Estimate {
                        value: l_infinity(d_post, d.value)?,
                        stderr: f64::NAN,
                    },
                    k,
                    0,
                ))
            });
            rows.push(cell.row("nhdkl", nhdkl));
            rows.push(cell.row("d_infinity", dinf));
            rows.push(cell.row("l_infinity", linf));
        }
    }
    Ok(rows)
}
