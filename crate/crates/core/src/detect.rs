//! CuSum with known post-change parameters and the window-limited CuSum
//! (WLCuSum) with parameters re-estimated from a sliding window.
//!
//! Both accumulate the positive-part recursion
//!
//! ```text
//! Y_t = (Y_{t−1} + log f(x_t; μ, Σ) / f₀(x_t))⁺
//! ```
//!
//! against the standard normal pre-change density `f₀`. WLCuSum substitutes
//! estimates computed from the `n` samples preceding `x_t`, starts at
//! `Y_n = 0`, and may only stop at `t ≥ n + 1`.

use std::collections::VecDeque;
use std::fmt::Debug;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::divergence::GaussianParams;
use crate::error::{Error, Result};
use crate::estimators::{sample_mean, CovarianceMethod, DataWindow};

/// Threshold, window length and step cap shared by both detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Stopping threshold `b`. Zero is accepted and stops at the first
    /// eligible step.
    pub threshold: f64,
    /// Window length `n` (WLCuSum only).
    pub window: usize,
    /// Largest time index `t` a run may reach before it is censored.
    pub cap: u64,
    /// Number of window slides between estimate refreshes.
    pub refresh_stride: usize,
}

impl DetectorConfig {
    pub fn new(threshold: f64, window: usize, cap: u64) -> Self {
        Self {
            threshold,
            window,
            cap,
            refresh_stride: 1,
        }
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(Error::InvalidInput(format!(
                "threshold must be finite and ≥ 0, got {}",
                self.threshold
            )));
        }
        if self.cap == 0 {
            return Err(Error::InvalidInput("cap must be at least 1".into()));
        }
        if self.refresh_stride == 0 {
            return Err(Error::InvalidInput("refresh stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn validate_cusum(&self) -> Result<()> {
        self.validate_common()
    }

    pub fn validate_wlcusum(&self) -> Result<()> {
        self.validate_common()?;
        if self.window < 2 {
            return Err(Error::InvalidInput(format!(
                "window length must be at least 2, got {}",
                self.window
            )));
        }
        if self.cap <= self.window as u64 {
            return Err(Error::InvalidInput(format!(
                "cap {} leaves no post-warm-up steps for window {}",
                self.cap, self.window
            )));
        }
        Ok(())
    }
}

/// `log f(x; μ, Σ) − log f₀(x) = ½ [xᵀx − (x − μ)ᵀ Σ⁻¹ (x − μ) − log|Σ|]`.
pub fn gaussian_llr(x: &DVector<f64>, post: &GaussianParams) -> Result<f64> {
    if x.len() != post.dim() {
        return Err(Error::DimensionMismatch {
            expected: post.dim(),
            got: x.len(),
        });
    }
    let quad = post.factor().quad_form(&(x - post.mean()));
    Ok(0.5 * (x.norm_squared() - quad - post.log_det()))
}

/// `max(Y + llr, 0)`.
#[inline]
pub fn cusum_step(statistic: f64, llr: f64) -> f64 {
    (statistic + llr).max(0.0)
}

/// One post-warm-up observation: time, log-likelihood ratio and statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub llr: f64,
    pub statistic: f64,
}

/// Outcome of a run: first crossing time, or the cap when censored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRecord {
    pub time: u64,
    pub statistic: f64,
    pub censored: bool,
}

/// Known-parameter CuSum run over `stream`.
pub fn cusum_run<I>(stream: I, post: &GaussianParams, config: &DetectorConfig) -> Result<StoppingRecord>
where
    I: IntoIterator<Item = DVector<f64>>,
{
    cusum_run_traced(stream, post, config, |_| {})
}

/// [`cusum_run`] reporting every step to `observer`.
pub fn cusum_run_traced<I, F>(
    stream: I,
    post: &GaussianParams,
    config: &DetectorConfig,
    mut observer: F,
) -> Result<StoppingRecord>
where
    I: IntoIterator<Item = DVector<f64>>,
    F: FnMut(StepRecord),
{
    config.validate_cusum()?;
    let mut stream = stream.into_iter();
    let mut statistic = 0.0;
    for t in 1..=config.cap {
        let x = stream.next().ok_or(Error::ExhaustedStream { t: t - 1 })?;
        let llr = gaussian_llr(&x, post)?;
        statistic = cusum_step(statistic, llr);
        observer(StepRecord { t, llr, statistic });
        if statistic >= config.threshold {
            return Ok(StoppingRecord {
                time: t,
                statistic,
                censored: false,
            });
        }
    }
    Ok(StoppingRecord {
        time: config.cap,
        statistic,
        censored: true,
    })
}

/// Supplies post-change parameter estimates from a window.
pub trait WindowEstimator: Debug + Send + Sync {
    fn name(&self) -> String;
    fn estimate(&self, window: &DataWindow) -> Result<GaussianParams>;
}

/// Sample mean together with a covariance estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PlugIn {
    pub covariance: CovarianceMethod,
}

impl PlugIn {
    pub fn new(covariance: CovarianceMethod) -> Self {
        Self { covariance }
    }

    pub fn lwise() -> Self {
        Self::new(CovarianceMethod::lwise())
    }

    pub fn sample() -> Self {
        Self::new(CovarianceMethod::Sample)
    }
}

impl WindowEstimator for PlugIn {
    fn name(&self) -> String {
        self.covariance.name()
    }

    fn estimate(&self, window: &DataWindow) -> Result<GaussianParams> {
        let cov = self.covariance.estimate(window)?;
        GaussianParams::from_estimate(sample_mean(window), &cov)
    }
}

/// Ignores the window and always returns the same parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Frozen(pub GaussianParams);

impl WindowEstimator for Frozen {
    fn name(&self) -> String {
        "frozen".into()
    }

    fn estimate(&self, _window: &DataWindow) -> Result<GaussianParams> {
        Ok(self.0.clone())
    }
}

/// Mutable WLCuSum state: statistic, clock, window and current estimates.
#[derive(Debug, Clone)]
pub struct DetectorState {
    config: DetectorConfig,
    statistic: f64,
    t: u64,
    window: VecDeque<DVector<f64>>,
    estimates: Option<GaussianParams>,
    slides_since_refresh: usize,
    stopping_time: Option<u64>,
}

impl DetectorState {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate_wlcusum()?;
        Ok(Self {
            config,
            statistic: 0.0,
            t: 0,
            window: VecDeque::with_capacity(config.window + 1),
            estimates: None,
            slides_since_refresh: 0,
            stopping_time: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    /// Index of the most recent observation (0 before any).
    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn is_warm(&self) -> bool {
        self.window.len() == self.config.window
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &DVector<f64>> {
        self.window.iter()
    }

    /// Estimates used for the next observation, once computed.
    pub fn estimates(&self) -> Option<&GaussianParams> {
        self.estimates.as_ref()
    }

    pub fn is_stopped(&self) -> bool {
        self.stopping_time.is_some()
    }

    pub fn stopping_time(&self) -> Option<u64> {
        self.stopping_time
    }

    fn data_window(&self) -> Result<DataWindow> {
        let cols: Vec<DVector<f64>> = self.window.iter().cloned().collect();
        DataWindow::from_columns(&cols)
    }

    fn refresh_if_due(&mut self, estimator: &dyn WindowEstimator) -> Result<()> {
        let due = self.estimates.is_none() || self.slides_since_refresh >= self.config.refresh_stride;
        if due {
            self.estimates = Some(estimator.estimate(&self.data_window()?)?);
            self.slides_since_refresh = 0;
        }
        Ok(())
    }
}

/// Feed one observation. Returns `None` while the window is still filling.
///
/// The log-likelihood ratio of `x` uses the estimates from the `n` samples
/// before it; the window then slides to include `x`.
pub fn wlcusum_step(
    state: &mut DetectorState,
    x: DVector<f64>,
    estimator: &dyn WindowEstimator,
) -> Result<Option<StepRecord>> {
    if let Some(first) = state.window.front() {
        if first.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: x.len(),
            });
        }
    }
    if !state.is_warm() {
        state.window.push_back(x);
        state.t += 1;
        return Ok(None);
    }
    state.refresh_if_due(estimator)?;
    let params = state.estimates.as_ref().expect("refreshed above");
    let llr = gaussian_llr(&x, params)?;
    state.statistic = cusum_step(state.statistic, llr);
    state.t += 1;
    state.window.pop_front();
    state.window.push_back(x);
    state.slides_since_refresh += 1;
    if state.stopping_time.is_none() && state.statistic >= state.config.threshold {
        state.stopping_time = Some(state.t);
    }
    Ok(Some(StepRecord {
        t: state.t,
        llr,
        statistic: state.statistic,
    }))
}

/// WLCuSum run: `n` warm-up samples, then steps until `Ŷ_t ≥ b` or the cap.
pub fn wlcusum_run<I>(
    stream: I,
    config: &DetectorConfig,
    estimator: &dyn WindowEstimator,
) -> Result<StoppingRecord>
where
    I: IntoIterator<Item = DVector<f64>>,
{
    wlcusum_run_traced(stream, config, estimator, |_| {})
}

/// [`wlcusum_run`] reporting every post-warm-up step to `observer`.
pub fn wlcusum_run_traced<I, F>(
    stream: I,
    config: &DetectorConfig,
    estimator: &dyn WindowEstimator,
    mut observer: F,
) -> Result<StoppingRecord>
where
    I: IntoIterator<Item = DVector<f64>>,
    F: FnMut(StepRecord),
{
    let mut state = DetectorState::new(*config)?;
    let mut stream = stream.into_iter();
    for got in 0..config.window {
        let x = stream.next().ok_or(Error::InsufficientWarmup {
            needed: config.window,
            got,
        })?;
        wlcusum_step(&mut state, x, estimator)?;
    }
    while state.t < config.cap {
        let x = stream.next().ok_or(Error::ExhaustedStream { t: state.t })?;
        let step = wlcusum_step(&mut state, x, estimator)?.expect("window is warm");
        observer(step);
        if let Some(time) = state.stopping_time {
            return Ok(StoppingRecord {
                time,
                statistic: state.statistic,
                censored: false,
            });
        }
    }
    Ok(StoppingRecord {
        time: config.cap,
        statistic: state.statistic,
        censored: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_vec(vec![v])
    }

    /// p = 1, post = N(1, 1): llr(x) = x − ½, so x = 1.5 gives llr 1.
    fn unit_shift() -> GaussianParams {
        GaussianParams::new(scalar(1.0), DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn llr_examples() {
        let std = GaussianParams::standard(3);
        let x = DVector::from_vec(vec![0.4, -2.0, 7.0]);
        assert_eq!(gaussian_llr(&x, &std).unwrap(), 0.0);
        assert_relative_eq!(gaussian_llr(&scalar(1.0), &unit_shift()).unwrap(), 0.5);
        assert!(matches!(
            gaussian_llr(&x, &unit_shift()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cusum_step_examples() {
        assert_eq!(cusum_step(0.0, -5.0), 0.0);
        assert_eq!(cusum_step(2.0, 1.5), 3.5);
        assert_eq!(cusum_step(1.0, -3.0), 0.0);
    }

    #[test]
    fn cusum_run_deterministic_streams() {
        let cfg = DetectorConfig::new(3.5, 0, 100);
        let rec = cusum_run(std::iter::repeat(scalar(1.5)), &unit_shift(), &cfg).unwrap();
        assert_eq!(rec.time, 4);
        assert!(!rec.censored);
        assert_relative_eq!(rec.statistic, 4.0);

        let rec = cusum_run(std::iter::repeat(scalar(-0.5)), &unit_shift(), &cfg).unwrap();
        assert_eq!(rec, StoppingRecord { time: 100, statistic: 0.0, censored: true });

        let short = vec![scalar(-0.5); 10];
        assert_eq!(
            cusum_run(short, &unit_shift(), &cfg).unwrap_err(),
            Error::ExhaustedStream { t: 10 }
        );
    }

    #[test]
    fn wlcusum_scalar_hand_computation() {
        // window (1, 3): μ̂ = 2, σ̂² = 1; x = 2 gives ½[4 − 0 − 0] = 2
        let cfg = DetectorConfig::new(100.0, 2, 10);
        let mut state = DetectorState::new(cfg).unwrap();
        let est = PlugIn::sample();
        assert!(wlcusum_step(&mut state, scalar(1.0), &est).unwrap().is_none());
        assert!(wlcusum_step(&mut state, scalar(3.0), &est).unwrap().is_none());
        let step = wlcusum_step(&mut state, scalar(2.0), &est).unwrap().unwrap();
        assert_eq!(step.t, 3);
        assert_relative_eq!(step.llr, 2.0, max_relative = 1e-14);
        assert_relative_eq!(step.statistic, 2.0, max_relative = 1e-14);
        let window: Vec<f64> = state.window().map(|c| c[0]).collect();
        assert_eq!(window, vec![3.0, 2.0]);
    }

    #[test]
    fn zero_threshold_stops_right_after_warmup() {
        let cfg = DetectorConfig::new(0.0, 5, 50);
        let data: Vec<DVector<f64>> = (0..20).map(|k| scalar((k as f64).sin())).collect();
        let rec = wlcusum_run(data, &cfg, &PlugIn::sample()).unwrap();
        assert_eq!(rec.time, 6);
    }

    #[test]
    fn warmup_and_singularity_errors() {
        let cfg = DetectorConfig::new(1.0, 5, 50);
        let data = vec![scalar(1.0); 3];
        assert_eq!(
            wlcusum_run(data, &cfg, &PlugIn::sample()).unwrap_err(),
            Error::InsufficientWarmup { needed: 5, got: 3 }
        );
        // p = 3 ≥ n = 2: the sample covariance cannot be inverted
        let cfg = DetectorConfig::new(1.0, 2, 50);
        let data: Vec<DVector<f64>> = (0..5)
            .map(|k| DVector::from_vec(vec![k as f64, (k * k) as f64, 1.0 / (k as f64 + 1.0)]))
            .collect();
        assert!(matches!(
            wlcusum_run(data, &cfg, &PlugIn::sample()).unwrap_err(),
            Error::SingularEstimate { .. }
        ));
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::new(-1.0, 5, 10).validate_cusum().is_err());
        assert!(DetectorConfig::new(1.0, 1, 10).validate_wlcusum().is_err());
        assert!(DetectorConfig::new(1.0, 10, 10).validate_wlcusum().is_err());
        assert!(DetectorConfig::new(1.0, 10, 0).validate_cusum().is_err());
    }
}
