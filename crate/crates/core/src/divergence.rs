//! Gaussian KL divergences, the inverse Stein's loss, and the asymptotic
//! delay functionals.
//!
//! The post-change distribution `N(μ, Σ)` is compared against the standard
//! normal pre-change law through
//!
//! ```text
//! D(f ‖ f₀) = ½ [‖μ‖² − log|Σ| + tr Σ − p]
//! ```
//!
//! and a plug-in estimate `N(μ̂, Σ̂)` is judged by its normalized divergence
//! `p⁻¹ D(f ‖ f̂)`. For a shrinkage rule `δ` the large-`(p, n)` limit of that
//! normalized divergence is
//!
//! ```text
//! D∞(δ) = ½ [ ∫ ( x / (|1 − γ − γ x m̆(x)|² δ(x)) + log δ(x) ) G(dx) − ∫ log y H(dy) − 1 ]
//! ```
//!
//! where `G` is the limiting sample spectrum, `m̆` its real-line Stieltjes
//! transform and `H` the population spectrum. The excess delay in the limit
//! is `L∞ = D∞(δ) / (D∞ [D∞ − D∞(δ)])`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CovarianceEstimate, DataWindow, KernelArgument, ShrinkageRule};
use crate::linalg::CholeskyFactor;
use crate::spectra::{mp_boundary_stieltjes, real_line_stieltjes, PopulationSpectrum};

/// Mean vector and positive-definite covariance of a Gaussian, with its
/// Cholesky factor computed once at construction.
#[derive(Debug, Clone)]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    factor: CholeskyFactor,
}

impl PartialEq for GaussianParams {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: covariance.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mean has non-finite entries".into()));
        }
        let factor = CholeskyFactor::new(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            factor,
        })
    }

    /// `N(0, I_p)`.
    pub fn standard(p: usize) -> Self {
        Self::new(DVector::zeros(p), DMatrix::identity(p, p)).expect("identity is SPD")
    }

    /// Sample mean plus a nonsingular covariance estimate.
    pub fn from_estimate(mean: DVector<f64>, estimate: &CovarianceEstimate) -> Result<Self> {
        if estimate.is_singular() {
            let prov = estimate.provenance();
            return Err(Error::SingularEstimate {
                estimator: prov.estimator.clone(),
                p: prov.p,
                n: prov.n,
            });
        }
        Self::new(mean, estimate.matrix().clone())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn log_det(&self) -> f64 {
        self.factor.log_det()
    }

    pub fn is_standard(&self) -> bool {
        let p = self.dim();
        self.mean.iter().all(|&v| v == 0.0) && self.covariance == DMatrix::identity(p, p)
    }
}

/// `D(N(μ, Σ) ‖ N(0, I))`.
pub fn kl_vs_standard(params: &GaussianParams) -> f64 {
    let p = params.dim() as f64;
    let v = 0.5 * (params.mean.norm_squared() - params.log_det() + params.covariance.trace() - p);
    v.max(0.0)
}

/// `D(N(μ_a, Σ_a) ‖ N(μ_b, Σ_b))`.
pub fn kl_gaussian(a: &GaussianParams, b: &GaussianParams) -> Result<f64> {
    Ok(nhdkl_finite(a, b)?.total)
}

/// Per-term decomposition of `D(truth ‖ estimate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NhdklBreakdown {
    /// `tr(Σ̂⁻¹ Σ)`
    pub trace_term: f64,
    /// `log|Σ| − log|Σ̂|`
    pub logdet_term: f64,
    /// `(μ̂ − μ)ᵀ Σ̂⁻¹ (μ̂ − μ)`
    pub mean_term: f64,
    /// `½ (trace_term + mean_term − logdet_term − p)`
    pub total: f64,
    /// `total / p`
    pub normalized: f64,
}

/// Finite-dimension normalized KL divergence from the true post-change
/// law to its plug-in estimate.
pub fn nhdkl_finite(truth: &GaussianParams, estimate: &GaussianParams) -> Result<NhdklBreakdown> {
    let p = truth.dim();
    if estimate.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: estimate.dim(),
        });
    }
    let est = estimate.factor();
    // tr(Σ̂⁻¹Σ) = ‖L̂⁻¹ L‖_F²
    let trace_term = est.whiten_matrix(&truth.factor().lower()).norm_squared();
    let mean_term = est.quad_form(&(estimate.mean() - truth.mean()));
    let logdet_term = truth.log_det() - estimate.log_det();
    let total = (0.5 * (trace_term + mean_term - logdet_term - p as f64)).max(0.0);
    Ok(NhdklBreakdown {
        trace_term,
        logdet_term,
        mean_term,
        total,
        normalized: total / p as f64,
    })
}

/// `p⁻¹ tr(ΣA⁻¹) − p⁻¹ log|ΣA⁻¹| − 1`.
pub fn inverse_stein_loss(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != sigma.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            got: a.nrows(),
        });
    }
    let fa = CholeskyFactor::new(a).map_err(|e| match e {
        Error::NotPositiveDefinite => {
            Error::InvalidInput("inverse Stein's loss needs a nonsingular estimate".into())
        }
        other => other,
    })?;
    let fs = CholeskyFactor::new(sigma)?;
    let p = a.nrows() as f64;
    let trace = fa.whiten_matrix(&fs.lower()).norm_squared();
    let log_det = fs.log_det() - fa.log_det();
    Ok((trace / p - log_det / p - 1.0).max(0.0))
}

/// Scale `c` minimizing the inverse Stein's loss of `c·I` against `Σ`:
/// `c = p⁻¹ tr Σ`.
pub fn best_constant_scale(sigma: &DMatrix<f64>) -> f64 {
    sigma.trace() / sigma.nrows() as f64
}

/// Source of the boundary Stieltjes transform `m̆` in [`d_infinity`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySource {
    /// Closed-form Marchenko–Pastur transform when the population spectrum
    /// is a point mass, otherwise the empirical transform.
    #[default]
    Auto,
    /// [`real_line_stieltjes`] of the sample eigenvalues.
    Empirical,
    /// Scaled Marchenko–Pastur transform; needs a point-mass spectrum.
    MarchenkoPastur,
}

/// How the `D∞` integrand is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandReading {
    /// `x / (|1 − γ − γ x m̆|² δ) + log δ`.
    #[default]
    Parsed,
    /// `x / (|1 − γ − γ m̆|² δ + log δ)`, with no separate log term.
    Literal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DInfinityOptions {
    pub boundary: BoundarySource,
    pub reading: IntegrandReading,
}

/// Plug-in evaluation of `D∞(δ)` with `G` replaced by the sample spectrum.
///
/// Null sample eigenvalues (present when `p ≥ n`) contribute
/// `d̂(0)/δ(0) + log δ(0)` with `d̂(0) = [(γ − 1) r⁻¹ Σ λ_i⁻¹]⁻¹` over the `r`
/// nonzero eigenvalues.
pub fn d_infinity(
    rule: &ShrinkageRule,
    sample_eigenvalues: &[f64],
    spectrum: &PopulationSpectrum,
    gamma: f64,
    n: usize,
    options: DInfinityOptions,
) -> Result<f64> {
    if sample_eigenvalues.is_empty() {
        return Err(Error::InvalidInput("no sample eigenvalues".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("γ must be positive, got {gamma}")));
    }
    let mut eigs = sample_eigenvalues.to_vec();
    eigs.sort_by(|a, b| b.total_cmp(a));
    let shrunk = rule.shrink(&eigs, n)?.values;

    let scale = match (options.boundary, spectrum.as_point_mass()) {
        (BoundarySource::Empirical, _) | (BoundarySource::Auto, None) => None,
        (_, Some(v)) => Some(v),
        (BoundarySource::MarchenkoPastur, None) => {
            return Err(Error::InvalidInput(
                "Marchenko–Pastur boundary transform needs a point-mass spectrum".into(),
            ))
        }
    };
    let boundary = |x: f64| -> Result<Complex64> {
        match scale {
            Some(v) => mp_boundary_stieltjes(x, gamma, v),
            None => real_line_stieltjes(&eigs, x, n),
        }
    };

    let top = eigs[0];
    let nonzero: Vec<f64> = eigs.iter().copied().filter(|&l| l > 1e-10 * top).collect();
    if nonzero.is_empty() {
        return Err(Error::InvalidInput("all sample eigenvalues are zero".into()));
    }
    let null_oracle = || -> Result<f64> {
        if gamma <= 1.0 {
            return Err(Error::Domain(format!(
                "null sample eigenvalues with γ = {gamma} ≤ 1"
            )));
        }
        let mean_inv = nonzero.iter().map(|l| 1.0 / l).sum::<f64>() / nonzero.len() as f64;
        Ok(1.0 / ((gamma - 1.0) * mean_inv))
    };

    let mut acc = 0.0;
    for (&x, &d) in eigs.iter().zip(&shrunk) {
        if x <= 1e-10 * top {
            acc += match options.reading {
                IntegrandReading::Parsed => null_oracle()? / d + d.ln(),
                IntegrandReading::Literal => 0.0,
            };
            continue;
        }
        let m = boundary(x)?;
        acc += match options.reading {
            IntegrandReading::Parsed => {
                let denom = (Complex64::new(1.0 - gamma, 0.0) - gamma * x * m).norm_sqr();
                x / (denom * d) + d.ln()
            }
            IntegrandReading::Literal => {
                let denom = (Complex64::new(1.0 - gamma, 0.0) - gamma * m).norm_sqr();
                x / (denom * d + d.ln())
            }
        };
    }
    let p = eigs.len() as f64;
    Ok(0.5 * (acc / p - spectrum.mean_log() - 1.0))
}

/// Limiting excess delay `L∞ = d_est / (d_post (d_post − d_est))`.
pub fn l_infinity(d_post: f64, d_est: f64) -> Result<f64> {
    if !(d_post > 0.0) || !d_post.is_finite() {
        return Err(Error::Domain(format!("D∞ must be positive, got {d_post}")));
    }
    if !(d_est >= 0.0) {
        return Err(Error::Domain(format!(
            "estimation divergence must be ≥ 0, got {d_est}"
        )));
    }
    if d_est >= d_post {
        return Err(Error::DetectabilityLoss { d_post, d_est });
    }
    Ok(d_est / (d_post * (d_post - d_est)))
}

/// Mean normalized inverse Stein's losses of the two LWISE kernel readings
/// over a set of windows drawn with population covariance `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelReadingReport {
    pub trials: usize,
    /// Mean `½ L^IS` with kernels evaluated at `ω⁻²`.
    pub inverse_eigenvalue: f64,
    /// Mean `½ L^IS` with `g(ω)` and `h(ω⁻¹)`.
    pub literal: f64,
}

impl KernelReadingReport {
    /// Reading with the lower mean loss.
    pub fn preferred(&self) -> KernelArgument {
        if self.literal < self.inverse_eigenvalue {
            KernelArgument::Literal
        } else {
            KernelArgument::InverseEigenvalue
        }
    }
}

pub fn kernel_reading_report(
    windows: &[DataWindow],
    sigma: &DMatrix<f64>,
) -> Result<KernelReadingReport> {
    if windows.is_empty() {
        return Err(Error::InvalidInput("no windows".into()));
    }
    let mut sums = [0.0; 2];
    for w in windows {
        for (slot, arg) in [KernelArgument::InverseEigenvalue, KernelArgument::Literal]
            .into_iter()
            .enumerate()
        {
            let est = crate::estimators::apply_shrinkage(w, &ShrinkageRule::Lwise(arg))?;
            sums[slot] += 0.5 * inverse_stein_loss(est.matrix(), sigma)?;
        }
    }
    let k = windows.len() as f64;
    Ok(KernelReadingReport {
        trials: windows.len(),
        inverse_eigenvalue: sums[0] / k,
        literal: sums[1] / k,
    })
}
