//! Mean and covariance estimation from a window of samples.
//!
//! Every covariance estimator here is a *shrinkage* estimator: it keeps the
//! eigenvectors of the sample covariance `S̄` and replaces each sample
//! eigenvalue `λ_k(S̄)` by `δ(λ_k(S̄))` for some positive shrinkage function
//! `δ`. The sample covariance itself is the case `δ(x) = x`.
//!
//! # LWISE
//!
//! The Ledoit–Wolf quadratic inverse-Stein shrinkage works with the singular
//! values `ω_i` of the centered, `√n`-scaled window, so that `ω_i² = λ_i(S̄)`.
//! With `t_i = ω_i⁻²`, `γ = p / n` and `r` nonzero singular values, the two
//! smoothed kernels are
//!
//! ```text
//! g(x) = r⁻¹ Σ t_i (t_i − x) / ((t_i − x)² + n^(−2/3) t_i²)
//! h(x) = g(x)² + [ r⁻¹ Σ t_i · n^(−1/3) t_i / ((t_i − x)² + n^(−2/3) t_i²) ]²
//! ```
//!
//! and the shrunk eigenvalue is
//!
//! ```text
//! δ(ω) = ω² / [(1 − γ)² + 2γ(1 − γ) g(ω⁻²) + γ² h(ω⁻²)]    p ≤ n − 1
//! δ(ω) = ω² / h(ω⁻²)                                      p > n − 1
//! δ(0) = 1 / [(γ − 1) · r⁻¹ Σ t_i]                        null directions
//! ```
//!
//! `g(x) + i·(second term)` is a smoothed version of `r⁻¹ Σ t_i / (t_i − x)`,
//! which at `x = 1/λ` equals `−λ m(λ)` for the empirical Stieltjes transform
//! `m`; the denominator is therefore `|1 − γ − γ λ m̆(λ)|²`. Evaluating the
//! kernels at `ω` and `ω⁻¹` instead is available as
//! [`KernelArgument::Literal`] for comparison.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, CholeskyFactor};
use crate::spectra::{eig_sym, SpectralDecomposition};

/// Eigenvalues below this fraction of the largest one count as zero when
/// determining the rank of the centered window.
const RANK_TOL: f64 = 1e-10;

/// Floor applied to LWISE denominators, relative to `ω²`.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// `p × n` matrix whose column `j` is the `j`-th oldest sample in the window.
#[derive(Debug, Clone, PartialEq)]
pub struct DataWindow {
    samples: DMatrix<f64>,
}

impl DataWindow {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "window must be nonempty, got {}x{}",
                samples.nrows(),
                samples.ncols()
            )));
        }
        check_finite(&samples, "window")?;
        Ok(Self { samples })
    }

    pub fn from_columns(columns: &[DVector<f64>]) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(Error::InvalidInput("window must be nonempty".into()));
        };
        let p = first.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: bad.len(),
            });
        }
        Self::new(DMatrix::from_columns(columns))
    }

    /// Number of variables.
    pub fn p(&self) -> usize {
        self.samples.nrows()
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.samples
    }

    fn centered(&self) -> DMatrix<f64> {
        let m = sample_mean(self);
        let mut c = self.samples.clone();
        for mut col in c.column_iter_mut() {
            col -= &m;
        }
        c
    }
}

/// Row means `n⁻¹ W 1`.
pub fn sample_mean(w: &DataWindow) -> DVector<f64> {
    w.samples.column_mean()
}

fn sample_covariance_matrix(w: &DataWindow) -> DMatrix<f64> {
    let c = w.centered();
    let s = &c * c.transpose() / w.n() as f64;
    (&s + s.transpose()) * 0.5
}

/// Where a covariance estimate came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub estimator: String,
    pub p: usize,
    pub n: usize,
    /// Aspect ratio convention used by the estimator (always `p / n`).
    pub gamma: f64,
    /// Number of shrunk eigenvalues whose denominator hit the numerical floor.
    pub clamped: usize,
}

/// Covariance estimate with eagerly computed inverse and log-determinant.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    matrix: DMatrix<f64>,
    provenance: Provenance,
    singular: bool,
    log_det: Option<f64>,
    inverse: Option<DMatrix<f64>>,
    eigenvalues: Option<Vec<f64>>,
}

impl CovarianceEstimate {
    fn from_cholesky(matrix: DMatrix<f64>, provenance: Provenance, force_singular: bool) -> Self {
        let factor = if force_singular {
            None
        } else {
            CholeskyFactor::new(&matrix).ok()
        };
        match factor {
            Some(f) => Self {
                log_det: Some(f.log_det()),
                inverse: Some(f.inverse()),
                matrix,
                provenance,
                singular: false,
                eigenvalues: None,
            },
            None => Self {
                matrix,
                provenance,
                singular: true,
                log_det: None,
                inverse: None,
                eigenvalues: None,
            },
        }
    }

    fn from_spectrum(
        basis: &SpectralDecomposition,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Self {
        let matrix = basis.recompose(&values);
        let inv: Vec<f64> = values.iter().map(|v| 1.0 / v).collect();
        let inverse = basis.recompose(&inv);
        let log_det = values.iter().map(|v| v.ln()).sum();
        Self {
            matrix,
            provenance,
            singular: false,
            log_det: Some(log_det),
            inverse: Some(inverse),
            eigenvalues: Some(values),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `true` when the estimate is not positive definite. Only the sample
    /// covariance can be singular.
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn log_det(&self) -> Option<f64> {
        self.log_det
    }

    pub fn inverse(&self) -> Option<&DMatrix<f64>> {
        self.inverse.as_ref()
    }

    /// Shrunk eigenvalues in the order of the sample eigenvalues (descending
    /// sample eigenvalue), when the estimate was built spectrally.
    pub fn shrunk_eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }
}

/// Sample covariance `n⁻¹ (W − m1ᵀ)(W − m1ᵀ)ᵀ`.
pub fn sample_covariance(w: &DataWindow) -> Result<CovarianceEstimate> {
    let (p, n) = (w.p(), w.n());
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "sample covariance needs n ≥ 2, got {n}"
        )));
    }
    let matrix = sample_covariance_matrix(w);
    let provenance = Provenance {
        estimator: "sample".into(),
        p,
        n,
        gamma: p as f64 / n as f64,
        clamped: 0,
    };
    Ok(CovarianceEstimate::from_cholesky(matrix, provenance, p >= n))
}

/// Which arguments the LWISE kernels `g` and `h` are evaluated at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelArgument {
    /// Both at `ω⁻²`, the inverse sample eigenvalue.
    #[default]
    InverseEigenvalue,
    /// `g` at `ω` and `h` at `ω⁻¹`.
    Literal,
}

/// Positive piecewise-linear shrinkage function, constant outside its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Knots must have strictly increasing abscissae and positive values.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidRule("shrinkage table has no knots".into()));
        }
        if knots.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidRule("shrinkage table has non-finite knots".into()));
        }
        if let Some(&(x, y)) = knots.iter().find(|&&(_, y)| y <= 0.0) {
            return Err(Error::InvalidRule(format!(
                "shrinkage table value at {x} is {y}, must be positive"
            )));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidRule(
                "shrinkage table knots must be strictly increasing".into(),
            ));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        let i = self.knots.partition_point(|&(k, _)| k <= x);
        let (x0, y0) = self.knots[i - 1];
        let (x1, y1) = self.knots[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// A shrinkage function `δ`, possibly depending on the whole sample spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkageRule {
    /// `δ(x) = x`: the sample covariance.
    Identity,
    /// Ledoit–Wolf quadratic inverse-Stein shrinkage.
    Lwise(KernelArgument),
    /// User-supplied table.
    Table(PiecewiseLinear),
}

/// Shrunk eigenvalues plus the count of guard activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Shrunk {
    pub values: Vec<f64>,
    pub clamped: usize,
}

impl ShrinkageRule {
    pub fn lwise() -> Self {
        Self::Lwise(KernelArgument::default())
    }

    /// `δ(x) = c` for all `x`.
    pub fn constant(c: f64) -> Result<Self> {
        Ok(Self::Table(PiecewiseLinear::new(vec![(0.0, c)])?))
    }

    pub fn name(&self) -> String {
        match self {
            Self::Identity => "sample".into(),
            Self::Lwise(KernelArgument::InverseEigenvalue) => "lwise".into(),
            Self::Lwise(KernelArgument::Literal) => "lwise-literal".into(),
            Self::Table(t) if t.knots().len() == 1 => format!("constant:{}", t.knots()[0].1),
            Self::Table(_) => "table".into(),
        }
    }

    /// Map descending sample eigenvalues of a `p × p` sample covariance
    /// built from `n` samples to shrunk eigenvalues.
    pub fn shrink(&self, sample_eigenvalues: &[f64], n: usize) -> Result<Shrunk> {
        let p = sample_eigenvalues.len();
        if p == 0 {
            return Err(Error::InvalidInput("no sample eigenvalues".into()));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!("shrinkage needs n ≥ 2, got {n}")));
        }
        let shrunk = match self {
            Self::Identity => Shrunk {
                values: sample_eigenvalues.to_vec(),
                clamped: 0,
            },
            Self::Table(t) => Shrunk {
                values: sample_eigenvalues.iter().map(|&x| t.eval(x.max(0.0))).collect(),
                clamped: 0,
            },
            Self::Lwise(arg) => lwise_spectrum(sample_eigenvalues, n, *arg)?,
        };
        if let Some((k, v)) = shrunk
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidRule(format!(
                "{} maps sample eigenvalue {} to {v}",
                self.name(),
                sample_eigenvalues[k]
            )));
        }
        Ok(shrunk)
    }
}

/// Rank of the centered window implied by descending sample eigenvalues.
fn numerical_rank(sample_eigenvalues: &[f64]) -> usize {
    let top = sample_eigenvalues.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return 0;
    }
    sample_eigenvalues
        .iter()
        .take_while(|&&l| l > RANK_TOL * top)
        .count()
}

fn lwise_spectrum(sample_eigenvalues: &[f64], n: usize, arg: KernelArgument) -> Result<Shrunk> {
    let p = sample_eigenvalues.len();
    let expected = p.min(n - 1);
    let rank = numerical_rank(sample_eigenvalues);
    if rank < expected {
        return Err(Error::DegenerateWindow { rank, expected });
    }
    let omegas: Vec<f64> = sample_eigenvalues[..rank].iter().map(|l| l.sqrt()).collect();
    let mut values = Vec::with_capacity(p);
    let mut clamped = 0;
    for &w in &omegas {
        let v = lwise_shrinkage_with(w, &omegas, p, n, arg)?;
        clamped += usize::from(v.clamped);
        values.push(v.value);
    }
    if rank < p {
        let v = lwise_shrinkage_with(0.0, &omegas, p, n, arg)?;
        clamped += usize::from(v.clamped);
        values.extend(std::iter::repeat_n(v.value, p - rank));
    }
    Ok(Shrunk { values, clamped })
}

/// Smoothed kernels `(g(x), h(x))` over the nonzero singular values `ω_i`;
/// the sums are normalized by the number of singular values supplied.
pub fn lwise_kernels(x: f64, singular_values: &[f64], n: usize) -> Result<(f64, f64)> {
    if singular_values.is_empty() {
        return Err(Error::InvalidInput("no singular values".into()));
    }
    if let Some(w) = singular_values.iter().find(|&&w| !(w > 0.0)) {
        return Err(Error::Domain(format!("singular values must be positive, got {w}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("kernel argument must be ≥ 0, got {x}")));
    }
    let nf = n as f64;
    let bw = nf.powf(-1.0 / 3.0);
    let bw2 = nf.powf(-2.0 / 3.0);
    let (mut re, mut im) = (0.0, 0.0);
    for &w in singular_values {
        let t = 1.0 / (w * w);
        let d = t - x;
        let den = d * d + bw2 * t * t;
        re += t * d / den;
        im += t * bw * t / den;
    }
    let r = singular_values.len() as f64;
    let g = re / r;
    let im = im / r;
    Ok((g, g * g + im * im))
}

/// Single LWISE shrinkage value and whether the denominator guard fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkValue {
    pub value: f64,
    pub clamped: bool,
}

/// LWISE shrinkage of one singular value `ω` (with `ω²` a sample
/// eigenvalue), given the nonzero singular values of the window.
pub fn lwise_shrinkage(omega: f64, singular_values: &[f64], p: usize, n: usize) -> Result<ShrinkValue> {
    lwise_shrinkage_with(omega, singular_values, p, n, KernelArgument::default())
}

pub fn lwise_shrinkage_with(
    omega: f64,
    singular_values: &[f64],
    p: usize,
    n: usize,
    arg: KernelArgument,
) -> Result<ShrinkValue> {
    if n < 2 || p == 0 {
        return Err(Error::InvalidInput(format!("need p ≥ 1 and n ≥ 2, got ({p}, {n})")));
    }
    if !(omega >= 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("ω must be finite and ≥ 0, got {omega}")));
    }
    let gamma = p as f64 / n as f64;
    // p = n − 1 takes the nonsingular branch.
    let nonsingular = p < n;
    if omega == 0.0 {
        if nonsingular {
            return Err(Error::Domain(format!(
                "ω = 0 has no null direction to describe when p ≤ n − 1 (p = {p}, n = {n})"
            )));
        }
        if singular_values.is_empty() || singular_values.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Domain("singular values must be positive".into()));
        }
        let mean_inv = singular_values.iter().map(|w| 1.0 / (w * w)).sum::<f64>()
            / singular_values.len() as f64;
        let den = (gamma - 1.0) * mean_inv;
        let floor = DENOMINATOR_FLOOR * mean_inv;
        let clamped = den < floor;
        return Ok(ShrinkValue {
            value: 1.0 / den.max(floor),
            clamped,
        });
    }
    let w2 = omega * omega;
    let den = match arg {
        KernelArgument::InverseEigenvalue => {
            let (g, h) = lwise_kernels(1.0 / w2, singular_values, n)?;
            if nonsingular {
                (1.0 - gamma).powi(2) + 2.0 * gamma * (1.0 - gamma) * g + gamma * gamma * h
            } else {
                h
            }
        }
        KernelArgument::Literal => {
            let (_, h) = lwise_kernels(1.0 / omega, singular_values, n)?;
            if nonsingular {
                let (g, _) = lwise_kernels(omega, singular_values, n)?;
                (1.0 - gamma).powi(2) + 2.0 * gamma * (1.0 - gamma) * g + gamma * gamma * h
            } else {
                h
            }
        }
    };
    let floor = DENOMINATOR_FLOOR * w2;
    let clamped = !(den >= floor);
    Ok(ShrinkValue {
        value: w2 / if clamped { floor } else { den },
        clamped,
    })
}

/// Shrinkage estimate sharing the eigenvectors of the sample covariance,
/// with eigenvalues `δ(λ_k(S̄))`.
pub fn apply_shrinkage(w: &DataWindow, rule: &ShrinkageRule) -> Result<CovarianceEstimate> {
    let (p, n) = (w.p(), w.n());
    if n < 2 {
        return Err(Error::InvalidInput(format!("shrinkage needs n ≥ 2, got {n}")));
    }
    let basis = eig_sym(&sample_covariance_matrix(w))?;
    let shrunk = rule.shrink(basis.eigenvalues().as_slice(), n)?;
    let provenance = Provenance {
        estimator: rule.name(),
        p,
        n,
        gamma: p as f64 / n as f64,
        clamped: shrunk.clamped,
    };
    Ok(CovarianceEstimate::from_spectrum(&basis, shrunk.values, provenance))
}

/// LWISE covariance estimate; positive definite for every nondegenerate
/// window, including `p > n`.
pub fn lwise_estimate(w: &DataWindow) -> Result<CovarianceEstimate> {
    apply_shrinkage(w, &ShrinkageRule::lwise())
}

/// Covariance estimator selection used by plug-in detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMethod {
    /// Maximum-likelihood sample covariance (singular when `p ≥ n`).
    Sample,
    Shrinkage(ShrinkageRule),
}

impl CovarianceMethod {
    pub fn lwise() -> Self {
        Self::Shrinkage(ShrinkageRule::lwise())
    }

    pub fn name(&self) -> String {
        match self {
            Self::Sample => "sample".into(),
            Self::Shrinkage(rule) => rule.name(),
        }
    }

    pub fn estimate(&self, w: &DataWindow) -> Result<CovarianceEstimate> {
        match self {
            Self::Sample => sample_covariance(w),
            Self::Shrinkage(rule) => apply_shrinkage(w, rule),
        }
    }
}

impl std::str::FromStr for CovarianceMethod {
    type Err = Error;

    /// Accepts `sample`, `lwise`, `lwise-literal`, `identity` (always `I`)
    /// and `constant:<c>` (always `c·I`).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(Self::Sample),
            "lwise" => Ok(Self::lwise()),
            "lwise-literal" => Ok(Self::Shrinkage(ShrinkageRule::Lwise(KernelArgument::Literal))),
            "identity" => Ok(Self::Shrinkage(ShrinkageRule::constant(1.0)?)),
            _ => match s.strip_prefix("constant:") {
                Some(c) => {
                    let c: f64 = c
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad constant in {s:?}")))?;
                    Ok(Self::Shrinkage(ShrinkageRule::constant(c)?))
                }
                None => Err(Error::InvalidInput(format!("unknown estimator {s:?}"))),
            },
        }
    }
}
