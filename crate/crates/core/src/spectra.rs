//! Spectral primitives: symmetric eigendecompositions, empirical spectral
//! distributions, Stieltjes transforms and Marchenko–Pastur reference
//! quantities.
//!
//! Eigenvalues are always reported in descending order, `λ₁ ≥ λ₂ ≥ … ≥ λ_p`,
//! and eigenvector column `k` belongs to eigenvalue `k`.
//!
//! The Marchenko–Pastur helpers describe the limiting spectrum of the sample
//! covariance `n⁻¹ X Xᵀ` of a `p × n` matrix with i.i.d. unit-variance
//! entries, with aspect ratio `γ = p / n`:
//!
//! ```text
//! support  [(1 - √γ)², (1 + √γ)²]
//! density  √((b - x)(x - a)) / (2πγx)      plus an atom 1 - 1/γ at 0 when γ > 1
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, haar_orthogonal, symmetrize};

/// Relative reconstruction tolerance guaranteed by [`eig_sym`].
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Orthonormality tolerance guaranteed by [`eig_sym`].
pub const ORTHONORMALITY_TOL: f64 = 1e-9;
/// Absolute tolerance of the Marchenko–Pastur CDF quadrature.
pub const MP_CDF_TOL: f64 = 1e-8;

/// Eigenvalues (descending) and the matching orthonormal eigenvectors of a
/// symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(values) Vᵀ` for replacement eigenvalues `values`.
    pub fn recompose(&self, values: &[f64]) -> DMatrix<f64> {
        assert_eq!(values.len(), self.dim(), "one value per eigenvector");
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[k];
        }
        symmetrize(&(scaled * self.eigenvectors.transpose()))
    }

    /// `‖V diag(λ) Vᵀ − A‖_F / ‖A‖_F` (absolute when `A = 0`).
    pub fn reconstruction_residual(&self, a: &DMatrix<f64>) -> f64 {
        let r = (self.recompose(self.eigenvalues.as_slice()) - a).norm();
        let scale = a.norm();
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }

    /// `‖VᵀV − I‖_F`.
    pub fn orthonormality_residual(&self) -> f64 {
        let p = self.dim();
        (self.eigenvectors.transpose() * &self.eigenvectors - DMatrix::identity(p, p)).norm()
    }
}

/// Symmetric eigendecomposition with descending eigenvalues.
pub fn eig_sym(a: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    check_symmetric(a, "matrix")?;
    let eig = SymmetricEigen::new(symmetrize(a));
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = DVector::from_iterator(p, order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = DMatrix::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Empirical spectral distribution function `p⁻¹ #{k : λ_k ≤ x}`.
pub fn esdf(eigenvalues: &[f64], x: f64) -> f64 {
    if eigenvalues.is_empty() {
        return 0.0;
    }
    let below = eigenvalues.iter().filter(|&&l| l <= x).count();
    below as f64 / eigenvalues.len() as f64
}

/// `m(z) = p⁻¹ Σ_k (λ_k − z)⁻¹` for `Im z > 0`.
pub fn empirical_stieltjes(eigenvalues: &[f64], z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!(
            "Stieltjes transform needs Im z > 0, got {z}"
        )));
    }
    if eigenvalues.is_empty() {
        return Err(Error::InvalidInput("no eigenvalues".into()));
    }
    let sum: Complex64 = eigenvalues
        .iter()
        .map(|&l| (Complex64::new(l, 0.0) - z).inv())
        .sum();
    Ok(sum / eigenvalues.len() as f64)
}

/// Imaginary offset used to approach the real line:
/// `η(x, n) = n^(−1/3) · max(|x|, λ̄)`.
pub fn stieltjes_bandwidth(eigenvalues: &[f64], x: f64, n: usize) -> f64 {
    let mean = eigenvalues.iter().sum::<f64>() / eigenvalues.len().max(1) as f64;
    (n as f64).powf(-1.0 / 3.0) * x.abs().max(mean)
}

/// Empirical boundary value `m̆(x) ≈ m(x + iη(x, n))`.
pub fn real_line_stieltjes(eigenvalues: &[f64], x: f64, n: usize) -> Result<Complex64> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!(
            "real-line Stieltjes limit needs finite x ≠ 0, got {x}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let eta = stieltjes_bandwidth(eigenvalues, x, n);
    empirical_stieltjes(eigenvalues, Complex64::new(x, eta))
}

/// Support edges `((1 − √γ)², (1 + √γ)²)` of the Marchenko–Pastur law.
pub fn mp_support_edges(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("aspect ratio must be positive, got {gamma}")));
    }
    let s = gamma.sqrt();
    Ok(((1.0 - s).powi(2), (1.0 + s).powi(2)))
}

/// Density of the continuous part of the Marchenko–Pastur law (unit scale).
pub fn mp_density(x: f64, gamma: f64) -> f64 {
    let Ok((a, b)) = mp_support_edges(gamma) else {
        return 0.0;
    };
    if x <= a || x >= b || x <= 0.0 {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * std::f64::consts::PI * gamma * x)
}

/// Marchenko–Pastur CDF by adaptive quadrature of the density, including
/// the atom at zero when `γ > 1`.
pub fn mp_cdf(x: f64, gamma: f64) -> Result<f64> {
    let (a, b) = mp_support_edges(gamma)?;
    let atom = if gamma > 1.0 { 1.0 - 1.0 / gamma } else { 0.0 };
    if x < 0.0 {
        return Ok(0.0);
    }
    if x <= a {
        return Ok(atom);
    }
    if x >= b {
        return Ok(1.0);
    }
    // x = c − r cos φ removes the square-root singularities at both edges.
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let two_pi_gamma = 2.0 * std::f64::consts::PI * gamma;
    let integrand = |phi: f64| {
        let xx = c - r * phi.cos();
        if xx <= 0.0 {
            // only reachable at γ = 1, φ = 0; the integrand's limit there
            return r / (std::f64::consts::PI * gamma);
        }
        let s = phi.sin();
        r * r * s * s / (two_pi_gamma * xx)
    };
    let upper = ((c - x) / r).clamp(-1.0, 1.0).acos();
    let mass = adaptive_simpson(&integrand, 0.0, upper, MP_CDF_TOL * 0.1, 48);
    Ok((atom + mass).clamp(0.0, 1.0))
}

/// Stieltjes transform of the Marchenko–Pastur law scaled by `scale`
/// (i.e. of `scale · X Xᵀ / n`), for `Im z > 0`.
pub fn mp_stieltjes(z: Complex64, gamma: f64, scale: f64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("needs Im z > 0, got {z}")));
    }
    if !(scale > 0.0) {
        return Err(Error::Domain(format!("scale must be positive, got {scale}")));
    }
    let (a, b) = mp_support_edges(gamma)?;
    let w = z / scale;
    // Principal roots of each factor select the branch with m(w) ~ −1/w.
    let root = (w - a).sqrt() * (w - b).sqrt();
    let m = (Complex64::new(1.0 - gamma, 0.0) - w + root) / (2.0 * gamma * w);
    Ok(m / scale)
}

/// Boundary value `m̆(x) = lim_{η↓0} m(x + iη)` of [`mp_stieltjes`].
pub fn mp_boundary_stieltjes(x: f64, gamma: f64, scale: f64) -> Result<Complex64> {
    if x == 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!("needs finite x ≠ 0, got {x}")));
    }
    let eps = 1e-13 * x.abs().max(scale);
    mp_stieltjes(Complex64::new(x, eps), gamma, scale)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// One atom of a discrete population spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// Finite discrete mixture standing in for the limiting population
/// spectral distribution `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct PopulationSpectrum {
    atoms: Vec<Atom>,
}

const WEIGHT_TOL: f64 = 1e-9;

impl PopulationSpectrum {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("population spectrum has no atoms".into()));
        }
        for a in &atoms {
            if !(a.value > 0.0) || !a.value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "atom values must be positive and finite, got {}",
                    a.value
                )));
            }
            if !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "atom weights must be nonnegative, got {}",
                    a.weight
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidInput(format!(
                "atom weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::new(vec![Atom { value, weight: 1.0 }])
    }

    /// Convenience constructor from `(value, weight)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(value, weight)| Atom { value, weight })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `(h₁, h₂)`: smallest and largest atom values with positive weight.
    pub fn bounds(&self) -> (f64, f64) {
        self.atoms
            .iter()
            .filter(|a| a.weight > 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                (lo.min(a.value), hi.max(a.value))
            })
    }

    /// `∫ log y H(dy)`.
    pub fn mean_log(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.value.ln()).sum()
    }

    /// `∫ y H(dy)`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.value).sum()
    }

    /// The single atom value when the spectrum is a point mass.
    pub fn as_point_mass(&self) -> Option<f64> {
        let mut live = self.atoms.iter().filter(|a| a.weight > 0.0);
        let first = live.next()?;
        live.all(|a| a.value == first.value).then_some(first.value)
    }

    /// Integer multiplicities summing to `p`, by the largest-remainder method.
    /// Ties go to the earlier atom.
    pub fn counts(&self, p: usize) -> Vec<usize> {
        let quotas: Vec<f64> = self.atoms.iter().map(|a| a.weight * p as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&i, &j| {
            let ri = quotas[i] - quotas[i].floor();
            let rj = quotas[j] - quotas[j].floor();
            rj.total_cmp(&ri).then(i.cmp(&j))
        });
        for &k in order.iter().take(p.saturating_sub(assigned)) {
            counts[k] += 1;
        }
        counts
    }

    /// Population eigenvalues for dimension `p`, descending.
    pub fn eigenvalues(&self, p: usize) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .counts(p)
            .iter()
            .zip(&self.atoms)
            .flat_map(|(&c, a)| std::iter::repeat_n(a.value, c))
            .collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values
    }
}

impl TryFrom<Vec<Atom>> for PopulationSpectrum {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<PopulationSpectrum> for Vec<Atom> {
    fn from(spec: PopulationSpectrum) -> Self {
        spec.atoms
    }
}

/// Population covariance `Q diag(λ) Qᵀ` whose eigenvalues realize the
/// spectrum's atoms at dimension `p`, with `Q` Haar-distributed from `seed`.
pub fn draw_population_covariance(
    spec: &PopulationSpectrum,
    p: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let values = spec.eigenvalues(p);
    if spec.as_point_mass().is_some() {
        // Rotation-invariant: skip the O(p³) draw.
        return Ok(DMatrix::identity(p, p) * values[0]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = haar_orthogonal(p, &mut rng);
    let mut scaled = q.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[k];
    }
    Ok(symmetrize(&(scaled * q.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_symmetric(p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
        symmetrize(&g)
    }

    #[test]
    fn identity_eigenvalues() {
        let d = eig_sym(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(d.eigenvalues().as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_case_pairs_vectors() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let d = eig_sym(&a).unwrap();
        assert_eq!(d.eigenvalues().as_slice(), &[3.0, 1.0]);
        assert_relative_eq!(d.eigenvectors()[(1, 0)].abs(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(d.eigenvectors()[(0, 1)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn random_symmetric_reconstructs() {
        let a = random_symmetric(5, 11);
        let d = eig_sym(&a).unwrap();
        assert!(d.reconstruction_residual(&a) < 1e-10);
        assert!(d.orthonormality_residual() < ORTHONORMALITY_TOL);
        assert!(d.eigenvalues().as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_rejects_bad_input() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eig_sym(&a), Err(Error::SymmetryViolation { .. })));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(eig_sym(&b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn esdf_counts() {
        let l = [1.0, 2.0, 3.0];
        assert_relative_eq!(esdf(&l, 2.0), 2.0 / 3.0);
        assert_eq!(esdf(&l, 0.5), 0.0);
        assert_eq!(esdf(&l, 10.0), 1.0);
    }

    #[test]
    fn stieltjes_single_atoms() {
        let i = Complex64::new(0.0, 1.0);
        let m = empirical_stieltjes(&[2.0], i).unwrap();
        assert_relative_eq!(m.re, 0.4, epsilon = 1e-15);
        assert_relative_eq!(m.im, 0.2, epsilon = 1e-15);
        let m = empirical_stieltjes(&[1.0, 1.0], i).unwrap();
        assert_relative_eq!(m.re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.im, 0.5, epsilon = 1e-15);
        assert!(matches!(
            empirical_stieltjes(&[1.0], Complex64::new(1.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn real_line_limit_of_point_mass() {
        let l = vec![1.0; 50];
        let m = real_line_stieltjes(&l, 2.0, 1_000_000_000).unwrap();
        assert!((m.re + 1.0).abs() < 1e-3);
        assert!(m.im > 0.0 && m.im < 0.05);
        assert!(matches!(real_line_stieltjes(&l, 0.0, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn mp_edges() {
        let (a, b) = mp_support_edges(0.25).unwrap();
        assert_relative_eq!(a, 0.25, epsilon = 1e-15);
        assert_relative_eq!(b, 2.25, epsilon = 1e-15);
        assert_eq!(mp_support_edges(1.0).unwrap(), (0.0, 4.0));
        let (a, b) = mp_support_edges(1e-12).unwrap();
        assert!((a - 1.0).abs() < 1e-5 && (b - 1.0).abs() < 1e-5);
        assert!(mp_support_edges(0.0).is_err());
        assert!(mp_support_edges(-1.0).is_err());
    }

    #[test]
    fn mp_cdf_limits_and_atom() {
        for gamma in [0.1, 0.5, 1.0, 2.0] {
            let (a, b) = mp_support_edges(gamma).unwrap();
            assert!(mp_cdf(b, gamma).unwrap() == 1.0);
            assert!((mp_cdf(b - 1e-9, gamma).unwrap() - 1.0).abs() < 1e-6);
            let atom = if gamma > 1.0 { 1.0 - 1.0 / gamma } else { 0.0 };
            assert!((mp_cdf(a + 1e-12, gamma).unwrap() - atom).abs() < 1e-6);
        }
        // symmetric-point check against a plain midpoint rule
        let gamma = 0.5;
        let (a, _) = mp_support_edges(gamma).unwrap();
        let x = 1.3;
        let m = 200_000;
        let h = (x - a) / m as f64;
        let mid: f64 = (0..m).map(|k| mp_density(a + (k as f64 + 0.5) * h, gamma) * h).sum();
        assert!((mp_cdf(x, gamma).unwrap() - mid).abs() < 1e-6);
    }

    #[test]
    fn mp_stieltjes_matches_quadrature_of_density() {
        for gamma in [0.25, 0.5, 2.0] {
            let z = Complex64::new(1.1, 0.2);
            let (a, b) = mp_support_edges(gamma).unwrap();
            let m = 400_000;
            let h = (b - a) / m as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                let x = a + (k as f64 + 0.5) * h;
                acc += mp_density(x, gamma) * h / (Complex64::new(x, 0.0) - z);
            }
            if gamma > 1.0 {
                acc += (1.0 - 1.0 / gamma) / (-z);
            }
            let got = mp_stieltjes(z, gamma, 1.0).unwrap();
            assert!((got - acc).norm() < 1e-5, "γ={gamma}: {got} vs {acc}");
        }
    }

    #[test]
    fn mp_boundary_imaginary_part_is_pi_density() {
        let gamma = 0.5;
        for x in [0.3, 1.0, 2.5] {
            let m = mp_boundary_stieltjes(x, gamma, 1.0).unwrap();
            assert_relative_eq!(
                m.im,
                std::f64::consts::PI * mp_density(x, gamma),
                max_relative = 1e-9
            );
        }
        let outside = mp_boundary_stieltjes(5.0, gamma, 1.0).unwrap();
        assert!(outside.im.abs() < 1e-9);
    }

    #[test]
    fn largest_remainder_counts() {
        let s = PopulationSpectrum::from_pairs(&[(0.5, 0.3), (1.5, 0.7)]).unwrap();
        assert_eq!(s.counts(10), vec![3, 7]);
        let s = PopulationSpectrum::from_pairs(&[(1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0), (3.0, 1.0 / 3.0)])
            .unwrap();
        assert_eq!(s.counts(4), vec![2, 1, 1]);
        assert_eq!(s.counts(4).iter().sum::<usize>(), 4);
    }

    #[test]
    fn spectrum_validation() {
        assert!(PopulationSpectrum::new(vec![]).is_err());
        assert!(PopulationSpectrum::from_pairs(&[(1.0, 0.5)]).is_err());
        assert!(PopulationSpectrum::from_pairs(&[(-1.0, 1.0)]).is_err());
        let s = PopulationSpectrum::from_pairs(&[(0.5, 0.5), (1.5, 0.5)]).unwrap();
        assert_eq!(s.bounds(), (0.5, 1.5));
        assert!(s.as_point_mass().is_none());
        assert_eq!(PopulationSpectrum::point_mass(2.0).unwrap().as_point_mass(), Some(2.0));
    }

    #[test]
    fn population_covariance_cases() {
        let iso = PopulationSpectrum::point_mass(1.0).unwrap();
        let c = draw_population_covariance(&iso, 4, 1).unwrap();
        assert_eq!(c, DMatrix::identity(4, 4));

        let two = PopulationSpectrum::from_pairs(&[(0.5, 0.5), (1.5, 0.5)]).unwrap();
        let c = draw_population_covariance(&two, 4, 3).unwrap();
        let d = eig_sym(&c).unwrap();
        let expected = [1.5, 1.5, 0.5, 0.5];
        for (got, want) in d.eigenvalues().iter().zip(expected) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }
}
