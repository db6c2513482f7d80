//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance used for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-10;

pub(crate) fn check_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

pub(crate) fn check_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    Ok(())
}

/// Largest absolute entry of `A - Aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Fails unless `a` is square, finite and symmetric to within
/// [`SYMMETRY_TOL`] relative to its largest entry.
pub fn check_symmetric(a: &DMatrix<f64>, what: &str) -> Result<()> {
    check_square(a, what)?;
    check_finite(a, what)?;
    let scale = a.amax().max(1.0);
    let asym = asymmetry(a);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::SymmetryViolation { asymmetry: asym });
    }
    Ok(())
}

pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Cholesky factor together with `log|A|`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl CholeskyFactor {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(a, "covariance")?;
        let chol = Cholesky::new(symmetrize(a)).ok_or(Error::NotPositiveDefinite)?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Lower-triangular factor `L` with `A = L Lᵀ`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `L⁻¹ v`.
    pub fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `L⁻¹ M`.
    pub fn whiten_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(m)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `vᵀ A⁻¹ v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        self.whiten(v).norm_squared()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign convention that makes `R` have a positive diagonal).
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
