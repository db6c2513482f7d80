//! Quickest detection of a change from `N(0, I)` to an unknown Gaussian
//! `N(μ, Σ)` in high dimension, with window-limited CuSum plug-in detectors
//! and Ledoit–Wolf inverse-Stein covariance shrinkage.
//!
//! ```
//! use hdqcd::detect::{cusum_run, DetectorConfig};
//! use hdqcd::divergence::GaussianParams;
//! use nalgebra::{DMatrix, DVector};
//!
//! let post = GaussianParams::new(DVector::from_vec(vec![1.0]), DMatrix::identity(1, 1)).unwrap();
//! let stream = std::iter::repeat(DVector::from_vec(vec![1.5]));
//! let rec = cusum_run(stream, &post, &DetectorConfig::new(3.5, 0, 100)).unwrap();
//! assert_eq!(rec.time, 4);
//! ```

pub mod detect;
pub mod divergence;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod sim;
pub mod spectra;

pub use error::{Error, Result};
