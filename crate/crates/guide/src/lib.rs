//! mdbook cannot link crate dependencies into its snippet tests, so each
//! chapter is pulled in here and `cargo test` runs its code blocks as
//! doc-tests.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/detectors.md")]
pub mod detectors {}
#[doc = include_str!("../../../book/src/shrinkage.md")]
pub mod shrinkage {}
#[doc = include_str!("../../../book/src/divergence.md")]
pub mod divergence {}
#[doc = include_str!("../../../book/src/spectra.md")]
pub mod spectra {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
