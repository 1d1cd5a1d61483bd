//! Simulation and estimation of operator-scaling Gaussian random fields.
//!
//! The crate synthesizes grid realizations of anisotropic Gaussian fields
//! from their harmonizable spectral representation and recovers the
//! anisotropy matrix and Hurst index from a single realization by sweeping
//! candidate anisotropies and maximizing wavelet-based smoothness
//! exponents.
//!
//! Modules follow the pipeline:
//! - [`linalg`]: generalized matrix powers, additive Jordan decomposition.
//! - [`pseudonorm`]: homogeneous gauges and anisotropic polar coordinates.
//! - [`synthesis`]: spectral synthesis of field realizations, variograms.
//! - [`wavelet`]: anisotropic multiresolution transform.
//! - [`besov`]: anisotropic Besov norms and critical-exponent estimation.
//! - [`estimate`]: the candidate sweep returning (E hat, H hat).
//! - [`io`]: file formats shared with the command-line front-end.
//! - [`selftest`]: reduced-scale invariant checks behind `osgrf selftest`.

pub mod besov;
pub mod estimate;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod pseudonorm;
pub mod rng;
pub mod selftest;
pub mod stats;
pub mod synthesis;
pub mod wavelet;

pub use grid::GridNd;
// Re-exports below fill in as modules land.
pub use linalg::AnisotropyMatrix;
