//! Quasi-Monte Carlo uncertainty quantification for elliptic PDEs whose
//! random diffusion coefficient is driven by generalized β-Gaussian
//! parameters with Gevrey-regular dependence.
//!
//! The crate is organized around the pipeline used by the convergence
//! studies in [`studies`]:
//!
//! 1. [`betagauss`] — the β-Gaussian distribution 𝒩_β(0,1): density, CDF,
//!    inverse CDF and moment integrals, backed by regularized incomplete
//!    gamma functions and an adaptive 1D quadrature oracle.
//! 2. [`regularity`] — multi-index machinery, the abstract recurrence bound
//!    and its closed form, plus a finite-difference harness that checks the
//!    Gevrey derivative bound for concrete fields.
//! 3. [`weights`] — the kernel constant K, the λ selection rule and the
//!    POD (product-and-order-dependent) quadrature weights.
//! 4. [`lattice`] — rank-1 lattice rules, random shifting and the fast
//!    component-by-component construction of generating vectors.
//! 5. [`field`] — the random diffusion coefficient families and their
//!    coordinate sequences.
//! 6. [`fem`] — P1 finite elements on uniform triangulations of (0,1)².
//! 7. [`studies`] — the three convergence experiments (QMC, dimension
//!    truncation, finite element) with RMS statistics and log-log rate fits.

pub mod betagauss;
pub mod config;
pub mod error;
pub mod fem;
pub mod field;
pub mod lattice;
pub mod quadrature;
pub mod regularity;
pub mod rng;
pub mod special;
pub mod studies;
pub mod weights;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
