//! Normal-mode acoustics toolkit for estimating the depth of a fixed-range
//! monoharmonic source from a single vertical line array (VLA) snapshot,
//! without seabed parameters.
//!
//! The pipeline has three stages:
//!
//! 1. [`modes`] / [`field`] — forward model: trapped normal modes of a
//!    range-independent waveguide and the complex pressure they produce on
//!    the array (the truth model uses a fluid halfspace bottom).
//! 2. [`ocms`] — orthogonality-constrained modal search: from one snapshot,
//!    estimate modal wavenumbers, mode depth functions and complex mode
//!    amplitudes by a scalar search over an anchor wavenumber with an
//!    L1-sparse (basis pursuit denoising) amplitude fit at each anchor.
//! 3. [`dss`] — depth-sign search: enumerate mode-sign hypotheses along
//!    depth, score each sign-compensated ambiguity function against a
//!    Dirichlet-kernel template by KL divergence, and read the source depth
//!    off the best-scoring ambiguity function.
//!
//! [`harness`] adds Monte-Carlo sweeps, error metrics and narrowband
//! snapshot extraction from multichannel time series; [`io`] and [`plot`]
//! handle the on-disk formats used by the CLI.

pub mod config;
pub mod dss;
pub mod env;
pub mod error;
pub mod field;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod modes;
pub mod ocms;
pub mod plot;
pub mod special;

pub use error::{Error, Result};
