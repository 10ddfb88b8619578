//! Reconstruction of spectral data cubes from single-shot coded measurements.
//!
//! The measurement model is a sum over bands of elementwise-masked planes
//! (see [`forward`]). Reconstruction alternates a generalized alternating
//! projection step with per-band total-variation denoising ([`gap`], [`tv`])
//! and refines each estimate with frequency-domain convolutional sparse
//! coding under a cross-band group-sparsity constraint ([`csc`]). The
//! [`pipeline`] module wires these stages together and [`metrics`] scores
//! the result.

pub mod cli;
pub mod csc;
pub mod cube;
pub mod error;
pub mod forward;
pub mod gap;
pub mod io;
pub mod metrics;
pub mod params;
pub mod pipeline;
pub mod synthetic;
pub mod tv;

pub use csc::{ConvDictionary, DictSpectrum};
pub use cube::{Image2D, Region, SpectralCube};
pub use error::{Error, Result};
pub use forward::{Measurement, SystemMasks};
pub use metrics::MetricsReport;
pub use params::SolverParams;
pub use pipeline::{Method, RunTrace};
