//! Training-dynamics toolkit: SGD on small ReLU networks and the two-layer
//! linear `uv` model, Hessian sharpness probes, catapult detection and
//! early-training phase diagrams.
//!
//! Module map:
//!
//! - [`numkit`]: dense matrices, seeded RNG, power iteration, Jacobi
//!   eigensolver, Savitzky–Golay filtering and polynomial fits.
//! - [`autodiff`]: reverse-mode tape with tangent propagation for exact
//!   Hessian-vector products.
//! - [`models`]: NTP fully connected networks and the `uv` model.
//! - [`data`]: synthetic Gaussian classes, IDX readers, batch sampling.
//! - [`training`]: SGD with `eta = c / lambda_0`, trajectories and the
//!   sharpness probe.
//! - [`phases`]: critical constants, interpolation barriers, saturation
//!   curves, `c_crit` and regime segmentation.
//! - [`uvlab`]: closed forms and Monte Carlo validators for the `uv` model.
//! - [`cli`]: manifests, sweeps, persistence and SVG rendering.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod models;
pub mod numkit;
pub mod phases;
pub mod provenance;
pub mod training;
pub mod uvlab;

pub use error::{Error, Result};
