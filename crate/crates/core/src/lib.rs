//! Color image restoration with double-opponent vectorial total variation.
//!
//! Images are RGB in `[0, 1]`, stored channel-stacked (`[R; G; B]`, each
//! plane row-major). Two solvers minimize the same family of energies:
//! a half-quadratic (IRLS style) scheme in [`hqa`] and split-Bregman in
//! [`bregman`].

pub mod bregman;
pub mod cg;
pub mod cli;
pub mod color;
pub mod config;
pub mod degradation;
pub mod error;
pub mod hqa;
pub mod image;
pub mod io;
pub mod metrics;
pub mod model;
pub mod operators;
pub mod trace;

pub use bregman::{bregman_solve, split_objective, SplitBregman};
pub use config::SolverConfig;
pub use error::{Error, Result};
pub use hqa::{energy_phi, hqa_solve, Solution};
pub use image::{Dims, FlatField, ImageRgb};
pub use metrics::{evaluate, MetricsReport};
pub use operators::{Blur, BlurKernel, ForwardModel, LinearMap, Mask, MaskOp};
pub use trace::ConvergenceTrace;
