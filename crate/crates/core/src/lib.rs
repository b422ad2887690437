//! Multi-frame image de-fencing.
//!
//! Fence pixels are detected per frame ([`fencegabor`] or [`fencesvm`]),
//! the motion of each frame relative to a reference is estimated
//! ([`motion`]), and the occlusion-free image is recovered by total
//! variation regularized least squares solved with split Bregman
//! iterations ([`solver`]). [`synth`] builds translated, fenced test
//! sequences with known ground truth and [`pipeline`] wires the stages
//! together.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fencegabor;
pub mod fencesvm;
pub mod imgcore;
pub mod mask;
pub mod motion;
pub mod pipeline;
pub mod score;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use imgcore::{ColorImage, ImagePlane, Kernel2D};
pub use mask::FenceMask;
pub use motion::{FlowField, GlobalShift};
pub use solver::{ConvergenceRecord, SolverParams};
