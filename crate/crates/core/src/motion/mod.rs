//! Inter-frame motion: global translation search, dense optical flow and
//! the bilinear warp that realizes a motion as a linear operator.

pub mod flo;
mod flow;
pub mod hs;
mod shift;
pub mod warp;

pub use flo::{read_flo, write_flo};
pub use flow::FlowField;
pub use hs::{estimate_flow, presmooth, FlowEstimator, FlowParams};
pub use shift::{estimate_global_shift, GlobalShift};
pub use warp::{warp_adjoint, warp_forward, BilinearWarp};
