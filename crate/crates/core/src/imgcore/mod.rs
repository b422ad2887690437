//! Image containers, convolution, raster I/O and quality metrics.

pub mod io;
pub mod kernel;
pub mod metrics;
pub mod threshold;
mod plane;

pub use io::{read_gray, read_image, write_gray, write_image};
pub use kernel::{convolve, convolve_adjoint, gaussian_blur, gaussian_kernel, Kernel2D};
pub use metrics::{psnr, ssim};
pub use plane::{to_grayscale, ColorImage, ImagePlane};
