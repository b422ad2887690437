//! Fence detection with a bank of oriented Gabor filters.
//!
//! Each orientation is filtered with a zero-mean Gabor kernel and the
//! absolute responses are fused by a pointwise maximum. Thresholding the
//! fused response (Otsu by default) marks the neighbourhood of the fence:
//! a narrow-band Gabor rings on both sides of a thin bar, so the response
//! alone over-covers the fence by a few pixels. Inside that neighbourhood
//! the gray levels split into two classes and the class concentrated in
//! the neighbourhood is kept as the fence. A final 3x3 dilation makes the
//! mask cover the full fence thickness.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imgcore::threshold::otsu_threshold;
use crate::imgcore::{convolve, ImagePlane, Kernel2D};
use crate::mask::FenceMask;

/// Fused responses below this fraction of `255 * sum|k|` never count as fence.
const RESPONSE_FLOOR: f64 = 0.02;
const OTSU_BINS: usize = 256;

/// Parameters of `exp(-(x'^2 + gamma^2 y'^2) / 2 sigma^2) * cos(2 pi x' / lambda + psi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborParams {
    pub wavelength: f64,
    pub orientation_deg: f64,
    pub phase: f64,
    pub sigma: f64,
    pub aspect: f64,
}

impl Default for GaborParams {
    /// lambda = 4, psi = 0, sigma = 4, gamma = 0.5, theta = 0.
    fn default() -> Self {
        Self {
            wavelength: 4.0,
            orientation_deg: 0.0,
            phase: 0.0,
            sigma: 4.0,
            aspect: 0.5,
        }
    }
}

impl GaborParams {
    pub fn new(wavelength: f64, orientation_deg: f64, phase: f64, sigma: f64, aspect: f64) -> Result<Self> {
        Self {
            wavelength,
            orientation_deg,
            phase,
            sigma,
            aspect,
        }
        .validated()
    }

    pub fn with_orientation(self, orientation_deg: f64) -> Result<Self> {
        Self {
            orientation_deg,
            ..self
        }
        .validated()
    }

    fn validated(mut self) -> Result<Self> {
        if !(self.wavelength > 1.0 && self.wavelength.is_finite()) {
            return Err(Error::invalid(format!(
                "gabor wavelength must exceed 1 pixel, got {}",
                self.wavelength
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("gabor sigma must be positive, got {}", self.sigma)));
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(Error::invalid(format!("gabor aspect must be positive, got {}", self.aspect)));
        }
        if !self.orientation_deg.is_finite() || !self.phase.is_finite() {
            return Err(Error::invalid("gabor orientation and phase must be finite"));
        }
        self.orientation_deg = self.orientation_deg.rem_euclid(360.0);
        Ok(self)
    }

    /// Kernel half-size: three envelope widths along the longer axis.
    pub fn radius(&self) -> usize {
        (3.0 * self.sigma / self.aspect.min(1.0)).ceil() as usize
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let theta = self.orientation_deg.to_radians();
        let (s, c) = theta.sin_cos();
        let xr = x * c + y * s;
        let yr = -x * s + y * c;
        let envelope =
            (-(xr * xr + self.aspect * self.aspect * yr * yr) / (2.0 * self.sigma * self.sigma)).exp();
        envelope * (2.0 * PI * xr / self.wavelength + self.phase).cos()
    }
}

/// Samples the Gabor function on a square grid of side `2 * radius + 1`.
pub fn gabor_kernel(p: &GaborParams) -> Result<Kernel2D> {
    let p = p.validated()?;
    let r = p.radius();
    Ok(Kernel2D::from_fn(r, r, |dx, dy| p.eval(dx as f64, dy as f64)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Otsu,
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct GaborDetector {
    pub thetas_deg: Vec<f64>,
    pub base: GaborParams,
    pub threshold: Threshold,
    pub dilate_iters: usize,
    /// Split the detected neighbourhood by gray level and keep the class
    /// concentrated there. Disable to get the raw thresholded response.
    pub refine: bool,
}

impl Default for GaborDetector {
    fn default() -> Self {
        Self {
            thetas_deg: vec![0.0, 90.0],
            base: GaborParams::default(),
            threshold: Threshold::Otsu,
            dilate_iters: 1,
            refine: true,
        }
    }
}

impl GaborDetector {
    pub fn new(thetas_deg: Vec<f64>, base: GaborParams) -> Self {
        Self {
            thetas_deg,
            base,
            ..Self::default()
        }
    }

    /// Pointwise maximum of the absolute zero-mean Gabor responses, and
    /// the response floor for that bank.
    pub fn fused_response(&self, gray: &ImagePlane) -> Result<(ImagePlane, f64)> {
        if self.thetas_deg.is_empty() {
            return Err(Error::invalid("at least one gabor orientation is required"));
        }
        let mut fused = ImagePlane::new(gray.width(), gray.height());
        let mut floor: f64 = 0.0;
        for &theta in &self.thetas_deg {
            let k = gabor_kernel(&self.base.with_orientation(theta)?)?.zero_mean();
            let gain: f64 = k.taps().iter().map(|t| t.abs()).sum();
            floor = floor.max(RESPONSE_FLOOR * 255.0 * gain);
            let r = convolve(gray, &k)?;
            for (f, v) in fused.data_mut().iter_mut().zip(r.data()) {
                *f = f.max(v.abs());
            }
        }
        Ok((fused, floor))
    }

    pub fn detect(&self, gray: &ImagePlane) -> Result<FenceMask> {
        let (w, h) = gray.dims();
        let (fused, floor) = self.fused_response(gray)?;
        let cut = match self.threshold {
            Threshold::Fixed(t) => t,
            Threshold::Otsu => match otsu_threshold(fused.data(), OTSU_BINS) {
                Some(t) => t.max(floor),
                None => return Ok(FenceMask::all_valid(w, h)),
            },
        };
        let hood = FenceMask::from_fence_fn(w, h, |x, y| {
            let v = fused.get(x, y);
            v >= cut && v > 0.0
        })
        .dilate(self.dilate_iters);
        if !self.refine || hood.fence_count() == 0 {
            return Ok(hood);
        }
        Ok(refine_by_intensity(gray, &hood).dilate(self.dilate_iters))
    }
}

/// Keeps the gray-level class of `hood` that is most concentrated inside it.
fn refine_by_intensity(gray: &ImagePlane, hood: &FenceMask) -> FenceMask {
    let (w, h) = gray.dims();
    let inside: Vec<f64> = gray
        .data()
        .iter()
        .zip(hood.valid_bits())
        .filter(|(_, &valid)| !valid)
        .map(|(&v, _)| v)
        .collect();
    let Some(t) = otsu_threshold(&inside, OTSU_BINS) else {
        return hood.clone();
    };
    let (mut low_in, mut low_all, mut high_in, mut high_all) = (0usize, 0usize, 0usize, 0usize);
    for (&v, &valid) in gray.data().iter().zip(hood.valid_bits()) {
        if v < t {
            low_all += 1;
            low_in += usize::from(!valid);
        } else {
            high_all += 1;
            high_in += usize::from(!valid);
        }
    }
    let share = |inn: usize, all: usize| if all == 0 { 0.0 } else { inn as f64 / all as f64 };
    let keep_low = share(low_in, low_all) >= share(high_in, high_all);
    FenceMask::from_fence_fn(w, h, |x, y| {
        hood.is_fence(x, y) && ((gray.get(x, y) < t) == keep_low)
    })
}

/// Detects fence pixels with the given orientations and base parameters.
pub fn detect_fence_gabor(
    gray: &ImagePlane,
    thetas_deg: &[f64],
    base: &GaborParams,
    threshold: Threshold,
    dilate_iters: usize,
) -> Result<FenceMask> {
    GaborDetector {
        thetas_deg: thetas_deg.to_vec(),
        base: *base,
        threshold,
        dilate_iters,
        refine: true,
    }
    .detect(gray)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(theta: f64) -> GaborParams {
        GaborParams::new(4.0, theta, 0.0, 4.0, 0.5).unwrap()
    }

    #[test]
    fn kernel_size_follows_envelope() {
        let k = gabor_kernel(&params(0.0)).unwrap();
        assert_eq!(k.width(), 2 * 24 + 1);
        let k = gabor_kernel(&GaborParams::new(4.0, 0.0, 0.0, 2.0, 2.0).unwrap()).unwrap();
        assert_eq!(k.width(), 13);
    }

    #[test]
    fn origin_tap_is_one() {
        for (lambda, sigma, gamma) in [(4.0, 4.0, 0.5), (7.5, 1.3, 1.0), (2.5, 3.0, 2.0)] {
            let k = gabor_kernel(&GaborParams::new(lambda, 0.0, 0.0, sigma, gamma).unwrap()).unwrap();
            assert!((k.center() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn half_turn_is_point_reflection() {
        let a = gabor_kernel(&params(0.0)).unwrap();
        let b = gabor_kernel(&params(180.0)).unwrap();
        let r = a.half_width() as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                assert!((a.at(dx, dy) - b.at(-dx, -dy)).abs() < 1e-12);
                assert!((a.at(dx, dy) - b.at(dx, dy)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_tap_matches_direct_evaluation() {
        // x' = sqrt(2), y' = 0: exp(-2/32) * cos(2 pi sqrt(2) / 4)
        let k = gabor_kernel(&params(45.0)).unwrap();
        assert!((k.at(1, 1) - (-0.569_002_367_278_223_3)).abs() < 1e-12);
    }

    #[test]
    fn orientation_is_normalized() {
        assert_eq!(params(405.0).orientation_deg, 45.0);
        assert_eq!(params(-90.0).orientation_deg, 270.0);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GaborParams::new(1.0, 0.0, 0.0, 4.0, 0.5).is_err());
        assert!(GaborParams::new(4.0, 0.0, 0.0, 0.0, 0.5).is_err());
        assert!(GaborParams::new(4.0, 0.0, 0.0, 4.0, -1.0).is_err());
    }

    #[test]
    fn empty_theta_list_rejected() {
        let err = detect_fence_gabor(&ImagePlane::new(32, 32), &[], &params(0.0), Threshold::Otsu, 1);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn constant_image_has_no_fence() {
        let img = ImagePlane::filled(64, 48, 173.0);
        let m = detect_fence_gabor(&img, &[45.0, 225.0], &params(0.0), Threshold::Otsu, 1).unwrap();
        assert_eq!(m.fence_count(), 0);
        assert_eq!(m.dims(), (64, 48));
    }
}
