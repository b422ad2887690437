//! Matrix-free linear operators of the degradation model and their adjoints.

use crate::error::{Error, Result};
use crate::imgcore::{convolve, convolve_adjoint, ImagePlane, Kernel2D};
use crate::mask::FenceMask;
use crate::motion::{BilinearWarp, FlowField, GlobalShift};

/// A linear map with an exact transpose.
pub trait LinearOperator {
    type Domain;
    type Range;

    fn forward(&self, x: &Self::Domain) -> Self::Range;
    fn adjoint(&self, y: &Self::Range) -> Self::Domain;
}

/// Horizontal and vertical components of an image gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct GradPair {
    pub gx: ImagePlane,
    pub gy: ImagePlane,
}

impl GradPair {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            gx: ImagePlane::new(width, height),
            gy: ImagePlane::new(width, height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.gx.dims()
    }

    pub fn dot(&self, other: &GradPair) -> f64 {
        self.gx.dot(&other.gx) + self.gy.dot(&other.gy)
    }

    pub fn norm_sq(&self) -> f64 {
        self.gx.norm_sq() + self.gy.norm_sq()
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &GradPair, b: f64) -> GradPair {
        GradPair {
            gx: self.gx.lincomb(a, &other.gx, b),
            gy: self.gy.lincomb(a, &other.gy, b),
        }
    }

    pub fn add(&self, other: &GradPair) -> GradPair {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &GradPair) -> GradPair {
        self.lincomb(1.0, other, -1.0)
    }
}

/// Forward differences; the last column of `gx` and last row of `gy` are 0.
pub fn grad(x: &ImagePlane) -> GradPair {
    let (w, h) = x.dims();
    let mut g = GradPair::zeros(w, h);
    let src = x.data();
    let gx = g.gx.data_mut();
    for y in 0..h {
        let row = y * w;
        for i in 0..w - 1 {
            gx[row + i] = src[row + i + 1] - src[row + i];
        }
    }
    let gy = g.gy.data_mut();
    for y in 0..h - 1 {
        let row = y * w;
        for i in 0..w {
            gy[row + i] = src[row + w + i] - src[row + i];
        }
    }
    g
}

/// Exact transpose of [`grad`] (a negative divergence).
pub fn grad_adjoint(g: &GradPair) -> ImagePlane {
    let (w, h) = g.dims();
    let mut out = ImagePlane::new(w, h);
    let gx = g.gx.data();
    let gy = g.gy.data();
    let dst = out.data_mut();
    for y in 0..h {
        let row = y * w;
        for i in 0..w {
            let mut v = 0.0;
            if i + 1 < w {
                v -= gx[row + i];
            }
            if i >= 1 {
                v += gx[row + i - 1];
            }
            if y + 1 < h {
                v -= gy[row + i];
            }
            if y >= 1 {
                v += gy[row - w + i];
            }
            dst[row + i] = v;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Gradient;

impl LinearOperator for Gradient {
    type Domain = ImagePlane;
    type Range = GradPair;

    fn forward(&self, x: &ImagePlane) -> GradPair {
        grad(x)
    }

    fn adjoint(&self, g: &GradPair) -> ImagePlane {
        grad_adjoint(g)
    }
}

impl LinearOperator for BilinearWarp {
    type Domain = ImagePlane;
    type Range = ImagePlane;

    fn forward(&self, x: &ImagePlane) -> ImagePlane {
        BilinearWarp::forward(self, x)
    }

    fn adjoint(&self, y: &ImagePlane) -> ImagePlane {
        BilinearWarp::adjoint(self, y)
    }
}

/// Convolution with a point spread function, replicated border.
#[derive(Clone, Debug)]
pub struct Blur {
    psf: Kernel2D,
}

impl Blur {
    pub fn new(psf: Kernel2D) -> Self {
        Self { psf }
    }

    pub fn psf(&self) -> &Kernel2D {
        &self.psf
    }

    /// Upper bound on the operator 2-norm.
    pub fn norm_bound(&self) -> f64 {
        self.psf.taps().iter().map(|t| t.abs()).sum()
    }
}

impl LinearOperator for Blur {
    type Domain = ImagePlane;
    type Range = ImagePlane;

    fn forward(&self, x: &ImagePlane) -> ImagePlane {
        convolve(x, &self.psf).expect("psf checked against frame size")
    }

    fn adjoint(&self, y: &ImagePlane) -> ImagePlane {
        convolve_adjoint(y, &self.psf).expect("psf checked against frame size")
    }
}

/// Diagonal 0/1 selection of observed pixels; self-adjoint.
#[derive(Clone, Debug)]
pub struct MaskOp {
    weights: ImagePlane,
}

impl MaskOp {
    pub fn new(mask: &FenceMask) -> Self {
        Self {
            weights: mask.to_weights(),
        }
    }

    fn apply(&self, x: &ImagePlane) -> ImagePlane {
        let mut out = x.clone();
        for (o, w) in out.data_mut().iter_mut().zip(self.weights.data()) {
            *o *= w;
        }
        out
    }
}

impl LinearOperator for MaskOp {
    type Domain = ImagePlane;
    type Range = ImagePlane;

    fn forward(&self, x: &ImagePlane) -> ImagePlane {
        self.apply(x)
    }

    fn adjoint(&self, y: &ImagePlane) -> ImagePlane {
        self.apply(y)
    }
}

/// Where frame `m` comes from relative to the latent image.
#[derive(Clone, Debug)]
pub enum Motion {
    /// `frame(p) = x(p + w(p))`, a backward warp field in frame coordinates.
    Warp(FlowField),
    /// `frame(p) = x(p - shift)`.
    Shift(GlobalShift),
}

impl Motion {
    pub fn identity() -> Self {
        Motion::Shift(GlobalShift::default())
    }

    pub fn warp_field(&self, width: usize, height: usize) -> FlowField {
        match self {
            Motion::Warp(f) => f.clone(),
            Motion::Shift(s) => FlowField::constant(width, height, -s.dx, -s.dy),
        }
    }
}

/// One observed channel of one frame with the data that defines its
/// degradation operator `O H W`.
#[derive(Clone, Debug)]
pub struct FrameObservation {
    pub y: ImagePlane,
    pub mask: FenceMask,
    pub motion: Motion,
    pub psf: Kernel2D,
}

impl FrameObservation {
    pub fn new(y: ImagePlane, mask: FenceMask, motion: Motion) -> Self {
        Self {
            y,
            mask,
            motion,
            psf: Kernel2D::identity(),
        }
    }

    pub fn operator(&self) -> Result<FrameOperator> {
        FrameOperator::new(&self.mask, &self.motion, &self.psf)
    }
}

/// Precomputed `A = O H W` for one frame; shared by all color channels.
#[derive(Clone, Debug)]
pub struct FrameOperator {
    warp: BilinearWarp,
    blur: Option<Blur>,
    mask: MaskOp,
    effective: FenceMask,
}

impl FrameOperator {
    /// The observation mask is the fence mask AND the warp validity map;
    /// with a blur, pixels within the psf radius of an invalid warp sample
    /// are dropped as well.
    pub fn new(mask: &FenceMask, motion: &Motion, psf: &Kernel2D) -> Result<Self> {
        let (w, h) = mask.dims();
        let field = motion.warp_field(w, h);
        if field.dims() != (w, h) {
            return Err(Error::invalid(format!(
                "flow is {}x{} but mask is {w}x{h}",
                field.width(),
                field.height()
            )));
        }
        let warp = BilinearWarp::new(&field);
        let blur = if psf.is_identity() {
            None
        } else {
            if psf.width() > 2 * w || psf.height() > 2 * h {
                return Err(Error::invalid("psf larger than twice the frame"));
            }
            Some(Blur::new(psf.clone()))
        };
        let mut validity = warp.validity().clone();
        if blur.is_some() {
            let grow = psf.half_width().max(psf.half_height());
            validity = validity.dilate(grow);
        }
        let effective = mask.and(&validity)?;
        Ok(Self {
            warp,
            blur,
            mask: MaskOp::new(&effective),
            effective,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.warp.dims()
    }

    /// Pixels that carry data after masking.
    pub fn effective_mask(&self) -> &FenceMask {
        &self.effective
    }

    /// Upper bound on `||A||^2` from the column and row sums of the warp
    /// and the absolute tap sum of the psf.
    pub fn norm_sq_bound(&self) -> f64 {
        let (w, h) = self.dims();
        let ones = ImagePlane::filled(w, h, 1.0);
        let col_sums = self.warp.adjoint(&ones);
        let max_col = col_sums.data().iter().cloned().fold(0.0, f64::max);
        let blur = self.blur.as_ref().map_or(1.0, Blur::norm_bound);
        max_col.max(1.0) * blur * blur
    }
}

impl LinearOperator for FrameOperator {
    type Domain = ImagePlane;
    type Range = ImagePlane;

    fn forward(&self, x: &ImagePlane) -> ImagePlane {
        let warped = self.warp.forward(x);
        let blurred = match &self.blur {
            Some(b) => b.forward(&warped),
            None => warped,
        };
        self.mask.forward(&blurred)
    }

    fn adjoint(&self, r: &ImagePlane) -> ImagePlane {
        let masked = self.mask.adjoint(r);
        let blurred = match &self.blur {
            Some(b) => b.adjoint(&masked),
            None => masked,
        };
        self.warp.adjoint(&blurred)
    }
}

/// `O H W x` for one observation.
pub fn apply_forward(obs: &FrameObservation, x: &ImagePlane) -> Result<ImagePlane> {
    obs.y.ensure_same_dims(x, "apply_forward")?;
    Ok(obs.operator()?.forward(x))
}

/// `W^T H^T O^T r` for one observation.
pub fn apply_adjoint(obs: &FrameObservation, r: &ImagePlane) -> Result<ImagePlane> {
    obs.y.ensure_same_dims(r, "apply_adjoint")?;
    Ok(obs.operator()?.adjoint(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grad(&ImagePlane::filled(5, 4, 9.0));
        assert_eq!(g.norm_sq(), 0.0);
    }

    #[test]
    fn gradient_of_ramp() {
        let g = grad(&ImagePlane::from_fn(6, 5, |x, _| 2.0 * x as f64));
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(g.gx.get(x, y), 2.0);
            }
            assert_eq!(g.gx.get(5, y), 0.0);
        }
        assert_eq!(g.gy.norm_sq(), 0.0);
    }

    #[test]
    fn gradient_adjoint_matches_explicit_transpose() {
        let (w, h) = (8, 8);
        let n = w * h;
        // Dense matrix of grad: rows are (gx, gy) stacked.
        let mut mat = vec![vec![0.0; n]; 2 * n];
        for j in 0..n {
            let mut e = ImagePlane::new(w, h);
            e.data_mut()[j] = 1.0;
            let g = grad(&e);
            for i in 0..n {
                mat[i][j] = g.gx.data()[i];
                mat[n + i][j] = g.gy.data()[i];
            }
        }
        for i in 0..2 * n {
            let mut g = GradPair::zeros(w, h);
            if i < n {
                g.gx.data_mut()[i] = 1.0;
            } else {
                g.gy.data_mut()[i - n] = 1.0;
            }
            let col = grad_adjoint(&g);
            for j in 0..n {
                assert_eq!(col.data()[j], mat[i][j]);
            }
        }
    }

    fn obs(mask: FenceMask, motion: Motion) -> FrameObservation {
        let (w, h) = mask.dims();
        FrameObservation::new(ImagePlane::new(w, h), mask, motion)
    }

    #[test]
    fn identity_observation_is_identity() {
        let x = ImagePlane::from_fn(7, 6, |x, y| (x * 3 + y * 5) as f64);
        let o = obs(FenceMask::all_valid(7, 6), Motion::identity());
        assert_eq!(apply_forward(&o, &x).unwrap(), x);
        assert_eq!(apply_adjoint(&o, &x).unwrap(), x);
    }

    #[test]
    fn fence_everywhere_annihilates() {
        let x = ImagePlane::from_fn(7, 6, |x, y| (x * 3 + y * 5) as f64 + 1.0);
        let o = obs(FenceMask::all_fence(7, 6), Motion::identity());
        assert_eq!(apply_forward(&o, &x).unwrap().norm_sq(), 0.0);
    }

    #[test]
    fn integer_shift_matches_direct_construction() {
        let (w, h) = (32, 28);
        let x = ImagePlane::from_fn(w, h, |x, y| ((x * 13 + y * 7) % 29) as f64);
        let mask = FenceMask::from_fence_fn(w, h, |px, _| px % 9 < 2);
        let o = obs(mask.clone(), Motion::Shift(GlobalShift::new(8.0, 8.0)));
        let got = apply_forward(&o, &x).unwrap();
        for py in 0..h {
            for px in 0..w {
                let inside = px >= 8 && py >= 8;
                let expected = if inside && mask.is_valid(px, py) {
                    x.get(px - 8, py - 8)
                } else {
                    0.0
                };
                assert_eq!(got.get(px, py), expected, "({px},{py})");
            }
        }
    }

    #[test]
    fn blur_shrinks_effective_mask_near_invalid_samples() {
        let mut o = obs(FenceMask::all_valid(20, 20), Motion::Shift(GlobalShift::new(3.0, 0.0)));
        o.psf = crate::imgcore::gaussian_kernel(0.5).unwrap();
        let op = o.operator().unwrap();
        // Columns 0..3 sample outside; psf radius 2 removes two more.
        assert!(op.effective_mask().is_fence(4, 10));
        assert!(op.effective_mask().is_valid(5, 10));
    }
}
