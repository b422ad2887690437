//! Coarse-to-fine Horn-Schunck optical flow.

use crate::error::{Error, Result};
use crate::imgcore::{gaussian_blur, ImagePlane};
use crate::motion::FlowField;

/// Smallest side allowed at the coarsest pyramid level.
pub const MIN_LEVEL_SIDE: usize = 16;
const MAX_AUTO_LEVELS: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    /// Pyramid depth; `None` picks the deepest pyramid whose coarsest side
    /// is at least [`MIN_LEVEL_SIDE`].
    pub levels: Option<usize>,
    pub scale_factor: f64,
    /// Smoothness weight on the 0..255 intensity scale.
    pub alpha: f64,
    /// Jacobi sweeps per linearization.
    pub iters: usize,
    /// Re-linearizations (target re-warps) per level.
    pub warps: usize,
    /// Gaussian pre-smoothing of both inputs; 0 disables it.
    pub presmooth_sigma: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            levels: None,
            scale_factor: 0.5,
            alpha: 15.0,
            iters: 100,
            warps: 3,
            presmooth_sigma: 1.5,
        }
    }
}

/// Replaceable dense motion estimator.
pub trait FlowEstimator {
    /// Flow such that `reference(p) ~ target(p + flow(p))`.
    fn estimate(&self, reference: &ImagePlane, target: &ImagePlane) -> Result<FlowField>;
}

impl FlowEstimator for FlowParams {
    fn estimate(&self, reference: &ImagePlane, target: &ImagePlane) -> Result<FlowField> {
        estimate_flow(reference, target, self)
    }
}

/// Gaussian smoothing applied to observations before flow estimation.
pub fn presmooth(img: &ImagePlane, sigma: f64) -> Result<ImagePlane> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::invalid(format!("presmooth sigma must be >= 0, got {sigma}")));
    }
    gaussian_blur(img, sigma)
}

fn level_dims(w: usize, h: usize, scale: f64, level: usize) -> (usize, usize) {
    let f = scale.powi(level as i32);
    (
        ((w as f64 * f).round() as usize).max(1),
        ((h as f64 * f).round() as usize).max(1),
    )
}

fn auto_levels(w: usize, h: usize, scale: f64) -> usize {
    let mut levels = 1;
    while levels < MAX_AUTO_LEVELS {
        let (lw, lh) = level_dims(w, h, scale, levels);
        if lw.min(lh) < MIN_LEVEL_SIDE {
            break;
        }
        levels += 1;
    }
    levels
}

fn downsample(img: &ImagePlane, w: usize, h: usize, scale: f64) -> Result<ImagePlane> {
    // Anti-alias before decimation.
    let sigma = (1.0 / scale - 1.0).max(0.0) * 0.8;
    let blurred = if sigma > 0.0 { gaussian_blur(img, sigma)? } else { img.clone() };
    Ok(blurred.resize_bilinear(w, h))
}

/// Central differences with replicated borders.
fn gradients(img: &ImagePlane) -> (ImagePlane, ImagePlane) {
    let (w, h) = img.dims();
    let gx = ImagePlane::from_fn(w, h, |x, y| {
        0.5 * (img.get_clamped(x as isize + 1, y as isize) - img.get_clamped(x as isize - 1, y as isize))
    });
    let gy = ImagePlane::from_fn(w, h, |x, y| {
        0.5 * (img.get_clamped(x as isize, y as isize + 1) - img.get_clamped(x as isize, y as isize - 1))
    });
    (gx, gy)
}

/// Horn-Schunck neighbourhood average: 1/6 on edge neighbours, 1/12 on
/// diagonals.
fn neighbour_mean(p: &ImagePlane, out: &mut ImagePlane) {
    let (w, h) = p.dims();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let edge = p.get_clamped(x - 1, y)
                + p.get_clamped(x + 1, y)
                + p.get_clamped(x, y - 1)
                + p.get_clamped(x, y + 1);
            let diag = p.get_clamped(x - 1, y - 1)
                + p.get_clamped(x + 1, y - 1)
                + p.get_clamped(x - 1, y + 1)
                + p.get_clamped(x + 1, y + 1);
            out.set(x as usize, y as usize, edge / 6.0 + diag / 12.0);
        }
    }
}

/// `target` sampled at `p + flow(p)`, replicating the border.
fn warp_clamped(target: &ImagePlane, u: &ImagePlane, v: &ImagePlane) -> ImagePlane {
    ImagePlane::from_fn(target.width(), target.height(), |x, y| {
        target.sample_bilinear_clamped(x as f64 + u.get(x, y), y as f64 + v.get(x, y))
    })
}

fn refine_level(
    reference: &ImagePlane,
    target: &ImagePlane,
    u: &mut ImagePlane,
    v: &mut ImagePlane,
    p: &FlowParams,
) {
    let (w, h) = reference.dims();
    let alpha2 = p.alpha * p.alpha;
    let (rgx, rgy) = gradients(reference);
    let mut ubar = ImagePlane::new(w, h);
    let mut vbar = ImagePlane::new(w, h);
    for _ in 0..p.warps.max(1) {
        let warped = warp_clamped(target, u, v);
        let (tgx, tgy) = gradients(&warped);
        let ix = tgx.lincomb(0.5, &rgx, 0.5);
        let iy = tgy.lincomb(0.5, &rgy, 0.5);
        let it = warped.sub(reference);
        let (u0, v0) = (u.clone(), v.clone());
        for _ in 0..p.iters {
            neighbour_mean(u, &mut ubar);
            neighbour_mean(v, &mut vbar);
            for i in 0..w * h {
                let (gx, gy) = (ix.data()[i], iy.data()[i]);
                let (ub, vb) = (ubar.data()[i], vbar.data()[i]);
                let r = gx * (ub - u0.data()[i]) + gy * (vb - v0.data()[i]) + it.data()[i];
                let k = r / (alpha2 + gx * gx + gy * gy);
                u.data_mut()[i] = ub - gx * k;
                v.data_mut()[i] = vb - gy * k;
            }
        }
    }
}

/// Dense flow from `reference` to `target` (see [`FlowEstimator`]).
pub fn estimate_flow(reference: &ImagePlane, target: &ImagePlane, p: &FlowParams) -> Result<FlowField> {
    reference.ensure_same_dims(target, "flow")?;
    if !(p.scale_factor > 0.0 && p.scale_factor < 1.0) {
        return Err(Error::invalid("pyramid scale factor must lie in (0, 1)"));
    }
    if !(p.alpha > 0.0) {
        return Err(Error::invalid("flow smoothness alpha must be positive"));
    }
    let (w, h) = reference.dims();
    if w.min(h) < MIN_LEVEL_SIDE {
        return Err(Error::invalid(format!(
            "{w}x{h} image is too small for flow estimation (minimum side {MIN_LEVEL_SIDE})"
        )));
    }
    let levels = match p.levels {
        None => auto_levels(w, h, p.scale_factor),
        Some(0) => return Err(Error::invalid("pyramid needs at least one level")),
        Some(l) => {
            let (lw, lh) = level_dims(w, h, p.scale_factor, l - 1);
            if lw.min(lh) < MIN_LEVEL_SIDE {
                return Err(Error::invalid(format!(
                    "{l} pyramid levels shrink {w}x{h} below {MIN_LEVEL_SIDE} pixels"
                )));
            }
            l
        }
    };

    let r0 = presmooth(reference, p.presmooth_sigma)?;
    let t0 = presmooth(target, p.presmooth_sigma)?;
    let mut pyramid = vec![(r0, t0)];
    for level in 1..levels {
        let (lw, lh) = level_dims(w, h, p.scale_factor, level);
        let (pr, pt) = pyramid.last().unwrap();
        let next = (downsample(pr, lw, lh, p.scale_factor)?, downsample(pt, lw, lh, p.scale_factor)?);
        pyramid.push(next);
    }

    let (cw, ch) = pyramid.last().unwrap().0.dims();
    let mut u = ImagePlane::new(cw, ch);
    let mut v = ImagePlane::new(cw, ch);
    for (r, t) in pyramid.iter().rev() {
        let (lw, lh) = r.dims();
        if u.dims() != (lw, lh) {
            let sx = lw as f64 / u.width() as f64;
            let sy = lh as f64 / u.height() as f64;
            u = u.resize_bilinear(lw, lh).map(|x| x * sx);
            v = v.resize_bilinear(lw, lh).map(|x| x * sy);
        }
        refine_level(r, t, &mut u, &mut v, p);
    }
    FlowField::from_planes(u, v)
}
