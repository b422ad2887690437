//! Multi-scale sliding-window fence detection.

use crate::error::{Error, Result};
use crate::fencesvm::hog::{hog, preprocess, HogConfig};
use crate::fencesvm::svm::SvmModel;
use crate::imgcore::ImagePlane;
use crate::mask::FenceMask;

#[derive(Clone, Debug, PartialEq)]
pub struct SvmScanParams {
    pub stride: usize,
    pub scales: Vec<f64>,
}

impl Default for SvmScanParams {
    fn default() -> Self {
        Self {
            stride: 8,
            scales: vec![1.0, 1.0 / 1.2, 1.0 / 1.44],
        }
    }
}

/// A window classified as fence, in scaled-image coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub scale: f64,
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

#[derive(Clone, Debug)]
pub struct SvmDetection {
    pub mask: FenceMask,
    pub detections: Vec<Detection>,
    /// Scales at which the window did not fit the resized image.
    pub skipped_scales: Vec<f64>,
}

/// Scans every scale top-to-bottom, left-to-right and stamps the template
/// of each positive window (mapped back to original coordinates) into the
/// mask. `template` defaults to an all-fence window.
pub fn detect_fence_svm(
    gray: &ImagePlane,
    model: &SvmModel,
    params: &SvmScanParams,
    template: Option<&FenceMask>,
) -> Result<SvmDetection> {
    if params.stride == 0 {
        return Err(Error::invalid("scan stride must be at least 1"));
    }
    if params.scales.is_empty() || params.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("scales must be positive"));
    }
    let cfg = HogConfig::with_window(model.window.0, model.window.1)?;
    if cfg.descriptor_len() != model.dim() {
        return Err(Error::invalid(format!(
            "model vectors have {} values but a {}x{} window gives {}",
            model.dim(),
            cfg.window_w,
            cfg.window_h,
            cfg.descriptor_len()
        )));
    }
    let (ww, wh) = model.window;
    if let Some(t) = template {
        if t.dims() != (ww, wh) {
            return Err(Error::invalid(format!(
                "template is {}x{}, window is {ww}x{wh}",
                t.width(),
                t.height()
            )));
        }
    }
    let (w, h) = gray.dims();
    let mut mask = FenceMask::all_valid(w, h);
    let mut detections = Vec::new();
    let mut skipped_scales = Vec::new();
    for &scale in &params.scales {
        let sw = (w as f64 * scale).round() as usize;
        let sh = (h as f64 * scale).round() as usize;
        if sw < ww || sh < wh {
            skipped_scales.push(scale);
            continue;
        }
        let scaled = if sw == w && sh == h { gray.clone() } else { gray.resize_bilinear(sw, sh) };
        for y in (0..=sh - wh).step_by(params.stride) {
            for x in (0..=sw - ww).step_by(params.stride) {
                let window = preprocess(&scaled.crop(x, y, ww, wh)?);
                let d = hog(&window, &cfg)?;
                let score = model.decision(d.values())?;
                if score > 0.0 {
                    detections.push(Detection { scale, x, y, score });
                    stamp(&mut mask, template, x, y, ww, wh, w as f64 / sw as f64, h as f64 / sh as f64);
                }
            }
        }
    }
    Ok(SvmDetection {
        mask,
        detections,
        skipped_scales,
    })
}

#[allow(clippy::too_many_arguments)]
fn stamp(
    mask: &mut FenceMask,
    template: Option<&FenceMask>,
    x: usize,
    y: usize,
    ww: usize,
    wh: usize,
    fx: f64,
    fy: f64,
) {
    let (w, h) = mask.dims();
    let x0 = (x as f64 * fx).floor() as usize;
    let y0 = (y as f64 * fy).floor() as usize;
    let x1 = (((x + ww) as f64 * fx).ceil() as usize).min(w);
    let y1 = (((y + wh) as f64 * fy).ceil() as usize).min(h);
    for oy in y0..y1 {
        for ox in x0..x1 {
            let fence = match template {
                None => true,
                Some(t) => {
                    let tx = (((ox as f64 + 0.5) / fx) as usize).saturating_sub(x).min(ww - 1);
                    let ty = (((oy as f64 + 0.5) / fy) as usize).saturating_sub(y).min(wh - 1);
                    t.is_fence(tx, ty)
                }
            };
            if fence {
                mask.set_fence(ox, oy);
            }
        }
    }
}
