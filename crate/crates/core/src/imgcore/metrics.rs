//! Reconstruction quality scores on the 0..255 intensity scale.

use crate::error::{Error, Result};
use crate::imgcore::kernel::gaussian_taps_1d;
use crate::imgcore::ImagePlane;

/// Value reported when the two images are identical.
pub const PSNR_CAP_DB: f64 = 120.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
const PEAK: f64 = 255.0;

pub fn mse(reference: &ImagePlane, test: &ImagePlane) -> Result<f64> {
    reference.ensure_same_dims(test, "mse")?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// Peak signal-to-noise ratio in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &ImagePlane, test: &ImagePlane) -> Result<f64> {
    let m = mse(reference, test)?;
    Ok(psnr_from_mse(m))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB)
}

/// Mean structural similarity using an 11x11 Gaussian window (sigma 1.5)
/// evaluated at every position where the window fits inside the image.
pub fn ssim(reference: &ImagePlane, test: &ImagePlane) -> Result<f64> {
    reference.ensure_same_dims(test, "ssim")?;
    let (w, h) = reference.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let taps = gaussian_taps_1d(SSIM_SIGMA)?;
    debug_assert_eq!(taps.len(), SSIM_WINDOW);

    let x = reference.data();
    let y = test.data();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        x.iter().zip(y).map(|(&a, &b)| f(a, b)).collect()
    };
    let mu_x = filter_valid(x, w, h, &taps);
    let mu_y = filter_valid(y, w, h, &taps);
    let xx = filter_valid(&prod(&|a, _| a * a), w, h, &taps);
    let yy = filter_valid(&prod(&|_, b| b * b), w, h, &taps);
    let xy = filter_valid(&prod(&|a, b| a * b), w, h, &taps);

    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let n = mu_x.len();
    let mut total = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let sx = xx[i] - mx * mx;
        let sy = yy[i] - my * my;
        let sxy = xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
            / ((mx * mx + my * my + c1) * (sx + sy + c2));
    }
    Ok(total / n as f64)
}

/// Separable "valid" correlation; output is `(w-k+1) x (h-k+1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (j, t) in taps.iter().enumerate() {
                acc += t * rows[(y + j) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}
