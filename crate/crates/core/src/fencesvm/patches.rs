//! Labeled training windows: loading from directories, a synthetic
//! generator, and training from patches.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fencesvm::hog::{hog, preprocess, HogConfig};
use crate::fencesvm::svm::{train_svm_descriptors, CvReport, SvmGrid, SvmModel};
use crate::imgcore::{read_gray, ImagePlane};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPatch {
    pub image: ImagePlane,
    /// `+1` fence, `-1` background.
    pub label: f64,
}

impl LabeledPatch {
    pub fn fence(image: ImagePlane) -> Self {
        Self { image, label: 1.0 }
    }

    pub fn background(image: ImagePlane) -> Self {
        Self { image, label: -1.0 }
    }
}

/// Preprocessed HOG descriptor of one window.
pub fn window_descriptor(window: &ImagePlane, cfg: &HogConfig) -> Result<Vec<f64>> {
    Ok(hog(&preprocess(window), cfg)?.0)
}

pub fn train_svm(
    patches: &[LabeledPatch],
    cfg: &HogConfig,
    grid: &SvmGrid,
    folds: usize,
    seed: u64,
) -> Result<(SvmModel, CvReport)> {
    let mut x = Vec::with_capacity(patches.len());
    let mut y = Vec::with_capacity(patches.len());
    for (i, p) in patches.iter().enumerate() {
        if p.image.dims() != (cfg.window_w, cfg.window_h) {
            return Err(Error::invalid(format!(
                "patch {i} is {}x{}, window is {}x{}",
                p.image.width(),
                p.image.height(),
                cfg.window_w,
                cfg.window_h
            )));
        }
        if p.label != 1.0 && p.label != -1.0 {
            return Err(Error::invalid(format!("patch {i} has label {}, expected +1 or -1", p.label)));
        }
        x.push(window_descriptor(&p.image, cfg)?);
        y.push(p.label);
    }
    train_svm_descriptors(&x, &y, grid, folds, seed, (cfg.window_w, cfg.window_h))
}

/// Reads every `.png` in `dir` (sorted by name) as a grayscale window of
/// the configured size.
pub fn load_patch_dir(dir: impl AsRef<Path>, label: f64, cfg: &HogConfig) -> Result<Vec<LabeledPatch>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let image = read_gray(&path)?;
        if image.dims() != (cfg.window_w, cfg.window_h) {
            return Err(Error::format(
                &path,
                format!(
                    "patch is {}x{}, expected {}x{}",
                    image.width(),
                    image.height(),
                    cfg.window_w,
                    cfg.window_h
                ),
            ));
        }
        out.push(LabeledPatch { image, label });
    }
    Ok(out)
}

/// Fence window: a bright or dark wire grid over a random smooth
/// background. The grid spacing, wire width, phase and tilt are random.
pub fn synth_fence_patch(rng: &mut impl Rng, width: usize, height: usize) -> ImagePlane {
    let bg = SmoothBackground::random(rng);
    let period = rng.random_range(14.0..30.0);
    let wire = rng.random_range(2.0..5.0);
    let tilt: f64 = rng.random_range(-0.25..0.25);
    let px = rng.random_range(0.0..period);
    let py = rng.random_range(0.0..period);
    let color = if rng.random_bool(0.5) { rng.random_range(20.0..70.0) } else { rng.random_range(185.0..235.0) };
    let (s, c) = tilt.sin_cos();
    ImagePlane::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let a = (c * xf + s * yf + px).rem_euclid(period);
        let b = (-s * xf + c * yf + py).rem_euclid(period);
        if a < wire || b < wire {
            color
        } else {
            bg.at(xf, yf)
        }
    })
}

/// Background window without a fence: a random smooth texture, sometimes
/// with a single soft edge.
pub fn synth_background_patch(rng: &mut impl Rng, width: usize, height: usize) -> ImagePlane {
    let bg = SmoothBackground::random(rng);
    let edge = rng.random_bool(0.5).then(|| {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let offset = rng.random_range(0.3..0.7) * width.min(height) as f64;
        let step = rng.random_range(-60.0..60.0);
        (angle.cos(), angle.sin(), offset, step)
    });
    ImagePlane::from_fn(width, height, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let mut v = bg.at(xf, yf);
        if let Some((c, s, off, step)) = edge {
            let t = (c * xf + s * yf - off) / 3.0;
            v += step / (1.0 + (-t).exp());
        }
        v.clamp(0.0, 255.0)
    })
}

/// `n_pos` fence and `n_neg` background windows from a seeded generator.
pub fn synth_patches(n_pos: usize, n_neg: usize, width: usize, height: usize, seed: u64) -> Vec<LabeledPatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_pos + n_neg);
    for _ in 0..n_pos {
        out.push(LabeledPatch::fence(synth_fence_patch(&mut rng, width, height)));
    }
    for _ in 0..n_neg {
        out.push(LabeledPatch::background(synth_background_patch(&mut rng, width, height)));
    }
    out
}

struct SmoothBackground {
    base: f64,
    waves: [(f64, f64, f64, f64); 3],
}

impl SmoothBackground {
    fn random(rng: &mut impl Rng) -> Self {
        let mut wave = || {
            (
                rng.random_range(-0.08..0.08),
                rng.random_range(-0.08..0.08),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(5.0..25.0),
            )
        };
        let waves = [wave(), wave(), wave()];
        Self {
            base: rng.random_range(80.0..170.0),
            waves,
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.waves
            .iter()
            .fold(self.base, |acc, &(fx, fy, ph, amp)| acc + amp * (fx * x + fy * y + ph).sin())
    }
}
