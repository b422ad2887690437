//! Translated, fenced frame sequences with known ground truth, and a
//! procedural color texture to feed them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imgcore::{write_image, ColorImage, ImagePlane};
use crate::mask::FenceMask;
use crate::motion::GlobalShift;

pub const FENCE_GRAY: f64 = 128.0;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub source: ColorImage,
    /// Frame `m` shows `source(p - shifts[m])`; the first entry must be
    /// `(0, 0)`.
    pub shifts: Vec<GlobalShift>,
    pub fence_width: f64,
    pub fence_period: f64,
    /// Each angle adds one family of parallel bars whose intensity varies
    /// along `(cos a, sin a)`.
    pub fence_angles_deg: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// The benchmark layout: shifts `(0,0), (-8,-8), (8,8), (15,15)` and a
    /// 7 px wide axis-aligned grid with a 48 px period.
    pub fn benchmark(source: ColorImage) -> Self {
        Self {
            source,
            shifts: [(0.0, 0.0), (-8.0, -8.0), (8.0, 8.0), (15.0, 15.0)]
                .map(|(dx, dy)| GlobalShift::new(dx, dy))
                .to_vec(),
            fence_width: 7.0,
            fence_period: 48.0,
            fence_angles_deg: vec![0.0, 90.0],
            noise_sigma: 0.0,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.shifts.first().ok_or_else(|| Error::invalid("no shifts given"))?;
        if first.dx != 0.0 || first.dy != 0.0 {
            return Err(Error::invalid("the first shift must be (0,0)"));
        }
        let (w, h) = self.source.dims();
        for s in &self.shifts {
            if !(s.dx.is_finite() && s.dy.is_finite()) || s.dx.abs() >= w as f64 || s.dy.abs() >= h as f64 {
                return Err(Error::invalid(format!(
                    "shift ({}, {}) moves the {w}x{h} image out of frame",
                    s.dx, s.dy
                )));
            }
        }
        if !(self.fence_period > 0.0 && self.fence_period.is_finite()) {
            return Err(Error::invalid("fence period must be positive"));
        }
        if !(self.fence_width >= 0.0 && self.fence_width < self.fence_period) {
            return Err(Error::invalid("fence width must be in [0, period)"));
        }
        if self.fence_angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("fence angles must be finite"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthSequence {
    pub frames: Vec<ColorImage>,
    pub masks: Vec<FenceMask>,
    pub truth: ColorImage,
}

impl SynthSequence {
    /// Writes `frame{i}.png`, `mask{i}.png` (1-based) and `truth.png`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (i, (f, m)) in self.frames.iter().zip(&self.masks).enumerate() {
            write_image(dir.join(format!("frame{}.png", i + 1)), f)?;
            m.write_png(dir.join(format!("mask{}.png", i + 1)))?;
        }
        write_image(dir.join("truth.png"), &self.truth)
    }
}

/// Fence membership of a pixel for a grid of bars.
pub fn fence_grid(width: usize, height: usize, bar_width: f64, period: f64, angles_deg: &[f64]) -> FenceMask {
    let dirs: Vec<(f64, f64)> = angles_deg.iter().map(|a| (a.to_radians().cos(), a.to_radians().sin())).collect();
    FenceMask::from_fence_fn(width, height, |x, y| {
        dirs.iter()
            .any(|&(c, s)| (c * x as f64 + s * y as f64).rem_euclid(period) < bar_width)
    })
}

/// `out(p) = img(p - shift)`; integer shifts copy exactly, fractional ones
/// sample bilinearly. Samples falling outside repeat the nearest edge.
pub fn translate(img: &ImagePlane, shift: GlobalShift) -> ImagePlane {
    let (w, h) = img.dims();
    if shift.dx.fract() == 0.0 && shift.dy.fract() == 0.0 {
        let (dx, dy) = (shift.dx as isize, shift.dy as isize);
        ImagePlane::from_fn(w, h, |x, y| img.get_clamped(x as isize - dx, y as isize - dy))
    } else {
        ImagePlane::from_fn(w, h, |x, y| img.sample_bilinear_clamped(x as f64 - shift.dx, y as f64 - shift.dy))
    }
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthSequence> {
    cfg.validate()?;
    let (w, h) = cfg.source.dims();
    let fence = if cfg.fence_width > 0.0 {
        fence_grid(w, h, cfg.fence_width, cfg.fence_period, &cfg.fence_angles_deg)
    } else {
        FenceMask::all_valid(w, h)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut frames = Vec::with_capacity(cfg.shifts.len());
    for &shift in &cfg.shifts {
        let planes: Vec<ImagePlane> = cfg
            .source
            .planes()
            .iter()
            .map(|p| {
                let moved = translate(p, shift);
                let mut out = ImagePlane::from_fn(w, h, |x, y| {
                    if fence.is_fence(x, y) {
                        FENCE_GRAY
                    } else {
                        moved.get(x, y)
                    }
                });
                if cfg.noise_sigma > 0.0 {
                    for v in out.data_mut() {
                        *v = (*v + noise.sample(&mut rng)).clamp(0.0, 255.0);
                    }
                }
                out
            })
            .collect();
        let [r, g, b]: [ImagePlane; 3] = planes.try_into().expect("three planes");
        frames.push(ColorImage::from_planes(r, g, b)?);
    }
    Ok(SynthSequence {
        masks: vec![fence; frames.len()],
        frames,
        truth: cfg.source.clone(),
    })
}

/// Smooth multi-octave color texture in `[0, 255]` with a roughly `1/f`
/// amplitude spectrum, for use as a stand-in photograph.
pub fn textured_image(width: usize, height: usize, seed: u64) -> ColorImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let luma = octave_noise(&mut rng, width, height, &[64, 32, 16, 8, 4]);
    let tint_a = octave_noise(&mut rng, width, height, &[64, 32]);
    let tint_b = octave_noise(&mut rng, width, height, &[64, 32]);
    let mix = |l: f64, t: f64| (128.0 + 90.0 * l + 35.0 * t).clamp(0.0, 255.0);
    let r = ImagePlane::from_fn(width, height, |x, y| mix(luma.get(x, y), tint_a.get(x, y)));
    let g = ImagePlane::from_fn(width, height, |x, y| mix(luma.get(x, y), -0.5 * (tint_a.get(x, y) + tint_b.get(x, y))));
    let b = ImagePlane::from_fn(width, height, |x, y| mix(luma.get(x, y), tint_b.get(x, y)));
    ColorImage::from_planes(r, g, b).expect("equal sizes")
}

/// Sum of bilinearly upsampled random grids, amplitude proportional to the
/// grid spacing, normalized to roughly `[-1, 1]`.
fn octave_noise(rng: &mut impl Rng, width: usize, height: usize, spacings: &[usize]) -> ImagePlane {
    let mut acc = ImagePlane::new(width, height);
    let mut total = 0.0;
    for &s in spacings {
        let gw = width / s + 2;
        let gh = height / s + 2;
        let grid = ImagePlane::from_fn(gw, gh, |_, _| rng.random_range(-1.0..1.0));
        let amp = s as f64;
        total += amp;
        for y in 0..height {
            for x in 0..width {
                let v = grid.sample_bilinear_clamped(x as f64 / s as f64, y as f64 / s as f64);
                acc.data_mut()[y * width + x] += amp * v;
            }
        }
    }
    acc.map(|v| (v / total * 1.8).clamp(-1.0, 1.0))
}
