//! Binary fence masks: `true` marks a valid (unoccluded) pixel.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imgcore::{self, ImagePlane};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FenceMask {
    width: usize,
    height: usize,
    valid: Vec<bool>,
}

impl FenceMask {
    pub fn all_valid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            valid: vec![true; width * height],
        }
    }

    pub fn all_fence(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            valid: vec![false; width * height],
        }
    }

    pub fn from_valid(width: usize, height: usize, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != width * height || width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "mask buffer of {} entries does not match {width}x{height}",
                valid.len()
            )));
        }
        Ok(Self {
            width,
            height,
            valid,
        })
    }

    /// `is_fence(x, y)` decides each pixel.
    pub fn from_fence_fn(width: usize, height: usize, mut is_fence: impl FnMut(usize, usize) -> bool) -> Self {
        let mut valid = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                valid.push(!is_fence(x, y));
            }
        }
        Self {
            width,
            height,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    #[inline]
    pub fn is_fence(&self, x: usize, y: usize) -> bool {
        !self.is_valid(x, y)
    }

    pub fn valid_bits(&self) -> &[bool] {
        &self.valid
    }

    pub fn set_fence(&mut self, x: usize, y: usize) {
        self.valid[y * self.width + x] = false;
    }

    pub fn fence_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    pub fn fence_fraction(&self) -> f64 {
        self.fence_count() as f64 / self.valid.len() as f64
    }

    /// Pixel valid in both masks.
    pub fn and(&self, other: &FenceMask) -> Result<FenceMask> {
        self.ensure_dims(other.width, other.height)?;
        Ok(FenceMask {
            width: self.width,
            height: self.height,
            valid: self.valid.iter().zip(&other.valid).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub(crate) fn ensure_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.dims() == (width, height) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "mask is {}x{} but image is {width}x{height}",
                self.width, self.height
            )))
        }
    }

    /// 1.0 on valid pixels, 0.0 on fence pixels.
    pub fn to_weights(&self) -> ImagePlane {
        ImagePlane::from_vec(
            self.width,
            self.height,
            self.valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask dimensions are non-zero")
    }

    /// Grows the fence region with a 3x3 structuring element `iters` times.
    pub fn dilate(&self, iters: usize) -> FenceMask {
        let mut cur = self.clone();
        for _ in 0..iters {
            let mut next = cur.clone();
            for y in 0..self.height {
                for x in 0..self.width {
                    if !cur.is_fence(x, y) {
                        continue;
                    }
                    for ny in y.saturating_sub(1)..=(y + 1).min(self.height - 1) {
                        for nx in x.saturating_sub(1)..=(x + 1).min(self.width - 1) {
                            next.set_fence(nx, ny);
                        }
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// Reads a mask PNG: gray levels >= 128 are valid, darker pixels fence.
    pub fn read_png(path: impl AsRef<Path>) -> Result<FenceMask> {
        let gray = imgcore::read_gray(path)?;
        Ok(FenceMask {
            width: gray.width(),
            height: gray.height(),
            valid: gray.data().iter().map(|&v| v >= 128.0).collect(),
        })
    }

    /// Writes 0 for fence and 255 for valid pixels.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        imgcore::write_gray(path, &self.to_weights().map(|v| v * 255.0))
    }
}

/// Free-function form of [`FenceMask::dilate`].
pub fn dilate(mask: &FenceMask, iters: usize) -> FenceMask {
    mask.dilate(iters)
}
