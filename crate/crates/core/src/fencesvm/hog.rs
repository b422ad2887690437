use crate::error::{Error, Result};
use crate::imgcore::ImagePlane;

/// Cell/block/window geometry of the descriptor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HogConfig {
    pub cell: usize,
    pub bins: usize,
    /// Block side in cells.
    pub block: usize,
    /// Block step in cells.
    pub block_stride: usize,
    pub window_w: usize,
    pub window_h: usize,
}

impl Default for HogConfig {
    /// 8x8 cells, 9 bins over 0..180 degrees, 2x2-cell blocks at a one-cell
    /// step on a 96x104 window: 11 x 12 blocks of 36 values, 4752 in all.
    fn default() -> Self {
        Self {
            cell: 8,
            bins: 9,
            block: 2,
            block_stride: 1,
            window_w: 96,
            window_h: 104,
        }
    }
}

impl HogConfig {
    pub fn with_window(window_w: usize, window_h: usize) -> Result<Self> {
        let cfg = Self {
            window_w,
            window_h,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell == 0 || self.bins == 0 || self.block == 0 || self.block_stride == 0 {
            return Err(Error::invalid("hog cell, bins, block and stride must be non-zero"));
        }
        if !self.window_w.is_multiple_of(self.cell) || !self.window_h.is_multiple_of(self.cell) {
            return Err(Error::invalid(format!(
                "window {}x{} is not a multiple of the {}-pixel cell",
                self.window_w, self.window_h, self.cell
            )));
        }
        if self.cells_x() < self.block || self.cells_y() < self.block {
            return Err(Error::invalid("window smaller than one block"));
        }
        Ok(())
    }

    pub fn cells_x(&self) -> usize {
        self.window_w / self.cell
    }

    pub fn cells_y(&self) -> usize {
        self.window_h / self.cell
    }

    pub fn blocks_x(&self) -> usize {
        (self.cells_x() - self.block) / self.block_stride + 1
    }

    pub fn blocks_y(&self) -> usize {
        (self.cells_y() - self.block) / self.block_stride + 1
    }

    pub fn block_len(&self) -> usize {
        self.block * self.block * self.bins
    }

    pub fn descriptor_len(&self) -> usize {
        self.block_len() * self.blocks_x() * self.blocks_y()
    }
}

/// Concatenated L2-normalized block histograms.
#[derive(Clone, Debug, PartialEq)]
pub struct HogDescriptor(pub Vec<f64>);

impl HogDescriptor {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

const BLOCK_EPS: f64 = 1e-6;

/// Per-cell orientation histograms, `cells_y x cells_x x bins`.
///
/// Gradients use the centered `[-1, 0, 1]` mask with replicated borders;
/// each pixel votes its magnitude into the single bin holding its
/// unsigned orientation.
pub fn cell_histograms(window: &ImagePlane, cfg: &HogConfig) -> Vec<f64> {
    let (cx, cy) = (cfg.cells_x(), cfg.cells_y());
    let bin_width = 180.0 / cfg.bins as f64;
    let mut hist = vec![0.0; cx * cy * cfg.bins];
    for y in 0..cfg.window_h {
        for x in 0..cfg.window_w {
            let (xi, yi) = (x as isize, y as isize);
            let gx = window.get_clamped(xi + 1, yi) - window.get_clamped(xi - 1, yi);
            let gy = window.get_clamped(xi, yi + 1) - window.get_clamped(xi, yi - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            let bin = ((angle / bin_width) as usize).min(cfg.bins - 1);
            let cell = (y / cfg.cell) * cx + x / cfg.cell;
            hist[cell * cfg.bins + bin] += mag;
        }
    }
    hist
}

/// HOG descriptor of a window-sized image. Blocks are visited in row-major
/// order and cells within a block row-major as well.
pub fn hog(window: &ImagePlane, cfg: &HogConfig) -> Result<HogDescriptor> {
    cfg.validate()?;
    if window.dims() != (cfg.window_w, cfg.window_h) {
        return Err(Error::invalid(format!(
            "hog window is {}x{}, expected {}x{}",
            window.width(),
            window.height(),
            cfg.window_w,
            cfg.window_h
        )));
    }
    let hist = cell_histograms(window, cfg);
    let cx = cfg.cells_x();
    let mut out = Vec::with_capacity(cfg.descriptor_len());
    let mut block = Vec::with_capacity(cfg.block_len());
    for by in 0..cfg.blocks_y() {
        for bx in 0..cfg.blocks_x() {
            block.clear();
            for j in 0..cfg.block {
                for i in 0..cfg.block {
                    let cell = (by * cfg.block_stride + j) * cx + bx * cfg.block_stride + i;
                    block.extend_from_slice(&hist[cell * cfg.bins..(cell + 1) * cfg.bins]);
                }
            }
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt() + BLOCK_EPS;
            out.extend(block.iter().map(|v| v / norm));
        }
    }
    Ok(HogDescriptor(out))
}

/// Histogram equalization over 256 gray levels: each level maps to
/// `255 * CDF(level)`.
pub fn preprocess(patch: &ImagePlane) -> ImagePlane {
    let level = |v: f64| v.round().clamp(0.0, 255.0) as usize;
    let mut hist = [0usize; 256];
    for &v in patch.data() {
        hist[level(v)] += 1;
    }
    let total = patch.len() as f64;
    let mut lut = [0.0; 256];
    let mut acc = 0usize;
    for (l, &c) in hist.iter().enumerate() {
        acc += c;
        lut[l] = 255.0 * acc as f64 / total;
    }
    patch.map(|v| lut[level(v)])
}
