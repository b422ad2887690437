use crate::error::{Error, Result};

/// Single-channel floating point raster, row-major, nominal range 0..=255.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be non-zero");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel buffer has {} values, expected {}x{}={}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("pixel buffer contains non-finite values"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        img
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    pub fn same_dims(&self, other: &ImagePlane) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn ensure_same_dims(&self, other: &ImagePlane, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what}: dimension mismatch {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImagePlane {
        ImagePlane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`, elementwise.
    pub fn lincomb(&self, a: f64, other: &ImagePlane, b: f64) -> ImagePlane {
        debug_assert!(self.same_dims(other));
        ImagePlane {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&p, &q)| a * p + b * q)
                .collect(),
        }
    }

    pub fn sub(&self, other: &ImagePlane) -> ImagePlane {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn add_assign_scaled(&mut self, other: &ImagePlane, s: f64) {
        debug_assert!(self.same_dims(other));
        for (p, &q) in self.data.iter_mut().zip(&other.data) {
            *p += s * q;
        }
    }

    pub fn dot(&self, other: &ImagePlane) -> f64 {
        debug_assert!(self.same_dims(other));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bilinear sample at a real-valued position with edge replication.
    pub fn sample_bilinear_clamped(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Bilinear resize to the given dimensions (pixel-center alignment).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> ImagePlane {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        ImagePlane::from_fn(width, height, |x, y| {
            let fx = (x as f64 + 0.5) * sx - 0.5;
            let fy = (y as f64 + 0.5) * sy - 0.5;
            self.sample_bilinear_clamped(fx, fy)
        })
    }

    /// Crop a `width`x`height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<ImagePlane> {
        if x0 + width > self.width || y0 + height > self.height || width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok(ImagePlane::from_fn(width, height, |x, y| {
            self.get(x0 + x, y0 + y)
        }))
    }

    pub fn clamp_to_byte_range(&self) -> ImagePlane {
        self.map(|v| v.clamp(0.0, 255.0))
    }
}

/// Three same-sized planes, R, G, B.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    planes: [ImagePlane; 3],
}

impl ColorImage {
    pub fn from_planes(r: ImagePlane, g: ImagePlane, b: ImagePlane) -> Result<Self> {
        if !(r.same_dims(&g) && r.same_dims(&b)) {
            return Err(Error::invalid("color planes differ in size"));
        }
        Ok(Self { planes: [r, g, b] })
    }

    /// Gray image replicated into all three channels.
    pub fn from_gray(gray: ImagePlane) -> Self {
        Self {
            planes: [gray.clone(), gray.clone(), gray],
        }
    }

    pub fn width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].dims()
    }

    pub fn planes(&self) -> &[ImagePlane; 3] {
        &self.planes
    }

    pub fn plane(&self, c: usize) -> &ImagePlane {
        &self.planes[c]
    }

    pub fn into_planes(self) -> [ImagePlane; 3] {
        self.planes
    }

    pub fn map_planes(&self, mut f: impl FnMut(&ImagePlane) -> ImagePlane) -> ColorImage {
        ColorImage {
            planes: [
                f(&self.planes[0]),
                f(&self.planes[1]),
                f(&self.planes[2]),
            ],
        }
    }

    /// ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
    pub fn to_grayscale(&self) -> ImagePlane {
        let [r, g, b] = &self.planes;
        let data = r
            .data()
            .iter()
            .zip(g.data())
            .zip(b.data())
            .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect();
        ImagePlane {
            width: r.width(),
            height: r.height(),
            data,
        }
    }
}

/// Free-function form of [`ColorImage::to_grayscale`].
pub fn to_grayscale(img: &ColorImage) -> ImagePlane {
    img.to_grayscale()
}
