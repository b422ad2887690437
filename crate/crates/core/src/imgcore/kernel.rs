use crate::error::{Error, Result};
use crate::imgcore::ImagePlane;

/// Odd-sized 2-D filter kernel anchored at its center tap.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    width: usize,
    height: usize,
    taps: Vec<f64>,
}

impl Kernel2D {
    pub fn new(width: usize, height: usize, taps: Vec<f64>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel dimensions must be odd, got {width}x{height}"
            )));
        }
        if taps.len() != width * height {
            return Err(Error::invalid(format!(
                "kernel has {} taps, expected {}",
                taps.len(),
                width * height
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("kernel taps must be finite"));
        }
        Ok(Self {
            width,
            height,
            taps,
        })
    }

    pub fn identity() -> Self {
        Self {
            width: 1,
            height: 1,
            taps: vec![1.0],
        }
    }

    /// Builds a kernel by evaluating `f(dx, dy)` on offsets relative to the center.
    pub fn from_fn(
        half_width: usize,
        half_height: usize,
        mut f: impl FnMut(isize, isize) -> f64,
    ) -> Self {
        let width = 2 * half_width + 1;
        let height = 2 * half_height + 1;
        let mut taps = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                taps.push(f(i as isize - half_width as isize, j as isize - half_height as isize));
            }
        }
        Self {
            width,
            height,
            taps,
        }
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
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn half_width(&self) -> usize {
        self.width / 2
    }

    #[inline]
    pub fn half_height(&self) -> usize {
        self.height / 2
    }

    /// Tap at offset `(dx, dy)` from the center.
    #[inline]
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let i = (dx + self.half_width() as isize) as usize;
        let j = (dy + self.half_height() as isize) as usize;
        self.taps[j * self.width + i]
    }

    pub fn center(&self) -> f64 {
        self.at(0, 0)
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    pub fn is_identity(&self) -> bool {
        self.width == 1 && self.height == 1 && self.taps[0] == 1.0
    }

    /// Kernel rotated by 180 degrees.
    pub fn flipped(&self) -> Kernel2D {
        let mut taps = self.taps.clone();
        taps.reverse();
        Kernel2D {
            width: self.width,
            height: self.height,
            taps,
        }
    }

    pub fn normalized(mut self) -> Kernel2D {
        let s = self.sum();
        if s != 0.0 {
            self.taps.iter_mut().for_each(|t| *t /= s);
        }
        self
    }

    /// Subtracts the tap mean so the kernel has zero DC response.
    pub fn zero_mean(mut self) -> Kernel2D {
        let m = self.sum() / self.taps.len() as f64;
        self.taps.iter_mut().for_each(|t| *t -= m);
        self
    }
}

/// Square normalized Gaussian of side `2*ceil(3*sigma)+1`.
pub fn gaussian_kernel(sigma: f64) -> Result<Kernel2D> {
    let taps = gaussian_taps_1d(sigma)?;
    let r = taps.len() / 2;
    Ok(Kernel2D::from_fn(r, r, |dx, dy| {
        taps[(dx + r as isize) as usize] * taps[(dy + r as isize) as usize]
    })
    .normalized())
}

/// Normalized 1-D Gaussian taps of length `2*ceil(3*sigma)+1`.
pub fn gaussian_taps_1d(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let r = (3.0 * sigma).ceil() as isize;
    let two_s2 = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / two_s2).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    Ok(taps)
}

fn check_kernel_fits(img: &ImagePlane, k: &Kernel2D) -> Result<()> {
    if k.width() > 2 * img.width() || k.height() > 2 * img.height() {
        return Err(Error::invalid(format!(
            "{}x{} kernel is larger than twice the {}x{} image",
            k.width(),
            k.height(),
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// 2-D convolution with edge replication:
/// `out(x, y) = sum k(dx, dy) * img(x - dx, y - dy)`.
pub fn convolve(img: &ImagePlane, k: &Kernel2D) -> Result<ImagePlane> {
    check_kernel_fits(img, k)?;
    if k.is_identity() {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let (hw, hh) = (k.half_width() as isize, k.half_height() as isize);
    let src = img.data();
    let mut out = ImagePlane::new(w, h);
    let interior = |x: isize, y: isize| {
        x - hw >= 0 && x + hw < w as isize && y - hh >= 0 && y + hh < h as isize
    };
    let flipped = k.flipped();
    let (kw, flipped) = (flipped.width(), flipped.taps());
    let dst = out.data_mut();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            if interior(x, y) {
                let x0 = (x - hw) as usize;
                for (j, taps) in flipped.chunks_exact(kw).enumerate() {
                    let start = (y - hh) as usize * w + j * w + x0;
                    acc += taps.iter().zip(&src[start..start + kw]).map(|(a, b)| a * b).sum::<f64>();
                }
            } else {
                for dy in -hh..=hh {
                    for dx in -hw..=hw {
                        acc += k.at(dx, dy) * img.get_clamped(x - dx, y - dy);
                    }
                }
            }
            dst[y as usize * w + x as usize] = acc;
        }
    }
    Ok(out)
}

/// Exact transpose of [`convolve`] including the replicated border: every
/// output sample scatters its tap weights back onto the (clamped) source
/// pixels that produced it.
pub fn convolve_adjoint(img: &ImagePlane, k: &Kernel2D) -> Result<ImagePlane> {
    check_kernel_fits(img, k)?;
    if k.is_identity() {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let (hw, hh) = (k.half_width() as isize, k.half_height() as isize);
    let mut out = ImagePlane::new(w, h);
    let src = img.data();
    let dst = out.data_mut();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = src[y as usize * w + x as usize];
            if v == 0.0 {
                continue;
            }
            for dy in -hh..=hh {
                let sy = (y - dy).clamp(0, h as isize - 1) as usize;
                for dx in -hw..=hw {
                    let sx = (x - dx).clamp(0, w as isize - 1) as usize;
                    dst[sy * w + sx] += k.at(dx, dy) * v;
                }
            }
        }
    }
    Ok(out)
}

/// Separable convolution: a horizontal pass with `row` then a vertical pass
/// with `col`, both odd-length and centered, edge replication.
pub fn convolve_separable(img: &ImagePlane, row: &[f64], col: &[f64]) -> Result<ImagePlane> {
    if row.len().is_multiple_of(2) || col.len().is_multiple_of(2) {
        return Err(Error::invalid("separable taps must have odd length"));
    }
    if row.len() > 2 * img.width() || col.len() > 2 * img.height() {
        return Err(Error::invalid("separable kernel larger than twice the image"));
    }
    let (w, h) = img.dims();
    let rr = (row.len() / 2) as isize;
    let rc = (col.len() / 2) as isize;
    let mut tmp = ImagePlane::new(w, h);
    for y in 0..h {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (i, t) in row.iter().enumerate() {
                let dx = i as isize - rr;
                acc += t * img.get_clamped(x - dx, y as isize);
            }
            tmp.set(x as usize, y, acc);
        }
    }
    let mut out = ImagePlane::new(w, h);
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, t) in col.iter().enumerate() {
                let dy = j as isize - rc;
                acc += t * tmp.get_clamped(x as isize, y - dy);
            }
            out.set(x, y as usize, acc);
        }
    }
    Ok(out)
}

/// Gaussian blur through two 1-D passes; `sigma == 0` is the identity.
pub fn gaussian_blur(img: &ImagePlane, sigma: f64) -> Result<ImagePlane> {
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let taps = gaussian_taps_1d(sigma)?;
    convolve_separable(img, &taps, &taps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, |x, y| (x + 3 * y) as f64)
    }

    /// Direct quadruple loop, clamping every coordinate.
    fn brute_convolve(img: &ImagePlane, k: &Kernel2D) -> ImagePlane {
        let (hw, hh) = (k.half_width() as isize, k.half_height() as isize);
        ImagePlane::from_fn(img.width(), img.height(), |x, y| {
            let mut acc = 0.0;
            for dy in -hh..=hh {
                for dx in -hw..=hw {
                    let sx = (x as isize - dx).clamp(0, img.width() as isize - 1);
                    let sy = (y as isize - dy).clamp(0, img.height() as isize - 1);
                    acc += k.at(dx, dy) * img.get(sx as usize, sy as usize);
                }
            }
            acc
        })
    }

    #[test]
    fn identity_kernel_is_noop() {
        let img = ramp(7, 5);
        assert_eq!(convolve(&img, &Kernel2D::identity()).unwrap(), img);
    }

    #[test]
    fn constant_image_scales_by_tap_sum() {
        let img = ImagePlane::filled(9, 6, 4.0);
        let k = Kernel2D::new(3, 3, vec![1.0, 2.0, 0.5, -1.0, 3.0, 0.0, 0.25, 0.25, 1.0]).unwrap();
        let s = k.sum();
        let out = convolve(&img, &k).unwrap();
        assert!(out.data().iter().all(|&v| (v - 4.0 * s).abs() < 1e-12));
    }

    #[test]
    fn box_on_ramp_matches_direct_loop() {
        let img = ramp(5, 5);
        let k = Kernel2D::new(3, 3, vec![1.0 / 9.0; 9]).unwrap();
        let fast = convolve(&img, &k).unwrap();
        let slow = brute_convolve(&img, &k);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_kernel_matches_direct_loop() {
        let img = ImagePlane::from_fn(11, 8, |x, y| ((x * 7 + y * 13) % 17) as f64);
        let k = Kernel2D::from_fn(2, 1, |dx, dy| (dx * 3 + dy) as f64 + 0.5);
        let fast = convolve(&img, &k).unwrap();
        let slow = brute_convolve(&img, &k);
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn oversized_kernel_rejected() {
        let img = ImagePlane::new(3, 3);
        let k = Kernel2D::from_fn(4, 0, |_, _| 1.0);
        assert!(matches!(convolve(&img, &k), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(Kernel2D::new(2, 3, vec![0.0; 6]).is_err());
    }

    #[test]
    fn gaussian_sizes_and_normalization() {
        let k = gaussian_kernel(0.5).unwrap();
        assert_eq!((k.width(), k.height()), (5, 5));
        assert!((k.sum() - 1.0).abs() < 1e-12);

        let k = gaussian_kernel(1.5).unwrap();
        assert_eq!(k.width(), 11);
        let c = k.center();
        assert!(k.taps().iter().all(|&t| t <= c));
        assert_eq!(k.taps().iter().filter(|&&t| t == c).count(), 1);
    }

    #[test]
    fn gaussian_center_tap_matches_formula() {
        let sigma = 1.0f64;
        let r = 3isize;
        let mut total = 0.0;
        for y in -r..=r {
            for x in -r..=r {
                total += (-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp();
            }
        }
        let expected = 1.0 / total;
        let k = gaussian_kernel(sigma).unwrap();
        assert!((k.center() - expected).abs() < 1e-12);
    }

    #[test]
    fn gaussian_rejects_non_positive_sigma() {
        assert!(gaussian_kernel(0.0).is_err());
        assert!(gaussian_kernel(-1.0).is_err());
        assert!(gaussian_kernel(f64::NAN).is_err());
    }

    #[test]
    fn separable_blur_matches_2d_kernel() {
        let img = ImagePlane::from_fn(20, 15, |x, y| ((x * x + 5 * y) % 31) as f64);
        let a = gaussian_blur(&img, 1.2).unwrap();
        let b = convolve(&img, &gaussian_kernel(1.2).unwrap()).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn adjoint_is_exact_transpose() {
        let k = Kernel2D::from_fn(1, 2, |dx, dy| 1.0 + 0.3 * dx as f64 - 0.2 * dy as f64);
        let (w, h) = (6, 5);
        // Column j of the forward matrix is convolve(e_j); row i of the
        // adjoint output is <convolve(e_j), e_i>.
        for j in 0..w * h {
            let mut e = ImagePlane::new(w, h);
            e.data_mut()[j] = 1.0;
            let col = convolve(&e, &k).unwrap();
            for i in 0..w * h {
                let mut ei = ImagePlane::new(w, h);
                ei.data_mut()[i] = 1.0;
                let adj = convolve_adjoint(&ei, &k).unwrap();
                assert!((col.data()[i] - adj.data()[j]).abs() < 1e-12);
            }
        }
    }
}
