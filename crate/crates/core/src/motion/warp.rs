//! Backward bilinear warping and its exact transpose.

use crate::imgcore::ImagePlane;
use crate::mask::FenceMask;
use crate::motion::FlowField;

/// Sample positions this close outside the grid are snapped onto it.
const EDGE_EPS: f64 = 1e-9;

/// Precomputed sparse sampling matrix of `out(p) = x(p + flow(p))`.
///
/// Each output pixel stores up to four `(source index, weight)` taps;
/// samples that fall outside the image have no taps and are marked
/// invalid.
#[derive(Clone, Debug)]
pub struct BilinearWarp {
    width: usize,
    height: usize,
    taps: Vec<[(u32, f64); 4]>,
    valid: FenceMask,
}

impl BilinearWarp {
    pub fn new(flow: &FlowField) -> Self {
        let (w, h) = flow.dims();
        let mut taps = Vec::with_capacity(w * h);
        let mut valid = Vec::with_capacity(w * h);
        let (xmax, ymax) = ((w - 1) as f64, (h - 1) as f64);
        for y in 0..h {
            for x in 0..w {
                let (du, dv) = flow.at(x, y);
                let mut sx = x as f64 + du;
                let mut sy = y as f64 + dv;
                if sx < 0.0 && sx > -EDGE_EPS {
                    sx = 0.0;
                }
                if sy < 0.0 && sy > -EDGE_EPS {
                    sy = 0.0;
                }
                if sx > xmax && sx < xmax + EDGE_EPS {
                    sx = xmax;
                }
                if sy > ymax && sy < ymax + EDGE_EPS {
                    sy = ymax;
                }
                if !(sx >= 0.0 && sx <= xmax && sy >= 0.0 && sy <= ymax) {
                    taps.push([(0, 0.0); 4]);
                    valid.push(false);
                    continue;
                }
                let x0 = sx.floor() as usize;
                let y0 = sy.floor() as usize;
                let fx = sx - x0 as f64;
                let fy = sy - y0 as f64;
                let x1 = (x0 + 1).min(w - 1);
                let y1 = (y0 + 1).min(h - 1);
                let idx = |xx: usize, yy: usize| (yy * w + xx) as u32;
                taps.push([
                    (idx(x0, y0), (1.0 - fx) * (1.0 - fy)),
                    (idx(x1, y0), fx * (1.0 - fy)),
                    (idx(x0, y1), (1.0 - fx) * fy),
                    (idx(x1, y1), fx * fy),
                ]);
                valid.push(true);
            }
        }
        Self {
            width: w,
            height: h,
            taps,
            valid: FenceMask::from_valid(w, h, valid).expect("flow dimensions are non-zero"),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pixels whose sample position lies inside the source image.
    pub fn validity(&self) -> &FenceMask {
        &self.valid
    }

    pub fn forward(&self, x: &ImagePlane) -> ImagePlane {
        assert_eq!(x.dims(), self.dims(), "warp input size mismatch");
        let src = x.data();
        let mut out = ImagePlane::new(self.width, self.height);
        for (o, taps) in out.data_mut().iter_mut().zip(&self.taps) {
            *o = taps.iter().map(|&(i, wt)| wt * src[i as usize]).sum();
        }
        out
    }

    pub fn adjoint(&self, y: &ImagePlane) -> ImagePlane {
        assert_eq!(y.dims(), self.dims(), "warp input size mismatch");
        let mut out = ImagePlane::new(self.width, self.height);
        let dst = out.data_mut();
        for (&v, taps) in y.data().iter().zip(&self.taps) {
            if v == 0.0 {
                continue;
            }
            for &(i, wt) in taps {
                dst[i as usize] += wt * v;
            }
        }
        out
    }
}

/// `out(p) = x(p + flow(p))` by bilinear interpolation, zero outside the
/// image; also returns which output pixels sampled inside the image.
pub fn warp_forward(x: &ImagePlane, flow: &FlowField) -> (ImagePlane, FenceMask) {
    let op = BilinearWarp::new(flow);
    let out = op.forward(x);
    (out, op.valid)
}

/// Transpose of [`warp_forward`]'s sampling matrix.
pub fn warp_adjoint(y: &ImagePlane, flow: &FlowField) -> ImagePlane {
    BilinearWarp::new(flow).adjoint(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_flow_is_identity() {
        let x = ImagePlane::from_fn(6, 5, |x, y| (x * 10 + y) as f64);
        let f = FlowField::zeros(6, 5);
        let (out, valid) = warp_forward(&x, &f);
        assert_eq!(out, x);
        assert_eq!(valid.fence_count(), 0);
        assert_eq!(warp_adjoint(&x, &f), x);
    }

    #[test]
    fn unit_shift_reads_next_column() {
        let x = ImagePlane::from_fn(5, 3, |x, _| 10.0 * x as f64);
        let (out, valid) = warp_forward(&x, &FlowField::constant(5, 3, 1.0, 0.0));
        for y in 0..3 {
            for c in 0..4 {
                assert_eq!(out.get(c, y), 10.0 * (c + 1) as f64);
                assert!(valid.is_valid(c, y));
            }
            assert_eq!(out.get(4, y), 0.0);
            assert!(!valid.is_valid(4, y));
        }
    }

    #[test]
    fn half_pixel_averages_neighbours() {
        let x = ImagePlane::from_fn(6, 2, |x, _| 3.0 * x as f64 + 1.0);
        let (out, _) = warp_forward(&x, &FlowField::constant(6, 2, 0.5, 0.0));
        for c in 0..5 {
            assert!((out.get(c, 1) - 0.5 * (x.get(c, 1) + x.get(c + 1, 1))).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_shift_transpose_is_reverse_shift_on_interior() {
        let y = ImagePlane::from_fn(8, 8, |x, y| ((x * 7 + y * 3) % 11) as f64);
        let adj = warp_adjoint(&y, &FlowField::constant(8, 8, 1.0, 0.0));
        let (rev, _) = warp_forward(&y, &FlowField::constant(8, 8, -1.0, 0.0));
        for yy in 0..8 {
            for xx in 1..8 {
                assert_eq!(adj.get(xx, yy), rev.get(xx, yy));
            }
            // Column 0 is never sampled by the forward warp.
            assert_eq!(adj.get(0, yy), 0.0);
        }
    }
}
