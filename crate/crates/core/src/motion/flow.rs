use crate::error::{Error, Result};
use crate::imgcore::ImagePlane;

/// Dense displacement field. For a flow estimated from `reference` to
/// `target`, `reference(p) ~ target(p + (u(p), v(p)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    u: ImagePlane,
    v: ImagePlane,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f64, v: f64) -> Self {
        Self {
            u: ImagePlane::filled(width, height, u),
            v: ImagePlane::filled(width, height, v),
        }
    }

    pub fn from_planes(u: ImagePlane, v: ImagePlane) -> Result<Self> {
        u.ensure_same_dims(&v, "flow components")?;
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::invalid("flow contains non-finite values"));
        }
        Ok(Self { u, v })
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    pub fn u(&self) -> &ImagePlane {
        &self.u
    }

    pub fn v(&self) -> &ImagePlane {
        &self.v
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        (self.u.get(x, y), self.v.get(x, y))
    }

    pub fn into_planes(self) -> (ImagePlane, ImagePlane) {
        (self.u, self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn max_abs(&self) -> (f64, f64) {
        let m = |p: &ImagePlane| p.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (m(&self.u), m(&self.v))
    }

    /// Mean endpoint error against a constant displacement, ignoring a
    /// `border`-pixel frame.
    pub fn mean_endpoint_error_const(&self, u: f64, v: f64, border: usize) -> f64 {
        let (w, h) = self.dims();
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in border..h.saturating_sub(border) {
            for x in border..w.saturating_sub(border) {
                let (fu, fv) = self.at(x, y);
                sum += ((fu - u).powi(2) + (fv - v).powi(2)).sqrt();
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}
