use crate::error::{Error, Result};
use crate::imgcore::ImagePlane;
use crate::mask::FenceMask;

/// Global translation: `target(p) = reference(p - (dx, dy))`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GlobalShift {
    pub dx: f64,
    pub dy: f64,
}

impl GlobalShift {
    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn negated(self) -> Self {
        Self::new(-self.dx, -self.dy)
    }
}

/// Mean squared difference of `target(p)` and `reference(p - d)` over
/// pixels valid in both masks, with the overlap size.
fn masked_ssd(
    reference: &ImagePlane,
    target: &ImagePlane,
    ref_valid: Option<&FenceMask>,
    tgt_valid: Option<&FenceMask>,
    dx: isize,
    dy: isize,
) -> (f64, usize) {
    let (w, h) = (reference.width() as isize, reference.height() as isize);
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in dy.max(0)..(h + dy).min(h) {
        let ry = y - dy;
        for x in dx.max(0)..(w + dx).min(w) {
            let rx = x - dx;
            if let Some(m) = tgt_valid {
                if !m.is_valid(x as usize, y as usize) {
                    continue;
                }
            }
            if let Some(m) = ref_valid {
                if !m.is_valid(rx as usize, ry as usize) {
                    continue;
                }
            }
            let d = target.get(x as usize, y as usize) - reference.get(rx as usize, ry as usize);
            sum += d * d;
            n += 1;
        }
    }
    (if n == 0 { f64::INFINITY } else { sum / n as f64 }, n)
}

/// Vertex offset of the parabola through `(-1, a)`, `(0, b)`, `(1, c)`.
fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if !(denom > 0.0) || !a.is_finite() || !c.is_finite() {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Exhaustive integer search of the masked mean SSD over
/// `[-radius, radius]^2`, refined per axis by a parabola through the
/// minimum and its neighbours.
///
/// Shifts whose overlap of valid pixels is smaller than a sixteenth of
/// the image are skipped.
pub fn estimate_global_shift(
    reference: &ImagePlane,
    target: &ImagePlane,
    ref_valid: Option<&FenceMask>,
    tgt_valid: Option<&FenceMask>,
    radius: usize,
) -> Result<GlobalShift> {
    reference.ensure_same_dims(target, "global shift")?;
    let (w, h) = reference.dims();
    for m in [ref_valid, tgt_valid].into_iter().flatten() {
        m.ensure_dims(w, h)?;
    }
    if radius == 0 {
        return Err(Error::invalid("shift search radius must be at least 1"));
    }
    let min_overlap = (w * h / 16).max(1);
    let r = radius as isize;
    let side = 2 * radius + 1;
    let mut table = vec![f64::INFINITY; side * side];
    let mut best: Option<(f64, isize, isize)> = None;
    for dy in -r..=r {
        for dx in -r..=r {
            let (ssd, n) = masked_ssd(reference, target, ref_valid, tgt_valid, dx, dy);
            if n < min_overlap {
                continue;
            }
            table[((dy + r) as usize) * side + (dx + r) as usize] = ssd;
            if best.is_none_or(|(b, _, _)| ssd < b) {
                best = Some((ssd, dx, dy));
            }
        }
    }
    let Some((s0, bx, by)) = best else {
        return Err(Error::EstimationFailure(
            "no candidate shift overlaps enough valid pixels".into(),
        ));
    };
    let at = |dx: isize, dy: isize| -> f64 {
        if dx.abs() > r || dy.abs() > r {
            return f64::INFINITY;
        }
        table[((dy + r) as usize) * side + (dx + r) as usize]
    };
    let ox = parabola_offset(at(bx - 1, by), s0, at(bx + 1, by));
    let oy = parabola_offset(at(bx, by - 1), s0, at(bx, by + 1));
    Ok(GlobalShift::new(bx as f64 + ox, by as f64 + oy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(w: usize, h: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            128.0 + 50.0 * (0.31 * x + 0.17 * y).sin() + 40.0 * (0.23 * y - 0.11 * x).cos()
                + 20.0 * (0.07 * x * y / 8.0).sin()
        })
    }

    #[test]
    fn identical_frames_give_zero() {
        let a = texture(48, 40);
        let s = estimate_global_shift(&a, &a, None, None, 5).unwrap();
        assert_eq!(s, GlobalShift::new(0.0, 0.0));
    }

    #[test]
    fn zero_radius_rejected() {
        let a = texture(16, 16);
        assert!(estimate_global_shift(&a, &a, None, None, 0).is_err());
    }

    #[test]
    fn all_fence_mask_fails() {
        let a = texture(16, 16);
        let m = FenceMask::all_fence(16, 16);
        let err = estimate_global_shift(&a, &a, Some(&m), None, 2).unwrap_err();
        assert!(matches!(err, Error::EstimationFailure(_)));
    }

    #[test]
    fn parabola_vertex() {
        // y = (t - 0.25)^2 sampled at -1, 0, 1
        let f = |t: f64| (t - 0.25) * (t - 0.25);
        assert!((parabola_offset(f(-1.0), f(0.0), f(1.0)) - 0.25).abs() < 1e-12);
    }
}
