//! Tolerance-aware precision and recall of fence masks.

use crate::error::{Error, Result};
use crate::mask::FenceMask;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// A predicted fence pixel is correct when a true fence pixel lies within
/// Chebyshev distance `tol`; a true fence pixel is found when a predicted
/// one does. Empty sets score 1 for the side that has nothing to check.
pub fn mask_score(pred: &FenceMask, truth: &FenceMask, tol: usize) -> Result<MaskScore> {
    if pred.dims() != truth.dims() {
        return Err(Error::invalid(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let near_truth = truth.dilate(tol);
    let near_pred = pred.dilate(tol);
    let frac = |set: &FenceMask, near: &FenceMask| {
        let n = set.fence_count();
        if n == 0 {
            return 1.0;
        }
        let hit = set
            .valid_bits()
            .iter()
            .zip(near.valid_bits())
            .filter(|(s, n)| !**s && !**n)
            .count();
        hit as f64 / n as f64
    };
    let precision = frac(pred, &near_truth);
    let recall = frac(truth, &near_pred);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MaskScore { precision, recall, f1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar() -> FenceMask {
        FenceMask::from_fence_fn(20, 10, |x, _| (8..11).contains(&x))
    }

    #[test]
    fn identical_masks_score_one() {
        let s = mask_score(&bar(), &bar(), 0).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_prediction_has_zero_recall() {
        let s = mask_score(&FenceMask::all_valid(20, 10), &bar(), 1).unwrap();
        assert_eq!(s.recall, 0.0);
    }

    #[test]
    fn dilated_prediction_against_brute_force() {
        let truth = FenceMask::from_fence_fn(20, 10, |x, y| x == 5 || (x == 14 && y < 4));
        let pred = truth.dilate(2);
        let s = mask_score(&pred, &truth, 1).unwrap();
        assert_eq!(s.recall, 1.0);
        let mut tp = 0;
        for y in 0..10 {
            for x in 0..20 {
                if pred.is_fence(x, y) {
                    let near = (0..10).any(|ty: usize| {
                        (0..20).any(|tx: usize| truth.is_fence(tx, ty) && tx.abs_diff(x) <= 1 && ty.abs_diff(y) <= 1)
                    });
                    tp += near as usize;
                }
            }
        }
        assert!((s.precision - tp as f64 / pred.fence_count() as f64).abs() < 1e-15);
    }

    #[test]
    fn size_mismatch() {
        assert!(mask_score(&bar(), &FenceMask::all_valid(3, 3), 0).is_err());
    }
}
