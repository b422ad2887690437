//! RBF-kernel C-SVM trained by SMO with maximal-violating-pair working
//! sets, plus stratified k-fold grid search over `(C, gamma)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fencesvm::hog::HogDescriptor;

pub const SMO_TOL: f64 = 1e-3;
pub const SMO_MAX_ITER: usize = 10_000;
const TAU: f64 = 1e-12;

/// `exp(-gamma * ||a - b||^2)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "descriptor lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid("rbf gamma must be positive"));
    }
    Ok((-gamma * sq_dist(a, b)).exp())
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Trained classifier: `f(d) = sum_i coef_i k(sv_i, d) + bias`, positive
/// for fence.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i`.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    /// Window the descriptors were computed on, `(width, height)`.
    pub window: (usize, usize),
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.dim() {
            return Err(Error::invalid(format!(
                "descriptor has {} values, model expects {}",
                d.len(),
                self.dim()
            )));
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * (-self.gamma * sq_dist(sv, d)).exp())
            .sum::<f64>()
            + self.bias)
    }

    /// Bound on `|f(d + delta) - f(d)| / ||delta||` near `d`:
    /// `sum |coef_i| * 2 gamma * ||sv_i - d|| * k(sv_i, d)`, plus the
    /// second-order slack for perturbations up to `radius`.
    pub fn local_lipschitz(&self, d: &[f64], radius: f64) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| {
                let r = sq_dist(sv, d).sqrt();
                c.abs() * 2.0 * self.gamma * (r + radius)
            })
            .sum()
    }
}

pub fn svm_decision(model: &SvmModel, d: &HogDescriptor) -> Result<f64> {
    model.decision(d.values())
}

/// Result of one SMO run on a precomputed kernel matrix.
struct DualSolution {
    alpha: Vec<f64>,
    rho: f64,
}

/// SMO on `min 1/2 a^T Q a - e^T a`, `0 <= a <= c`, `y^T a = 0`,
/// `Q_ij = y_i y_j K_ij`.
fn smo(kernel: &dyn Fn(usize, usize) -> f64, y: &[f64], c: f64) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel(i, j);
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt < 0.0 && a < c) || (yt > 0.0 && a > 0.0);

    for _ in 0..SMO_MAX_ITER {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < SMO_TOL {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (qii, qjj, qij) = (q(i, i), q(j, j), q(i, j));
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // Offset from free vectors, or the midpoint of the feasible interval.
    let mut free_sum = 0.0;
    let mut free_n = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += yg;
            free_n += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };
    DualSolution { alpha, rho }
}

/// Pairwise squared distances, computed once per training set.
fn distance_matrix(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(&x[i], &x[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

fn check_training_set(x: &[Vec<f64>], y: &[f64], min_per_class: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid("descriptor and label counts differ"));
    }
    if y.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    let pos = y.iter().filter(|&&l| l > 0.0).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("training data must contain both classes"));
    }
    if pos < min_per_class || neg < min_per_class {
        return Err(Error::invalid(format!(
            "need at least {min_per_class} samples per class, have {pos} positive and {neg} negative"
        )));
    }
    if let Some(first) = x.first() {
        if first.is_empty() || x.iter().any(|v| v.len() != first.len()) {
            return Err(Error::invalid("descriptors must share one non-zero length"));
        }
    }
    Ok(())
}

fn fit_indices(
    x: &[Vec<f64>],
    y: &[f64],
    dist: &[f64],
    idx: &[usize],
    c: f64,
    gamma: f64,
    window: (usize, usize),
) -> SvmModel {
    let n = x.len();
    let sub_y: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let kernel = |a: usize, b: usize| (-gamma * dist[idx[a] * n + idx[b]]).exp();
    let sol = smo(&kernel, &sub_y, c);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (k, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[idx[k]].clone());
            dual_coefs.push(a * sub_y[k]);
        }
    }
    SvmModel {
        support_vectors,
        dual_coefs,
        bias: -sol.rho,
        gamma,
        window,
    }
}

/// Fits one model on all samples.
pub fn fit(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, window: (usize, usize)) -> Result<SvmModel> {
    check_training_set(x, y, 1)?;
    if !(c > 0.0) || !(gamma > 0.0) {
        return Err(Error::invalid("C and gamma must be positive"));
    }
    let dist = distance_matrix(x);
    let idx: Vec<usize> = (0..x.len()).collect();
    Ok(fit_indices(x, y, &dist, &idx, c, gamma, window))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmGrid {
    pub c_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
}

impl Default for SvmGrid {
    /// `C = 2^-3 .. 2^7` in powers of 2, `gamma = 2^-15 .. 2^1` in powers of 4.
    fn default() -> Self {
        Self {
            c_values: (-3..=7).map(|e| 2f64.powi(e)).collect(),
            gamma_values: (-15..=1).step_by(2).map(|e| 2f64.powi(e)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvPoint {
    pub c: f64,
    pub gamma: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub points: Vec<CvPoint>,
    /// Gamma values left out because every off-diagonal kernel entry of
    /// the training set fell below [`DIAGONAL_KERNEL_EPS`].
    pub skipped_gammas: Vec<f64>,
    pub best: CvPoint,
    pub folds: usize,
    pub training_accuracy: f64,
}

/// Below this, off-diagonal kernel values are treated as zero. A Gram
/// matrix with no larger entry off the diagonal fits every training point
/// in isolation: decisions elsewhere are all `bias` plus noise.
pub const DIAGONAL_KERNEL_EPS: f64 = 1e-12;

/// Stratified fold assignment: each class is shuffled with the seed and
/// dealt round-robin into `folds` folds.
pub fn stratified_folds(y: &[f64], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; y.len()];
    for class in [1.0, -1.0] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut rng);
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

/// Grid search with stratified k-fold cross-validation, then a refit of the
/// best `(C, gamma)` on all data. Ties prefer the smaller `C`, then the
/// smaller `gamma`.
pub fn train_svm_descriptors(
    x: &[Vec<f64>],
    y: &[f64],
    grid: &SvmGrid,
    folds: usize,
    seed: u64,
    window: (usize, usize),
) -> Result<(SvmModel, CvReport)> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    check_training_set(x, y, folds)?;
    if grid.c_values.is_empty() || grid.gamma_values.is_empty() {
        return Err(Error::invalid("empty hyper-parameter grid"));
    }
    if grid.c_values.iter().chain(&grid.gamma_values).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("grid values must be positive"));
    }
    let mut cs = grid.c_values.clone();
    let mut gs = grid.gamma_values.clone();
    cs.sort_by(f64::total_cmp);
    gs.sort_by(f64::total_cmp);

    let n = x.len();
    let dist = distance_matrix(x);
    let nearest = dist
        .iter()
        .enumerate()
        .filter(|&(k, _)| k / n != k % n)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let (gs, skipped_gammas): (Vec<f64>, Vec<f64>) =
        gs.into_iter().partition(|g| (-g * nearest).exp() >= DIAGONAL_KERNEL_EPS);
    if gs.is_empty() {
        return Err(Error::invalid(
            "every gamma in the grid makes the kernel matrix numerically diagonal",
        ));
    }
    let fold_of = stratified_folds(y, folds, seed);
    let mut points = Vec::with_capacity(cs.len() * gs.len());
    let mut best: Option<CvPoint> = None;
    for &c in &cs {
        for &gamma in &gs {
            let mut correct = 0usize;
            for f in 0..folds {
                let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
                let model = fit_indices(x, y, &dist, &train, c, gamma, window);
                for i in (0..n).filter(|&i| fold_of[i] == f) {
                    let score = model.decision(&x[i])?;
                    if (score > 0.0) == (y[i] > 0.0) {
                        correct += 1;
                    }
                }
            }
            let point = CvPoint {
                c,
                gamma,
                accuracy: correct as f64 / n as f64,
            };
            points.push(point);
            if best.is_none_or(|b| point.accuracy > b.accuracy) {
                best = Some(point);
            }
        }
    }
    let best = best.expect("grid is non-empty");
    let idx: Vec<usize> = (0..n).collect();
    let model = fit_indices(x, y, &dist, &idx, best.c, best.gamma, window);
    let mut hits = 0usize;
    for (xi, &yi) in x.iter().zip(y) {
        if (model.decision(xi)? > 0.0) == (yi > 0.0) {
            hits += 1;
        }
    }
    Ok((
        model,
        CvReport {
            points,
            skipped_gammas,
            best,
            folds,
            training_accuracy: hits as f64 / n as f64,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(rbf_kernel(&a, &a, 0.7).unwrap(), 1.0);
        let b = [1.0, 2.0, 4.0];
        assert!((rbf_kernel(&a, &b, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let mut last = 1.0;
        for g in [0.1, 1.0, 10.0, 100.0] {
            let k = rbf_kernel(&a, &b, g).unwrap();
            assert!(k < last && k > 0.0);
            last = k;
        }
        assert!(rbf_kernel(&a, &[1.0], 1.0).is_err());
        assert!(rbf_kernel(&a, &b, 0.0).is_err());
    }

    #[test]
    fn two_point_problem_is_symmetric() {
        let v = vec![0.3, -0.2, 0.5];
        let w: Vec<f64> = v.iter().map(|t| -t).collect();
        let m = fit(&[v, w], &[1.0, -1.0], 1.0, 0.5, (0, 0)).unwrap();
        assert!(m.decision(&[0.0, 0.0, 0.0]).unwrap().abs() < 1e-6);
        assert_eq!(m.support_vectors.len(), 2);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0]; 6];
        let y = vec![1.0; 6];
        assert!(fit(&x, &y, 1.0, 1.0, (0, 0)).is_err());
        assert!(train_svm_descriptors(&x, &y, &SvmGrid::default(), 5, 1, (0, 0)).is_err());
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<f64> = (0..23).map(|i| if i < 13 { 1.0 } else { -1.0 }).collect();
        let f = stratified_folds(&y, 5, 3);
        for k in 0..5 {
            let pos = (0..23).filter(|&i| f[i] == k && y[i] > 0.0).count();
            let neg = (0..23).filter(|&i| f[i] == k && y[i] < 0.0).count();
            assert!((2..=3).contains(&pos), "{pos}");
            assert!((1..=2).contains(&neg), "{neg}");
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = SvmGrid::default();
        assert_eq!(g.c_values.len(), 11);
        assert_eq!(g.c_values[0], 0.125);
        assert_eq!(g.gamma_values.len(), 9);
        assert_eq!(g.gamma_values[0], 2f64.powi(-15));
        assert_eq!(*g.gamma_values.last().unwrap(), 2.0);
    }
}
