//! Split Bregman minimization of
//! `1/2 sum_m ||y_m - A_m x||^2 + mu ||grad x||_1`.
//!
//! The gradient is split off as `d = grad x` with Bregman variable `b`.
//! Each outer iteration runs a few gradient-descent steps on the quadratic
//! `x` problem, soft-thresholds `grad x + b` into `d` and updates `b`.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgcore::io::write_bytes_atomic;
use crate::imgcore::{ColorImage, ImagePlane};
use crate::solver::operators::{grad, grad_adjoint, FrameOperator, GradPair, LinearOperator};

const MIN_STEP: f64 = 1e-8;
/// Relative slack on the descent test so rounding noise at a stationary
/// point is not mistaken for an increase.
const DESCENT_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TvMode {
    #[default]
    Isotropic,
    Anisotropic,
}

/// Which ratio of the two weights is used as the shrinkage threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ShrinkRule {
    /// `mu / lambda`, the minimizer of the `d` subproblem.
    #[default]
    MuOverLambda,
    /// `lambda / mu`; kept only to compare against.
    LambdaOverMu,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    /// TV weight.
    pub mu: f64,
    /// Weight of the `||d - grad x - b||^2` coupling term.
    pub lambda: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Gradient-descent step; `None` uses `1 / L` for the bound `L` on the
    /// normal operator.
    pub step_tau: Option<f64>,
    /// Stop once the relative change of `x` drops below this.
    pub tol: f64,
    pub tv_mode: TvMode,
    pub shrink_rule: ShrinkRule,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            mu: 1e-5,
            lambda: 0.01,
            outer_iters: 50,
            inner_iters: 10,
            step_tau: None,
            tol: 1e-4,
            tv_mode: TvMode::Isotropic,
            shrink_rule: ShrinkRule::MuOverLambda,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.mu) || !positive(self.lambda) {
            return Err(Error::invalid("mu and lambda must be positive"));
        }
        if let Some(t) = self.step_tau {
            if !positive(t) {
                return Err(Error::invalid("step size must be positive"));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tolerance must be non-negative"));
        }
        if self.outer_iters == 0 {
            return Err(Error::invalid("at least one outer iteration is required"));
        }
        Ok(())
    }

    pub fn shrink_threshold(&self) -> f64 {
        match self.shrink_rule {
            ShrinkRule::MuOverLambda => self.mu / self.lambda,
            ShrinkRule::LambdaOverMu => self.lambda / self.mu,
        }
    }
}

/// One row of the convergence log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub iter: usize,
    pub data_energy: f64,
    pub tv_energy: f64,
    pub total: f64,
    pub rel_change: f64,
}

pub const CSV_HEADER: &str = "iter,data_energy,tv_energy,total,rel_change";

pub fn records_to_csv(records: &[ConvergenceRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e}\n",
            r.iter, r.data_energy, r.tv_energy, r.total, r.rel_change
        ));
    }
    out
}

pub fn write_convergence_csv(path: impl AsRef<Path>, records: &[ConvergenceRecord]) -> Result<()> {
    write_bytes_atomic(path, records_to_csv(records).as_bytes())
}

/// Writes the log to any sink, e.g. stdout.
pub fn write_convergence(mut sink: impl Write, records: &[ConvergenceRecord]) -> std::io::Result<()> {
    sink.write_all(records_to_csv(records).as_bytes())
}

/// Soft thresholding of a gradient field.
///
/// Isotropic mode shrinks the per-pixel magnitude `sqrt(gx^2 + gy^2)`;
/// anisotropic mode shrinks each component on its own.
pub fn shrink(v: &GradPair, threshold: f64, mode: TvMode) -> GradPair {
    let mut out = v.clone();
    match mode {
        TvMode::Anisotropic => {
            for p in out.gx.data_mut().iter_mut().chain(out.gy.data_mut().iter_mut()) {
                *p = shrink_scalar(*p, threshold);
            }
        }
        TvMode::Isotropic => {
            let GradPair { gx, gy } = &mut out;
            for (a, b) in gx.data_mut().iter_mut().zip(gy.data_mut().iter_mut()) {
                let s = (*a * *a + *b * *b).sqrt();
                let scale = if s > 0.0 { (s - threshold).max(0.0) / s } else { 0.0 };
                *a *= scale;
                *b *= scale;
            }
        }
    }
    out
}

/// `sign(v) * max(|v| - t, 0)`.
#[inline]
pub fn shrink_scalar(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn tv_norm(g: &GradPair, mode: TvMode) -> f64 {
    let (gx, gy) = (g.gx.data(), g.gy.data());
    match mode {
        TvMode::Isotropic => gx.iter().zip(gy).map(|(a, b)| (a * a + b * b).sqrt()).sum(),
        TvMode::Anisotropic => gx.iter().chain(gy).map(|v| v.abs()).sum(),
    }
}

/// The observation set for one color channel.
#[derive(Clone, Copy)]
pub struct Channel<'a> {
    pub ops: &'a [FrameOperator],
    pub ys: &'a [&'a ImagePlane],
}

impl Channel<'_> {
    fn check(&self) -> Result<()> {
        if self.ops.is_empty() {
            return Err(Error::invalid("at least one observation is required"));
        }
        if self.ops.len() != self.ys.len() {
            return Err(Error::invalid("observation count mismatch"));
        }
        let dims = self.ops[0].dims();
        if self.ops.iter().any(|o| o.dims() != dims) || self.ys.iter().any(|y| y.dims() != dims) {
            return Err(Error::invalid("observations differ in size"));
        }
        Ok(())
    }

    /// `1/2 sum ||A_m x - y_m||^2` and the residuals.
    fn residuals(&self, x: &ImagePlane) -> (f64, Vec<ImagePlane>) {
        let mut energy = 0.0;
        let res = self
            .ops
            .iter()
            .zip(self.ys)
            .map(|(op, y)| {
                let mut r = op.forward(x);
                // O y: fence pixels of y never enter the data term.
                for ((rv, &yv), &valid) in r
                    .data_mut()
                    .iter_mut()
                    .zip(y.data())
                    .zip(op.effective_mask().valid_bits())
                {
                    if valid {
                        *rv -= yv;
                    }
                }
                energy += 0.5 * r.norm_sq();
                r
            })
            .collect();
        (energy, res)
    }

    pub fn data_energy(&self, x: &ImagePlane) -> f64 {
        self.residuals(x).0
    }
}

/// Default gradient-descent step `1 / (sum_m ||A_m||^2 + 8 lambda)`.
pub fn default_step(ops: &[FrameOperator], lambda: f64) -> f64 {
    let data: f64 = ops.iter().map(FrameOperator::norm_sq_bound).sum();
    1.0 / (data + 8.0 * lambda)
}

#[derive(Clone, Debug)]
pub struct BregmanState {
    pub x: ImagePlane,
    pub d: GradPair,
    pub b: GradPair,
    pub iter: usize,
    /// Current step size; halved by backtracking and kept for later steps.
    pub tau: f64,
}

impl BregmanState {
    pub fn new(x: ImagePlane, tau: f64) -> Self {
        let (w, h) = x.dims();
        Self {
            x,
            d: GradPair::zeros(w, h),
            b: GradPair::zeros(w, h),
            iter: 0,
            tau,
        }
    }
}

/// Value and gradient of
/// `1/2 sum ||A_m x - y_m||^2 + lambda/2 ||d - grad x + b||^2`.
fn x_objective(
    ch: &Channel,
    x: &ImagePlane,
    d: &GradPair,
    b: &GradPair,
    lambda: f64,
) -> (f64, ImagePlane) {
    let (data, res) = ch.residuals(x);
    let coupling = grad(x).sub(d).add(b);
    let value = data + 0.5 * lambda * coupling.norm_sq();
    let mut g = grad_adjoint(&coupling);
    g.data_mut().iter_mut().for_each(|v| *v *= lambda);
    for (op, r) in ch.ops.iter().zip(&res) {
        g.add_assign_scaled(&op.adjoint(r), 1.0);
    }
    (value, g)
}

/// Objective of the `x` subproblem at `x` for the current `d`, `b`.
pub fn x_subproblem_objective(state: &BregmanState, ch: &Channel, lambda: f64, x: &ImagePlane) -> f64 {
    x_objective(ch, x, &state.d, &state.b, lambda).0
}

/// Runs `inner_iters` gradient-descent steps on the `x` subproblem from
/// `state.x`. A step that would increase the objective is rejected and
/// retried with half the step size.
pub fn solve_x_subproblem(state: &mut BregmanState, ch: &Channel, p: &SolverParams) -> Result<ImagePlane> {
    ch.check()?;
    let (mut f, mut g) = x_objective(ch, &state.x, &state.d, &state.b, p.lambda);
    let mut x = state.x.clone();
    for _ in 0..p.inner_iters {
        loop {
            let candidate = x.lincomb(1.0, &g, -state.tau);
            let (f_new, g_new) = x_objective(ch, &candidate, &state.d, &state.b, p.lambda);
            if !f_new.is_finite() {
                return Err(Error::SolverFailure("objective became non-finite".into()));
            }
            if f_new <= f + DESCENT_SLACK * f.abs().max(1.0) {
                x = candidate;
                f = f_new;
                g = g_new;
                break;
            }
            state.tau *= 0.5;
            if state.tau < MIN_STEP {
                return Err(Error::SolverFailure(format!(
                    "gradient step underflow (tau < {MIN_STEP:e}) at outer iteration {}",
                    state.iter + 1
                )));
            }
        }
    }
    Ok(x)
}

/// Per-channel quantities needed to assemble a [`ConvergenceRecord`].
#[derive(Clone, Copy, Debug)]
pub struct StepStats {
    pub data_energy: f64,
    pub tv_energy: f64,
    pub change_sq: f64,
    pub prev_norm_sq: f64,
}

impl StepStats {
    pub fn record(iter: usize, parts: &[StepStats]) -> ConvergenceRecord {
        let data_energy: f64 = parts.iter().map(|s| s.data_energy).sum();
        let tv_energy: f64 = parts.iter().map(|s| s.tv_energy).sum();
        let change: f64 = parts.iter().map(|s| s.change_sq).sum::<f64>().sqrt();
        let prev: f64 = parts.iter().map(|s| s.prev_norm_sq).sum::<f64>().sqrt();
        ConvergenceRecord {
            iter,
            data_energy,
            tv_energy,
            total: data_energy + tv_energy,
            rel_change: if prev > 0.0 { change / prev } else { change },
        }
    }
}

/// One outer iteration: `x` update, shrinkage of `grad x + b` into `d`,
/// then `b <- grad x + b - d`.
pub fn bregman_step_stats(state: &mut BregmanState, ch: &Channel, p: &SolverParams) -> Result<StepStats> {
    let x_new = solve_x_subproblem(state, ch, p)?;
    let change_sq = x_new.sub(&state.x).norm_sq();
    let prev_norm_sq = state.x.norm_sq();
    let g = grad(&x_new);
    let gb = g.add(&state.b);
    let d = shrink(&gb, p.shrink_threshold(), p.tv_mode);
    state.b = gb.sub(&d);
    state.d = d;
    state.x = x_new;
    state.iter += 1;
    Ok(StepStats {
        data_energy: ch.data_energy(&state.x),
        tv_energy: p.mu * tv_norm(&g, p.tv_mode),
        change_sq,
        prev_norm_sq,
    })
}

pub fn bregman_step(state: &mut BregmanState, ch: &Channel, p: &SolverParams) -> Result<ConvergenceRecord> {
    let stats = bregman_step_stats(state, ch, p)?;
    Ok(StepStats::record(state.iter, &[stats]))
}

/// Single-channel solve until the relative change drops below `tol` or
/// `outer_iters` is reached.
pub fn solve_channel(
    x0: ImagePlane,
    ch: &Channel,
    p: &SolverParams,
) -> Result<(ImagePlane, Vec<ConvergenceRecord>)> {
    p.validate()?;
    ch.check()?;
    let tau = p.step_tau.unwrap_or_else(|| default_step(ch.ops, p.lambda));
    let mut state = BregmanState::new(x0, tau);
    let mut log = Vec::new();
    for _ in 0..p.outer_iters {
        let rec = bregman_step(&mut state, ch, p)?;
        log.push(rec);
        if rec.rel_change < p.tol {
            break;
        }
    }
    Ok((state.x, log))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform noise over `[0, 255]`.
    RandomUniform { seed: u64 },
    /// The reference frame with unobserved pixels set to 128.
    ReferenceFrame,
}

impl Default for Init {
    fn default() -> Self {
        Init::RandomUniform { seed: 7 }
    }
}

fn initial_planes(init: Init, frames: &[ColorImage], ops: &[FrameOperator]) -> [ImagePlane; 3] {
    let (w, h) = frames[0].dims();
    match init {
        Init::RandomUniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            std::array::from_fn(|_| ImagePlane::from_fn(w, h, |_, _| rng.random_range(0.0..=255.0)))
        }
        Init::ReferenceFrame => {
            let mask = ops[0].effective_mask();
            std::array::from_fn(|c| {
                let y = frames[0].plane(c);
                ImagePlane::from_fn(w, h, |x, yy| if mask.is_valid(x, yy) { y.get(x, yy) } else { 128.0 })
            })
        }
    }
}

/// Recovers the fence-free color image from frames and their operators.
///
/// The three channels are independent problems. They are stepped in
/// lockstep so that the log has one row per outer iteration, with
/// energies summed over channels and the relative change measured on the
/// stacked color vector. The result is clipped to `[0, 255]`.
pub fn defence(
    frames: &[ColorImage],
    ops: &[FrameOperator],
    p: &SolverParams,
    init: Init,
) -> Result<(ColorImage, Vec<ConvergenceRecord>)> {
    p.validate()?;
    if frames.is_empty() || frames.len() != ops.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} frame operators",
            frames.len(),
            ops.len()
        )));
    }
    let dims = frames[0].dims();
    if frames.iter().any(|f| f.dims() != dims) || ops.iter().any(|o| o.dims() != dims) {
        return Err(Error::invalid("frames, masks and motions must share one size"));
    }
    let tau = p.step_tau.unwrap_or_else(|| default_step(ops, p.lambda));
    let mut states = initial_planes(init, frames, ops).map(|x| BregmanState::new(x, tau));
    let ys: [Vec<&ImagePlane>; 3] = std::array::from_fn(|c| frames.iter().map(|f| f.plane(c)).collect());

    let mut log = Vec::with_capacity(p.outer_iters);
    for it in 1..=p.outer_iters {
        let mut parts = Vec::with_capacity(3);
        for (state, y) in states.iter_mut().zip(&ys) {
            let ch = Channel { ops, ys: y };
            parts.push(bregman_step_stats(state, &ch, p)?);
        }
        let rec = StepStats::record(it, &parts);
        log.push(rec);
        if rec.rel_change < p.tol {
            break;
        }
    }
    let [r, g, b] = states.map(|s| s.x.clamp_to_byte_range());
    Ok((ColorImage::from_planes(r, g, b)?, log))
}
