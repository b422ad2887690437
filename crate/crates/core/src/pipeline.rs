//! Detection, motion estimation and reconstruction wired end to end.

use crate::error::{Error, Result};
use crate::fencegabor::GaborDetector;
use crate::fencesvm::{detect_fence_svm, SvmModel, SvmScanParams};
use crate::imgcore::{ColorImage, Kernel2D};
use crate::mask::FenceMask;
use crate::motion::{estimate_flow, estimate_global_shift, FlowField, FlowParams, GlobalShift};
use crate::solver::{defence, ConvergenceRecord, FrameOperator, Init, Motion, SolverParams};

#[derive(Clone, Debug)]
pub enum MaskSource {
    /// One mask per frame, used as is.
    Given(Vec<FenceMask>),
    Gabor(GaborDetector),
    Svm {
        model: SvmModel,
        scan: SvmScanParams,
        template: Option<FenceMask>,
    },
}

#[derive(Clone, Debug)]
pub enum MotionSource {
    /// `frame_m(p) = reference(p - shift_m)`, one per frame or one per
    /// non-reference frame.
    Shifts(Vec<GlobalShift>),
    /// Backward warp fields `frame_m(p) = reference(p + flow_m(p))`, one per
    /// frame or one per non-reference frame.
    Flows(Vec<FlowField>),
    /// Masked global translation search with the given radius.
    GlobalSearch { radius: usize },
    Dense(FlowParams),
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub masks: MaskSource,
    pub motion: MotionSource,
    pub solver: SolverParams,
    pub init: Init,
    /// Optional blur kernel shared by all frames.
    pub psf: Kernel2D,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub image: ColorImage,
    pub masks: Vec<FenceMask>,
    pub motions: Vec<Motion>,
    pub log: Vec<ConvergenceRecord>,
}

/// The first frame is the reference.
pub fn run_pipeline(frames: &[ColorImage], cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let n = frames.len();
    if n == 0 {
        return Err(Error::invalid("no frames given").in_stage("input"));
    }
    let (w, h) = frames[0].dims();
    if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != (w, h)) {
        return Err(Error::invalid(format!(
            "frame {} is {}x{}, frame 1 is {w}x{h}",
            i + 1,
            f.width(),
            f.height()
        ))
        .in_stage("input"));
    }
    let masks = detect_masks(frames, &cfg.masks).map_err(|e| e.in_stage("detection"))?;
    let motions = estimate_motions(frames, &masks, &cfg.motion).map_err(|e| e.in_stage("motion"))?;
    let ops = masks
        .iter()
        .zip(&motions)
        .map(|(m, mo)| FrameOperator::new(m, mo, &cfg.psf))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("operators"))?;
    let (image, log) = defence(frames, &ops, &cfg.solver, cfg.init).map_err(|e| e.in_stage("solver"))?;
    Ok(PipelineOutput {
        image,
        masks,
        motions,
        log,
    })
}

fn detect_masks(frames: &[ColorImage], source: &MaskSource) -> Result<Vec<FenceMask>> {
    let (w, h) = frames[0].dims();
    match source {
        MaskSource::Given(masks) => {
            if masks.len() != frames.len() {
                return Err(Error::invalid(format!("{} frames but {} masks", frames.len(), masks.len())));
            }
            for (i, m) in masks.iter().enumerate() {
                if m.dims() != (w, h) {
                    return Err(Error::invalid(format!(
                        "mask {} is {}x{}, frames are {w}x{h}",
                        i + 1,
                        m.width(),
                        m.height()
                    )));
                }
            }
            Ok(masks.clone())
        }
        MaskSource::Gabor(det) => frames.iter().map(|f| det.detect(&f.to_grayscale())).collect(),
        MaskSource::Svm { model, scan, template } => frames
            .iter()
            .map(|f| Ok(detect_fence_svm(&f.to_grayscale(), model, scan, template.as_ref())?.mask))
            .collect(),
    }
}

/// Expands a per-auxiliary-frame list with an identity entry for the
/// reference.
fn per_frame<T: Clone>(items: &[T], n: usize, identity: T, what: &str) -> Result<Vec<T>> {
    if items.len() == n {
        Ok(items.to_vec())
    } else if items.len() + 1 == n {
        Ok(std::iter::once(identity).chain(items.iter().cloned()).collect())
    } else {
        Err(Error::invalid(format!("{n} frames but {} {what}", items.len())))
    }
}

fn estimate_motions(frames: &[ColorImage], masks: &[FenceMask], source: &MotionSource) -> Result<Vec<Motion>> {
    let n = frames.len();
    let (w, h) = frames[0].dims();
    match source {
        MotionSource::Shifts(shifts) => Ok(per_frame(shifts, n, GlobalShift::default(), "shifts")?
            .into_iter()
            .map(Motion::Shift)
            .collect()),
        MotionSource::Flows(flows) => {
            let flows = per_frame(flows, n, FlowField::zeros(w, h), "flows")?;
            for (i, f) in flows.iter().enumerate() {
                if f.dims() != (w, h) {
                    return Err(Error::invalid(format!(
                        "flow {} is {}x{}, frames are {w}x{h}",
                        i + 1,
                        f.width(),
                        f.height()
                    )));
                }
            }
            Ok(flows.into_iter().map(Motion::Warp).collect())
        }
        MotionSource::GlobalSearch { radius } => {
            let reference = frames[0].to_grayscale();
            let mut out = vec![Motion::identity()];
            for (f, m) in frames.iter().zip(masks).skip(1) {
                let s = estimate_global_shift(&reference, &f.to_grayscale(), Some(&masks[0]), Some(m), *radius)?;
                out.push(Motion::Shift(s));
            }
            Ok(out)
        }
        MotionSource::Dense(params) => {
            let reference = frames[0].to_grayscale();
            let mut out = vec![Motion::identity()];
            for f in &frames[1..] {
                out.push(Motion::Warp(estimate_flow(&f.to_grayscale(), &reference, params)?));
            }
            Ok(out)
        }
    }
}
