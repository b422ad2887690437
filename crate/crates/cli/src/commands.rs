use std::fs;
use std::path::Path;

use defence_core::fencegabor::{GaborDetector, GaborParams, Threshold};
use defence_core::fencesvm::{
    detect_fence_svm, load_patch_dir, read_model, train_svm, write_model, HogConfig, SvmGrid, SvmModel,
    SvmScanParams,
};
use defence_core::imgcore::metrics::{psnr, ssim};
use defence_core::imgcore::{gaussian_kernel, read_image, write_image, ColorImage};
use defence_core::motion::{estimate_flow, estimate_global_shift, read_flo, write_flo, FlowParams};
use defence_core::pipeline::{run_pipeline, MaskSource, MotionSource, PipelineConfig};
use defence_core::score::mask_score;
use defence_core::solver::{write_convergence_csv, Init, Motion, ShrinkRule, SolverParams, TvMode};
use defence_core::synth::{synth_generate, textured_image, SynthConfig};
use defence_core::{Error, FenceMask, GlobalShift, Kernel2D, Result};

use crate::args::*;

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Detect(a) => detect(&a),
        Command::TrainSvm(a) => train(&a),
        Command::Flow(a) => flow(&a),
        Command::Shift(a) => shift(&a),
        Command::Run(a) => run(&a),
        Command::Synth(a) => synth(&a),
        Command::Metrics(a) => metrics(&a),
        Command::MaskScore(a) => score(&a),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn gabor_detector(g: &GaborArgs) -> Result<GaborDetector> {
    let base = GaborParams::new(g.lambda, 0.0, g.psi, g.sigma, g.gamma)?;
    Ok(GaborDetector {
        thetas_deg: g.thetas.clone(),
        base,
        threshold: match g.threshold {
            ThresholdArg::Otsu => Threshold::Otsu,
            ThresholdArg::Fixed(t) => Threshold::Fixed(t),
        },
        dilate_iters: g.dilate,
        refine: !g.raw,
    })
}

struct SvmSetup {
    model: SvmModel,
    scan: SvmScanParams,
    template: Option<FenceMask>,
}

fn svm_setup(a: &SvmScanArgs) -> Result<SvmSetup> {
    let path = a.model.as_ref().ok_or_else(|| invalid("--model is required for svm detection"))?;
    Ok(SvmSetup {
        model: read_model(path)?,
        scan: SvmScanParams {
            stride: a.stride,
            scales: a.scales.clone(),
        },
        template: a.template.as_ref().map(FenceMask::read_png).transpose()?,
    })
}

fn detect(a: &DetectArgs) -> Result<()> {
    let gray = read_image(&a.input)?.to_grayscale();
    let mask = match a.method {
        Method::Gabor => gabor_detector(&a.gabor)?.detect(&gray)?,
        Method::Svm => {
            let s = svm_setup(&a.svm)?;
            let found = detect_fence_svm(&gray, &s.model, &s.scan, s.template.as_ref())?;
            for scale in &found.skipped_scales {
                eprintln!("warning: scale {scale} skipped, the window does not fit");
            }
            found.mask
        }
    };
    mask.write_png(&a.output)?;
    println!("fence pixels {} of {}", mask.fence_count(), mask.width() * mask.height());
    Ok(())
}

fn train(a: &TrainSvmArgs) -> Result<()> {
    let cfg = HogConfig::with_window(a.window.0, a.window.1)?;
    let mut patches = load_patch_dir(&a.pos, 1.0, &cfg)?;
    patches.extend(load_patch_dir(&a.neg, -1.0, &cfg)?);
    let (model, report) = train_svm(&patches, &cfg, &SvmGrid::default(), a.folds, a.seed)?;
    write_model(&a.out, &model)?;
    println!(
        "C {} gamma {} cv_accuracy {:.4} training_accuracy {:.4} support_vectors {}",
        report.best.c,
        report.best.gamma,
        report.best.accuracy,
        report.training_accuracy,
        model.support_vectors.len()
    );
    Ok(())
}

fn flow_params(f: &FlowParamArgs) -> FlowParams {
    FlowParams {
        levels: f.levels.0,
        alpha: f.alpha,
        iters: f.iters,
        warps: f.warps,
        presmooth_sigma: f.presmooth,
        ..FlowParams::default()
    }
}

fn flow(a: &FlowArgs) -> Result<()> {
    let r = read_image(&a.reference)?.to_grayscale();
    let t = read_image(&a.tgt)?.to_grayscale();
    let f = estimate_flow(&r, &t, &flow_params(&a.params))?;
    write_flo(&a.out, &f)
}

fn shift(a: &ShiftArgs) -> Result<()> {
    let r = read_image(&a.reference)?.to_grayscale();
    let t = read_image(&a.tgt)?.to_grayscale();
    let rm = a.mask.as_ref().map(FenceMask::read_png).transpose()?;
    let tm = a.tgt_mask.as_ref().map(FenceMask::read_png).transpose()?;
    let s = estimate_global_shift(&r, &t, rm.as_ref(), tm.as_ref(), a.radius)?;
    println!("{} {}", s.dx, s.dy);
    Ok(())
}

fn run(a: &RunArgs) -> Result<()> {
    let frames = a.frames.iter().map(read_image).collect::<Result<Vec<ColorImage>>>()?;
    let detect = a.detect.unwrap_or(if a.masks.is_empty() {
        DetectChoice::Gabor
    } else {
        DetectChoice::None
    });
    let masks = match detect {
        DetectChoice::None => {
            if a.masks.is_empty() {
                return Err(invalid("--detect none needs --masks"));
            }
            MaskSource::Given(a.masks.iter().map(FenceMask::read_png).collect::<Result<_>>()?)
        }
        DetectChoice::Gabor => MaskSource::Gabor(gabor_detector(&GaborArgs::from(&a.gabor))?),
        DetectChoice::Svm => {
            let s = svm_setup(&a.svm)?;
            MaskSource::Svm {
                model: s.model,
                scan: s.scan,
                template: s.template,
            }
        }
    };
    let motion = if !a.flows.is_empty() {
        MotionSource::Flows(a.flows.iter().map(read_flo).collect::<Result<_>>()?)
    } else if let Some(s) = &a.shifts {
        MotionSource::Shifts(s.0.iter().map(|&(dx, dy)| GlobalShift::new(dx, dy)).collect())
    } else {
        match a.motion {
            MotionChoice::Global => MotionSource::GlobalSearch { radius: a.radius },
            MotionChoice::Dense => MotionSource::Dense(flow_params(&a.flow)),
        }
    };
    let solver = SolverParams {
        mu: a.mu,
        lambda: a.split_lambda,
        outer_iters: a.outer,
        inner_iters: a.inner,
        step_tau: a.tau,
        tol: a.tol,
        tv_mode: match a.tv {
            TvChoice::Isotropic => TvMode::Isotropic,
            TvChoice::Anisotropic => TvMode::Anisotropic,
        },
        shrink_rule: if a.swap_shrink {
            ShrinkRule::LambdaOverMu
        } else {
            ShrinkRule::MuOverLambda
        },
    };
    solver.validate()?;
    let psf = if a.psf_sigma > 0.0 {
        gaussian_kernel(a.psf_sigma)?
    } else if a.psf_sigma == 0.0 {
        Kernel2D::identity()
    } else {
        return Err(invalid("--psf-sigma must be non-negative"));
    };
    let init = match a.init {
        InitChoice::Random => Init::RandomUniform { seed: a.seed },
        InitChoice::Reference => Init::ReferenceFrame,
    };
    let cfg = PipelineConfig {
        masks,
        motion,
        solver,
        init,
        psf,
    };
    for dir in [&a.save_masks, &a.save_flows].into_iter().flatten() {
        ensure_dir(dir)?;
    }
    let out = run_pipeline(&frames, &cfg)?;

    write_image(&a.out, &out.image)?;
    if let Some(log) = &a.log {
        write_convergence_csv(log, &out.log)?;
    }
    if let Some(dir) = &a.save_masks {
        for (i, m) in out.masks.iter().enumerate() {
            m.write_png(dir.join(format!("mask{}.png", i + 1)))?;
        }
    }
    if let Some(dir) = &a.save_flows {
        let (w, h) = frames[0].dims();
        for (i, m) in out.motions.iter().enumerate() {
            write_flo(dir.join(format!("flow{}.flo", i + 1)), &m.warp_field(w, h))?;
        }
    }
    if let Some(last) = out.log.last() {
        println!(
            "iterations {} total_energy {:e} rel_change {:e}",
            last.iter, last.total, last.rel_change
        );
    }
    for (i, m) in out.motions.iter().enumerate().skip(1) {
        if let Motion::Shift(s) = m {
            println!("frame {} shift {} {}", i + 1, s.dx, s.dy);
        }
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn synth(a: &SynthArgs) -> Result<()> {
    let source = match (&a.image, a.texture) {
        (Some(p), _) => read_image(p)?,
        (None, Some(Size(w, h))) => textured_image(w, h, a.seed),
        (None, None) => return Err(invalid("give --image or --texture")),
    };
    let cfg = SynthConfig {
        source,
        shifts: a.shifts.0.iter().map(|&(dx, dy)| GlobalShift::new(dx, dy)).collect(),
        fence_width: a.fence_width,
        fence_period: a.fence_period,
        fence_angles_deg: a.angles.clone(),
        noise_sigma: a.noise,
        seed: a.seed,
    };
    let seq = synth_generate(&cfg)?;
    ensure_dir(&a.out_dir)?;
    seq.write_dir(&a.out_dir)?;
    println!("wrote {} frames to {}", seq.frames.len(), a.out_dir.display());
    Ok(())
}

fn metrics(a: &MetricsArgs) -> Result<()> {
    let r = read_image(&a.reference)?;
    let t = read_image(&a.test)?;
    if r.dims() != t.dims() {
        return Err(invalid(format!(
            "{} is {}x{} but {} is {}x{}",
            a.reference.display(),
            r.width(),
            r.height(),
            a.test.display(),
            t.width(),
            t.height()
        )));
    }
    // Compute everything before printing so a failure leaves no output.
    let (rg, tg) = (r.to_grayscale(), t.to_grayscale());
    let mut lines = vec![
        format!("psnr {:.4}", psnr(&rg, &tg)?),
        format!("ssim {:.4}", ssim(&rg, &tg)?),
    ];
    for (name, c) in [("r", 0), ("g", 1), ("b", 2)] {
        lines.push(format!("psnr_{name} {:.4}", psnr(r.plane(c), t.plane(c))?));
        lines.push(format!("ssim_{name} {:.4}", ssim(r.plane(c), t.plane(c))?));
    }
    println!("{}", lines.join("\n"));
    Ok(())
}

fn score(a: &MaskScoreArgs) -> Result<()> {
    let pred = FenceMask::read_png(&a.pred)?;
    let truth = FenceMask::read_png(&a.truth)?;
    let s = mask_score(&pred, &truth, a.tol)?;
    println!("precision {:.4}\nrecall {:.4}\nf1 {:.4}", s.precision, s.recall, s.f1);
    Ok(())
}
