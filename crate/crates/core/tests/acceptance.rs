//! End-to-end acceptance checks. Runs as a plain binary so that every
//! check prints a PASS/FAIL line; exits non-zero if any check fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use defence_core::fencegabor::{GaborDetector, GaborParams};
use defence_core::fencesvm::{
    cell_histograms, detect_fence_svm, hog, synth_background_patch, synth_fence_patch, synth_patches,
    train_svm, train_svm_descriptors, HogConfig, SvmGrid, SvmScanParams,
};
use defence_core::imgcore::{convolve, convolve_adjoint, psnr, ssim, write_image, ImagePlane, Kernel2D};
use defence_core::motion::{estimate_flow, estimate_global_shift, warp_adjoint, warp_forward, FlowField, FlowParams};
use defence_core::pipeline::{run_pipeline, MaskSource, MotionSource, PipelineConfig, PipelineOutput};
use defence_core::score::mask_score;
use defence_core::solver::{
    grad, grad_adjoint, records_to_csv, shrink_scalar, FrameOperator, GradPair, Init, LinearOperator, MaskOp, Motion,
    SolverParams,
};
use defence_core::synth::{fence_grid, synth_generate, textured_image, translate, SynthConfig, SynthSequence};
use defence_core::{FenceMask, GlobalShift};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn benchmark_sequence() -> SynthSequence {
    synth_generate(&SynthConfig::benchmark(textured_image(256, 256, 11))).unwrap()
}

/// True masks and shifts, lambda = 0.01, mu = 1e-5, random start. Runs all outer
/// iterations so the whole convergence curve is logged.
fn benchmark_run(seq: &SynthSequence) -> PipelineOutput {
    let cfg = PipelineConfig {
        masks: MaskSource::Given(seq.masks.clone()),
        motion: MotionSource::Shifts(SynthConfig::benchmark(seq.truth.clone()).shifts),
        solver: SolverParams {
            mu: 1e-5,
            lambda: 0.01,
            tol: 0.0,
            ..SolverParams::default()
        },
        init: Init::RandomUniform { seed: 7 },
        psf: Kernel2D::identity(),
    };
    run_pipeline(&seq.frames, &cfg).unwrap()
}

fn criterion_1_and_2() -> (Check, Check) {
    let seq = benchmark_sequence();
    let t = Instant::now();
    let out = benchmark_run(&seq);
    let elapsed = t.elapsed();

    let gray = out.image.to_grayscale();
    let truth = seq.truth.to_grayscale();
    let p = psnr(&truth, &gray).unwrap();
    let s = ssim(&truth, &gray).unwrap();
    let c1 = (|| {
        ensure(p >= 30.0, || format!("psnr {p:.4} < 30"))?;
        ensure(s >= 0.95, || format!("ssim {s:.4} < 0.95"))?;
        ensure(elapsed <= Duration::from_secs(60), || format!("took {elapsed:?}"))?;
        Ok(format!("psnr {p:.4} dB, ssim {s:.4}, {:.1} s", elapsed.as_secs_f64()))
    })();

    let log = &out.log;
    let c2 = (|| {
        ensure(log.len() >= 5, || format!("only {} iterations logged", log.len()))?;
        let (r1, r5) = (log[0].rel_change, log[4].rel_change);
        ensure(r5 <= 0.2 * r1, || format!("rel_change {r5:e} at 5 vs {r1:e} at 1"))?;
        for w in log[1..].windows(2) {
            ensure(w[1].total <= w[0].total, || {
                format!("energy rose from {} to {} at iteration {}", w[0].total, w[1].total, w[1].iter)
            })?;
        }
        Ok(format!("rel_change {r1:.3e} -> {r5:.3e}, energy non-increasing over {} iterations", log.len()))
    })();
    (c1, c2)
}

fn rand_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlane {
    ImagePlane::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0))
}

fn rand_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> FenceMask {
    FenceMask::from_fence_fn(w, h, |_, _| rng.random_bool(0.3))
}

fn rand_flow(rng: &mut ChaCha8Rng, w: usize, h: usize) -> FlowField {
    let u = ImagePlane::from_fn(w, h, |_, _| rng.random_range(-3.0..3.0));
    let v = ImagePlane::from_fn(w, h, |_, _| rng.random_range(-3.0..3.0));
    FlowField::from_planes(u, v).unwrap()
}

fn rand_symmetric_psf(rng: &mut ChaCha8Rng) -> Kernel2D {
    let r = rng.random_range(1..=3);
    let taps: Vec<f64> = (0..(r + 1) * (r + 1)).map(|_| rng.random_range(0.0..1.0)).collect();
    Kernel2D::from_fn(r, r, |dx, dy| taps[dx.unsigned_abs() * (r + 1) + dy.unsigned_abs()]).normalized()
}

fn criterion_3() -> Check {
    const N: usize = 16;
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut check = |name: &str, lhs: f64, rhs: f64, nx: f64, ny: f64| -> Result<(), String> {
        let rel = (lhs - rhs).abs() / (nx * ny);
        worst = worst.max(rel);
        ensure(rel <= 1e-8, || format!("{name}: relative mismatch {rel:e}"))
    };
    for _ in 0..100 {
        let x = rand_plane(&mut rng, N, N);
        let g = GradPair {
            gx: rand_plane(&mut rng, N, N),
            gy: rand_plane(&mut rng, N, N),
        };
        check("grad", grad(&x).dot(&g), x.dot(&grad_adjoint(&g)), x.norm(), g.norm_sq().sqrt())?;

        let y = rand_plane(&mut rng, N, N);
        let flow = rand_flow(&mut rng, N, N);
        let (wx, _) = warp_forward(&x, &flow);
        check("warp", wx.dot(&y), x.dot(&warp_adjoint(&y, &flow)), x.norm(), y.norm())?;

        let psf = rand_symmetric_psf(&mut rng);
        let hx = convolve(&x, &psf).unwrap();
        let hty = convolve_adjoint(&y, &psf).unwrap();
        check("blur", hx.dot(&y), x.dot(&hty), x.norm(), y.norm())?;

        let mask = MaskOp::new(&rand_mask(&mut rng, N, N));
        check("mask", mask.forward(&x).dot(&y), x.dot(&mask.adjoint(&y)), x.norm(), y.norm())?;

        let op = FrameOperator::new(&rand_mask(&mut rng, N, N), &Motion::Warp(rand_flow(&mut rng, N, N)), &psf).unwrap();
        check("O H W", op.forward(&x).dot(&y), x.dot(&op.adjoint(&y)), x.norm(), y.norm())?;
    }
    let elapsed = t.elapsed();
    ensure(elapsed <= Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("500 pairs, worst relative mismatch {worst:.2e}"))
}

fn criterion_4() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w: f64 = rng.random_range(-1.0..1.0);
        let mu: f64 = rng.random_range(0.01..1.0);
        let lambda: f64 = rng.random_range(0.5..5.0);
        let f = |d: f64| mu * d.abs() + 0.5 * lambda * (d - w) * (d - w);
        let span = 2.0 * w.abs();
        let steps = (2.0 * span / 1e-4).round() as usize;
        let mut best = (f(-span), -span);
        for i in 1..=steps {
            let d = -span + i as f64 * 1e-4;
            let v = f(d);
            if v < best.0 {
                best = (v, d);
            }
        }
        let got = shrink_scalar(w, mu / lambda);
        let err = (got - best.1).abs();
        worst = worst.max(err);
        ensure(err <= 2e-4, || format!("w {w}, mu {mu}, lambda {lambda}: shrink {got} vs grid {}", best.1))?;
    }
    let elapsed = t.elapsed();
    ensure(elapsed <= Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 triples, worst deviation {worst:.2e}"))
}

fn criterion_5() -> Check {
    let t = Instant::now();
    let base = textured_image(128, 128, 5).to_grayscale();
    let mut report = Vec::new();
    for (dx, dy) in [(4.0, 4.0), (3.25, -2.5)] {
        let moved = translate(&base, GlobalShift::new(dx, dy));
        let flow = estimate_flow(&base, &moved, &FlowParams::default()).map_err(|e| e.to_string())?;
        let epe = flow.mean_endpoint_error_const(dx, dy, 10);
        ensure(epe <= 0.5, || format!("({dx}, {dy}): dense endpoint error {epe:.3}"))?;
        let s = estimate_global_shift(&base, &moved, None, None, 20).map_err(|e| e.to_string())?;
        let (ex, ey) = ((s.dx - dx).abs(), (s.dy - dy).abs());
        ensure(ex <= 0.25 && ey <= 0.25, || format!("({dx}, {dy}): global shift ({}, {})", s.dx, s.dy))?;
        report.push(format!("({dx},{dy}) epe {epe:.3} shift err {:.3}", ex.max(ey)));
    }

    // Fenced pair: the fence stays put while the scene moves by (4, 4).
    let (dx, dy) = (4.0, 4.0);
    let fence = fence_grid(128, 128, 3.0, 24.0, &[0.0, 90.0]);
    let overlay = |img: &ImagePlane| ImagePlane::from_fn(128, 128, |x, y| if fence.is_fence(x, y) { 128.0 } else { img.get(x, y) });
    let a = overlay(&base);
    let b = overlay(&translate(&base, GlobalShift::new(dx, dy)));
    let near = fence.dilate(3);
    let masked_epe = |sigma: f64| -> Result<f64, String> {
        let params = FlowParams {
            presmooth_sigma: sigma,
            ..FlowParams::default()
        };
        let f = estimate_flow(&a, &b, &params).map_err(|e| e.to_string())?;
        let (mut sum, mut n) = (0.0, 0usize);
        for y in 10..118 {
            for x in 10..118 {
                if near.is_fence(x, y) {
                    let (u, v) = f.at(x, y);
                    sum += ((u - dx).powi(2) + (v - dy).powi(2)).sqrt();
                    n += 1;
                }
            }
        }
        Ok(sum / n as f64)
    };
    let (smooth, raw) = (masked_epe(1.5)?, masked_epe(0.0)?);
    ensure(smooth <= raw, || format!("near-fence error {smooth:.3} with smoothing > {raw:.3} without"))?;
    report.push(format!("near-fence epe {smooth:.3} (sigma 1.5) <= {raw:.3} (sigma 0)"));
    let elapsed = t.elapsed();
    ensure(elapsed <= Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(report.join(", "))
}

fn stripes(w: usize, h: usize, width: usize, period: usize, vertical: bool) -> (ImagePlane, FenceMask) {
    let truth = FenceMask::from_fence_fn(w, h, |x, y| (if vertical { x } else { y }) % period < width);
    let img = ImagePlane::from_fn(w, h, |x, y| if truth.is_fence(x, y) { 0.0 } else { 255.0 });
    (img, truth)
}

fn criterion_6() -> Check {
    let t = Instant::now();
    let base = GaborParams::default();
    let detect = |img: &ImagePlane, thetas: &[f64]| GaborDetector::new(thetas.to_vec(), base).detect(img).unwrap();
    let mut report = Vec::new();

    let (img, truth) = stripes(128, 128, 3, 24, true);
    let s = mask_score(&detect(&img, &[0.0]), &truth, 1).unwrap();
    ensure(s.f1 >= 0.9, || format!("vertical stripes F1 {:.3}", s.f1))?;
    report.push(format!("stripes F1 {:.3}", s.f1));

    let wrong = mask_score(&detect(&img, &[90.0]), &truth, 1).unwrap();
    ensure(wrong.recall < 0.5, || format!("wrong orientation recall {:.3}", wrong.recall))?;
    report.push(format!("wrong-theta recall {:.3}", wrong.recall));

    let grid = fence_grid(128, 128, 4.0, 24.0, &[0.0, 90.0]);
    let img = ImagePlane::from_fn(128, 128, |x, y| if grid.is_fence(x, y) { 30.0 } else { 220.0 });
    let s = mask_score(&detect(&img, &[0.0, 90.0]), &grid, 1).unwrap();
    ensure(s.f1 >= 0.9, || format!("grid F1 {:.3}", s.f1))?;
    report.push(format!("grid F1 {:.3}", s.f1));

    let elapsed = t.elapsed();
    ensure(elapsed <= Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(report.join(", "))
}

fn criterion_7() -> Check {
    let t = Instant::now();
    let cfg = HogConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let window = synth_fence_patch(&mut rng, 96, 104);
    let d = hog(&window, &cfg).map_err(|e| e.to_string())?;
    ensure(d.len() == 4752, || format!("descriptor length {}", d.len()))?;
    for (i, block) in d.values().chunks(36).enumerate() {
        let n = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        ensure(n <= 1.0 + 1e-9, || format!("block {i} norm {n}"))?;
    }

    // Interior cell of a ramp with slope 3 per column: every pixel has
    // gradient (6, 0), orientation 0, magnitude 6 -> bin 0 holds 64 * 6.
    let ramp = ImagePlane::from_fn(96, 104, |x, _| 3.0 * x as f64);
    let hist = cell_histograms(&ramp, &cfg);
    let cell = (2 * cfg.cells_x() + 3) * 9;
    let mut expected = [0.0; 9];
    expected[0] = 64.0 * 6.0;
    ensure(hist[cell..cell + 9] == expected, || format!("ramp cell histogram {:?}", &hist[cell..cell + 9]))?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..40 {
        let label = if i < 20 { 1.0 } else { -1.0 };
        let mut v = vec![0.0; 8];
        v[if label > 0.0 { 0 } else { 1 }] = 1.0;
        for e in &mut v {
            *e += rng.random_range(-0.01..0.01);
        }
        x.push(v);
        y.push(label);
    }
    let (model, report) = train_svm_descriptors(&x, &y, &SvmGrid::default(), 5, 1, (96, 104)).map_err(|e| e.to_string())?;
    ensure(report.training_accuracy == 1.0, || format!("toy training accuracy {}", report.training_accuracy))?;
    for (xi, yi) in x.iter().zip(&y) {
        ensure((model.decision(xi).unwrap() > 0.0) == (*yi > 0.0), || "toy point misclassified".into())?;
    }

    let patches = synth_patches(100, 100, 96, 104, 42);
    let (m1, r1) = train_svm(&patches, &cfg, &SvmGrid::default(), 5, 42).map_err(|e| e.to_string())?;
    let (m2, r2) = train_svm(&patches, &cfg, &SvmGrid::default(), 5, 42).map_err(|e| e.to_string())?;
    ensure(m1 == m2 && r1 == r2, || "cross-validation differs between identical runs".into())?;

    // Plant one fence window into a fence-free scene.
    let (px, py) = (96, 104);
    let mut scene = synth_background_patch(&mut rng, 288, 312);
    let planted = synth_fence_patch(&mut rng, 96, 104);
    for y in 0..104 {
        for x in 0..96 {
            scene.set(px + x, py + y, planted.get(x, y));
        }
    }
    let scan = SvmScanParams {
        stride: 8,
        scales: vec![1.0],
    };
    let found = detect_fence_svm(&scene, &m1, &scan, None).map_err(|e| e.to_string())?;
    ensure(
        found.detections.iter().any(|d| d.x == px && d.y == py),
        || "planted window not detected".into(),
    )?;
    let overlaps = |d: &defence_core::fencesvm::Detection| {
        d.x < px + 96 && px < d.x + 96 && d.y < py + 104 && py < d.y + 104
    };
    let best = found
        .detections
        .iter()
        .max_by(|a, b| a.score.total_cmp(&b.score))
        .ok_or("no detections")?;
    ensure(overlaps(best), || format!("strongest detection at ({}, {})", best.x, best.y))?;
    let near = found.detections.iter().filter(|d| overlaps(d)).count();
    let share = near as f64 / found.detections.len() as f64;
    ensure(share >= 0.8, || format!("only {near} of {} detections touch the planted window", found.detections.len()))?;
    ensure(found.mask.is_fence(px + 48, py + 52), || "planted centre not stamped".into())?;

    let elapsed = t.elapsed();
    ensure(elapsed <= Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "4752 values, cv accuracy {:.3} at C={} gamma={}, {near} of {} detections on the planted window, {:.1} s",
        r1.best.accuracy,
        r1.best.c,
        r1.best.gamma,
        found.detections.len(),
        elapsed.as_secs_f64()
    ))
}

/// Straightforward SSIM: Gaussian-weighted statistics at every position
/// where the 11x11 window fits.
fn naive_ssim(a: &ImagePlane, b: &ImagePlane) -> f64 {
    let raw: Vec<f64> = (-5..=5).map(|i: i32| (-(i * i) as f64 / (2.0 * 1.5 * 1.5)).exp()).collect();
    let s: f64 = raw.iter().sum();
    let g: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let (w, h) = a.dims();
    let mut total = 0.0;
    let mut n = 0;
    for y0 in 0..=h - 11 {
        for x0 in 0..=w - 11 {
            let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in 0..11 {
                for i in 0..11 {
                    let wt = g[i] * g[j];
                    let (p, q) = (a.get(x0 + i, y0 + j), b.get(x0 + i, y0 + j));
                    ma += wt * p;
                    mb += wt * q;
                    aa += wt * p * p;
                    bb += wt * q * q;
                    ab += wt * p * q;
                }
            }
            let (va, vb, cov) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            n += 1;
        }
    }
    total / n as f64
}

fn criterion_8() -> Check {
    let t = Instant::now();
    let black = ImagePlane::new(16, 16);
    let white = ImagePlane::filled(16, 16, 255.0);
    let p0 = psnr(&black, &white).unwrap();
    ensure(p0.abs() <= 1e-3, || format!("black vs white psnr {p0}"))?;
    let img = textured_image(32, 32, 8).to_grayscale();
    let p1 = psnr(&img, &img.map(|v| v + 1.0)).unwrap();
    ensure((p1 - 48.1308).abs() <= 1e-3, || format!("unit offset psnr {p1}"))?;
    let same = ssim(&img, &img).unwrap();
    ensure((same - 1.0).abs() <= 1e-9, || format!("ssim(x, x) = {same}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = rand_plane(&mut rng, 32, 32);
    let noisy = img.lincomb(1.0, &noise, 20.0);
    let (fast, slow) = (ssim(&img, &noisy).unwrap(), naive_ssim(&img, &noisy));
    ensure((fast - slow).abs() <= 1e-9, || format!("ssim {fast} vs reference {slow}"))?;
    let elapsed = t.elapsed();
    ensure(elapsed <= Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("psnr {p0:.4} / {p1:.4} dB, ssim {fast:.6} matches reference"))
}

fn criterion_9() -> Check {
    let seq = benchmark_sequence();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = benchmark_run(&seq);
        let path = dir.path().join(format!("run{k}.png"));
        write_image(&path, &out.image).map_err(|e| e.to_string())?;
        outputs.push((std::fs::read(&path).map_err(|e| e.to_string())?, records_to_csv(&out.log)));
    }
    ensure(outputs[0].0 == outputs[1].0, || "output images differ".into())?;
    ensure(outputs[0].1 == outputs[1].1, || "convergence logs differ".into())?;
    Ok(format!("{} png bytes and {} csv bytes identical", outputs[0].0.len(), outputs[0].1.len()))
}

fn main() -> ExitCode {
    let (c1, c2) = criterion_1_and_2();
    let results = [
        ("1 synthetic end-to-end", c1),
        ("2 convergence shape", c2),
        ("3 operator adjointness", criterion_3()),
        ("4 shrinkage oracle", criterion_4()),
        ("5 flow accuracy", criterion_5()),
        ("6 gabor detection", criterion_6()),
        ("7 hog and svm", criterion_7()),
        ("8 metrics", criterion_8()),
        ("9 determinism", criterion_9()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
