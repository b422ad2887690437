use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "defence", version, about = "Multi-frame image de-fencing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Detect fence pixels in one image and write a mask (0 = fence, 255 = valid).
    Detect(DetectArgs),
    /// Train the fence window classifier from directories of patches.
    TrainSvm(TrainSvmArgs),
    /// Dense optical flow between two images, written as a .flo file.
    Flow(FlowArgs),
    /// Global translation between two images, printed as `dx dy`.
    Shift(ShiftArgs),
    /// Recover the fence-free image from a set of frames.
    Run(Box<RunArgs>),
    /// Generate a shifted, fenced frame sequence with ground truth.
    Synth(SynthArgs),
    /// PSNR and SSIM of a test image against a reference.
    Metrics(MetricsArgs),
    /// Precision, recall and F1 of a predicted fence mask.
    MaskScore(MaskScoreArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Gabor,
    Svm,
}

/// `otsu` or a fixed response level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdArg {
    Otsu,
    Fixed(f64),
}

impl FromStr for ThresholdArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("otsu") {
            return Ok(ThresholdArg::Otsu);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .map(ThresholdArg::Fixed)
            .ok_or_else(|| format!("expected `otsu` or a non-negative number, got `{s}`"))
    }
}

#[derive(Args, Debug)]
pub struct GaborArgs {
    /// Filter orientations in degrees.
    #[arg(long, value_delimiter = ',', default_value = "0,90")]
    pub thetas: Vec<f64>,
    /// Wavelength of the carrier in pixels.
    #[arg(long, default_value_t = 4.0)]
    pub lambda: f64,
    /// Envelope standard deviation.
    #[arg(long, default_value_t = 4.0)]
    pub sigma: f64,
    /// Spatial aspect ratio.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Phase offset in radians.
    #[arg(long, default_value_t = 0.0)]
    pub psi: f64,
    #[arg(long, default_value = "otsu")]
    pub threshold: ThresholdArg,
    #[arg(long, default_value_t = 1)]
    pub dilate: usize,
    /// Keep the thresholded response as is, without splitting it by gray level.
    #[arg(long)]
    pub raw: bool,
}

/// Gabor settings for `run`, where `--lambda` is the solver weight.
#[derive(Args, Debug)]
pub struct RunGaborArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,90")]
    pub thetas: Vec<f64>,
    #[arg(long, default_value_t = 4.0)]
    pub gabor_lambda: f64,
    #[arg(long, default_value_t = 4.0)]
    pub gabor_sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gabor_gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub psi: f64,
    #[arg(long, default_value = "otsu")]
    pub threshold: ThresholdArg,
    #[arg(long, default_value_t = 1)]
    pub dilate: usize,
    #[arg(long)]
    pub raw: bool,
}

impl From<&RunGaborArgs> for GaborArgs {
    fn from(g: &RunGaborArgs) -> Self {
        GaborArgs {
            thetas: g.thetas.clone(),
            lambda: g.gabor_lambda,
            sigma: g.gabor_sigma,
            gamma: g.gabor_gamma,
            psi: g.psi,
            threshold: g.threshold,
            dilate: g.dilate,
            raw: g.raw,
        }
    }
}

#[derive(Args, Debug)]
pub struct SvmScanArgs {
    /// Model written by `train-svm`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub stride: usize,
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.8333333333333334,0.6944444444444444")]
    pub scales: Vec<f64>,
    /// Window-sized mask stamped at each detection; all fence if omitted.
    #[arg(long)]
    pub template: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long, value_enum, default_value_t = Method::Gabor)]
    pub method: Method,
    #[command(flatten)]
    pub gabor: GaborArgs,
    #[command(flatten)]
    pub svm: SvmScanArgs,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

/// `WIDTHxHEIGHT`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Size(pub usize, pub usize);

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n > 0);
        match (parse(w), parse(h)) {
            (Some(w), Some(h)) => Ok(Size(w, h)),
            _ => Err(format!("expected WIDTHxHEIGHT, got `{s}`")),
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainSvmArgs {
    /// Directory of fence patches (PNG).
    #[arg(long)]
    pub pos: PathBuf,
    /// Directory of background patches (PNG).
    #[arg(long)]
    pub neg: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "96x104")]
    pub window: Size,
    #[arg(long)]
    pub out: PathBuf,
}

/// `auto` or a pyramid depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Levels(pub Option<usize>);

impl FromStr for Levels {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Levels(None));
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Levels(Some(n))),
            _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
        }
    }
}

#[derive(Args, Debug)]
pub struct FlowParamArgs {
    /// Gaussian smoothing of both inputs before estimation; 0 disables it.
    #[arg(long, default_value_t = 1.5)]
    pub presmooth: f64,
    #[arg(long, default_value_t = 15.0)]
    pub alpha: f64,
    #[arg(long, default_value = "auto")]
    pub levels: Levels,
    /// Solver sweeps per warp.
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Warps per pyramid level.
    #[arg(long, default_value_t = 3)]
    pub warps: usize,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[command(flatten)]
    pub params: FlowParamArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ShiftArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub radius: usize,
    /// Fence mask of the reference image.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Fence mask of the target image.
    #[arg(long)]
    pub tgt_mask: Option<PathBuf>,
}

/// Semicolon-separated `dx,dy` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftList(pub Vec<(f64, f64)>);

impl FromStr for ShiftList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for pair in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| format!("expected `dx,dy`, got `{pair}`"))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| format!("bad number `{v}` in `{pair}`"))
            };
            out.push((num(a)?, num(b)?));
        }
        if out.is_empty() {
            return Err("no shifts given".into());
        }
        Ok(ShiftList(out))
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectChoice {
    Gabor,
    Svm,
    /// Use the masks given with `--masks`.
    None,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionChoice {
    /// Masked global translation search.
    Global,
    /// Dense optical flow on pre-smoothed frames.
    Dense,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitChoice {
    Random,
    Reference,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TvChoice {
    Isotropic,
    Anisotropic,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Frames, reference first.
    #[arg(long, value_delimiter = ',', required = true)]
    pub frames: Vec<PathBuf>,
    /// Fence masks, one per frame. Implies `--detect none` unless a detector is named.
    #[arg(long, value_delimiter = ',')]
    pub masks: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub detect: Option<DetectChoice>,
    #[command(flatten)]
    pub gabor: RunGaborArgs,
    #[command(flatten)]
    pub svm: SvmScanArgs,

    /// Backward warp fields (.flo): frame m as reference, the first frame as target.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["shifts", "motion"])]
    pub flows: Vec<PathBuf>,
    /// Known translations `dx,dy;...` of each frame relative to the first.
    #[arg(long, conflicts_with = "motion")]
    pub shifts: Option<ShiftList>,
    /// Motion estimator used when neither flows nor shifts are given.
    #[arg(long, value_enum, default_value_t = MotionChoice::Dense)]
    pub motion: MotionChoice,
    /// Search radius of the global estimator.
    #[arg(long, default_value_t = 20)]
    pub radius: usize,
    #[command(flatten)]
    pub flow: FlowParamArgs,

    #[arg(long, default_value_t = 1e-5)]
    pub mu: f64,
    #[arg(long = "lambda", default_value_t = 0.01)]
    pub split_lambda: f64,
    #[arg(long, default_value_t = 50)]
    pub outer: usize,
    #[arg(long, default_value_t = 10)]
    pub inner: usize,
    /// Fixed gradient step; derived from the operator bound if omitted.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = TvChoice::Isotropic)]
    pub tv: TvChoice,
    /// Shrink with lambda/mu instead of mu/lambda (for comparison only).
    #[arg(long, hide = true)]
    pub swap_shrink: bool,
    /// Gaussian blur of the imaging model; 0 means none.
    #[arg(long, default_value_t = 0.0)]
    pub psf_sigma: f64,
    #[arg(long, value_enum, default_value_t = InitChoice::Random)]
    pub init: InitChoice,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    #[arg(long)]
    pub out: PathBuf,
    /// Convergence log (CSV).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Directory for the masks used, `mask{i}.png`.
    #[arg(long)]
    pub save_masks: Option<PathBuf>,
    /// Directory for the warp fields used, `flow{i}.flo`.
    #[arg(long)]
    pub save_flows: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Source image; see `--texture` for a generated one.
    #[arg(long, required_unless_present = "texture", conflicts_with = "texture")]
    pub image: Option<PathBuf>,
    /// Generate a smooth color texture of this size instead of reading an image.
    #[arg(long)]
    pub texture: Option<Size>,
    #[arg(long, default_value = "0,0;-8,-8;8,8;15,15")]
    pub shifts: ShiftList,
    #[arg(long, default_value_t = 7.0)]
    pub fence_width: f64,
    #[arg(long, default_value_t = 48.0)]
    pub fence_period: f64,
    /// Bar orientations in degrees.
    #[arg(long, value_delimiter = ',', default_value = "0,90")]
    pub angles: Vec<f64>,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Args, Debug)]
pub struct MaskScoreArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Chebyshev distance within which a match counts.
    #[arg(long, default_value_t = 1)]
    pub tol: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_lists() {
        let s: ShiftList = "0,0; -8,-8;8,8;15.5,15".parse().unwrap();
        assert_eq!(s.0, vec![(0.0, 0.0), (-8.0, -8.0), (8.0, 8.0), (15.5, 15.0)]);
        assert!("1,2;3".parse::<ShiftList>().is_err());
        assert!("".parse::<ShiftList>().is_err());
    }

    #[test]
    fn sizes_levels_thresholds() {
        assert_eq!("96x104".parse::<Size>().unwrap(), Size(96, 104));
        assert!("96".parse::<Size>().is_err());
        assert_eq!("auto".parse::<Levels>().unwrap(), Levels(None));
        assert_eq!("3".parse::<Levels>().unwrap(), Levels(Some(3)));
        assert_eq!("otsu".parse::<ThresholdArg>().unwrap(), ThresholdArg::Otsu);
        assert_eq!("2.5".parse::<ThresholdArg>().unwrap(), ThresholdArg::Fixed(2.5));
    }

    #[test]
    fn command_line_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
