//! Command-line front end. Exit codes: 0 ok, 2 usage or malformed input,
//! 3 I/O failure, 4 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::binarization::emit_derivative_curves;
use crate::error::Error;
use crate::eval::evaluate;
use crate::geometry::{parse_polygons, Polygon};
use crate::labelgen::{generate_labels, LabelConfig};
use crate::loss::LossWeights;
use crate::map::FloatMap;
use crate::postprocess::{form_boxes, format_detections, parse_detections, PostprocessConfig};
use crate::synth::{generate_scene, generate_suite, SceneSpec, ShapeKind};
use crate::trainer::{optimize_maps, TrainConfig, TrainMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Environment variable capping worker threads (0 = automatic).
pub const THREADS_ENV: &str = "DBCORE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dbcore", version, about = "Differentiable binarization text detection toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build probability and threshold label maps from polygons
    Labelgen(LabelgenArgs),
    /// Form text boxes from a probability map
    Detect(DetectArgs),
    /// Score detections against ground truth (prints P, R, F as TSV)
    Eval(EvalArgs),
    /// Tabulate binarization derivative curves as CSV
    Gradcurves(GradcurvesArgs),
    /// Generate a synthetic scene directory
    Synth(SynthArgs),
    /// Optimize per-pixel maps on synthetic scenes
    TrainToy(TrainArgs),
}

#[derive(Debug, Args)]
pub struct LabelgenArgs {
    /// Polygon file, one `x1,y1,x2,y2,...` per line
    #[arg(long)]
    pub polys: PathBuf,
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub width: usize,
    #[arg(long, default_value_t = 0.4)]
    pub shrink_ratio: f64,
    #[arg(long, default_value_t = 0.3)]
    pub tmin: f64,
    #[arg(long, default_value_t = 0.7)]
    pub tmax: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Probability map in the F32MAP format
    #[arg(long)]
    pub prob: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub bin_thresh: f64,
    /// Unclip ratio
    #[arg(long, default_value_t = 1.5)]
    pub unclip: f64,
    #[arg(long, default_value_t = 0.5)]
    pub score_thresh: f64,
    /// Smallest connected region kept, in pixels
    #[arg(long, default_value_t = 4)]
    pub min_region: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_detections: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Detections, `score;x1,y1,...` per line (score optional)
    #[arg(long)]
    pub dets: PathBuf,
    /// Ground-truth polygons
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
}

#[derive(Debug, Args)]
pub struct GradcurvesArgs {
    /// Amplifying factor
    #[arg(long, default_value_t = 50.0)]
    pub k: f64,
    /// Threshold used by the sigmoid-composed curves
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    #[arg(long, default_value_t = 160)]
    pub height: usize,
    #[arg(long, default_value_t = 160)]
    pub width: usize,
    /// Instances requested per scene
    #[arg(long, default_value_t = 6)]
    pub instances: usize,
    /// Shortest text side, lower bound (px)
    #[arg(long, default_value_t = 12.0)]
    pub min_scale: f64,
    /// Shortest text side, upper bound (px)
    #[arg(long, default_value_t = 24.0)]
    pub max_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_aspect: f64,
    #[arg(long, default_value_t = 3.0)]
    pub max_aspect: f64,
    /// rect, rot_rect or curved_band
    #[arg(long, default_value = "rot_rect")]
    pub shape: String,
    /// Shrink ratio for the labels
    #[arg(long, default_value_t = 0.4)]
    pub shrink_ratio: f64,
}

impl SceneArgs {
    fn spec(&self, seed: u64) -> Result<SceneSpec, Error> {
        let shape: ShapeKind = self.shape.parse()?;
        let mut spec = SceneSpec::new(seed, self.height, self.width, self.instances, shape);
        spec.scale_range = (self.min_scale, self.max_scale);
        spec.aspect_range = (self.min_aspect, self.max_aspect);
        spec.labels.shrink_ratio = self.shrink_ratio;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Feature stages to export (0 = none)
    #[arg(long, default_value_t = 0)]
    pub stages: usize,
    /// Channels per feature stage
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// db or plain
    #[arg(long)]
    pub mode: String,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    /// Learning rate on the mean-over-scenes loss
    #[arg(long, default_value_t = 5000.0)]
    pub lr: f64,
    /// Amplifying factor
    #[arg(long, default_value_t = 50.0)]
    pub k: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pub beta: f64,
    /// Hard negatives kept per positive
    #[arg(long, default_value_t = 3.0)]
    pub neg_ratio: f64,
    /// Seeds the scene suite and the gradient check sample
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub scenes: usize,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Pixels checked against finite differences at step 0
    #[arg(long, default_value_t = 0)]
    pub fd_pixels: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Parse { .. } | Error::Format(_) | Error::InvalidPolygon(_) => EXIT_USAGE,
        Error::Domain(_)
        | Error::ShapeMismatch { .. }
        | Error::NonScalarOutput(_)
        | Error::StageCountMismatch { .. }
        | Error::Divergence { .. } => EXIT_NUMERIC,
    }
}

fn read_polygons(path: &Path) -> Result<Vec<Polygon>, Error> {
    parse_polygons(&fs::read_to_string(path)?)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn labelgen(a: &LabelgenArgs) -> Result<(), Error> {
    let polys = read_polygons(&a.polys)?;
    let cfg = LabelConfig {
        shrink_ratio: a.shrink_ratio,
        t_min: a.tmin,
        t_max: a.tmax,
    };
    let bundle = generate_labels(&polys, a.height, a.width, &cfg)?;
    fs::create_dir_all(&a.out)?;
    for (name, map) in [
        ("prob_target", &bundle.prob_target),
        ("prob_mask", &bundle.prob_mask),
        ("thresh_target", &bundle.thresh_target),
        ("thresh_mask", &bundle.thresh_mask),
    ] {
        map.save(a.out.join(format!("{name}.f32map")))?;
        fs::write(a.out.join(format!("{name}.pgm")), map.to_pgm())?;
    }
    Ok(())
}

fn detect(a: &DetectArgs) -> Result<(), Error> {
    let map = FloatMap::load(&a.prob)?;
    let cfg = PostprocessConfig {
        bin_thresh: a.bin_thresh,
        unclip_ratio: a.unclip,
        min_region_px: a.min_region,
        score_thresh: a.score_thresh,
        max_detections: a.max_detections,
    };
    let map = FloatMap::probabilities(map.height(), map.width(), map.into_vec())?;
    write_file(&a.out, format_detections(&form_boxes(&map, &cfg)?))
}

fn eval(a: &EvalArgs) -> Result<String, Error> {
    if !(0.0..=1.0).contains(&a.iou) {
        return Err(Error::Domain(format!("IoU threshold {} outside [0, 1]", a.iou)));
    }
    let dets = parse_detections(&fs::read_to_string(&a.dets)?)?;
    let gts = read_polygons(&a.gt)?;
    Ok(evaluate(&dets, &gts, a.iou).to_tsv())
}

fn gradcurves(a: &GradcurvesArgs) -> Result<(), Error> {
    let table = emit_derivative_curves(a.k, a.t, a.lo, a.hi, a.samples)?;
    write_file(&a.out, table.to_csv())
}

fn synth(a: &SynthArgs) -> Result<(), Error> {
    let mut spec = a.scene.spec(a.seed)?;
    if a.stages > 0 {
        spec.features = Some((a.stages, a.channels));
    }
    generate_scene(&spec)?.export(&a.out)
}

fn train(a: &TrainArgs) -> Result<(), Error> {
    let mode: TrainMode = a.mode.parse()?;
    let scenes = generate_suite(&a.scene.spec(0)?, a.seed, a.scenes)?;
    let cfg = TrainConfig {
        mode,
        steps: a.steps,
        lr: a.lr,
        k: a.k,
        weights: LossWeights {
            alpha: a.alpha,
            beta: a.beta,
            neg_ratio: a.neg_ratio,
        },
        seed: a.seed,
        fd_check_pixels: a.fd_pixels,
        ..TrainConfig::default()
    };
    match optimize_maps(&scenes, &cfg) {
        Ok(report) => report.save(&a.out),
        Err(Error::Divergence { step, report }) => {
            report.save(&a.out)?;
            Err(Error::Divergence { step, report })
        }
        Err(e) => Err(e),
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        // a pool that already exists (repeated calls in one process) is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs one command, writing normal output to `stdout` and diagnostics to
/// stderr, and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let result = match &cli.command {
        Command::Labelgen(a) => labelgen(a),
        Command::Detect(a) => detect(a),
        Command::Eval(a) => eval(a).and_then(|line| writeln!(stdout, "{line}").map_err(Error::from)),
        Command::Gradcurves(a) => gradcurves(a),
        Command::Synth(a) => synth(a),
        Command::TrainToy(a) => train(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
