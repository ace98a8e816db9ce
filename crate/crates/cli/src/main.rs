use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use pathcnn_core::config::{AdapterKind, ClassifierKind, RunConfig};
use pathcnn_core::dataset::TrapType;
use pathcnn_core::minpath::Connectivity;
use pathcnn_core::pathgeom::PathGeomParams;
use pathcnn_core::pipeline::{self, EvalInputs, Route, SceneMetadata};
use pathcnn_core::raster::PixelCoord;
use pathcnn_core::Error;

/// Centerline extraction with classifier-guided minimal paths.
#[derive(Parser, Debug)]
#[command(name = "pathcnn", version)]
struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic ridge scene.
    Synth(SynthArgs),
    /// Compute the multi-scale tubularity map of an image.
    Tubularity(TubularityArgs),
    /// Cut labeled training patches from annotated images.
    MakeSamples(SamplesArgs),
    /// Train the patch classifier.
    Train(TrainArgs),
    /// Extract minimal paths between start and end points.
    Extract(ExtractArgs),
    /// Grow the foreground map from a start point without an end point.
    Fmap(FmapArgs),
    /// Score extracted paths and foreground maps against annotations.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// none, type1 or type2.
    #[arg(long, value_parser = parse_trap)]
    trap: Option<TrapType>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    ridge_width: Option<f64>,
    #[arg(long)]
    contrast: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TubularityParamsArgs {
    /// Comma-separated Gaussian scales in pixels.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c_norm: Option<f64>,
}

#[derive(Args, Debug)]
struct TubularityArgs {
    image: PathBuf,
    #[command(flatten)]
    tub: TubularityParamsArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SamplesArgs {
    /// Annotation JSON files; image paths resolve relative to each file.
    #[arg(required = true)]
    annotations: Vec<PathBuf>,
    #[arg(long)]
    positives: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    /// Square patch size in samples.
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Sample directories written by make-samples.
    #[arg(required = true)]
    samples: Vec<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Decision threshold stored with the model.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, value_parser = parse_adapter)]
    adapter: Option<AdapterKind>,
    /// convnet, axis-aligned, oracle, oracle-fg, oracle-bg, mean-tubularity or pixelwise-mean.
    #[arg(long, value_parser = parse_classifier)]
    classifier: Option<ClassifierKind>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Overrides the model's decision threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Threshold of the mean-along-path classifiers.
    #[arg(long)]
    mean_threshold: Option<f64>,
    #[arg(long)]
    oracle_radius: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// 4 or 8.
    #[arg(long, value_parser = parse_connectivity)]
    connectivity: Option<Connectivity>,
    /// Absolute background penalty.
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    local_path_length: Option<f64>,
    #[arg(long)]
    patch_width: Option<f64>,
    #[command(flatten)]
    tub: TubularityParamsArgs,
}

#[derive(Args, Debug)]
struct ImageArgs {
    /// Input image (PNG, PGM or PPM).
    #[arg(required_unless_present = "scene")]
    image: Option<PathBuf>,
    /// Directory written by `synth`; supplies the image, annotation and end points.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Start pixel as `x,y`.
    #[arg(long, value_parser = parse_pixel)]
    start: Option<PixelCoord>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[command(flatten)]
    input: ImageArgs,
    /// End pixel as `x,y`.
    #[arg(long, value_parser = parse_pixel)]
    end: Option<PixelCoord>,
    /// JSON list of start/end pairs.
    #[arg(long, conflicts_with_all = ["start", "end"])]
    routes: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FmapArgs {
    #[command(flatten)]
    input: ImageArgs,
    /// Stop after this many settled vertices.
    #[arg(long)]
    budget: Option<usize>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Path JSON to score, as `FILE` or `METHOD=FILE`; repeatable.
    #[arg(long = "paths")]
    paths: Vec<String>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Image name selecting the annotation record.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Dataset label of the table rows.
    #[arg(long, default_value = "-")]
    dataset: String,
    /// Predicted foreground map; pairs with the --mask at the same position.
    #[arg(long = "fmap")]
    fmaps: Vec<PathBuf>,
    #[arg(long = "mask")]
    masks: Vec<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_trap(s: &str) -> Result<TrapType, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_adapter(s: &str) -> Result<AdapterKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_classifier(s: &str) -> Result<ClassifierKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pixel(s: &str) -> Result<PixelCoord, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    let n: u8 = s.parse().map_err(|_| format!("expected 4 or 8, got `{s}`"))?;
    Connectivity::from_count(n).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl TubularityParamsArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.tubularity.scales, self.scales);
        set(&mut cfg.tubularity.beta, self.beta);
        if self.c_norm.is_some() {
            cfg.tubularity.c_norm = self.c_norm;
        }
    }
}

impl SearchArgs {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.adapter, self.adapter);
        set(&mut cfg.classifier.kind, self.classifier);
        if self.model.is_some() {
            cfg.classifier.model = self.model;
        }
        if self.threshold.is_some() {
            cfg.classifier.threshold = self.threshold;
        }
        set(&mut cfg.classifier.mean_threshold, self.mean_threshold);
        if self.oracle_radius.is_some() {
            cfg.classifier.oracle_radius = self.oracle_radius;
        }
        set(&mut cfg.search.epsilon, self.epsilon);
        set(&mut cfg.search.lambda, self.lambda);
        set(&mut cfg.search.connectivity, self.connectivity);
        if self.penalty.is_some() {
            cfg.search.penalty = self.penalty;
        }
        set(&mut cfg.search.geom.local_path_length, self.local_path_length);
        set(&mut cfg.search.geom.patch_width, self.patch_width);
        self.tub.apply(cfg);
    }
}

/// Image path and annotation file, with a scene directory filling the gaps.
struct ResolvedInput {
    image: PathBuf,
    annotations: Option<PathBuf>,
}

impl ImageArgs {
    fn resolve(self, cfg: &mut RunConfig, end: Option<PixelCoord>) -> pathcnn_core::Result<ResolvedInput> {
        let mut image = self.image;
        let mut annotations = self.annotations;
        if let Some(dir) = &self.scene {
            let meta = SceneMetadata::load(dir.join("scene.json"))?;
            image.get_or_insert_with(|| dir.join(&meta.image));
            annotations.get_or_insert_with(|| dir.join(&meta.annotation));
            cfg.start.get_or_insert(meta.start);
            cfg.end.get_or_insert(meta.end);
        }
        if self.start.is_some() {
            cfg.start = self.start;
        }
        if end.is_some() {
            cfg.end = end;
        }
        Ok(ResolvedInput {
            image: image.expect("clap requires an image or a scene"),
            annotations,
        })
    }
}

fn load_config(path: Option<&Path>) -> pathcnn_core::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> pathcnn_core::Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => {
            set(&mut cfg.scene.trap_type, a.trap);
            set(&mut cfg.scene.seed, a.seed);
            set(&mut cfg.scene.size, a.size);
            set(&mut cfg.scene.ridge_width, a.ridge_width);
            set(&mut cfg.scene.contrast, a.contrast);
            set(&mut cfg.scene.noise_std, a.noise_std);
            cfg.validate()?;
            let scene = pipeline::cmd_synth(&cfg, &a.out)?;
            println!(
                "{} scene, seed {}: start {} end {}, plain-path error {:.2} px after {} attempt(s)",
                scene.trap_type,
                scene.spec.seed,
                scene.start,
                scene.end,
                scene.validation.plain_error,
                scene.validation.attempts
            );
        }
        Command::Tubularity(a) => {
            a.tub.apply(&mut cfg);
            cfg.validate()?;
            let tub = pipeline::cmd_tubularity(&cfg, &a.image, &a.out)?;
            info!("tubularity map {}x{}", tub.width(), tub.height());
        }
        Command::MakeSamples(a) => {
            set(&mut cfg.samples.positives, a.positives);
            set(&mut cfg.samples.negatives, a.negatives);
            set(&mut cfg.samples.seed, a.seed);
            if let Some(n) = a.patch_size {
                cfg.samples.geom = PathGeomParams::square(n);
            }
            cfg.validate()?;
            let set = pipeline::cmd_make_samples(&cfg, &a.annotations, &a.out)?;
            println!(
                "{} samples ({} positive, {} negative)",
                set.len(),
                set.count(pathcnn_core::classifier::PatchClass::Foreground),
                set.count(pathcnn_core::classifier::PatchClass::Background)
            );
        }
        Command::Train(a) => {
            set(&mut cfg.train.epochs, a.epochs);
            set(&mut cfg.train.learning_rate, a.learning_rate);
            set(&mut cfg.train.batch_size, a.batch_size);
            set(&mut cfg.train.seed, a.seed);
            if a.threshold.is_some() {
                cfg.classifier.threshold = a.threshold;
            }
            cfg.validate()?;
            let (_, report) = pipeline::cmd_train(&cfg, &a.samples, &a.out)?;
            for e in &report.epochs {
                info!(
                    "epoch {}: loss {:.4}, train acc {:.3}, val acc {}",
                    e.epoch,
                    e.loss,
                    e.train_accuracy,
                    e.validation_accuracy.map_or("-".into(), |v| format!("{v:.3}"))
                );
            }
            println!(
                "trained on {} samples: train accuracy {:.3}, validation accuracy {}",
                report.train_samples,
                report.train_accuracy,
                report.validation_accuracy.map_or("-".into(), |v| format!("{v:.3}"))
            );
        }
        Command::Extract(a) => {
            let input = a.input.resolve(&mut cfg, a.end)?;
            a.search.apply(&mut cfg);
            cfg.validate()?;
            let routes: Vec<Route> = match &a.routes {
                Some(file) => pipeline::load_routes(file)?,
                None => pipeline::config_routes(&cfg)?,
            };
            let outcome = pipeline::cmd_extract(&cfg, &input.image, &routes, input.annotations.as_deref(), &a.out)?;
            for r in &outcome.stats.routes {
                info!(
                    "{} -> {}: {} points, {} settled, {} classifier calls",
                    r.start, r.end, r.points, r.stats.settled, r.stats.classifier_calls
                );
            }
            match outcome.stats.mean_distance {
                Some(e) => println!("{} path(s), mean distance to annotation {e:.3} px", outcome.paths.len()),
                None => println!("{} path(s)", outcome.paths.len()),
            }
        }
        Command::Fmap(a) => {
            let input = a.input.resolve(&mut cfg, None)?;
            a.search.apply(&mut cfg);
            if a.budget.is_some() {
                cfg.budget = a.budget;
            }
            cfg.validate()?;
            let fmap = pipeline::cmd_fmap(&cfg, &input.image, input.annotations.as_deref(), &a.out)?;
            println!("{} foreground pixels", fmap.count());
        }
        Command::Eval(a) => {
            let paths = a
                .paths
                .iter()
                .map(|s| match s.split_once('=') {
                    Some((m, f)) => (m.to_string(), PathBuf::from(f)),
                    None => (s.clone(), PathBuf::from(s)),
                })
                .collect();
            let inputs = EvalInputs {
                paths,
                annotations: a.annotations,
                image: a.image,
                dataset: a.dataset,
                fmaps: a.fmaps,
                masks: a.masks,
            };
            let report = pipeline::cmd_eval(&cfg, &inputs, a.out.as_deref())?;
            print!("{}", pipeline::format_table(&report));
        }
    }
    Ok(())
}

/// 2: usage or parameter errors, 3: unusable input, 4: runtime failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_) => 2,
        Error::Unreadable { .. }
        | Error::UnsupportedFormat(_)
        | Error::CorruptHeader(_)
        | Error::Json(_)
        | Error::OutOfBounds { .. }
        | Error::ShapeMismatch { .. }
        | Error::MagicMismatch
        | Error::UnsupportedVersion(_)
        | Error::ShapeChain(_)
        | Error::Truncated(_)
        | Error::AnnotationOutOfBounds { .. }
        | Error::AnnotationTooShort { .. }
        | Error::DimensionMismatch(_)
        | Error::EmptyPaths
        | Error::EmptyGroundTruth
        | Error::SingleClass => 3,
        Error::Io(_)
        | Error::Unreachable { .. }
        | Error::NotSettled { .. }
        | Error::DegeneratePath(_)
        | Error::Divergence { .. }
        | Error::CountsUnreachable { .. }
        | Error::TrapValidation { .. } => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PATHCNN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
