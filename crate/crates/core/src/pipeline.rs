//! End-to-end commands: each reads inputs, runs one stage and writes its
//! artifacts plus the resolved configuration into an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{
    load_model, save_model, score_pixelwise, train, ConstantClassifier, ConvNetModel, OracleClassifier, PatchClass,
    PatchClassifier, TrainReport,
};
use crate::config::{AdapterKind, ClassifierKind, RunConfig};
use crate::dataset::{generate_samples, load_annotations, synth_scene, Annotation, SampleSet, SyntheticScene};
use crate::error::{Error, Result};
use crate::eval::{dice_report, mean_distance, DiceReport, ErrorReport};
use crate::pathcnn::{
    run_fmap_only, run_pathcnn, run_plain, AxisAligned, MeanAlongPath, PathClassifier, Rectified, RunStats,
};
use crate::pathgeom::{PathGeomParams, Polyline};
use crate::raster::{
    load_image, render_overlay, save_png, save_pnm, save_pnm16, to_grayscale, BinaryMap, LayerShape, OverlayLayer,
    PixelCoord, RasterImage,
};
use crate::tubularity::{vesselness, TubularityMap};

const PATH_COLOR: [f64; 3] = [1.0, 0.1, 0.1];
const FMAP_COLOR: [f64; 3] = [0.1, 0.8, 0.2];

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn prepare_out(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    write_json(out.join("config.json"), cfg)
}

fn points_xy(line: &Polyline) -> Vec<[f64; 2]> {
    line.points().iter().map(|p| [p.x, p.y]).collect()
}

// ---------------------------------------------------------------------------
// synth

/// Contents of `scene.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetadata {
    pub spec: crate::dataset::SceneSpec,
    pub start: PixelCoord,
    pub end: PixelCoord,
    pub gt_centerline: Vec<[f64; 2]>,
    pub decoy: Option<Vec<[f64; 2]>>,
    pub validation: crate::dataset::SceneValidation,
    pub image: String,
    pub annotation: String,
    pub mask: String,
}

impl SceneMetadata {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

/// Writes `image.png`, `annotation.json`, `scene.json` and `mask.png`.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<SyntheticScene> {
    cfg.scene.validate()?;
    let scene = synth_scene(&cfg.scene)?;
    prepare_out(cfg, out)?;
    save_png(&scene.image, out.join("image.png"))?;
    save_png(&scene.ridge_mask.to_image(), out.join("mask.png"))?;
    let mut ann = scene.annotation("image.png");
    ann.mask = Some("mask.png".into());
    write_json(out.join("annotation.json"), &ann.to_json())?;
    let meta = SceneMetadata {
        spec: scene.spec,
        start: scene.start,
        end: scene.end,
        gt_centerline: points_xy(&scene.gt_centerline),
        decoy: scene.decoy.as_ref().map(points_xy),
        validation: scene.validation,
        image: "image.png".into(),
        annotation: "annotation.json".into(),
        mask: "mask.png".into(),
    };
    write_json(out.join("scene.json"), &meta)?;
    Ok(scene)
}

// ---------------------------------------------------------------------------
// tubularity

/// Writes `tubularity.pgm` (16-bit) and an 8-bit `tubularity.png` preview.
pub fn cmd_tubularity(cfg: &RunConfig, image: &Path, out: &Path) -> Result<TubularityMap> {
    cfg.tubularity.validate()?;
    let img = load_image(image)?;
    let tub = vesselness(&img, &cfg.tubularity)?;
    prepare_out(cfg, out)?;
    save_pnm16(&tub, out.join("tubularity.pgm"))?;
    save_png(&tub, out.join("tubularity.png"))?;
    Ok(tub)
}

// ---------------------------------------------------------------------------
// make-samples / train

/// Picks the annotation record for `image`, matching by file name; a
/// single-record file matches any image.
pub fn select_annotation<'a>(anns: &'a [Annotation], image: Option<&Path>) -> Result<&'a Annotation> {
    if let Some(name) = image.and_then(|p| p.file_name()) {
        if let Some(a) = anns.iter().find(|a| Path::new(&a.image).file_name() == Some(name)) {
            return Ok(a);
        }
    }
    match anns {
        [one] => Ok(one),
        [] => Err(Error::EmptyGroundTruth),
        _ => Err(Error::InvalidParameter(format!(
            "annotation file has {} records; none matches {}",
            anns.len(),
            image.map_or("the image".into(), |p| p.display().to_string())
        ))),
    }
}

/// Generates samples from every image listed in every annotation file and
/// saves the combined set into `out`.
pub fn cmd_make_samples(cfg: &RunConfig, annotation_files: &[PathBuf], out: &Path) -> Result<SampleSet> {
    cfg.samples.validate()?;
    if annotation_files.is_empty() {
        return Err(Error::InvalidParameter("no annotation files given".into()));
    }
    let mut set = SampleSet {
        geom: cfg.samples.geom,
        samples: Vec::new(),
    };
    let mut index = 0u64;
    for file in annotation_files {
        for ann in load_annotations(file)? {
            let img = to_grayscale(&load_image(ann.image_path(file))?);
            ann.check_bounds(img.width(), img.height())?;
            let mut params = cfg.samples;
            params.seed = cfg.samples.seed.wrapping_add(index);
            set.extend(generate_samples(&img, &ann, &params)?);
            index += 1;
        }
    }
    prepare_out(cfg, out)?;
    set.save(out)?;
    Ok(set)
}

/// Trains on the union of the sample directories; writes `model.pcnn` and
/// `training_log.json`.
pub fn cmd_train(cfg: &RunConfig, sample_dirs: &[PathBuf], out: &Path) -> Result<(ConvNetModel, TrainReport)> {
    cfg.train.validate()?;
    let mut labeled = Vec::new();
    let mut geom: Option<PathGeomParams> = None;
    for dir in sample_dirs {
        let set = SampleSet::load(dir)?;
        if let Some(g) = geom {
            if (g.rows(), g.cols()) != (set.geom.rows(), set.geom.cols()) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}x{} patches", g.rows(), g.cols()),
                    actual: format!("{}x{} in {}", set.geom.rows(), set.geom.cols(), dir.display()),
                });
            }
        }
        geom = Some(set.geom);
        labeled.extend(set.labeled());
    }
    let (mut model, report) = train(&labeled, &cfg.train)?;
    if let Some(t) = cfg.classifier.threshold {
        model.set_threshold(t)?;
    }
    prepare_out(cfg, out)?;
    save_model(&model, out.join("model.pcnn"))?;
    write_json(out.join("training_log.json"), &report)?;
    Ok((model, report))
}

// ---------------------------------------------------------------------------
// classifiers

/// A path classifier assembled from the configuration.
pub enum BuiltClassifier {
    Rectified(Rectified<Box<dyn PatchClassifier>>),
    AxisAligned(AxisAligned<ConvNetModel>),
    MeanAlong { map: RasterImage, threshold: f64 },
}

impl PathClassifier for BuiltClassifier {
    fn classify_path(&self, local: &Polyline, anchor: PixelCoord, img: &RasterImage) -> Result<PatchClass> {
        match self {
            Self::Rectified(c) => c.classify_path(local, anchor, img),
            Self::AxisAligned(c) => c.classify_path(local, anchor, img),
            Self::MeanAlong { map, threshold } => MeanAlongPath {
                map,
                threshold: *threshold,
            }
            .classify_path(local, anchor, img),
        }
    }
}

fn load_configured_model(cfg: &RunConfig) -> Result<ConvNetModel> {
    let path = cfg.classifier.model.as_ref().ok_or_else(|| {
        Error::InvalidParameter(format!(
            "classifier `{}` needs a model file",
            serde_json::to_value(cfg.classifier.kind).unwrap().as_str().unwrap_or("?")
        ))
    })?;
    let mut model = load_model(path)?;
    if let Some(t) = cfg.classifier.threshold {
        model.set_threshold(t)?;
    }
    let geom = &cfg.search.geom;
    let shape = model.input_shape();
    if (shape.height, shape.width) != (geom.rows(), geom.cols()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} patches from the search geometry", geom.rows(), geom.cols()),
            actual: format!("model input {}x{}", shape.height, shape.width),
        });
    }
    Ok(model)
}

/// Builds the configured classifier. `gt` is required by the oracle kind.
pub fn build_classifier(
    cfg: &RunConfig,
    img: &RasterImage,
    tub: &TubularityMap,
    gt: Option<&[Polyline]>,
) -> Result<BuiltClassifier> {
    let geom = cfg.search.geom;
    let rectified = |c: Box<dyn PatchClassifier>| BuiltClassifier::Rectified(Rectified { classifier: c, geom });
    Ok(match cfg.classifier.kind {
        ClassifierKind::Convnet => rectified(Box::new(load_configured_model(cfg)?)),
        ClassifierKind::AxisAligned => BuiltClassifier::AxisAligned(AxisAligned {
            classifier: load_configured_model(cfg)?,
            geom,
        }),
        ClassifierKind::Oracle => {
            let gt = gt.ok_or_else(|| Error::InvalidParameter("the oracle classifier needs annotations".into()))?;
            let radius = cfg.classifier.oracle_radius.unwrap_or(geom.patch_width / 2.0);
            rectified(Box::new(OracleClassifier::new(img.width(), img.height(), gt, radius)?))
        }
        ClassifierKind::OracleFg => rectified(Box::new(ConstantClassifier(PatchClass::Foreground))),
        ClassifierKind::OracleBg => rectified(Box::new(ConstantClassifier(PatchClass::Background))),
        ClassifierKind::MeanTubularity => BuiltClassifier::MeanAlong {
            map: tub.clone(),
            threshold: cfg.classifier.mean_threshold,
        },
        ClassifierKind::PixelwiseMean => {
            let model = load_configured_model(cfg)?;
            BuiltClassifier::MeanAlong {
                map: score_pixelwise(img, &model, &geom)?,
                threshold: cfg.classifier.mean_threshold,
            }
        }
    })
}

// ---------------------------------------------------------------------------
// extract

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub start: PixelCoord,
    pub end: PixelCoord,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RouteRecord {
    Pair([[usize; 2]; 2]),
    Named { start: [usize; 2], end: [usize; 2] },
}

/// Parses `[[[x,y],[x,y]], ...]` or `[{"start": [x,y], "end": [x,y]}, ...]`.
pub fn parse_routes(json: &str) -> Result<Vec<Route>> {
    let records: Vec<RouteRecord> = serde_json::from_str(json)?;
    Ok(records
        .into_iter()
        .map(|r| {
            let (s, e) = match r {
                RouteRecord::Pair([s, e]) => (s, e),
                RouteRecord::Named { start, end } => (start, end),
            };
            Route {
                start: PixelCoord::new(s[0], s[1]),
                end: PixelCoord::new(e[0], e[1]),
            }
        })
        .collect())
}

pub fn load_routes(path: impl AsRef<Path>) -> Result<Vec<Route>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_routes(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteStats {
    pub start: PixelCoord,
    pub end: PixelCoord,
    /// Geodesic distance of the end point.
    pub distance: f64,
    pub points: usize,
    pub stats: RunStats,
}

/// Contents of `stats.json`. Deterministic; timing goes to `timing.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub adapter: AdapterKind,
    pub classifier: Option<ClassifierKind>,
    pub penalty: f64,
    pub routes: Vec<RouteStats>,
    pub total: RunStats,
    /// Mean distance to the annotation, when one was given.
    pub mean_distance: Option<f64>,
    pub error: Option<ErrorReport>,
}

#[derive(Debug, Clone)]
pub struct ExtractOutcome {
    pub paths: Vec<Polyline>,
    /// Union over routes.
    pub fmap: BinaryMap,
    pub stats: ExtractStats,
    pub wall_ms: Vec<f64>,
}

/// Routes from the configuration's start/end pair.
pub fn config_routes(cfg: &RunConfig) -> Result<Vec<Route>> {
    match (cfg.start, cfg.end) {
        (Some(start), Some(end)) => Ok(vec![Route { start, end }]),
        _ => Err(Error::InvalidParameter("start and end points are required".into())),
    }
}

/// Runs one search per route on in-memory data.
pub fn extract(
    cfg: &RunConfig,
    img: &RasterImage,
    tub: &TubularityMap,
    routes: &[Route],
    gt: Option<&[Polyline]>,
) -> Result<ExtractOutcome> {
    cfg.search.validate()?;
    if routes.is_empty() {
        return Err(Error::InvalidParameter("no routes to extract".into()));
    }
    let classifier = match cfg.adapter {
        AdapterKind::None => None,
        AdapterKind::Pathcnn => Some(build_classifier(cfg, img, tub, gt)?),
    };
    let mut fmap = BinaryMap::new(img.width(), img.height());
    let mut paths = Vec::new();
    let mut route_stats = Vec::new();
    let mut wall_ms = Vec::new();
    let mut total = RunStats::default();
    let mut penalty = 0.0;
    for r in routes {
        let run = match &classifier {
            None => run_plain(r.start, r.end, tub, &cfg.search)?,
            Some(c) => run_pathcnn(r.start, r.end, img, tub, c, &cfg.search)?,
        };
        for (i, v) in run.fmap.data().iter().enumerate() {
            if *v {
                fmap.set(i % fmap.width(), i / fmap.width(), true);
            }
        }
        total.settled += run.stats.settled;
        total.classifier_calls += run.stats.classifier_calls;
        total.fg_count += run.stats.fg_count;
        total.bg_count += run.stats.bg_count;
        penalty = run.penalty;
        route_stats.push(RouteStats {
            start: r.start,
            end: r.end,
            distance: run.distance,
            points: run.vertices.len(),
            stats: run.stats,
        });
        wall_ms.push(run.wall_ms);
        paths.push(run.path);
    }
    let error = gt.map(|gt| mean_distance(&paths, gt)).transpose()?;
    Ok(ExtractOutcome {
        paths,
        fmap,
        stats: ExtractStats {
            adapter: cfg.adapter,
            classifier: classifier.as_ref().map(|_| cfg.classifier.kind),
            penalty,
            routes: route_stats,
            total,
            mean_distance: error.as_ref().map(|e| e.mean_distance),
            error,
        },
        wall_ms,
    })
}

fn load_gt(annotations: Option<&Path>, image: &Path, img: &RasterImage) -> Result<Option<Vec<Polyline>>> {
    let Some(file) = annotations else { return Ok(None) };
    let anns = load_annotations(file)?;
    let ann = select_annotation(&anns, Some(image))?;
    ann.check_bounds(img.width(), img.height())?;
    Ok(Some(ann.centerlines.clone()))
}

fn overlay(img: &RasterImage, fmap: &BinaryMap, paths: &[Polyline]) -> RasterImage {
    let mut layers = vec![OverlayLayer {
        shape: LayerShape::Mask(fmap),
        color: FMAP_COLOR,
    }];
    layers.extend(paths.iter().map(|p| OverlayLayer {
        shape: LayerShape::Polyline(p.points()),
        color: PATH_COLOR,
    }));
    render_overlay(img, &layers)
}

/// Writes `path.json`, `overlay.png`, `fmap.pgm`, `stats.json` and
/// `timing.json`. One route writes a single `[[x,y], ...]` list, several
/// routes a list of such lists.
pub fn cmd_extract(
    cfg: &RunConfig,
    image: &Path,
    routes: &[Route],
    annotations: Option<&Path>,
    out: &Path,
) -> Result<ExtractOutcome> {
    cfg.tubularity.validate()?;
    let img = to_grayscale(&load_image(image)?);
    let gt = load_gt(annotations, image, &img)?;
    let tub = vesselness(&img, &cfg.tubularity)?;
    let outcome = extract(cfg, &img, &tub, routes, gt.as_deref())?;
    prepare_out(cfg, out)?;
    let xy: Vec<Vec<[f64; 2]>> = outcome.paths.iter().map(points_xy).collect();
    if let [single] = xy.as_slice() {
        write_json(out.join("path.json"), single)?;
    } else {
        write_json(out.join("path.json"), &xy)?;
    }
    save_png(&overlay(&img, &outcome.fmap, &outcome.paths), out.join("overlay.png"))?;
    save_pnm(&outcome.fmap.to_image(), out.join("fmap.pgm"))?;
    write_json(out.join("stats.json"), &outcome.stats)?;
    write_json(out.join("timing.json"), &serde_json::json!({ "wall_ms": outcome.wall_ms }))?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// fmap

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmapStats {
    pub start: PixelCoord,
    pub classifier: ClassifierKind,
    pub penalty: f64,
    pub stats: RunStats,
    pub foreground_pixels: usize,
}

/// Runs an end-point-free search from `cfg.start` (bounded by `cfg.budget`)
/// and writes `fmap.pgm`, `overlay.png`, `stats.json` and `timing.json`.
pub fn cmd_fmap(cfg: &RunConfig, image: &Path, annotations: Option<&Path>, out: &Path) -> Result<BinaryMap> {
    cfg.tubularity.validate()?;
    cfg.search.validate()?;
    let start = cfg
        .start
        .ok_or_else(|| Error::InvalidParameter("a start point is required".into()))?;
    let img = to_grayscale(&load_image(image)?);
    let gt = load_gt(annotations, image, &img)?;
    let tub = vesselness(&img, &cfg.tubularity)?;
    let classifier = build_classifier(cfg, &img, &tub, gt.as_deref())?;
    let run = run_fmap_only(start, &img, &tub, &classifier, &cfg.search, cfg.budget)?;
    prepare_out(cfg, out)?;
    save_pnm(&run.fmap.to_image(), out.join("fmap.pgm"))?;
    save_png(&overlay(&img, &run.fmap, &[]), out.join("overlay.png"))?;
    let stats = FmapStats {
        start,
        classifier: cfg.classifier.kind,
        penalty: run.penalty,
        stats: run.stats,
        foreground_pixels: run.fmap.count(),
    };
    write_json(out.join("stats.json"), &stats)?;
    write_json(out.join("timing.json"), &serde_json::json!({ "wall_ms": run.wall_ms }))?;
    Ok(run.fmap)
}

// ---------------------------------------------------------------------------
// eval

#[derive(Deserialize)]
#[serde(untagged)]
enum PathFile {
    One(Vec<[f64; 2]>),
    Many(Vec<Vec<[f64; 2]>>),
}

/// Parses a single `[[x,y], ...]` path or a list of them.
pub fn parse_paths(json: &str) -> Result<Vec<Polyline>> {
    let lines = match serde_json::from_str(json)? {
        PathFile::One(p) => vec![p],
        PathFile::Many(ps) => ps,
    };
    lines
        .iter()
        .map(|p| Polyline::from_xy(&p.iter().map(|q| (q[0], q[1])).collect::<Vec<_>>()))
        .collect()
}

pub fn load_paths(path: impl AsRef<Path>) -> Result<Vec<Polyline>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_paths(&text)
}

#[derive(Debug, Clone, Default)]
pub struct EvalInputs {
    /// `(method label, path JSON)` pairs, one table row each.
    pub paths: Vec<(String, PathBuf)>,
    pub annotations: Option<PathBuf>,
    /// Selects the annotation record when the file lists several images.
    pub image: Option<PathBuf>,
    pub dataset: String,
    /// Predicted masks paired index-wise with `masks`.
    pub fmaps: Vec<PathBuf>,
    pub masks: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub dataset: String,
    pub report: ErrorReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub dice: Option<DiceReport>,
}

fn load_mask(path: &Path) -> Result<BinaryMap> {
    Ok(BinaryMap::from_image(&to_grayscale(&load_image(path)?)))
}

pub fn evaluate(inputs: &EvalInputs) -> Result<EvalReport> {
    let mut rows = Vec::new();
    if !inputs.paths.is_empty() {
        let file = inputs
            .annotations
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("path evaluation needs annotations".into()))?;
        let anns = load_annotations(file)?;
        let gt = &select_annotation(&anns, inputs.image.as_deref())?.centerlines;
        for (method, path) in &inputs.paths {
            rows.push(EvalRow {
                method: method.clone(),
                dataset: inputs.dataset.clone(),
                report: mean_distance(&load_paths(path)?, gt)?,
            });
        }
    }
    let dice = if inputs.fmaps.is_empty() && inputs.masks.is_empty() {
        None
    } else {
        if inputs.fmaps.len() != inputs.masks.len() {
            return Err(Error::InvalidParameter(format!(
                "{} predicted masks but {} ground-truth masks",
                inputs.fmaps.len(),
                inputs.masks.len()
            )));
        }
        let pred = inputs.fmaps.iter().map(|p| load_mask(p)).collect::<Result<Vec<_>>>()?;
        let gt = inputs.masks.iter().map(|p| load_mask(p)).collect::<Result<Vec<_>>>()?;
        let pairs: Vec<_> = pred.iter().zip(&gt).collect();
        Some(dice_report(&pairs)?)
    };
    if rows.is_empty() && dice.is_none() {
        return Err(Error::InvalidParameter("nothing to evaluate".into()));
    }
    Ok(EvalReport { rows, dice })
}

/// Method × dataset table of mean distances and error bins.
pub fn format_table(report: &EvalReport) -> String {
    let mut s = String::new();
    if !report.rows.is_empty() {
        let mw = report.rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
        let dw = report.rows.iter().map(|r| r.dataset.len()).max().unwrap_or(0).max(7);
        let _ = writeln!(
            s,
            "{:<mw$}  {:<dw$}  {:>8}  {:>6}  {:>6}  {:>6}",
            "method", "dataset", "E (px)", "<5", "5-10", ">10"
        );
        for r in &report.rows {
            let b = &r.report.bins;
            let _ = writeln!(
                s,
                "{:<mw$}  {:<dw$}  {:>8.3}  {:>5.1}%  {:>5.1}%  {:>5.1}%",
                r.method,
                r.dataset,
                r.report.mean_distance,
                100.0 * b.below_5,
                100.0 * b.from_5_to_10,
                100.0 * b.above_10
            );
        }
    }
    if let Some(d) = &report.dice {
        let _ = writeln!(s, "dice  {:.4}  ({} image(s))", d.dice, d.per_image.len());
    }
    s
}

/// Evaluates and writes `report.json` (plus the config echo) into `out`.
pub fn cmd_eval(cfg: &RunConfig, inputs: &EvalInputs, out: Option<&Path>) -> Result<EvalReport> {
    let report = evaluate(inputs)?;
    if let Some(out) = out {
        prepare_out(cfg, out)?;
        write_json(out.join("report.json"), &report)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_route_shapes() {
        let a = parse_routes("[[[1,2],[3,4]]]").unwrap();
        let b = parse_routes(r#"[{"start": [1,2], "end": [3,4]}]"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].end, PixelCoord::new(3, 4));
        assert!(parse_routes("[[1,2]]").is_err());
    }

    #[test]
    fn both_path_shapes() {
        let one = parse_paths("[[0,0],[1,0],[2,1]]").unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 3);
        let many = parse_paths("[[[0,0],[1,0]],[[5,5],[6,6]]]").unwrap();
        assert_eq!(many.len(), 2);
    }

    #[test]
    fn annotation_selection() {
        let anns = crate::dataset::parse_annotations(
            r#"[{"image": "a.png", "centerlines": [[[0,0],[1,1]]]},
                {"image": "sub/b.png", "centerlines": []}]"#,
        )
        .unwrap();
        assert_eq!(select_annotation(&anns, Some(Path::new("/x/b.png"))).unwrap().image, "sub/b.png");
        assert!(select_annotation(&anns, Some(Path::new("c.png"))).is_err());
        assert_eq!(select_annotation(&anns[..1], Some(Path::new("c.png"))).unwrap().image, "a.png");
    }

    #[test]
    fn model_kinds_need_a_model() {
        let cfg = RunConfig::default();
        let img = RasterImage::new(8, 8, 1);
        assert!(matches!(
            build_classifier(&cfg, &img, &img, None),
            Err(Error::InvalidParameter(_))
        ));
    }
}
