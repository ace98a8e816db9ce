//! Progressive minimal-path search: edges leaving a vertex whose local path
//! is classified as background receive a large additive penalty.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{classify_mean_tubularity, PatchClass, PatchClassifier};
use crate::error::{Error, Result};
use crate::minpath::{
    dijkstra_until, extract_vertices, Connectivity, EdgeAdapter, GridGraph, IdentityAdapter, InitialWeights,
    SearchState, Stop,
};
use crate::pathgeom::{crop_and_rectify, crop_axis_aligned, local_path, LocalPath, PathGeomParams, Polyline};
use crate::raster::{to_grayscale, BinaryMap, PixelCoord, RasterImage};
use crate::tubularity::TubularityMap;

/// Labels the local path ending at `anchor`.
pub trait PathClassifier {
    fn classify_path(&self, local: &Polyline, anchor: PixelCoord, img: &RasterImage) -> Result<PatchClass>;
}

impl<P: PathClassifier + ?Sized> PathClassifier for &P {
    fn classify_path(&self, local: &Polyline, anchor: PixelCoord, img: &RasterImage) -> Result<PatchClass> {
        (**self).classify_path(local, anchor, img)
    }
}

impl<P: PathClassifier + ?Sized> PathClassifier for Box<P> {
    fn classify_path(&self, local: &Polyline, anchor: PixelCoord, img: &RasterImage) -> Result<PatchClass> {
        (**self).classify_path(local, anchor, img)
    }
}

/// Rectifies the strip around the local path, then classifies the patch.
#[derive(Debug, Clone)]
pub struct Rectified<C> {
    pub classifier: C,
    pub geom: PathGeomParams,
}

impl<C: PatchClassifier> PathClassifier for Rectified<C> {
    fn classify_path(&self, local: &Polyline, anchor: PixelCoord, img: &RasterImage) -> Result<PatchClass> {
        let mut patch = crop_and_rectify(local, img, &self.geom)?;
        patch.meta.anchor = Some(anchor);
        self.classifier.classify(&patch)
    }
}

/// Classifies an axis-aligned crop centered on the midpoint of the local path.
#[derive(Debug, Clone)]
pub struct AxisAligned<C> {
    pub classifier: C,
    pub geom: PathGeomParams,
}

impl<C: PatchClassifier> PathClassifier for AxisAligned<C> {
    fn classify_path(&self, local: &Polyline, anchor: PixelCoord, img: &RasterImage) -> Result<PatchClass> {
        let mid = local.point_at(0.5 * self.geom.local_path_length.min(local.length()));
        let mut patch = crop_axis_aligned(img, mid, &self.geom);
        patch.meta.anchor = Some(anchor);
        patch.meta.path_length = local.length();
        self.classifier.classify(&patch)
    }
}

/// Thresholds the mean of `map` along the local path. With the tubularity
/// map this is the plain progressive baseline; with a per-pixel classifier
/// score map it uses learned features instead.
#[derive(Debug, Clone, Copy)]
pub struct MeanAlongPath<'a> {
    pub map: &'a RasterImage,
    pub threshold: f64,
}

impl PathClassifier for MeanAlongPath<'_> {
    fn classify_path(&self, local: &Polyline, _anchor: PixelCoord, _img: &RasterImage) -> Result<PatchClass> {
        Ok(classify_mean_tubularity(local, self.map, self.threshold))
    }
}

/// Per-vertex outcome of the adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexClass {
    Foreground,
    Background,
    /// Within one local-path length of the start; never penalized.
    TooShort,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub settled: usize,
    /// Every classifier invocation, including `start_zone_calls`.
    pub classifier_calls: usize,
    pub fg_count: usize,
    pub bg_count: usize,
    /// Calls made for too-short vertices; they feed the foreground map only.
    pub start_zone_calls: usize,
}

/// Edge adapter that classifies each expanded vertex's local path once and
/// penalizes all of its outgoing edges if the result is background.
pub struct ProgressiveAdapter<P> {
    classifier: P,
    local_path_length: f64,
    penalty: f64,
    width: usize,
    cache: Vec<Option<VertexClass>>,
    fmap: BinaryMap,
    stats: RunStats,
}

pub type PathCnnAdapter<C> = ProgressiveAdapter<Rectified<C>>;

impl<P: PathClassifier> ProgressiveAdapter<P> {
    pub fn new(classifier: P, local_path_length: f64, penalty: f64, width: usize, height: usize) -> Result<Self> {
        if !(penalty > 0.0 && penalty.is_finite()) {
            return Err(Error::InvalidParameter(format!("penalty must be > 0, got {penalty}")));
        }
        if !(local_path_length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "local path length must be > 0, got {local_path_length}"
            )));
        }
        Ok(Self {
            classifier,
            local_path_length,
            penalty,
            width,
            cache: vec![None; width * height],
            fmap: BinaryMap::new(width, height),
            stats: RunStats::default(),
        })
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    pub fn vertex_class(&self, p: PixelCoord) -> Option<VertexClass> {
        self.cache[p.y * self.width + p.x]
    }

    /// Vertices whose local path was classified as foreground.
    pub fn fmap(&self) -> BinaryMap {
        self.fmap.clone()
    }

    fn class_of(&mut self, u: PixelCoord, state: &SearchState, img: &RasterImage) -> Result<VertexClass> {
        let i = u.y * self.width + u.x;
        if let Some(c) = self.cache[i] {
            return Ok(c);
        }
        let class = match local_path(u, state, self.local_path_length) {
            LocalPath::TooShort => {
                // The search never penalizes these, but the foreground map
                // still wants the classifier's opinion; otherwise it would
                // carry a hole around whichever start point was used.
                if let Some(path) = extended_start_path(u, state, self.local_path_length) {
                    self.stats.classifier_calls += 1;
                    self.stats.start_zone_calls += 1;
                    if self.classifier.classify_path(&path, u, img)?.is_foreground() {
                        self.fmap.set(u.x, u.y, true);
                    }
                }
                VertexClass::TooShort
            }
            LocalPath::Path(path) => {
                self.stats.classifier_calls += 1;
                match self.classifier.classify_path(&path, u, img)? {
                    PatchClass::Foreground => {
                        self.stats.fg_count += 1;
                        self.fmap.set(u.x, u.y, true);
                        VertexClass::Foreground
                    }
                    PatchClass::Background => {
                        self.stats.bg_count += 1;
                        VertexClass::Background
                    }
                }
            }
        };
        self.cache[i] = Some(class);
        Ok(class)
    }
}

/// Predecessor chain from `u` to the start, continued straight past the
/// start until it is `length` long. `None` for the start itself.
fn extended_start_path(u: PixelCoord, state: &SearchState, length: f64) -> Option<Polyline> {
    let mut chain = vec![u.to_point()];
    let mut cur = u;
    while let Some(p) = state.pred(cur) {
        chain.push(p.to_point());
        cur = p;
    }
    if chain.len() < 2 {
        return None;
    }
    let last = chain[chain.len() - 1];
    let back = chain[chain.len().saturating_sub(6)];
    let (dx, dy) = (last.x - back.x, last.y - back.y);
    let norm = dx.hypot(dy);
    let acc: f64 = chain.windows(2).map(|w| w[0].distance(w[1])).sum();
    // one extra pixel keeps the resampled path safely above `length`
    let extra = length - acc + 1.0;
    chain.push(crate::raster::SubPixelPoint::new(
        last.x + dx / norm * extra,
        last.y + dy / norm * extra,
    ));
    Polyline::new(chain).ok()
}

impl<P: PathClassifier> EdgeAdapter for ProgressiveAdapter<P> {
    fn adapt(
        &mut self,
        u: PixelCoord,
        _v: PixelCoord,
        base: f64,
        state: &SearchState,
        img: &RasterImage,
    ) -> Result<f64> {
        Ok(match self.class_of(u, state, img)? {
            VertexClass::Background => base + self.penalty,
            VertexClass::Foreground | VertexClass::TooShort => base,
        })
    }
}

/// Tunables of one search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchParams {
    pub epsilon: f64,
    pub lambda: f64,
    pub connectivity: Connectivity,
    pub geom: PathGeomParams,
    /// Absolute penalty; `None` means 1000 × the median initial edge weight.
    pub penalty: Option<f64>,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            lambda: 0.1,
            connectivity: Connectivity::Eight,
            geom: PathGeomParams::default(),
            penalty: None,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        self.geom.validate()?;
        if let Some(p) = self.penalty {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("penalty must be > 0, got {p}")));
            }
        }
        Ok(())
    }

    /// The configured penalty, or 1000 × the median initial weight.
    pub fn resolve_penalty(&self, weights: &InitialWeights<'_>, graph: &GridGraph) -> f64 {
        self.penalty.unwrap_or_else(|| 1000.0 * weights.median(graph))
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// Pixel path from start to end.
    pub vertices: Vec<PixelCoord>,
    pub path: Polyline,
    /// `d(end)`.
    pub distance: f64,
    pub fmap: BinaryMap,
    pub stats: RunStats,
    pub penalty: f64,
    pub wall_ms: f64,
}

fn gray(img: &RasterImage) -> std::borrow::Cow<'_, RasterImage> {
    if img.channels() == 1 {
        std::borrow::Cow::Borrowed(img)
    } else {
        std::borrow::Cow::Owned(to_grayscale(img))
    }
}

fn check_dims(img: &RasterImage, tub: &TubularityMap) -> Result<()> {
    if img.width() != tub.width() || img.height() != tub.height() {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}, tubularity map is {}x{}",
            img.width(),
            img.height(),
            tub.width(),
            tub.height()
        )));
    }
    Ok(())
}

/// Minimal path from `start` to `end` with classifier-driven penalties.
pub fn run_pathcnn<P: PathClassifier>(
    start: PixelCoord,
    end: PixelCoord,
    img: &RasterImage,
    tub: &TubularityMap,
    classifier: P,
    params: &SearchParams,
) -> Result<Extraction> {
    params.validate()?;
    check_dims(img, tub)?;
    let t0 = Instant::now();
    let img = gray(img);
    let graph = GridGraph::for_image(tub, params.connectivity);
    let weights = InitialWeights::new(tub, params.epsilon, params.lambda)?;
    let penalty = params.resolve_penalty(&weights, &graph);
    let mut adapter = ProgressiveAdapter::new(
        classifier,
        params.geom.local_path_length,
        penalty,
        tub.width(),
        tub.height(),
    )?;
    let state = dijkstra_until(&graph, start, Stop::AtEnd(end), &weights, &mut adapter, &img)?;
    let vertices = extract_vertices(&state, end)?;
    let mut stats = adapter.stats();
    stats.settled = state.settled_count();
    Ok(Extraction {
        path: Polyline::from_pixels(&vertices),
        distance: state.dist(end),
        vertices,
        fmap: adapter.fmap(),
        stats,
        penalty,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    })
}

/// Plain Dijkstra on the initial weights.
pub fn run_plain(
    start: PixelCoord,
    end: PixelCoord,
    tub: &TubularityMap,
    params: &SearchParams,
) -> Result<Extraction> {
    params.validate()?;
    let t0 = Instant::now();
    let graph = GridGraph::for_image(tub, params.connectivity);
    let weights = InitialWeights::new(tub, params.epsilon, params.lambda)?;
    let state = dijkstra_until(&graph, start, Stop::AtEnd(end), &weights, &mut IdentityAdapter, tub)?;
    let vertices = extract_vertices(&state, end)?;
    Ok(Extraction {
        path: Polyline::from_pixels(&vertices),
        distance: state.dist(end),
        vertices,
        fmap: BinaryMap::new(tub.width(), tub.height()),
        stats: RunStats {
            settled: state.settled_count(),
            ..RunStats::default()
        },
        penalty: 0.0,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone)]
pub struct FmapRun {
    pub fmap: BinaryMap,
    pub stats: RunStats,
    pub penalty: f64,
    pub wall_ms: f64,
}

/// Search without an end point; stops when the frontier empties or
/// `budget` vertices are settled, and returns the foreground map.
pub fn run_fmap_only<P: PathClassifier>(
    start: PixelCoord,
    img: &RasterImage,
    tub: &TubularityMap,
    classifier: P,
    params: &SearchParams,
    budget: Option<usize>,
) -> Result<FmapRun> {
    params.validate()?;
    check_dims(img, tub)?;
    let t0 = Instant::now();
    let img = gray(img);
    let graph = GridGraph::for_image(tub, params.connectivity);
    let weights = InitialWeights::new(tub, params.epsilon, params.lambda)?;
    let penalty = params.resolve_penalty(&weights, &graph);
    let mut adapter = ProgressiveAdapter::new(
        classifier,
        params.geom.local_path_length,
        penalty,
        tub.width(),
        tub.height(),
    )?;
    let state = dijkstra_until(
        &graph,
        start,
        Stop::Exhaust { max_settled: budget },
        &weights,
        &mut adapter,
        &img,
    )?;
    let mut stats = adapter.stats();
    stats.settled = state.settled_count();
    Ok(FmapRun {
        fmap: adapter.fmap(),
        stats,
        penalty,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    })
}
