//! Polylines, local paths read from predecessor links, and rectification of
//! the image strip around a path into a fixed-size patch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minpath::SearchState;
use crate::raster::{sample_bilinear, PixelCoord, RasterImage, SubPixelPoint};

/// Ordered points with a cumulative arc-length table.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<SubPixelPoint>,
    arc: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<SubPixelPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegeneratePath("polyline needs at least one point".into()));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::DegeneratePath("non-finite polyline point".into()));
        }
        let mut arc = Vec::with_capacity(points.len());
        let mut total = 0.0;
        arc.push(0.0);
        for w in points.windows(2) {
            total += w[0].distance(w[1]);
            arc.push(total);
        }
        Ok(Self { points, arc })
    }

    pub fn from_pixels(pixels: &[PixelCoord]) -> Self {
        Self::new(pixels.iter().map(|p| p.to_point()).collect()).expect("pixel polyline must be non-empty")
    }

    pub fn from_xy(xy: &[(f64, f64)]) -> Result<Self> {
        Self::new(xy.iter().map(|&(x, y)| SubPixelPoint::new(x, y)).collect())
    }

    pub fn points(&self) -> &[SubPixelPoint] {
        &self.points
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn first(&self) -> SubPixelPoint {
        self.points[0]
    }

    pub fn last(&self) -> SubPixelPoint {
        *self.points.last().unwrap()
    }

    /// Point at arc length `s`, clamped to `[0, length]`.
    pub fn point_at(&self, s: f64) -> SubPixelPoint {
        let s = s.clamp(0.0, self.length());
        let seg = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => return self.points[i],
            Err(i) => i - 1,
        };
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let len = self.arc[seg + 1] - self.arc[seg];
        let t = if len > 0.0 { (s - self.arc[seg]) / len } else { 0.0 };
        SubPixelPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    }

    /// Sub-polyline between arc lengths `from <= to`, endpoints interpolated.
    pub fn slice(&self, from: f64, to: f64) -> Polyline {
        let (from, to) = (from.clamp(0.0, self.length()), to.clamp(0.0, self.length()));
        let mut pts = vec![self.point_at(from)];
        for (p, &a) in self.points.iter().zip(&self.arc) {
            if a > from && a < to {
                pts.push(*p);
            }
        }
        if to > from {
            pts.push(self.point_at(to));
        }
        Polyline::new(pts).expect("slice is non-empty")
    }

    pub fn reversed(&self) -> Polyline {
        let mut pts = self.points.clone();
        pts.reverse();
        Polyline::new(pts).expect("non-empty")
    }

    pub fn map(&self, f: impl Fn(SubPixelPoint) -> SubPixelPoint) -> Polyline {
        Polyline::new(self.points.iter().map(|&p| f(p)).collect()).expect("non-empty")
    }
}

/// Lengths that define local paths and rectified patches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathGeomParams {
    /// Arc length of a local path, pixels.
    pub local_path_length: f64,
    /// Width of the strip cropped around a path, pixels.
    pub patch_width: f64,
    /// Pixels per rectified row/column.
    pub sample_step: f64,
}

impl Default for PathGeomParams {
    fn default() -> Self {
        Self {
            local_path_length: 30.0,
            patch_width: 30.0,
            sample_step: 1.0,
        }
    }
}

impl PathGeomParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("local_path_length", self.local_path_length),
            ("patch_width", self.patch_width),
            ("sample_step", self.sample_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Patch height in samples: `round(L / step) + 1`.
    pub fn rows(&self) -> usize {
        (self.local_path_length / self.sample_step).round() as usize + 1
    }

    /// Patch width in samples: `round(patch_width / step) + 1`.
    pub fn cols(&self) -> usize {
        (self.patch_width / self.sample_step).round() as usize + 1
    }

    /// Square patch of `size` samples at unit step.
    pub fn square(size: usize) -> Self {
        let extent = size.saturating_sub(1) as f64;
        Self {
            local_path_length: extent,
            patch_width: extent,
            sample_step: 1.0,
        }
    }
}

/// Where a patch came from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PatchMeta {
    /// Vertex whose local path produced the patch (search-time patches).
    pub anchor: Option<PixelCoord>,
    /// Arc length of the source path.
    pub path_length: f64,
}

/// Fixed-size grayscale patch, row-major, `rows` x `cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedPatch {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub meta: PatchMeta,
}

impl RectifiedPatch {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}x{cols}"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self {
            rows,
            cols,
            data,
            meta: PatchMeta::default(),
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn to_image(&self) -> RasterImage {
        RasterImage::from_vec(self.cols, self.rows, 1, self.data.clone()).expect("consistent shape")
    }

    pub fn from_image(img: &RasterImage) -> Self {
        let gray = crate::raster::to_grayscale(img);
        Self::new(gray.height(), gray.width(), gray.into_data()).expect("consistent shape")
    }
}

/// Result of walking back along predecessor links.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalPath {
    /// Points from the anchor vertex backwards, at least `L` long.
    Path(Polyline),
    /// The start point was reached before accumulating length `L`.
    TooShort,
}

/// Walks predecessors from `u` until the accumulated arc length first reaches `length`.
pub fn local_path(u: PixelCoord, state: &SearchState, length: f64) -> LocalPath {
    let mut pixels = vec![u];
    let mut acc = 0.0;
    let mut cur = u;
    while acc < length {
        let Some(p) = state.pred(cur) else {
            return LocalPath::TooShort;
        };
        acc += cur.to_point().distance(p.to_point());
        pixels.push(p);
        cur = p;
    }
    LocalPath::Path(Polyline::from_pixels(&pixels))
}

/// Points at arc lengths `0, step, 2·step, …` plus the final endpoint.
pub fn resample_by_arclength(path: &Polyline, step: f64) -> Result<Polyline> {
    if path.len() < 2 {
        return Err(Error::DegeneratePath("cannot resample a single-point polyline".into()));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("resample step must be > 0, got {step}")));
    }
    let total = path.length();
    let snap = 1e-6 * step;
    let mut points = Vec::with_capacity((total / step) as usize + 2);
    let mut k = 0usize;
    loop {
        let s = k as f64 * step;
        if s > total - snap {
            break;
        }
        points.push(path.point_at(s));
        k += 1;
    }
    points.push(path.last());
    Polyline::new(points)
}

fn unit(dx: f64, dy: f64) -> Option<(f64, f64)> {
    let n = dx.hypot(dy);
    (n > 1e-12).then(|| (dx / n, dy / n))
}

/// Samples the strip of `patch_width` around `path` into a `rows` x `cols`
/// patch. Row 0 is the first point of `path`; the path runs down the
/// center column.
pub fn crop_and_rectify(path: &Polyline, img: &RasterImage, params: &PathGeomParams) -> Result<RectifiedPatch> {
    params.validate()?;
    let rows = params.rows();
    let cols = params.cols();
    let resampled = resample_by_arclength(path, params.sample_step)?;
    if resampled.len() < rows {
        return Err(Error::DegeneratePath(format!(
            "path of length {:.3} is shorter than the local path length {}",
            path.length(),
            params.local_path_length
        )));
    }
    let pts = &resampled.points()[..rows];
    let center = (cols as f64 - 1.0) / 2.0;
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let (a, b) = match i {
            0 => (pts[0], pts[1]),
            i if i == rows - 1 => (pts[i - 1], pts[i]),
            i => (pts[i - 1], pts[i + 1]),
        };
        let (tx, ty) = unit(b.x - a.x, b.y - a.y)
            .ok_or_else(|| Error::DegeneratePath(format!("zero-length tangent at sample {i}")))?;
        // columns run along (ty, -tx): a proper rotation, never a mirror image
        let (nx, ny) = (ty, -tx);
        let p = pts[i];
        for j in 0..cols {
            let off = (j as f64 - center) * params.sample_step;
            data.push(sample_bilinear(img, SubPixelPoint::new(p.x + off * nx, p.y + off * ny)));
        }
    }
    let mut patch = RectifiedPatch::new(rows, cols, data)?;
    patch.meta.path_length = path.length();
    Ok(patch)
}

/// Axis-aligned crop of `rows` x `cols` samples centered on `center`.
pub fn crop_axis_aligned(img: &RasterImage, center: SubPixelPoint, params: &PathGeomParams) -> RectifiedPatch {
    let rows = params.rows();
    let cols = params.cols();
    let (rc, cc) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let p = SubPixelPoint::new(
                center.x + (j as f64 - cc) * params.sample_step,
                center.y + (i as f64 - rc) * params.sample_step,
            );
            data.push(sample_bilinear(img, p));
        }
    }
    RectifiedPatch::new(rows, cols, data).expect("consistent shape")
}
