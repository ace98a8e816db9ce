//! Training patches: rectified positives along annotated centerlines and
//! axis-aligned negatives of three kinds.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{dilate_polylines, PatchClass};
use crate::error::{Error, Result};
use crate::pathgeom::{crop_and_rectify, crop_axis_aligned, resample_by_arclength, PathGeomParams, RectifiedPatch};
use crate::raster::{load_image, sample_bilinear, save_pnm16, to_grayscale, RasterImage, SubPixelPoint};
use crate::tubularity::{vesselness, TubularityParams};

use super::Annotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Rectified window along a centerline.
    OnPath,
    /// No centerline anywhere in the patch.
    OffImage,
    /// Centerline runs at a steep angle to the vertical.
    OffAngle,
    /// Centerline passes well to the side of the patch center.
    OffCenter,
}

/// Enough information to regenerate a patch from its source image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleSource {
    Window {
        line: usize,
        start_arc: f64,
        reversed: bool,
        angle_deg: f64,
    },
    Crop {
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub patch: RectifiedPatch,
    pub label: PatchClass,
    pub provenance: Provenance,
    pub source: SampleSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub geom: PathGeomParams,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleParams {
    pub geom: PathGeomParams,
    pub positives: usize,
    pub negatives: usize,
    /// Positives are rotated by a uniform angle in `±max_rotation_deg`.
    pub max_rotation_deg: f64,
    /// Minimum deviation from vertical for off-angle negatives.
    pub off_angle_deg: f64,
    /// Share of off-image negatives centered on high-tubularity pixels.
    pub hard_negative_fraction: f64,
    pub seed: u64,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            geom: PathGeomParams::default(),
            positives: 1000,
            negatives: 3000,
            max_rotation_deg: 5.0,
            off_angle_deg: 30.0,
            hard_negative_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SampleParams {
    pub fn validate(&self) -> Result<()> {
        self.geom.validate()?;
        if !(0.0..=1.0).contains(&self.hard_negative_fraction) {
            return Err(Error::InvalidParameter("hard_negative_fraction must be in [0, 1]".into()));
        }
        if !(self.max_rotation_deg >= 0.0 && self.off_angle_deg > self.max_rotation_deg && self.off_angle_deg <= 90.0) {
            return Err(Error::InvalidParameter(
                "need 0 <= max_rotation_deg < off_angle_deg <= 90".into(),
            ));
        }
        Ok(())
    }
}

/// Rotates `patch` about its center by `angle_deg` (bilinear, clamped borders).
pub fn rotate_patch(patch: &RectifiedPatch, angle_deg: f64) -> RectifiedPatch {
    if angle_deg == 0.0 {
        return patch.clone();
    }
    let img = patch.to_image();
    let (s, c) = angle_deg.to_radians().sin_cos();
    let rc = (patch.rows as f64 - 1.0) / 2.0;
    let cc = (patch.cols as f64 - 1.0) / 2.0;
    let mut data = Vec::with_capacity(patch.data.len());
    for i in 0..patch.rows {
        for j in 0..patch.cols {
            let (dx, dy) = (j as f64 - cc, i as f64 - rc);
            let src = SubPixelPoint::new(cc + c * dx + s * dy, rc - s * dx + c * dy);
            data.push(sample_bilinear(&img, src));
        }
    }
    let mut out = RectifiedPatch::new(patch.rows, patch.cols, data).expect("same shape");
    out.meta = patch.meta;
    out
}

/// Small random rotation in `[-5°, 5°]`, reproducible from `seed`.
pub fn augment(patch: &RectifiedPatch, seed: u64) -> RectifiedPatch {
    let angle = ChaCha8Rng::seed_from_u64(seed).gen_range(-5.0..=5.0);
    rotate_patch(patch, angle)
}

/// Densely resampled centerline point with its unit tangent.
#[derive(Debug, Clone, Copy)]
struct GtPoint {
    p: SubPixelPoint,
    tx: f64,
    ty: f64,
}

impl GtPoint {
    /// Angle between the (undirected) tangent and the vertical, degrees.
    fn angle_from_vertical(&self) -> f64 {
        self.ty.abs().min(1.0).acos().to_degrees()
    }
}

fn dense_points(ann: &Annotation) -> Result<Vec<GtPoint>> {
    let mut out = Vec::new();
    for line in &ann.centerlines {
        if line.len() < 2 || line.length() == 0.0 {
            continue;
        }
        let pts = resample_by_arclength(line, 0.5)?;
        let pts = pts.points();
        for i in 0..pts.len() {
            let (a, b) = (pts[i.saturating_sub(1)], pts[(i + 1).min(pts.len() - 1)]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let n = dx.hypot(dy);
            if n > 0.0 {
                out.push(GtPoint {
                    p: pts[i],
                    tx: dx / n,
                    ty: dy / n,
                });
            }
        }
    }
    Ok(out)
}

/// Distance from `q` to the axis-aligned square of half-size `h` centered on `c`.
fn box_distance(c: SubPixelPoint, h: f64, q: SubPixelPoint) -> f64 {
    let dx = ((q.x - c.x).abs() - h).max(0.0);
    let dy = ((q.y - c.y).abs() - h).max(0.0);
    dx.hypot(dy)
}

struct Sampler<'a> {
    gray: &'a RasterImage,
    gt: Vec<GtPoint>,
    params: &'a SampleParams,
}

impl Sampler<'_> {
    fn half(&self) -> f64 {
        self.params.geom.patch_width / 2.0
    }

    fn inside(&self, c: SubPixelPoint) -> bool {
        c.x >= 0.0 && c.y >= 0.0 && c.x <= (self.gray.width() - 1) as f64 && c.y <= (self.gray.height() - 1) as f64
    }

    /// The whole crop stays farther than `patch_width / 2` from every centerline.
    fn is_off_image(&self, c: SubPixelPoint) -> bool {
        let h = self.half();
        let extent = self.params.geom.sample_step * ((self.params.geom.cols().max(self.params.geom.rows()) - 1) as f64) / 2.0;
        self.inside(c) && self.gt.iter().all(|g| box_distance(c, extent, g.p) > h)
    }

    fn min_distance(&self, c: SubPixelPoint) -> f64 {
        self.gt.iter().map(|g| g.p.distance(c)).fold(f64::INFINITY, f64::min)
    }

    /// A near-vertical centerline passes close to the center: would look like a positive.
    fn looks_positive(&self, c: SubPixelPoint) -> bool {
        let r = self.params.geom.patch_width / 3.0;
        self.gt
            .iter()
            .any(|g| g.p.distance(c) < r && g.angle_from_vertical() < self.params.off_angle_deg)
    }

    fn off_angle(&self, rng: &mut ChaCha8Rng) -> Option<SubPixelPoint> {
        let g = self.gt.choose(rng)?;
        if g.angle_from_vertical() < self.params.off_angle_deg {
            return None;
        }
        let r = self.params.geom.patch_width / 3.0;
        let off = rng.gen_range(-r..r);
        let c = SubPixelPoint::new(g.p.x - off * g.ty, g.p.y + off * g.tx);
        (self.inside(c) && !self.looks_positive(c)).then_some(c)
    }

    fn off_center(&self, rng: &mut ChaCha8Rng) -> Option<SubPixelPoint> {
        let g = self.gt.choose(rng)?;
        let (lo, hi) = (self.params.geom.patch_width / 3.0, self.half());
        let off = rng.gen_range(lo..=hi) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let c = SubPixelPoint::new(g.p.x - off * g.ty, g.p.y + off * g.tx);
        (self.inside(c) && self.min_distance(c) >= lo).then_some(c)
    }

    fn random_off_image(&self, rng: &mut ChaCha8Rng) -> Option<SubPixelPoint> {
        let c = SubPixelPoint::new(
            rng.gen_range(0.0..=(self.gray.width() - 1) as f64),
            rng.gen_range(0.0..=(self.gray.height() - 1) as f64),
        );
        self.is_off_image(c).then_some(c)
    }
}

/// Draws up to `want` crop centers with `draw`, giving up after `50 * want`
/// failed attempts.
fn fill(
    want: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Option<SubPixelPoint>,
) -> Vec<SubPixelPoint> {
    let mut out = Vec::with_capacity(want);
    let mut failures = 0;
    while out.len() < want && failures < 50 * want.max(1) {
        match draw(rng) {
            Some(c) => out.push(c),
            None => failures += 1,
        }
    }
    out
}

/// Renders one sample from its source description.
pub fn render_source(
    source: &SampleSource,
    gray: &RasterImage,
    ann: &Annotation,
    geom: &PathGeomParams,
) -> Result<RectifiedPatch> {
    match *source {
        SampleSource::Window {
            line,
            start_arc,
            reversed,
            angle_deg,
        } => {
            let l = ann
                .centerlines
                .get(line)
                .ok_or_else(|| Error::InvalidParameter(format!("annotation has no centerline {line}")))?;
            let mut window = l.slice(start_arc, start_arc + geom.local_path_length);
            if reversed {
                window = window.reversed();
            }
            Ok(rotate_patch(&crop_and_rectify(&window, gray, geom)?, angle_deg))
        }
        SampleSource::Crop { x, y } => Ok(crop_axis_aligned(gray, SubPixelPoint::new(x, y), geom)),
    }
}

/// Positive and negative training patches for one annotated image.
pub fn generate_samples(img: &RasterImage, ann: &Annotation, params: &SampleParams) -> Result<SampleSet> {
    params.validate()?;
    ann.check_bounds(img.width(), img.height())?;
    let geom = params.geom;
    let gray = to_grayscale(img);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // positives: windows spread evenly over the usable arc of every line,
    // alternating direction
    let slack: Vec<f64> = ann
        .centerlines
        .iter()
        .map(|l| l.length() - geom.local_path_length)
        .collect();
    let longest = ann.centerlines.iter().map(|l| l.length()).fold(0.0, f64::max);
    if params.positives > 0 && slack.iter().all(|s| *s < 0.0) {
        return Err(Error::AnnotationTooShort {
            length: longest,
            required: geom.local_path_length,
        });
    }
    let total: f64 = slack.iter().map(|s| s.max(0.0)).sum();
    let mut sources = Vec::with_capacity(params.positives + params.negatives);
    for k in 0..params.positives {
        let mut t = (k as f64 + 0.5) / params.positives as f64 * total;
        let mut line = 0;
        for (i, s) in slack.iter().enumerate() {
            if *s < 0.0 {
                continue;
            }
            line = i;
            if t <= *s {
                break;
            }
            t -= s;
        }
        let start_arc = t.clamp(0.0, slack[line].max(0.0));
        let angle_deg = if params.max_rotation_deg > 0.0 {
            rng.gen_range(-params.max_rotation_deg..=params.max_rotation_deg)
        } else {
            0.0
        };
        sources.push((
            PatchClass::Foreground,
            Provenance::OnPath,
            SampleSource::Window {
                line,
                start_arc,
                reversed: k % 2 == 1,
                angle_deg,
            },
        ));
    }

    let sampler = Sampler {
        gray: &gray,
        gt: dense_points(ann)?,
        params,
    };
    let n_angle = params.negatives / 4;
    let n_center = params.negatives / 4;
    let angle = fill(n_angle, &mut rng, |r| sampler.off_angle(r));
    let center = fill(n_center, &mut rng, |r| sampler.off_center(r));
    let n_image = params.negatives - angle.len() - center.len();
    let n_hard = (n_image as f64 * params.hard_negative_fraction).round() as usize;
    let mut image = Vec::with_capacity(n_image);
    if n_hard > 0 {
        let pool = hard_pool(&gray, ann, params)?;
        if !pool.is_empty() {
            image = fill(n_hard, &mut rng, |r| {
                let c = *pool.choose(r)?;
                sampler.is_off_image(c).then_some(c)
            });
        }
    }
    let rest = n_image - image.len();
    image.extend(fill(rest, &mut rng, |r| sampler.random_off_image(r)));
    if image.len() < n_image {
        return Err(Error::CountsUnreachable {
            requested_pos: params.positives,
            requested_neg: params.negatives,
            achieved_pos: params.positives,
            achieved_neg: angle.len() + center.len() + image.len(),
        });
    }
    for (kind, centers) in [
        (Provenance::OffImage, image),
        (Provenance::OffAngle, angle),
        (Provenance::OffCenter, center),
    ] {
        for c in centers {
            sources.push((PatchClass::Background, kind, SampleSource::Crop { x: c.x, y: c.y }));
        }
    }

    let samples = sources
        .par_iter()
        .map(|(label, provenance, source)| {
            Ok(Sample {
                patch: render_source(source, &gray, ann, &geom)?,
                label: *label,
                provenance: *provenance,
                source: *source,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet { geom, samples })
}

/// Pixels with tubularity above 0.1 that lie away from every centerline.
fn hard_pool(gray: &RasterImage, ann: &Annotation, params: &SampleParams) -> Result<Vec<SubPixelPoint>> {
    let tub = vesselness(gray, &TubularityParams::default())?;
    let near = dilate_polylines(gray.width(), gray.height(), &ann.centerlines, params.geom.patch_width / 2.0);
    let mut pool = Vec::new();
    for y in 0..gray.height() {
        for x in 0..gray.width() {
            if tub.get(x, y) > 0.1 && !near.get(x, y) {
                pool.push(SubPixelPoint::new(x as f64, y as f64));
            }
        }
    }
    Ok(pool)
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    label: PatchClass,
    provenance: Provenance,
    source: SampleSource,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    geom: PathGeomParams,
    rows: usize,
    cols: usize,
    samples: Vec<ManifestEntry>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: PatchClass) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn extend(&mut self, other: SampleSet) {
        self.samples.extend(other.samples);
    }

    pub fn labeled(&self) -> Vec<(RectifiedPatch, PatchClass)> {
        self.samples.iter().map(|s| (s.patch.clone(), s.label)).collect()
    }

    /// Writes `manifest.json` and one 16-bit PGM per patch into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("patches"))?;
        let mut entries = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            let file = format!("patches/{i:06}.pgm");
            let mut img = s.patch.to_image();
            img.clamp_unit();
            save_pnm16(&img, dir.join(&file))?;
            entries.push(ManifestEntry {
                file,
                label: s.label,
                provenance: s.provenance,
                source: s.source,
            });
        }
        let (rows, cols) = (self.geom.rows(), self.geom.cols());
        let manifest = Manifest {
            geom: self.geom,
            rows,
            cols,
            samples: entries,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|source| Error::Unreadable { path, source })?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let samples = manifest
            .samples
            .into_par_iter()
            .map(|e| {
                let img = load_image(dir.join(&e.file))?;
                let patch = RectifiedPatch::from_image(&img);
                if patch.rows != manifest.rows || patch.cols != manifest.cols {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{}x{}", manifest.rows, manifest.cols),
                        actual: format!("{}x{} in {}", patch.rows, patch.cols, e.file),
                    });
                }
                Ok(Sample {
                    patch,
                    label: e.label,
                    provenance: e.provenance,
                    source: e.source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geom: manifest.geom,
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathgeom::Polyline;

    fn rings(n: usize) -> RectifiedPatch {
        let c = (n as f64 - 1.0) / 2.0;
        let data = (0..n * n)
            .map(|i| {
                let (y, x) = ((i / n) as f64 - c, (i % n) as f64 - c);
                0.5 + 0.5 * (x.hypot(y) * 0.6).cos()
            })
            .collect();
        RectifiedPatch::new(n, n, data).unwrap()
    }

    #[test]
    fn zero_rotation_is_identity() {
        let p = rings(31);
        assert_eq!(rotate_patch(&p, 0.0), p);
    }

    #[test]
    fn rings_are_rotation_invariant() {
        let p = rings(31);
        for seed in 0..20 {
            let q = augment(&p, seed);
            let mad = p.data.iter().zip(&q.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.data.len() as f64;
            assert!(mad <= 0.02, "seed {seed}: {mad}");
        }
        assert_eq!(augment(&p, 3), augment(&p, 3));
    }

    #[test]
    fn rotation_direction_matches_image_rotation() {
        // a bright pixel right of center moves down for a positive angle
        let mut p = RectifiedPatch::new(5, 5, vec![0.0; 25]).unwrap();
        p.data[2 * 5 + 4] = 1.0;
        let q = rotate_patch(&p, 90.0);
        assert!((q.get(4, 2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn box_distance_cases() {
        let c = SubPixelPoint::new(0.0, 0.0);
        assert_eq!(box_distance(c, 2.0, SubPixelPoint::new(1.0, 1.0)), 0.0);
        assert_eq!(box_distance(c, 2.0, SubPixelPoint::new(5.0, 0.0)), 3.0);
        assert_eq!(box_distance(c, 2.0, SubPixelPoint::new(5.0, 6.0)), 5.0);
    }

    #[test]
    fn too_short_annotation() {
        let img = RasterImage::new(64, 64, 1);
        let ann = Annotation {
            image: String::new(),
            centerlines: vec![Polyline::from_xy(&[(10.0, 10.0), (10.0, 20.0)]).unwrap()],
            mask: None,
        };
        let err = generate_samples(&img, &ann, &SampleParams::default()).unwrap_err();
        assert!(matches!(err, Error::AnnotationTooShort { .. }));
    }
}
