//! Patch classifiers: the trained convnet, baselines, and test oracles.

mod convnet;
mod model_io;

pub use convnet::{
    accuracy, gradient_check, max_relative_error, numeric_gradient, param_layout, relative_error,
    sample_param_indices, train, train_model, ConvNetModel, EpochLog, Layer, Shape, TrainConfig, TrainReport,
};
pub use model_io::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathgeom::{crop_axis_aligned, resample_by_arclength, PathGeomParams, Polyline, RectifiedPatch};
use crate::raster::{sample_bilinear, BinaryMap, RasterImage, SubPixelPoint};
use crate::tubularity::TubularityMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchClass {
    Foreground,
    Background,
}

impl PatchClass {
    pub fn is_foreground(self) -> bool {
        self == PatchClass::Foreground
    }
}

/// Anything that can label a rectified patch.
pub trait PatchClassifier: Send + Sync {
    /// Foreground probability in `[0, 1]`.
    fn score(&self, patch: &RectifiedPatch) -> Result<f64>;

    fn threshold(&self) -> f64;

    fn classify(&self, patch: &RectifiedPatch) -> Result<PatchClass> {
        Ok(if self.score(patch)? >= self.threshold() {
            PatchClass::Foreground
        } else {
            PatchClass::Background
        })
    }
}

impl<C: PatchClassifier + ?Sized> PatchClassifier for &C {
    fn score(&self, patch: &RectifiedPatch) -> Result<f64> {
        (**self).score(patch)
    }

    fn threshold(&self) -> f64 {
        (**self).threshold()
    }
}

impl<C: PatchClassifier + ?Sized> PatchClassifier for Box<C> {
    fn score(&self, patch: &RectifiedPatch) -> Result<f64> {
        (**self).score(patch)
    }

    fn threshold(&self) -> f64 {
        (**self).threshold()
    }
}

/// Zero mean, unit variance; the variance is floored at `1e-6`.
pub fn normalize_patch(data: &[f64]) -> Vec<f64> {
    if data.is_empty() {
        return Vec::new();
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / var.max(1e-6).sqrt();
    data.iter().map(|v| (v - mean) * inv).collect()
}

/// Returns the same class for every patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantClassifier(pub PatchClass);

impl PatchClassifier for ConstantClassifier {
    fn score(&self, _patch: &RectifiedPatch) -> Result<f64> {
        Ok(if self.0.is_foreground() { 1.0 } else { 0.0 })
    }

    fn threshold(&self) -> f64 {
        0.5
    }
}

/// Ground-truth classifier: foreground iff the patch's anchor vertex lies
/// within `radius` of an annotated centerline. Patches without an anchor
/// are background.
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    near: BinaryMap,
}

impl OracleClassifier {
    pub fn new(width: usize, height: usize, centerlines: &[Polyline], radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("oracle radius must be >= 0, got {radius}")));
        }
        Ok(Self {
            near: dilate_polylines(width, height, centerlines, radius),
        })
    }

    /// Pixels within the oracle radius of the centerlines.
    pub fn region(&self) -> &BinaryMap {
        &self.near
    }

    pub fn is_near(&self, x: usize, y: usize) -> bool {
        x < self.near.width() && y < self.near.height() && self.near.get(x, y)
    }
}

impl PatchClassifier for OracleClassifier {
    fn score(&self, patch: &RectifiedPatch) -> Result<f64> {
        Ok(match patch.meta.anchor {
            Some(a) if self.is_near(a.x, a.y) => 1.0,
            _ => 0.0,
        })
    }

    fn threshold(&self) -> f64 {
        0.5
    }
}

/// Pixels whose center is within `radius` of any polyline (densely
/// resampled at 0.25 px).
pub fn dilate_polylines(width: usize, height: usize, lines: &[Polyline], radius: f64) -> BinaryMap {
    let mut out = BinaryMap::new(width, height);
    let r2 = radius * radius;
    let reach = radius.ceil() as i64 + 1;
    for line in lines {
        let dense = match resample_by_arclength(line, 0.25) {
            Ok(d) => d,
            Err(_) => line.clone(),
        };
        for p in dense.points() {
            let (cx, cy) = (p.x.round() as i64, p.y.round() as i64);
            for y in (cy - reach).max(0)..=(cy + reach).min(height as i64 - 1) {
                for x in (cx - reach).max(0)..=(cx + reach).min(width as i64 - 1) {
                    let (dx, dy) = (x as f64 - p.x, y as f64 - p.y);
                    if dx * dx + dy * dy <= r2 {
                        out.set(x as usize, y as usize, true);
                    }
                }
            }
        }
    }
    out
}

/// Thresholds the mean tubularity along a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanTubularityClassifier {
    pub threshold: f64,
}

impl MeanTubularityClassifier {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidParameter(format!("threshold must be in [0, 1], got {threshold}")));
        }
        Ok(Self { threshold })
    }

    pub fn classify(&self, path: &Polyline, tub: &TubularityMap) -> PatchClass {
        classify_mean_tubularity(path, tub, self.threshold)
    }
}

/// Mean of bilinear samples of `tub` along `path` resampled at unit step.
pub fn mean_along_path(path: &Polyline, tub: &TubularityMap) -> f64 {
    let resampled;
    let pts: &[SubPixelPoint] = if path.len() < 2 {
        path.points()
    } else {
        resampled = resample_by_arclength(path, 1.0).expect("non-degenerate path");
        resampled.points()
    };
    pts.iter().map(|p| sample_bilinear(tub, *p)).sum::<f64>() / pts.len() as f64
}

pub fn classify_mean_tubularity(path: &Polyline, tub: &TubularityMap, threshold: f64) -> PatchClass {
    if mean_along_path(path, tub) >= threshold {
        PatchClass::Foreground
    } else {
        PatchClass::Background
    }
}

/// Foreground score of the axis-aligned patch centered on every pixel.
pub fn score_pixelwise<C: PatchClassifier + ?Sized>(
    img: &RasterImage,
    classifier: &C,
    geom: &PathGeomParams,
) -> Result<RasterImage> {
    let (w, h) = (img.width(), img.height());
    let gray = crate::raster::to_grayscale(img);
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let patch = crop_axis_aligned(&gray, SubPixelPoint::new(x as f64, y as f64), geom);
                    classifier.score(&patch)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    RasterImage::from_vec(w, h, 1, rows.concat())
}

/// Per-pixel classification with the model applied to axis-aligned patches.
pub fn classify_pixelwise(img: &RasterImage, model: &ConvNetModel) -> Result<BinaryMap> {
    let shape = model.input_shape();
    let geom = PathGeomParams {
        local_path_length: (shape.height - 1) as f64,
        patch_width: (shape.width - 1) as f64,
        sample_step: 1.0,
    };
    let scores = score_pixelwise(img, model, &geom)?;
    let t = model.threshold();
    Ok(BinaryMap::from_fn(img.width(), img.height(), |x, y| scores.get(x, y) >= t))
}
