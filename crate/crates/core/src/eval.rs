//! Centerline distance error and mask overlap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathgeom::{resample_by_arclength, Polyline};
use crate::raster::{BinaryMap, SubPixelPoint};

/// Ground-truth resampling step used by [`mean_distance`].
pub const GT_STEP: f64 = 0.25;

/// Fractions of path points by distance to the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBins {
    /// `δ < 5`
    pub below_5: f64,
    /// `5 <= δ <= 10`
    pub from_5_to_10: f64,
    /// `δ > 10`
    pub above_10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathError {
    pub points: usize,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Mean over every point of every path.
    pub mean_distance: f64,
    pub bins: ErrorBins,
    pub points: usize,
    pub per_path: Vec<PathError>,
}

/// Distances from each point of each path to the nearest ground-truth point.
pub fn point_distances(paths: &[Polyline], gt: &[Polyline], gt_step: f64) -> Result<Vec<Vec<f64>>> {
    if paths.is_empty() {
        return Err(Error::EmptyPaths);
    }
    let dense = densify(gt, gt_step)?;
    Ok(paths
        .iter()
        .map(|p| p.points().iter().map(|q| nearest(&dense, *q)).collect())
        .collect())
}

fn densify(gt: &[Polyline], step: f64) -> Result<Vec<SubPixelPoint>> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("resampling step must be > 0, got {step}")));
    }
    let mut dense = Vec::new();
    for line in gt {
        if line.len() < 2 || line.length() == 0.0 {
            dense.extend_from_slice(line.points());
        } else {
            dense.extend_from_slice(resample_by_arclength(line, step)?.points());
        }
    }
    if dense.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(dense)
}

fn nearest(points: &[SubPixelPoint], q: SubPixelPoint) -> f64 {
    points
        .iter()
        .map(|p| (p.x - q.x).powi(2) + (p.y - q.y).powi(2))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Mean distance from path points to the ground truth, plus error bins.
pub fn mean_distance(paths: &[Polyline], gt: &[Polyline]) -> Result<ErrorReport> {
    mean_distance_with_step(paths, gt, GT_STEP)
}

pub fn mean_distance_with_step(paths: &[Polyline], gt: &[Polyline], gt_step: f64) -> Result<ErrorReport> {
    let per_point = point_distances(paths, gt, gt_step)?;
    let all: Vec<f64> = per_point.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let count = |f: &dyn Fn(f64) -> bool| all.iter().filter(|d| f(**d)).count() as f64 / n;
    Ok(ErrorReport {
        mean_distance: all.iter().sum::<f64>() / n,
        bins: ErrorBins {
            below_5: count(&|d| d < 5.0),
            from_5_to_10: count(&|d| (5.0..=10.0).contains(&d)),
            above_10: count(&|d| d > 10.0),
        },
        points: all.len(),
        per_path: per_point
            .iter()
            .map(|d| PathError {
                points: d.len(),
                mean_distance: d.iter().sum::<f64>() / d.len() as f64,
            })
            .collect(),
    })
}

/// `2|A∩B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(pred: &BinaryMap, gt: &BinaryMap) -> Result<f64> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::DimensionMismatch(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let (a, b) = (pred.count(), gt.count());
    if a + b == 0 {
        return Ok(1.0);
    }
    let both = pred.data().iter().zip(gt.data()).filter(|(p, g)| **p && **g).count();
    Ok(2.0 * both as f64 / (a + b) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceReport {
    /// Mean over images.
    pub dice: f64,
    pub per_image: Vec<f64>,
}

pub fn dice_report(pairs: &[(&BinaryMap, &BinaryMap)]) -> Result<DiceReport> {
    let per_image = pairs.iter().map(|(p, g)| dice(p, g)).collect::<Result<Vec<_>>>()?;
    let dice = if per_image.is_empty() {
        0.0
    } else {
        per_image.iter().sum::<f64>() / per_image.len() as f64
    };
    Ok(DiceReport { dice, per_image })
}
