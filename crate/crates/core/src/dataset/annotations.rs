use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathgeom::Polyline;

/// Centerline annotation of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub image: String,
    pub centerlines: Vec<Polyline>,
    pub mask: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    image: String,
    centerlines: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnnotationFile {
    One(AnnotationRecord),
    Many(Vec<AnnotationRecord>),
}

impl Annotation {
    /// Rejects points outside `[0, width-1] x [0, height-1]`.
    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        for line in &self.centerlines {
            for p in line.points() {
                if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= width as f64 - 1.0 && p.y <= height as f64 - 1.0) {
                    return Err(Error::AnnotationOutOfBounds {
                        x: p.x,
                        y: p.y,
                        bounds: format!("image is {width}x{height}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Image path resolved relative to the annotation file's directory.
    pub fn image_path(&self, annotation_file: &Path) -> PathBuf {
        let p = Path::new(&self.image);
        if p.is_absolute() {
            return p.to_path_buf();
        }
        annotation_file.parent().unwrap_or(Path::new(".")).join(p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rec = AnnotationRecord {
            image: self.image.clone(),
            centerlines: self
                .centerlines
                .iter()
                .map(|l| l.points().iter().map(|p| [p.x, p.y]).collect())
                .collect(),
            mask: self.mask.clone(),
        };
        serde_json::to_value(rec).expect("serializable")
    }
}

fn from_record(rec: AnnotationRecord) -> Result<Annotation> {
    let mut centerlines = Vec::with_capacity(rec.centerlines.len());
    for line in rec.centerlines {
        for &[x, y] in &line {
            if !(x >= 0.0 && y >= 0.0 && x.is_finite() && y.is_finite()) {
                return Err(Error::AnnotationOutOfBounds {
                    x,
                    y,
                    bounds: "coordinates must be finite and >= 0".into(),
                });
            }
        }
        let xy: Vec<(f64, f64)> = line.iter().map(|p| (p[0], p[1])).collect();
        centerlines.push(Polyline::from_xy(&xy)?);
    }
    Ok(Annotation {
        image: rec.image,
        centerlines,
        mask: rec.mask,
    })
}

/// Parses a single annotation object or an array of them.
pub fn parse_annotations(json: &str) -> Result<Vec<Annotation>> {
    match serde_json::from_str(json)? {
        AnnotationFile::One(r) => Ok(vec![from_record(r)?]),
        AnnotationFile::Many(rs) => rs.into_iter().map(from_record).collect(),
    }
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotations(&text)
}
