//! Run configuration shared by all commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::dataset::{SampleParams, SceneSpec};
use crate::error::{Error, Result};
use crate::pathcnn::SearchParams;
use crate::raster::PixelCoord;
use crate::tubularity::TubularityParams;

/// How edge weights are adapted during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterKind {
    /// Plain minimal path on the initial weights.
    None,
    #[default]
    Pathcnn,
}

impl std::str::FromStr for AdapterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "pathcnn" => Ok(Self::Pathcnn),
            _ => Err(Error::InvalidParameter(format!("unknown adapter `{s}` (expected none or pathcnn)"))),
        }
    }
}

/// Classifier consulted by the progressive adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    /// Trained network on rectified patches.
    #[default]
    Convnet,
    /// Trained network on axis-aligned crops around the local path.
    AxisAligned,
    /// Ground truth: foreground iff the vertex is near an annotated centerline.
    Oracle,
    /// Always foreground.
    OracleFg,
    /// Always background.
    OracleBg,
    /// Mean tubularity along the local path.
    MeanTubularity,
    /// Mean of the network's per-pixel score map along the local path.
    PixelwiseMean,
}

impl ClassifierKind {
    pub const NAMES: [&'static str; 7] = [
        "convnet",
        "axis-aligned",
        "oracle",
        "oracle-fg",
        "oracle-bg",
        "mean-tubularity",
        "pixelwise-mean",
    ];

    pub fn needs_model(self) -> bool {
        matches!(self, Self::Convnet | Self::AxisAligned | Self::PixelwiseMean)
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "convnet" => Self::Convnet,
            "axis-aligned" => Self::AxisAligned,
            "oracle" => Self::Oracle,
            "oracle-fg" => Self::OracleFg,
            "oracle-bg" => Self::OracleBg,
            "mean-tubularity" => Self::MeanTubularity,
            "pixelwise-mean" => Self::PixelwiseMean,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown classifier `{s}` (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub model: Option<PathBuf>,
    /// Replaces the decision threshold stored in the model file.
    pub threshold: Option<f64>,
    /// Threshold of the mean-along-path classifiers.
    pub mean_threshold: f64,
    /// Oracle acceptance radius; half the patch width if unset.
    pub oracle_radius: Option<f64>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Convnet,
            model: None,
            threshold: None,
            mean_threshold: 0.3,
            oracle_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub tubularity: TubularityParams,
    pub search: SearchParams,
    pub adapter: AdapterKind,
    pub classifier: ClassifierConfig,
    pub samples: SampleParams,
    pub train: TrainConfig,
    pub scene: SceneSpec,
    pub start: Option<PixelCoord>,
    pub end: Option<PixelCoord>,
    /// Maximum number of settled vertices for end-point-free searches.
    pub budget: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tubularity: TubularityParams::default(),
            search: SearchParams::default(),
            adapter: AdapterKind::Pathcnn,
            classifier: ClassifierConfig::default(),
            samples: SampleParams::default(),
            train: TrainConfig::default(),
            scene: SceneSpec::default(),
            start: None,
            end: None,
            budget: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable config")
    }

    pub fn validate(&self) -> Result<()> {
        self.tubularity.validate()?;
        self.search.validate()?;
        self.samples.validate()?;
        self.train.validate()?;
        self.scene.validate()?;
        if !(0.0..=1.0).contains(&self.classifier.mean_threshold) {
            return Err(Error::InvalidParameter("mean_threshold must be in [0, 1]".into()));
        }
        if let Some(t) = self.classifier.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidParameter(format!("threshold must be in (0, 1), got {t}")));
            }
        }
        if let Some(r) = self.classifier.oracle_radius {
            if !(r >= 0.0) {
                return Err(Error::InvalidParameter(format!("oracle radius must be >= 0, got {r}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{"search": {"lambda": 0.5}, "adapter": "none"}"#).unwrap();
        assert_eq!(cfg.search.lambda, 0.5);
        assert_eq!(cfg.search.epsilon, 0.01);
        assert_eq!(cfg.adapter, AdapterKind::None);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"serch": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"search": {"lamda": 1}}"#).is_err());
    }

    #[test]
    fn kind_names_parse() {
        for name in ClassifierKind::NAMES {
            let k: ClassifierKind = name.parse().unwrap();
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{name}\""));
        }
        assert!("cnn".parse::<ClassifierKind>().is_err());
    }
}
