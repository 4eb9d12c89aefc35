//! Run configuration: one JSON document, overridden field by field from the
//! command line.

use std::path::PathBuf;

use finsler_core::comparison::{BallSpec, TestFunction};
use finsler_core::{ChartPoint, MeasureKind, MetricModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Params {
    pub q: f64,
    #[serde(rename = "K")]
    pub big_k: f64,
    /// Lower curvature parameter: `Ric ≥ (n−1)k` for segment and volume
    /// checks, `Ric ≥ −(n−1)k²` for the diameter constants.
    pub k: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub rho: f64,
    pub alpha: f64,
    /// Replaces the measured `δ` in `constants`.
    pub delta: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            q: 1.0,
            big_k: 1.0,
            k: 0.0,
            radius: 1.0,
            rho: 0.2,
            alpha: 0.5,
            delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Sampling {
    pub seed: Option<u64>,
    pub count: usize,
    pub centers: usize,
    pub pairs: usize,
    pub kind: MeasureKind,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            seed: None,
            count: 200,
            centers: 8,
            pairs: 500,
            kind: MeasureKind::BusemannHausdorff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct GeodesicConfig {
    /// Defaults to the chart origin.
    pub point: Option<ChartPoint>,
    /// Defaults to the first axis scaled to unit speed.
    pub velocity: Option<Vec<f64>>,
    pub duration: f64,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig {
            point: None,
            velocity: None,
            duration: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub a1: Option<BallSpec>,
    pub a2: Option<BallSpec>,
    pub f: TestFunction,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            a1: None,
            a2: None,
            f: TestFunction::One,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Output {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<MetricModel>,
    /// Filled in from the command line; echoed in reports.
    pub command: Option<String>,
    pub params: Params,
    pub sampling: Sampling,
    pub geodesic: GeodesicConfig,
    pub segment: SegmentConfig,
    pub output: Output,
    /// Replaces the deterministic tolerance of every check.
    pub tolerance: Option<f64>,
}

/// A usage or configuration error naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub constraint: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.constraint)
    }
}

pub(crate) fn require(ok: bool, field: &str, constraint: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError {
            field: field.to_string(),
            constraint: constraint.to_string(),
        })
    }
}

impl RunConfig {
    pub fn model(&self) -> Result<&MetricModel, ConfigError> {
        self.model.as_ref().ok_or(ConfigError {
            field: "model".into(),
            constraint: "a model is required".into(),
        })
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.sampling.seed.ok_or(ConfigError {
            field: "sampling.seed".into(),
            constraint: "a seed is required".into(),
        })
    }

    /// Checks shared by every command.
    pub fn validate_common(&self) -> Result<(), ConfigError> {
        let model = self.model()?;
        model.validate().map_err(|e| ConfigError {
            field: "model".into(),
            constraint: e.to_string(),
        })?;
        self.seed()?;
        let p = &self.params;
        require(p.radius > 0.0, "params.R", "R > 0")?;
        require(p.big_k > 0.0, "params.K", "K > 0")?;
        require(p.q >= 1.0, "params.q", "q >= 1")?;
        require(p.rho > 0.0, "params.rho", "rho > 0")?;
        if let Some(d) = p.delta {
            require(d >= 1.0, "params.delta", "delta >= 1")?;
        }
        if let Some(t) = self.tolerance {
            require(t >= 0.0, "tolerance", "tolerance >= 0")?;
        }
        let s = &self.sampling;
        require(s.count >= 2, "sampling.count", "count >= 2")?;
        require(s.centers >= 1, "sampling.centers", "centers >= 1")?;
        require(s.pairs >= 2, "sampling.pairs", "pairs >= 2")?;
        require(self.geodesic.duration > 0.0, "geodesic.duration", "duration > 0")?;
        Ok(())
    }

    /// Checks of the volume comparison hypotheses.
    pub fn validate_volume(&self) -> Result<(), ConfigError> {
        let n = self.model()?.dim() as f64;
        let p = &self.params;
        require(p.q > n / 2.0, "params.q", "q > n/2")?;
        require(p.k <= 0.0, "params.k", "k <= 0")?;
        require(p.alpha > 0.0, "params.alpha", "alpha > 0")?;
        Ok(())
    }
}
