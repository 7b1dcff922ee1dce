//! Shared pipeline configuration file (strict UTF-8 JSON).
//!
//! Unknown keys are rejected so experiment-config typos fail loudly.
//! Precedence is flags > file > defaults; the flag overlay lives in the
//! CLI layer.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocr::OcrEngineConfig;
use crate::raster::{PreprocessParams, Roi, StageSelection};
use crate::scoreparse::FormatPolicy;
use crate::segmenter::SegmentationConfig;

pub const OCR_CMD_ENV: &str = "WICKETLENS_OCR_CMD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub nu: usize,
    pub nv: usize,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self { nu: 10, nv: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcrConfig {
    /// "builtin" or "external".
    pub engine: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
}

impl Default for OcrConfig {
    fn default() -> Self {
        Self {
            engine: "builtin".into(),
            command: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub conf_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub roi: Roi,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_morph_kernel")]
    pub morph_kernel: usize,
    #[serde(default = "default_median_kernel")]
    pub median_kernel: usize,
    #[serde(default = "default_sample_interval")]
    pub sample_interval_s: f64,
    #[serde(default)]
    pub score_format: FormatPolicy,
    #[serde(default = "default_debounce")]
    pub debounce: usize,
    #[serde(default = "default_pre_roll")]
    pub pre_roll_s: f64,
    #[serde(default = "default_post_roll")]
    pub post_roll_s: f64,
    #[serde(default)]
    pub heatmap: HeatmapConfig,
    #[serde(default)]
    pub ocr: OcrConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "default_pitch_gap")]
    pub pitch_gap_frames: usize,
}

fn default_gamma() -> f64 {
    7.0
}
fn default_morph_kernel() -> usize {
    15
}
fn default_median_kernel() -> usize {
    3
}
fn default_sample_interval() -> f64 {
    0.1
}
fn default_debounce() -> usize {
    2
}
fn default_pre_roll() -> f64 {
    8.0
}
fn default_post_roll() -> f64 {
    2.5
}
fn default_pitch_gap() -> usize {
    15
}

impl Config {
    pub fn with_roi(roi: Roi) -> Self {
        Self {
            roi,
            gamma: default_gamma(),
            morph_kernel: default_morph_kernel(),
            median_kernel: default_median_kernel(),
            sample_interval_s: default_sample_interval(),
            score_format: FormatPolicy::Auto,
            debounce: default_debounce(),
            pre_roll_s: default_pre_roll(),
            post_roll_s: default_post_roll(),
            heatmap: HeatmapConfig::default(),
            ocr: OcrConfig::default(),
            eval: EvalConfig::default(),
            pitch_gap_frames: default_pitch_gap(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        fs::write(path, text + "\n").map_err(|e| Error::file(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess_params().validate()?;
        if !(self.sample_interval_s > 0.0) {
            return Err(Error::Config("sample_interval_s must be positive".into()));
        }
        if self.debounce == 0 {
            return Err(Error::Config("debounce must be >= 1".into()));
        }
        if self.heatmap.nu == 0 || self.heatmap.nv == 0 {
            return Err(Error::Config("heatmap grid must be at least 1x1".into()));
        }
        match self.ocr.engine.as_str() {
            "builtin" => {}
            "external" => {
                if self.ocr.command.is_none() && std::env::var(OCR_CMD_ENV).is_err() {
                    return Err(Error::Config(format!(
                        "ocr.engine is \"external\" but neither ocr.command nor ${OCR_CMD_ENV} is set"
                    )));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "ocr.engine must be \"builtin\" or \"external\", got \"{other}\""
                )))
            }
        }
        Ok(())
    }

    pub fn preprocess_params(&self) -> PreprocessParams {
        PreprocessParams {
            gamma: self.gamma,
            morph_kernel: self.morph_kernel,
            median_kernel: self.median_kernel,
        }
    }

    /// Engine selection; `WICKETLENS_OCR_CMD` in the environment forces
    /// the external engine with that command.
    pub fn ocr_engine(&self) -> Result<OcrEngineConfig> {
        if let Ok(cmd) = std::env::var(OCR_CMD_ENV) {
            if !cmd.trim().is_empty() {
                return Ok(OcrEngineConfig::External { command: cmd });
            }
        }
        match self.ocr.engine.as_str() {
            "builtin" => Ok(OcrEngineConfig::default()),
            "external" => {
                let command = self.ocr.command.clone().ok_or_else(|| {
                    Error::Config("external ocr engine needs ocr.command".into())
                })?;
                Ok(OcrEngineConfig::External { command })
            }
            other => Err(Error::Config(format!("unknown ocr engine \"{other}\""))),
        }
    }

    pub fn segmentation(&self, jobs: usize) -> Result<SegmentationConfig> {
        Ok(SegmentationConfig {
            roi: self.roi,
            preprocess: self.preprocess_params(),
            stages: StageSelection::default(),
            sample_interval_s: self.sample_interval_s,
            score_format: self.score_format,
            debounce: self.debounce,
            pre_roll_s: self.pre_roll_s,
            post_roll_s: self.post_roll_s,
            ocr: self.ocr_engine()?,
            jobs,
        })
    }
}
