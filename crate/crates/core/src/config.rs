//! Run configuration shared by every command and embedded in every output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{Axis, JointGroup, JointId};
use crate::entropy::EntropyConfig;
use crate::error::{Error, Result};
use crate::glyph::DEFAULT_K_SD;
use crate::ingest::{QualityGate, DEFAULT_UNTRACKED_GATE};
use crate::preprocess::SegmentConfig;
use crate::profile::ProfileSettings;

/// Metadata key under which the configuration is embedded.
pub const RUN_CONFIG_KEY: &str = "run_config";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub entropy: EntropyConfig<f64>,
    pub segment: SegmentConfig,
    /// Largest tolerated untracked fraction per joint.
    pub gate: f64,
    pub joints: JointGroup,
    pub axis: Axis,
    pub k_sd: f64,
    pub scale_max: Option<f64>,
    /// Where files are written. Never serialized, so outputs do not depend on it.
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            entropy: EntropyConfig::default(),
            segment: SegmentConfig::default(),
            gate: DEFAULT_UNTRACKED_GATE,
            joints: JointGroup::default(),
            axis: Axis::Y,
            k_sd: DEFAULT_K_SD,
            scale_max: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.entropy.validate()?;
        self.segment.validate()?;
        if !(0.0..=1.0).contains(&self.gate) {
            return Err(Error::invalid(format!(
                "gate must be in [0, 1], got {}",
                self.gate
            )));
        }
        if !(self.k_sd >= 0.0 && self.k_sd.is_finite()) {
            return Err(Error::invalid(format!("k_sd must be ≥ 0, got {}", self.k_sd)));
        }
        if let Some(s) = self.scale_max {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("scale max must be > 0, got {s}")));
            }
        }
        Ok(())
    }

    pub fn joint_list(&self) -> Vec<JointId> {
        self.joints.joints()
    }

    /// Gate over the analysed joints plus `spine_base`, which segmentation needs.
    pub fn quality_gate(&self) -> QualityGate {
        let mut joints = self.joint_list();
        if !joints.contains(&JointId::SpineBase) {
            joints.push(JointId::SpineBase);
            joints.sort();
        }
        QualityGate {
            max_untracked_fraction: self.gate,
            joints,
        }
    }

    pub fn profile_settings(&self) -> ProfileSettings {
        ProfileSettings {
            entropy: self.entropy,
            axis: self.axis,
            max_gap: self.segment.max_gap,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("run config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `(key, value)` pairs for output headers.
    pub fn metadata(&self) -> Vec<(String, String)> {
        vec![(RUN_CONFIG_KEY.to_string(), self.to_json())]
    }

    /// Recover the configuration embedded in a CSV header or SVG comment.
    pub fn from_output_text(text: &str) -> Result<Self> {
        let marker = format!("{RUN_CONFIG_KEY}=");
        let line = text
            .lines()
            .find_map(|l| l.split_once(&marker).map(|(_, rest)| rest))
            .ok_or_else(|| Error::parse(format!("no embedded {RUN_CONFIG_KEY} found")))?;
        Self::from_json(line.trim_end_matches("-->").trim_end())
    }

    pub fn from_output_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_output_text(&text).map_err(|e| e.in_file(path))
    }
}
