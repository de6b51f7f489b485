//! Frames CSV and session manifest parsing, serialization and trial validation.
//!
//! Frames CSV is long format, one row per joint per frame:
//!
//! ```text
//! frame,timestamp_ms,joint,x_m,y_m,z_m,state
//! 0,0,head,0.01,1.62,2.5,tracked
//! ```
//!
//! Rows may be grouped by frame or by joint; the parsed frames are ordered by
//! `frame`. The canonical serialization writes frames in order with joints in
//! canonical order and floats in shortest round-trip form, LF line endings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{
    CameraView, Condition, Frame, JointId, JointPosition, TrackState, Trial, TrialId, DEFAULT_FPS,
};
use crate::error::{Error, Result};

pub const FRAMES_HEADER: &str = "frame,timestamp_ms,joint,x_m,y_m,z_m,state";
pub const MANIFEST_SUFFIX: &str = ".manifest.json";
pub const DEFAULT_PATH_LENGTH_FT: f64 = 10.0;
/// Largest tolerated fraction of `not_tracked` samples per analysis joint.
pub const DEFAULT_UNTRACKED_GATE: f64 = 0.10;
/// Relative deviation of observed from nominal frame rate that raises a warning.
pub const FPS_WARN_FRACTION: f64 = 0.10;

const HEADER_FIELDS: [&str; 7] = ["frame", "timestamp_ms", "joint", "x_m", "y_m", "z_m", "state"];

struct PendingFrame {
    timestamp_ms: u64,
    first_line: u64,
    joints: [Option<JointPosition>; JointId::COUNT],
}

/// Parse a frames CSV stream. Every error names the offending line.
pub fn parse_frames_csv<R: Read>(input: R) -> Result<Vec<Frame>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(csv_error)?,
        None => return Err(Error::parse("line 1: empty input, expected header")),
    };
    if header.len() != HEADER_FIELDS.len() || header.iter().zip(HEADER_FIELDS).any(|(a, b)| a != b) {
        let got: Vec<&str> = header.iter().collect();
        return Err(Error::parse(format!(
            "line 1: bad header '{}', expected '{FRAMES_HEADER}'",
            got.join(",")
        )));
    }

    let mut pending: BTreeMap<u64, PendingFrame> = BTreeMap::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != HEADER_FIELDS.len() {
            return Err(Error::parse(format!(
                "line {line}: expected {} fields, got {}",
                HEADER_FIELDS.len(),
                rec.len()
            )));
        }
        let frame_index: u64 = parse_field(&rec[0], "frame", line)?;
        let timestamp_ms: u64 = parse_field(&rec[1], "timestamp_ms", line)?;
        let joint: JointId = rec[2]
            .parse()
            .map_err(|_| Error::parse(format!("unknown joint '{}' at line {line}", &rec[2])))?;
        let x: f64 = parse_field(&rec[3], "x_m", line)?;
        let y: f64 = parse_field(&rec[4], "y_m", line)?;
        let z: f64 = parse_field(&rec[5], "z_m", line)?;
        let state: TrackState = rec[6]
            .parse()
            .map_err(|e: Error| Error::parse(format!("line {line}: {e}")))?;
        if state != TrackState::NotTracked && !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::parse(format!(
                "line {line}: non-finite coordinate for {state} joint {joint}"
            )));
        }

        let entry = pending.entry(frame_index).or_insert_with(|| PendingFrame {
            timestamp_ms,
            first_line: line,
            joints: [None; JointId::COUNT],
        });
        if entry.timestamp_ms != timestamp_ms {
            return Err(Error::parse(format!(
                "line {line}: timestamp {timestamp_ms} disagrees with {} for frame {frame_index} (line {})",
                entry.timestamp_ms, entry.first_line
            )));
        }
        let slot = &mut entry.joints[joint.index()];
        if slot.is_some() {
            return Err(Error::parse(format!(
                "duplicate (frame {frame_index}, {joint}) at line {line}"
            )));
        }
        *slot = Some(JointPosition::new(x, y, z, state));
    }

    let mut frames = Vec::with_capacity(pending.len());
    for (frame_index, p) in pending {
        let present = p.joints.iter().filter(|j| j.is_some()).count();
        if present != JointId::COUNT {
            return Err(Error::parse(format!(
                "frame {frame_index}: {present}/{} joints (first seen at line {})",
                JointId::COUNT,
                p.first_line
            )));
        }
        let joints = p.joints.map(|j| j.expect("checked complete"));
        frames.push(Frame::new(frame_index, p.timestamp_ms, joints)?);
    }
    Ok(frames)
}

fn parse_field<T: std::str::FromStr>(raw: &str, name: &str, line: u64) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(format!("non-numeric {name} '{raw}' at line {line}")))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(format!("line {line}: {e}"))
}

/// Canonical frames CSV text.
pub fn frames_to_csv(frames: &[Frame]) -> String {
    let mut out = String::with_capacity(64 * JointId::COUNT * frames.len() + 64);
    out.push_str(FRAMES_HEADER);
    out.push('\n');
    for f in frames {
        for (joint, p) in f.joints() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                f.frame_index, f.timestamp_ms, joint, p.x, p.y, p.z, p.state
            )
            .expect("write to String");
        }
    }
    out
}

/// Metadata for one recorded trial, stored as `<name>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    pub subject_id: String,
    pub condition: Condition,
    pub camera: CameraView,
    pub trial_index: u32,
    #[serde(default = "default_fps")]
    pub fps_nominal: f64,
    #[serde(default = "default_path_length")]
    pub path_length_ft: f64,
    pub frames_file: String,
}

fn default_fps() -> f64 {
    DEFAULT_FPS
}

fn default_path_length() -> f64 {
    DEFAULT_PATH_LENGTH_FT
}

impl SessionManifest {
    pub fn trial_id(&self) -> TrialId {
        TrialId {
            subject_id: self.subject_id.clone(),
            condition: self.condition,
            camera: self.camera,
            trial_index: self.trial_index,
        }
    }

    fn check(&self) -> Result<()> {
        if self.subject_id.is_empty() {
            return Err(Error::parse("subject_id must not be empty"));
        }
        if self.trial_index < 1 {
            return Err(Error::parse("trial_index must be ≥ 1"));
        }
        if !(self.fps_nominal > 0.0 && self.fps_nominal.is_finite()) {
            return Err(Error::parse("fps_nominal must be > 0"));
        }
        if !(self.path_length_ft > 0.0 && self.path_length_ft.is_finite()) {
            return Err(Error::parse("path_length_ft must be > 0"));
        }
        if self.frames_file.is_empty() {
            return Err(Error::parse("frames_file must not be empty"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Strict manifest parsing: unknown keys, bad tokens and out-of-range values are errors.
pub fn parse_manifest(text: &str) -> Result<SessionManifest> {
    let m: SessionManifest =
        serde_json::from_str(text).map_err(|e| Error::parse(format!("manifest: {e}")))?;
    m.check().map_err(|e| Error::parse(format!("manifest: {e}")))?;
    Ok(m)
}

/// Read a manifest and the frames file it names (relative to the manifest).
pub fn load_trial(manifest_path: &Path) -> Result<(SessionManifest, Trial)> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest = parse_manifest(&text).map_err(|e| e.in_file(manifest_path))?;
    let frames_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.frames_file);
    let file = fs::File::open(&frames_path).map_err(|e| Error::io(&frames_path, e))?;
    let frames = parse_frames_csv(std::io::BufReader::new(file)).map_err(|e| e.in_file(&frames_path))?;
    let trial =
        Trial::new(manifest.trial_id(), manifest.fps_nominal, frames).map_err(|e| e.in_file(&frames_path))?;
    Ok((manifest, trial))
}

/// All `*.manifest.json` files in `dir`, sorted by file name.
pub fn discover_manifests(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_manifest = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(MANIFEST_SUFFIX));
        if is_manifest && path.is_file() {
            found.push(path);
        }
    }
    found.sort();
    Ok(found)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    /// Row, field or joint the finding refers to.
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityGate {
    pub max_untracked_fraction: f64,
    /// Joints whose untracked fraction is gated; others only reported.
    pub joints: Vec<JointId>,
}

impl Default for QualityGate {
    fn default() -> Self {
        QualityGate {
            max_untracked_fraction: DEFAULT_UNTRACKED_GATE,
            joints: JointId::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub trial: TrialId,
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
    pub observed_fps: f64,
    pub untracked_fraction: BTreeMap<JointId, f64>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Check a parsed trial against its manifest and the quality gate. Never fails;
/// every finding lands in the report.
pub fn validate_trial(trial: &Trial, manifest: &SessionManifest, gate: &QualityGate) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let frames = trial.frames();

    if trial.id != manifest.trial_id() {
        errors.push(Finding {
            location: "manifest".into(),
            message: format!(
                "trial identity {} differs from manifest {}",
                trial.id,
                manifest.trial_id()
            ),
        });
    }

    for (i, w) in frames.windows(2).enumerate() {
        if w[1].timestamp_ms <= w[0].timestamp_ms {
            errors.push(Finding {
                location: format!("frame {}", w[1].frame_index),
                message: format!("non-increasing timestamp at index {}", i + 1),
            });
        }
    }

    let first = frames.first().map(|f| f.timestamp_ms).unwrap_or(0);
    let last = frames.last().map(|f| f.timestamp_ms).unwrap_or(0);
    let elapsed_s = last.saturating_sub(first) as f64 / 1000.0;
    let observed_fps = if elapsed_s > 0.0 {
        (frames.len() - 1) as f64 / elapsed_s
    } else {
        f64::INFINITY
    };
    if !observed_fps.is_finite() {
        errors.push(Finding {
            location: "timestamps".into(),
            message: "zero elapsed time".into(),
        });
    } else if (observed_fps - manifest.fps_nominal).abs() > FPS_WARN_FRACTION * manifest.fps_nominal {
        warnings.push(Finding {
            location: "timestamps".into(),
            message: format!(
                "observed {observed_fps:.2} fps deviates more than {:.0}% from nominal {}",
                FPS_WARN_FRACTION * 100.0,
                manifest.fps_nominal
            ),
        });
    }

    let mut untracked_fraction = BTreeMap::new();
    for joint in JointId::ALL {
        let missing = frames.iter().filter(|f| !f.joint(joint).is_tracked()).count();
        untracked_fraction.insert(joint, missing as f64 / frames.len() as f64);
    }
    for &joint in &gate.joints {
        let fraction = untracked_fraction[&joint];
        if fraction > gate.max_untracked_fraction {
            errors.push(Finding {
                location: joint.to_string(),
                message: format!(
                    "{joint} untracked {:.0}% > {:.0}%",
                    fraction * 100.0,
                    gate.max_untracked_fraction * 100.0
                ),
            });
        } else if fraction > 0.0 {
            warnings.push(Finding {
                location: joint.to_string(),
                message: format!("{joint} untracked {:.1}%", fraction * 100.0),
            });
        }
    }

    ValidationReport {
        trial: trial.id.clone(),
        errors,
        warnings,
        observed_fps,
        untracked_fraction,
    }
}
