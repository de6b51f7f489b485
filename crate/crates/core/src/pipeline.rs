//! Session-level analysis: load, validate, profile and render, with output
//! text produced in canonical order so parallel runs write identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::domain::{CameraView, Condition, Trial, TrialId};
use crate::error::{Error, Result};
use crate::glyph::{compare_conditions, glyph_layout, render_svg, DeltaTable};
use crate::ingest::{discover_manifests, load_trial, validate_trial, SessionManifest, ValidationReport};
use crate::preprocess::segment_walks;
use crate::profile::{
    condition_profile, condition_profile_csv, parse_condition_profile_csv, trial_profile, trial_profile_csv,
    ConditionProfile, TrialProfile,
};

#[derive(Debug, Clone)]
pub struct LoadedTrial {
    pub manifest_path: PathBuf,
    pub manifest: SessionManifest,
    pub trial: Trial,
}

fn map_maybe_par<I, O, F>(items: &[I], parallel: bool, f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

/// Parse every manifest in `dir`, keeping per-file failures.
pub fn load_session_lenient(dir: &Path, parallel: bool) -> Result<Vec<(PathBuf, Result<LoadedTrial>)>> {
    let paths = discover_manifests(dir)?;
    Ok(map_maybe_par(&paths, parallel, |path| {
        let loaded = load_trial(path).map(|(manifest, trial)| LoadedTrial {
            manifest_path: path.clone(),
            manifest,
            trial,
        });
        (path.clone(), loaded)
    }))
}

/// Parse every manifest in `dir`; the first failure in path order is returned.
pub fn load_session(dir: &Path, parallel: bool) -> Result<Vec<LoadedTrial>> {
    let mut trials = load_session_lenient(dir, parallel)?
        .into_iter()
        .map(|(_, r)| r)
        .collect::<Result<Vec<_>>>()?;
    if trials.is_empty() {
        return Err(Error::invalid(format!(
            "no *.manifest.json files in {}",
            dir.display()
        )));
    }
    trials.sort_by(|a, b| a.trial.id.cmp(&b.trial.id));
    Ok(trials)
}

pub fn validate(loaded: &LoadedTrial, cfg: &RunConfig) -> ValidationReport {
    validate_trial(&loaded.trial, &loaded.manifest, &cfg.quality_gate())
}

/// Segment a trial and compute the entropy of every configured joint.
pub fn analyze_trial(trial: &Trial, cfg: &RunConfig) -> Result<TrialProfile> {
    let segmentation =
        segment_walks(trial, &cfg.segment).map_err(|e| Error::Domain(format!("{}: {e}", trial.id)))?;
    Ok(trial_profile(
        trial,
        &segmentation,
        &cfg.joint_list(),
        &cfg.profile_settings(),
    ))
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub report: ValidationReport,
    /// `Err` when the trial fails the gate or cannot be segmented.
    pub profile: Result<TrialProfile, String>,
}

/// Validate and analyse trials; outcomes follow the input order.
pub fn analyze_trials(trials: &[LoadedTrial], cfg: &RunConfig, parallel: bool) -> Vec<TrialOutcome> {
    map_maybe_par(trials, parallel, |loaded| {
        let report = validate(loaded, cfg);
        let profile = if report.accepted() {
            analyze_trial(&loaded.trial, cfg).map_err(|e| e.to_string())
        } else {
            let reasons: Vec<String> = report.errors.iter().map(|f| f.to_string()).collect();
            Err(format!("{}: rejected ({})", loaded.trial.id, reasons.join("; ")))
        };
        TrialOutcome { report, profile }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProfileFilter {
    pub subject_id: Option<String>,
    pub condition: Option<Condition>,
    pub camera: Option<CameraView>,
}

impl ProfileFilter {
    pub fn matches(&self, id: &TrialId) -> bool {
        self.subject_id.as_ref().is_none_or(|s| *s == id.subject_id)
            && self.condition.is_none_or(|c| c == id.condition)
            && self.camera.is_none_or(|c| c == id.camera)
    }
}

/// Aggregate trial profiles per subject × condition × camera, in that order.
/// Cameras are never merged.
pub fn condition_profiles(trials: &[TrialProfile]) -> Result<Vec<ConditionProfile>> {
    let mut groups: BTreeMap<(String, Condition, CameraView), Vec<TrialProfile>> = BTreeMap::new();
    for t in trials {
        let key = (t.trial.subject_id.clone(), t.trial.condition, t.trial.camera);
        groups.entry(key).or_default().push(t.clone());
    }
    groups.values().map(|g| condition_profile(g)).collect()
}

pub fn trial_file_name(id: &TrialId) -> String {
    format!(
        "trial_{}_{}_{}_t{}.csv",
        id.subject_id, id.condition, id.camera, id.trial_index
    )
}

pub fn profile_file_name(p: &ConditionProfile) -> String {
    format!("profile_{}_{}_{}.csv", p.subject_id, p.condition, p.camera)
}

pub fn delta_file_name(table_a: &ConditionProfile, table_b: &ConditionProfile) -> String {
    format!(
        "delta_{}_{}_{}_{}.csv",
        table_a.subject_id, table_a.condition, table_b.condition, table_a.camera
    )
}

pub fn glyph_file_name(p: &ConditionProfile) -> String {
    format!("glyph_{}_{}.svg", p.subject_id, p.camera)
}

pub fn trial_csv(profile: &TrialProfile, cfg: &RunConfig) -> String {
    trial_profile_csv(profile, &cfg.metadata())
}

pub fn condition_csv(profile: &ConditionProfile, cfg: &RunConfig) -> String {
    condition_profile_csv(profile, &cfg.metadata())
}

/// A named output file and its full contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Default)]
pub struct SessionAnalysis {
    pub trial_files: Vec<OutputFile>,
    pub profile_files: Vec<OutputFile>,
    pub profiles: Vec<ConditionProfile>,
    /// One line per trial left out of the profiles.
    pub skipped: Vec<String>,
}

/// Full analysis of a session directory: trial CSVs for every analysable
/// trial and condition profiles for those matching `filter`.
pub fn analyze_session(
    dir: &Path,
    cfg: &RunConfig,
    filter: &ProfileFilter,
    parallel: bool,
) -> Result<SessionAnalysis> {
    cfg.validate()?;
    let trials = load_session(dir, parallel)?;
    let selected: Vec<LoadedTrial> = trials
        .into_iter()
        .filter(|t| filter.matches(&t.trial.id))
        .collect();
    if selected.is_empty() {
        return Err(Error::domain("no trials match the filter"));
    }
    let outcomes = analyze_trials(&selected, cfg, parallel);
    let mut analysis = SessionAnalysis::default();
    let mut profiles = Vec::new();
    for outcome in outcomes {
        match outcome.profile {
            Ok(p) => {
                analysis.trial_files.push(OutputFile {
                    name: trial_file_name(&p.trial),
                    contents: trial_csv(&p, cfg),
                });
                profiles.push(p);
            }
            Err(msg) => analysis.skipped.push(msg),
        }
    }
    if profiles.is_empty() {
        return Err(Error::domain("no accepted trials match the filter"));
    }
    analysis.profiles = condition_profiles(&profiles)?;
    analysis.profile_files = analysis
        .profiles
        .iter()
        .map(|p| OutputFile {
            name: profile_file_name(p),
            contents: condition_csv(p, cfg),
        })
        .collect();
    Ok(analysis)
}

pub fn read_condition_profile(path: &Path) -> Result<ConditionProfile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_condition_profile_csv(&text).map_err(|e| e.in_file(path))
}

pub fn compare(a: &ConditionProfile, b: &ConditionProfile, cfg: &RunConfig) -> Result<DeltaTable> {
    compare_conditions(a, b, &cfg.joint_list(), cfg.k_sd)
}

pub fn delta_csv(table: &DeltaTable, a: &ConditionProfile, cfg: &RunConfig) -> String {
    let mut meta = cfg.metadata();
    meta.push(("subject_id".into(), a.subject_id.clone()));
    meta.push(("camera".into(), a.camera.to_string()));
    table.to_csv(&meta)
}

/// Star-glyph SVG overlaying `profiles`, with the configuration embedded.
pub fn glyph_svg(profiles: &[ConditionProfile], cfg: &RunConfig) -> Result<String> {
    let figure = glyph_layout(profiles, &cfg.joint_list(), cfg.scale_max)?;
    let comment = format!("{}={}", crate::config::RUN_CONFIG_KEY, cfg.to_json());
    Ok(render_svg(&figure, Some(&comment)))
}

/// Write `files` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .iter()
        .map(|f| {
            let path = dir.join(&f.name);
            fs::write(&path, &f.contents).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
