//! Seeded synthetic out-and-back walking trials.
//!
//! Each joint's vertical position is a sinusoid at a step-locked frequency
//! plus Gaussian noise; `spine_base` X follows a smoothstep walk along a
//! 10 ft path, holds for a one second turn, and walks back. Braces scale the
//! amplitude, add noise and shift the phase of right-side joints.
//!
//! All randomness comes from ChaCha8 streams derived from explicit seeds;
//! normal deviates use the ziggurat sampler from `rand_distr`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CameraView, Condition, Frame, JointId, JointPosition, TrackState, Trial, TrialId};
use crate::error::{Error, Result};
use crate::ingest::{frames_to_csv, SessionManifest, DEFAULT_PATH_LENGTH_FT, MANIFEST_SUFFIX};

pub const FEET_TO_M: f64 = 0.3048;
pub const TURN_PLATEAU_S: f64 = 1.0;
pub const DEFAULT_DURATION_S: f64 = 10.0;
/// Coordinates are rounded to whole micrometres.
const COORD_QUANTUM: f64 = 1e6;

/// Derive an independent 64-bit seed for `(a, b, c)` under `base`.
pub fn derive_seed(base: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream((a << 40) ^ (b << 20) ^ c);
    rng.next_u64()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn quantize(v: f64) -> f64 {
    (v * COORD_QUANTUM).round() / COORD_QUANTUM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointMotion {
    pub baseline_m: f64,
    pub amplitude_m: f64,
    /// Oscillation frequency as a multiple of the step frequency.
    pub frequency_ratio: f64,
    pub phase_rad: f64,
    pub noise_sigma_m: f64,
    /// Mediolateral offset from the body midline.
    pub lateral_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectModel {
    pub seed: u64,
    pub step_frequency_hz: f64,
    pub joints: BTreeMap<JointId, JointMotion>,
    /// Relative trial-to-trial spread of walking pace.
    pub pace_variability: f64,
    /// Log-scale trial-to-trial spread of tracking noise, which depends on
    /// lighting and clothing on the day of recording.
    pub noise_variability: f64,
}

impl SubjectModel {
    /// Adult template: trunk bobbing at step frequency, legs at stride frequency.
    pub fn template() -> Self {
        use JointId::*;
        let trunk = |baseline_m, amplitude_m, noise_sigma_m, lateral_m| JointMotion {
            baseline_m,
            amplitude_m,
            frequency_ratio: 1.0,
            phase_rad: 0.0,
            noise_sigma_m,
            lateral_m,
        };
        let leg = |baseline_m, amplitude_m, noise_sigma_m, lateral_m: f64| JointMotion {
            baseline_m,
            amplitude_m,
            frequency_ratio: 0.5,
            phase_rad: if lateral_m < 0.0 {
                0.0
            } else {
                std::f64::consts::PI
            },
            noise_sigma_m,
            lateral_m,
        };
        let joints = [
            (Head, trunk(1.62, 0.022, 0.0030, 0.0)),
            (Neck, trunk(1.50, 0.022, 0.0030, 0.0)),
            (ShoulderLeft, trunk(1.42, 0.020, 0.0035, -0.18)),
            (ShoulderRight, trunk(1.42, 0.020, 0.0035, 0.18)),
            (SpineShoulder, trunk(1.43, 0.021, 0.0030, 0.0)),
            (SpineMid, trunk(1.22, 0.021, 0.0030, 0.0)),
            (SpineBase, trunk(1.00, 0.022, 0.0030, 0.0)),
            (HipLeft, leg(0.94, 0.025, 0.0035, -0.09)),
            (HipRight, leg(0.94, 0.025, 0.0035, 0.09)),
            (KneeLeft, leg(0.52, 0.040, 0.0040, -0.10)),
            (KneeRight, leg(0.52, 0.040, 0.0040, 0.10)),
            (AnkleLeft, leg(0.10, 0.060, 0.0045, -0.10)),
            (AnkleRight, leg(0.10, 0.060, 0.0045, 0.10)),
            (FootLeft, leg(0.05, 0.070, 0.0050, -0.11)),
            (FootRight, leg(0.05, 0.070, 0.0050, 0.11)),
        ]
        .into_iter()
        .collect();
        SubjectModel {
            seed: 0,
            step_frequency_hz: 1.8,
            joints,
            pace_variability: 0.05,
            noise_variability: 0.10,
        }
    }

    /// A subject within ±10% of the template. Body height scales all
    /// baselines together so the anatomical ordering is preserved.
    pub fn draw(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut within = |spread: f64| 1.0 + rng.random_range(-spread..=spread);
        let mut model = SubjectModel::template();
        model.seed = seed;
        let height = within(0.10);
        model.step_frequency_hz *= within(0.10);
        for motion in model.joints.values_mut() {
            motion.baseline_m *= height;
            motion.lateral_m *= height;
            motion.amplitude_m *= within(0.10);
            motion.noise_sigma_m *= within(0.10);
            motion.phase_rad += within(0.10) - 1.0;
        }
        model
    }

    pub fn motion(&self, joint: JointId) -> &JointMotion {
        &self.joints[&joint]
    }

    pub fn validate(&self) -> Result<()> {
        use JointId::*;
        if self.joints.len() != JointId::COUNT {
            return Err(Error::invalid("subject model must define all 15 joints"));
        }
        if !(self.step_frequency_hz > 0.5 && self.step_frequency_hz < 3.0) {
            return Err(Error::invalid(format!(
                "step frequency {} Hz outside (0.5, 3.0)",
                self.step_frequency_hz
            )));
        }
        if !(0.0..0.5).contains(&self.pace_variability) || !(0.0..1.0).contains(&self.noise_variability) {
            return Err(Error::invalid(
                "pace variability must be in [0, 0.5), noise variability in [0, 1)",
            ));
        }
        for (joint, m) in &self.joints {
            if !(m.amplitude_m >= 0.0 && m.noise_sigma_m >= 0.0 && m.frequency_ratio > 0.0) {
                return Err(Error::invalid(format!(
                    "{joint}: amplitude, noise and frequency must be non-negative"
                )));
            }
        }
        let above = |upper: JointId, lower: JointId| -> Result<()> {
            if self.motion(upper).baseline_m > self.motion(lower).baseline_m {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "baseline of {upper} must lie above {lower}"
                )))
            }
        };
        above(Head, Neck)?;
        above(Neck, SpineShoulder)?;
        above(SpineShoulder, SpineMid)?;
        above(SpineMid, SpineBase)?;
        for (shoulder, hip, knee, ankle, foot) in [
            (ShoulderLeft, HipLeft, KneeLeft, AnkleLeft, FootLeft),
            (ShoulderRight, HipRight, KneeRight, AnkleRight, FootRight),
        ] {
            above(Neck, shoulder)?;
            above(shoulder, SpineBase)?;
            above(SpineBase, hip)?;
            above(hip, knee)?;
            above(knee, ankle)?;
            above(ankle, foot)?;
        }
        Ok(())
    }
}

/// How a brace alters the joints it touches. A joint's weight scales each
/// effect: weight 1 applies it fully, smaller weights model spillover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentSpec {
    pub condition: Condition,
    pub affected: BTreeMap<JointId, f64>,
    pub amplitude_scale: f64,
    pub extra_noise_m: f64,
    pub phase_shift_rad: f64,
}

pub const DEFAULT_SPILLOVER: f64 = 0.6;

impl ImpairmentSpec {
    /// Default effect for a condition; `NW` has none.
    pub fn for_condition(condition: Condition) -> Self {
        Self::with_spillover(condition, DEFAULT_SPILLOVER)
    }

    pub fn with_spillover(condition: Condition, spillover: f64) -> Self {
        use JointId::*;
        let affected: BTreeMap<JointId, f64> = match condition {
            Condition::Nw => BTreeMap::new(),
            Condition::Kb => [(KneeRight, 1.0), (HipRight, spillover), (AnkleRight, spillover)].into(),
            Condition::Ab => [(AnkleRight, 1.0), (FootRight, spillover), (KneeRight, spillover)].into(),
        };
        let active = condition != Condition::Nw;
        ImpairmentSpec {
            condition,
            affected,
            amplitude_scale: if active { 0.5 } else { 1.0 },
            extra_noise_m: if active { 0.006 } else { 0.0 },
            phase_shift_rad: if active { 0.3 } else { 0.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_scale >= 0.0 && self.extra_noise_m >= 0.0) {
            return Err(Error::invalid("amplitude scale and extra noise must be ≥ 0"));
        }
        if self.affected.values().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::invalid("impairment weights must lie in [0, 1]"));
        }
        if self.condition == Condition::Nw && !self.is_identity() {
            return Err(Error::invalid("NW must not alter any joint"));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.affected.is_empty()
            || (self.amplitude_scale == 1.0 && self.extra_noise_m == 0.0 && self.phase_shift_rad == 0.0)
    }

    /// (amplitude factor, extra noise, phase shift) for `joint`.
    fn effect(&self, joint: JointId) -> (f64, f64, f64) {
        match self.affected.get(&joint) {
            Some(&w) => (
                1.0 - w * (1.0 - self.amplitude_scale),
                w * self.extra_noise_m,
                w * self.phase_shift_rad,
            ),
            None => (1.0, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    pub subject_id: String,
    pub camera: CameraView,
    pub trial_index: u32,
    pub trial_seed: u64,
    pub duration_s: f64,
    pub fps: f64,
}

/// Generator metadata written next to each synthetic trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub turnaround_frame: u64,
    pub trial_seed: u64,
    /// Effective vertical amplitude per joint after impairment.
    pub amplitudes_m: BTreeMap<JointId, f64>,
    /// Effective noise sigma per joint after impairment.
    pub noise_sigma_m: BTreeMap<JointId, f64>,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("truth serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrial {
    pub trial: Trial,
    pub truth: GroundTruth,
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Progression along the path at time `t` for a walk of `duration` seconds.
fn path_position(t: f64, duration: f64, path_m: f64) -> f64 {
    let walk = (duration - TURN_PLATEAU_S) / 2.0;
    if t <= walk {
        path_m * smoothstep(t / walk)
    } else if t <= walk + TURN_PLATEAU_S {
        path_m
    } else {
        path_m * smoothstep(1.0 - (t - walk - TURN_PLATEAU_S) / walk)
    }
}

/// One synthetic trial. `None` generates unimpaired walking labelled NW.
pub fn generate_trial(
    subject: &SubjectModel,
    impairment: Option<&ImpairmentSpec>,
    setup: &TrialSetup,
) -> Result<SyntheticTrial> {
    subject.validate()?;
    if let Some(imp) = impairment {
        imp.validate()?;
    }
    if !(setup.duration_s >= 6.0 && setup.duration_s.is_finite()) {
        return Err(Error::invalid(format!(
            "duration must be ≥ 6 s, got {}",
            setup.duration_s
        )));
    }
    if !(setup.fps > 0.0 && setup.fps.is_finite()) {
        return Err(Error::invalid(format!("fps must be > 0, got {}", setup.fps)));
    }

    let condition = impairment.map_or(Condition::Nw, |i| i.condition);
    let effect = |joint| impairment.map_or((1.0, 0.0, 0.0), |i| i.effect(joint));
    let mut rng = ChaCha8Rng::seed_from_u64(setup.trial_seed);

    // Trial-level pace and noise level; drawn before any per-frame sample.
    let pace = 1.0 + subject.pace_variability * normal(&mut rng);
    let noise_level = (subject.noise_variability * normal(&mut rng)).exp();
    let step_hz = subject.step_frequency_hz * pace;

    let path_m = DEFAULT_PATH_LENGTH_FT * FEET_TO_M;
    let n_frames = (setup.duration_s * setup.fps).round() as usize;
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let t = i as f64 / setup.fps;
        let progression = path_position(t, setup.duration_s, path_m);
        let joints = JointId::ALL.map(|joint| {
            let m = subject.motion(joint);
            let (amp_factor, extra_noise, phase_shift) = effect(joint);
            let z_y = normal(&mut rng);
            let z_extra = normal(&mut rng);
            let z_x = normal(&mut rng);
            let z_z = normal(&mut rng);
            let omega = std::f64::consts::TAU * step_hz * m.frequency_ratio;
            let y = m.baseline_m
                + m.amplitude_m * amp_factor * (omega * t + m.phase_rad + phase_shift).sin()
                + m.noise_sigma_m * noise_level * z_y
                + extra_noise * z_extra;
            let x = progression + 0.001 * z_x;
            let sway = 0.01 * (std::f64::consts::PI * step_hz * t).sin();
            let z = m.lateral_m + sway + 0.002 * z_z;
            JointPosition::new(quantize(x), quantize(y), quantize(z), TrackState::Tracked)
        });
        let timestamp_ms = (i as f64 * 1000.0 / setup.fps).floor() as u64;
        frames.push(Frame::new(i as u64, timestamp_ms, joints)?);
    }

    let id = TrialId {
        subject_id: setup.subject_id.clone(),
        condition,
        camera: setup.camera,
        trial_index: setup.trial_index,
    };
    let trial = Trial::new(id, setup.fps, frames)?;
    let truth = GroundTruth {
        turnaround_frame: (setup.duration_s * setup.fps / 2.0).round() as u64,
        trial_seed: setup.trial_seed,
        amplitudes_m: JointId::ALL
            .iter()
            .map(|&j| (j, subject.motion(j).amplitude_m * effect(j).0))
            .collect(),
        noise_sigma_m: JointId::ALL
            .iter()
            .map(|&j| {
                let base = subject.motion(j).noise_sigma_m * noise_level;
                (j, (base * base + effect(j).1 * effect(j).1).sqrt())
            })
            .collect(),
    };
    Ok(SyntheticTrial { trial, truth })
}

/// Inject seeded `not_tracked` runs of 1..=`max_run` frames into every joint
/// until `round(rate * frames)` samples per joint are untracked. Runs never
/// touch the first or last frame and never abut each other.
pub fn dropout_model(trial: &Trial, rate: f64, max_run: usize, seed: u64) -> Result<Trial> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if max_run < 1 {
        return Err(Error::invalid("max_run must be ≥ 1"));
    }
    let mut out = trial.clone();
    let n = out.len();
    if rate == 0.0 || n < 3 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for joint in JointId::ALL {
        let target = (rate * n as f64).round() as usize;
        let mut dropped = vec![false; n];
        let mut count = 0;
        let mut attempts = 0;
        while count < target && attempts < 100 * n {
            attempts += 1;
            let len = rng.random_range(1..=max_run).min(target - count);
            if len + 2 > n {
                break;
            }
            let start = rng.random_range(1..=n - 1 - len);
            if dropped[start - 1..=start + len].iter().any(|&d| d) {
                continue;
            }
            dropped[start..start + len].iter_mut().for_each(|d| *d = true);
            count += len;
        }
        for (frame, _) in out.frames_mut().iter_mut().zip(&dropped).filter(|(_, &d)| d) {
            *frame.joint_mut(joint) = JointPosition::new(0.0, 0.0, 0.0, TrackState::NotTracked);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub subjects: usize,
    pub trials_per_condition: usize,
    pub base_seed: u64,
    pub conditions: Vec<Condition>,
    pub camera: CameraView,
    pub duration_s: f64,
    pub fps: f64,
}

impl Default for SessionSpec {
    fn default() -> Self {
        SessionSpec {
            subjects: 3,
            trials_per_condition: 3,
            base_seed: 42,
            conditions: Condition::ALL.to_vec(),
            camera: CameraView::Sagittal,
            duration_s: DEFAULT_DURATION_S,
            fps: crate::domain::DEFAULT_FPS,
        }
    }
}

/// Stem shared by a trial's manifest, frames and truth files.
pub fn trial_stem(id: &TrialId) -> String {
    format!(
        "{}_{}_{}_t{}",
        id.subject_id, id.condition, id.camera, id.trial_index
    )
}

/// All trials of a session, in (subject, condition, trial) order.
pub fn session_trials(spec: &SessionSpec) -> Result<Vec<SyntheticTrial>> {
    if spec.subjects == 0 || spec.trials_per_condition == 0 {
        return Err(Error::invalid("session needs at least one subject and one trial"));
    }
    let mut jobs = Vec::new();
    for s in 0..spec.subjects {
        let subject = SubjectModel::draw(derive_seed(spec.base_seed, s as u64, 0, 0));
        for &condition in &spec.conditions {
            for t in 0..spec.trials_per_condition {
                let setup = TrialSetup {
                    subject_id: format!("S{}", s + 1),
                    camera: spec.camera,
                    trial_index: t as u32 + 1,
                    trial_seed: derive_seed(spec.base_seed, s as u64, condition as u64 + 1, t as u64),
                    duration_s: spec.duration_s,
                    fps: spec.fps,
                };
                jobs.push((subject.clone(), condition, setup));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(subject, condition, setup)| {
            generate_trial(&subject, Some(&ImpairmentSpec::for_condition(condition)), &setup)
        })
        .collect()
}

/// Write manifests, frames CSVs and truth sidecars into `dir`.
pub fn write_session(trials: &[SyntheticTrial], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifests = Vec::with_capacity(trials.len());
    for st in trials {
        let id = &st.trial.id;
        let stem = trial_stem(id);
        let frames_file = format!("{stem}.csv");
        let manifest = SessionManifest {
            subject_id: id.subject_id.clone(),
            condition: id.condition,
            camera: id.camera,
            trial_index: id.trial_index,
            fps_nominal: st.trial.fps_nominal,
            path_length_ft: DEFAULT_PATH_LENGTH_FT,
            frames_file: frames_file.clone(),
        };
        let write = |name: &str, text: &str| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            Ok::<_, Error>(path)
        };
        write(&frames_file, &frames_to_csv(st.trial.frames()))?;
        write(&format!("{stem}.truth.json"), &st.truth.to_json())?;
        manifests.push(write(&format!("{stem}{MANIFEST_SUFFIX}"), &manifest.to_json())?);
    }
    Ok(manifests)
}

/// Generate and write a whole session.
pub fn generate_session(spec: &SessionSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    write_session(&session_trials(spec)?, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{repair_gaps, RawSeries};

    fn setup(seed: u64) -> TrialSetup {
        TrialSetup {
            subject_id: "S1".into(),
            camera: CameraView::Sagittal,
            trial_index: 1,
            trial_seed: seed,
            duration_s: 10.0,
            fps: 30.0,
        }
    }

    #[test]
    fn template_and_draws_are_valid() {
        SubjectModel::template().validate().unwrap();
        for seed in 0..50 {
            SubjectModel::draw(seed).validate().unwrap();
        }
        let mut bad = SubjectModel::template();
        bad.step_frequency_hz = 3.5;
        assert!(bad.validate().is_err());
        let mut bad = SubjectModel::template();
        bad.joints.get_mut(&JointId::Neck).unwrap().baseline_m = 2.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn impairments_touch_right_side() {
        use JointId::*;
        let kb = ImpairmentSpec::for_condition(Condition::Kb);
        assert_eq!(
            kb.affected.keys().copied().collect::<Vec<_>>(),
            vec![HipRight, KneeRight, AnkleRight]
        );
        let ab = ImpairmentSpec::for_condition(Condition::Ab);
        assert_eq!(
            ab.affected.keys().copied().collect::<Vec<_>>(),
            vec![KneeRight, AnkleRight, FootRight]
        );
        assert!(ImpairmentSpec::for_condition(Condition::Nw).affected.is_empty());
    }

    #[test]
    fn frame_count_and_timestamps() {
        let st = generate_trial(&SubjectModel::template(), None, &setup(1)).unwrap();
        let frames = st.trial.frames();
        assert_eq!(frames.len(), 300);
        assert_eq!(frames[0].timestamp_ms, 0);
        assert_eq!(frames[1].timestamp_ms, 33);
        assert_eq!(frames[299].timestamp_ms, 9966);
        assert_eq!(st.truth.turnaround_frame, 150);
        let x_turn = frames[150].joint(JointId::SpineBase).x;
        assert!((x_turn - 3.048).abs() < 0.01);
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let subject = SubjectModel::draw(7);
        let kb = ImpairmentSpec::for_condition(Condition::Kb);
        let a = generate_trial(&subject, Some(&kb), &setup(99)).unwrap();
        let b = generate_trial(&subject, Some(&kb), &setup(99)).unwrap();
        assert_eq!(frames_to_csv(a.trial.frames()), frames_to_csv(b.trial.frames()));
        let c = generate_trial(&subject, Some(&kb), &setup(100)).unwrap();
        assert_ne!(a.trial, c.trial);
    }

    #[test]
    fn normal_walking_is_identity() {
        let subject = SubjectModel::draw(3);
        let nw = ImpairmentSpec::for_condition(Condition::Nw);
        let with = generate_trial(&subject, Some(&nw), &setup(5)).unwrap();
        let without = generate_trial(&subject, None, &setup(5)).unwrap();
        assert_eq!(with, without);
    }

    fn peak_to_peak(trial: &Trial, joint: JointId) -> f64 {
        let ys = trial.frames().iter().map(|f| f.joint(joint).y);
        let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
            (lo.min(y), hi.max(y))
        });
        hi - lo
    }

    #[test]
    fn amplitude_scale_halves_knee_excursion() {
        let mut subject = SubjectModel::template();
        subject.pace_variability = 0.0;
        subject.noise_variability = 0.0;
        for m in subject.joints.values_mut() {
            m.noise_sigma_m = 0.0;
        }
        let kb = ImpairmentSpec {
            amplitude_scale: 0.5,
            extra_noise_m: 0.0,
            phase_shift_rad: 0.0,
            ..ImpairmentSpec::for_condition(Condition::Kb)
        };
        let nw = generate_trial(&subject, None, &setup(11)).unwrap();
        let braced = generate_trial(&subject, Some(&kb), &setup(11)).unwrap();
        let ratio =
            peak_to_peak(&braced.trial, JointId::KneeRight) / peak_to_peak(&nw.trial, JointId::KneeRight);
        assert!((ratio - 0.5).abs() < 0.01, "ratio {ratio}");
        assert_eq!(
            peak_to_peak(&braced.trial, JointId::KneeLeft),
            peak_to_peak(&nw.trial, JointId::KneeLeft)
        );
    }

    #[test]
    fn invalid_setup_rejected() {
        let mut s = setup(1);
        s.duration_s = 5.0;
        assert!(generate_trial(&SubjectModel::template(), None, &s).is_err());
        let mut s = setup(1);
        s.fps = 0.0;
        assert!(generate_trial(&SubjectModel::template(), None, &s).is_err());
    }

    #[test]
    fn dropout_rates() {
        let st = generate_trial(&SubjectModel::template(), None, &setup(2)).unwrap();
        assert_eq!(dropout_model(&st.trial, 0.0, 3, 1).unwrap(), st.trial);
        assert!(dropout_model(&st.trial, 1.0, 3, 1).is_err());
        assert!(dropout_model(&st.trial, 0.1, 0, 1).is_err());

        let dropped = dropout_model(&st.trial, 0.05, 3, 17).unwrap();
        let samples = dropped
            .frames()
            .iter()
            .map(|f| {
                let p = f.joint(JointId::KneeRight);
                p.is_tracked().then_some(p.y)
            })
            .collect();
        let series = repair_gaps(
            &RawSeries::new(JointId::KneeRight, crate::Axis::Y, 30.0, samples),
            5,
        )
        .unwrap();
        assert!((series.interpolated_fraction() - 0.05).abs() < 0.005);
        assert_eq!(series.len(), 300);
    }
}
