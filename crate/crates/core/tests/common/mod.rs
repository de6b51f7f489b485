#![allow(dead_code)]

use std::collections::BTreeMap;

use gait_entropy::profile::{ConditionEntry, ConditionProfile};
use gait_entropy::synth::{generate_trial, ImpairmentSpec, SubjectModel, SyntheticTrial, TrialSetup};
use gait_entropy::{Axis, CameraView, Condition, EntropyConfig, Frame, JointId, Trial};

pub fn setup(subject_id: &str, trial_index: u32, seed: u64, duration_s: f64) -> TrialSetup {
    TrialSetup {
        subject_id: subject_id.into(),
        camera: CameraView::Sagittal,
        trial_index,
        trial_seed: seed,
        duration_s,
        fps: 30.0,
    }
}

pub fn synthetic(seed: u64, condition: Condition, duration_s: f64) -> SyntheticTrial {
    let subject = SubjectModel::draw(seed ^ 0x5eed);
    let impairment = ImpairmentSpec::for_condition(condition);
    generate_trial(&subject, Some(&impairment), &setup("S1", 1, seed, duration_s)).unwrap()
}

/// Replace every joint's X with `x(frame position)`.
pub fn with_progression(trial: &Trial, x: impl Fn(usize) -> f64) -> Trial {
    let frames = trial
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let joints = JointId::ALL.map(|j| {
                let mut p = *f.joint(j);
                p.x = x(i);
                p
            });
            Frame::new(f.frame_index, f.timestamp_ms, joints).unwrap()
        })
        .collect();
    Trial::new(trial.id.clone(), trial.fps_nominal, frames).unwrap()
}

pub fn condition_profile(condition: Condition, rows: &[(JointId, f64, f64)]) -> ConditionProfile {
    ConditionProfile {
        subject_id: "S1".into(),
        condition,
        camera: CameraView::Sagittal,
        axis: Axis::Y,
        config: EntropyConfig::default(),
        entries: rows
            .iter()
            .map(|&(j, mean, sd)| {
                (
                    j,
                    ConditionEntry {
                        mean,
                        sd,
                        n_trials: 3,
                    },
                )
            })
            .collect(),
        excluded: BTreeMap::new(),
    }
}

/// Main-joint profiles for the three conditions used by the golden figure.
pub fn golden_profiles() -> Vec<ConditionProfile> {
    use JointId::*;
    let joints = [Head, Neck, SpineShoulder, SpineMid, SpineBase];
    let table = [
        (Condition::Nw, [0.42, 0.39, 0.35, 0.31, 0.28]),
        (Condition::Kb, [0.55, 0.47, 0.44, 0.40, 0.52]),
        (Condition::Ab, [0.48, 0.51, 0.38, 0.45, 0.36]),
    ];
    table
        .iter()
        .map(|(c, means)| {
            let rows: Vec<_> = joints.iter().zip(means).map(|(&j, &m)| (j, m, 0.03)).collect();
            condition_profile(*c, &rows)
        })
        .collect()
}
