//! Gap repair, smoothing, out/back segmentation and series extraction.

use serde::{Deserialize, Serialize};

use crate::domain::{Axis, Direction, JointId, JointSeries, Trial, WalkSegment};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_MAX_GAP: usize = 5;
pub const DEFAULT_BUFFER_S: f64 = 0.5;
pub const DEFAULT_MIN_SEGMENT_S: f64 = 2.0;
pub const DEFAULT_PLATEAU_TOLERANCE_M: f64 = 0.01;
pub const DEFAULT_MIN_RETURN_FRACTION: f64 = 0.5;

/// A joint/axis sequence with missing samples (`None`) not yet repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries<T> {
    pub joint: JointId,
    pub axis: Axis,
    pub fps: f64,
    pub samples: Vec<Option<T>>,
    /// Samples already filled by an earlier repair.
    pub interpolated: Vec<bool>,
}

impl<T: Real> RawSeries<T> {
    pub fn new(joint: JointId, axis: Axis, fps: f64, samples: Vec<Option<T>>) -> Self {
        let n = samples.len();
        RawSeries {
            joint,
            axis,
            fps,
            samples,
            interpolated: vec![false; n],
        }
    }
}

impl<T: Real> From<&JointSeries<T>> for RawSeries<T> {
    fn from(series: &JointSeries<T>) -> Self {
        RawSeries {
            joint: series.joint,
            axis: series.axis,
            fps: series.fps,
            samples: series.values().iter().map(|&v| Some(v)).collect(),
            interpolated: series.interpolated_mask().to_vec(),
        }
    }
}

/// Fill interior runs of at most `max_gap` missing samples by linear
/// interpolation and trim missing runs at either end.
pub fn repair_gaps<T: Real>(raw: &RawSeries<T>, max_gap: usize) -> Result<JointSeries<T>> {
    let label = format!("{}/{}", raw.joint, raw.axis);
    let first = raw
        .samples
        .iter()
        .position(Option::is_some)
        .ok_or_else(|| Error::domain(format!("{label}: series entirely missing")))?;
    let last = raw
        .samples
        .iter()
        .rposition(Option::is_some)
        .expect("has a sample");

    let mut values = Vec::with_capacity(last - first + 1);
    let mut mask = Vec::with_capacity(last - first + 1);
    let mut i = first;
    while i <= last {
        match raw.samples[i] {
            Some(v) => {
                values.push(v);
                mask.push(raw.interpolated.get(i).copied().unwrap_or(false));
                i += 1;
            }
            None => {
                let gap_start = i;
                while raw.samples[i].is_none() {
                    i += 1;
                }
                let gap = i - gap_start;
                if gap > max_gap {
                    return Err(Error::domain(format!(
                        "{label}: gap of {gap} frames at index {gap_start} exceeds max_gap {max_gap}"
                    )));
                }
                let left = raw.samples[gap_start - 1].expect("flanked");
                let right = raw.samples[i].expect("flanked");
                let span = T::of_usize(gap + 1);
                for k in 1..=gap {
                    let t = T::of_usize(k) / span;
                    values.push(left + (right - left) * t);
                    mask.push(true);
                }
            }
        }
    }
    JointSeries::with_mask(raw.joint, raw.axis, raw.fps, values, mask, first)
}

/// Centered moving average over an odd `window`; near the ends the window
/// shrinks symmetrically so it stays centered. Constants are reproduced exactly.
pub fn moving_average<T: Real>(values: &[T], window: usize) -> Result<Vec<T>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "smoothing window must be odd and ≥ 1, got {window}"
        )));
    }
    if window > values.len() {
        return Err(Error::invalid(format!(
            "smoothing window {window} exceeds series length {}",
            values.len()
        )));
    }
    let n = values.len();
    let half = window / 2;
    Ok((0..n)
        .map(|i| {
            let radius = half.min(i).min(n - 1 - i);
            let center = values[i];
            let deviation: T = values[i - radius..=i + radius].iter().map(|&v| v - center).sum();
            center + deviation / T::of_usize(2 * radius + 1)
        })
        .collect())
}

pub fn smooth<T: Real>(series: &JointSeries<T>, window: usize) -> Result<JointSeries<T>> {
    series.map_values(moving_average(series.values(), window)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Longest interior run of untracked frames repaired by interpolation.
    pub max_gap: usize,
    /// Time excluded on each side of the turnaround.
    pub buffer_s: f64,
    pub min_segment_s: f64,
    /// Displacements within this distance of the maximum count as the turn plateau.
    pub plateau_tolerance_m: f64,
    /// Share of the peak displacement that must be walked back after the turn.
    pub min_return_fraction: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            max_gap: DEFAULT_MAX_GAP,
            buffer_s: DEFAULT_BUFFER_S,
            min_segment_s: DEFAULT_MIN_SEGMENT_S,
            plateau_tolerance_m: DEFAULT_PLATEAU_TOLERANCE_M,
            min_return_fraction: DEFAULT_MIN_RETURN_FRACTION,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.buffer_s >= 0.0 && self.buffer_s.is_finite()) {
            return Err(Error::invalid("buffer seconds must be ≥ 0"));
        }
        if !(self.min_segment_s > 0.0 && self.min_segment_s.is_finite()) {
            return Err(Error::invalid("minimum segment seconds must be > 0"));
        }
        if !(self.plateau_tolerance_m >= 0.0 && self.plateau_tolerance_m.is_finite()) {
            return Err(Error::invalid("plateau tolerance must be ≥ 0"));
        }
        if !(0.0..=1.0).contains(&self.min_return_fraction) {
            return Err(Error::invalid("minimum return fraction must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationResult {
    pub turnaround_frame: u64,
    pub out: WalkSegment,
    pub back: WalkSegment,
    /// Frames excluded on each side of the turnaround.
    pub buffer_frames: usize,
}

impl SegmentationResult {
    pub fn segment(&self, direction: Direction) -> &WalkSegment {
        match direction {
            Direction::Out => &self.out,
            Direction::Back => &self.back,
        }
    }
}

/// Smoothing window for turnaround detection: half a second, forced odd.
fn detection_window(fps: f64, len: usize) -> usize {
    let mut w = (fps / 2.0).round().max(1.0) as usize;
    if w.is_multiple_of(2) {
        w += 1;
    }
    if w > len {
        w = if len % 2 == 1 { len } else { len - 1 };
    }
    w
}

/// Split a trial into its outbound and return passes at the walking
/// turnaround, detected as the extremum of smoothed `spine_base` X
/// displacement from the start.
pub fn segment_walks(trial: &Trial, config: &SegmentConfig) -> Result<SegmentationResult> {
    config.validate()?;
    let fps = trial.fps_nominal;
    let raw = raw_series::<f64>(trial, 0, trial.len() - 1, JointId::SpineBase, Axis::X);
    let series = repair_gaps(&raw, config.max_gap)?;
    let smoothed = moving_average(series.values(), detection_window(fps, series.len()))?;

    let origin = smoothed[0];
    let displacement: Vec<f64> = smoothed.iter().map(|&x| (x - origin).abs()).collect();
    let peak = displacement.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = peak - config.plateau_tolerance_m;
    let returned = peak - displacement[displacement.len() - 1];
    if !(peak > config.plateau_tolerance_m) || returned < config.min_return_fraction * peak {
        return Err(Error::domain(format!(
            "{}: no turnaround detected (walked {peak:.3} m, returned {returned:.3} m)",
            trial.id
        )));
    }

    // Longest run of near-peak samples; earliest wins a tie.
    let mut best: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for (i, &d) in displacement.iter().enumerate() {
        if d >= threshold {
            let start = *run_start.get_or_insert(i);
            let longer = best.is_none_or(|(s, e)| i - start > e - s);
            if longer {
                best = Some((start, i));
            }
        } else {
            run_start = None;
        }
    }
    let (plateau_start, plateau_end) = best.expect("peak is attained");
    let turn = series.source_offset + (plateau_start + plateau_end) / 2;

    let first = series.source_offset;
    let last = series.source_offset + series.len() - 1;
    let buffer = (config.buffer_s * fps).round() as usize;
    let min_len = (config.min_segment_s * fps).round() as usize;

    if turn < first + buffer.max(1) || turn + buffer.max(1) > last {
        return Err(Error::domain(format!(
            "{}: no turnaround detected (extremum at frame position {turn} within {buffer} frames of an end)",
            trial.id
        )));
    }
    // A zero buffer still drops the turn frame itself.
    let exclusion = buffer.max(1);
    let out_end = turn - exclusion;
    let back_start = turn + exclusion;
    let out_len = out_end - first + 1;
    let back_len = last - back_start + 1;
    if out_len < min_len || back_len < min_len {
        return Err(Error::domain(format!(
            "{}: walk segment too short (out {out_len}, back {back_len} frames; need ≥ {min_len})",
            trial.id
        )));
    }

    let frames = trial.frames();
    let idx = |pos: usize| frames[pos].frame_index;
    Ok(SegmentationResult {
        turnaround_frame: idx(turn),
        out: WalkSegment::new(Direction::Out, idx(first), idx(out_end))?,
        back: WalkSegment::new(Direction::Back, idx(back_start), idx(last))?,
        buffer_frames: buffer,
    })
}

fn raw_series<T: Real>(trial: &Trial, from: usize, to: usize, joint: JointId, axis: Axis) -> RawSeries<T> {
    let samples = trial.frames()[from..=to]
        .iter()
        .map(|f| {
            let p = f.joint(joint);
            p.is_tracked().then(|| T::of(p.coord(axis)))
        })
        .collect();
    RawSeries::new(joint, axis, trial.fps_nominal, samples)
}

/// The joint's coordinate on `axis` over `segment`, with short gaps repaired.
pub fn extract_series<T: Real>(
    trial: &Trial,
    segment: &WalkSegment,
    joint: JointId,
    axis: Axis,
    max_gap: usize,
) -> Result<JointSeries<T>> {
    let (from, to) = match (
        trial.position_of(segment.start_frame),
        trial.position_of(segment.end_frame),
    ) {
        (Some(a), Some(b)) if a < b => (a, b),
        _ => {
            return Err(Error::invalid(format!(
                "{}: {} segment [{}, {}] outside trial frames",
                trial.id, segment.direction, segment.start_frame, segment.end_frame
            )))
        }
    };
    let raw = raw_series(trial, from, to, joint, axis);
    repair_gaps(&raw, max_gap)
        .map_err(|e| Error::domain(format!("{} {} segment: {e}", trial.id, segment.direction)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CameraView, Condition, Frame, JointPosition, TrackState, TrialId};
    use proptest::prelude::*;

    fn raw(samples: Vec<Option<f64>>) -> RawSeries<f64> {
        RawSeries::new(JointId::Head, Axis::Y, 30.0, samples)
    }

    #[test]
    fn interpolates_interior_gap() {
        let s = repair_gaps(&raw(vec![Some(1.0), None, None, Some(4.0)]), 2).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.interpolated_fraction(), 0.5);
    }

    #[test]
    fn rejects_long_gap() {
        let mut samples = vec![Some(0.0)];
        samples.extend(std::iter::repeat_n(None, 6));
        samples.push(Some(1.0));
        let err = repair_gaps(&raw(samples), 5).unwrap_err().to_string();
        assert!(
            err.contains("gap of 6 frames at index 1 exceeds max_gap 5"),
            "{err}"
        );
    }

    #[test]
    fn trims_ends_and_rejects_empty() {
        let s = repair_gaps(&raw(vec![None, Some(2.0), Some(3.0), None]), 0).unwrap();
        assert_eq!(s.values(), &[2.0, 3.0]);
        assert_eq!(s.source_offset, 1);
        assert!(repair_gaps(&raw(vec![None, None]), 5).is_err());
        assert!(repair_gaps(&raw(vec![None, Some(1.0)]), 5).is_err());
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0], 1).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(
            moving_average(&[0.0, 0.0, 3.0, 0.0, 0.0], 3).unwrap(),
            vec![0.0, 1.0, 1.0, 1.0, 0.0]
        );
        for w in [1, 3, 5, 7] {
            assert_eq!(moving_average(&[0.1; 7], w).unwrap(), vec![0.1; 7]);
        }
        assert!(moving_average(&[1.0, 2.0, 3.0], 2).is_err());
        assert!(moving_average(&[1.0, 2.0, 3.0], 5).is_err());
    }

    #[test]
    fn smoothing_preserves_mean_when_window_is_small() {
        let xs: Vec<f64> = (0..2000).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect();
        let ys = moving_average(&xs, 5).unwrap();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((mx - my).abs() < 1e-3);
        // Periodic input with window spanning whole periods: interior mean is exact.
        let per: Vec<f64> = (0..1000).map(|i| [0.0, 1.0, 2.0, 3.0, 4.0][i % 5]).collect();
        let sm = moving_average(&per, 5).unwrap();
        assert!(sm[2..998].iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }

    pub(crate) fn trial_with_x(xs: &[f64]) -> Trial {
        let frames = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let joints = JointId::ALL.map(|j| {
                    let y = 0.1 * j.index() as f64 + (i as f64 * 0.3).sin() * 0.01;
                    JointPosition::new(x, y, 0.0, TrackState::Tracked)
                });
                Frame::new(i as u64, (i as u64 * 1000) / 30, joints).unwrap()
            })
            .collect();
        let id = TrialId {
            subject_id: "S1".into(),
            condition: Condition::Nw,
            camera: CameraView::Sagittal,
            trial_index: 1,
        };
        Trial::new(id, 30.0, frames).unwrap()
    }

    fn out_and_back(n_half: usize, plateau: usize) -> Vec<f64> {
        let mut xs: Vec<f64> = (0..n_half)
            .map(|i| 3.0 * i as f64 / (n_half - 1) as f64)
            .collect();
        xs.extend(std::iter::repeat_n(3.0, plateau));
        xs.extend((0..n_half).map(|i| 3.0 * (n_half - 1 - i) as f64 / (n_half - 1) as f64));
        xs
    }

    #[test]
    fn segments_ramp_out_and_back() {
        let mut xs: Vec<f64> = (0..150).map(|i| 3.0 * i as f64 / 149.0).collect();
        xs.extend((150..300).map(|i| 3.0 * (299 - i) as f64 / 149.0));
        let seg = segment_walks(&trial_with_x(&xs), &SegmentConfig::default()).unwrap();
        assert!((seg.turnaround_frame as i64 - 150).abs() <= 5, "{seg:?}");
        assert_eq!(seg.out.start_frame, 0);
        assert_eq!(seg.back.end_frame, 299);
        assert_eq!(seg.out.end_frame, seg.turnaround_frame - 15);
        assert_eq!(seg.back.start_frame, seg.turnaround_frame + 15);
        assert_eq!(seg.buffer_frames, 15);
    }

    #[test]
    fn monotone_walk_has_no_turnaround() {
        let xs: Vec<f64> = (0..300).map(|i| i as f64 / 100.0).collect();
        let err = segment_walks(&trial_with_x(&xs), &SegmentConfig::default()).unwrap_err();
        assert!(err.to_string().contains("no turnaround detected"), "{err}");
    }

    #[test]
    fn walking_out_then_standing_has_no_turnaround() {
        let xs: Vec<f64> = (0..300).map(|i| (i.min(150) as f64) / 50.0).collect();
        let err = segment_walks(&trial_with_x(&xs), &SegmentConfig::default()).unwrap_err();
        assert!(err.to_string().contains("no turnaround detected"), "{err}");
        let still = vec![1.0; 300];
        assert!(segment_walks(&trial_with_x(&still), &SegmentConfig::default()).is_err());
    }

    #[test]
    fn plateau_midpoint_is_the_turn() {
        // Plateau occupies positions 140..=169; smoothing with window 15 keeps
        // 147..=162 exactly at the peak, whose midpoint is 154.
        let xs = out_and_back(140, 30);
        let seg = segment_walks(
            &trial_with_x(&xs),
            &SegmentConfig {
                plateau_tolerance_m: 0.0,
                ..SegmentConfig::default()
            },
        )
        .unwrap();
        assert_eq!(seg.turnaround_frame, 154);
    }

    #[test]
    fn time_reversal_mirrors_turnaround() {
        let xs = out_and_back(140, 31);
        let trial = trial_with_x(&xs);
        let n = trial.len() as u64;
        let fwd = segment_walks(&trial, &SegmentConfig::default()).unwrap();
        let rev = segment_walks(&trial.time_reversed(), &SegmentConfig::default()).unwrap();
        assert_eq!(rev.turnaround_frame, n - 1 - fwd.turnaround_frame);
        assert_eq!(
            rev.out.end_frame - rev.out.start_frame,
            fwd.back.end_frame - fwd.back.start_frame
        );
    }

    #[test]
    fn short_segment_rejected() {
        let mut xs: Vec<f64> = (0..40).map(|i| i as f64 / 13.0).collect();
        xs.extend((0..200).map(|i| 3.0 * (199 - i) as f64 / 199.0));
        let err = segment_walks(&trial_with_x(&xs), &SegmentConfig::default()).unwrap_err();
        assert!(err.to_string().contains("too short"), "{err}");
    }

    #[test]
    fn extracts_projection_over_segment() {
        let trial = trial_with_x(&out_and_back(150, 1));
        let seg = segment_walks(&trial, &SegmentConfig::default()).unwrap();
        let head: JointSeries<f64> = extract_series(&trial, &seg.out, JointId::Head, Axis::Y, 5).unwrap();
        assert_eq!(head.len() as u64, seg.out.end_frame - seg.out.start_frame + 1);
        assert_eq!(head.values()[3], trial.frames()[3].joint(JointId::Head).y);
        let x: JointSeries<f32> = extract_series(&trial, &seg.out, JointId::Head, Axis::X, 5).unwrap();
        assert_eq!(x.axis, Axis::X);
        assert_eq!(x.values()[10], trial.frames()[10].joint(JointId::Head).x as f32);

        let bad = WalkSegment::new(Direction::Out, 0, 10_000).unwrap();
        assert!(extract_series::<f64>(&trial, &bad, JointId::Head, Axis::Y, 5).is_err());
    }

    #[test]
    fn extraction_names_joint_on_irreparable_gap() {
        let mut trial = trial_with_x(&out_and_back(150, 1));
        for f in &mut trial.frames_mut()[20..30] {
            f.joint_mut(JointId::KneeLeft).state = TrackState::NotTracked;
        }
        let seg = segment_walks(&trial, &SegmentConfig::default()).unwrap();
        let err = extract_series::<f64>(&trial, &seg.out, JointId::KneeLeft, Axis::Y, 5)
            .unwrap_err()
            .to_string();
        assert!(err.contains("knee_left") && err.contains("index 20"), "{err}");
    }

    proptest! {
        #[test]
        fn repair_is_idempotent(
            vals in prop::collection::vec(prop::option::weighted(0.8, -1.0f64..1.0), 3..80),
            max_gap in 0usize..6,
        ) {
            if let Ok(once) = repair_gaps(&raw(vals), max_gap) {
                let twice = repair_gaps(&RawSeries::from(&once), max_gap).unwrap();
                prop_assert_eq!(once.values(), twice.values());
                prop_assert_eq!(once.interpolated_fraction(), twice.interpolated_fraction());
            }
        }

        #[test]
        fn smoothing_keeps_constants(c in -10.0f64..10.0, n in 1usize..50, w in 0usize..10) {
            let w = 2 * w + 1;
            prop_assume!(w <= n);
            prop_assert_eq!(moving_average(&vec![c; n], w).unwrap(), vec![c; n]);
        }
    }
}
