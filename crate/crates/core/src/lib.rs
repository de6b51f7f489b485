//! Gait variability profiles from depth-camera skeleton recordings.
//!
//! Per-joint vertical position series are split into the outbound and return
//! passes of an out-and-back walk, scored with sample entropy, and aggregated
//! into per-subject profiles that can be compared across walking conditions
//! (normal, knee brace, ankle brace) as tables or star-glyph figures.
//!
//! The numeric kernels ([`entropy`], [`preprocess`]) are generic over the
//! [`Real`] scalar (`f32` or `f64`); the aliases below fix the scalar for the
//! common cases. Recordings, profiles and figures use `f64` throughout.

// Negated float comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod domain;
pub mod entropy;
pub mod error;
pub mod glyph;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod profile;
pub mod scalar;
pub mod synth;

pub use config::RunConfig;
pub use domain::{
    joint_group, Axis, CameraView, Condition, Direction, Frame, JointGroup, JointId, JointPosition,
    TrackState, Trial, TrialId, WalkSegment,
};
pub use entropy::{MatchCounts, ToleranceRule, UndefinedReason, Variant};
pub use error::{Error, Result};
pub use scalar::Real;

pub type JointSeries<T = f64> = domain::JointSeries<T>;
pub type EntropyConfig<T = f64> = entropy::EntropyConfig<T>;
pub type EntropyValue<T = f64> = entropy::EntropyValue<T>;

pub type JointSeries64 = domain::JointSeries<f64>;
pub type JointSeries32 = domain::JointSeries<f32>;
pub type EntropyConfig64 = entropy::EntropyConfig<f64>;
pub type EntropyConfig32 = entropy::EntropyConfig<f32>;
pub type EntropyValue64 = entropy::EntropyValue<f64>;
pub type EntropyValue32 = entropy::EntropyValue<f32>;
