//! Sample entropy of scalar series.
//!
//! Templates are the `N - m` windows `x[i..i+m]` for `i in 0..N-m`, so every
//! length-`m` template has a length-`m+1` extension. `B` counts unordered
//! template pairs within Chebyshev distance `r` (inclusive), `A` counts the
//! same for the extensions, and the entropy is `-ln(A / B)` in nats.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::preprocess::moving_average;
use crate::scalar::{sample_sd, Real};

pub const DEFAULT_M: usize = 2;
pub const DEFAULT_R_FACTOR: f64 = 0.2;
pub const DEFAULT_MIN_LENGTH: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceRule<T> {
    /// `r = factor * sample SD` of the series.
    Relative(T),
    /// Fixed `r` in series units.
    Absolute(T),
}

/// Entropy estimator applied to a series.
///
/// New estimators are added as variants here together with their token in
/// [`Variant::TOKENS`] and a branch in [`sample_entropy_variant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    #[default]
    SampEn,
    /// Subtract a centered moving average of the given odd window first.
    SampEnDetrended { window: usize },
}

impl Variant {
    pub const TOKENS: &'static [&'static str] = &["sampen", "sampen_detrended:<odd window>"];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::SampEn => f.write_str("sampen"),
            Variant::SampEnDetrended { window } => write!(f, "sampen_detrended:{window}"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || {
            Error::parse(format!(
                "unknown variant '{s}', expected one of: {}",
                Variant::TOKENS.join(", ")
            ))
        };
        if s == "sampen" {
            return Ok(Variant::SampEn);
        }
        let window = s.strip_prefix("sampen_detrended:").ok_or_else(unknown)?;
        let window: usize = window.parse().map_err(|_| unknown())?;
        if window == 0 || window.is_multiple_of(2) {
            return Err(Error::parse(format!(
                "sampen_detrended window must be odd and ≥ 1, got {window}"
            )));
        }
        Ok(Variant::SampEnDetrended { window })
    }
}

impl Serialize for Variant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig<T> {
    pub m: usize,
    pub tolerance: ToleranceRule<T>,
    pub variant: Variant,
    pub min_length: usize,
}

impl<T: Real> Default for EntropyConfig<T> {
    fn default() -> Self {
        EntropyConfig {
            m: DEFAULT_M,
            tolerance: ToleranceRule::Relative(T::of(DEFAULT_R_FACTOR)),
            variant: Variant::SampEn,
            min_length: DEFAULT_MIN_LENGTH,
        }
    }
}

impl<T: Real> EntropyConfig<T> {
    pub fn with_tolerance(mut self, tolerance: ToleranceRule<T>) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::invalid("m must be ≥ 1"));
        }
        match self.tolerance {
            ToleranceRule::Relative(f) if !(f > T::zero() && f.is_finite()) => {
                return Err(Error::invalid(format!("relative r factor must be > 0, got {f}")));
            }
            ToleranceRule::Absolute(r) if !(r >= T::zero() && r.is_finite()) => {
                return Err(Error::invalid(format!("absolute r must be ≥ 0, got {r}")));
            }
            _ => {}
        }
        if let Variant::SampEnDetrended { window } = self.variant {
            if window == 0 || window.is_multiple_of(2) {
                return Err(Error::invalid(format!(
                    "detrend window must be odd, got {window}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UndefinedReason {
    NoMMatches,
    NoM1Matches,
    TooShort,
    /// The series could not be extracted (irreparable tracking gap).
    UnusableSeries,
}

impl UndefinedReason {
    pub const ALL: [UndefinedReason; 4] = [
        UndefinedReason::NoMMatches,
        UndefinedReason::NoM1Matches,
        UndefinedReason::TooShort,
        UndefinedReason::UnusableSeries,
    ];

    pub fn token(self) -> &'static str {
        match self {
            UndefinedReason::NoMMatches => "no_m_matches",
            UndefinedReason::NoM1Matches => "no_m1_matches",
            UndefinedReason::TooShort => "too_short",
            UndefinedReason::UnusableSeries => "unusable_series",
        }
    }
}

impl fmt::Display for UndefinedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for UndefinedReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UndefinedReason::ALL
            .iter()
            .copied()
            .find(|r| r.token() == s)
            .ok_or_else(|| Error::parse(format!("unknown undefined reason '{s}'")))
    }
}

/// Entropy in nats, or the reason it cannot be computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyValue<T> {
    Defined(T),
    Undefined(UndefinedReason),
}

impl<T: Copy> EntropyValue<T> {
    pub fn value(&self) -> Option<T> {
        match *self {
            EntropyValue::Defined(v) => Some(v),
            EntropyValue::Undefined(_) => None,
        }
    }

    pub fn reason(&self) -> Option<UndefinedReason> {
        match *self {
            EntropyValue::Defined(_) => None,
            EntropyValue::Undefined(r) => Some(r),
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, EntropyValue::Defined(_))
    }
}

/// Template-pair match counts: `b` for length `m`, `a` for length `m + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub b: u64,
    pub a: u64,
}

impl std::ops::Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, rhs: MatchCounts) -> MatchCounts {
        MatchCounts {
            b: self.b + rhs.b,
            a: self.a + rhs.a,
        }
    }
}

/// Matching tolerance for `series` under `rule`. Zero variance gives `r = 0`.
pub fn tolerance<T: Real>(series: &[T], rule: ToleranceRule<T>) -> T {
    match rule {
        ToleranceRule::Relative(factor) => factor * sample_sd(series),
        ToleranceRule::Absolute(r) => r,
    }
}

fn check_countable<T>(series: &[T], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("m must be ≥ 1"));
    }
    if series.len() < m + 2 {
        return Err(Error::invalid(format!(
            "series of length {} too short for m = {m} (need ≥ {})",
            series.len(),
            m + 2
        )));
    }
    Ok(())
}

/// Templates sorted by their first coordinate; ties keep index order.
fn sorted_templates<T: Real>(series: &[T], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..series.len() - m).collect();
    order.sort_by(|&i, &j| {
        series[i]
            .partial_cmp(&series[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    order
}

/// Counts for all pairs whose first template (in sorted order) sits at `p`.
///
/// Candidates are scanned in ascending first-coordinate order and the scan
/// stops once that coordinate alone exceeds `r`.
#[inline]
fn counts_from<T: Real>(series: &[T], order: &[usize], p: usize, m: usize, r: T) -> MatchCounts {
    let i = order[p];
    let xi = series[i];
    let mut counts = MatchCounts::default();
    for &j in &order[p + 1..] {
        if series[j] - xi > r {
            break;
        }
        let within = (1..m).all(|k| (series[i + k] - series[j + k]).abs() <= r);
        if within {
            counts.b += 1;
            if (series[i + m] - series[j + m]).abs() <= r {
                counts.a += 1;
            }
        }
    }
    counts
}

/// Count matching template pairs (`B`, `A`). Requires `N ≥ m + 2`.
pub fn count_matches<T: Real>(series: &[T], m: usize, r: T) -> Result<MatchCounts> {
    check_countable(series, m)?;
    let order = sorted_templates(series, m);
    Ok((0..order.len())
        .map(|p| counts_from(series, &order, p, m, r))
        .fold(MatchCounts::default(), |acc, c| acc + c))
}

/// Same counts as [`count_matches`], spread over the rayon pool.
pub fn count_matches_par<T: Real>(series: &[T], m: usize, r: T) -> Result<MatchCounts> {
    check_countable(series, m)?;
    let order = sorted_templates(series, m);
    Ok((0..order.len())
        .into_par_iter()
        .map(|p| counts_from(series, &order, p, m, r))
        .reduce(MatchCounts::default, |a, b| a + b))
}

/// `-ln(A/B)` for known counts, computed as `ln(B/A)` so equal counts give `+0.0`.
pub fn entropy_from_counts<T: Real>(counts: MatchCounts) -> EntropyValue<T> {
    if counts.b == 0 {
        return EntropyValue::Undefined(UndefinedReason::NoMMatches);
    }
    if counts.a == 0 {
        return EntropyValue::Undefined(UndefinedReason::NoM1Matches);
    }
    let a = T::from_u64(counts.a).expect("count representable");
    let b = T::from_u64(counts.b).expect("count representable");
    EntropyValue::Defined((b / a).ln())
}

/// Plain sample entropy, ignoring `config.variant`.
pub fn sample_entropy<T: Real>(series: &[T], config: &EntropyConfig<T>) -> EntropyValue<T> {
    if series.len() < config.min_length.max(config.m + 2) {
        return EntropyValue::Undefined(UndefinedReason::TooShort);
    }
    let r = tolerance(series, config.tolerance);
    let counts = count_matches(series, config.m, r).expect("length checked above");
    entropy_from_counts(counts)
}

/// Entropy under the estimator selected by `config.variant`.
pub fn sample_entropy_variant<T: Real>(series: &[T], config: &EntropyConfig<T>) -> EntropyValue<T> {
    match config.variant {
        Variant::SampEn => sample_entropy(series, config),
        Variant::SampEnDetrended { window } => match detrend(series, window) {
            Some(residual) => sample_entropy(&residual, config),
            None => EntropyValue::Undefined(UndefinedReason::TooShort),
        },
    }
}

/// Series minus its centered moving average; `None` when the window exceeds the length.
pub fn detrend<T: Real>(series: &[T], window: usize) -> Option<Vec<T>> {
    let trend = moving_average(series, window).ok()?;
    Some(series.iter().zip(&trend).map(|(&x, &t)| x - t).collect())
}

/// Naive reference implementation used to check the fast path.
///
/// Builds every template explicitly and compares all `i < j` pairs with a
/// full Chebyshev distance. Quadratic in `N`, no pruning.
pub mod oracle {
    use super::{entropy_from_counts, tolerance, EntropyConfig, EntropyValue, MatchCounts, UndefinedReason};
    use crate::scalar::Real;

    fn chebyshev<T: Real>(u: &[T], v: &[T]) -> T {
        u.iter()
            .zip(v)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |acc, d| if d > acc { d } else { acc })
    }

    fn pairs_within<T: Real>(templates: &[&[T]], r: T) -> u64 {
        let mut count = 0;
        for i in 0..templates.len() {
            for j in (i + 1)..templates.len() {
                if chebyshev(templates[i], templates[j]) <= r {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn count_matches<T: Real>(series: &[T], m: usize, r: T) -> MatchCounts {
        assert!(m >= 1 && series.len() >= m + 2);
        let n_templates = series.len() - m;
        let short: Vec<&[T]> = (0..n_templates).map(|i| &series[i..i + m]).collect();
        let long: Vec<&[T]> = (0..n_templates).map(|i| &series[i..i + m + 1]).collect();
        MatchCounts {
            b: pairs_within(&short, r),
            a: pairs_within(&long, r),
        }
    }

    pub fn sample_entropy<T: Real>(series: &[T], config: &EntropyConfig<T>) -> EntropyValue<T> {
        if series.len() < config.min_length.max(config.m + 2) {
            return EntropyValue::Undefined(UndefinedReason::TooShort);
        }
        let r = tolerance(series, config.tolerance);
        entropy_from_counts(count_matches(series, config.m, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(m: usize, rule: ToleranceRule<f64>) -> EntropyConfig<f64> {
        EntropyConfig {
            m,
            tolerance: rule,
            variant: Variant::SampEn,
            min_length: 0,
        }
    }

    #[test]
    fn tolerance_rules() {
        assert_eq!(
            tolerance(&[0.0, 0.0, 0.0, 0.0], ToleranceRule::Relative(0.2)),
            0.0
        );
        let r = tolerance(&[1.0, 3.0], ToleranceRule::Relative(0.5));
        assert!((r - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(tolerance(&[5.0, -2.0, 9.0], ToleranceRule::Absolute(0.1)), 0.1);
    }

    #[test]
    fn counts_on_hand_enumerated_series() {
        assert_eq!(
            count_matches(&[0.0; 5], 2, 0.0).unwrap(),
            MatchCounts { b: 3, a: 3 }
        );
        assert_eq!(
            count_matches(&[1.0, 2.0, 1.0, 2.0, 1.0, 2.0], 2, 0.0).unwrap(),
            MatchCounts { b: 2, a: 2 }
        );
        assert_eq!(
            count_matches(&[1.0, 2.0, 3.0, 2.0, 1.0], 2, 0.0).unwrap(),
            MatchCounts { b: 0, a: 0 }
        );
    }

    #[test]
    fn counts_need_m_plus_two_samples() {
        assert!(count_matches(&[1.0, 2.0, 3.0], 2, 0.1).is_err());
        assert!(count_matches(&[1.0, 2.0, 3.0, 4.0], 2, 0.1).is_ok());
        assert!(count_matches(&[1.0, 2.0, 3.0, 4.0], 0, 0.1).is_err());
    }

    #[test]
    fn constant_series_is_zero() {
        let xs = vec![1.25_f64; 100];
        assert_eq!(
            sample_entropy(&xs, &EntropyConfig::default()),
            EntropyValue::Defined(0.0)
        );
        let xs32 = vec![1.25_f32; 100];
        assert_eq!(
            sample_entropy(&xs32, &EntropyConfig::default()),
            EntropyValue::Defined(0.0)
        );
    }

    #[test]
    fn undefined_reasons() {
        let c = EntropyConfig::<f64>::default();
        assert_eq!(
            sample_entropy(&[1.0; 59], &c),
            EntropyValue::Undefined(UndefinedReason::TooShort)
        );
        let ramp: Vec<f64> = (0..80).map(f64::from).collect();
        assert_eq!(
            sample_entropy(&ramp, &c.with_tolerance(ToleranceRule::Absolute(0.5))),
            EntropyValue::Undefined(UndefinedReason::NoMMatches)
        );
        assert_eq!(
            entropy_from_counts::<f64>(MatchCounts { b: 4, a: 0 }),
            EntropyValue::Undefined(UndefinedReason::NoM1Matches)
        );
        assert_eq!(
            entropy_from_counts::<f64>(MatchCounts { b: 4, a: 1 }),
            EntropyValue::Defined(4f64.ln())
        );
    }

    #[test]
    fn detrended_window_one_is_zero() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = EntropyConfig {
            variant: Variant::SampEnDetrended { window: 1 },
            ..EntropyConfig::default()
        };
        assert_eq!(sample_entropy_variant(&xs, &c), EntropyValue::Defined(0.0));
    }

    #[test]
    fn detrended_window_longer_than_series() {
        let c = EntropyConfig {
            variant: Variant::SampEnDetrended { window: 101 },
            ..EntropyConfig::<f64>::default()
        };
        assert_eq!(
            sample_entropy_variant(&[0.5; 80], &c),
            EntropyValue::Undefined(UndefinedReason::TooShort)
        );
    }

    #[test]
    fn variant_tokens() {
        assert_eq!("sampen".parse::<Variant>().unwrap(), Variant::SampEn);
        assert_eq!(
            "sampen_detrended:31".parse::<Variant>().unwrap(),
            Variant::SampEnDetrended { window: 31 }
        );
        assert!("sampen_detrended:30".parse::<Variant>().is_err());
        let err = "nosuch".parse::<Variant>().unwrap_err().to_string();
        assert!(
            err.contains("sampen") && err.contains("sampen_detrended"),
            "{err}"
        );
        for v in [Variant::SampEn, Variant::SampEnDetrended { window: 7 }] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn config_validation() {
        assert!(EntropyConfig::<f64>::default().validate().is_ok());
        let c = EntropyConfig::<f64> {
            m: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert!(EntropyConfig::<f64>::default()
            .with_tolerance(ToleranceRule::Relative(0.0))
            .validate()
            .is_err());
        assert!(EntropyConfig::<f64>::default()
            .with_tolerance(ToleranceRule::Absolute(0.0))
            .validate()
            .is_ok());
        assert!(EntropyConfig::<f64>::default()
            .with_tolerance(ToleranceRule::Absolute(-1.0))
            .validate()
            .is_err());
    }

    #[test]
    fn config_serde_round_trip() {
        let c = EntropyConfig {
            variant: Variant::SampEnDetrended { window: 31 },
            ..EntropyConfig::<f64>::default()
        };
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(
            json,
            r#"{"m":2,"tolerance":{"relative":0.2},"variant":"sampen_detrended:31","min_length":60}"#
        );
        assert_eq!(serde_json::from_str::<EntropyConfig<f64>>(&json).unwrap(), c);
    }

    fn series_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, 4..160)
    }

    proptest! {
        #[test]
        fn fast_counts_equal_oracle(xs in series_strategy(), m in 1usize..4, rf in 0.05f64..0.6) {
            prop_assume!(xs.len() >= m + 2);
            let r = tolerance(&xs, ToleranceRule::Relative(rf));
            prop_assert_eq!(count_matches(&xs, m, r).unwrap(), oracle::count_matches(&xs, m, r));
        }

        #[test]
        fn parallel_counts_equal_sequential(xs in series_strategy(), m in 1usize..4) {
            prop_assume!(xs.len() >= m + 2);
            let r = tolerance(&xs, ToleranceRule::Relative(0.2));
            prop_assert_eq!(count_matches(&xs, m, r).unwrap(), count_matches_par(&xs, m, r).unwrap());
        }

        #[test]
        fn a_never_exceeds_b(xs in series_strategy(), m in 1usize..4, r in 0.0f64..2.0) {
            prop_assume!(xs.len() >= m + 2);
            let c = count_matches(&xs, m, r).unwrap();
            prop_assert!(c.a <= c.b);
            if let EntropyValue::Defined(v) = sample_entropy(&xs, &cfg(m, ToleranceRule::Absolute(r))) {
                prop_assert!(v >= 0.0 && v.is_finite());
            }
        }

        #[test]
        fn quantized_series_with_ties(xs in prop::collection::vec(0u8..4, 5..120), m in 1usize..3) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            for r in [0.0, 1.0] {
                prop_assert_eq!(count_matches(&xs, m, r).unwrap(), oracle::count_matches(&xs, m, r));
            }
        }
    }
}
