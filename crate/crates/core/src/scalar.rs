use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar accepted by the numeric kernels: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from a count or constant.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable")
    }

    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("count representable")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Arithmetic mean. Empty input yields NaN.
pub fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::of_usize(values.len())
}

/// Sample standard deviation with divisor `n - 1`. Fewer than two values yield zero.
pub fn sample_sd<T: Real>(values: &[T]) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let mu = mean(values);
    let ss: T = values.iter().map(|&v| (v - mu) * (v - mu)).sum();
    (ss / T::of_usize(values.len() - 1)).sqrt()
}
