//! Float abstraction for the numeric kernels.
//!
//! Scoring, shingle similarity, and depth statistics are written against
//! [`Real`] so they can be instantiated at `f32` or `f64`; the pipeline pins
//! `f64` through [`crate::Score`].

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the scoring and statistics kernels.
pub trait Real: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {
    /// Lossless-enough conversion from a usize count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {}

/// Arithmetic mean of an integer sequence, in the caller's scalar.
pub fn mean_of_counts<S: Real, I: IntoIterator<Item = usize>>(counts: I) -> S {
    let mut sum = 0usize;
    let mut n = 0usize;
    for c in counts {
        sum += c;
        n += 1;
    }
    if n == 0 {
        S::zero()
    } else {
        S::from_count(sum) / S::from_count(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_handles_empty_and_uniform() {
        assert_eq!(mean_of_counts::<f64, _>(std::iter::empty()), 0.0);
        assert_eq!(mean_of_counts::<f64, _>([3, 3, 3]), 3.0);
        assert_eq!(mean_of_counts::<f32, _>([1, 2]), 1.5);
    }
}
