// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Observation scalar: `f32` or `f64`.
///
/// Only comparisons, sums and products of observations go through this type.
/// Log-likelihood ratios, penalties and thresholds are probabilities or counts
/// and are always evaluated in `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Largest value of this type strictly below `self` (for finite, normal `self`).
    fn step_down(self) -> Self {
        if self == Self::zero() {
            return -Self::min_positive_value();
        }
        let below = self - self.abs() * Self::epsilon();
        if below < self {
            below
        } else {
            // subnormal range
            self - Self::min_positive_value()
        }
    }

    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Total order on finite scalars.
#[inline]
pub(crate) fn cmp_scalar<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_down_is_strictly_below() {
        for v in [1.0f64, -1.0, 2.0, 1e-300, -7.5, 0.0, 123456.789, f64::MAX] {
            assert!(v.step_down() < v, "{v}");
        }
        for v in [1.0f32, 2.0, -3.25, 0.0, 1e-30] {
            assert!(v.step_down() < v, "{v}");
        }
    }
}
