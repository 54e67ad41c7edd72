// SPDX-License-Identifier: MIT OR Apache-2.0

//! Observation series, step functions and the binary transformation.
//!
//! Indices in every public contract are 1-based: observation `i` sits at the
//! design point `x_i = (i - 1) / n`.

use crate::error::{MqsError, Result};
use crate::scalar::Scalar;

/// Ordered, finite observations `Z_1..Z_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    values: Vec<T>,
}

impl<T: Scalar> Series<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(MqsError::domain("series must contain at least one observation"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(MqsError::NonFinite { index: pos + 1 });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Observation at 1-based index `i`.
    pub fn get(&self, i: usize) -> Option<T> {
        i.checked_sub(1).and_then(|k| self.values.get(k)).copied()
    }

    /// Design point `x_i = (i - 1) / n`.
    pub fn design_point(&self, i: usize) -> f64 {
        (i as f64 - 1.0) / self.len() as f64
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// A quantile level strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta < 1.0 {
            Ok(Self(beta))
        } else {
            Err(MqsError::domain(format!("quantile level must lie in (0, 1), got {beta}")))
        }
    }

    pub const MEDIAN: QuantileLevel = QuantileLevel(0.5);

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Rank `max(1, ceil(len * beta))` of the empirical beta-quantile of `len` values.
    pub fn empirical_rank(self, len: usize) -> usize {
        ((len as f64 * self.0).ceil() as usize).clamp(1, len.max(1))
    }
}

impl std::fmt::Display for QuantileLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Right-continuous piecewise-constant function on the indices `1..=n`.
///
/// Segment `s` (1-based) covers indices `[b_{s-1}, b_s)` with `b_0 = 1` and
/// `b_S = n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<T> {
    breakpoints: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> StepFunction<T> {
    /// Builds a step function in canonical form: consecutive values must differ.
    pub fn new(breakpoints: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let f = Self::from_partition(breakpoints, values)?;
        if let Some(w) = f.values.windows(2).position(|w| w[0] == w[1]) {
            return Err(MqsError::domain(format!(
                "segments {} and {} carry the same value",
                w + 1,
                w + 2
            )));
        }
        Ok(f)
    }

    /// Builds a step function over a fixed partition. Adjacent segments may
    /// share a value; the partition, not the value sequence, defines which
    /// intervals count as constant.
    pub fn from_partition(breakpoints: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(MqsError::domain("step function needs at least one segment"));
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(MqsError::LengthMismatch {
                expected: values.len() + 1,
                actual: breakpoints.len(),
            });
        }
        if breakpoints[0] != 1 {
            return Err(MqsError::domain("first breakpoint must be index 1"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MqsError::domain("breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MqsError::domain("segment values must be finite"));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(n: usize, value: T) -> Result<Self> {
        Self::from_partition(vec![1, n + 1], vec![value])
    }

    /// Collapses runs of equal per-index values into segments.
    pub fn from_index_values(values: &[T]) -> Result<Self> {
        if values.is_empty() {
            return Err(MqsError::domain("no values"));
        }
        let mut breakpoints = vec![1];
        let mut seg_values = vec![values[0]];
        for (k, w) in values.windows(2).enumerate() {
            if w[0] != w[1] {
                breakpoints.push(k + 2);
                seg_values.push(w[1]);
            }
        }
        breakpoints.push(values.len() + 1);
        Self::new(breakpoints, seg_values)
    }

    /// Number of indices covered.
    pub fn n(&self) -> usize {
        self.breakpoints[self.breakpoints.len() - 1] - 1
    }

    pub fn num_segments(&self) -> usize {
        self.values.len()
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Start indices of segments `2..=S`, i.e. the changepoint indices.
    pub fn changepoints(&self) -> &[usize] {
        &self.breakpoints[1..self.breakpoints.len() - 1]
    }

    /// Changepoints in time units, `tau_s = (b_s - 1) / n`.
    pub fn taus(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.changepoints().iter().map(|&b| (b as f64 - 1.0) / n).collect()
    }

    /// `(start, end, value)` per segment, both ends inclusive and 1-based.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[0], w[1] - 1, v))
    }

    /// Value at 1-based index `i`.
    pub fn value_at(&self, i: usize) -> Option<T> {
        if i == 0 || i > self.n() {
            return None;
        }
        let s = self.breakpoints.partition_point(|&b| b <= i) - 1;
        Some(self.values[s])
    }

    pub fn index_values(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n());
        for (start, end, v) in self.segments() {
            out.extend(std::iter::repeat_n(v, end - start + 1));
        }
        out
    }

    /// Segment labels `0..S` per index.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        for (s, (start, end, _)) in self.segments().enumerate() {
            out.extend(std::iter::repeat_n(s, end - start + 1));
        }
        out
    }

    /// Minimal segment length in time units.
    pub fn min_segment_length(&self) -> f64 {
        let n = self.n() as f64;
        self.breakpoints
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / n)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn map_values<F: FnMut(T) -> T>(&self, f: F) -> Result<Self> {
        Self::from_partition(self.breakpoints.clone(), self.values.iter().copied().map(f).collect())
    }
}

/// Binary pseudo-data `W_i in {0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySeries(Vec<bool>);

impl BinarySeries {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Prefix sums of ones, `out[k] = W_1 + ... + W_k`.
    pub fn prefix_ones(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(0);
        let mut acc = 0;
        for &b in &self.0 {
            acc += b as usize;
            out.push(acc);
        }
        out
    }
}

/// `W_i = 1` iff `Z_i <= f(x_i)`.
pub fn transform<T: Scalar>(z: &Series<T>, f: &StepFunction<T>) -> Result<BinarySeries> {
    if f.n() != z.len() {
        return Err(MqsError::LengthMismatch {
            expected: z.len(),
            actual: f.n(),
        });
    }
    let mut bits = Vec::with_capacity(z.len());
    for (start, end, v) in f.segments() {
        bits.extend(z.values()[start - 1..end].iter().map(|&zi| zi <= v));
    }
    Ok(BinarySeries(bits))
}

/// Number of maximal constant runs.
pub fn runs_count(w: &BinarySeries) -> Result<usize> {
    if w.is_empty() {
        return Err(MqsError::domain("runs of an empty sequence"));
    }
    Ok(1 + w.0.windows(2).filter(|p| p[0] != p[1]).count())
}

pub fn ones_count(w: &BinarySeries) -> usize {
    w.0.iter().filter(|&&b| b).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(v: &[u8]) -> BinarySeries {
        BinarySeries::new(v.iter().map(|&b| b == 1).collect())
    }

    #[test]
    fn transform_examples() {
        let z = Series::new(vec![1.0, 2.0, 3.0]).unwrap();
        let f = StepFunction::constant(3, 2.0).unwrap();
        assert_eq!(transform(&z, &f).unwrap(), bits(&[1, 1, 0]));

        let f = StepFunction::constant(3, 3.0).unwrap();
        assert_eq!(transform(&z, &f).unwrap(), bits(&[1, 1, 1]));

        let z = Series::new(vec![0.5, 1.5]).unwrap();
        let f = StepFunction::new(vec![1, 2, 3], vec![0.0, 2.0]).unwrap();
        assert_eq!(transform(&z, &f).unwrap(), bits(&[0, 1]));
    }

    #[test]
    fn transform_rejects_length_mismatch() {
        let z = Series::new(vec![1.0, 2.0]).unwrap();
        let f = StepFunction::constant(3, 0.0).unwrap();
        assert!(matches!(
            transform(&z, &f),
            Err(MqsError::LengthMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn runs_and_ones() {
        assert_eq!(runs_count(&bits(&[0, 0, 1, 1])).unwrap(), 2);
        assert_eq!(runs_count(&bits(&[1, 1, 1])).unwrap(), 1);
        assert_eq!(runs_count(&bits(&[0, 1, 0, 1])).unwrap(), 4);
        assert!(runs_count(&bits(&[])).is_err());

        assert_eq!(ones_count(&bits(&[1, 1, 0])), 2);
        assert_eq!(ones_count(&bits(&[0, 0, 0, 0, 0])), 0);
        assert_eq!(ones_count(&bits(&[0, 1, 1, 1])), 3);
    }

    #[test]
    fn series_rejects_non_finite() {
        assert!(matches!(
            Series::new(vec![1.0, f64::NAN]),
            Err(MqsError::NonFinite { index: 2 })
        ));
        assert!(Series::<f64>::new(vec![]).is_err());
        assert!(Series::new(vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn quantile_level_bounds() {
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(1.0).is_err());
        assert!(QuantileLevel::new(f64::NAN).is_err());
        assert_eq!(QuantileLevel::new(0.25).unwrap().empirical_rank(8), 2);
        assert_eq!(QuantileLevel::new(0.25).unwrap().empirical_rank(9), 3);
        assert_eq!(QuantileLevel::new(0.01).unwrap().empirical_rank(5), 1);
    }

    #[test]
    fn step_function_validation() {
        assert!(StepFunction::new(vec![1, 3, 3], vec![0.0, 1.0]).is_err());
        assert!(StepFunction::new(vec![2, 3], vec![0.0]).is_err());
        assert!(StepFunction::new(vec![1, 2, 4], vec![1.0, 1.0]).is_err());
        assert!(StepFunction::from_partition(vec![1, 2, 4], vec![1.0, 1.0]).is_ok());

        let f = StepFunction::new(vec![1, 5, 11], vec![0.0, 1.0]).unwrap();
        assert_eq!(f.n(), 10);
        assert_eq!(f.changepoints(), &[5]);
        assert_eq!(f.taus(), vec![0.4]);
        assert_eq!(f.value_at(4), Some(0.0));
        assert_eq!(f.value_at(5), Some(1.0));
        assert_eq!(f.value_at(11), None);
        assert_eq!(f.min_segment_length(), 0.4);
        assert_eq!(StepFunction::from_index_values(&f.index_values()).unwrap(), f);
    }

    proptest! {
        #[test]
        fn transform_monotone_in_candidate(
            z in prop::collection::vec(-5.0f64..5.0, 1..30),
            v in -6.0f64..6.0,
            bump in 0.0f64..3.0,
        ) {
            let series = Series::new(z.clone()).unwrap();
            let low = transform(&series, &StepFunction::constant(z.len(), v).unwrap()).unwrap();
            let high = transform(&series, &StepFunction::constant(z.len(), v + bump).unwrap()).unwrap();
            for (a, b) in low.bits().iter().zip(high.bits()) {
                prop_assert!(!a || *b);
            }
        }

        #[test]
        fn global_empirical_quantile_has_enough_ones(
            z in prop::collection::vec(-5.0f64..5.0, 1..40),
            beta in 0.01f64..0.99,
        ) {
            let level = QuantileLevel::new(beta).unwrap();
            let mut sorted = z.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let r = level.empirical_rank(z.len());
            let f = StepFunction::constant(z.len(), sorted[r - 1]).unwrap();
            let w = transform(&Series::new(z.clone()).unwrap(), &f).unwrap();
            prop_assert!(ones_count(&w) as f64 >= (z.len() as f64 * beta).ceil());
        }

        #[test]
        fn runs_bounded_and_reversal_invariant(b in prop::collection::vec(any::<bool>(), 1..60)) {
            let w = BinarySeries::new(b.clone());
            let r = runs_count(&w).unwrap();
            prop_assert!(r >= 1 && r <= b.len());
            let mut rev = b;
            rev.reverse();
            prop_assert_eq!(runs_count(&BinarySeries::new(rev)).unwrap(), r);
        }
    }
}
