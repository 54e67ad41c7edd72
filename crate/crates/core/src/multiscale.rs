// SPDX-License-Identifier: MIT OR Apache-2.0

//! Local likelihood-ratio tests, scale penalties and their inversion into
//! per-interval confidence boxes.
//!
//! A constant value `theta` passes the local test on an interval of length
//! `ell` iff the count `c = #{k : z_k <= theta}` satisfies
//! `sqrt(2 T(c / ell)) - P(ell, n) <= q`. The accepted counts form an integer
//! range `[lower, upper]`, which maps back to the half-open value box
//! `[z_(lower), z_(upper + 1))` of order statistics.

use crate::error::{MqsError, Result};
use crate::model::{transform, QuantileLevel, Series, StepFunction};
use crate::scalar::{cmp_scalar, Scalar};

/// Binary Kullback-Leibler divergence `KL(x || beta)` with `0 log 0 = 0`.
#[inline]
pub fn bernoulli_divergence(x: f64, beta: f64) -> f64 {
    let a = if x > 0.0 { x * (x / beta).ln() } else { 0.0 };
    let b = if x < 1.0 {
        (1.0 - x) * ((1.0 - x) / (1.0 - beta)).ln()
    } else {
        0.0
    };
    (a + b).max(0.0)
}

/// Log-likelihood ratio of `ell` Bernoulli observations with mean `mean_w`
/// against success probability `beta`.
pub fn local_llr(mean_w: f64, ell: usize, beta: QuantileLevel) -> f64 {
    ell as f64 * bernoulli_divergence(mean_w, beta.value())
}

/// Scale penalty `sqrt(2 log(e n / ell))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub ell: usize,
    pub n: usize,
    pub value: f64,
}

pub fn penalty(ell: usize, n: usize) -> Result<Penalty> {
    if ell == 0 || ell > n {
        return Err(MqsError::domain(format!(
            "scale {ell} outside 1..={n}"
        )));
    }
    Ok(Penalty {
        ell,
        n,
        value: penalty_value(ell, n),
    })
}

#[inline]
pub(crate) fn penalty_value(ell: usize, n: usize) -> f64 {
    (2.0 * (1.0 + (n as f64 / ell as f64).ln())).sqrt()
}

/// Penalized root-LLR of a single interval: `sqrt(2 T) - P(ell, n)`.
#[inline]
pub fn local_stat(count: usize, ell: usize, n: usize, beta: QuantileLevel) -> f64 {
    let t = local_llr(count as f64 / ell as f64, ell, beta);
    (2.0 * t).sqrt() - penalty_value(ell, n)
}

/// Roots `l <= beta <= u` of `KL(x || beta) = q_tilde`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalThresholdPair {
    pub lower: f64,
    pub upper: f64,
}

const BISECTION_ITERATIONS: usize = 200;

/// Solves `KL(x || beta) = q_tilde` on both sides of `beta` by bisection.
///
/// The divergence is monotone on `[0, beta]` and on `[beta, 1]`; values of
/// `q_tilde` beyond `KL(0 || beta)` or `KL(1 || beta)` clamp the respective
/// root to 0 or 1.
pub fn invert_llr(q_tilde: f64, beta: QuantileLevel, tol: f64) -> LocalThresholdPair {
    let b = beta.value();
    if q_tilde <= 0.0 {
        return LocalThresholdPair { lower: b, upper: b };
    }
    let h = |x: f64| bernoulli_divergence(x, b);
    let lower = if q_tilde >= (1.0 / (1.0 - b)).ln() {
        0.0
    } else {
        // decreasing on [0, beta]
        bisect(|x| h(x) - q_tilde, 0.0, b, true, tol)
    };
    let upper = if q_tilde >= (1.0 / b).ln() {
        1.0
    } else {
        bisect(|x| h(x) - q_tilde, b, 1.0, false, tol)
    };
    LocalThresholdPair { lower, upper }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, decreasing: bool, tol: f64) -> f64 {
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v.abs() <= tol * 1e-3 {
            return mid;
        }
        if (v > 0.0) == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Accepted count range `[lower, upper]` on an interval of length `ell`.
///
/// `lower == 0` means the box is unbounded below (every count down to zero
/// passes); `upper == ell` means it is unbounded above. `lower > upper`
/// means no count passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxRanks {
    pub lower: usize,
    pub upper: usize,
}

impl BoxRanks {
    pub fn is_empty(self) -> bool {
        self.lower > self.upper
    }

    pub fn accepts(self, count: usize) -> bool {
        self.lower <= count && count <= self.upper
    }
}

/// No constant value can pass the local test at this scale (`q + P < 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("scale {ell} is infeasible: threshold plus penalty is negative")]
pub struct InfeasibleScale {
    pub ell: usize,
}

/// Count ranks from thresholds: `(ceil(ell l), min(ell, floor(ell u)))`.
pub fn ranks_from_thresholds(ell: usize, pair: LocalThresholdPair) -> BoxRanks {
    let l = ell as f64;
    BoxRanks {
        lower: (l * pair.lower).ceil().max(0.0) as usize,
        upper: ((l * pair.upper).floor().max(0.0) as usize).min(ell),
    }
}

/// Order-statistic ranks of the confidence box for intervals of length `ell`.
///
/// The ranks come from inverting the LLR at `q_tilde = (q + P)^2 / (2 ell)`
/// and are then checked against [`local_stat`] at the boundary counts, so
/// that box membership and `local_stat <= q` agree bit for bit.
pub fn box_ranks(
    ell: usize,
    n: usize,
    q: f64,
    beta: QuantileLevel,
) -> Result<BoxRanks, InfeasibleScale> {
    assert!(ell >= 1 && ell <= n, "scale {ell} outside 1..={n}");
    let p = penalty_value(ell, n);
    if q + p < 0.0 {
        return Err(InfeasibleScale { ell });
    }
    let q_tilde = (q + p).powi(2) / (2.0 * ell as f64);
    let pair = invert_llr(q_tilde, beta, 1e-12);
    let guess = ranks_from_thresholds(ell, pair);
    let accept = |c: usize| local_stat(c, ell, n, beta) <= q;

    // The accepted set is an integer interval containing the counts nearest
    // ell * beta whenever it is nonempty.
    let mut lower = guess.lower.min(ell);
    while lower > 0 && accept(lower - 1) {
        lower -= 1;
    }
    while lower <= ell && !accept(lower) {
        lower += 1;
        if lower > guess.upper.max(guess.lower) + 1 {
            break;
        }
    }
    if lower > ell || !accept(lower) {
        let k = guess.upper.min(ell);
        return Ok(BoxRanks { lower: k + 1, upper: k });
    }
    let mut upper = guess.upper.max(lower);
    while upper < ell && accept(upper + 1) {
        upper += 1;
    }
    while upper > lower && !accept(upper) {
        upper -= 1;
    }
    Ok(BoxRanks { lower, upper })
}

/// Half-open value interval `[lower, upper)`; infinite ends are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueInterval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> ValueInterval<T> {
    pub fn full() -> Self {
        Self {
            lower: T::neg_infinity(),
            upper: T::infinity(),
        }
    }

    pub fn empty() -> Self {
        Self {
            lower: T::infinity(),
            upper: T::neg_infinity(),
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.lower.partial_cmp(&self.upper) != Some(std::cmp::Ordering::Less)
    }

    #[inline]
    pub fn contains(&self, v: T) -> bool {
        self.lower <= v && v < self.upper
    }

    #[inline]
    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lower: if other.lower > self.lower { other.lower } else { self.lower },
            upper: if other.upper < self.upper { other.upper } else { self.upper },
        }
    }

    /// Smallest interval containing both (empty operands are ignored).
    pub fn hull(&self, other: &Self) -> Self {
        match (self.is_empty(), other.is_empty()) {
            (true, _) => *other,
            (_, true) => *self,
            _ => Self {
                lower: self.lower.min(other.lower),
                upper: self.upper.max(other.upper),
            },
        }
    }

    /// The point of the interval closest to `v`. Clamping to the open upper
    /// end yields the largest representable value below it (or `lower`).
    pub fn clamp(&self, v: T) -> T {
        if v < self.lower {
            self.lower
        } else if v >= self.upper {
            let below = self.upper.step_down();
            if below < self.lower {
                self.lower
            } else {
                below
            }
        } else {
            v
        }
    }
}

/// A confidence box for the constant value on the interval `[i, j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceBox<T> {
    pub lower_value: T,
    pub upper_value: T,
    /// 1-based inclusive source interval.
    pub source: (usize, usize),
    pub ranks: BoxRanks,
}

impl<T: Scalar> ConfidenceBox<T> {
    pub fn is_empty(&self) -> bool {
        self.lower_value.partial_cmp(&self.upper_value) != Some(std::cmp::Ordering::Less)
    }

    pub fn interval(&self) -> ValueInterval<T> {
        ValueInterval {
            lower: self.lower_value,
            upper: self.upper_value,
        }
    }
}

/// Value box of order statistics `[z_(lower), z_(upper + 1))` of `segment`.
pub fn confidence_box<T: Scalar>(segment: &[T], source: (usize, usize), ranks: BoxRanks) -> ConfidenceBox<T> {
    let mut sorted = segment.to_vec();
    sorted.sort_by(cmp_scalar);
    let interval = box_from_sorted(&sorted, ranks);
    ConfidenceBox {
        lower_value: interval.lower,
        upper_value: interval.upper,
        source,
        ranks,
    }
}

pub(crate) fn box_from_sorted<T: Scalar>(sorted: &[T], ranks: BoxRanks) -> ValueInterval<T> {
    let ell = sorted.len();
    if ranks.is_empty() {
        return ValueInterval::empty();
    }
    let lower = if ranks.lower == 0 {
        T::neg_infinity()
    } else {
        sorted[ranks.lower - 1]
    };
    let upper = if ranks.upper >= ell {
        T::infinity()
    } else {
        sorted[ranks.upper]
    };
    ValueInterval { lower, upper }
}

/// Box ranks for every scale `1..=n` at fixed `(n, q, beta)`.
#[derive(Debug, Clone)]
pub struct ScaleTable {
    n: usize,
    q: f64,
    beta: QuantileLevel,
    /// Index `ell`; entry 0 unused.
    ranks: Vec<BoxRanks>,
    /// Longest interval length on which some constant value can pass.
    max_len: usize,
}

impl ScaleTable {
    pub fn new(n: usize, q: f64, beta: QuantileLevel) -> Self {
        let mut ranks = Vec::with_capacity(n + 1);
        ranks.push(BoxRanks { lower: 1, upper: 0 });
        let mut max_len = n;
        let mut blocked = false;
        for ell in 1..=n {
            let r = box_ranks(ell, n, q, beta).unwrap_or(BoxRanks { lower: 1, upper: 0 });
            if r.is_empty() && !blocked {
                max_len = ell - 1;
                blocked = true;
            }
            ranks.push(r);
        }
        Self {
            n,
            q,
            beta,
            ranks,
            max_len,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn beta(&self) -> QuantileLevel {
        self.beta
    }

    #[inline]
    pub fn ranks(&self, ell: usize) -> BoxRanks {
        self.ranks[ell]
    }

    /// Segments longer than this cannot carry any constant value.
    pub fn max_len(&self) -> usize {
        self.max_len
    }
}

/// Penalized multiscale statistic of `f`: the maximum of [`local_stat`] over
/// every interval on which `f`'s partition is constant.
///
/// Exhaustive `O(n^2)` reference evaluation.
pub fn multiscale_stat<T: Scalar>(z: &Series<T>, f: &StepFunction<T>, beta: QuantileLevel) -> Result<f64> {
    let w = transform(z, f)?;
    let prefix = w.prefix_ones();
    let n = z.len();
    let mut best = f64::NEG_INFINITY;
    for (start, end, _) in f.segments() {
        for i in start..=end {
            for j in i..=end {
                let c = prefix[j] - prefix[i - 1];
                best = best.max(local_stat(c, j - i + 1, n, beta));
            }
        }
    }
    Ok(best)
}

/// Intersection of the confidence boxes of every subinterval of `segment`,
/// by direct sorting. Reference `O(ell^3 log ell)` evaluation.
pub fn segment_intersection<T: Scalar>(segment: &[T], table: &ScaleTable) -> ValueInterval<T> {
    let mut acc = ValueInterval::full();
    let len = segment.len();
    if len > table.max_len() {
        return ValueInterval::empty();
    }
    let mut buf = Vec::with_capacity(len);
    for i in 0..len {
        for j in i..len {
            buf.clear();
            buf.extend_from_slice(&segment[i..=j]);
            buf.sort_by(cmp_scalar);
            acc = acc.intersect(&box_from_sorted(&buf, table.ranks(j - i + 1)));
            if acc.is_empty() {
                return acc;
            }
        }
    }
    acc
}

/// Box-intersection membership test: every segment value lies in the
/// intersection of its subinterval boxes.
pub fn passes_boxes<T: Scalar>(z: &Series<T>, f: &StepFunction<T>, table: &ScaleTable) -> Result<bool> {
    if f.n() != z.len() {
        return Err(MqsError::LengthMismatch {
            expected: z.len(),
            actual: f.n(),
        });
    }
    Ok(f.segments().all(|(start, end, v)| {
        segment_intersection(&z.values()[start - 1..end], table).contains(v)
    }))
}
