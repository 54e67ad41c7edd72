// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal-segment quantile segmentation by dynamic programming, with
//! simultaneous changepoint intervals and a confidence band.
//!
//! The program scans right ends `j = 1..=n`. For every feasible last-segment
//! start `a` it keeps the running intersection `I(a, j)` of the confidence
//! boxes of all subintervals of `[a, j]`:
//!
//! ```text
//! I(a, j) = I(a, j - 1) ∩ I(a + 1, j) ∩ B(a, j)
//! ```
//!
//! Feasible starts form a contiguous range `[a_min(j), j]` with `a_min`
//! nondecreasing, so the minimal segment count of the prefix `1..=j` is
//! `F(j) = F(a_min(j) - 1) + 1`. The box `B(a, j)` needs two order statistics
//! of the window `z[a..=j]`; one double heap per window length and rank
//! slides along with `j`.

use statrs::function::factorial::ln_binomial;

use crate::error::{MqsError, Result};
use crate::model::{QuantileLevel, Series, StepFunction};
use crate::multiscale::{local_stat, multiscale_stat, ScaleTable, ValueInterval};
use crate::quantile_heap::DoubleHeap;
use crate::scalar::{cmp_scalar, Scalar};

/// Mean of the runs count under the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunsMean {
    /// `1 + 2 n1 n0 / n`
    #[default]
    Classical,
    /// `2 n1 n0 / n - 1`
    Shifted,
}

/// Criterion selecting one member among all minimal feasible fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostRule {
    /// Asymmetric absolute loss, minimized exactly.
    Koenker,
    /// Log-density of the runs count of the binarized data, maximized greedily
    /// over the last changepoint.
    Runs(RunsMean),
}

impl CostRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::Koenker => "koenker",
            Self::Runs(_) => "runs",
        }
    }
}

/// Cost of a fit; only comparable within one rule. Koenker loss is
/// minimized, runs log-density maximized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostValue {
    pub rule: CostRule,
    pub value: f64,
}

/// Output of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult<T> {
    pub fit: StepFunction<T>,
    pub s_hat: usize,
    /// Per changepoint `k`, the 1-based index range `[L_k, R_k]` that holds the
    /// first index of segment `k + 1` for every minimal feasible fit.
    pub cp_intervals: Vec<(usize, usize)>,
    /// Per index `[lower, upper)`; infinite ends allowed.
    pub band: Vec<ValueInterval<T>>,
    pub q_used: f64,
    pub beta: QuantileLevel,
    pub cost: CostValue,
    /// Set when no step function passes the test at `q_used`; the fit is then
    /// the unconstrained empirical quantile and carries no guarantee.
    pub degenerate: bool,
}

impl<T: Scalar> SegmentationResult<T> {
    pub fn cost_rule(&self) -> CostRule {
        self.cost.rule
    }

    pub fn n(&self) -> usize {
        self.fit.n()
    }
}

/// `sum_i (z_i - f_i) (beta - 1{z_i < f_i})`.
pub fn koenker_cost<T: Scalar>(z: &Series<T>, f: &StepFunction<T>, beta: QuantileLevel) -> Result<f64> {
    if f.n() != z.len() {
        return Err(MqsError::LengthMismatch {
            expected: z.len(),
            actual: f.n(),
        });
    }
    Ok(z.values()
        .iter()
        .zip(f.index_values())
        .map(|(&zi, fi)| check_loss(zi.to_f64_lossy(), fi.to_f64_lossy(), beta.value()))
        .sum())
}

#[inline]
fn check_loss(z: f64, theta: f64, beta: f64) -> f64 {
    let d = z - theta;
    if z < theta {
        d * (beta - 1.0)
    } else {
        d * beta
    }
}

/// Gaussian approximation of the log-probability of observing `r` runs and
/// `k` ones among `n` Bernoulli(`beta`) bits.
pub fn runs_log_density(r: usize, k: usize, n: usize, beta: QuantileLevel, mean: RunsMean) -> Result<f64> {
    if n == 0 || r == 0 || r > n {
        return Err(MqsError::domain(format!("runs count {r} outside 1..={n}")));
    }
    if k > n {
        return Err(MqsError::domain(format!("ones count {k} exceeds length {n}")));
    }
    let b = beta.value();
    let weight = ln_binomial(n as u64, k as u64) + k as f64 * b.ln() + (n - k) as f64 * (1.0 - b).ln();
    let (n0, n1, nf) = (k as f64, (n - k) as f64, n as f64);
    let prod = 2.0 * n1 * n0;
    let var = if n > 1 { prod * (prod - nf) / (nf * nf * (nf - 1.0)) } else { 0.0 };
    if var <= 0.0 {
        // n <= 2 or all bits equal: the runs count is determined
        let forced = if k == 0 || k == n { 1 } else { 2 };
        return Ok(if r == forced { weight } else { f64::NEG_INFINITY });
    }
    let mu = match mean {
        RunsMean::Classical => 1.0 + prod / nf,
        RunsMean::Shifted => prod / nf - 1.0,
    };
    let d = r as f64 - mu;
    Ok(weight - 0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var))
}

/// Values sorted once with each element's position in the order.
struct Ranked {
    sorted: Vec<f64>,
    position: Vec<usize>,
}

impl Ranked {
    fn new(values: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut position = vec![0; values.len()];
        for (p, &i) in order.iter().enumerate() {
            position[i] = p;
        }
        Self {
            sorted: order.iter().map(|&i| values[i]).collect(),
            position,
        }
    }

    #[inline]
    fn count_below(&self, theta: f64) -> usize {
        self.sorted.partition_point(|&v| v < theta)
    }

    #[inline]
    fn count_at_most(&self, theta: f64) -> usize {
        self.sorted.partition_point(|&v| v <= theta)
    }
}

/// Fenwick tree of counts and sums over sorted positions.
struct Fenwick {
    count: Vec<u32>,
    sum: Vec<f64>,
}

impl Fenwick {
    fn new(len: usize) -> Self {
        Self {
            count: vec![0; len + 1],
            sum: vec![0.0; len + 1],
        }
    }

    fn add(&mut self, pos: usize, value: f64) {
        let mut i = pos + 1;
        while i < self.count.len() {
            self.count[i] += 1;
            self.sum[i] += value;
            i += i & i.wrapping_neg();
        }
    }

    /// Zeroes every node on the update path of `pos`. Clearing the paths of
    /// all inserted positions empties the tree without rounding residue.
    fn clear_path(&mut self, pos: usize) {
        let mut i = pos + 1;
        while i < self.count.len() {
            self.count[i] = 0;
            self.sum[i] = 0.0;
            i += i & i.wrapping_neg();
        }
    }

    /// Count and sum of the first `k` positions.
    fn prefix(&self, k: usize) -> (u32, f64) {
        let (mut c, mut s) = (0, 0.0);
        let mut i = k;
        while i > 0 {
            c += self.count[i];
            s += self.sum[i];
            i &= i - 1;
        }
        (c, s)
    }
}

struct WindowHeap<T> {
    heap: DoubleHeap<T>,
    end: usize,
}

/// Per-length sliding heaps for the two box ranks.
struct LengthBank<T> {
    lower: Vec<Option<WindowHeap<T>>>,
    upper: Vec<Option<WindowHeap<T>>>,
    high_water: usize,
}

impl<T: Scalar> LengthBank<T> {
    fn new(max_len: usize) -> Self {
        Self {
            lower: (0..=max_len).map(|_| None).collect(),
            upper: (0..=max_len).map(|_| None).collect(),
            high_water: 0,
        }
    }

    fn order_stat(slot: &mut Option<WindowHeap<T>>, z: &[T], ell: usize, end: usize, rank: usize) -> T {
        let start = end + 1 - ell;
        match slot {
            Some(w) if w.end == end => {}
            Some(w) if w.end + 1 == end => {
                w.heap
                    .replace(start - 1, end, z[end])
                    .expect("outgoing element is in the window heap");
                w.end = end;
            }
            Some(w) => {
                w.heap.rebuild((start..=end).map(|i| (i, z[i])));
                w.end = end;
            }
            None => {
                let heap = DoubleHeap::with_ids(rank, ell, (start..=end).map(|i| (i, z[i])))
                    .expect("rank is positive");
                *slot = Some(WindowHeap { heap, end });
            }
        }
        slot.as_ref().and_then(|w| w.heap.peek()).expect("window holds at least rank elements")
    }

    /// Box of the window of length `ell` ending at 0-based `end`.
    fn window_box(&mut self, z: &[T], table: &ScaleTable, ell: usize, end: usize) -> ValueInterval<T> {
        let r = table.ranks(ell);
        if r.is_empty() {
            return ValueInterval::empty();
        }
        let lower = if r.lower == 0 {
            T::neg_infinity()
        } else {
            Self::order_stat(&mut self.lower[ell], z, ell, end, r.lower)
        };
        let upper = if r.upper >= ell {
            T::infinity()
        } else {
            Self::order_stat(&mut self.upper[ell], z, ell, end, r.upper + 1)
        };
        ValueInterval { lower, upper }
    }

    /// Frees heaps of lengths above `keep`; they would need a rebuild anyway.
    fn release_above(&mut self, keep: usize) {
        for ell in keep + 1..=self.high_water.min(self.lower.len() - 1) {
            self.lower[ell] = None;
            self.upper[ell] = None;
        }
        self.high_water = keep;
    }
}

/// `I(0, e)` for every prefix end `e` of `values`: the intersection of the
/// boxes of all subintervals of `values[..=e]`.
pub fn running_intersections<T: Scalar>(values: &[T], table: &ScaleTable) -> Vec<ValueInterval<T>> {
    let len = values.len();
    let mut out = Vec::with_capacity(len);
    let mut acc = ValueInterval::full();
    let cap = len.max(1);
    let mut lo = DoubleHeap::empty(1, cap);
    let mut hi = DoubleHeap::empty(1, cap);
    for e in 0..len {
        if !acc.is_empty() {
            lo.clear();
            hi.clear();
            for i in (0..=e).rev() {
                let ell = e - i + 1;
                lo.push(i, values[i]);
                hi.push(i, values[i]);
                if ell > table.max_len() {
                    acc = ValueInterval::empty();
                    break;
                }
                let r = table.ranks(ell);
                let lower = if r.lower == 0 {
                    T::neg_infinity()
                } else {
                    lo.set_rank(r.lower);
                    lo.peek().expect("rank within window")
                };
                let upper = if r.upper >= ell {
                    T::infinity()
                } else {
                    hi.set_rank(r.upper + 1);
                    hi.peek().expect("rank within window")
                };
                acc = acc.intersect(&ValueInterval { lower, upper });
                if acc.is_empty() {
                    break;
                }
            }
        }
        out.push(acc);
    }
    out
}

/// Per-prefix state of the runs rule.
#[derive(Debug, Clone, Copy, Default)]
struct RunsState {
    ones: usize,
    runs: usize,
    last: bool,
}

/// Computes the minimal-segment fit at threshold `q`.
pub fn fit<T: Scalar>(z: &Series<T>, beta: QuantileLevel, q: f64, cost_rule: CostRule) -> Result<SegmentationResult<T>> {
    if q.is_nan() {
        return Err(MqsError::domain("threshold q is NaN"));
    }
    let n = z.len();
    let table = ScaleTable::new(n, q, beta);
    if table.max_len() == 0 {
        return Ok(degenerate_fit(z, beta, q, cost_rule));
    }
    let z0 = z.values();
    let zf: Vec<f64> = z0.iter().map(|v| v.to_f64_lossy()).collect();
    let b = beta.value();
    let max_len = table.max_len();

    let by_value = Ranked::new(&zf);
    let mut fen = Fenwick::new(n);
    let runs_mean = match cost_rule {
        CostRule::Runs(m) => Some(m),
        CostRule::Koenker => None,
    };
    // Pair (i, i + 1) switches iff min <= theta < max.
    let (pair_min, pair_max) = if runs_mean.is_some() && n > 1 {
        let mins: Vec<f64> = zf.windows(2).map(|w| w[0].min(w[1])).collect();
        let maxs: Vec<f64> = zf.windows(2).map(|w| w[0].max(w[1])).collect();
        (Ranked::new(&mins), Ranked::new(&maxs))
    } else {
        (Ranked::new(&[]), Ranked::new(&[]))
    };
    let mut fen_min = Fenwick::new(n.saturating_sub(1));
    let mut fen_max = Fenwick::new(n.saturating_sub(1));

    let mut bank = LengthBank::new(max_len);
    let mut inter = vec![ValueInterval::<T>::full(); n + 2];
    let mut segs = vec![0usize; n + 1];
    let mut a_min = vec![1usize; n + 1];
    let mut parent = vec![0usize; n + 1];
    let mut theta = vec![T::zero(); n + 1];
    let mut cost = vec![0.0f64; n + 1];
    let mut state = vec![RunsState::default(); n + 1];
    let mut dh_beta = DoubleHeap::empty(1, max_len);
    let mut lo_a = 1usize;

    for j in 1..=n {
        let end = j - 1;
        // running intersections for the feasible starts
        let mut next = ValueInterval::full();
        let mut first_ok = j;
        let mut used = 0;
        let mut a = j;
        while a >= lo_a {
            let ell = j - a + 1;
            if ell > max_len {
                break;
            }
            used = ell;
            let bx = bank.window_box(z0, &table, ell, end);
            let cur = inter[a].intersect(&next).intersect(&bx);
            if cur.is_empty() {
                break;
            }
            inter[a] = cur;
            next = cur;
            first_ok = a;
            a -= 1;
        }
        bank.release_above(used);
        a_min[j] = first_ok;
        lo_a = first_ok;
        let base = segs[first_ok - 1];
        segs[j] = base + 1;
        let mut a_hi = first_ok;
        while a_hi < j && segs[a_hi] == base {
            a_hi += 1;
        }

        // cost of every candidate last segment [a, j]
        dh_beta.clear();
        let mut seg_sum = 0.0;
        let mut best: Option<(usize, T, f64, RunsState)> = None;
        for a in (first_ok..=j).rev() {
            let ell = j - a + 1;
            dh_beta.push(a - 1, z0[a - 1]);
            dh_beta.set_rank(beta.empirical_rank(ell));
            fen.add(by_value.position[a - 1], zf[a - 1]);
            seg_sum += zf[a - 1];
            if runs_mean.is_some() && a < j {
                fen_min.add(pair_min.position[a - 1], 0.0);
                fen_max.add(pair_max.position[a - 1], 0.0);
            }
            if a > a_hi {
                continue;
            }
            let th = inter[a].clamp(dh_beta.peek().expect("segment is nonempty"));
            let thf = th.to_f64_lossy();
            let (value, st) = match runs_mean {
                None => {
                    let (c_lt, s_lt) = fen.prefix(by_value.count_below(thf));
                    let loss = b * (seg_sum - ell as f64 * thf) - (s_lt - c_lt as f64 * thf);
                    (cost[a - 1] + loss.max(0.0), RunsState::default())
                }
                Some(mean) => {
                    let ones = fen.prefix(by_value.count_at_most(thf)).0 as usize;
                    let switches = fen_min.prefix(pair_min.count_at_most(thf)).0 as usize
                        - fen_max.prefix(pair_max.count_at_most(thf)).0 as usize;
                    let first = zf[a - 1] <= thf;
                    let prev = state[a - 1];
                    let runs = if a == 1 {
                        1 + switches
                    } else {
                        prev.runs + switches + (first != prev.last) as usize
                    };
                    let st = RunsState {
                        ones: prev.ones + ones,
                        runs,
                        last: zf[j - 1] <= thf,
                    };
                    (runs_log_density(st.runs, st.ones, j, beta, mean)?, st)
                }
            };
            let better = match best {
                None => true,
                Some((_, _, v, _)) => match runs_mean {
                    None => value <= v,
                    Some(_) => value >= v,
                },
            };
            if better {
                best = Some((a, th, value, st));
            }
        }
        for a in first_ok..=j {
            fen.clear_path(by_value.position[a - 1]);
            if runs_mean.is_some() && a < j {
                fen_min.clear_path(pair_min.position[a - 1]);
                fen_max.clear_path(pair_max.position[a - 1]);
            }
        }
        let (a, th, value, st) = best.expect("at least one candidate start");
        parent[j] = a;
        theta[j] = th;
        cost[j] = value;
        state[j] = st;
    }
    drop(bank);

    // backtrack
    let mut starts = Vec::new();
    let mut values = Vec::new();
    let mut j = n;
    while j > 0 {
        starts.push(parent[j]);
        values.push(theta[j]);
        j = parent[j] - 1;
    }
    starts.reverse();
    values.reverse();
    starts.push(n + 1);
    let fit = StepFunction::from_partition(starts, values)?;
    let s_hat = fit.num_segments();
    debug_assert_eq!(s_hat, segs[n]);

    // changepoint intervals: R_k = first j with F(j) = k + 1, L_k = a_min(R_k)
    let mut right = Vec::with_capacity(s_hat);
    for (j, &count) in segs.iter().enumerate().skip(1) {
        if count > right.len() + 1 {
            right.push(j);
        }
    }
    let cp_intervals: Vec<(usize, usize)> = right.iter().map(|&r| (a_min[r], r)).collect();
    let band = confidence_band(z0, &table, &cp_intervals, inter[right.last().copied().unwrap_or(1)]);

    let result = SegmentationResult {
        fit,
        s_hat,
        cp_intervals,
        band,
        q_used: q,
        beta,
        cost: CostValue {
            rule: cost_rule,
            value: cost[n],
        },
        degenerate: false,
    };
    debug_assert!(
        multiscale_stat(z, &result.fit, beta).map(|s| s <= q).unwrap_or(false),
        "fit fails its own multiscale test"
    );
    Ok(result)
}

fn degenerate_fit<T: Scalar>(z: &Series<T>, beta: QuantileLevel, q: f64, cost_rule: CostRule) -> SegmentationResult<T> {
    let n = z.len();
    let mut sorted = z.values().to_vec();
    sorted.sort_by(cmp_scalar);
    let value = sorted[beta.empirical_rank(n) - 1];
    let fit = StepFunction::constant(n, value).expect("finite value");
    let cost = match cost_rule {
        CostRule::Koenker => koenker_cost(z, &fit, beta).unwrap_or(f64::NAN),
        CostRule::Runs(mean) => {
            let bits: Vec<bool> = z.values().iter().map(|&v| v <= value).collect();
            let runs = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
            let ones = bits.iter().filter(|&&x| x).count();
            runs_log_density(runs, ones, n, beta, mean).unwrap_or(f64::NAN)
        }
    };
    SegmentationResult {
        fit,
        s_hat: 1,
        cp_intervals: Vec::new(),
        band: vec![ValueInterval::full(); n],
        q_used: q,
        beta,
        cost: CostValue {
            rule: cost_rule,
            value: cost,
        },
        degenerate: true,
    }
}

/// Band from the changepoint intervals. `last_core` is `I(R_{S-1}, n)`.
fn confidence_band<T: Scalar>(
    z: &[T],
    table: &ScaleTable,
    cps: &[(usize, usize)],
    last_core: ValueInterval<T>,
) -> Vec<ValueInterval<T>> {
    let n = z.len();
    let mut band = vec![ValueInterval::empty(); n];
    let lefts: Vec<usize> = cps.iter().map(|c| c.0).chain(std::iter::once(n + 1)).collect();
    let rights: Vec<usize> = std::iter::once(1).chain(cps.iter().map(|c| c.1)).collect();
    for k in 1..=cps.len() {
        let (l_k, r_k) = cps[k - 1];
        let r_prev = rights[k - 1];
        let l_next = lefts[k];
        // fwd[m] = I(r_prev, r_prev + m)
        let fwd = running_intersections(&z[r_prev - 1..r_k - 1], table);
        let left_of = |b: usize| fwd[b - 1 - r_prev];
        // bwd[m] = I(l_next - 1 - m, l_next - 1)
        let reversed: Vec<T> = z[l_k - 1..l_next - 1].iter().rev().copied().collect();
        let bwd = running_intersections(&reversed, table);
        let right_of = |s: usize| bwd[l_next - 1 - s];

        let core = left_of(l_k);
        for t in r_prev..l_k {
            band[t - 1] = core;
        }
        let admissible: Vec<bool> = (l_k..=r_k)
            .map(|b| !left_of(b).is_empty() && !right_of(b).is_empty())
            .collect();
        // smallest admissible b > t, scanning right to left
        let mut after: Option<usize> = None;
        let mut upper_part = vec![ValueInterval::empty(); r_k - l_k];
        for t in (l_k..r_k).rev() {
            if admissible[t + 1 - l_k] {
                after = Some(t + 1);
            }
            if let Some(b) = after {
                upper_part[t - l_k] = left_of(b);
            }
        }
        // largest admissible b <= t, scanning left to right
        let mut before: Option<usize> = None;
        for t in l_k..r_k {
            if admissible[t - l_k] {
                before = Some(t);
            }
            let from_right = before.map(right_of).unwrap_or_else(ValueInterval::empty);
            band[t - 1] = upper_part[t - l_k].hull(&from_right);
        }
    }
    let r_last = *rights.last().expect("nonempty");
    for t in r_last..=n {
        band[t - 1] = last_core;
    }
    band
}

/// Maps index intervals to time units `[(L - 1) / n, (R - 1) / n]`.
pub fn changepoint_intervals<T: Scalar>(result: &SegmentationResult<T>) -> Vec<(f64, f64)> {
    let n = result.n() as f64;
    result
        .cp_intervals
        .iter()
        .map(|&(l, r)| ((l as f64 - 1.0) / n, (r as f64 - 1.0) / n))
        .collect()
}

/// Largest length accepted by [`brute_force_fit`].
pub const BRUTE_FORCE_MAX_N: usize = 20;

/// Exhaustive reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    /// `None` when no partition admits feasible values.
    pub s_hat: Option<usize>,
    /// Breakpoint vectors `(1, b_1, .., n + 1)` of every minimal feasible
    /// partition.
    pub minimal: Vec<Vec<usize>>,
    /// Infimum of the Koenker loss over all minimal feasible fits.
    pub koenker_min: f64,
}

/// Whether the constant `theta` passes every local test inside `segment`,
/// checked directly from counts.
pub fn passes_directly<T: Scalar>(segment: &[T], theta: T, n: usize, q: f64, beta: QuantileLevel) -> bool {
    let len = segment.len();
    let mut prefix = vec![0usize; len + 1];
    for (k, &v) in segment.iter().enumerate() {
        prefix[k + 1] = prefix[k] + (v <= theta) as usize;
    }
    (0..len).all(|i| (i..len).all(|j| local_stat(prefix[j + 1] - prefix[i], j - i + 1, n, beta) <= q))
}

/// One representative per cell of constant counts that passes the local
/// tests: each distinct value of `segment` (standing for `[v, next)`) and a
/// point below the minimum (standing for `(-inf, min)`). Returned as pairs
/// `(representative, cell upper end)`.
pub fn feasible_cells<T: Scalar>(segment: &[T], n: usize, q: f64, beta: QuantileLevel) -> Vec<(T, T)> {
    let mut distinct = segment.to_vec();
    distinct.sort_by(cmp_scalar);
    distinct.dedup();
    let below = distinct[0] - (distinct[0].abs() + T::one());
    let mut cells = vec![(below, distinct[0])];
    for (k, &v) in distinct.iter().enumerate() {
        cells.push((v, distinct.get(k + 1).copied().unwrap_or_else(T::infinity)));
    }
    cells.retain(|&(rep, _)| passes_directly(segment, rep, n, q, beta));
    cells
}

/// Enumerates all `2^(n-1)` partitions.
pub fn brute_force_fit<T: Scalar>(z: &Series<T>, beta: QuantileLevel, q: f64) -> Result<BruteForce> {
    let n = z.len();
    if n > BRUTE_FORCE_MAX_N {
        return Err(MqsError::domain(format!(
            "exhaustive enumeration limited to n <= {BRUTE_FORCE_MAX_N}, got {n}"
        )));
    }
    let zs = z.values();
    // infimum of the loss over feasible values per segment, None if infeasible
    let mut seg_inf = vec![vec![None; n + 1]; n + 1];
    for a in 1..=n {
        for e in a..=n {
            let seg = &zs[a - 1..e];
            let loss = |t: T| -> f64 {
                seg.iter()
                    .map(|&v| check_loss(v.to_f64_lossy(), t.to_f64_lossy(), beta.value()))
                    .sum()
            };
            let cells = feasible_cells(seg, n, q, beta);
            if cells.is_empty() {
                continue;
            }
            let min = cells
                .iter()
                .map(|&(rep, up)| {
                    let at_up = if up.is_finite() { loss(up) } else { f64::INFINITY };
                    // the first cell's representative is an arbitrary point below the minimum
                    let at_rep = if rep < seg.iter().copied().fold(T::infinity(), T::min) {
                        f64::INFINITY
                    } else {
                        loss(rep)
                    };
                    at_rep.min(at_up)
                })
                .fold(f64::INFINITY, f64::min);
            seg_inf[a][e] = Some(min);
        }
    }
    let mut best_s: Option<usize> = None;
    let mut minimal = Vec::new();
    let mut koenker_min = f64::INFINITY;
    let masks: u64 = 1 << (n - 1);
    for mask in 0..masks {
        let s = mask.count_ones() as usize + 1;
        if best_s.is_some_and(|b| s > b) {
            continue;
        }
        let mut bps = vec![1];
        for k in 0..n - 1 {
            if mask >> k & 1 == 1 {
                bps.push(k + 2);
            }
        }
        bps.push(n + 1);
        let mut total = 0.0;
        let feasible = bps.windows(2).all(|w| match seg_inf[w[0]][w[1] - 1] {
            Some(c) => {
                total += c;
                true
            }
            None => false,
        });
        if !feasible {
            continue;
        }
        if best_s.is_none_or(|b| s < b) {
            best_s = Some(s);
            minimal.clear();
            koenker_min = f64::INFINITY;
        }
        minimal.push(bps);
        koenker_min = koenker_min.min(total);
    }
    minimal.sort();
    Ok(BruteForce {
        s_hat: best_s,
        minimal,
        koenker_min,
    })
}
