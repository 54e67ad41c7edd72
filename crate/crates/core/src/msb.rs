// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiscale segment boxplot: three quantile fits whose nearby changepoints
//! are moved to common locations.

use crate::error::{MqsError, Result};
use crate::model::{QuantileLevel, Series, StepFunction};
use crate::multiscale::{ScaleTable, ValueInterval};
use crate::scalar::{cmp_scalar, Scalar};
use crate::segmentation::{fit, koenker_cost, running_intersections, CostRule, SegmentationResult};
use crate::threshold::ThresholdStore;

/// The canonical quartile triple.
pub const QUARTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// One common changepoint chosen for several quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeRecord {
    /// Positions in [`BoxplotResult::fits`] that now share the changepoint.
    pub quantiles: Vec<usize>,
    /// Their changepoint indices before the merge, in the same order.
    pub original: Vec<usize>,
    pub merged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotResult<T> {
    /// Ordered by quantile level.
    pub fits: Vec<SegmentationResult<T>>,
    pub merges: Vec<MergeRecord>,
    /// Per-fit level.
    pub alpha: Option<f64>,
}

impl<T: Scalar> BoxplotResult<T> {
    /// Level of the joint statement over all fits (Bonferroni).
    pub fn simultaneous_level(&self) -> Option<f64> {
        self.alpha.map(|a| (1.0 - self.fits.len() as f64 * a).max(0.0))
    }

    /// Number of indices at which a lower quantile fit exceeds a higher one.
    pub fn crossings(&self) -> usize {
        let curves: Vec<Vec<T>> = self.fits.iter().map(|f| f.fit.index_values()).collect();
        let n = curves.first().map_or(0, Vec::len);
        (0..n)
            .filter(|&t| curves.windows(2).any(|w| w[0][t] > w[1][t]))
            .count()
    }
}

/// Fits each level at its own threshold, then merges.
pub fn msb_fit_with_thresholds<T: Scalar>(
    z: &Series<T>,
    levels: &[(QuantileLevel, f64)],
    cost_rule: CostRule,
) -> Result<BoxplotResult<T>> {
    if levels.is_empty() {
        return Err(MqsError::domain("no quantile levels"));
    }
    if levels.windows(2).any(|w| w[0].0.value() >= w[1].0.value()) {
        return Err(MqsError::domain("quantile levels must be strictly increasing"));
    }
    let fits = levels
        .iter()
        .map(|&(beta, q)| fit(z, beta, q, cost_rule))
        .collect::<Result<Vec<_>>>()?;
    merge_changepoints(z, fits)
}

/// Boxplot at per-quantile level `alpha`, with thresholds from `store`.
pub fn msb_fit<T: Scalar>(
    z: &Series<T>,
    alpha: f64,
    store: &mut ThresholdStore,
    cost_rule: CostRule,
) -> Result<BoxplotResult<T>> {
    let mut levels = Vec::with_capacity(3);
    for b in QUARTILES {
        let beta = QuantileLevel::new(b)?;
        levels.push((beta, store.threshold(z.len(), beta, alpha)?));
    }
    let mut out = msb_fit_with_thresholds(z, &levels, cost_rule)?;
    out.alpha = Some(alpha);
    Ok(out)
}

/// Per-quantile segment feasibility and values.
struct Refitter<'a, T> {
    z: &'a [T],
    table: ScaleTable,
}

impl<T: Scalar> Refitter<'_, T> {
    fn segment_box(&self, start: usize, end: usize) -> ValueInterval<T> {
        *running_intersections(&self.z[start - 1..end], &self.table)
            .last()
            .expect("nonempty segment")
    }

    fn value(&self, start: usize, end: usize) -> Option<T> {
        let bx = self.segment_box(start, end);
        if bx.is_empty() {
            return None;
        }
        let mut seg = self.z[start - 1..end].to_vec();
        seg.sort_by(cmp_scalar);
        Some(bx.clamp(seg[self.table.beta().empirical_rank(seg.len()) - 1]))
    }

    fn feasible(&self, start: usize, end: usize) -> bool {
        !self.segment_box(start, end).is_empty()
    }
}

/// Members are `(fit, breakpoint position)` pairs.
type Group = (Vec<(usize, usize)>, usize);

fn merge_pass<T: Scalar>(
    refit: &[Refitter<'_, T>],
    cis: &[Vec<(usize, usize)>],
    active: &[bool],
    current: &[Vec<usize>],
) -> (Vec<Vec<usize>>, Vec<Group>) {
    let count = current.len();
    let mut bps = current.to_vec();
    let mut next = vec![0usize; count];
    let mut groups = Vec::new();
    loop {
        let seed = (0..count)
            .filter(|&f| active[f] && next[f] < cis[f].len())
            .min_by_key(|&f| (cis[f][next[f]], f));
        let Some(seed) = seed else { break };
        let (mut lo, mut hi) = cis[seed][next[seed]];
        let mut group = vec![seed];
        for f in 0..count {
            if f == seed || !active[f] || next[f] >= cis[f].len() {
                continue;
            }
            let (l, r) = cis[f][next[f]];
            if l.max(lo) <= r.min(hi) {
                lo = lo.max(l);
                hi = hi.min(r);
                group.push(f);
            }
        }
        group.sort_unstable();
        let mut members = group.clone();
        let mut merged = None;
        while members.len() >= 2 {
            let sum: usize = members.iter().map(|&f| bps[f][next[f] + 1]).sum();
            // half-up rounding of the mean
            let target = ((2 * sum + members.len()) / (2 * members.len())).clamp(lo, hi);
            let ok: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&f| {
                    let k = next[f] + 1;
                    refit[f].feasible(bps[f][k - 1], target - 1) && refit[f].feasible(target, bps[f][k + 1] - 1)
                })
                .collect();
            if ok.len() == members.len() {
                merged = Some(target);
                break;
            }
            members = ok;
        }
        if let Some(target) = merged {
            for &f in &members {
                bps[f][next[f] + 1] = target;
            }
            groups.push((members.iter().map(|&f| (f, next[f] + 1)).collect(), target));
        }
        for &f in &group {
            next[f] += 1;
        }
    }
    (bps, groups)
}

/// Moves changepoints whose intervals overlap across fits to common indices.
///
/// Changepoints are visited left to right by interval. The leftmost
/// unvisited interval seeds a group; the first unvisited changepoint of every other fit joins if its
/// interval meets the running intersection. The common index is the rounded
/// mean of the members' indices, clamped into the intersection. A member
/// whose two adjacent segments would become infeasible keeps its own index
/// and leaves the group. Passes repeat until nothing moves.
pub fn merge_changepoints<T: Scalar>(
    z: &Series<T>,
    mut fits: Vec<SegmentationResult<T>>,
) -> Result<BoxplotResult<T>> {
    let n = z.len();
    if fits.iter().any(|f| f.n() != n) {
        return Err(MqsError::domain("fits do not match the series length"));
    }
    let refit: Vec<Refitter<'_, T>> = fits
        .iter()
        .map(|f| Refitter {
            z: z.values(),
            table: ScaleTable::new(n, f.q_used, f.beta),
        })
        .collect();
    let original: Vec<Vec<usize>> = fits.iter().map(|f| f.fit.breakpoints().to_vec()).collect();
    let cis: Vec<Vec<(usize, usize)>> = fits.iter().map(|f| f.cp_intervals.clone()).collect();
    let active: Vec<bool> = fits.iter().map(|f| !f.degenerate).collect();
    // Repeat until the configuration is a fixed point, which makes the merge
    // idempotent. A cycle falls back to the unmerged fits, which is stable too
    // because the procedure is a function of the starting configuration.
    let mut bps = original.clone();
    let mut seen = vec![bps.clone()];
    let groups = loop {
        let (next_bps, groups) = merge_pass(&refit, &cis, &active, &bps);
        if next_bps == bps {
            break groups;
        }
        if seen.contains(&next_bps) {
            bps = original.clone();
            break Vec::new();
        }
        seen.push(next_bps.clone());
        bps = next_bps;
    };
    let merges = groups
        .into_iter()
        .map(|(members, target)| MergeRecord {
            quantiles: members.iter().map(|&(f, _)| f).collect(),
            original: members.iter().map(|&(f, k)| original[f][k]).collect(),
            merged: target,
        })
        .collect();

    for (k, f) in fits.iter_mut().enumerate() {
        if f.degenerate {
            continue;
        }
        let values = bps[k]
            .windows(2)
            .map(|w| refit[k].value(w[0], w[1] - 1))
            .collect::<Option<Vec<T>>>()
            .ok_or_else(|| MqsError::domain("merged segment lost feasibility"))?;
        f.fit = StepFunction::from_partition(bps[k].clone(), values)?;
        if f.cost.rule == CostRule::Koenker {
            f.cost.value = koenker_cost(z, &f.fit, f.beta)?;
        }
    }
    Ok(BoxplotResult {
        fits,
        merges,
        alpha: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiscale::multiscale_stat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn levels(q: f64) -> Vec<(QuantileLevel, f64)> {
        QUARTILES.iter().map(|&b| (QuantileLevel::new(b).unwrap(), q)).collect()
    }

    fn noisy_steps(rng: &mut ChaCha8Rng, means: &[(usize, f64, f64)]) -> Series<f64> {
        let mut v = Vec::new();
        for &(len, mu, sd) in means {
            for _ in 0..len {
                let u: f64 = rng.random_range(-1.0..1.0);
                let w: f64 = rng.random_range(-1.0..1.0);
                v.push(mu + sd * (u + w) * 1.2);
            }
        }
        Series::new(v).unwrap()
    }

    #[test]
    fn shifted_quantiles_share_changepoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = noisy_steps(&mut rng, &[(120, 0.0, 0.2), (150, 3.0, 0.2), (130, -1.0, 0.2)]);
        let out = msb_fit_with_thresholds(&z, &levels(1.0), CostRule::Koenker).unwrap();
        let first = out.fits[0].fit.breakpoints().to_vec();
        assert_eq!(first.len(), 4);
        for f in &out.fits {
            assert_eq!(f.fit.breakpoints(), &first[..]);
            assert!(multiscale_stat(&z, &f.fit, f.beta).unwrap() <= f.q_used);
        }
        assert_eq!(out.crossings(), 0);
    }

    #[test]
    fn variance_change_leaves_median_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = noisy_steps(&mut rng, &[(200, 0.0, 0.1), (200, 0.0, 2.0), (200, 0.0, 0.1)]);
        let out = msb_fit_with_thresholds(&z, &levels(1.0), CostRule::Koenker).unwrap();
        assert!(out.fits[1].s_hat < out.fits[0].s_hat);
        assert!(out.fits[1].s_hat < out.fits[2].s_hat);
    }

    #[test]
    fn disjoint_intervals_are_left_alone() {
        // changes only in the lower quartile at 100 and only in the upper at 300
        let mut v = Vec::new();
        for i in 0..400 {
            let u = [-1.0, -0.5, 0.0, 0.5, 1.0][i % 5] * 0.1;
            let lower_shift = if i >= 100 && i % 4 == 0 { -3.0 } else { 0.0 };
            let upper_shift = if i >= 300 && i % 4 == 2 { 3.0 } else { 0.0 };
            v.push(u + lower_shift + upper_shift + 1e-6 * i as f64);
        }
        let z = Series::new(v).unwrap();
        let plain: Vec<_> = levels(1.0)
            .into_iter()
            .map(|(b, q)| fit(&z, b, q, CostRule::Koenker).unwrap())
            .collect();
        let out = msb_fit_with_thresholds(&z, &levels(1.0), CostRule::Koenker).unwrap();
        let any_overlap = plain[0].cp_intervals.iter().any(|a| {
            plain[2]
                .cp_intervals
                .iter()
                .any(|b| a.0.max(b.0) <= a.1.min(b.1))
        });
        if !any_overlap && plain[1].s_hat == 1 {
            assert!(out.merges.is_empty());
            for (a, b) in plain.iter().zip(&out.fits) {
                assert_eq!(a.fit, b.fit);
            }
        }
    }

    #[test]
    fn merging_is_idempotent_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let segs: Vec<(usize, f64, f64)> = (0..rng.random_range(1..5))
                .map(|_| (rng.random_range(20..120), rng.random_range(-2.0..2.0), rng.random_range(0.1..0.8)))
                .collect();
            let z = noisy_steps(&mut rng, &segs);
            let out = msb_fit_with_thresholds(&z, &levels(0.8), CostRule::Koenker).unwrap();
            for f in &out.fits {
                assert!(multiscale_stat(&z, &f.fit, f.beta).unwrap() <= f.q_used);
                for ((l, r), b) in f.cp_intervals.iter().zip(f.fit.changepoints()) {
                    assert!(l <= b && b <= r);
                }
            }
            for m in &out.merges {
                for &f in &m.quantiles {
                    assert!(out.fits[f].fit.changepoints().contains(&m.merged));
                }
            }
            let again = merge_changepoints(&z, out.fits.clone()).unwrap();
            for (a, b) in out.fits.iter().zip(&again.fits) {
                assert_eq!(a.fit, b.fit);
            }
        }
    }

    #[test]
    fn levels_must_increase() {
        let z = Series::new(vec![1.0, 2.0, 3.0]).unwrap();
        let mut bad = levels(1.0);
        bad.swap(0, 2);
        assert!(msb_fit_with_thresholds(&z, &bad, CostRule::Koenker).is_err());
    }
}
