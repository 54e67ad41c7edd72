// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo studies over replicated scenarios.

use std::collections::BTreeMap;
use std::path::Path;

use mqseg::{fit, CostRule, QuantileLevel, ThresholdStore};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::metrics::{miae, v_measure};
use crate::scenario::{replicate_rng, ScenarioSpec};

/// How each replicate is fitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodConfig {
    pub beta: QuantileLevel,
    /// Nominal level; the threshold itself is passed separately.
    pub alpha: f64,
    pub cost_rule: CostRule,
}

impl MethodConfig {
    pub fn new(beta: f64, alpha: f64, cost_rule: CostRule) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(SimError::invalid(format!("alpha = {alpha} outside (0, 1)")));
        }
        Ok(Self {
            beta: QuantileLevel::new(beta)?,
            alpha,
            cost_rule,
        })
    }

    pub fn label(&self) -> String {
        format!("mqs-{}", self.cost_rule.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateMetrics {
    pub s_hat: usize,
    pub miae: f64,
    pub v: f64,
    /// Every true changepoint lies in its confidence interval; only decided
    /// when the segment count is right.
    pub ci_covered: Option<bool>,
    /// The true quantile function lies inside the band at every index.
    pub band_covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub scenario: String,
    pub method: String,
    pub beta: f64,
    pub alpha: f64,
    pub q: f64,
    pub reps: usize,
    pub n: usize,
    pub true_segments: usize,
    pub s_hat_counts: BTreeMap<usize, usize>,
    pub mean_miae: f64,
    pub mean_v: f64,
    /// Conditional on `s_hat == true_segments`; `None` if that never happened.
    pub ci_coverage: Option<f64>,
    /// Conditional on `s_hat == true_segments`.
    pub band_coverage: Option<f64>,
    pub replicates: Vec<ReplicateMetrics>,
}

impl BatchSummary {
    /// Fraction of replicates whose segment count satisfies `pred`.
    pub fn fraction(&self, pred: impl Fn(usize) -> bool) -> f64 {
        let hits: usize = self.s_hat_counts.iter().filter(|(&s, _)| pred(s)).map(|(_, &c)| c).sum();
        hits as f64 / self.reps as f64
    }

    /// Fractions for `<= S-2, S-1, S, S+1, >= S+2`.
    pub fn frequency_table(&self) -> [f64; 5] {
        let s = self.true_segments as i64;
        let bucket = |d: i64| {
            self.fraction(|k| {
                let off = k as i64 - s;
                match d {
                    -2 => off <= -2,
                    2 => off >= 2,
                    _ => off == d,
                }
            })
        };
        [bucket(-2), bucket(-1), bucket(0), bucket(1), bucket(2)]
    }
}

fn run_replicate(scenario: &ScenarioSpec, method: &MethodConfig, q: f64, seed: u64, r: u64) -> Result<ReplicateMetrics> {
    let n = scenario.n();
    let truth = scenario.truth(method.beta)?;
    let z = scenario.sample_with(&mut replicate_rng(seed, r))?;
    let res = fit(&z, method.beta, q, method.cost_rule)?;
    let band_covered = truth
        .index_values()
        .iter()
        .zip(&res.band)
        .all(|(&t, b)| b.contains(t));
    let ci_covered = (res.s_hat == truth.num_segments()).then(|| {
        truth
            .changepoints()
            .iter()
            .zip(&res.cp_intervals)
            .all(|(&b, &(l, r))| l <= b && b <= r)
    });
    Ok(ReplicateMetrics {
        s_hat: res.s_hat,
        miae: miae(&res.fit, &truth, n)?,
        v: v_measure(&res.fit, &truth, n)?.v,
        ci_covered,
        band_covered,
    })
}

/// Runs `reps` replicates in parallel. Replicate `r` draws from stream `r` of
/// `seed`, so the summary does not depend on the thread count.
pub fn run_batch(scenario: &ScenarioSpec, method: &MethodConfig, q: f64, reps: usize, seed: u64) -> Result<BatchSummary> {
    if reps == 0 {
        return Err(SimError::invalid("reps must be at least 1"));
    }
    let replicates = (0..reps as u64)
        .into_par_iter()
        .map(|r| run_replicate(scenario, method, q, seed, r))
        .collect::<Result<Vec<_>>>()?;

    let true_segments = scenario.signal.num_segments();
    let mut s_hat_counts = BTreeMap::new();
    let (mut sum_miae, mut sum_v) = (0.0, 0.0);
    let (mut exact, mut ci_hits, mut band_hits) = (0usize, 0usize, 0usize);
    for m in &replicates {
        *s_hat_counts.entry(m.s_hat).or_insert(0) += 1;
        sum_miae += m.miae;
        sum_v += m.v;
        if let Some(c) = m.ci_covered {
            exact += 1;
            ci_hits += usize::from(c);
            band_hits += usize::from(m.band_covered);
        }
    }
    let rate = |hits: usize| (exact > 0).then(|| hits as f64 / exact as f64);
    Ok(BatchSummary {
        scenario: scenario.name.clone(),
        method: method.label(),
        beta: method.beta.value(),
        alpha: method.alpha,
        q,
        reps,
        n: scenario.n(),
        true_segments,
        s_hat_counts,
        mean_miae: sum_miae / reps as f64,
        mean_v: sum_v / reps as f64,
        ci_coverage: rate(ci_hits),
        band_coverage: rate(band_hits),
        replicates,
    })
}

/// [`run_batch`] with the threshold taken from (or simulated into) `store`.
pub fn run_batch_with_store(
    scenario: &ScenarioSpec,
    method: &MethodConfig,
    reps: usize,
    seed: u64,
    store: &mut ThresholdStore,
) -> Result<BatchSummary> {
    let q = store.threshold(scenario.n(), method.beta, method.alpha)?;
    run_batch(scenario, method, q, reps, seed)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scenario: &'a str,
    method: &'a str,
    beta: f64,
    alpha: f64,
    q: f64,
    reps: usize,
    n: usize,
    true_segments: usize,
    freq_le_minus2: f64,
    freq_minus1: f64,
    freq_exact: f64,
    freq_plus1: f64,
    freq_ge_plus2: f64,
    mean_miae: f64,
    mean_v: f64,
    ci_coverage: Option<f64>,
    band_coverage: Option<f64>,
}

/// One CSV row per summary. Empty cells mark undefined coverage.
pub fn write_summaries_csv<W: std::io::Write>(out: W, summaries: &[BatchSummary]) -> Result<()> {
    let err = |source| SimError::Csv {
        path: Path::new("<output>").to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(out);
    for s in summaries {
        let f = s.frequency_table();
        w.serialize(CsvRow {
            scenario: &s.scenario,
            method: &s.method,
            beta: s.beta,
            alpha: s.alpha,
            q: s.q,
            reps: s.reps,
            n: s.n,
            true_segments: s.true_segments,
            freq_le_minus2: f[0],
            freq_minus1: f[1],
            freq_exact: f[2],
            freq_plus1: f[3],
            freq_ge_plus2: f[4],
            mean_miae: s.mean_miae,
            mean_v: s.mean_v,
            ci_coverage: s.ci_coverage,
            band_coverage: s.band_coverage,
        })
        .map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))?;
    Ok(())
}
