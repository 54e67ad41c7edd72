// SPDX-License-Identifier: MIT OR Apache-2.0

//! Accuracy metrics for an estimated step function against the truth.

use std::collections::HashMap;

use mqseg::{Scalar, StepFunction};

use crate::error::{Result, SimError};

fn check_len<T: Scalar>(est: &StepFunction<T>, truth: &StepFunction<T>, n: usize) -> Result<()> {
    if est.n() != n || truth.n() != n {
        return Err(SimError::invalid(format!(
            "functions cover {} and {} points, expected {n}",
            est.n(),
            truth.n()
        )));
    }
    Ok(())
}

/// Mean absolute error `(1/n) sum |est(x_i) - truth(x_i)|`.
pub fn miae<T: Scalar>(est: &StepFunction<T>, truth: &StepFunction<T>, n: usize) -> Result<f64> {
    check_len(est, truth, n)?;
    let sum: f64 = est
        .index_values()
        .iter()
        .zip(truth.index_values())
        .map(|(a, b)| (a.to_f64_lossy() - b.to_f64_lossy()).abs())
        .sum();
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VMeasure {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v: f64,
}

/// Entropy based agreement of the segment partitions, natural logarithms.
/// Classes are the true segments, clusters the estimated ones.
pub fn v_measure<T: Scalar>(est: &StepFunction<T>, truth: &StepFunction<T>, n: usize) -> Result<VMeasure> {
    check_len(est, truth, n)?;
    Ok(v_measure_labels(&truth.labels(), &est.labels()))
}

fn entropy<'a>(counts: impl Iterator<Item = &'a usize>, total: f64) -> f64 {
    counts
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// `H(A | B)` from the joint table.
fn conditional_entropy(joint: &HashMap<(usize, usize), usize>, b_counts: &HashMap<usize, usize>, b_of: impl Fn(&(usize, usize)) -> usize, total: f64) -> f64 {
    joint
        .iter()
        .map(|(key, &c)| {
            let nb = b_counts[&b_of(key)] as f64;
            -(c as f64 / total) * (c as f64 / nb).ln()
        })
        .sum()
}

pub(crate) fn v_measure_labels(classes: &[usize], clusters: &[usize]) -> VMeasure {
    let total = classes.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut class_counts: HashMap<usize, usize> = HashMap::new();
    let mut cluster_counts: HashMap<usize, usize> = HashMap::new();
    for (&c, &k) in classes.iter().zip(clusters) {
        *joint.entry((c, k)).or_default() += 1;
        *class_counts.entry(c).or_default() += 1;
        *cluster_counts.entry(k).or_default() += 1;
    }
    let h_c = entropy(class_counts.values(), total);
    let h_k = entropy(cluster_counts.values(), total);
    let homogeneity = if h_c <= 0.0 {
        1.0
    } else {
        1.0 - conditional_entropy(&joint, &cluster_counts, |&(_, k)| k, total) / h_c
    };
    let completeness = if h_k <= 0.0 {
        1.0
    } else {
        1.0 - conditional_entropy(&joint, &class_counts, |&(c, _)| c, total) / h_k
    };
    let v = if homogeneity + completeness <= 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    VMeasure {
        homogeneity: homogeneity.clamp(0.0, 1.0),
        completeness: completeness.clamp(0.0, 1.0),
        v: v.clamp(0.0, 1.0),
    }
}
