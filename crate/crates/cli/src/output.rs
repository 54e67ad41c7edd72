// SPDX-License-Identifier: MIT OR Apache-2.0

//! Serialized forms of results. Indices are 1-based; infinite band ends are
//! `null` in JSON and `inf` / `-inf` in CSV.

use std::fmt::Write as _;

use mqseg::{BoxplotResult, CostRule, RunsMean, SegmentationResult};
use serde::Serialize;

pub const FORMAT_VERSION: u32 = 1;

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn rule_label(rule: CostRule) -> &'static str {
    match rule {
        CostRule::Koenker => "koenker",
        CostRule::Runs(RunsMean::Classical) => "runs-classical",
        CostRule::Runs(RunsMean::Shifted) => "runs-shifted",
    }
}

#[derive(Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub value: f64,
}

#[derive(Serialize)]
pub struct ChangepointInterval {
    pub lower: usize,
    pub upper: usize,
    pub tau_lower: f64,
    pub tau_upper: f64,
}

#[derive(Serialize)]
pub struct BandEntry {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Serialize)]
pub struct FitBody {
    pub n: usize,
    pub beta: f64,
    pub alpha: Option<f64>,
    pub q: f64,
    pub cost_rule: &'static str,
    pub cost_value: f64,
    pub s_hat: usize,
    pub degenerate: bool,
    pub segments: Vec<Segment>,
    pub cp_intervals: Vec<ChangepointInterval>,
    pub band: Vec<BandEntry>,
}

impl FitBody {
    pub fn new(r: &SegmentationResult<f64>, alpha: Option<f64>) -> Self {
        let taus = mqseg::changepoint_intervals(r);
        Self {
            n: r.n(),
            beta: r.beta.value(),
            alpha,
            q: r.q_used,
            cost_rule: rule_label(r.cost_rule()),
            cost_value: r.cost.value,
            s_hat: r.s_hat,
            degenerate: r.degenerate,
            segments: r
                .fit
                .segments()
                .map(|(start, end, value)| Segment { start, end, value })
                .collect(),
            cp_intervals: r
                .cp_intervals
                .iter()
                .zip(taus)
                .map(|(&(lower, upper), (tau_lower, tau_upper))| ChangepointInterval {
                    lower,
                    upper,
                    tau_lower,
                    tau_upper,
                })
                .collect(),
            band: r
                .band
                .iter()
                .map(|b| BandEntry {
                    lower: finite(b.lower),
                    upper: finite(b.upper),
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct FitDoc<'a> {
    format_version: u32,
    #[serde(flatten)]
    body: &'a FitBody,
}

pub fn fit_json(r: &SegmentationResult<f64>, alpha: Option<f64>) -> String {
    let body = FitBody::new(r, alpha);
    let mut s = serde_json::to_string_pretty(&FitDoc {
        format_version: FORMAT_VERSION,
        body: &body,
    })
    .expect("plain data serializes");
    s.push('\n');
    s
}

/// `index,tau,value,band_lower,band_upper`.
pub fn fit_csv(r: &SegmentationResult<f64>) -> String {
    let n = r.n() as f64;
    let mut s = String::from("index,tau,value,band_lower,band_upper\n");
    for (i, (v, b)) in r.fit.index_values().iter().zip(&r.band).enumerate() {
        let _ = writeln!(s, "{},{},{},{},{}", i + 1, i as f64 / n, v, b.lower, b.upper);
    }
    s
}

#[derive(Serialize)]
struct Merge {
    betas: Vec<f64>,
    original: Vec<usize>,
    merged: usize,
}

#[derive(Serialize)]
struct MsbDoc {
    format_version: u32,
    alpha: Option<f64>,
    simultaneous_level: Option<f64>,
    crossings: usize,
    fits: std::collections::BTreeMap<String, FitBody>,
    merges: Vec<Merge>,
}

pub fn msb_json(r: &BoxplotResult<f64>) -> String {
    let betas: Vec<f64> = r.fits.iter().map(|f| f.beta.value()).collect();
    let doc = MsbDoc {
        format_version: FORMAT_VERSION,
        alpha: r.alpha,
        simultaneous_level: r.simultaneous_level(),
        crossings: r.crossings(),
        fits: r
            .fits
            .iter()
            .map(|f| (f.beta.value().to_string(), FitBody::new(f, r.alpha)))
            .collect(),
        merges: r
            .merges
            .iter()
            .map(|m| Merge {
                betas: m.quantiles.iter().map(|&k| betas[k]).collect(),
                original: m.original.clone(),
                merged: m.merged,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

/// `index,tau` then `value,band_lower,band_upper` per quantile, suffixed by
/// the level.
pub fn msb_csv(r: &BoxplotResult<f64>) -> String {
    let mut s = String::from("index,tau");
    for f in &r.fits {
        let b = f.beta.value();
        let _ = write!(s, ",value_{b},band_lower_{b},band_upper_{b}");
    }
    s.push('\n');
    let curves: Vec<Vec<f64>> = r.fits.iter().map(|f| f.fit.index_values()).collect();
    let n = curves.first().map_or(0, Vec::len);
    for i in 0..n {
        let _ = write!(s, "{},{}", i + 1, i as f64 / n as f64);
        for (f, c) in r.fits.iter().zip(&curves) {
            let _ = write!(s, ",{},{},{}", c[i], f.band[i].lower, f.band[i].upper);
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
pub struct EvalDoc {
    pub format_version: u32,
    pub n: usize,
    pub miae: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

impl EvalDoc {
    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn csv(&self) -> String {
        format!(
            "n,miae,homogeneity,completeness,v_measure\n{},{},{},{},{}\n",
            self.n, self.miae, self.homogeneity, self.completeness, self.v_measure
        )
    }
}
