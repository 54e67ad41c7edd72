// SPDX-License-Identifier: MIT OR Apache-2.0

use anyhow::anyhow;
use mqseg::threshold::default_table_path;
use mqseg::{
    merge_changepoints, CostRule, QuantileLevel, RunsMean, Series, StepFunction, ThresholdKey, ThresholdStore, QUARTILES,
};
use mqseg_simlab::{miae, run_batch_with_store, scenario_by_name, v_measure, write_summaries_csv, MethodConfig, SCENARIO_NAMES};

use crate::io::{emit, read_column, CliError, CliResult};
use crate::output::{fit_csv, fit_json, msb_csv, msb_json, EvalDoc, FORMAT_VERSION};
use crate::{BenchArgs, CostArg, CostArgs, EvalArgs, FitArgs, Format, MsbArgs, RunsMeanArg, SimulateArgs, ThresholdArgs};

fn cost_rule(c: &CostArgs) -> CostRule {
    match c.cost {
        CostArg::Koenker => CostRule::Koenker,
        CostArg::Runs => CostRule::Runs(match c.runs_mean {
            RunsMeanArg::Classical => RunsMean::Classical,
            RunsMeanArg::Shifted => RunsMean::Shifted,
        }),
    }
}

fn open_store(path: Option<&std::path::Path>) -> CliResult<ThresholdStore> {
    let path = path.map_or_else(default_table_path, ToOwned::to_owned);
    Ok(ThresholdStore::open(path)?)
}

/// Critical value for one level: explicit, or looked up / simulated.
fn resolve_q(t: &ThresholdArgs, store: &mut Option<ThresholdStore>, n: usize, beta: QuantileLevel) -> CliResult<f64> {
    if let Some(q) = t.q {
        if q.is_nan() {
            return Err(CliError::usage(anyhow!("--q must be a number")));
        }
        return Ok(q);
    }
    let alpha = t.alpha.expect("clap requires --alpha or --q");
    if store.is_none() {
        *store = Some(open_store(t.threshold_table.as_deref())?);
    }
    let key = ThresholdKey {
        n,
        beta: beta.value(),
        alpha,
        reps: t.reps,
        seed: t.seed,
    };
    Ok(store.as_mut().expect("just opened").get_or_simulate(key)?)
}

fn read_series(path: &std::path::Path) -> CliResult<Series<f64>> {
    Ok(Series::new(read_column(path)?)?)
}

pub fn fit(a: FitArgs) -> CliResult {
    let beta = QuantileLevel::new(a.beta)?;
    let z = read_series(&a.input)?;
    let q = resolve_q(&a.threshold, &mut None, z.len(), beta)?;
    let r = mqseg::fit(&z, beta, q, cost_rule(&a.cost))?;
    let text = match a.format {
        Format::Json => fit_json(&r, a.threshold.alpha),
        Format::Csv => fit_csv(&r),
    };
    emit(a.out.as_deref(), text.as_bytes())
}

pub fn msb(a: MsbArgs) -> CliResult {
    let z = read_series(&a.input)?;
    let mut store = None;
    let rule = cost_rule(&a.cost);
    let mut fits = Vec::with_capacity(QUARTILES.len());
    for b in QUARTILES {
        let beta = QuantileLevel::new(b)?;
        let q = resolve_q(&a.threshold, &mut store, z.len(), beta)?;
        fits.push(mqseg::fit(&z, beta, q, rule)?);
    }
    let mut r = merge_changepoints(&z, fits)?;
    r.alpha = a.threshold.alpha;
    let text = match a.format {
        Format::Json => msb_json(&r),
        Format::Csv => msb_csv(&r),
    };
    emit(a.out.as_deref(), text.as_bytes())
}

pub fn simulate(a: SimulateArgs) -> CliResult {
    let beta = QuantileLevel::new(a.beta)?;
    let mut store = open_store(a.threshold_table.as_deref())?;
    let mut text = String::new();
    for &alpha in &a.alpha {
        let key = ThresholdKey {
            n: a.n,
            beta: beta.value(),
            alpha,
            reps: a.reps,
            seed: a.seed,
        };
        let q = store.get_or_simulate(key)?;
        text.push_str(&format!("{},{:?},{:?},{},{},{:?}\n", a.n, beta.value(), alpha, a.reps, a.seed, q));
    }
    emit(None, text.as_bytes())
}

pub fn bench(a: BenchArgs) -> CliResult {
    let Some(scenario) = scenario_by_name(&a.scenario, a.seed) else {
        return Err(CliError::usage(anyhow!(
            "unknown scenario `{}`; valid names: {}",
            a.scenario,
            SCENARIO_NAMES.join(", ")
        )));
    };
    let method = MethodConfig::new(a.beta, a.alpha, cost_rule(&a.cost))?;
    let mut store = open_store(a.threshold_table.as_deref())?;
    let summary = run_batch_with_store(&scenario, &method, a.reps, a.seed, &mut store)?;
    let mut buf = Vec::new();
    write_summaries_csv(&mut buf, &[summary])?;
    emit(a.out.as_deref(), &buf)
}

pub fn eval(a: EvalArgs) -> CliResult {
    let est = read_column(&a.est)?;
    let truth = read_column(&a.truth)?;
    if est.len() != truth.len() {
        return Err(CliError::usage(anyhow!(
            "estimate has {} values, truth has {}",
            est.len(),
            truth.len()
        )));
    }
    let est = StepFunction::from_index_values(&est)?;
    let truth = StepFunction::from_index_values(&truth)?;
    let n = est.n();
    let v = v_measure(&est, &truth, n)?;
    let doc = EvalDoc {
        format_version: FORMAT_VERSION,
        n,
        miae: miae(&est, &truth, n)?,
        homogeneity: v.homogeneity,
        completeness: v.completeness,
        v_measure: v.v,
    };
    let text = match a.format {
        Format::Json => doc.json(),
        Format::Csv => doc.csv(),
    };
    emit(a.out.as_deref(), text.as_bytes())
}
