// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo properties of the estimators on simulated scenarios.

use mqseg::{msb_fit, CostRule, QuantileLevel, ThresholdStore};
use mqseg_simlab::{
    bump500, replicate_rng, run_batch, scenario_by_name, MethodConfig, NoiseModel, NoiseSpec, ScenarioSpec,
};

#[test]
fn boxplot_curves_rarely_cross() {
    let scenario = ScenarioSpec::new(
        "bump500-small-noise",
        bump500(),
        NoiseModel::Iid(NoiseSpec::Normal { variance: 0.04 }),
        0,
    )
    .unwrap();
    let mut store = ThresholdStore::in_memory();
    let runs = 200;
    let mut crossing_runs = 0;
    for r in 0..runs {
        let z = scenario.sample_with(&mut replicate_rng(99, r)).unwrap();
        let out = msb_fit(&z, 0.05, &mut store, CostRule::Koenker).unwrap();
        assert_eq!(out.simultaneous_level(), Some(1.0 - 3.0 * 0.05));
        for f in &out.fits {
            let stat = mqseg::multiscale_stat(&z, &f.fit, f.beta).unwrap();
            assert!(stat <= f.q_used, "merged fit left its feasible set");
        }
        crossing_runs += usize::from(out.crossings() > 0);
    }
    assert!(
        crossing_runs as f64 <= 0.01 * runs as f64,
        "{crossing_runs} of {runs} runs crossed"
    );
}

#[test]
fn bump500_overestimation_stays_near_level() {
    let scenario = scenario_by_name("bump500", 1).unwrap();
    let method = MethodConfig::new(0.5, 0.1, CostRule::Koenker).unwrap();
    let mut store = ThresholdStore::in_memory();
    let q = store.threshold(500, QuantileLevel::MEDIAN, 0.1).unwrap();
    let summary = run_batch(&scenario, &method, q, 300, 17).unwrap();
    assert!(summary.fraction(|s| s > 3) <= 0.12);
    let ci = summary.ci_coverage.unwrap();
    assert!(ci >= 1.0 - 0.1 - 0.03, "CI coverage {ci}");
}

#[test]
fn combined_bound_holds_for_two_segments() {
    use mqseg::{over_bound, signal_characteristics, under_bound, StepFunction};

    let signal = StepFunction::new(vec![1, 251, 501], vec![0.0, 3.0]).unwrap();
    let noise = NoiseSpec::Normal { variance: 1.0 };
    let scenario = ScenarioSpec::new("step500", signal.clone(), NoiseModel::Iid(noise), 0).unwrap();
    let alpha = 0.1;
    let method = MethodConfig::new(0.5, alpha, CostRule::Koenker).unwrap();
    let mut store = ThresholdStore::in_memory();
    let q = store.threshold(500, QuantileLevel::MEDIAN, alpha).unwrap();
    let d = noise.distribution();
    let c = signal_characteristics(&signal, &d, &d, QuantileLevel::MEDIAN);
    let bound = 1.0 - over_bound(alpha, 0).unwrap() - under_bound(500, 2, c.lambda, c.xi.unwrap(), q);
    assert!(bound > 0.85, "bound {bound} carries no information");
    for seed in [1, 2] {
        let summary = run_batch(&scenario, &method, q, 200, seed).unwrap();
        let exact = summary.fraction(|s| s == 2);
        assert!(exact >= bound, "P(S_hat = S) = {exact} below {bound}");
    }
}
