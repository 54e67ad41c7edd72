// SPDX-License-Identifier: MIT OR Apache-2.0
#![forbid(unsafe_code)]

//! Multiscale quantile segmentation.
//!
//! Fits a piecewise constant beta-quantile function to a series with the
//! smallest number of segments that passes a multiscale test at every scale,
//! and returns simultaneous confidence intervals for the changepoints and a
//! confidence band for the function.
//!
//! ```
//! use mqseg::{fit, CostRule, QuantileLevel, Series};
//!
//! let z: Vec<f64> = (0..200)
//!     .map(|i| (i as f64 * 0.37).sin() * 0.3 + if (80..140).contains(&i) { 2.0 } else { 0.0 })
//!     .collect();
//! let z = Series::new(z).unwrap();
//! let r = fit(&z, QuantileLevel::MEDIAN, 1.0, CostRule::Koenker).unwrap();
//! assert_eq!(r.s_hat, 3);
//! for (k, (lo, hi)) in r.cp_intervals.iter().enumerate() {
//!     println!("changepoint {} in [{lo}, {hi}]", k + 1);
//! }
//! ```

pub mod error;
pub mod model;
pub mod msb;
pub mod multiscale;
pub mod quantile_heap;
pub mod scalar;
pub mod segmentation;
pub mod theory_bounds;
pub mod threshold;

pub use error::{MqsError, Result};
pub use model::{runs_count, ones_count, transform, BinarySeries, QuantileLevel, Series, StepFunction};
pub use msb::{merge_changepoints, msb_fit, msb_fit_with_thresholds, BoxplotResult, MergeRecord, QUARTILES};
pub use multiscale::{
    bernoulli_divergence, box_ranks, confidence_box, invert_llr, local_llr, local_stat, multiscale_stat, penalty,
    BoxRanks, ConfidenceBox, InfeasibleScale, LocalThresholdPair, Penalty, ScaleTable, ValueInterval,
};
pub use quantile_heap::DoubleHeap;
pub use scalar::Scalar;
pub use segmentation::{
    brute_force_fit, changepoint_intervals, fit, koenker_cost, runs_log_density, BruteForce, CostRule, CostValue, RunsMean,
    SegmentationResult,
};
pub use theory_bounds::{
    gamma_ns, location_rate_bound, over_bound, quantile_jump, signal_characteristics, under_bound, DistributionSpec,
    JumpCharacteristics, SignalCharacteristics,
};
pub use threshold::{quantile_of, simulate_mn, NullSample, ThresholdKey, ThresholdStore, ThresholdTable};

pub type Series64 = Series<f64>;
pub type Series32 = Series<f32>;
pub type StepFunction64 = StepFunction<f64>;
pub type StepFunction32 = StepFunction<f32>;
pub type SegmentationResult64 = SegmentationResult<f64>;
pub type SegmentationResult32 = SegmentationResult<f32>;
