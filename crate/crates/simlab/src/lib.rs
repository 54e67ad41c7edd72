// SPDX-License-Identifier: MIT OR Apache-2.0
#![forbid(unsafe_code)]

//! Synthetic scenarios, evaluation metrics and batch studies for `mqseg`.

pub mod batch;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod scenario;

pub use batch::{run_batch, run_batch_with_store, write_summaries_csv, BatchSummary, MethodConfig, ReplicateMetrics};
pub use error::{Result, SimError};
pub use metrics::{miae, v_measure, VMeasure};
pub use noise::{Ar1Spec, NoiseModel, NoiseSpec, CHI3_MEDIAN};
pub use scenario::{
    bump500, bump700, gen_additive, gen_ar1, generate, many_bumps, replicate_rng, scenario_by_name, ScenarioSpec,
    SCENARIO_NAMES,
};
