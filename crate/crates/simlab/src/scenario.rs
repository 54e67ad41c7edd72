// SPDX-License-Identifier: MIT OR Apache-2.0

//! Test signals and data generation.

use mqseg::{QuantileLevel, Series, StepFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::noise::{Ar1Spec, NoiseModel, NoiseSpec};

/// A signal, a noise model and a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub signal: StepFunction<f64>,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>, signal: StepFunction<f64>, noise: NoiseModel, seed: u64) -> Result<Self> {
        if let NoiseModel::Iid(spec) = &noise {
            spec.validate()?;
        }
        Ok(Self {
            name: name.into(),
            signal,
            noise,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.signal.n()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// The beta-quantile function of the observations: the signal shifted by
    /// the beta-quantile of the error distribution.
    pub fn truth(&self, beta: QuantileLevel) -> Result<StepFunction<f64>> {
        let shift = self.noise.marginal().quantile(beta);
        Ok(self.signal.map_values(|v| v + shift)?)
    }

    /// One draw of the observations using `rng`.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Series<f64>> {
        let mu = self.signal.index_values();
        let z: Vec<f64> = match self.noise {
            NoiseModel::Iid(spec) => mu.iter().map(|m| m + spec.sample(rng)).collect(),
            NoiseModel::Ar1(spec) => {
                let s = (1.0 - spec.theta() * spec.theta()).sqrt();
                mu.iter().zip(spec.sample_path(mu.len(), rng)).map(|(m, x)| m + s * x).collect()
            }
        };
        Ok(Series::new(z)?)
    }
}

/// Random stream for replicate `replicate` of a study seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// `Z_i = signal(x_i) + eps_i` with i.i.d. errors.
pub fn gen_additive(spec: &ScenarioSpec) -> Result<Series<f64>> {
    match spec.noise {
        NoiseModel::Iid(_) => spec.sample_with(&mut replicate_rng(spec.seed, 0)),
        NoiseModel::Ar1(_) => Err(SimError::invalid("gen_additive needs i.i.d. noise")),
    }
}

/// `Y_i = signal(x_i) + sqrt(1 - theta^2) X_i` with AR(1) errors `X`.
pub fn gen_ar1(spec: &ScenarioSpec) -> Result<Series<f64>> {
    match spec.noise {
        NoiseModel::Ar1(_) => spec.sample_with(&mut replicate_rng(spec.seed, 0)),
        NoiseModel::Iid(_) => Err(SimError::invalid("gen_ar1 needs AR(1) noise")),
    }
}

/// Dispatches on the noise model.
pub fn generate(spec: &ScenarioSpec) -> Result<Series<f64>> {
    spec.sample_with(&mut replicate_rng(spec.seed, 0))
}

/// Values 0, 1, 0 on `[1, 125]`, `[126, 375]`, `[376, 500]`.
pub fn bump500() -> StepFunction<f64> {
    StepFunction::new(vec![1, 126, 376, 501], vec![0.0, 1.0, 0.0]).expect("valid signal")
}

/// Values 0, 1, 0 on `[1, 300]`, `[301, 400]`, `[401, 700]`.
pub fn bump700() -> StepFunction<f64> {
    StepFunction::new(vec![1, 301, 401, 701], vec![0.0, 1.0, 0.0]).expect("valid signal")
}

/// `jumps` equally spaced alternating jumps of height 1 over `n` points.
pub fn many_bumps(n: usize, jumps: usize) -> Result<StepFunction<f64>> {
    if n < jumps + 1 {
        return Err(SimError::invalid(format!("{n} points cannot carry {jumps} jumps")));
    }
    let segments = jumps + 1;
    let mut breakpoints: Vec<usize> = (0..segments).map(|s| 1 + s * n / segments).collect();
    breakpoints.push(n + 1);
    let values = (0..segments).map(|s| (s % 2) as f64).collect();
    Ok(StepFunction::new(breakpoints, values)?)
}

/// Names accepted by [`scenario_by_name`].
pub const SCENARIO_NAMES: &[&str] = &[
    "constant500",
    "bump500",
    "bump500-t3",
    "bump500-cauchy",
    "bump500-chi3",
    "bump500-ar1",
    "bump700",
    "bumps10000",
];

/// Named scenarios. Gaussian variants use unit variance; the heavy-tailed
/// ones use variance 0.04 (Cauchy: scale 0.02); `bump500-ar1` uses
/// `theta = 0.3`.
pub fn scenario_by_name(name: &str, seed: u64) -> Option<ScenarioSpec> {
    let unit = NoiseModel::Iid(NoiseSpec::Normal { variance: 1.0 });
    let (signal, noise) = match name {
        "constant500" => (StepFunction::constant(500, 0.0).ok()?, unit),
        "bump500" => (bump500(), unit),
        "bump500-t3" => (bump500(), NoiseModel::Iid(NoiseSpec::StudentT3 { variance: 0.04 })),
        "bump500-cauchy" => (bump500(), NoiseModel::Iid(NoiseSpec::Cauchy { scale: 0.02 })),
        "bump500-chi3" => (bump500(), NoiseModel::Iid(NoiseSpec::Chi3Centered { variance: 0.04 })),
        "bump500-ar1" => (bump500(), NoiseModel::Ar1(Ar1Spec::new(0.3).ok()?)),
        "bump700" => (bump700(), unit),
        "bumps10000" => (many_bumps(10_000, 50).ok()?, unit),
        _ => return None,
    };
    ScenarioSpec::new(name, signal, noise, seed).ok()
}
