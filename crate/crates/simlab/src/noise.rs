// SPDX-License-Identifier: MIT OR Apache-2.0

//! Noise families.

use mqseg::DistributionSpec;
use rand::Rng;
use rand_distr::{Cauchy, ChiSquared, Distribution, StandardNormal, StudentT};

use crate::error::{Result, SimError};

/// Median of the chi-squared distribution with 3 degrees of freedom, obtained
/// by bisection on the closed-form cdf `erf(sqrt(x/2)) - sqrt(2x/pi) exp(-x/2)`
/// to full double precision. The unit tests re-derive it.
pub const CHI3_MEDIAN: f64 = 2.365_973_884_375_338;

/// I.i.d. error distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// `N(0, variance)`.
    Normal { variance: f64 },
    /// `t_3 * sigma / sqrt(3)`, which has variance `sigma^2`.
    StudentT3 { variance: f64 },
    /// Cauchy with location 0 and the given scale.
    Cauchy { scale: f64 },
    /// `(chi^2_3 - median) * sigma / sqrt(6)`, variance `sigma^2`, median 0.
    Chi3Centered { variance: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let p = match *self {
            Self::Normal { variance } | Self::StudentT3 { variance } | Self::Chi3Centered { variance } => variance,
            Self::Cauchy { scale } => scale,
        };
        if p > 0.0 && p.is_finite() {
            Ok(())
        } else {
            Err(SimError::invalid(format!("noise parameter {p} must be positive and finite")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::StudentT3 { .. } => "t3",
            Self::Cauchy { .. } => "cauchy",
            Self::Chi3Centered { .. } => "chi3",
        }
    }

    /// Draws one error term.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Normal { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            Self::StudentT3 { variance } => {
                let t = StudentT::new(3.0).expect("3 degrees of freedom");
                t.sample(rng) * (variance / 3.0).sqrt()
            }
            Self::Cauchy { scale } => Cauchy::new(0.0, scale).expect("validated scale").sample(rng),
            Self::Chi3Centered { variance } => {
                let c = ChiSquared::new(3.0).expect("3 degrees of freedom");
                (c.sample(rng) - CHI3_MEDIAN) * (variance / 6.0).sqrt()
            }
        }
    }

    /// The error distribution as a cdf, for quantile targets and signal
    /// characteristics.
    pub fn distribution(&self) -> DistributionSpec {
        match *self {
            Self::Normal { variance } => DistributionSpec::Normal {
                mean: 0.0,
                sd: variance.sqrt(),
            },
            Self::StudentT3 { variance } => DistributionSpec::StudentT {
                nu: 3.0,
                scale: (variance / 3.0).sqrt(),
            },
            Self::Cauchy { scale } => DistributionSpec::Cauchy { location: 0.0, scale },
            Self::Chi3Centered { variance } => DistributionSpec::ChiSquareCentered {
                nu: 3.0,
                scale: (variance / 6.0).sqrt(),
            },
        }
    }
}

/// Stationary Gaussian AR(1) errors `sqrt(1 - theta^2) X_i` with
/// `X_{i+1} = theta X_i + eps_i`, so every error is standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Spec {
    theta: f64,
}

impl Ar1Spec {
    pub fn new(theta: f64) -> Result<Self> {
        if theta.abs() < 1.0 {
            Ok(Self { theta })
        } else {
            Err(SimError::invalid(format!("AR(1) coefficient {theta} must lie in (-1, 1)")))
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Raw recursion `X_1..X_n`, started from its stationary law.
    pub fn sample_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut x = rng.sample::<f64, _>(StandardNormal) / (1.0 - self.theta * self.theta).sqrt();
        for _ in 0..n {
            out.push(x);
            x = self.theta * x + rng.sample::<f64, _>(StandardNormal);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Iid(NoiseSpec),
    Ar1(Ar1Spec),
}

impl NoiseModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Iid(s) => s.name(),
            Self::Ar1(_) => "ar1",
        }
    }

    /// Marginal distribution of a single error term.
    pub fn marginal(&self) -> DistributionSpec {
        match self {
            Self::Iid(s) => s.distribution(),
            Self::Ar1(_) => DistributionSpec::Normal { mean: 0.0, sd: 1.0 },
        }
    }
}
