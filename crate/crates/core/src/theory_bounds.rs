// SPDX-License-Identifier: MIT OR Apache-2.0

//! Finite-sample error bounds and the signal characteristics they depend on.
//!
//! Every probability bound is clamped to `[0, 1]`; a clamped value carries no
//! information.

use statrs::distribution::{Cauchy, ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{MqsError, Result};
use crate::model::{QuantileLevel, StepFunction};
use crate::scalar::Scalar;

/// A distribution given by its cdf.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Normal { mean: f64, sd: f64 },
    /// Student t with `nu` degrees of freedom, centred at zero, times `scale`.
    StudentT { nu: f64, scale: f64 },
    Cauchy { location: f64, scale: f64 },
    /// `(X - median(X)) * scale` for `X ~ chi^2(nu)`.
    ChiSquareCentered { nu: f64, scale: f64 },
    /// Right-continuous step cdf of the samples (kept sorted).
    Empirical(Vec<f64>),
}

impl DistributionSpec {
    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
            return Err(MqsError::domain("empirical distribution needs finite samples"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self::Empirical(samples))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal { mean, sd } => normal(*mean, *sd).cdf(x),
            Self::StudentT { nu, scale } => student(*nu).cdf(x / scale),
            Self::Cauchy { location, scale } => Cauchy::new(*location, *scale).expect("valid cauchy").cdf(x),
            Self::ChiSquareCentered { nu, scale } => {
                let chi = chi_squared(*nu);
                chi.cdf(x / scale + chi.inverse_cdf(0.5))
            }
            Self::Empirical(s) => s.partition_point(|&v| v <= x) as f64 / s.len() as f64,
        }
    }

    /// `inf { theta : F(theta) >= beta }`.
    pub fn quantile(&self, beta: QuantileLevel) -> f64 {
        let b = beta.value();
        match self {
            Self::Normal { mean, sd } => normal(*mean, *sd).inverse_cdf(b),
            Self::StudentT { nu, scale } => scale * student(*nu).inverse_cdf(b),
            Self::Cauchy { location, scale } => Cauchy::new(*location, *scale).expect("valid cauchy").inverse_cdf(b),
            Self::ChiSquareCentered { nu, scale } => {
                let chi = chi_squared(*nu);
                (chi.inverse_cdf(b) - chi.inverse_cdf(0.5)) * scale
            }
            Self::Empirical(s) => s[beta.empirical_rank(s.len()) - 1],
        }
    }
}

fn normal(mean: f64, sd: f64) -> Normal {
    Normal::new(mean, sd).expect("valid normal")
}

fn student(nu: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, nu).expect("valid student t")
}

fn chi_squared(nu: f64) -> ChiSquared {
    ChiSquared::new(nu).expect("valid chi-squared")
}

/// `|F(theta_beta + delta) - beta|`.
pub fn quantile_jump(f: &DistributionSpec, beta: QuantileLevel, delta: f64) -> f64 {
    (f.cdf(f.quantile(beta) + delta) - beta.value()).abs().min(1.0)
}

/// Characteristics of one jump between consecutive segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpCharacteristics {
    /// `min` of the two adjacent segment lengths, in time units.
    pub lambda: f64,
    pub xi: f64,
    /// Value after the jump minus value before it.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalCharacteristics {
    /// Minimal segment length in time units.
    pub lambda: f64,
    /// Minimal quantile jump; absent for a constant signal.
    pub xi: Option<f64>,
    pub jumps: Vec<JumpCharacteristics>,
}

pub fn signal_characteristics<T: Scalar>(
    f: &StepFunction<T>,
    f_min: &DistributionSpec,
    f_max: &DistributionSpec,
    beta: QuantileLevel,
) -> SignalCharacteristics {
    let n = f.n() as f64;
    let lengths: Vec<f64> = f.breakpoints().windows(2).map(|w| (w[1] - w[0]) as f64 / n).collect();
    let jumps: Vec<JumpCharacteristics> = f
        .values()
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let delta = w[1].to_f64_lossy() - w[0].to_f64_lossy();
            JumpCharacteristics {
                lambda: lengths[k].min(lengths[k + 1]),
                xi: quantile_jump(f_min, beta, -delta).min(quantile_jump(f_max, beta, delta)),
                delta,
            }
        })
        .collect();
    SignalCharacteristics {
        lambda: lengths.iter().copied().fold(f64::INFINITY, f64::min),
        xi: jumps.iter().map(|j| j.xi).reduce(f64::min),
        jumps,
    }
}

/// Bound `alpha^(floor(s / 2) + 1)` on overestimating the segment count by
/// more than `s`.
pub fn over_bound(alpha: f64, s: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MqsError::domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    Ok(alpha.powi((s / 2 + 1) as i32))
}

fn exponential_bound(n: usize, segments: usize, scale: f64, xi: f64, q: f64) -> f64 {
    if segments <= 1 {
        return 0.0;
    }
    let nf = n as f64;
    let head = 4.0 * (segments - 1) as f64 * (-nf * scale * xi * xi).exp();
    let inner = 2.0 * (nf * scale).sqrt() * xi * (q / 2f64.sqrt() + (2.0 * std::f64::consts::E / scale).ln().sqrt());
    let v = head * (inner.exp() + 1.0);
    if v.is_nan() {
        1.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Bound on underestimating the segment count.
pub fn under_bound(n: usize, segments: usize, lambda: f64, xi: f64, q: f64) -> f64 {
    exponential_bound(n, segments, lambda, xi, q)
}

/// Bound on some true changepoint being farther than `eps` from every
/// estimated one.
pub fn location_rate_bound(n: usize, segments: usize, xi: f64, q: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(MqsError::domain(format!("eps = {eps} outside (0, 1]")));
    }
    Ok(exponential_bound(n, segments, eps, xi, q))
}

/// Lower bound factor for detecting jump `s`; the product over jumps bounds
/// `P(S_hat >= S)` from below.
pub fn gamma_ns(n: usize, lambda_s: f64, xi_s: f64, q: f64) -> f64 {
    let nf = n as f64;
    let margin = ((2.0 * nf * lambda_s).sqrt() * xi_s - q - (2.0 * (2.0 * std::f64::consts::E / lambda_s).ln()).sqrt()).max(0.0);
    let inner = 1.0 - 2.0 * (-margin * margin / 2.0).exp() - 2.0 * (-nf * lambda_s * xi_s * xi_s).exp();
    inner.max(0.0).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const STD_NORMAL: DistributionSpec = DistributionSpec::Normal { mean: 0.0, sd: 1.0 };

    fn beta(b: f64) -> QuantileLevel {
        QuantileLevel::new(b).unwrap()
    }

    /// Abramowitz-Stegun 7.1.26 is too coarse; use the continued series of
    /// erf instead.
    fn phi(x: f64) -> f64 {
        let z = x / 2f64.sqrt();
        let mut term = z;
        let mut sum = z;
        for k in 1..200 {
            term *= -z * z / k as f64;
            sum += term / (2 * k + 1) as f64;
        }
        0.5 + sum / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn quantile_jump_examples() {
        assert_abs_diff_eq!(quantile_jump(&STD_NORMAL, beta(0.5), 0.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(quantile_jump(&STD_NORMAL, beta(0.3), 1e6), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(quantile_jump(&STD_NORMAL, beta(0.5), 1.0), phi(1.0) - 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(quantile_jump(&STD_NORMAL, beta(0.5), 1.0), 0.34134, epsilon = 1e-5);
    }

    #[test]
    fn quantile_jump_grows_with_distance() {
        let families = [
            STD_NORMAL,
            DistributionSpec::StudentT { nu: 3.0, scale: 0.5 },
            DistributionSpec::Cauchy { location: 1.0, scale: 0.02 },
            DistributionSpec::ChiSquareCentered { nu: 3.0, scale: 0.2 / 6f64.sqrt() },
        ];
        for f in &families {
            for b in [0.25, 0.5, 0.75] {
                let mut prev = (0.0, 0.0);
                for k in 1..60 {
                    let d = k as f64 * 0.05;
                    let up = quantile_jump(f, beta(b), d);
                    let down = quantile_jump(f, beta(b), -d);
                    assert!(up >= prev.0 - 1e-12 && down >= prev.1 - 1e-12);
                    prev = (up, down);
                }
            }
        }
    }

    #[test]
    fn chi_square_median_constant() {
        let f = DistributionSpec::ChiSquareCentered { nu: 3.0, scale: 1.0 };
        assert_abs_diff_eq!(f.cdf(0.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(chi_squared(3.0).inverse_cdf(0.5), 2.365_973_884_375_338, epsilon = 1e-9);
    }

    #[test]
    fn empirical_cdf_is_right_continuous() {
        let f = DistributionSpec::empirical(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(f.cdf(2.0), 0.75);
        assert_eq!(f.cdf(1.999), 0.25);
        assert_eq!(f.quantile(beta(0.5)), 2.0);
        assert_eq!(f.quantile(beta(0.25)), 1.0);
        assert!(DistributionSpec::empirical(vec![]).is_err());
    }

    #[test]
    fn characteristics_examples() {
        let f = StepFunction::new(vec![1, 51, 101], vec![0.0, 1.0]).unwrap();
        let c = signal_characteristics(&f, &STD_NORMAL, &STD_NORMAL, beta(0.5));
        assert_abs_diff_eq!(c.lambda, 0.5);
        assert_abs_diff_eq!(c.xi.unwrap(), 0.34134, epsilon = 1e-5);
        assert_eq!(c.jumps.len(), 1);
        assert_eq!(c.jumps[0].delta, 1.0);

        let flat = StepFunction::constant(10, 0.0).unwrap();
        let c = signal_characteristics(&flat, &STD_NORMAL, &STD_NORMAL, beta(0.5));
        assert_eq!(c.lambda, 1.0);
        assert!(c.xi.is_none());

        let mut prev = f64::INFINITY;
        for b in [0.3, 0.1, 0.01, 1e-4, 1e-8] {
            let xi = signal_characteristics(&f, &STD_NORMAL, &STD_NORMAL, beta(b)).xi.unwrap();
            assert!(xi < prev);
            prev = xi;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn characteristics_ranges() {
        let f = StepFunction::new(vec![1, 11, 31, 36, 61], vec![0.0, 2.5, -1.0, 40.0]).unwrap();
        let heavy = DistributionSpec::Cauchy { location: 0.0, scale: 3.0 };
        for b in [0.05, 0.3, 0.5, 0.8, 0.99] {
            let c = signal_characteristics(&f, &STD_NORMAL, &heavy, beta(b));
            let xi = c.xi.unwrap();
            assert!((0.0..=b.max(1.0 - b)).contains(&xi));
            assert!(c.lambda > 0.0 && c.lambda <= 1.0);
            assert!(1.0 / c.lambda >= (f.num_segments() - 1) as f64);
            for j in &c.jumps {
                assert!(j.lambda >= c.lambda);
            }
        }
    }

    #[test]
    fn over_bound_examples() {
        assert_abs_diff_eq!(over_bound(0.1, 0).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(over_bound(0.1, 2).unwrap(), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(over_bound(0.05, 5).unwrap(), 1.25e-4, epsilon = 1e-15);
        assert!(over_bound(1.0, 1).is_err());
    }

    #[test]
    fn under_bound_examples() {
        assert_eq!(under_bound(500, 2, 0.25, 1e-9, 2.0), 1.0);
        assert_eq!(under_bound(500, 1, 0.25, 0.34, 2.0), 0.0);
        // independent re-derivation in log space
        let (n, lam, xi, q) = (5000.0f64, 0.25f64, 0.34f64, 2.0f64);
        let log_head = 4f64.ln() - n * lam * xi * xi;
        let e = 2.0 * (n * lam).sqrt() * xi * (q * std::f64::consts::FRAC_1_SQRT_2 + (1.0 + (2.0 / lam).ln()).sqrt());
        let expected = (log_head + e).exp() + log_head.exp();
        assert_abs_diff_eq!(under_bound(5000, 2, 0.25, 0.34, 2.0), expected, epsilon = 1e-12);
        assert!(expected < 1.0);
        // the same re-derivation at n = 500 exceeds 1 and is clamped
        let n = 500.0f64;
        let log_head = 4f64.ln() - n * lam * xi * xi;
        let e = 2.0 * (n * lam).sqrt() * xi * (q * std::f64::consts::FRAC_1_SQRT_2 + (1.0 + (2.0 / lam).ln()).sqrt());
        let raw = (log_head + e).exp() + log_head.exp();
        assert!(raw > 1.0);
        assert_eq!(under_bound(500, 2, 0.25, 0.34, 2.0), raw.min(1.0));
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_ns(1000, 0.25, 0.3, 1e6), 0.0);
        assert!(gamma_ns(1_000_000, 0.25, 0.4, 0.5) > 1.0 - 1e-9);
        // second implementation, written from the factored form
        let (n, lam, xi, q) = (1000.0f64, 0.25f64, 0.3f64, 1.5f64);
        let m = (2.0 * n * lam).sqrt() * xi - q - (2.0 * (1.0 + 2f64.ln() - lam.ln())).sqrt();
        let p = 1.0 - 2.0 * (-0.5 * m.max(0.0).powi(2)).exp() - 2.0 * (-n * lam * xi.powi(2)).exp();
        assert_abs_diff_eq!(gamma_ns(1000, 0.25, 0.3, 1.5), p.max(0.0) * p.max(0.0), epsilon = 1e-12);
    }

    #[test]
    fn gamma_monotonicity_grid() {
        for &xi in &[0.05, 0.1, 0.2, 0.4] {
            for &q in &[0.1, 0.5, 1.0, 2.0] {
                let mut prev = 0.0;
                for k in 1..40 {
                    let g = gamma_ns(100 * k, 0.2, xi, q);
                    assert!(g >= prev - 1e-15);
                    prev = g;
                }
                assert!(gamma_ns(2000, 0.2, xi * 1.1, q) >= gamma_ns(2000, 0.2, xi, q));
                assert!(gamma_ns(2000, 0.2, xi, q * 1.1) <= gamma_ns(2000, 0.2, xi, q));
            }
        }
    }

    #[test]
    fn location_rate_examples() {
        assert_eq!(location_rate_bound(500, 1, 0.3, 1.0, 0.1).unwrap(), 0.0);
        for lam in [0.05, 0.2, 0.5] {
            assert_eq!(location_rate_bound(800, 3, 0.3, 1.0, lam).unwrap(), under_bound(800, 3, lam, 0.3, 1.0));
        }
        assert!(location_rate_bound(800, 3, 0.3, 1.0, 0.0).is_err());
    }

    #[test]
    fn location_rate_vanishes_at_a_log_rate() {
        // eps = C log(n) / (n Xi^2) with C = 8; the bound is not small for C = 1
        let (xi, q) = (0.3, 1.0);
        let mut prev = f64::INFINITY;
        for e in 4..=12 {
            let n = 10usize.pow(e);
            let eps = 8.0 * (n as f64).ln() / (n as f64 * xi * xi);
            let b = location_rate_bound(n, 3, xi, q, eps).unwrap();
            assert!(b <= prev);
            prev = b;
        }
        assert!(prev < 1e-6);
        let n = 1_000_000usize;
        let eps = (n as f64).ln() / (n as f64 * xi * xi);
        assert_eq!(location_rate_bound(n, 3, xi, q, eps).unwrap(), 1.0);
    }
}
