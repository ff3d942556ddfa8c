//! Closed-form references for a scalar Gaussian mean with a Gaussian prior.
//!
//! Repeating Bayes' rule `N` times on the same data gives the powered
//! posterior `∝ π(θ) ℓ(θ)^N`, which is Gaussian here. Its kernel mean under a
//! Gaussian kernel is Gaussian too, so the argmax that herding reads out as
//! the estimate can be computed exactly and compared against the pipeline.

use serde::{Deserialize, Serialize};

use crate::kernels::KernelConfig;
use crate::models::{PriorSpec, Simulator};
use crate::{Dataset, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateProblem {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub obs_var: f64,
    pub observations: Vec<f64>,
}

impl ConjugateProblem {
    pub fn new(prior_mean: f64, prior_var: f64, obs_var: f64, observations: Vec<f64>) -> Result<Self> {
        let p = Self {
            prior_mean,
            prior_var,
            obs_var,
            observations,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prior_var > 0.0 && self.obs_var > 0.0) {
            return Err(Error::InvalidArgument("prior and observation variances must be positive".into()));
        }
        if self.observations.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(())
    }

    /// The maximum-likelihood estimate, i.e. the sample mean.
    pub fn mle(&self) -> f64 {
        self.observations.iter().sum::<f64>() / self.observations.len() as f64
    }

    pub fn dataset(&self) -> Dataset {
        self.observations.iter().map(|&y| vec![y]).collect()
    }

    /// The matching simulator and prior for running the full pipeline.
    pub fn model(&self) -> (Simulator, PriorSpec) {
        (
            Simulator::GaussianMean {
                dim: 1,
                n_obs: self.observations.len(),
                cov_diag: self.obs_var,
            },
            PriorSpec::NormalProduct {
                mean: vec![self.prior_mean],
                sd: vec![self.prior_var.sqrt()],
            },
        )
    }
}

/// Mean and variance of the `N`-th powered posterior; `N = 0` is the prior.
pub fn powered_posterior_params(p: &ConjugateProblem, n: u32) -> (f64, f64) {
    let m = p.observations.len() as f64;
    let big_n = n as f64;
    let precision = 1.0 / p.prior_var + big_n * m / p.obs_var;
    let mean = (p.prior_mean / p.prior_var + big_n * m * p.mle() / p.obs_var) / precision;
    (mean, 1.0 / precision)
}

/// `∫ k(θ, t) Normal(t; µ, v) dt` for the Gaussian kernel of bandwidth `σ`:
/// `σ/√(σ²+v) · exp(−(θ−µ)²/(2(σ²+v)))`.
pub fn kernel_mean_gaussian(mean_var: (f64, f64), cfg: &KernelConfig, theta: f64) -> f64 {
    let (mu, v) = mean_var;
    let s2 = cfg.bandwidth() * cfg.bandwidth();
    let total = s2 + v;
    (s2 / total).sqrt() * (-(theta - mu).powi(2) / (2.0 * total)).exp()
}

/// For each `N`, the grid point maximizing the kernel mean of the `N`-th
/// powered posterior. Ties go to the earliest grid point.
pub fn powered_argmax_check(p: &ConjugateProblem, cfg: &KernelConfig, n_list: &[u32], grid: &[f64]) -> Result<Vec<(u32, f64)>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(n_list
        .iter()
        .map(|&n| {
            let mv = powered_posterior_params(p, n);
            let mut best = (f64::NEG_INFINITY, grid[0]);
            for &t in grid {
                let v = kernel_mean_gaussian(mv, cfg, t);
                if v > best.0 {
                    best = (v, t);
                }
            }
            (n, best.1)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gaussian_kernel;
    use approx::assert_abs_diff_eq;

    fn example() -> ConjugateProblem {
        ConjugateProblem::new(0.0, 100.0, 1.0, vec![1.0]).unwrap()
    }

    #[test]
    fn prior_at_zero_iterations() {
        assert_eq!(powered_posterior_params(&example(), 0), (0.0, 100.0));
    }

    #[test]
    fn one_update() {
        let (m, v) = powered_posterior_params(&example(), 1);
        assert_abs_diff_eq!(m, 1.0 / 1.01, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1.0 / 1.01, epsilon = 1e-12);
    }

    #[test]
    fn large_n_collapses_on_mle() {
        let (m, v) = powered_posterior_params(&example(), 1_000_000);
        assert!((m - 1.0).abs() < 1e-7 && v < 1e-5);
    }

    #[test]
    fn dirac_case_is_the_kernel() {
        let k = KernelConfig::new(0.8).unwrap();
        for i in -20..=20 {
            let t = i as f64 * 0.25;
            let a = kernel_mean_gaussian((0.3, 0.0), &k, t);
            let b = gaussian_kernel(&[t], &[0.3], &k).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_quadrature() {
        let k = KernelConfig::new(0.7).unwrap();
        let (mu, v): (f64, f64) = (0.4, 1.3);
        let sd = v.sqrt();
        for theta in [-1.0, 0.0, 0.4, 2.5] {
            // midpoint rule over ±12 sd
            let steps = 200_000;
            let (lo, hi) = (mu - 12.0 * sd, mu + 12.0 * sd);
            let h = (hi - lo) / steps as f64;
            let mut acc = 0.0;
            for i in 0..steps {
                let t = lo + (i as f64 + 0.5) * h;
                let dens = (-(t - mu) * (t - mu) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                acc += gaussian_kernel(&[theta], &[t], &k).unwrap() * dens * h;
            }
            assert_abs_diff_eq!(kernel_mean_gaussian((mu, v), &k, theta), acc, epsilon = 1e-6);
        }
    }

    #[test]
    fn maximal_at_mean() {
        let k = KernelConfig::new(1.0).unwrap();
        let peak = kernel_mean_gaussian((2.0, 0.5), &k, 2.0);
        for t in [1.0, 1.9, 2.1, 3.0] {
            assert!(kernel_mean_gaussian((2.0, 0.5), &k, t) < peak);
        }
    }

    fn grid(step: f64) -> Vec<f64> {
        (0..=((3.0 / step) as usize)).map(|i| -1.0 + i as f64 * step).collect()
    }

    #[test]
    fn argmax_moves_monotonically_to_mle() {
        let k = KernelConfig::new(1.0).unwrap();
        let step = 1e-3;
        let ns = [1, 2, 4, 8, 16, 32, 64];
        let out = powered_argmax_check(&example(), &k, &ns, &grid(step)).unwrap();
        let dist: Vec<f64> = out.iter().map(|(_, a)| (a - 1.0).abs()).collect();
        for w in dist.windows(2) {
            assert!(w[1] <= w[0], "{dist:?}");
        }
        assert!(dist[6] < step + 1e-12, "{dist:?}");
        let (m64, _) = powered_posterior_params(&example(), 64);
        assert_abs_diff_eq!(m64, 64.0 / 64.01, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_problem_is_fixed() {
        let p = ConjugateProblem::new(1.0, 4.0, 1.0, vec![0.5, 1.5]).unwrap();
        let k = KernelConfig::new(0.5).unwrap();
        for (_, a) in powered_argmax_check(&p, &k, &[0, 1, 5, 50], &grid(0.01)).unwrap() {
            assert_abs_diff_eq!(a, 1.0, epsilon = 1e-9);
        }
    }
}
