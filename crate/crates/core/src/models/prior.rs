use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::{Error, ParamPoint, Result};

/// Prior over natural-space parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    UniformBox {
        bounds: Vec<(f64, f64)>,
    },
    NormalProduct {
        mean: Vec<f64>,
        sd: Vec<f64>,
    },
    /// `θⱼ = exp(locⱼ + scaleⱼ·εⱼ)`, `εⱼ ~ Normal(0, 1)`.
    LogNormalProduct {
        loc: Vec<f64>,
        scale: Vec<f64>,
    },
    /// `scale · Dirichlet(concentration)`.
    Dirichlet {
        concentration: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Independent blocks, concatenated in order.
    Product {
        parts: Vec<PriorSpec>,
    },
}

fn one() -> f64 {
    1.0
}

impl PriorSpec {
    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::UniformBox { bounds } => bounds.len(),
            PriorSpec::NormalProduct { mean, .. } => mean.len(),
            PriorSpec::LogNormalProduct { loc, .. } => loc.len(),
            PriorSpec::Dirichlet { concentration, .. } => concentration.len(),
            PriorSpec::Product { parts } => parts.iter().map(PriorSpec::dim).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            PriorSpec::UniformBox { bounds } => {
                for (i, &(lo, hi)) in bounds.iter().enumerate() {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return bad(format!("uniform prior dimension {i}: need finite lo < hi"));
                    }
                }
            }
            PriorSpec::NormalProduct { mean, sd } => {
                if mean.len() != sd.len() || sd.iter().any(|s| !(*s > 0.0)) {
                    return bad("normal prior needs matching lengths and positive sd".into());
                }
            }
            PriorSpec::LogNormalProduct { loc, scale } => {
                if loc.len() != scale.len() || scale.iter().any(|s| !(*s > 0.0)) {
                    return bad("log-normal prior needs matching lengths and positive scales".into());
                }
            }
            PriorSpec::Dirichlet { concentration, scale } => {
                if concentration.len() < 2 || concentration.iter().any(|a| !(*a > 0.0)) || !(*scale > 0.0) {
                    return bad("Dirichlet prior needs ≥ 2 positive concentrations and a positive scale".into());
                }
            }
            PriorSpec::Product { parts } => {
                if parts.is_empty() {
                    return bad("product prior needs at least one block".into());
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        if self.dim() == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(())
    }

    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> ParamPoint {
        match self {
            PriorSpec::UniformBox { bounds } => bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect(),
            PriorSpec::NormalProduct { mean, sd } => mean
                .iter()
                .zip(sd)
                .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            PriorSpec::LogNormalProduct { loc, scale } => loc
                .iter()
                .zip(scale)
                .map(|(m, s)| (m + s * rng.sample::<f64, _>(StandardNormal)).exp())
                .collect(),
            PriorSpec::Dirichlet { concentration, scale } => sample_dirichlet(concentration, rng)
                .into_iter()
                .map(|v| v * scale)
                .collect(),
            PriorSpec::Product { parts } => parts.iter().flat_map(|p| p.sample_with(rng)).collect(),
        }
    }
}

/// Dirichlet draw that stays accurate for concentrations far below one.
///
/// Uses `G_α = G_{α+1} · U^{1/α}` in log space, then normalizes with a
/// log-sum-exp, so tiny gamma variates never underflow to an all-zero vector.
pub fn sample_dirichlet<R: Rng>(concentration: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = concentration
        .iter()
        .map(|&a| {
            let g = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            g.ln() + u.ln() / a
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// One prior draw, deterministic per seed.
pub fn sample_prior(spec: &PriorSpec, seed: u64) -> ParamPoint {
    spec.sample_with(&mut rng_from_seed(seed))
}
