//! Built-in simulators, priors and data summarizers.
//!
//! Parameters live in two coordinate systems. The *natural* space is what
//! the simulator consumes and what errors are measured in. The *internal*
//! space is where kernels and herding operate: log coordinates for positive
//! scale parameters, and raw (unnormalized) mixture weights that are
//! projected onto the simplex at the simulator boundary.

mod prior;
mod stable;
mod summary;

pub use prior::{sample_dirichlet, sample_prior, PriorSpec};
pub use stable::{
    cms_b, cms_s, cms_tau, cms_tau_scaled, equicorrelated, sample_amplitude, sim_alpha_stable,
    AmplitudeLaw, MAX_AMPLITUDE_RETRIES,
};
pub use summary::{summarize, Summarizer, DIVERGED_FILL};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::{Dataset, Error, ParamPoint, Result};

/// How a natural coordinate maps to the internal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coord {
    Linear,
    Log,
}

/// Static description of a simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorSpec {
    pub name: &'static str,
    pub param_dim: usize,
    pub obs_dim: usize,
    pub integer_mask: Vec<bool>,
    /// Internal-space bounds; infinite ends mean unbounded.
    pub bounds: Vec<(f64, f64)>,
    pub coords: Vec<Coord>,
    pub param_names: Vec<String>,
}

/// A seeded stochastic map `θ → Dataset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Simulator {
    /// Noiseless `y = θ`, a single observation.
    Identity { dim: usize },
    /// `n_obs` draws from `Normal(θ, cov_diag·I)`.
    GaussianMean { dim: usize, n_obs: usize, cov_diag: f64 },
    /// Nicholson's blowfly recurrence; `θ = (P, N₀, σ_d, σ_p, τ, δ)`.
    Blowfly { t_len: usize, burn_in: usize },
    /// Elliptically contoured alpha-stable; `θ = (α, q_diag, q_offdiag)`.
    AlphaStable {
        dim: usize,
        n_obs: usize,
        #[serde(default)]
        amplitude: AmplitudeLaw,
    },
    /// Scalar Gaussian mixture; `θ = (φ₁..φ_K, µ₁..µ_K)`, common `sd`.
    GaussianMixture { components: usize, n_obs: usize, sd: f64 },
}

impl Simulator {
    pub fn spec(&self) -> SimulatorSpec {
        let unbounded = (f64::NEG_INFINITY, f64::INFINITY);
        let named = |prefix: &str, n: usize| (1..=n).map(|i| format!("{prefix}_{i}")).collect::<Vec<_>>();
        match *self {
            Simulator::Identity { dim } => SimulatorSpec {
                name: "identity",
                param_dim: dim,
                obs_dim: dim,
                integer_mask: vec![false; dim],
                bounds: vec![unbounded; dim],
                coords: vec![Coord::Linear; dim],
                param_names: named("theta", dim),
            },
            Simulator::GaussianMean { dim, .. } => SimulatorSpec {
                name: "gaussian-mean",
                param_dim: dim,
                obs_dim: dim,
                integer_mask: vec![false; dim],
                bounds: vec![unbounded; dim],
                coords: vec![Coord::Linear; dim],
                param_names: named("mu", dim),
            },
            Simulator::Blowfly { .. } => SimulatorSpec {
                name: "blowfly",
                param_dim: 6,
                obs_dim: 1,
                integer_mask: vec![true, true, false, false, true, false],
                bounds: vec![unbounded; 6],
                coords: vec![Coord::Log; 6],
                param_names: ["P", "N0", "sigma_d", "sigma_p", "tau", "delta"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            },
            Simulator::AlphaStable { dim, .. } => SimulatorSpec {
                name: "alpha-stable",
                param_dim: 3,
                obs_dim: dim,
                integer_mask: vec![false; 3],
                bounds: vec![(0.0, 2.0), (0.0, f64::INFINITY), unbounded],
                coords: vec![Coord::Linear; 3],
                param_names: ["alpha", "q_diag", "q_offdiag"].iter().map(|s| s.to_string()).collect(),
            },
            Simulator::GaussianMixture { components, .. } => {
                let mut bounds = vec![(0.0, 1.0); components];
                bounds.extend(vec![unbounded; components]);
                let mut names = named("phi", components);
                names.extend(named("mu", components));
                SimulatorSpec {
                    name: "gaussian-mixture",
                    param_dim: 2 * components,
                    obs_dim: 1,
                    integer_mask: vec![false; 2 * components],
                    bounds,
                    coords: vec![Coord::Linear; 2 * components],
                    param_names: names,
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        match *self {
            Simulator::Identity { dim: 0 } => bad("identity simulator needs dim ≥ 1"),
            Simulator::GaussianMean { dim, n_obs, cov_diag } if dim == 0 || n_obs == 0 || !(cov_diag > 0.0) => {
                bad("gaussian-mean needs dim ≥ 1, n_obs ≥ 1 and cov_diag > 0")
            }
            Simulator::Blowfly { t_len: 0, .. } => bad("blowfly needs t_len ≥ 1"),
            Simulator::AlphaStable { dim, n_obs, .. } if dim == 0 || n_obs == 0 => {
                bad("alpha-stable needs dim ≥ 1 and n_obs ≥ 1")
            }
            Simulator::GaussianMixture { components, n_obs, sd } if components == 0 || n_obs == 0 || !(sd > 0.0) => {
                bad("gaussian-mixture needs components ≥ 1, n_obs ≥ 1 and sd > 0")
            }
            _ => Ok(()),
        }
    }

    /// Whether observations are i.i.d. rows (as opposed to a time series).
    pub fn is_iid(&self) -> bool {
        !matches!(self, Simulator::Blowfly { .. } | Simulator::Identity { .. })
    }

    /// Copy producing `n` observations per dataset (series length for
    /// blowfly). The identity simulator always yields one observation.
    pub fn with_n_obs(&self, n: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            Simulator::GaussianMean { n_obs, .. }
            | Simulator::AlphaStable { n_obs, .. }
            | Simulator::GaussianMixture { n_obs, .. } => *n_obs = n,
            Simulator::Blowfly { t_len, .. } => *t_len = n,
            Simulator::Identity { .. } => {}
        }
        s
    }

    pub fn to_internal(&self, natural: &[f64]) -> ParamPoint {
        let spec = self.spec();
        natural
            .iter()
            .zip(&spec.coords)
            .map(|(v, c)| match c {
                Coord::Linear => *v,
                Coord::Log => v.ln(),
            })
            .collect()
    }

    pub fn to_natural(&self, internal: &[f64]) -> ParamPoint {
        let spec = self.spec();
        let mut out: ParamPoint = internal
            .iter()
            .zip(&spec.coords)
            .map(|(v, c)| match c {
                Coord::Linear => *v,
                Coord::Log => v.exp(),
            })
            .collect();
        if let Simulator::GaussianMixture { components, .. } = *self {
            project_simplex(&mut out[..components]);
        }
        out
    }

    /// Simulate from a natural-space parameter.
    pub fn simulate(&self, theta: &[f64], seed: u64) -> Result<Dataset> {
        let spec = self.spec();
        if theta.len() != spec.param_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.param_dim,
                found: theta.len(),
            });
        }
        match *self {
            Simulator::Identity { .. } => Ok(vec![theta.to_vec()]),
            Simulator::GaussianMean { n_obs, cov_diag, .. } => Ok(sim_gaussian_mean(theta, n_obs, cov_diag, seed)),
            Simulator::Blowfly { t_len, burn_in } => sim_blowfly(&BlowflyParams::from_slice(theta), t_len, burn_in, seed),
            Simulator::AlphaStable { dim, n_obs, amplitude } => {
                sim_alpha_stable(theta[0], theta[1], theta[2], dim, n_obs, amplitude, seed)
            }
            Simulator::GaussianMixture { components, n_obs, sd } => {
                sim_gaussian_mixture(&theta[..components], &theta[components..], sd, n_obs, seed)
            }
        }
    }
}

/// Clip negatives and renormalize; all-zero input becomes uniform.
pub fn project_simplex(phi: &mut [f64]) {
    for v in phi.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    let total: f64 = phi.iter().sum();
    if total > 0.0 && total.is_finite() {
        phi.iter_mut().for_each(|v| *v /= total);
    } else {
        let k = phi.len() as f64;
        phi.iter_mut().for_each(|v| *v = 1.0 / k);
    }
}

/// `n_obs` i.i.d. draws from `Normal(θ, cov_diag·I)`.
pub fn sim_gaussian_mean(theta: &[f64], n_obs: usize, cov_diag: f64, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let sd = cov_diag.sqrt();
    (0..n_obs)
        .map(|_| {
            theta
                .iter()
                .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// Blowfly parameters in natural units. `p`, `n0` and `tau` are rounded to
/// positive integers when simulating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowflyParams {
    pub p: f64,
    pub n0: f64,
    pub sigma_d: f64,
    pub sigma_p: f64,
    pub tau: f64,
    pub delta: f64,
}

impl BlowflyParams {
    pub fn from_slice(t: &[f64]) -> Self {
        Self {
            p: t[0],
            n0: t[1],
            sigma_d: t[2],
            sigma_p: t[3],
            tau: t[4],
            delta: t[5],
        }
    }

    pub fn to_vec(self) -> ParamPoint {
        vec![self.p, self.n0, self.sigma_d, self.sigma_p, self.tau, self.delta]
    }
}

/// Largest lag accepted by the simulator; larger values are clamped.
const MAX_TAU: usize = 10_000;

/// One step of the recurrence with the two noise variates given:
/// `P·N_{t−τ}·exp(−N_{t−τ}/N₀)·e + N_t·exp(−δ·ε)`.
pub fn blowfly_step(p: f64, n0: f64, delta: f64, lagged: f64, current: f64, e: f64, eps: f64) -> f64 {
    p * lagged * (-lagged / n0).exp() * e + current * (-delta * eps).exp()
}

/// Mean-one gamma noise `Gam(1/σ², σ²)` (shape, scale).
fn unit_gamma(sigma: f64) -> Result<Gamma<f64>> {
    let shape = 1.0 / (sigma * sigma);
    Gamma::new(shape, sigma * sigma).map_err(|e| Error::SimulationDiverged(format!("gamma noise with sigma {sigma}: {e}")))
}

/// Population series `N_1..N_T` after `burn_in` discarded steps. The first
/// `τ + 1` values are `100 × (mean-one gamma draws)`.
pub fn sim_blowfly(theta: &BlowflyParams, t_len: usize, burn_in: usize, seed: u64) -> Result<Dataset> {
    let round_pos = |v: f64| if v.is_finite() { v.round().max(1.0) } else { v };
    let p = round_pos(theta.p);
    let n0 = round_pos(theta.n0);
    let tau_f = round_pos(theta.tau);
    let (sd, sp, delta) = (theta.sigma_d, theta.sigma_p, theta.delta);
    let finite_pos = [p, n0, tau_f, sd, sp, delta].iter().all(|v| v.is_finite() && *v > 0.0);
    if !finite_pos {
        return Err(Error::SimulationDiverged(format!("blowfly parameters out of domain: {theta:?}")));
    }
    let tau = (tau_f as usize).min(MAX_TAU);
    let e_dist = unit_gamma(sp)?;
    let eps_dist = unit_gamma(sd)?;
    let mut rng = rng_from_seed(seed);

    let total = burn_in + t_len;
    let mut n: Vec<f64> = (0..=tau).map(|_| 100.0 * e_dist.sample(&mut rng)).collect();
    n.reserve(total);
    while n.len() < tau + 1 + total {
        let t = n.len() - 1;
        let e = e_dist.sample(&mut rng);
        let eps = eps_dist.sample(&mut rng);
        let next = blowfly_step(p, n0, delta, n[t - tau], n[t], e, eps);
        if !next.is_finite() {
            return Err(Error::SimulationDiverged(format!("population became {next} at step {t}")));
        }
        n.push(next);
    }
    Ok(n[n.len() - t_len..].iter().map(|&v| vec![v]).collect())
}

/// `n_obs` scalar draws from `Σ φᵢ Normal(µᵢ, sd²)`.
pub fn sim_gaussian_mixture(phi: &[f64], mu: &[f64], sd: f64, n_obs: usize, seed: u64) -> Result<Dataset> {
    if phi.len() != mu.len() || phi.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            found: mu.len(),
        });
    }
    let total: f64 = phi.iter().sum();
    if phi.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("mixture weights must lie on the simplex, got {phi:?}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut cum = Vec::with_capacity(phi.len());
    let mut acc = 0.0;
    for v in phi {
        acc += v;
        cum.push(acc);
    }
    let last_positive = phi.iter().rposition(|v| *v > 0.0).unwrap_or(phi.len() - 1);
    Ok((0..n_obs)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cum.iter().position(|c| u < *c).unwrap_or(last_positive);
            let k = if phi[k] > 0.0 { k } else { last_positive };
            vec![mu[k] + sd * rng.sample::<f64, _>(StandardNormal)]
        })
        .collect())
}
