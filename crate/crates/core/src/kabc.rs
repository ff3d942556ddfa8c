//! Kernel ABC: posterior kernel-mean weights from simulated pairs.
//!
//! The weights solve `(G + nδI) w = k(y*)` where `G` is the Gram matrix of
//! the simulated summaries and `k(y*)` their kernel similarities to the
//! observed summary. They are not clipped or normalized; negative weights and
//! sums far from one are meaningful downstream (a near-zero sum is the
//! trigger for herding's exploration behaviour).

use nalgebra::{DMatrix, DVector};

use crate::kernels::{gram_matrix, kernel_vector, GramMatrix, KernelConfig};
use crate::{check_dims, Error, ParamPoint, Result};

/// Below this absolute weight sum the posterior mean falls back to the
/// unweighted mean.
pub const DEGENERATE_WEIGHT_SUM: f64 = 1e-12;

/// An empirical kernel mean `Σ wᵢ k(·, θᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedParticleSet {
    particles: Vec<ParamPoint>,
    weights: Vec<f64>,
    kernel: KernelConfig,
}

impl WeightedParticleSet {
    pub fn new(particles: Vec<ParamPoint>, weights: Vec<f64>, kernel: KernelConfig) -> Result<Self> {
        check_dims(&particles)?;
        if particles.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: particles.len(),
                found: weights.len(),
            });
        }
        if particles.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite particle coordinate".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(Self {
            particles,
            weights,
            kernel,
        })
    }

    /// Equal weights `1/n`.
    pub fn uniform(particles: Vec<ParamPoint>, kernel: KernelConfig) -> Result<Self> {
        let n = particles.len();
        Self::new(particles, vec![1.0 / n.max(1) as f64; n], kernel)
    }

    pub fn particles(&self) -> &[ParamPoint] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The embedding evaluated at `theta`: `Σ wᵢ k(θ, θᵢ)`.
    pub fn evaluate(&self, theta: &[f64]) -> f64 {
        self.particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * self.kernel.eval(theta, p))
            .sum()
    }
}

/// Solve `(G + nδI) w = kvec` by Cholesky factorization.
pub fn kabc_weights(gram: &GramMatrix, kvec: &[f64], delta: f64) -> Result<Vec<f64>> {
    let n = gram.n();
    if kvec.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: kvec.len(),
        });
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let g = gram.entries();
    let diag_range = || {
        let d = g.diagonal();
        (d.min(), d.max())
    };
    if g.iter().chain(kvec).any(|v| !v.is_finite()) {
        let (min_diag, max_diag) = diag_range();
        return Err(Error::Numerical {
            n,
            min_diag,
            max_diag,
            reason: "non-finite entries in Gram matrix or kernel vector".into(),
        });
    }

    let mut a: DMatrix<f64> = g.clone();
    let ridge = n as f64 * delta;
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    let b = DVector::from_column_slice(kvec);
    let chol = a.clone().cholesky().ok_or_else(|| {
        let (min_diag, max_diag) = diag_range();
        Error::Numerical {
            n,
            min_diag,
            max_diag,
            reason: "G + nδI is not positive definite".into(),
        }
    })?;
    let mut w = chol.solve(&b);
    // one step of iterative refinement keeps the residual at round-off level
    // when the ridge is tiny relative to ‖G‖
    let r = &b - &a * &w;
    w += chol.solve(&r);

    if w.iter().any(|v| !v.is_finite()) {
        let (min_diag, max_diag) = diag_range();
        return Err(Error::Numerical {
            n,
            min_diag,
            max_diag,
            reason: "solution contains non-finite values".into(),
        });
    }
    Ok(w.iter().copied().collect())
}

/// Kernel ABC posterior embedding from simulated `(θᵢ, sᵢ)` pairs, where `sᵢ`
/// are fixed-length summaries of the simulated data.
pub fn embed_posterior(
    sim_params: &[ParamPoint],
    sim_summaries: &[Vec<f64>],
    observed_summary: &[f64],
    ky: &KernelConfig,
    ktheta: &KernelConfig,
    delta: f64,
) -> Result<WeightedParticleSet> {
    if sim_params.len() != sim_summaries.len() {
        return Err(Error::DimensionMismatch {
            expected: sim_params.len(),
            found: sim_summaries.len(),
        });
    }
    if sim_params.len() < 2 {
        return Err(Error::InvalidArgument(
            "kernel ABC needs at least two simulated pairs".into(),
        ));
    }
    let gram = gram_matrix(sim_summaries, ky)?;
    let kvec = kernel_vector(sim_summaries, observed_summary, ky)?;
    let w = kabc_weights(&gram, &kvec, delta)?;
    WeightedParticleSet::new(sim_params.to_vec(), w, *ktheta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMean {
    pub point: ParamPoint,
    /// `|Σ wᵢ|` was below [`DEGENERATE_WEIGHT_SUM`]; `point` is unweighted.
    pub degenerate: bool,
}

/// `Σ wᵢθᵢ / Σ wᵢ`, the kernel ABC point estimate.
pub fn posterior_mean(ps: &WeightedParticleSet) -> PosteriorMean {
    let d = ps.dim();
    let sum = ps.weight_sum();
    let degenerate = sum.abs() < DEGENERATE_WEIGHT_SUM;
    let mut point = vec![0.0; d];
    let n = ps.len() as f64;
    for (p, w) in ps.particles().iter().zip(ps.weights()) {
        // normalize first so a single particle maps back to itself exactly
        let coef = if degenerate { 1.0 / n } else { w / sum };
        for (acc, v) in point.iter_mut().zip(p) {
            *acc += coef * v;
        }
    }
    PosteriorMean { point, degenerate }
}
