//! Chambers–Mallows–Stuck map and the elliptically contoured alpha-stable
//! sampler `X = A^{1/2} G`, `G ~ Normal(0, Q)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::{Dataset, Error, Result};

/// Draws of the amplitude that are negative or non-finite are redrawn at
/// most this many times per observation.
pub const MAX_AMPLITUDE_RETRIES: usize = 100;

/// `B_{α,β} = atan(β tan(πα/2)) / α`.
pub fn cms_b(alpha: f64, beta: f64) -> f64 {
    (beta * (PI * alpha / 2.0).tan()).atan() / alpha
}

/// `S_{α,β} = (1 + β² tan²(πα/2))^{1/(2α)}`.
pub fn cms_s(alpha: f64, beta: f64) -> f64 {
    let t = (PI * alpha / 2.0).tan();
    (1.0 + beta * beta * t * t).powf(1.0 / (2.0 * alpha))
}

/// Standard (`σ = 1`, `µ = 0`) CMS map for `u1 ∈ (−π/2, π/2)`, `u2 > 0`.
pub fn cms_tau(alpha: f64, beta: f64, u1: f64, u2: f64) -> f64 {
    if alpha == 1.0 {
        let a = FRAC_PI_2 + beta * u1;
        2.0 / PI * (a * u1.tan() - beta * (u2 * u1.cos() / a).ln())
    } else {
        let b = cms_b(alpha, beta);
        let s = cms_s(alpha, beta);
        let shifted = alpha * (u1 + b);
        s * shifted.sin() / u1.cos().powf(1.0 / alpha)
            * ((u1 - shifted).cos() / u2).powf((1.0 - alpha) / alpha)
    }
}

/// `σ·τ_{α,β}(U1, U2) + µ`.
pub fn cms_tau_scaled(alpha: f64, beta: f64, scale: f64, loc: f64, u1: f64, u2: f64) -> f64 {
    scale * cms_tau(alpha, beta, u1, u2) + loc
}

/// Which stable law feeds the amplitude `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeLaw {
    /// `A = τ_{α,1}(U1, U2)` with unit scale and zero location.
    #[default]
    Verbatim,
    /// `A ~ S(α/2, 1, 2 cos(πα/4)^{2/α}, 0)`, the positive amplitude of the
    /// classical sub-Gaussian construction.
    HalfAlpha,
}

fn draw_uniform_exp<R: Rng>(rng: &mut R) -> (f64, f64) {
    // open interval (−π/2, π/2)
    let u1 = loop {
        let u: f64 = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        if u > -FRAC_PI_2 {
            break u;
        }
    };
    let u2: f64 = rng.sample(Exp1);
    (u1, u2)
}

/// One amplitude draw; returns the value and the number of redraws used.
pub fn sample_amplitude<R: Rng>(alpha: f64, law: AmplitudeLaw, rng: &mut R) -> Result<(f64, usize)> {
    for retry in 0..=MAX_AMPLITUDE_RETRIES {
        let (u1, u2) = draw_uniform_exp(rng);
        let a = match law {
            AmplitudeLaw::Verbatim => cms_tau(alpha, 1.0, u1, u2),
            AmplitudeLaw::HalfAlpha => {
                let half = alpha / 2.0;
                let scale = 2.0 * (PI * alpha / 4.0).cos().powf(2.0 / alpha);
                cms_tau_scaled(half, 1.0, scale, 0.0, u1, u2)
            }
        };
        if a.is_finite() && a >= 0.0 {
            return Ok((a, retry));
        }
    }
    Err(Error::SimulationDiverged(format!(
        "amplitude negative or non-finite after {MAX_AMPLITUDE_RETRIES} redraws (alpha = {alpha})"
    )))
}

/// The equicorrelated matrix with `q_diag` on the diagonal and `q_offdiag`
/// elsewhere, or an error if it is not positive definite.
pub fn equicorrelated(q_diag: f64, q_offdiag: f64, dim: usize) -> Result<DMatrix<f64>> {
    let pd = q_diag > 0.0
        && q_diag - q_offdiag > 0.0
        && q_diag + (dim as f64 - 1.0) * q_offdiag > 0.0
        && q_diag.is_finite()
        && q_offdiag.is_finite();
    if !pd || dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "Q with diagonal {q_diag} and off-diagonal {q_offdiag} is not positive definite in dimension {dim}"
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| if i == j { q_diag } else { q_offdiag }))
}

/// `n_obs` draws of `A^{1/2} G` in `R^dim`, `G ~ Normal(0, Q)`.
pub fn sim_alpha_stable(
    alpha: f64,
    q_diag: f64,
    q_offdiag: f64,
    dim: usize,
    n_obs: usize,
    law: AmplitudeLaw,
    seed: u64,
) -> Result<Dataset> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    let q = equicorrelated(q_diag, q_offdiag, dim)?;
    let l = q
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("Q is not positive definite".into()))?
        .unpack();
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let (a, _) = sample_amplitude(alpha, law, &mut rng)?;
        let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let g = &l * z;
        let root = a.sqrt();
        out.push(g.iter().map(|v| root * v).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn symmetric_constants() {
        for alpha in [0.3, 0.9, 1.3, 1.7, 2.0] {
            assert_eq!(cms_b(alpha, 0.0), 0.0);
            assert_eq!(cms_s(alpha, 0.0), 1.0);
        }
    }

    #[test]
    fn alpha_two_is_gaussian_variance_two() {
        let mut rng = rng_from_seed(2024);
        let n = 100_000;
        let mut s = 0.0;
        let mut ss = 0.0;
        for _ in 0..n {
            let (u1, u2) = draw_uniform_exp(&mut rng);
            let t = cms_tau(2.0, 0.0, u1, u2);
            // algebraic reduction of the α = 2, β = 0 branch
            assert_abs_diff_eq!(t, 2.0 * u1.sin() * u2.sqrt(), epsilon = 1e-9 * (1.0 + t.abs()));
            s += t;
            ss += t * t;
        }
        let mean = s / n as f64;
        let var = ss / n as f64 - mean * mean;
        assert!((1.9..=2.1).contains(&var), "variance {var}");
    }

    #[test]
    fn alpha_one_branch_is_finite() {
        let t = cms_tau(1.0, 1.0, 0.3, 0.8);
        assert!(t.is_finite());
        // β = 0 reduces to the Cauchy map tan(U1)
        assert_abs_diff_eq!(cms_tau(1.0, 0.0, 0.3, 0.8), 0.3f64.tan(), epsilon = 1e-14);
    }

    #[test]
    fn pd_check() {
        assert!(equicorrelated(1.0, 0.2, 2).is_ok());
        assert!(equicorrelated(1.0, 1.0, 2).is_err());
        assert!(equicorrelated(1.0, -0.6, 3).is_err());
        assert!(equicorrelated(-1.0, 0.0, 2).is_err());
        assert!(sim_alpha_stable(1.3, 1.0, 2.0, 2, 10, AmplitudeLaw::Verbatim, 1).is_err());
        assert!(sim_alpha_stable(0.0, 1.0, 0.2, 2, 10, AmplitudeLaw::Verbatim, 1).is_err());
        assert!(sim_alpha_stable(2.5, 1.0, 0.2, 2, 10, AmplitudeLaw::Verbatim, 1).is_err());
    }

    #[test]
    fn sampler_shape_and_determinism() {
        for law in [AmplitudeLaw::Verbatim, AmplitudeLaw::HalfAlpha] {
            let a = sim_alpha_stable(1.3, 1.0, 0.2, 3, 200, law, 5).unwrap();
            let b = sim_alpha_stable(1.3, 1.0, 0.2, 3, 200, law, 5).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 200);
            assert!(a.iter().all(|r| r.len() == 3 && r.iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn half_alpha_amplitude_is_positive() {
        // totally skewed with index below one: support is the half line
        let mut rng = rng_from_seed(8);
        for _ in 0..5000 {
            let (a, retries) = sample_amplitude(1.3, AmplitudeLaw::HalfAlpha, &mut rng).unwrap();
            assert!(a >= 0.0);
            assert_eq!(retries, 0);
        }
    }
}
