//! Two-sample discrepancies between datasets.
//!
//! * [`energy_distance_linear`]: the O(n) paired h-statistic.
//! * [`energy_distance_quadratic`]: the V-statistic of the empirical
//!   distributions. Exactly zero for identical inputs and never negative.
//! * [`energy_distance_unbiased`]: U-statistic within-set means. This is the
//!   expectation of the linear estimator over random pairings.
//! * [`mmd_quadratic`]: biased MMD² with a Gaussian kernel.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::kernels::KernelConfig;
use crate::seed::rng_from_seed;
use crate::{check_dims, euclidean_distance, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    EnergyLinear,
    EnergyQuadratic,
    EnergyUnbiased,
    MmdQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyValue {
    pub value: f64,
    pub kind: EstimatorKind,
}

/// How the linear estimator pairs consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Pair `(x₂ᵢ₋₁, x₂ᵢ)` in the order given. Valid for i.i.d. input order.
    InOrder,
    /// Independently shuffle both samples with the seed before pairing.
    Shuffled(u64),
}

fn check_pair(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<()> {
    let dx = check_dims(x)?;
    let dy = check_dims(y)?;
    if dx != dy {
        return Err(Error::DimensionMismatch {
            expected: dx,
            found: dy,
        });
    }
    Ok(())
}

/// Linear-time energy distance
/// `(1/n₂) Σᵢ ‖x₂ᵢ₋₁ − y₂ᵢ‖ + ‖x₂ᵢ − y₂ᵢ₋₁‖ − ‖x₂ᵢ₋₁ − x₂ᵢ‖ − ‖y₂ᵢ₋₁ − y₂ᵢ‖`
/// with `n₂ = ⌊n/2⌋`. For odd `n` the last sample is dropped.
pub fn energy_distance_linear(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    pairing: Pairing,
) -> Result<DiscrepancyValue> {
    check_pair(x, y)?;
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "linear energy distance needs equal sample sizes, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "linear energy distance needs at least two samples".into(),
        ));
    }
    let (xs, ys): (Vec<&Vec<f64>>, Vec<&Vec<f64>>) = match pairing {
        Pairing::InOrder => (x.iter().collect(), y.iter().collect()),
        Pairing::Shuffled(seed) => {
            let mut rng = rng_from_seed(seed);
            let mut xs: Vec<&Vec<f64>> = x.iter().collect();
            let mut ys: Vec<&Vec<f64>> = y.iter().collect();
            xs.shuffle(&mut rng);
            ys.shuffle(&mut rng);
            (xs, ys)
        }
    };
    let n2 = x.len() / 2;
    let mut sum = 0.0;
    for i in 0..n2 {
        let (x1, x2) = (xs[2 * i], xs[2 * i + 1]);
        let (y1, y2) = (ys[2 * i], ys[2 * i + 1]);
        sum += euclidean_distance(x1, y2) + euclidean_distance(x2, y1)
            - euclidean_distance(x1, x2)
            - euclidean_distance(y1, y2);
    }
    Ok(DiscrepancyValue {
        value: sum / n2 as f64,
        kind: EstimatorKind::EnergyLinear,
    })
}

fn mean_cross_distance(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for a in x {
        for b in y {
            s += euclidean_distance(a, b);
        }
    }
    s / (x.len() * y.len()) as f64
}

/// Sum over distinct unordered pairs within one sample.
fn within_pair_sum(x: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            s += euclidean_distance(&x[i], &x[j]);
        }
    }
    s
}

/// `2·E‖x − y‖ − E‖x − x'‖ − E‖y − y'‖` over the empirical distributions.
pub fn energy_distance_quadratic(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<DiscrepancyValue> {
    check_pair(x, y)?;
    let (x, y) = canonical(x, y);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let xx = 2.0 * within_pair_sum(x) / (nx * nx);
    let yy = 2.0 * within_pair_sum(y) / (ny * ny);
    Ok(DiscrepancyValue {
        value: 2.0 * mean_cross_distance(x, y) - xx - yy,
        kind: EstimatorKind::EnergyQuadratic,
    })
}

/// As [`energy_distance_quadratic`] but with within-sample means over
/// distinct pairs only. Single-point samples contribute zero.
pub fn energy_distance_unbiased(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<DiscrepancyValue> {
    check_pair(x, y)?;
    let (x, y) = canonical(x, y);
    let u = |s: &[Vec<f64>]| {
        let n = s.len() as f64;
        if s.len() < 2 {
            0.0
        } else {
            2.0 * within_pair_sum(s) / (n * (n - 1.0))
        }
    };
    Ok(DiscrepancyValue {
        value: 2.0 * mean_cross_distance(x, y) - u(x) - u(y),
        kind: EstimatorKind::EnergyUnbiased,
    })
}

/// Orders the two samples so that swapping the arguments of a symmetric
/// estimator yields bit-identical floating-point results.
fn canonical<'a>(x: &'a [Vec<f64>], y: &'a [Vec<f64>]) -> (&'a [Vec<f64>], &'a [Vec<f64>]) {
    let ord = x.len().cmp(&y.len()).then_with(|| {
        x.iter()
            .flatten()
            .zip(y.iter().flatten())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if ord.is_gt() {
        (y, x)
    } else {
        (x, y)
    }
}

/// Biased MMD² `mean k(x,x') − 2·mean k(x,y) + mean k(y,y')`.
pub fn mmd_quadratic(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    cfg: &KernelConfig,
) -> Result<DiscrepancyValue> {
    check_pair(x, y)?;
    let (x, y) = canonical(x, y);
    let mean_k = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut s = 0.0;
        for p in a {
            for q in b {
                s += cfg.eval(p, q);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    Ok(DiscrepancyValue {
        value: mean_k(x, x) - 2.0 * mean_k(x, y) + mean_k(y, y),
        kind: EstimatorKind::MmdQuadratic,
    })
}
