//! Gaussian kernel evaluation, Gram matrices and bandwidth selection.
//!
//! The convention is fixed as `k(x, y) = exp(-‖x - y‖² / (2σ²))`, so
//! `k(x, x) = 1` for every `x`.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::{rng_from_seed, stream};
use crate::{check_dims, euclidean_distance, squared_distance, Error, Result};

/// Number of points above which the median heuristic works on a subsample.
pub const MEDIAN_SUBSAMPLE_LIMIT: usize = 2000;

/// Gaussian kernel bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel value from a precomputed squared distance.
    #[inline]
    pub fn from_sq_dist(&self, sq: f64) -> f64 {
        (-sq / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        self.from_sq_dist(squared_distance(x, y))
    }
}

/// A symmetric positive semi-definite kernel matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps an arbitrary square matrix. Used by tests and callers that
    /// assemble Gram matrices themselves.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Smallest eigenvalue of the (symmetric) matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn gaussian_kernel(x: &[f64], y: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(cfg.eval(x, y))
}

/// Assemble `(k(pᵢ, pⱼ))ᵢⱼ`. Rows are filled in parallel; every entry is
/// computed independently so the result does not depend on scheduling.
pub fn gram_matrix(points: &[Vec<f64>], cfg: &KernelConfig) -> Result<GramMatrix> {
    check_dims(points)?;
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { cfg.eval(&points[i], &points[j]) })
                .collect()
        })
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    // the squared distance is symmetric, but mirror anyway so the matrix is
    // symmetric bit-for-bit
    for i in 0..n {
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
    Ok(GramMatrix { entries: m })
}

/// `(k(pᵢ, target))ᵢ`.
pub fn kernel_vector(points: &[Vec<f64>], target: &[f64], cfg: &KernelConfig) -> Result<Vec<f64>> {
    let dim = check_dims(points)?;
    if dim != target.len() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: target.len(),
        });
    }
    Ok(points.iter().map(|p| cfg.eval(p, target)).collect())
}

/// Median of all pairwise Euclidean distances.
///
/// Above [`MEDIAN_SUBSAMPLE_LIMIT`] points a fixed-seed uniform subsample of
/// that size is used instead.
pub fn median_heuristic(points: &[Vec<f64>]) -> Result<f64> {
    median_heuristic_seeded(points, 0)
}

pub fn median_heuristic_seeded(points: &[Vec<f64>], seed: u64) -> Result<f64> {
    check_dims(points)?;
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "median heuristic needs at least two points".into(),
        ));
    }
    let subset: Vec<&Vec<f64>> = if points.len() > MEDIAN_SUBSAMPLE_LIMIT {
        let mut rng = rng_from_seed(crate::seed::derive_seed(seed, 0, stream::SUBSAMPLE));
        let mut idx = sample(&mut rng, points.len(), MEDIAN_SUBSAMPLE_LIMIT).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &points[i]).collect()
    } else {
        points.iter().collect()
    };

    let m = subset.len();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            dists.push(euclidean_distance(subset[i], subset[j]));
        }
    }
    let med = median_in_place(&mut dists);
    // a zero median (more than half the pairs coincide) is no usable
    // bandwidth either
    if med > 0.0 && med.is_finite() {
        Ok(med)
    } else {
        Err(Error::DegenerateBandwidth(m))
    }
}

/// Median with the mean-of-middle-pair rule for even lengths.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// `base · 2^j` for `j = -4..=4` (nine points).
pub fn bandwidth_grid(base: f64) -> Vec<f64> {
    bandwidth_grid_with(base, 9)
}

/// `points` log-spaced multiples of `base` between `base/16` and `16·base`.
pub fn bandwidth_grid_with(base: f64, points: usize) -> Vec<f64> {
    log_grid(base / 16.0, base * 16.0, points)
}

/// `points` logarithmically equally spaced values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "log_grid needs 0 < lo <= hi");
    match points {
        0 => Vec::new(),
        1 => vec![(lo * hi).sqrt()],
        _ => {
            let (a, b) = (lo.log2(), hi.log2());
            let step = (b - a) / (points - 1) as f64;
            (0..points).map(|i| (a + step * i as f64).exp2()).collect()
        }
    }
}
