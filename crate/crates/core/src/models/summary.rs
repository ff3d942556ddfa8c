use serde::{Deserialize, Serialize};

use crate::{Dataset, Error, Result};

/// Value used to fill non-histogram summaries of diverged simulations. Any
/// finite summary is then far from it under every sensible bandwidth.
pub const DIVERGED_FILL: f64 = 1e12;

/// Reduces a dataset to a fixed-length vector for the data kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Summarizer {
    /// Observation vectors concatenated in order.
    Identity,
    /// Normalized frequencies of the first coordinate over `bins` equal
    /// bins of `[lo, hi]`. Out-of-range values land in the edge bins.
    Histogram { bins: usize, lo: f64, hi: f64 },
    /// A histogram whose range is fixed once from the observed data: its
    /// min and max, each pushed outward by `widen` times the observed range.
    AutoHistogram {
        bins: usize,
        #[serde(default = "default_widen")]
        widen: f64,
    },
    /// Empirical quantiles at levels `(k + ½)/levels` of every coordinate
    /// and, with `pairwise`, of `(xᵢ ± xⱼ)/√2` for each `i < j`.
    Quantiles {
        levels: usize,
        #[serde(default)]
        pairwise: bool,
    },
}

fn default_widen() -> f64 {
    0.5
}

impl Summarizer {
    /// Replace data-dependent variants by concrete ones.
    pub fn resolve(&self, observed: &Dataset) -> Result<Summarizer> {
        match *self {
            Summarizer::AutoHistogram { bins, widen } => {
                let values: Vec<f64> = observed.iter().map(|r| r[0]).filter(|v| v.is_finite()).collect();
                if values.is_empty() {
                    return Err(Error::EmptyInput);
                }
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let range = if hi > lo { hi - lo } else { 1.0 + lo.abs() };
                let resolved = Summarizer::Histogram {
                    bins,
                    lo: lo - widen * range,
                    hi: hi + widen * range,
                };
                resolved.validate()?;
                Ok(resolved)
            }
            _ => Ok(self.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Summarizer::Identity => Ok(()),
            Summarizer::Histogram { bins, lo, hi } => {
                if bins == 0 || !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    Err(Error::InvalidArgument(format!(
                        "histogram needs bins ≥ 1 and finite lo < hi, got {bins} bins on [{lo}, {hi}]"
                    )))
                } else {
                    Ok(())
                }
            }
            Summarizer::AutoHistogram { bins, widen } => {
                if bins == 0 || !(widen >= 0.0 && widen.is_finite()) {
                    Err(Error::InvalidArgument("auto histogram needs bins ≥ 1 and a finite widen ≥ 0".into()))
                } else {
                    Ok(())
                }
            }
            Summarizer::Quantiles { levels, .. } => {
                if levels == 0 {
                    Err(Error::InvalidArgument("quantile summary needs at least one level".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Summary length for `n_obs` observations in `obs_dim` dimensions.
    pub fn output_len(&self, n_obs: usize, obs_dim: usize) -> usize {
        match *self {
            Summarizer::Identity => n_obs * obs_dim,
            Summarizer::Histogram { bins, .. } | Summarizer::AutoHistogram { bins, .. } => bins,
            Summarizer::Quantiles { levels, pairwise } => {
                let pairs = if pairwise { obs_dim * obs_dim.saturating_sub(1) } else { 0 };
                levels * (obs_dim + pairs)
            }
        }
    }

    /// Stand-in summary for a simulation that diverged.
    pub fn diverged(&self, len: usize) -> Vec<f64> {
        match *self {
            Summarizer::Histogram { bins, .. } | Summarizer::AutoHistogram { bins, .. } => {
                let mut v = vec![0.0; bins];
                v[bins - 1] = 1.0;
                v
            }
            _ => vec![DIVERGED_FILL; len],
        }
    }
}

/// Reduce `data` with `s`. An unresolved `AutoHistogram` uses the range
/// of `data` itself.
pub fn summarize(data: &Dataset, s: &Summarizer) -> Vec<f64> {
    match *s {
        Summarizer::AutoHistogram { .. } => match s.resolve(data) {
            Ok(r) => summarize(data, &r),
            Err(_) => s.diverged(s.output_len(data.len(), 1)),
        },
        Summarizer::Identity => data.iter().flatten().copied().collect(),
        Summarizer::Histogram { bins, lo, hi } => histogram(data, bins, lo, hi),
        Summarizer::Quantiles { levels, pairwise } => quantile_summary(data, levels, pairwise),
    }
}

fn histogram(data: &Dataset, bins: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for row in data {
        let x = row[0];
        let idx = if x.is_nan() {
            bins - 1
        } else {
            let raw = ((x - lo) / width).floor();
            if raw < 0.0 {
                0
            } else {
                (raw as usize).min(bins - 1)
            }
        };
        counts[idx] += 1;
    }
    // differences of cumulative fractions, so that the left-to-right sum of
    // the bins reproduces C_k / n at every prefix and ends at exactly one
    let n = data.len().max(1) as f64;
    let mut cum = 0u64;
    let mut prev = 0.0;
    counts
        .into_iter()
        .map(|c| {
            cum += c;
            let here = cum as f64 / n;
            let f = here - prev;
            prev = here;
            f
        })
        .collect()
}

fn quantiles_of(mut values: Vec<f64>, levels: usize, out: &mut Vec<f64>) {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    for k in 0..levels {
        let p = (k as f64 + 0.5) / levels as f64;
        // linear interpolation between order statistics
        let pos = p * (n as f64 - 1.0);
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let v = if i + 1 < n {
            values[i] + frac * (values[i + 1] - values[i])
        } else {
            values[n - 1]
        };
        out.push(v);
    }
}

fn quantile_summary(data: &Dataset, levels: usize, pairwise: bool) -> Vec<f64> {
    let d = data.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    if data.is_empty() {
        return out;
    }
    for j in 0..d {
        quantiles_of(data.iter().map(|r| r[j]).collect(), levels, &mut out);
    }
    if pairwise {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..d {
            for j in (i + 1)..d {
                quantiles_of(data.iter().map(|x| r * (x[i] + x[j])).collect(), levels, &mut out);
                quantiles_of(data.iter().map(|x| r * (x[i] - x[j])).collect(), levels, &mut out);
            }
        }
    }
    out
}
