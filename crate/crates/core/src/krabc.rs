//! The recursive driver: kernel ABC followed by kernel herding, repeated.
//!
//! Each iteration simulates one dataset per particle, embeds the posterior
//! with kernel ABC and herds `n` fresh particles from that embedding. The
//! point estimate is the first herded point of the last iteration.
//!
//! Herding and both kernels on the parameter side work in a per-iteration
//! standardized frame: internal coordinates are centered on the particle
//! mean and divided by the particle standard deviation (per dimension).
//! This keeps one isotropic bandwidth meaningful when coordinates live on
//! very different scales. Disable it with `standardize = false`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrepancy::energy_distance_quadratic;
use crate::herding::{herd, SearchConfig};
use crate::kabc::{embed_posterior, WeightedParticleSet, DEGENERATE_WEIGHT_SUM};
use crate::kernels::{median_heuristic_seeded, median_in_place, KernelConfig};
use crate::models::{summarize, PriorSpec, Simulator, Summarizer};
use crate::seed::{derive_seed, rng_from_seed, stream};
use crate::{euclidean_distance, Dataset, Error, ParamPoint, Result};

/// How a kernel bandwidth is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BandwidthPolicy {
    Fixed { value: f64 },
    /// Median pairwise distance times `multiplier`, recomputed every iteration.
    Median {
        #[serde(default = "one")]
        multiplier: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for BandwidthPolicy {
    fn default() -> Self {
        BandwidthPolicy::Median { multiplier: 1.0 }
    }
}

impl BandwidthPolicy {
    fn validate(&self, what: &str) -> Result<()> {
        let v = match *self {
            BandwidthPolicy::Fixed { value } => value,
            BandwidthPolicy::Median { multiplier } => multiplier,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{what} bandwidth must be positive and finite, got {v}")))
        }
    }

    /// Same policy with its scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            BandwidthPolicy::Fixed { value } => BandwidthPolicy::Fixed { value: value * factor },
            BandwidthPolicy::Median { multiplier } => BandwidthPolicy::Median {
                multiplier: multiplier * factor,
            },
        }
    }
}

/// Where herding searches, in internal parameter coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SearchBox {
    /// The same box at every iteration.
    Fixed { bounds: Vec<(f64, f64)> },
    /// Bounding box of the current particles, widened by `inflate` times its
    /// width on each side and clamped to the simulator's finite bounds.
    Adaptive {
        #[serde(default = "half")]
        inflate: f64,
    },
}

fn half() -> f64 {
    0.5
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox::Adaptive { inflate: 0.5 }
    }
}

fn default_pool() -> usize {
    200
}

fn default_refine() -> usize {
    8
}

fn yes() -> bool {
    true
}

/// Everything a single run needs besides the observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub simulator: Simulator,
    pub prior: PriorSpec,
    pub summarizer: Summarizer,
    pub n_particles: usize,
    pub n_iterations: usize,
    pub delta: f64,
    #[serde(default)]
    pub theta_bandwidth: BandwidthPolicy,
    #[serde(default)]
    pub y_bandwidth: BandwidthPolicy,
    #[serde(default)]
    pub search_box: SearchBox,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "default_refine")]
    pub refine_steps: usize,
    #[serde(default = "yes")]
    pub standardize: bool,
    /// Simulate at each iteration's estimate and record its energy distance
    /// to the observed data.
    #[serde(default = "yes")]
    pub track_data_error: bool,
    #[serde(default)]
    pub master_seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.simulator.validate()?;
        self.prior.validate()?;
        self.summarizer.validate()?;
        let spec = self.simulator.spec();
        if self.prior.dim() != spec.param_dim {
            return Err(Error::Config(format!(
                "prior has dimension {} but the {} simulator takes {} parameters",
                self.prior.dim(),
                spec.name,
                spec.param_dim
            )));
        }
        if self.n_particles < 2 {
            return Err(Error::Config("n_particles must be at least 2".into()));
        }
        if self.n_iterations == 0 {
            return Err(Error::Config("n_iterations must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if self.pool_size == 0 {
            return Err(Error::Config("pool_size must be at least 1".into()));
        }
        self.theta_bandwidth.validate("theta")?;
        self.y_bandwidth.validate("y")?;
        match &self.search_box {
            SearchBox::Fixed { bounds } => {
                if bounds.len() != spec.param_dim {
                    return Err(Error::Config(format!(
                        "search box has {} dimensions, expected {}",
                        bounds.len(),
                        spec.param_dim
                    )));
                }
                SearchConfig::new(bounds.clone(), 1, 0)?;
            }
            SearchBox::Adaptive { inflate } => {
                if !(*inflate >= 0.0 && inflate.is_finite()) {
                    return Err(Error::Config(format!("inflate must be finite and ≥ 0, got {inflate}")));
                }
            }
        }
        Ok(())
    }
}

/// Diagnostics for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub sum_of_weights: f64,
    /// `|Σ wᵢ|` fell below the degeneracy threshold.
    pub degenerate_weights: bool,
    /// First herded point, natural coordinates.
    pub estimate: ParamPoint,
    pub data_error: Option<f64>,
    pub y_bandwidth: f64,
    pub theta_bandwidth: f64,
    pub n_diverged: usize,
    /// Per-dimension min, max and mean of the particles simulated at this
    /// iteration, natural coordinates.
    pub particle_min: ParamPoint,
    pub particle_max: ParamPoint,
    pub particle_mean: ParamPoint,
    pub wall_s: f64,
}

impl IterationRecord {
    /// Largest per-dimension range `max − min`.
    pub fn spread(&self) -> f64 {
        self.particle_min
            .iter()
            .zip(&self.particle_max)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub final_estimate: ParamPoint,
    /// Particles herded at the last iteration, natural coordinates.
    pub final_particles: Vec<ParamPoint>,
}

/// Per-dimension affine map between internal and herding coordinates.
#[derive(Debug, Clone)]
struct Frame {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Frame {
    fn identity(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    fn fit(points: &[ParamPoint], previous: Option<&Frame>) -> Self {
        let d = points[0].len();
        let n = points.len() as f64;
        let mut center = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let m = points.iter().map(|p| p[j]).sum::<f64>() / n;
            let var = points.iter().map(|p| (p[j] - m).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            center[j] = m;
            scale[j] = if sd.is_finite() && sd > 1e-12 * (1.0 + m.abs()) {
                sd
            } else {
                previous.map_or(1.0, |f| f.scale[j])
            };
        }
        Self { center, scale }
    }

    fn forward(&self, p: &[f64]) -> ParamPoint {
        p.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }

    fn backward(&self, z: &[f64]) -> ParamPoint {
        z.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| v * s + c)
            .collect()
    }

    fn bound(&self, j: usize, v: f64) -> f64 {
        (v - self.center[j]) / self.scale[j]
    }
}

fn search_bounds(policy: &SearchBox, frame: &Frame, z: &[ParamPoint], sim_bounds: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let d = frame.center.len();
    (0..d)
        .map(|j| {
            let (mut lo, mut hi) = match policy {
                SearchBox::Fixed { bounds } => (frame.bound(j, bounds[j].0), frame.bound(j, bounds[j].1)),
                SearchBox::Adaptive { inflate } => {
                    let lo = z.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
                    let hi = z.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
                    // collapsed particles still get a box one frame unit wide
                    let width = (hi - lo).max(1.0);
                    let mid = 0.5 * (lo + hi);
                    let half = 0.5 * width * (1.0 + 2.0 * inflate);
                    (mid - half, mid + half)
                }
            };
            let (slo, shi) = sim_bounds[j];
            if slo.is_finite() {
                lo = lo.max(frame.bound(j, slo));
            }
            if shi.is_finite() {
                hi = hi.min(frame.bound(j, shi));
            }
            if !(lo < hi) {
                let m = 0.5 * (lo + hi);
                (m - 0.5, m + 0.5)
            } else {
                (lo, hi)
            }
        })
        .collect()
}

fn column_stats(points: &[ParamPoint]) -> (ParamPoint, ParamPoint, ParamPoint) {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut mean = vec![0.0; d];
    for p in points {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
            mean[j] += p[j] / n;
        }
    }
    (lo, hi, mean)
}

/// Bandwidth for the data kernel when the median heuristic degenerates:
/// the last valid value, else the median distance to the observation.
fn fallback_y_bandwidth(last: Option<f64>, summaries: &[Vec<f64>], observed: &[f64]) -> f64 {
    if let Some(b) = last {
        return b;
    }
    let mut d: Vec<f64> = summaries
        .iter()
        .map(|s| euclidean_distance(s, observed))
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();
    if d.is_empty() {
        1.0
    } else {
        median_in_place(&mut d)
    }
}

/// Run the recursive algorithm on `observed`.
pub fn run_krabc(cfg: &RunConfig, observed: &Dataset) -> Result<RunTrace> {
    cfg.validate()?;
    if observed.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sim = &cfg.simulator;
    let spec = sim.spec();
    let summarizer = cfg.summarizer.resolve(observed)?;
    let obs_summary = summarize(observed, &summarizer);
    let summary_len = obs_summary.len();
    let n = cfg.n_particles;
    let master = cfg.master_seed;

    let mut particles: Vec<ParamPoint> = (0..n)
        .map(|i| {
            let nat = cfg.prior.sample_with(&mut rng_from_seed(derive_seed(master, 0, i as u64)));
            sim.to_internal(&nat)
        })
        .collect();

    let mut records = Vec::with_capacity(cfg.n_iterations);
    let mut last_y_bw: Option<f64> = None;
    let mut last_theta_bw: Option<f64> = None;
    let mut frame: Option<Frame> = None;
    let mut final_particles = Vec::new();

    for it in 1..=cfg.n_iterations {
        let started = Instant::now();
        let natural: Vec<ParamPoint> = particles.iter().map(|p| sim.to_natural(p)).collect();

        let outcomes: Vec<Option<Vec<f64>>> = natural
            .par_iter()
            .enumerate()
            .map(|(i, theta)| {
                sim.simulate(theta, derive_seed(master, it as u64, i as u64))
                    .ok()
                    .map(|data| summarize(&data, &summarizer))
                    .filter(|s| s.len() == summary_len && s.iter().all(|v| v.is_finite()))
            })
            .collect();
        let n_diverged = outcomes.iter().filter(|o| o.is_none()).count();
        if n_diverged == n {
            return Err(Error::AllSimulationsDiverged { iteration: it, count: n });
        }
        let valid: Vec<Vec<f64>> = outcomes.iter().flatten().cloned().collect();
        let summaries: Vec<Vec<f64>> = outcomes
            .into_iter()
            .map(|o| o.unwrap_or_else(|| summarizer.diverged(summary_len)))
            .collect();

        let y_bw = match cfg.y_bandwidth {
            BandwidthPolicy::Fixed { value } => value,
            BandwidthPolicy::Median { multiplier } => {
                let seed = derive_seed(master, it as u64, stream::SUBSAMPLE);
                match median_heuristic_seeded(&valid, seed) {
                    Ok(m) => m * multiplier,
                    Err(_) => fallback_y_bandwidth(last_y_bw, &valid, &obs_summary),
                }
            }
        };
        last_y_bw = Some(y_bw);

        let f = if cfg.standardize {
            Frame::fit(&particles, frame.as_ref())
        } else {
            Frame::identity(spec.param_dim)
        };
        let z: Vec<ParamPoint> = particles.iter().map(|p| f.forward(p)).collect();
        let theta_bw = match cfg.theta_bandwidth {
            BandwidthPolicy::Fixed { value } => value,
            BandwidthPolicy::Median { multiplier } => {
                let seed = derive_seed(master, it as u64, stream::SUBSAMPLE ^ 1);
                match median_heuristic_seeded(&z, seed) {
                    Ok(m) => m * multiplier,
                    Err(_) => last_theta_bw.unwrap_or(1.0),
                }
            }
        };
        last_theta_bw = Some(theta_bw);

        let embedding = embed_posterior(
            &z,
            &summaries,
            &obs_summary,
            &KernelConfig::new(y_bw)?,
            &KernelConfig::new(theta_bw)?,
            cfg.delta,
        )?;
        let sum_of_weights = embedding.weight_sum();

        let search = SearchConfig {
            bounds: search_bounds(&cfg.search_box, &f, &z, &spec.bounds),
            pool_size: cfg.pool_size,
            refine_steps: cfg.refine_steps,
            integer_mask: spec.integer_mask.clone(),
        };
        let herded = herd(&embedding, n, &search, derive_seed(master, it as u64, stream::HERDING))?;
        let next: Vec<ParamPoint> = herded.iter().map(|p| f.backward(p)).collect();
        let estimate = sim.to_natural(&next[0]);

        let data_error = if cfg.track_data_error {
            data_error_at(sim, &estimate, observed, derive_seed(master, it as u64, stream::DATA_ERROR))
        } else {
            None
        };

        let (particle_min, particle_max, particle_mean) = column_stats(&natural);
        records.push(IterationRecord {
            iteration: it,
            sum_of_weights,
            degenerate_weights: sum_of_weights.abs() < DEGENERATE_WEIGHT_SUM,
            estimate,
            data_error,
            y_bandwidth: y_bw,
            theta_bandwidth: theta_bw,
            n_diverged,
            particle_min,
            particle_max,
            particle_mean,
            wall_s: started.elapsed().as_secs_f64(),
        });
        if it == cfg.n_iterations {
            final_particles = next.iter().map(|p| sim.to_natural(p)).collect();
        }
        particles = next;
        frame = Some(f);
    }

    let final_estimate = records.last().expect("at least one iteration").estimate.clone();
    Ok(RunTrace {
        records,
        final_estimate,
        final_particles,
    })
}

/// Quadratic energy distance between `observed` and a fresh simulation at
/// `theta`; `None` if the simulation fails.
pub fn data_error_at(sim: &Simulator, theta: &[f64], observed: &Dataset, seed: u64) -> Option<f64> {
    let n = observed.len();
    let data = sim.with_n_obs(n).simulate(theta, seed).ok()?;
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return None;
    }
    energy_distance_quadratic(observed, &data).ok().map(|d| d.value)
}

/// Squared RKHS distance between `source` and the uniform-weight kernel
/// mean of `points`, using the source's kernel.
pub fn mmd_to_embedding(points: &[ParamPoint], source: &WeightedParticleSet) -> f64 {
    let k = source.kernel();
    let w = source.weights();
    let ps = source.particles();
    let m = points.len() as f64;
    let mut ss = 0.0;
    for (i, a) in ps.iter().enumerate() {
        for (j, b) in ps.iter().enumerate() {
            ss += w[i] * w[j] * k.eval(a, b);
        }
    }
    let mut sp = 0.0;
    for (i, a) in ps.iter().enumerate() {
        for q in points {
            sp += w[i] * k.eval(a, q);
        }
    }
    let mut pp = 0.0;
    for a in points {
        for b in points {
            pp += k.eval(a, b);
        }
    }
    ss - 2.0 * sp / m + pp / (m * m)
}

/// Mean relative absolute error; coordinates whose truth is zero contribute
/// their absolute error instead.
pub fn parameter_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| if *t == 0.0 { (e - t).abs() } else { ((e - t) / t).abs() })
        .sum();
    Ok(total / truth.len() as f64)
}

/// Mixture errors after sorting components by descending weight.
///
/// `phi_error` is the Euclidean distance between the sorted weights and
/// `truth_phi` padded with zeros. `mu_error` compares only the means of the
/// top `truth_mu.len()` components.
pub fn sorted_mixture_error(phi: &[f64], mu: &[f64], truth_phi: &[f64], truth_mu: &[f64]) -> Result<(f64, f64)> {
    if phi.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            found: mu.len(),
        });
    }
    if truth_phi.len() > phi.len() || truth_mu.len() > phi.len() {
        return Err(Error::InvalidArgument(
            "estimate has fewer components than the truth".into(),
        ));
    }
    let mut order: Vec<usize> = (0..phi.len()).collect();
    // stable sort: equal weights keep their original order
    order.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]));
    let phi_err = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| (phi[i] - truth_phi.get(rank).copied().unwrap_or(0.0)).powi(2))
        .sum::<f64>()
        .sqrt();
    let mu_err = truth_mu
        .iter()
        .enumerate()
        .map(|(rank, t)| (mu[order[rank]] - t).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok((phi_err, mu_err))
}

/// One point of a hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperCandidate {
    pub theta_multiplier: f64,
    pub y_multiplier: f64,
    pub delta: f64,
}

impl HyperCandidate {
    pub fn apply(&self, template: &RunConfig) -> RunConfig {
        let mut cfg = template.clone();
        cfg.theta_bandwidth = template.theta_bandwidth.scaled(self.theta_multiplier);
        cfg.y_bandwidth = template.y_bandwidth.scaled(self.y_multiplier);
        cfg.delta = self.delta;
        cfg
    }
}

/// Cartesian product of multiplier and delta grids, delta varying fastest.
pub fn candidate_grid(theta_multipliers: &[f64], y_multipliers: &[f64], deltas: &[f64]) -> Vec<HyperCandidate> {
    let mut out = Vec::new();
    for &t in theta_multipliers {
        for &y in y_multipliers {
            for &d in deltas {
                out.push(HyperCandidate {
                    theta_multiplier: t,
                    y_multiplier: y,
                    delta: d,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub config: RunConfig,
    pub index: usize,
    /// Held-out energy distance per candidate; `None` for aborted runs.
    pub scores: Vec<Option<f64>>,
}

/// Split observations 75/25: shuffled for i.i.d. data, in order for series.
pub fn split_observed(observed: &Dataset, iid: bool, seed: u64) -> (Dataset, Dataset) {
    let n = observed.len();
    let mut idx: Vec<usize> = (0..n).collect();
    if iid {
        idx.shuffle(&mut rng_from_seed(seed));
    }
    let n_train = ((0.75 * n as f64).round() as usize).clamp(1, n.max(1));
    let train: Dataset = idx[..n_train].iter().map(|&i| observed[i].clone()).collect();
    let mut test: Dataset = idx[n_train..].iter().map(|&i| observed[i].clone()).collect();
    if test.is_empty() {
        // nothing left to hold out: score against the training part
        test = train.clone();
    }
    (train, test)
}

/// Pick the candidate whose estimate, fitted on 75% of the observations,
/// best reproduces the held-out 25% (quadratic energy distance). Ties go
/// to the lowest index.
pub fn select_hyperparameters(template: &RunConfig, observed: &Dataset, candidates: &[HyperCandidate]) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate grid is empty".into()));
    }
    if candidates.len() == 1 {
        return Ok(Selection {
            config: candidates[0].apply(template),
            index: 0,
            scores: vec![None],
        });
    }
    let master = template.master_seed;
    let (train, test) = split_observed(observed, template.simulator.is_iid(), derive_seed(master, 0, stream::SPLIT));
    let scores: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|c| {
            let mut cfg = c.apply(template);
            cfg.simulator = cfg.simulator.with_n_obs(train.len());
            cfg.track_data_error = false;
            let trace = run_krabc(&cfg, &train).ok()?;
            data_error_at(
                &template.simulator,
                &trace.final_estimate,
                &test,
                derive_seed(master, 0, stream::DATA_ERROR),
            )
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(v) = s {
            if best.is_none_or(|(_, b)| *v < b) {
                best = Some((i, *v));
            }
        }
    }
    let (index, _) = best.ok_or(Error::SelectionFailed)?;
    Ok(Selection {
        config: candidates[index].apply(template),
        index,
        scores,
    })
}
