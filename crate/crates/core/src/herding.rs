//! Kernel herding from an empirical kernel mean.
//!
//! Given `t` points already selected, the next point maximizes
//!
//! ```text
//! Σᵢ wᵢ k(θ, θᵢ) − 1/(t+1) · Σⱼ≤t k(θ, θⱼ^sel)
//! ```
//!
//! over a search box. The argmax is derivative-free: each round evaluates a
//! candidate pool made of the source particles, uniform draws from the box,
//! Gaussian perturbations of the incumbent, and a few rounds of shrinking
//! local perturbations. Candidates are evaluated in parallel; the winner is
//! the first candidate (in generation order) attaining the maximum, so the
//! output does not depend on the thread count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kabc::WeightedParticleSet;
use crate::seed::derived_rng;
use crate::{Error, ParamPoint, Result};

/// Perturbation scale of the first local stage, as a fraction of box width.
pub const LOCAL_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Per-dimension `[lo, hi]`.
    pub bounds: Vec<(f64, f64)>,
    pub pool_size: usize,
    pub refine_steps: usize,
    /// Dimensions that are integer-valued at the simulator boundary. Herding
    /// itself treats every dimension as continuous.
    #[serde(default)]
    pub integer_mask: Vec<bool>,
}

impl SearchConfig {
    pub fn new(bounds: Vec<(f64, f64)>, pool_size: usize, refine_steps: usize) -> Result<Self> {
        let cfg = Self {
            integer_mask: vec![false; bounds.len()],
            bounds,
            pool_size,
            refine_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "search box dimension {i} must satisfy lo < hi (finite), got [{lo}, {hi}]"
                )));
            }
        }
        if self.pool_size == 0 {
            return Err(Error::InvalidArgument("pool_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn clamp(&self, theta: &mut [f64]) {
        for (v, (lo, hi)) in theta.iter_mut().zip(&self.bounds) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// The embedding being herded together with the points selected so far.
#[derive(Debug, Clone)]
pub struct HerdingState<'a> {
    source: &'a WeightedParticleSet,
    selected: Vec<ParamPoint>,
}

impl<'a> HerdingState<'a> {
    pub fn new(source: &'a WeightedParticleSet) -> Self {
        Self {
            source,
            selected: Vec::new(),
        }
    }

    pub fn with_selected(source: &'a WeightedParticleSet, selected: Vec<ParamPoint>) -> Self {
        Self { source, selected }
    }

    pub fn source(&self) -> &WeightedParticleSet {
        self.source
    }

    pub fn selected(&self) -> &[ParamPoint] {
        &self.selected
    }

    pub fn push(&mut self, theta: ParamPoint) {
        self.selected.push(theta);
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        let k = self.source.kernel();
        let attraction = self.source.evaluate(theta);
        if self.selected.is_empty() {
            return attraction;
        }
        let repulsion: f64 = self.selected.iter().map(|s| k.eval(theta, s)).sum();
        attraction - repulsion / (self.selected.len() + 1) as f64
    }
}

pub fn herding_objective(state: &HerdingState<'_>, theta: &[f64]) -> f64 {
    state.objective(theta)
}

/// Diagnostics for one herding round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub chosen_value: f64,
    /// Largest objective among all candidates evaluated this round.
    pub best_candidate_value: f64,
    pub candidates_evaluated: usize,
}

#[derive(Debug, Clone)]
pub struct HerdingOutput {
    pub points: Vec<ParamPoint>,
    pub rounds: Vec<RoundLog>,
}

/// Herd `count` points from `source` inside the search box.
pub fn herd(
    source: &WeightedParticleSet,
    count: usize,
    search: &SearchConfig,
    seed: u64,
) -> Result<Vec<ParamPoint>> {
    herd_logged(source, count, search, seed).map(|o| o.points)
}

pub fn herd_logged(
    source: &WeightedParticleSet,
    count: usize,
    search: &SearchConfig,
    seed: u64,
) -> Result<HerdingOutput> {
    search.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument("herding count must be at least 1".into()));
    }
    if source.dim() != search.dim() {
        return Err(Error::DimensionMismatch {
            expected: search.dim(),
            found: source.dim(),
        });
    }
    let anchors: Vec<ParamPoint> = source
        .particles()
        .iter()
        .filter(|p| search.contains(p))
        .cloned()
        .collect();

    let mut state = HerdingState::new(source);
    let mut rounds = Vec::with_capacity(count);
    for round in 0..count {
        let mut rng = derived_rng(seed, round as u64, 0);
        let mut evaluated = 0usize;
        let mut round_max = f64::NEG_INFINITY;
        let mut best: Option<(f64, ParamPoint)> = None;

        let mut consider = |cands: Vec<ParamPoint>, state: &HerdingState<'_>, best: &mut Option<(f64, ParamPoint)>| {
            let values: Vec<f64> = cands.par_iter().map(|c| state.objective(c)).collect();
            evaluated += cands.len();
            round_max = values.iter().copied().fold(round_max, f64::max);
            for (c, v) in cands.into_iter().zip(values) {
                // strict improvement only: earliest candidate wins ties
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    *best = Some((v, c));
                }
            }
        };

        let mut global = anchors.clone();
        for _ in 0..search.pool_size {
            global.push(
                search
                    .bounds
                    .iter()
                    .map(|&(lo, hi)| rng.random_range(lo..=hi))
                    .collect(),
            );
        }
        if global.is_empty() {
            return Err(Error::EmptyInput);
        }
        consider(global, &state, &mut best);

        for step in 0..=search.refine_steps {
            let scale = LOCAL_SCALE * 0.5f64.powi(step as i32);
            let center = best.as_ref().expect("pool is nonempty").1.clone();
            let local: Vec<ParamPoint> = (0..search.pool_size)
                .map(|_| {
                    let mut c: ParamPoint = center
                        .iter()
                        .zip(&search.bounds)
                        .map(|(v, (lo, hi))| v + scale * (hi - lo) * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    search.clamp(&mut c);
                    c
                })
                .collect();
            consider(local, &state, &mut best);
        }

        let (value, point) = best.expect("pool is nonempty");
        rounds.push(RoundLog {
            chosen_value: value,
            best_candidate_value: round_max,
            candidates_evaluated: evaluated,
        });
        state.push(point);
    }
    Ok(HerdingOutput {
        points: state.selected,
        rounds,
    })
}
