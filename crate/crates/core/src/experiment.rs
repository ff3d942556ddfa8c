//! Experiment configs, trial orchestration and CSV reports.
//!
//! A config names one of the built-in experiment bundles (or `custom`) and
//! may override any part of it. Trials run in a bounded worker pool with
//! seeds `master_seed + trial`; results are written in trial order so the
//! files do not depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernels::{bandwidth_grid, log_grid};
use crate::krabc::{
    candidate_grid, data_error_at, parameter_error, run_krabc, select_hyperparameters, sorted_mixture_error,
    BandwidthPolicy, RunConfig, RunTrace, SearchBox,
};
use crate::models::{sample_prior, AmplitudeLaw, PriorSpec, Simulator, Summarizer};
use crate::oracle::ConjugateProblem;
use crate::seed::{derive_seed, stream};
use crate::{Dataset, Error, ParamPoint, Result};

/// Environment variable that overrides `master_seed`.
pub const SEED_ENV: &str = "KRABC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    GaussMisspecified,
    Blowfly,
    AlphaStable,
    Mixture,
    ConjugateOracle,
    Custom,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::GaussMisspecified,
        ExperimentName::Blowfly,
        ExperimentName::AlphaStable,
        ExperimentName::Mixture,
        ExperimentName::ConjugateOracle,
        ExperimentName::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::GaussMisspecified => "gauss-misspecified",
            ExperimentName::Blowfly => "blowfly",
            ExperimentName::AlphaStable => "alpha-stable",
            ExperimentName::Mixture => "mixture",
            ExperimentName::ConjugateOracle => "conjugate-oracle",
            ExperimentName::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

/// Grid searched by hyperparameter selection before every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionGrid {
    #[serde(default = "default_multipliers")]
    pub theta_multipliers: Vec<f64>,
    #[serde(default = "default_multipliers")]
    pub y_multipliers: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
}

fn default_multipliers() -> Vec<f64> {
    bandwidth_grid(1.0)
}

fn default_deltas() -> Vec<f64> {
    log_grid(1e-4, 1.0, 5)
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Write measured wall time instead of 0 (breaks byte-identical output).
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub run: Option<RunConfig>,
    /// True parameter in natural coordinates. Observed data is simulated
    /// from it per trial unless `observed_csv` is given.
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
    #[serde(default)]
    pub observed_csv: Option<PathBuf>,
    #[serde(default)]
    pub selection: Option<SelectionGrid>,
}

/// Built-in setup for a named experiment.
pub struct Bundle {
    pub run: RunConfig,
    pub truth: Vec<f64>,
    pub trials: usize,
}

pub const GAUSS_TRUE_MEAN: [f64; 20] = [
    10.0, 50.0, 90.0, 130.0, 180.0, 280.0, 390.0, 430.0, 520.0, 630.0, 1010.0, 1050.0, 1090.0, 1130.0, 1180.0,
    1280.0, 1390.0, 1430.0, 1520.0, 1630.0,
];
pub const BLOWFLY_TRUTH: [f64; 6] = [29.0, 260.0, 0.6, 0.3, 7.0, 0.2];
pub const ALPHA_STABLE_TRUTH: [f64; 3] = [1.3, 1.0, 0.2];
pub const MIXTURE_TRUE_PHI: [f64; 2] = [0.7, 0.3];
pub const MIXTURE_TRUE_MU: [f64; 2] = [110.0, 70.0];

/// Observations in the conjugate-oracle experiment.
pub const CONJUGATE_N_OBS: usize = 20;

fn base_run(simulator: Simulator, prior: PriorSpec, summarizer: Summarizer, n: usize, iters: usize, delta: f64) -> RunConfig {
    RunConfig {
        simulator,
        prior,
        summarizer,
        n_particles: n,
        n_iterations: iters,
        delta,
        theta_bandwidth: BandwidthPolicy::default(),
        y_bandwidth: BandwidthPolicy::default(),
        search_box: SearchBox::default(),
        pool_size: 200,
        refine_steps: 8,
        standardize: true,
        track_data_error: true,
        master_seed: 0,
    }
}

impl RunConfig {
    fn with_y_multiplier(mut self, multiplier: f64) -> Self {
        self.y_bandwidth = BandwidthPolicy::Median { multiplier };
        self
    }
}

/// The built-in setup of `name` at `scale`; `None` for `custom`.
pub fn bundle(name: ExperimentName, scale: Scale) -> Option<Bundle> {
    let full = scale == Scale::Paper;
    let trials = |desk: usize| if full { 30 } else { desk };
    let b = match name {
        ExperimentName::GaussMisspecified => Bundle {
            run: base_run(
                Simulator::GaussianMean { dim: 20, n_obs: 100, cov_diag: 40.0 },
                PriorSpec::UniformBox { bounds: vec![(9e6, 1e7); 20] },
                Summarizer::Quantiles { levels: 5, pairwise: false },
                100,
                30,
                1e-4,
            ),
            truth: GAUSS_TRUE_MEAN.to_vec(),
            trials: trials(5),
        },
        ExperimentName::Blowfly => Bundle {
            run: base_run(
                Simulator::Blowfly { t_len: 1000, burn_in: 50 },
                PriorSpec::LogNormalProduct {
                    loc: vec![2.0, 5.0, -0.5, -0.5, 2.0, -1.0],
                    scale: vec![2.0, 0.5, 1.0, 1.0, 1.0, 0.4],
                },
                Summarizer::AutoHistogram { bins: 1000, widen: 0.5 },
                100,
                13,
                1e-3,
            ),
            truth: BLOWFLY_TRUTH.to_vec(),
            trials: trials(5),
        },
        ExperimentName::AlphaStable => Bundle {
            run: base_run(
                Simulator::AlphaStable { dim: 2, n_obs: 1000, amplitude: AmplitudeLaw::Verbatim },
                PriorSpec::UniformBox { bounds: vec![(0.0, 2.0), (0.0, 5.0), (0.0, 5.0)] },
                Summarizer::Quantiles { levels: 20, pairwise: true },
                100,
                14,
                1e-3,
            )
            .with_y_multiplier(4.0),
            truth: ALPHA_STABLE_TRUTH.to_vec(),
            trials: trials(10),
        },
        ExperimentName::Mixture => Bundle {
            run: base_run(
                Simulator::GaussianMixture { components: 4, n_obs: 3000, sd: 20f64.sqrt() },
                PriorSpec::Product {
                    parts: vec![
                        PriorSpec::Dirichlet { concentration: vec![0.01; 4], scale: 1.0 },
                        PriorSpec::NormalProduct { mean: vec![0.0; 4], sd: vec![10.0; 4] },
                    ],
                },
                Summarizer::AutoHistogram { bins: 300, widen: 0.5 },
                100,
                10,
                1e-3,
            ),
            truth: vec![0.7, 0.3, 0.0, 0.0, 110.0, 70.0, 0.0, 0.0],
            trials: trials(5),
        },
        ExperimentName::ConjugateOracle => {
            let p = ConjugateProblem::new(0.0, 100.0, 1.0, vec![0.0; CONJUGATE_N_OBS]).expect("valid");
            let (simulator, prior) = p.model();
            // Fixed kernel on raw θ, as in the closed-form reference, so the
            // powered-posterior contraction is not masked by particle collapse.
            let mut run = base_run(simulator, prior, Summarizer::Quantiles { levels: 5, pairwise: false }, 50, 8, 1e-3);
            run.standardize = false;
            run.theta_bandwidth = BandwidthPolicy::Fixed { value: 0.5 };
            let half = 4.0 * p.prior_var.sqrt();
            run.search_box = SearchBox::Fixed {
                bounds: vec![(p.prior_mean - half, p.prior_mean + half)],
            };
            Bundle {
                run,
                truth: vec![1.0],
                trials: if full { 20 } else { 5 },
            }
        }
        ExperimentName::Custom => return None,
    };
    Some(b)
}

impl ExperimentConfig {
    /// A config for `name` at `scale` with every default filled in.
    pub fn named(name: ExperimentName, scale: Scale) -> Result<Self> {
        let mut cfg = ExperimentConfig {
            experiment: name,
            trials: 0,
            scale,
            master_seed: 0,
            output_dir: None,
            jobs: None,
            record_timing: false,
            run: None,
            truth: None,
            observed_csv: None,
            selection: None,
        };
        cfg.fill_defaults(true)?;
        Ok(cfg)
    }

    /// Fill unset fields from the bundle. `trials_unset` replaces the trial
    /// count with the bundle's.
    fn fill_defaults(&mut self, trials_unset: bool) -> Result<()> {
        if let Some(b) = bundle(self.experiment, self.scale) {
            if self.run.is_none() {
                self.run = Some(b.run);
            }
            if self.truth.is_none() && self.observed_csv.is_none() {
                self.truth = Some(b.truth);
            }
            if trials_unset {
                self.trials = b.trials;
            }
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(PathBuf::from("krabc-out").join(self.experiment.as_str()));
        }
        Ok(())
    }

    pub fn validate_schema(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        let run = self
            .run
            .as_ref()
            .ok_or_else(|| Error::Config("custom experiments need a `run` section".into()))?;
        run.validate()?;
        match (&self.truth, &self.observed_csv) {
            (None, None) => return Err(Error::Config("need `truth` or `observed_csv`".into())),
            (Some(t), _) if t.len() != run.simulator.spec().param_dim => {
                return Err(Error::Config(format!(
                    "truth has {} values but the simulator takes {}",
                    t.len(),
                    run.simulator.spec().param_dim
                )))
            }
            _ => {}
        }
        if let Some(g) = &self.selection {
            if g.theta_multipliers.is_empty() || g.y_multipliers.is_empty() || g.deltas.is_empty() {
                return Err(Error::Config("selection grids must be nonempty".into()));
            }
        }
        Ok(())
    }

    pub fn run_config(&self) -> &RunConfig {
        self.run.as_ref().expect("validated config has a run section")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("krabc-out"))
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Apply `KRABC_SEED` if it is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.master_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?;
        }
        Ok(())
    }
}

/// Parse a config from JSON text, naming the offending field on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let trials_unset = value.get("trials").is_none();
    let mut cfg: ExperimentConfig =
        serde_path_to_error::deserialize(value).map_err(|e| Error::Config(format!("field `{}`: {}", e.path(), e.inner())))?;
    cfg.fill_defaults(trials_unset)?;
    cfg.validate_schema()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn read_observed_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let parsed: std::result::Result<Vec<f64>, _> = row.iter().map(|c| c.trim().parse::<f64>()).collect();
        out.push(parsed.map_err(|e| Error::Config(format!("{} line {}: {e}", path.display(), line + 1)))?);
    }
    crate::check_dims(&out)?;
    Ok(out)
}

/// Named experiment-specific metrics; `None` where not computable.
pub type Metrics = Vec<(String, Option<f64>)>;

/// Outcome of one trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// `None` on success, else the failure message.
    pub failure: Option<String>,
    pub param_error: Option<f64>,
    pub data_error: Option<f64>,
    pub wall_s: f64,
    /// Experiment-specific metrics, same names for every trial.
    pub aux: Metrics,
    pub estimate: Option<ParamPoint>,
    pub trace: Option<RunTrace>,
}

impl TrialRecord {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }
}

fn aux_names(name: ExperimentName) -> Vec<&'static str> {
    match name {
        ExperimentName::Mixture => vec!["phi_error", "mu_error"],
        ExperimentName::AlphaStable => vec!["alpha_abs_error", "mse"],
        ExperimentName::ConjugateOracle => vec!["mle_error"],
        _ => vec![],
    }
}

/// Error metrics for `estimate`: the headline parameter error and the
/// experiment-specific extras.
pub fn score_estimate(
    name: ExperimentName,
    estimate: &[f64],
    truth: Option<&[f64]>,
    observed: &Dataset,
) -> Result<(Option<f64>, Metrics)> {
    let Some(truth) = truth else {
        return Ok((None, aux_names(name).into_iter().map(|n| (n.to_string(), None)).collect()));
    };
    let aux = |pairs: Vec<(&str, f64)>| pairs.into_iter().map(|(n, v)| (n.to_string(), Some(v))).collect();
    Ok(match name {
        ExperimentName::Mixture => {
            let k = estimate.len() / 2;
            let (pe, me) = sorted_mixture_error(&estimate[..k], &estimate[k..], &truth[..k], &MIXTURE_TRUE_MU)?;
            (Some(pe), aux(vec![("phi_error", pe), ("mu_error", me)]))
        }
        ExperimentName::AlphaStable => {
            let mse = estimate.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / truth.len() as f64;
            (
                Some(parameter_error(estimate, truth)?),
                aux(vec![("alpha_abs_error", (estimate[0] - truth[0]).abs()), ("mse", mse)]),
            )
        }
        ExperimentName::ConjugateOracle => {
            let mle = observed.iter().map(|r| r[0]).sum::<f64>() / observed.len() as f64;
            (
                Some(parameter_error(estimate, truth)?),
                aux(vec![("mle_error", (estimate[0] - mle).abs())]),
            )
        }
        _ => (Some(parameter_error(estimate, truth)?), vec![]),
    })
}

/// Observed data for a trial: the CSV file if given, else a simulation at
/// the truth.
pub fn observed_for_trial(cfg: &ExperimentConfig, trial_seed: u64) -> Result<Dataset> {
    if let Some(p) = &cfg.observed_csv {
        return read_observed_csv(p);
    }
    let truth = cfg.truth.as_ref().ok_or_else(|| Error::Config("no truth to simulate from".into()))?;
    cfg.run_config()
        .simulator
        .simulate(truth, derive_seed(trial_seed, 0, stream::OBSERVED))
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> TrialRecord {
    let seed = cfg.master_seed.wrapping_add(trial as u64);
    let started = Instant::now();
    let result = (|| -> Result<(RunTrace, Option<f64>, Metrics, Option<f64>)> {
        let observed = observed_for_trial(cfg, seed)?;
        let mut run = cfg.run_config().clone();
        run.master_seed = seed;
        if let Some(g) = &cfg.selection {
            let cands = candidate_grid(&g.theta_multipliers, &g.y_multipliers, &g.deltas);
            run = select_hyperparameters(&run, &observed, &cands)?.config;
        }
        let trace = run_krabc(&run, &observed)?;
        let data_error = match trace.records.last().and_then(|r| r.data_error) {
            Some(v) => Some(v),
            None => data_error_at(&run.simulator, &trace.final_estimate, &observed, derive_seed(seed, 0, stream::DATA_ERROR)),
        };
        let (pe, aux) = score_estimate(cfg.experiment, &trace.final_estimate, cfg.truth.as_deref(), &observed)?;
        Ok((trace, pe, aux, data_error))
    })();
    let wall_s = started.elapsed().as_secs_f64();
    match result {
        Ok((trace, param_error, aux, data_error)) => TrialRecord {
            trial,
            seed,
            failure: None,
            param_error,
            data_error,
            wall_s,
            aux,
            estimate: Some(trace.final_estimate.clone()),
            trace: Some(trace),
        },
        Err(e) => TrialRecord {
            trial,
            seed,
            failure: Some(e.to_string()),
            param_error: None,
            data_error: None,
            wall_s,
            aux: aux_names(cfg.experiment).into_iter().map(|n| (n.to_string(), None)).collect(),
            estimate: None,
            trace: None,
        },
    }
}

pub struct ExperimentReport {
    pub records: Vec<TrialRecord>,
    pub output_dir: PathBuf,
}

impl ExperimentReport {
    pub fn all_failed(&self) -> bool {
        self.records.iter().all(|r| !r.ok())
    }
}

/// Run every trial and write `results.csv`, `trace.csv` and `summary.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate_schema()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs())
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let records: Vec<TrialRecord> = pool.install(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect());
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    write_results(cfg, &records, &dir.join("results.csv"))?;
    write_trace(cfg, &records, &dir.join("trace.csv"))?;
    write_summary(&records, &dir.join("summary.csv"))?;
    Ok(ExperimentReport { records, output_dir: dir })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn wall(cfg: &ExperimentConfig, v: f64) -> String {
    if cfg.record_timing {
        v.to_string()
    } else {
        "0".into()
    }
}

/// Column order of `results.csv` for `cfg`.
pub fn results_header(cfg: &ExperimentConfig) -> Vec<String> {
    let mut h: Vec<String> = ["trial", "seed", "status", "param_error", "data_error", "wall_s"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(aux_names(cfg.experiment).iter().map(|s| s.to_string()));
    h.extend(cfg.run_config().simulator.spec().param_names);
    h
}

fn write_results(cfg: &ExperimentConfig, records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header = results_header(cfg);
    let n_params = cfg.run_config().simulator.spec().param_dim;
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.failure.as_ref().map_or_else(|| "ok".to_string(), |m| format!("failed: {m}")),
            fmt_opt(r.param_error),
            fmt_opt(r.data_error),
            wall(cfg, r.wall_s),
        ];
        row.extend(r.aux.iter().map(|(_, v)| fmt_opt(*v)));
        match &r.estimate {
            Some(e) => row.extend(e.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), n_params)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Column order of `trace.csv` for `cfg`.
pub fn trace_header(cfg: &ExperimentConfig) -> Vec<String> {
    let mut h: Vec<String> = [
        "trial",
        "seed",
        "iteration",
        "sum_of_weights",
        "data_error",
        "y_bandwidth",
        "theta_bandwidth",
        "n_diverged",
        "spread",
        "wall_s",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(cfg.run_config().simulator.spec().param_names.iter().map(|n| format!("est_{n}")));
    h
}

fn write_trace(cfg: &ExperimentConfig, records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(cfg))?;
    for r in records {
        let Some(trace) = &r.trace else { continue };
        for it in &trace.records {
            let mut row = vec![
                r.trial.to_string(),
                r.seed.to_string(),
                it.iteration.to_string(),
                it.sum_of_weights.to_string(),
                fmt_opt(it.data_error),
                it.y_bandwidth.to_string(),
                it.theta_bandwidth.to_string(),
                it.n_diverged.to_string(),
                it.spread().to_string(),
                wall(cfg, it.wall_s),
            ];
            row.extend(it.estimate.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean and sample standard deviation; a single value has std 0.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((m, 0.0));
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    Some((m, var.sqrt()))
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    Some(crate::kernels::median_in_place(&mut v))
}

fn write_summary(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "mean", "std", "median", "n", "note"])?;
    let mut metrics: Vec<(String, Vec<f64>)> = vec![
        ("param_error".into(), records.iter().filter_map(|r| r.param_error).collect()),
        ("data_error".into(), records.iter().filter_map(|r| r.data_error).collect()),
    ];
    if let Some(first) = records.first() {
        for (i, (name, _)) in first.aux.iter().enumerate() {
            metrics.push((name.clone(), records.iter().filter_map(|r| r.aux.get(i).and_then(|a| a.1)).collect()));
        }
    }
    for (name, values) in metrics {
        let (mean, std) = mean_std(&values).map_or((String::new(), String::new()), |(m, s)| (m.to_string(), s.to_string()));
        let note = match values.len() {
            0 => "no successful trials",
            1 => "single trial: std set to 0",
            _ => "",
        };
        w.write_record([
            name,
            mean,
            std,
            fmt_opt(median(&values)),
            values.len().to_string(),
            note.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of a dry-run report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// `trials × n_iterations × n_particles`.
    pub total_simulations: u64,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// Dry-run checks; never fails, problems are listed in the report.
pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, r: std::result::Result<String, String>| {
        let (ok, detail) = match r {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        checks.push(Check {
            name: name.to_string(),
            ok,
            detail,
        });
    };
    push("schema", cfg.validate_schema().map(|_| "ok".into()).map_err(|e| e.to_string()));
    let total = cfg
        .run
        .as_ref()
        .map_or(0, |r| cfg.trials as u64 * r.n_iterations as u64 * r.n_particles as u64);
    if let Some(run) = &cfg.run {
        let draw = sample_prior(&run.prior, derive_seed(cfg.master_seed, 0, 0));
        push("prior sample", Ok(format!("{draw:?}")));
        push(
            "simulator at prior sample",
            run.simulator
                .simulate(&draw, 1)
                .map(|d| format!("{} observations", d.len()))
                .map_err(|e| e.to_string()),
        );
        if let Some(t) = &cfg.truth {
            push(
                "simulator at truth",
                run.simulator
                    .simulate(t, 1)
                    .map(|d| format!("{} observations", d.len()))
                    .map_err(|e| e.to_string()),
            );
        }
        if let Some(g) = &cfg.selection {
            push(
                "selection grid",
                Ok(format!(
                    "{} candidates",
                    g.theta_multipliers.len() * g.y_multipliers.len() * g.deltas.len()
                )),
            );
        }
        push(
            "simulation count",
            Ok(format!(
                "{} trials × {} iterations × {} particles = {total}",
                cfg.trials, run.n_iterations, run.n_particles
            )),
        );
    }
    let dir = cfg.output_dir();
    let existed = dir.is_dir();
    push(
        "output directory",
        fs::create_dir_all(&dir)
            .map(|_| {
                if existed {
                    format!("{} exists", dir.display())
                } else {
                    format!("{} created", dir.display())
                }
            })
            .map_err(|e| format!("{}: {e}", dir.display())),
    );
    ValidationReport {
        checks,
        total_simulations: total,
    }
}

/// Estimate from a single prior draw, simulated on the same seeds as a trial.
pub fn prior_sample_baseline(cfg: &ExperimentConfig, trial: usize) -> Result<(ParamPoint, Option<f64>)> {
    let seed = cfg.master_seed.wrapping_add(trial as u64);
    let observed = observed_for_trial(cfg, seed)?;
    let run = cfg.run_config();
    let est = sample_prior(&run.prior, derive_seed(seed, 0, stream::BASELINE));
    let de = data_error_at(&run.simulator, &est, &observed, derive_seed(seed, 0, stream::DATA_ERROR));
    Ok((est, de))
}

/// Monte-Carlo prior mean from `draws` samples.
pub fn prior_mean(prior: &PriorSpec, draws: usize, seed: u64) -> ParamPoint {
    let mut acc = vec![0.0; prior.dim()];
    for i in 0..draws {
        for (a, v) in acc.iter_mut().zip(sample_prior(prior, derive_seed(seed, stream::BASELINE, i as u64))) {
            *a += v / draws as f64;
        }
    }
    acc
}
