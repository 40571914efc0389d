//! Benchmark runner: perturbation conditions × seeds on synthetic loops,
//! each trial calibrated on its own pre-onset prefix and scored by the
//! detector, with reward evaluated under the same protocol.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::{calibrate, detect, summarize, SummaryTable, TrialOutcome, DEFAULT_THRESHOLD};
use crate::discretize::{fit_discretizer, Discretizer, GroupingConfig, DEFAULT_BINS, DEFAULT_CLIP};
use crate::error::{Error, Result};
use crate::synth::{
    run_discrete_loop, run_linear_loop, DiscreteLoopConfig, LinearLoopConfig, Perturbation, PerturbationKind,
};
use crate::transition::SymbolizedTransition;
use crate::window::{stream_metrics, WindowMetrics, WindowSpec};

pub const DESK_EPISODES: u64 = 40;
pub const DESK_ONSET_EPISODE: u64 = 39;
pub const DESK_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// The closed loop a condition runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SystemConfig {
    /// Continuous loop, discretized with statistics fitted on the trial's
    /// own pre-onset prefix.
    Linear {
        config: LinearLoopConfig,
        grouping: GroupingConfig,
        #[serde(default = "default_bins")]
        bins: u32,
        #[serde(default = "default_clip")]
        clip: f64,
    },
    /// Finite loop whose symbols pass straight through.
    Discrete { config: DiscreteLoopConfig },
}

fn default_bins() -> u32 {
    DEFAULT_BINS
}

fn default_clip() -> f64 {
    DEFAULT_CLIP
}

impl SystemConfig {
    pub fn desk() -> Self {
        SystemConfig::Linear {
            config: LinearLoopConfig::desk(),
            grouping: LinearLoopConfig::desk_grouping(),
            bins: DEFAULT_BINS,
            clip: DEFAULT_CLIP,
        }
    }

    pub fn episode_length(&self) -> u64 {
        match self {
            SystemConfig::Linear { config, .. } => config.episode_length,
            SystemConfig::Discrete { config } => config.episode_length,
        }
    }

    fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            SystemConfig::Linear { config, .. } => config.seed = seed,
            SystemConfig::Discrete { config } => config.seed = seed,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub system: SystemConfig,
    pub perturbation: Perturbation,
}

impl Condition {
    pub fn new(system: SystemConfig, perturbation: Perturbation) -> Self {
        Condition {
            name: perturbation.label(),
            system,
            perturbation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub conditions: Vec<Condition>,
    pub episodes: u64,
    #[serde(default = "default_window")]
    pub window: WindowSpec,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_min_consecutive")]
    pub min_consecutive: usize,
}

fn default_window() -> WindowSpec {
    WindowSpec::default()
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_min_consecutive() -> usize {
    1
}

impl Suite {
    pub fn new(conditions: Vec<Condition>, episodes: u64) -> Self {
        Suite {
            conditions,
            episodes,
            window: WindowSpec::default(),
            threshold: DEFAULT_THRESHOLD,
            min_consecutive: 1,
        }
    }

    /// The eight-condition desk suite on the linear loop: an action-noise
    /// ladder, two observation-noise levels, two force levels and a 10%
    /// dynamics scale, all switched on at episode 39 of 40.
    ///
    /// The long nominal prefix and two-episode horizon keep the per-channel
    /// false-positive rate under 10%: a Gaussian channel exceeds ±3σ in about
    /// 0.3% of windows, so the horizon bounds how many windows can misfire.
    pub fn desk() -> Self {
        let system = SystemConfig::desk();
        let conditions = desk_perturbations()
            .into_iter()
            .map(|p| Condition::new(system.clone(), p))
            .collect();
        Suite::new(conditions, DESK_EPISODES)
    }

    /// The desk suite with every perturbation replaced by NONE, keeping the
    /// trial seeds, so detections are false positives.
    pub fn desk_control() -> Self {
        let mut suite = Suite::desk();
        for c in &mut suite.conditions {
            c.perturbation = Perturbation::none().with_onset(c.perturbation.onset_episode);
        }
        suite
    }

    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::Config("suite has no conditions".into()));
        }
        self.window.validate()?;
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config("threshold must be > 0".into()));
        }
        if self.min_consecutive == 0 {
            return Err(Error::Config("min_consecutive must be >= 1".into()));
        }
        for c in &self.conditions {
            c.perturbation.validate()?;
            if self.episodes < c.perturbation.onset_episode {
                return Err(Error::Config(format!(
                    "condition {} starts after the last episode",
                    c.name
                )));
            }
            match &c.system {
                SystemConfig::Linear { config, grouping, .. } => {
                    config.validate()?;
                    grouping.validate(crate::transition::StreamDims {
                        state: config.state_dim,
                        action: config.action_dim,
                    })?;
                }
                SystemConfig::Discrete { config } => config.validate()?,
            }
        }
        Ok(())
    }
}

pub fn desk_perturbations() -> Vec<Perturbation> {
    use PerturbationKind::*;
    [
        (ActionNoise, 0.01),
        (ActionNoise, 0.03),
        (ActionNoise, 0.04),
        (ObservationNoise, 0.01),
        (ObservationNoise, 0.03),
        (ExternalForce, 0.5),
        (ExternalForce, 1.0),
        (DynamicsScale, 0.10),
    ]
    .into_iter()
    .map(|(kind, m)| Perturbation::new(kind, m, DESK_ONSET_EPISODE))
    .collect()
}

/// Seed of the trial for `seed` under condition `condition_index`.
pub fn trial_seed(seed: u64, condition_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((condition_index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn fingerprint(value: &impl Serialize) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub condition_index: usize,
    pub condition: String,
    pub trial_seed: u64,
    /// SHA-256 of the seeded system, perturbation and protocol settings.
    pub fingerprint: String,
    pub n_transitions: usize,
    pub onset_step: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diverged_at: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outcome: Option<TrialOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip)]
    pub series: Vec<WindowMetrics>,
}

impl TrialResult {
    /// Windowed reward, one value per window that carried rewards.
    pub fn reward_series(&self) -> Vec<f64> {
        self.series.iter().filter_map(|m| m.reward_mean).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub name: String,
    pub summary: SummaryTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub summary: SummaryTable,
    pub conditions: Vec<ConditionSummary>,
    pub failed_trials: usize,
    #[serde(skip)]
    pub trials: Vec<TrialResult>,
}

impl BenchmarkReport {
    pub fn condition(&self, name: &str) -> Option<&SummaryTable> {
        self.conditions.iter().find(|c| c.name == name).map(|c| &c.summary)
    }
}

/// Generates, symbolizes and windows the stream of one seeded condition.
fn trial_series(
    system: &SystemConfig,
    perturbation: &Perturbation,
    episodes: u64,
    window: &WindowSpec,
) -> Result<(Vec<WindowMetrics>, usize, Option<u64>)> {
    let onset = perturbation.onset_step(system.episode_length()) as usize;
    let (symbols, diverged_at): (Vec<SymbolizedTransition>, _) = match system {
        SystemConfig::Linear {
            config,
            grouping,
            bins,
            clip,
        } => {
            let run = run_linear_loop(config, perturbation, episodes)?;
            let calibration = &run.transitions[..onset.min(run.transitions.len())];
            let params = fit_discretizer(calibration, *bins, *clip)?;
            let d = Discretizer::new(params, grouping.clone())?;
            let symbols = run.transitions.iter().map(|x| d.apply(x)).collect::<Result<_>>()?;
            (symbols, run.diverged_at)
        }
        SystemConfig::Discrete { config } => {
            let steps = episodes * config.episode_length;
            (run_discrete_loop(config, perturbation, steps as usize)?, None)
        }
    };
    let n = symbols.len();
    Ok((stream_metrics(&symbols, window)?, n, diverged_at))
}

fn run_trial(suite: &Suite, condition_index: usize, seed: u64) -> TrialResult {
    let condition = &suite.conditions[condition_index];
    let tseed = trial_seed(seed, condition_index);
    let system = condition.system.with_seed(tseed);
    let onset_step = condition.perturbation.onset_step(system.episode_length());
    let fingerprint = fingerprint(&(
        &system,
        &condition.perturbation,
        suite.episodes,
        &suite.window,
        suite.threshold,
        suite.min_consecutive,
    ));
    let mut result = TrialResult {
        seed,
        condition_index,
        condition: condition.name.clone(),
        trial_seed: tseed,
        fingerprint,
        n_transitions: 0,
        onset_step,
        diverged_at: None,
        outcome: None,
        error: None,
        series: Vec::new(),
    };

    let scored = trial_series(&system, &condition.perturbation, suite.episodes, &suite.window).and_then(
        |(series, n, diverged_at)| {
            result.n_transitions = n;
            result.diverged_at = diverged_at;
            let onset_window = suite.window.first_window_reaching(onset_step as usize);
            let baseline = &series[..onset_window.min(series.len())];
            let model = calibrate(baseline, suite.threshold)?;
            let outcome = detect(&series, &model, onset_window, suite.threshold, suite.min_consecutive)?;
            Ok((series, outcome))
        },
    );
    match scored {
        Ok((series, outcome)) => {
            result.series = series;
            result.outcome = Some(outcome);
        }
        Err(e) => {
            log::warn!("trial seed={seed} condition={} failed: {e}", condition.name);
            result.error = Some(e.to_string());
        }
    }
    result
}

fn summarize_trials<'a>(trials: impl Iterator<Item = &'a TrialResult>) -> Result<SummaryTable> {
    let scored: Vec<(u64, TrialOutcome)> = trials
        .filter_map(|t| t.outcome.clone().map(|o| (t.seed, o)))
        .collect();
    summarize(&scored)
}

/// Runs every condition under every seed. Failed trials are kept in the
/// report with their error and left out of the rates.
pub fn run_benchmark(suite: &Suite, seeds: &[u64]) -> Result<BenchmarkReport> {
    suite.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    let mut trials = Vec::with_capacity(seeds.len() * suite.conditions.len());
    for &seed in seeds {
        for i in 0..suite.conditions.len() {
            log::debug!("trial seed={seed} condition={}", suite.conditions[i].name);
            trials.push(run_trial(suite, i, seed));
        }
    }
    let failed_trials = trials.iter().filter(|t| t.outcome.is_none()).count();
    let summary = summarize_trials(trials.iter())?;
    let conditions = suite
        .conditions
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            summarize_trials(trials.iter().filter(|t| t.condition_index == i))
                .ok()
                .map(|summary| ConditionSummary {
                    name: c.name.clone(),
                    summary,
                })
        })
        .collect();
    Ok(BenchmarkReport {
        summary,
        conditions,
        failed_trials,
        trials,
    })
}
