//! Finite-alphabet loop: a scripted stochastic policy acting on a tabular
//! transition kernel. Small enough for the oracle to enumerate exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::perturbation::{Perturbation, Side};
use crate::error::{Error, Result};
use crate::transition::SymbolizedTransition;

pub const DEFAULT_EPISODE_LENGTH: u64 = 500;

const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLoopConfig {
    pub n_states: usize,
    pub n_actions: usize,
    /// `k(s' | s, a)`, row-major in `(s, a, s')`.
    pub kernel: Vec<f64>,
    /// `pi(a | s)`, row-major in `(s, a)`.
    pub policy: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_episode_length")]
    pub episode_length: u64,
}

fn default_episode_length() -> u64 {
    DEFAULT_EPISODE_LENGTH
}

fn check_rows(name: &str, table: &[f64], width: usize) -> Result<()> {
    for (i, row) in table.chunks(width).enumerate() {
        if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config(format!("{name} row {i} has an invalid probability")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::Config(format!("{name} row {i} sums to {sum}, not 1")));
        }
    }
    Ok(())
}

impl DiscreteLoopConfig {
    pub fn new(n_states: usize, n_actions: usize, kernel: Vec<f64>, policy: Vec<f64>, seed: u64) -> Result<Self> {
        let cfg = DiscreteLoopConfig {
            n_states,
            n_actions,
            kernel,
            policy,
            seed,
            episode_length: DEFAULT_EPISODE_LENGTH,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Random loop whose kernel and policy rows are drawn from a flat
    /// Dirichlet, so every transition has positive probability and the
    /// induced chain is ergodic.
    pub fn random(n_states: usize, n_actions: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut row = |width: usize| -> Vec<f64> {
            let draws: Vec<f64> = (0..width).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            draws.into_iter().map(|d: f64| d / total).collect()
        };
        let kernel = (0..n_states * n_actions).flat_map(|_| row(n_states)).collect();
        let policy = (0..n_states).flat_map(|_| row(n_actions)).collect();
        DiscreteLoopConfig {
            n_states,
            n_actions,
            kernel,
            policy,
            seed,
            episode_length: DEFAULT_EPISODE_LENGTH,
        }
    }

    pub fn with_episode_length(mut self, episode_length: u64) -> Self {
        self.episode_length = episode_length;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::Config("alphabets must be non-empty".into()));
        }
        if self.episode_length == 0 {
            return Err(Error::Config("episode length must be positive".into()));
        }
        if self.kernel.len() != self.n_states * self.n_actions * self.n_states {
            return Err(Error::Config("kernel table has the wrong size".into()));
        }
        if self.policy.len() != self.n_states * self.n_actions {
            return Err(Error::Config("policy table has the wrong size".into()));
        }
        check_rows("kernel", &self.kernel, self.n_states)?;
        check_rows("policy", &self.policy, self.n_actions)
    }

    pub fn kernel_prob(&self, s: usize, a: usize, sn: usize) -> f64 {
        self.kernel[(s * self.n_actions + a) * self.n_states + sn]
    }

    pub fn policy_prob(&self, s: usize, a: usize) -> f64 {
        self.policy[s * self.n_actions + a]
    }

    fn kernel_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.kernel[start..start + self.n_states]
    }

    fn policy_row(&self, s: usize) -> &[f64] {
        &self.policy[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

/// Inverse-CDF draw from `row`, optionally mixed with the uniform
/// distribution at weight `mix`. Exactly one uniform variate is consumed
/// whatever the mixing weight, so perturbations never shift the random
/// stream.
fn draw(rng: &mut ChaCha8Rng, row: &[f64], mix: f64) -> usize {
    let u: f64 = rng.random();
    let uniform = 1.0 / row.len() as f64;
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += if mix > 0.0 { (1.0 - mix) * p + mix * uniform } else { p };
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding slack above the last cumulative sum
    row.iter().rposition(|&p| p > 0.0 || mix > 0.0).unwrap_or(row.len() - 1)
}

/// Samples `steps` transitions of the loop from state 0.
///
/// From the onset step on, an agent-side perturbation mixes the policy with
/// the uniform action distribution and an environment-side one mixes the
/// kernel with the uniform next-state distribution, each at weight
/// `min(magnitude, 1)`.
pub fn run_discrete_loop(
    config: &DiscreteLoopConfig,
    perturbation: &Perturbation,
    steps: usize,
) -> Result<Vec<SymbolizedTransition>> {
    config.validate()?;
    perturbation.validate()?;
    let onset = perturbation.onset_step(config.episode_length);
    let weight = if perturbation.is_active() {
        perturbation.magnitude.min(1.0)
    } else {
        0.0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut s = 0usize;
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps as u64 {
        let active = t >= onset;
        let (policy_mix, kernel_mix) = match perturbation.side {
            Side::Agent if active => (weight, 0.0),
            Side::Environment if active => (0.0, weight),
            _ => (0.0, 0.0),
        };
        let a = draw(&mut rng, config.policy_row(s), policy_mix);
        let sn = draw(&mut rng, config.kernel_row(s, a), kernel_mix);
        out.push(SymbolizedTransition {
            t,
            s_sym: vec![s as u64],
            a_sym: vec![a as u64],
            s_next_sym: vec![sn as u64],
            reward: None,
            episode: Some(t / config.episode_length),
        });
        s = sn;
    }
    Ok(out)
}
