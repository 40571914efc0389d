//! Noisy linear plant under a frozen linear feedback policy.
//!
//! ```text
//! obs_t  = s_t + observation noise          (OBSERVATION_NOISE)
//! a_t    = K obs_t + exploration noise + actuator noise   (ACTION_NOISE)
//! s_t+1  = D' s_t + B a_t + force + process noise
//! r_t    = -(state_cost |s_t|^2 + action_cost |a_t|^2)
//! ```
//!
//! `D' = (1 + m) D` under DYNAMICS_SCALE and `force = m * force_direction`
//! under EXTERNAL_FORCE. Noise magnitudes are fractions of `action_scale`
//! and `observation_scale`. Perturbation noise comes from its own random
//! stream, so the nominal draws are the same with or without it.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::perturbation::{Perturbation, PerturbationKind};
use crate::discretize::GroupingConfig;
use crate::error::{Error, Result};
use crate::transition::Transition;

/// State norm beyond which a run is declared diverged.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Nominal steps simulated and discarded before `t = 0`.
const WARMUP_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLoopConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Open-loop dynamics `D`, rows of length `state_dim`.
    pub dynamics: Vec<Vec<f64>>,
    /// Input matrix `B`, `state_dim` rows of length `action_dim`.
    pub input: Vec<Vec<f64>>,
    /// Policy gain `K`, `action_dim` rows of length `state_dim`.
    pub policy_gain: Vec<Vec<f64>>,
    pub process_noise: f64,
    pub exploration_noise: f64,
    /// Actuator range that ACTION_NOISE magnitudes are fractions of.
    pub action_scale: f64,
    /// Sensor range that OBSERVATION_NOISE magnitudes are fractions of.
    pub observation_scale: f64,
    /// Unit-magnitude EXTERNAL_FORCE bias added to every state update.
    pub force_direction: Vec<f64>,
    pub state_cost: f64,
    pub action_cost: f64,
    pub episode_length: u64,
    pub seed: u64,
}

/// Result of a simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRun {
    pub transitions: Vec<Transition>,
    /// Step at which the state norm crossed [`DIVERGENCE_BOUND`]; the stream
    /// is truncated there.
    pub diverged_at: Option<u64>,
}

fn matrix(rows: &[Vec<f64>], n_rows: usize, n_cols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n_rows || rows.iter().any(|r| r.len() != n_cols) {
        return Err(Error::Config(format!("{name} must be {n_rows}x{n_cols}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Block-diagonal damped oscillators with leaky positions and a weak
/// coupling into the last block.
fn oscillator_plant(blocks: usize, dt: f64, leak: f64, stiffness: f64, damping: f64, coupling: f64) -> Vec<Vec<f64>> {
    let n = 2 * blocks;
    let mut d = vec![vec![0.0; n]; n];
    for b in 0..blocks {
        let (x, v) = (2 * b, 2 * b + 1);
        d[x][x] = leak;
        d[x][v] = dt;
        d[v][x] = -stiffness * dt;
        d[v][v] = 1.0 - damping * dt;
    }
    let torso_v = n - 1;
    for b in 0..blocks - 1 {
        d[torso_v][2 * b] = coupling;
    }
    d
}

impl LinearLoopConfig {
    /// Small three-part plant (two "legs" and a "torso", position and
    /// velocity each) driven by two actuators, one per leg.
    pub fn desk() -> Self {
        let dynamics = oscillator_plant(3, 0.1, 0.95, 1.0, 2.0, 0.02);
        let input = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.1],
            vec![0.0, 0.0],
            vec![0.03, 0.03],
        ];
        let policy_gain = vec![
            vec![-2.0, -2.0, 0.0, 0.0, -0.5, -0.5],
            vec![0.0, 0.0, -2.0, -2.0, -0.5, -0.5],
        ];
        LinearLoopConfig {
            state_dim: 6,
            action_dim: 2,
            dynamics,
            input,
            policy_gain,
            process_noise: 0.05,
            exploration_noise: 0.05,
            action_scale: 10.0,
            observation_scale: 10.0,
            force_direction: vec![0.0, 0.1, 0.0, 0.1, 0.0, 0.05],
            state_cost: 1.0,
            action_cost: 0.01,
            episode_length: 500,
            seed: 0,
        }
    }

    /// Body-part grouping matching [`LinearLoopConfig::desk`].
    pub fn desk_grouping() -> GroupingConfig {
        GroupingConfig {
            state_groups: vec![vec![0, 1], vec![2, 3], vec![4, 5]],
            action_groups: vec![vec![0], vec![1]],
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn closed_loop(&self) -> Result<DMatrix<f64>> {
        let d = matrix(&self.dynamics, self.state_dim, self.state_dim, "dynamics")?;
        let b = matrix(&self.input, self.state_dim, self.action_dim, "input")?;
        let k = matrix(&self.policy_gain, self.action_dim, self.state_dim, "policy gain")?;
        Ok(d + b * k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 {
            return Err(Error::Config("state and action dimensions must be positive".into()));
        }
        if self.episode_length == 0 {
            return Err(Error::Config("episode length must be positive".into()));
        }
        for (name, v) in [
            ("process noise", self.process_noise),
            ("exploration noise", self.exploration_noise),
            ("action scale", self.action_scale),
            ("observation scale", self.observation_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.force_direction.len() != self.state_dim {
            return Err(Error::Config("force direction must have state_dim entries".into()));
        }
        let rho = spectral_radius(&self.closed_loop()?);
        if rho >= 1.0 {
            return Err(Error::Config(format!(
                "nominal closed loop is not stable (spectral radius {rho:.4})"
            )));
        }
        Ok(())
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Simulates `episodes` episodes of `config.episode_length` steps.
///
/// Episodes run back to back without resets; the episode index only labels
/// the transitions and places the perturbation onset.
pub fn run_linear_loop(config: &LinearLoopConfig, perturbation: &Perturbation, episodes: u64) -> Result<LoopRun> {
    config.validate()?;
    perturbation.validate()?;
    if episodes < perturbation.onset_episode && perturbation.is_active() {
        return Err(Error::Config(format!(
            "{episodes} episodes end before the onset episode {}",
            perturbation.onset_episode
        )));
    }

    let n = config.state_dim;
    let m = config.action_dim;
    let d = matrix(&config.dynamics, n, n, "dynamics")?;
    let b = matrix(&config.input, n, m, "input")?;
    let k = matrix(&config.policy_gain, m, n, "policy gain")?;
    let force = DVector::from_column_slice(&config.force_direction);

    let onset = perturbation.onset_step(config.episode_length);
    let active = |t: u64, kind: PerturbationKind| perturbation.is_active() && perturbation.kind == kind && t >= onset;
    let mag = perturbation.magnitude;
    let d_perturbed = &d * (1.0 + mag);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
    noise_rng.set_stream(1);

    let mut s = DVector::zeros(n);
    for _ in 0..WARMUP_STEPS {
        let a = &k * &s + normals(&mut rng, m, config.exploration_noise);
        s = &d * &s + &b * a + normals(&mut rng, n, config.process_noise);
    }

    let observe = |s: &DVector<f64>, t: u64, noise_rng: &mut ChaCha8Rng| -> DVector<f64> {
        if active(t, PerturbationKind::ObservationNoise) {
            s + normals(noise_rng, n, mag * config.observation_scale)
        } else {
            s.clone()
        }
    };

    let total = episodes * config.episode_length;
    let mut transitions = Vec::with_capacity(total as usize);
    let mut obs = observe(&s, 0, &mut noise_rng);
    let mut diverged_at = None;
    for t in 0..total {
        let mut a = &k * &obs + normals(&mut rng, m, config.exploration_noise);
        if active(t, PerturbationKind::ActionNoise) {
            a += normals(&mut noise_rng, m, mag * config.action_scale);
        }
        let reward = -(config.state_cost * s.norm_squared() + config.action_cost * a.norm_squared());

        let dyn_matrix = if active(t, PerturbationKind::DynamicsScale) { &d_perturbed } else { &d };
        let mut s_next = dyn_matrix * &s + &b * &a + normals(&mut rng, n, config.process_noise);
        if active(t, PerturbationKind::ExternalForce) {
            s_next += &force * mag;
        }
        let obs_next = observe(&s_next, t + 1, &mut noise_rng);

        transitions.push(Transition {
            t,
            s: obs.as_slice().to_vec(),
            a: a.as_slice().to_vec(),
            s_next: obs_next.as_slice().to_vec(),
            reward: Some(reward),
            episode: Some(t / config.episode_length),
        });

        if !(s_next.norm() <= DIVERGENCE_BOUND) {
            diverged_at = Some(t);
            break;
        }
        s = s_next;
        obs = obs_next;
    }
    Ok(LoopRun {
        transitions,
        diverged_at,
    })
}
