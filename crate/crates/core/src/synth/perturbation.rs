use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PerturbationKind {
    ActionNoise,
    ObservationNoise,
    ExternalForce,
    DynamicsScale,
    None,
}

impl PerturbationKind {
    /// Side a perturbation of this kind naturally acts on.
    pub fn natural_side(self) -> Side {
        match self {
            PerturbationKind::ActionNoise | PerturbationKind::ObservationNoise | PerturbationKind::None => {
                Side::Agent
            }
            PerturbationKind::ExternalForce | PerturbationKind::DynamicsScale => Side::Environment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    Agent,
    Environment,
}

pub const DEFAULT_ONSET_EPISODE: u64 = 15;

/// A change to the loop switched on at the start of `onset_episode`.
///
/// Episodes are counted from 1 here, so `onset_episode = 15` leaves 14
/// unperturbed episodes in front of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub magnitude: f64,
    pub onset_episode: u64,
    pub side: Side,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation::none()
    }
}

impl Perturbation {
    pub fn new(kind: PerturbationKind, magnitude: f64, onset_episode: u64) -> Self {
        Perturbation {
            kind,
            magnitude,
            onset_episode,
            side: kind.natural_side(),
        }
    }

    pub fn none() -> Self {
        Perturbation::new(PerturbationKind::None, 0.0, DEFAULT_ONSET_EPISODE)
    }

    pub fn with_onset(mut self, onset_episode: u64) -> Self {
        self.onset_episode = onset_episode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(Error::Config(format!(
                "perturbation magnitude must be >= 0, got {}",
                self.magnitude
            )));
        }
        if self.onset_episode < 1 {
            return Err(Error::Config("onset episode is 1-based and must be >= 1".into()));
        }
        Ok(())
    }

    /// First perturbed step for episodes of `episode_length` steps.
    pub fn onset_step(&self, episode_length: u64) -> u64 {
        (self.onset_episode - 1) * episode_length
    }

    /// Whether the perturbation changes anything at all.
    pub fn is_active(&self) -> bool {
        self.kind != PerturbationKind::None && self.magnitude > 0.0
    }

    /// Short label such as `ACTION_NOISE@0.03`.
    pub fn label(&self) -> String {
        let kind = serde_json::to_value(self.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        if self.kind == PerturbationKind::None {
            kind
        } else {
            format!("{kind}@{}", self.magnitude)
        }
    }
}
