//! Z-score, clip and bin continuous transitions into composite group symbols.
//!
//! Every variable `v` becomes `z = (v - mu) / sigma`, is clamped to
//! `[-clip, clip]` and lands in one of `bins` equal-width intervals over that
//! range. Intervals are half-open `[lo, hi)` except the top one, which is
//! closed. Bin indices of the variables in a group are read as the digits of
//! a base-`bins` number, first index most significant.
//!
//! The statistics are fitted once on a calibration segment and then frozen.
//! State statistics are shared by `s` and `s_next`, so a value maps to the
//! same symbol whichever side of a transition it appears on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transition::{StreamDims, SymbolizedTransition, Transition};

/// Lower bound applied to every per-variable standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-9;

pub const DEFAULT_BINS: u32 = 3;
pub const DEFAULT_CLIP: f64 = 3.0;

/// Partition of state and action indices into symbol groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingConfig {
    pub state_groups: Vec<Vec<usize>>,
    pub action_groups: Vec<Vec<usize>>,
}

impl GroupingConfig {
    /// One group per variable class holding every index.
    pub fn whole(dims: StreamDims) -> Self {
        GroupingConfig {
            state_groups: vec![(0..dims.state).collect()],
            action_groups: vec![(0..dims.action).collect()],
        }
    }

    pub fn validate(&self, dims: StreamDims) -> Result<()> {
        check_partition("state", &self.state_groups, dims.state)?;
        check_partition("action", &self.action_groups, dims.action)
    }

    pub fn dims(&self) -> StreamDims {
        StreamDims {
            state: self.state_groups.iter().map(Vec::len).sum(),
            action: self.action_groups.iter().map(Vec::len).sum(),
        }
    }
}

fn check_partition(class: &str, groups: &[Vec<usize>], dim: usize) -> Result<()> {
    if groups.is_empty() || groups.iter().any(Vec::is_empty) {
        return Err(Error::Config(format!(
            "{class} grouping needs at least one non-empty group"
        )));
    }
    let mut seen = vec![false; dim];
    for &idx in groups.iter().flatten() {
        match seen.get_mut(idx) {
            None => {
                return Err(Error::Config(format!(
                    "{class} index {idx} out of range for dimension {dim}"
                )))
            }
            Some(true) => {
                return Err(Error::Config(format!(
                    "{class} index {idx} appears in more than one group"
                )))
            }
            Some(slot) => *slot = true,
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Config(format!(
            "{class} index {missing} is not covered by any group"
        )));
    }
    Ok(())
}

/// Frozen z-score statistics and binning layout.
///
/// `mu` and `sigma` hold the state variables first, then the action variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizerParams {
    pub bins: u32,
    pub clip: f64,
    pub state_dim: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DiscretizerParams {
    pub fn action_dim(&self) -> usize {
        self.mu.len() - self.state_dim
    }

    pub fn dims(&self) -> StreamDims {
        StreamDims {
            state: self.state_dim,
            action: self.action_dim(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("bins must be >= 2, got {}", self.bins)));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(Error::Config(format!("clip must be > 0, got {}", self.clip)));
        }
        if self.mu.len() != self.sigma.len() || self.state_dim > self.mu.len() {
            return Err(Error::Config(
                "mu/sigma lengths disagree with the variable layout".into(),
            ));
        }
        if self.sigma.iter().any(|s| !(*s >= 0.0)) || self.mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("mu must be finite and sigma >= 0".into()));
        }
        Ok(())
    }

    /// Bin index of variable `var` holding value `v`.
    pub fn bin_of(&self, var: usize, v: f64) -> u64 {
        let sigma = self.sigma[var].max(SIGMA_FLOOR);
        let z = ((v - self.mu[var]) / sigma).clamp(-self.clip, self.clip);
        let width = 2.0 * self.clip / f64::from(self.bins);
        // Count the interior edges at or below z; z on an edge goes up.
        (1..self.bins)
            .take_while(|&k| z >= -self.clip + f64::from(k) * width)
            .count() as u64
    }
}

/// Fits per-variable sample mean and standard deviation (n - 1 denominator)
/// over the calibration transitions.
///
/// State statistics come from `s`; action statistics from `a`. A single
/// calibration transition gives sigma 0, which is floored like any other
/// constant channel.
pub fn fit_discretizer(calibration: &[Transition], bins: u32, clip: f64) -> Result<DiscretizerParams> {
    let first = calibration
        .first()
        .ok_or_else(|| Error::Calibration("no calibration transitions".into()))?;
    let dims = first.dims();
    for x in calibration {
        x.validate(Some(dims))?;
    }

    let n_vars = dims.state + dims.action;
    let value = |x: &Transition, var: usize| {
        if var < dims.state {
            x.s[var]
        } else {
            x.a[var - dims.state]
        }
    };

    let n = calibration.len() as f64;
    let mut mu = Vec::with_capacity(n_vars);
    let mut sigma = Vec::with_capacity(n_vars);
    for var in 0..n_vars {
        let mean = calibration.iter().map(|x| value(x, var)).sum::<f64>() / n;
        let var_sum: f64 = calibration
            .iter()
            .map(|x| {
                let d = value(x, var) - mean;
                d * d
            })
            .sum();
        let sd = if calibration.len() > 1 {
            (var_sum / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        mu.push(mean);
        sigma.push(sd.max(SIGMA_FLOOR));
    }

    let params = DiscretizerParams {
        bins,
        clip,
        state_dim: dims.state,
        mu,
        sigma,
    };
    params.validate()?;
    Ok(params)
}

/// Validated pairing of [`DiscretizerParams`] and a [`GroupingConfig`].
#[derive(Debug, Clone)]
pub struct Discretizer {
    params: DiscretizerParams,
    grouping: GroupingConfig,
}

impl Discretizer {
    pub fn new(params: DiscretizerParams, grouping: GroupingConfig) -> Result<Self> {
        params.validate()?;
        grouping.validate(params.dims())?;
        let widest = grouping
            .state_groups
            .iter()
            .chain(&grouping.action_groups)
            .map(Vec::len)
            .max()
            .unwrap_or(0);
        if u64::from(params.bins).checked_pow(widest as u32).is_none() {
            return Err(Error::Config(format!(
                "a group of {widest} variables at {} bins overflows a 64-bit symbol",
                params.bins
            )));
        }
        Ok(Discretizer { params, grouping })
    }

    pub fn params(&self) -> &DiscretizerParams {
        &self.params
    }

    pub fn grouping(&self) -> &GroupingConfig {
        &self.grouping
    }

    pub fn apply(&self, x: &Transition) -> Result<SymbolizedTransition> {
        x.validate(Some(self.params.dims()))?;
        if let Some(bad) = x.s.iter().chain(&x.a).chain(&x.s_next).find(|v| !v.is_finite()) {
            return Err(Error::format(format!("step {}: non-finite value {bad}", x.t)));
        }
        let state_dim = self.params.state_dim;
        let encode = |groups: &[Vec<usize>], values: &[f64], offset: usize| -> Vec<u64> {
            groups
                .iter()
                .map(|group| {
                    group.iter().fold(0u64, |acc, &i| {
                        acc * u64::from(self.params.bins) + self.params.bin_of(offset + i, values[i])
                    })
                })
                .collect()
        };
        Ok(SymbolizedTransition {
            t: x.t,
            s_sym: encode(&self.grouping.state_groups, &x.s, 0),
            a_sym: encode(&self.grouping.action_groups, &x.a, state_dim),
            s_next_sym: encode(&self.grouping.state_groups, &x.s_next, 0),
            reward: x.reward,
            episode: x.episode,
        })
    }
}

/// One-shot form of [`Discretizer::apply`].
pub fn discretize(
    x: &Transition,
    params: &DiscretizerParams,
    grouping: &GroupingConfig,
) -> Result<SymbolizedTransition> {
    Discretizer::new(params.clone(), grouping.clone())?.apply(x)
}
