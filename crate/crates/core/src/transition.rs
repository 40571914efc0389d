//! Interaction-stream samples, in continuous and symbolized form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(S, A, S')` sample observed on the agent-environment loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: u64,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub s_next: Vec<f64>,
    pub reward: Option<f64>,
    pub episode: Option<u64>,
}

/// Observation and action dimensions of a stream. The first record fixes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamDims {
    pub state: usize,
    pub action: usize,
}

impl Transition {
    pub fn dims(&self) -> StreamDims {
        StreamDims {
            state: self.s.len(),
            action: self.a.len(),
        }
    }

    /// Checks the per-record shape invariant and, when given, agreement with
    /// the stream's established dimensions.
    pub fn validate(&self, expected: Option<StreamDims>) -> Result<()> {
        if self.s.len() != self.s_next.len() {
            return Err(Error::format(format!(
                "step {}: s has {} values but s_next has {}",
                self.t,
                self.s.len(),
                self.s_next.len()
            )));
        }
        if let Some(dims) = expected {
            if dims != self.dims() {
                return Err(Error::format(format!(
                    "step {}: dimensions (s={}, a={}) differ from stream (s={}, a={})",
                    self.t,
                    self.s.len(),
                    self.a.len(),
                    dims.state,
                    dims.action
                )));
            }
        }
        Ok(())
    }
}

/// Per-group symbol encoding of a [`Transition`].
///
/// `s_sym` and `s_next_sym` share the state grouping; `a_sym` follows the
/// action grouping. Reward and episode are carried through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolizedTransition {
    pub t: u64,
    pub s_sym: Vec<u64>,
    pub a_sym: Vec<u64>,
    pub s_next_sym: Vec<u64>,
    pub reward: Option<f64>,
    pub episode: Option<u64>,
}
