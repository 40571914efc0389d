//! Sliding-window plug-in estimation of bi-predictability and its components.
//!
//! For each window the empirical distributions of `S`, `A`, `S'`, `(S, A)`
//! and `(S, A, S')` are counted, and
//!
//! ```text
//! MI = H(S,A) + H(S') - H(S,A,S')
//! Hf = H(S'|S,A) = H(S,A,S') - H(S,A)
//! Hb = H(S,A|S') = H(S,A,S') - H(S')
//! C  = H(S) + H(A) + H(S')
//! P  = MI / C            (0 when C = 0)
//! dH = Hf - Hb
//! ```
//!
//! No bias correction or smoothing is applied.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::entropy::entropy_of_map;
use crate::error::{Error, Result};
use crate::transition::SymbolizedTransition;

pub const DEFAULT_WINDOW: usize = 300;
pub const DEFAULT_STRIDE: usize = 50;

/// Plug-in artifacts this close below zero are reported as zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// How multi-group symbols are combined into `S`, `A` and `S'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointMode {
    /// One channel per state group, paired with the union of all action
    /// groups; per-channel metrics are arithmetic-averaged.
    #[default]
    PerGroupMean,
    /// `S`, `A` and `S'` are the tuples of all their group symbols.
    FullJoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
    #[serde(default)]
    pub joint_mode: JointMode,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            length: DEFAULT_WINDOW,
            stride: DEFAULT_STRIDE,
            joint_mode: JointMode::default(),
        }
    }
}

impl WindowSpec {
    pub fn new(length: usize, stride: usize) -> Result<Self> {
        let spec = WindowSpec {
            length,
            stride,
            joint_mode: JointMode::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mode(mut self, joint_mode: JointMode) -> Self {
        self.joint_mode = joint_mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.stride == 0 || self.stride > self.length {
            return Err(Error::Config(format!(
                "window spec needs 1 <= stride <= length, got length {} stride {}",
                self.length, self.stride
            )));
        }
        Ok(())
    }

    /// Number of windows over a stream of `n` steps, if it holds at least one.
    pub fn window_count(&self, n: usize) -> Option<usize> {
        (n >= self.length).then(|| (n - self.length) / self.stride + 1)
    }

    /// Index of the first window whose span reaches step offset `onset`
    /// (offsets counted from the start of the stream).
    pub fn first_window_reaching(&self, onset: usize) -> usize {
        if onset < self.length {
            0
        } else {
            // smallest i with i * stride + length - 1 >= onset
            (onset + 1 - self.length).div_ceil(self.stride)
        }
    }
}

/// All information quantities for one window, in bits (P is dimensionless).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window_index: usize,
    pub t_start: u64,
    pub t_end: u64,
    #[serde(rename = "H_S")]
    pub h_s: f64,
    #[serde(rename = "H_A")]
    pub h_a: f64,
    #[serde(rename = "H_Snext")]
    pub h_snext: f64,
    #[serde(rename = "H_SA")]
    pub h_sa: f64,
    #[serde(rename = "H_joint")]
    pub h_joint: f64,
    #[serde(rename = "MI")]
    pub mi: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "Hf")]
    pub hf: f64,
    #[serde(rename = "Hb")]
    pub hb: f64,
    #[serde(rename = "dH")]
    pub dh: f64,
    pub reward_mean: Option<f64>,
    pub sample_count: Option<usize>,
    /// Set when some channel had a zero entropy budget and P was defined as 0.
    pub degenerate: bool,
}

/// Entropies of one `(S, A, S')` channel and the quantities derived from them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct ChannelInfo {
    pub h_s: f64,
    pub h_a: f64,
    pub h_snext: f64,
    pub h_sa: f64,
    pub h_joint: f64,
    pub mi: f64,
    pub c: f64,
    pub p: f64,
    pub hf: f64,
    pub hb: f64,
    pub degenerate: bool,
}

fn clamp_artifact(x: f64) -> f64 {
    if (-NEGATIVE_TOLERANCE..0.0).contains(&x) {
        0.0
    } else {
        x
    }
}

impl ChannelInfo {
    fn from_entropies(h_s: f64, h_a: f64, h_snext: f64, h_sa: f64, h_joint: f64) -> Self {
        let mi = clamp_artifact(h_sa + h_snext - h_joint);
        let hf = clamp_artifact(h_joint - h_sa);
        let hb = clamp_artifact(h_joint - h_snext);
        let c = h_s + h_a + h_snext;
        let degenerate = c <= 0.0;
        let p = if degenerate { 0.0 } else { mi / c };
        ChannelInfo {
            h_s,
            h_a,
            h_snext,
            h_sa,
            h_joint,
            mi,
            c,
            p,
            hf,
            hb,
            degenerate,
        }
    }

    fn count<'a>(keys: impl Iterator<Item = (&'a [u64], &'a [u64], &'a [u64])>) -> Result<Self> {
        let mut s: HashMap<&[u64], u64> = HashMap::new();
        let mut a: HashMap<&[u64], u64> = HashMap::new();
        let mut sn: HashMap<&[u64], u64> = HashMap::new();
        let mut sa: HashMap<(&[u64], &[u64]), u64> = HashMap::new();
        let mut joint: HashMap<(&[u64], &[u64], &[u64]), u64> = HashMap::new();
        for (ks, ka, ksn) in keys {
            *s.entry(ks).or_default() += 1;
            *a.entry(ka).or_default() += 1;
            *sn.entry(ksn).or_default() += 1;
            *sa.entry((ks, ka)).or_default() += 1;
            *joint.entry((ks, ka, ksn)).or_default() += 1;
        }
        Ok(ChannelInfo::from_entropies(
            entropy_of_map(&s)?,
            entropy_of_map(&a)?,
            entropy_of_map(&sn)?,
            entropy_of_map(&sa)?,
            entropy_of_map(&joint)?,
        ))
    }
}

fn check_structure(window: &[SymbolizedTransition]) -> Result<()> {
    let first = &window[0];
    let n_state = first.s_sym.len();
    let n_action = first.a_sym.len();
    if n_state == 0 || n_action == 0 {
        return Err(Error::Estimation("transitions carry no state or action groups".into()));
    }
    for x in window {
        if x.s_sym.len() != n_state || x.s_next_sym.len() != n_state || x.a_sym.len() != n_action {
            return Err(Error::Estimation(format!(
                "step {}: group structure differs from the rest of the window",
                x.t
            )));
        }
    }
    Ok(())
}

fn compute(window: &[SymbolizedTransition], mode: JointMode, window_index: usize) -> Result<WindowMetrics> {
    if window.is_empty() {
        return Err(Error::Estimation("empty window".into()));
    }
    check_structure(window)?;

    let channels: Vec<ChannelInfo> = match mode {
        JointMode::FullJoint => vec![ChannelInfo::count(
            window
                .iter()
                .map(|x| (&x.s_sym[..], &x.a_sym[..], &x.s_next_sym[..])),
        )?],
        JointMode::PerGroupMean => (0..window[0].s_sym.len())
            .map(|g| {
                ChannelInfo::count(
                    window
                        .iter()
                        .map(|x| (&x.s_sym[g..=g], &x.a_sym[..], &x.s_next_sym[g..=g])),
                )
            })
            .collect::<Result<_>>()?,
    };

    let info = if channels.len() == 1 {
        channels[0]
    } else {
        let k = channels.len() as f64;
        let mean = |f: fn(&ChannelInfo) -> f64| channels.iter().map(f).sum::<f64>() / k;
        ChannelInfo {
            h_s: mean(|c| c.h_s),
            h_a: mean(|c| c.h_a),
            h_snext: mean(|c| c.h_snext),
            h_sa: mean(|c| c.h_sa),
            h_joint: mean(|c| c.h_joint),
            mi: mean(|c| c.mi),
            c: mean(|c| c.c),
            p: mean(|c| c.p),
            hf: mean(|c| c.hf),
            hb: mean(|c| c.hb),
            degenerate: channels.iter().any(|c| c.degenerate),
        }
    };

    let (reward_sum, reward_n) = window
        .iter()
        .filter_map(|x| x.reward)
        .fold((0.0, 0usize), |(s, n), r| (s + r, n + 1));

    let metrics = WindowMetrics {
        window_index,
        t_start: window[0].t,
        t_end: window[window.len() - 1].t,
        h_s: info.h_s,
        h_a: info.h_a,
        h_snext: info.h_snext,
        h_sa: info.h_sa,
        h_joint: info.h_joint,
        mi: info.mi,
        c: info.c,
        p: info.p,
        hf: info.hf,
        hb: info.hb,
        dh: info.hf - info.hb,
        reward_mean: (reward_n > 0).then(|| reward_sum / reward_n as f64),
        sample_count: Some(window.len()),
        degenerate: info.degenerate,
    };
    debug_assert!((metrics.h_snext - (metrics.mi + metrics.hf)).abs() < 1e-9);
    debug_assert!((metrics.h_sa - (metrics.mi + metrics.hb)).abs() < 1e-9);
    debug_assert!(metrics.p <= 0.5 + 1e-12 && metrics.p >= 0.0);
    debug_assert!(metrics.dh == metrics.hf - metrics.hb);
    Ok(metrics)
}

/// Metrics for a single window of exactly `spec.length` transitions.
pub fn window_metrics(window: &[SymbolizedTransition], spec: &WindowSpec) -> Result<WindowMetrics> {
    spec.validate()?;
    if window.len() != spec.length {
        return Err(Error::Estimation(format!(
            "window holds {} transitions, expected {}",
            window.len(),
            spec.length
        )));
    }
    compute(window, spec.joint_mode, 0)
}

/// Metrics for every window start `0, stride, 2*stride, ...` that fits in
/// the stream. Windows run straight across episode boundaries.
pub fn stream_metrics(stream: &[SymbolizedTransition], spec: &WindowSpec) -> Result<Vec<WindowMetrics>> {
    spec.validate()?;
    let count = spec.window_count(stream.len()).ok_or_else(|| {
        Error::Estimation(format!(
            "stream of {} steps is shorter than the window length {}",
            stream.len(),
            spec.length
        ))
    })?;
    (0..count)
        .map(|i| {
            let start = i * spec.stride;
            compute(&stream[start..start + spec.length], spec.joint_mode, i)
        })
        .collect()
}

/// Online form of [`stream_metrics`]: a ring buffer of the last `length`
/// transitions that emits a window every `stride` pushes once full.
///
/// Emitted metrics are bit-identical to the batch path on the same data.
#[derive(Debug)]
pub struct WindowAccumulator {
    spec: WindowSpec,
    buffer: VecDeque<SymbolizedTransition>,
    pushed: usize,
    emitted: usize,
}

impl WindowAccumulator {
    pub fn new(spec: WindowSpec) -> Result<Self> {
        spec.validate()?;
        Ok(WindowAccumulator {
            spec,
            buffer: VecDeque::with_capacity(spec.length),
            pushed: 0,
            emitted: 0,
        })
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    pub fn windows_emitted(&self) -> usize {
        self.emitted
    }

    pub fn push(&mut self, x: SymbolizedTransition) -> Result<Option<WindowMetrics>> {
        if self.buffer.len() == self.spec.length {
            self.buffer.pop_front();
        }
        self.buffer.push_back(x);
        self.pushed += 1;
        if self.pushed < self.spec.length || !(self.pushed - self.spec.length).is_multiple_of(self.spec.stride) {
            return Ok(None);
        }
        let index = self.emitted;
        let metrics = compute(self.buffer.make_contiguous(), self.spec.joint_mode, index)?;
        self.emitted += 1;
        Ok(Some(metrics))
    }
}
