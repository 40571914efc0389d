//! Online bi-predictability monitoring for closed-loop agent/environment
//! streams.
//!
//! Transitions `(s, a, s')` are discretized into composite symbols, grouped
//! into sliding windows, and reduced to plug-in entropies: the
//! bi-predictability `P = MI(S,A;S') / (H(S) + H(A) + H(S'))`, the forward and
//! backward conditional entropies `Hf`, `Hb` and their difference `dH`. A
//! calibrated ±kσ detector turns the resulting series into deviation events.

pub mod bench;
pub mod cli;
pub mod detector;
pub mod discretize;
pub mod entropy;
pub mod equivalence;
pub mod error;
pub mod io;
pub mod monitor;
pub mod oracle;
pub mod synth;
pub mod transition;
pub mod window;

pub use detector::{
    calibrate, detect, summarize, BaselineModel, Channel, ChannelBaseline, ChannelOutcome, DetectionEvent,
    Direction, OnlineDetector, SummaryRow, SummaryTable, TrialOutcome,
};
pub use discretize::{discretize, fit_discretizer, Discretizer, DiscretizerParams, GroupingConfig};
pub use error::{Error, Result};
pub use io::{read_stream, BaselineFile, MetricsRecord, TransitionRecord};
pub use monitor::{fit_baseline, run_monitor, MonitorConfig};
pub use oracle::{exact_metrics, stationary_joint, JointDistribution};
pub use transition::{StreamDims, SymbolizedTransition, Transition};
pub use window::{stream_metrics, window_metrics, JointMode, WindowAccumulator, WindowMetrics, WindowSpec};
