//! Baseline calibration and two-sided ±kσ deviation detection.
//!
//! Each channel (P, Hf, Hb, dH and, separately, windowed reward) gets a mean
//! and sample standard deviation over pre-onset windows. A window deviates
//! when its value lies strictly outside `[mu - k sigma, mu + k sigma]`. The
//! union of the four information channels is the monitor's detection signal;
//! reward is evaluated under the same rule but never enters the union.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::window::WindowMetrics;

pub const SIGMA_FLOOR: f64 = 1e-9;
pub const DEFAULT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    P,
    Hf,
    Hb,
    #[serde(rename = "dH")]
    DH,
    #[serde(rename = "reward")]
    Reward,
}

impl Channel {
    /// Channels whose union forms the detection signal.
    pub const INFORMATION: [Channel; 4] = [Channel::P, Channel::Hf, Channel::Hb, Channel::DH];
    pub const ALL: [Channel; 5] = [Channel::P, Channel::Hf, Channel::Hb, Channel::DH, Channel::Reward];

    pub fn name(self) -> &'static str {
        match self {
            Channel::P => "P",
            Channel::Hf => "Hf",
            Channel::Hb => "Hb",
            Channel::DH => "dH",
            Channel::Reward => "reward",
        }
    }

    pub fn value(self, m: &WindowMetrics) -> Option<f64> {
        match self {
            Channel::P => Some(m.p),
            Channel::Hf => Some(m.hf),
            Channel::Hb => Some(m.hb),
            Channel::DH => Some(m.dh),
            Channel::Reward => m.reward_mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBaseline {
    pub mu: f64,
    pub sigma: f64,
    pub n_windows: usize,
}

impl ChannelBaseline {
    fn sigma_eff(&self) -> f64 {
        self.sigma.max(SIGMA_FLOOR)
    }

    /// Closed band of values that do not count as deviations.
    pub fn band(&self, threshold: f64) -> (f64, f64) {
        let half = threshold * self.sigma_eff();
        (self.mu - half, self.mu + half)
    }

    pub fn z(&self, x: f64) -> f64 {
        (x - self.mu) / self.sigma_eff()
    }

    pub fn deviation(&self, x: f64, threshold: f64) -> Option<Direction> {
        let (lo, hi) = self.band(threshold);
        if x > hi {
            Some(Direction::Above)
        } else if x < lo {
            Some(Direction::Below)
        } else {
            None
        }
    }
}

/// Per-channel baselines. A channel without enough data is simply absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    /// Threshold in sigma units the model was calibrated for.
    pub threshold: f64,
    pub channels: BTreeMap<Channel, ChannelBaseline>,
}

impl BaselineModel {
    pub fn get(&self, channel: Channel) -> Option<&ChannelBaseline> {
        self.channels.get(&channel)
    }

    pub fn band(&self, channel: Channel, threshold: f64) -> Option<(f64, f64)> {
        self.get(channel).map(|b| b.band(threshold))
    }
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Fits the baseline on windows lying entirely before the perturbation onset.
pub fn calibrate(baseline_windows: &[WindowMetrics], threshold: f64) -> Result<BaselineModel> {
    check_detect_args(threshold, 1)?;
    if baseline_windows.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 baseline windows, got {}",
            baseline_windows.len()
        )));
    }
    let mut channels = BTreeMap::new();
    for channel in Channel::ALL {
        let values: Vec<f64> = baseline_windows.iter().filter_map(|m| channel.value(m)).collect();
        if values.len() < 2 {
            continue;
        }
        let (mu, sd) = mean_and_sd(&values);
        channels.insert(
            channel,
            ChannelBaseline {
                mu,
                sigma: sd.max(SIGMA_FLOOR),
                n_windows: values.len(),
            },
        );
    }
    Ok(BaselineModel { threshold, channels })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub channel: Channel,
    pub window_index: usize,
    pub z: f64,
    pub direction: Direction,
    /// Windows since onset, when the onset is known and has passed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub latency_windows: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelOutcome {
    pub detected: bool,
    pub latency_windows: Option<usize>,
    pub event: Option<DetectionEvent>,
    /// The channel had no baseline, so it could not detect anything.
    #[serde(default)]
    pub uncalibrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub onset_window: usize,
    pub channels: BTreeMap<Channel, ChannelOutcome>,
    pub union: ChannelOutcome,
}

impl TrialOutcome {
    pub fn channel(&self, channel: Channel) -> &ChannelOutcome {
        &self.channels[&channel]
    }

    /// Rebuilds the union from the information channels.
    fn with_union(onset_window: usize, channels: BTreeMap<Channel, ChannelOutcome>) -> Self {
        let union = Channel::INFORMATION
            .iter()
            .filter_map(|c| channels.get(c))
            .filter(|o| o.detected)
            .min_by_key(|o| o.latency_windows)
            .copied()
            .map(|o| ChannelOutcome {
                uncalibrated: false,
                ..o
            })
            .unwrap_or_default();
        TrialOutcome {
            onset_window,
            channels,
            union,
        }
    }

    /// Assembles an outcome from per-channel results, deriving the union.
    pub fn from_channels(onset_window: usize, channels: BTreeMap<Channel, ChannelOutcome>) -> Self {
        TrialOutcome::with_union(onset_window, channels)
    }
}

fn check_detect_args(threshold: f64, min_consecutive: usize) -> Result<()> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::Config(format!("threshold must be > 0, got {threshold}")));
    }
    if min_consecutive == 0 {
        return Err(Error::Config("min_consecutive must be >= 1".into()));
    }
    Ok(())
}

/// Finds, per channel, the first window at or after `onset_window` that
/// starts a run of `min_consecutive` deviating windows.
pub fn detect(
    series: &[WindowMetrics],
    model: &BaselineModel,
    onset_window: usize,
    threshold: f64,
    min_consecutive: usize,
) -> Result<TrialOutcome> {
    check_detect_args(threshold, min_consecutive)?;
    if onset_window >= series.len() {
        return Err(Error::Config(format!(
            "onset window {onset_window} is outside a series of {} windows",
            series.len()
        )));
    }

    let mut channels = BTreeMap::new();
    for channel in Channel::ALL {
        let Some(baseline) = model.get(channel) else {
            channels.insert(
                channel,
                ChannelOutcome {
                    uncalibrated: true,
                    ..Default::default()
                },
            );
            continue;
        };
        let mut run = 0usize;
        let mut outcome = ChannelOutcome::default();
        for (i, m) in series.iter().enumerate().skip(onset_window) {
            let dev = channel.value(m).and_then(|x| baseline.deviation(x, threshold));
            run = if dev.is_some() { run + 1 } else { 0 };
            if run == min_consecutive {
                let start = i + 1 - min_consecutive;
                let first = &series[start];
                let x = channel.value(first).expect("deviating window has a value");
                let latency = start - onset_window;
                outcome = ChannelOutcome {
                    detected: true,
                    latency_windows: Some(latency),
                    event: Some(DetectionEvent {
                        channel,
                        window_index: first.window_index,
                        z: baseline.z(x),
                        direction: baseline.deviation(x, threshold).expect("deviating"),
                        latency_windows: Some(latency),
                    }),
                    uncalibrated: false,
                };
                break;
            }
        }
        channels.insert(channel, outcome);
    }
    Ok(TrialOutcome::with_union(onset_window, channels))
}

/// Streaming detector: feeds windows one at a time and reports the start of
/// every excursion that lasts `min_consecutive` windows.
///
/// When the onset window is known, run counters restart there so the first
/// post-onset event of each channel coincides with [`detect`].
#[derive(Debug, Clone)]
pub struct OnlineDetector {
    model: BaselineModel,
    threshold: f64,
    min_consecutive: usize,
    onset_window: Option<usize>,
    runs: BTreeMap<Channel, Run>,
}

#[derive(Debug, Clone, Default)]
struct Run {
    /// Values of the current run of deviating windows, up to `min_consecutive`.
    pending: Vec<(usize, f64, Direction)>,
    reported: bool,
}

impl OnlineDetector {
    pub fn new(model: BaselineModel, threshold: f64, min_consecutive: usize, onset_window: Option<usize>) -> Result<Self> {
        check_detect_args(threshold, min_consecutive)?;
        Ok(OnlineDetector {
            model,
            threshold,
            min_consecutive,
            onset_window,
            runs: BTreeMap::new(),
        })
    }

    pub fn observe(&mut self, m: &WindowMetrics) -> Vec<DetectionEvent> {
        if Some(m.window_index) == self.onset_window {
            self.runs.clear();
        }
        let mut events = Vec::new();
        for channel in Channel::ALL {
            let Some(baseline) = self.model.get(channel) else {
                continue;
            };
            let run = self.runs.entry(channel).or_default();
            let Some((x, dir)) = channel
                .value(m)
                .and_then(|x| baseline.deviation(x, self.threshold).map(|d| (x, d)))
            else {
                *run = Run::default();
                continue;
            };
            if run.reported {
                continue;
            }
            run.pending.push((m.window_index, x, dir));
            if run.pending.len() == self.min_consecutive {
                let (window_index, x, direction) = run.pending[0];
                run.reported = true;
                run.pending.clear();
                let latency_windows = self
                    .onset_window
                    .and_then(|onset| window_index.checked_sub(onset));
                events.push(DetectionEvent {
                    channel,
                    window_index,
                    z: baseline.z(x),
                    direction,
                    latency_windows,
                });
            }
        }
        events
    }
}

/// One row of the detection summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    /// Mean over seeds of each seed's detected fraction, in percent.
    pub detection_rate_pct: f64,
    /// Median over all detected trials pooled; absent when none detected.
    pub median_latency_windows: Option<f64>,
    pub detected_trials: usize,
    pub total_trials: usize,
    pub per_seed_rate_pct: BTreeMap<u64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    /// Aligned text rendering with one line per metric.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<10} {:>18} {:>26}\n", "Metric", "Detection Rate (%)", "Median Latency (windows)");
        for r in &self.rows {
            let latency = r
                .median_latency_windows
                .map_or_else(|| "-".to_string(), |l| format!("{l:.1}"));
            out.push_str(&format!("{:<10} {:>18.1} {:>26}\n", r.metric, r.detection_rate_pct, latency));
        }
        out
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

pub const UNION_ROW: &str = "union";

/// Seed-averaged detection rates and pooled median latencies for the union,
/// each channel and reward, in that order.
pub fn summarize(trials: &[(u64, TrialOutcome)]) -> Result<SummaryTable> {
    if trials.is_empty() {
        return Err(Error::Report("no trials to summarize".into()));
    }
    let mut by_seed: BTreeMap<u64, Vec<&TrialOutcome>> = BTreeMap::new();
    for (seed, outcome) in trials {
        by_seed.entry(*seed).or_default().push(outcome);
    }

    let rows = std::iter::once(None)
        .chain(Channel::ALL.into_iter().map(Some))
        .map(|channel| {
            let get = |t: &TrialOutcome| -> ChannelOutcome {
                match channel {
                    None => t.union,
                    Some(c) => *t.channel(c),
                }
            };
            let metric = channel.map_or(UNION_ROW, Channel::name).to_string();
            let per_seed_rate_pct: BTreeMap<u64, f64> = by_seed
                .iter()
                .map(|(&seed, outcomes)| {
                    let hits = outcomes.iter().filter(|t| get(t).detected).count();
                    (seed, 100.0 * hits as f64 / outcomes.len() as f64)
                })
                .collect();
            let detection_rate_pct = per_seed_rate_pct.values().sum::<f64>() / per_seed_rate_pct.len() as f64;
            let mut latencies: Vec<f64> = trials
                .iter()
                .filter_map(|(_, t)| get(t).latency_windows)
                .map(|l| l as f64)
                .collect();
            SummaryRow {
                metric,
                detection_rate_pct,
                median_latency_windows: median(&mut latencies),
                detected_trials: latencies.len(),
                total_trials: trials.len(),
                per_seed_rate_pct,
            }
        })
        .collect();
    Ok(SummaryTable { rows })
}
