//! Streaming pipeline: a reader thread parses records into a bounded queue,
//! and the estimator symbolizes, windows and scores them, writing one
//! metrics line (and any detection events) per window and flushing at once.

use std::io::{BufRead, Write};
use std::sync::mpsc::sync_channel;
use std::thread;

use crate::detector::{calibrate, OnlineDetector};
use crate::discretize::{fit_discretizer, Discretizer, GroupingConfig};
use crate::error::{Error, Result};
use crate::io::{event_line, metrics_line, BaselineFile, TransitionReader};
use crate::transition::Transition;
use crate::window::{stream_metrics, WindowAccumulator, WindowSpec};

/// Fits discretizer and detector baseline on a nominal calibration prefix.
/// Without a grouping every state and every action variable forms one group.
pub fn fit_baseline(
    calibration: &[Transition],
    bins: u32,
    clip: f64,
    grouping: Option<GroupingConfig>,
    window: WindowSpec,
    threshold: f64,
) -> Result<BaselineFile> {
    let discretizer = fit_discretizer(calibration, bins, clip)?;
    let grouping = grouping.unwrap_or_else(|| GroupingConfig::whole(discretizer.dims()));
    let d = Discretizer::new(discretizer.clone(), grouping.clone())?;
    let symbols = calibration.iter().map(|x| d.apply(x)).collect::<Result<Vec<_>>>()?;
    let windows = stream_metrics(&symbols, &window)
        .map_err(|e| Error::Calibration(format!("calibration prefix too short: {e}")))?;
    let model = calibrate(&windows, threshold)?;
    Ok(BaselineFile {
        discretizer,
        grouping,
        window,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    /// Overrides the threshold stored with the baseline.
    pub threshold: Option<f64>,
    pub min_consecutive: usize,
    /// Perturbation onset, when known, for latency accounting.
    pub onset_step: Option<u64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            threshold: None,
            min_consecutive: 1,
            onset_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MonitorStats {
    pub transitions: usize,
    pub windows: usize,
    pub events: usize,
}

/// Runs the monitor until `input` is exhausted.
///
/// The queue between reader and estimator holds `stride - 1` records, so the
/// metrics of a window are written before the reader has consumed more than
/// `stride` records past the window's last step.
pub fn run_monitor<R, M, E>(
    input: R,
    baseline: &BaselineFile,
    config: &MonitorConfig,
    metrics_out: &mut M,
    mut events_out: Option<&mut E>,
) -> Result<MonitorStats>
where
    R: BufRead + Send + 'static,
    M: Write,
    E: Write,
{
    let discretizer = Discretizer::new(baseline.discretizer.clone(), baseline.grouping.clone())?;
    let mut windows = WindowAccumulator::new(baseline.window)?;
    let threshold = config.threshold.unwrap_or(baseline.model.threshold);
    let onset_window = config
        .onset_step
        .map(|t| baseline.window.first_window_reaching(t as usize));
    let mut detector = OnlineDetector::new(baseline.model.clone(), threshold, config.min_consecutive, onset_window)?;

    let (tx, rx) = sync_channel(baseline.window.stride - 1);
    let reader = thread::spawn(move || {
        for item in TransitionReader::new(input) {
            let failed = item.is_err();
            if tx.send(item).is_err() || failed {
                break;
            }
        }
    });

    let mut stats = MonitorStats::default();
    let result = (|| -> Result<()> {
        for item in rx.iter() {
            let x = item?;
            let symbols = discretizer.apply(&x)?;
            stats.transitions += 1;
            if let Some(m) = windows.push(symbols)? {
                writeln!(metrics_out, "{}", metrics_line(&m))?;
                metrics_out.flush()?;
                stats.windows += 1;
                let events = detector.observe(&m);
                if let Some(out) = events_out.as_deref_mut() {
                    for e in &events {
                        writeln!(out, "{}", event_line(e))?;
                    }
                    if !events.is_empty() {
                        out.flush()?;
                    }
                }
                stats.events += events.len();
            }
        }
        Ok(())
    })();
    // dropping the receiver unblocks a reader stuck on a full queue
    drop(rx);
    reader
        .join()
        .map_err(|_| Error::Estimation("reader thread panicked".into()))?;
    result.map(|()| stats)
}
