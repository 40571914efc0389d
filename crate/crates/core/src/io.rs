//! Newline-delimited JSON ingestion and output records.
//!
//! Input lines look like
//! `{"t":0,"s":[0.1,0.2],"a":[1.0],"s_next":[0.11,0.19],"r":-0.3}`;
//! `r` and `episode` are optional. Numbers are written with the shortest
//! representation that parses back to the same bits.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{BaselineModel, DetectionEvent};
use crate::discretize::{DiscretizerParams, GroupingConfig};
use crate::error::{Error, Result};
use crate::transition::{StreamDims, Transition};
use crate::window::{WindowMetrics, WindowSpec};

/// Wire form of one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub t: u64,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub s_next: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<u64>,
}

impl From<TransitionRecord> for Transition {
    fn from(r: TransitionRecord) -> Self {
        Transition {
            t: r.t,
            s: r.s,
            a: r.a,
            s_next: r.s_next,
            reward: r.r,
            episode: r.episode,
        }
    }
}

impl From<&Transition> for TransitionRecord {
    fn from(x: &Transition) -> Self {
        TransitionRecord {
            t: x.t,
            s: x.s.clone(),
            a: x.a.clone(),
            s_next: x.s_next.clone(),
            r: x.reward,
            episode: x.episode,
        }
    }
}

/// Parses one record; `line` is the 1-based line number used in errors.
pub fn parse_transition(text: &str, line: usize) -> Result<Transition> {
    let record: TransitionRecord =
        serde_json::from_str(text).map_err(|e| Error::format_at(line, e.to_string()))?;
    Ok(record.into())
}

pub fn transition_line(x: &Transition) -> String {
    serde_json::to_string(&TransitionRecord::from(x)).expect("records serialize")
}

/// Iterator over the transitions of a line-oriented source. Blank lines are
/// skipped; array lengths are pinned by the first record.
pub struct TransitionReader<R> {
    input: R,
    line: usize,
    dims: Option<StreamDims>,
    buf: String,
    done: bool,
}

impl<R: BufRead> TransitionReader<R> {
    pub fn new(input: R) -> Self {
        TransitionReader {
            input,
            line: 0,
            dims: None,
            buf: String::new(),
            done: false,
        }
    }

    /// Number of lines consumed so far.
    pub fn lines_read(&self) -> usize {
        self.line
    }

    fn next_record(&mut self) -> Result<Option<Transition>> {
        loop {
            self.buf.clear();
            if self.input.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let x = parse_transition(text, self.line)?;
            x.validate(self.dims).map_err(|e| match e {
                Error::Format { message, .. } => Error::format_at(self.line, message),
                other => other,
            })?;
            self.dims.get_or_insert(x.dims());
            return Ok(Some(x));
        }
    }
}

impl<R: BufRead> Iterator for TransitionReader<R> {
    type Item = Result<Transition>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let out = self.next_record().transpose();
        if !matches!(out, Some(Ok(_))) {
            self.done = true;
        }
        out
    }
}

pub type Source = Box<dyn BufRead + Send>;

/// Opens a file path, `-` for standard input, or `tcp://host:port`, which
/// connects to a peer and reads until it closes the connection.
pub fn open_source(source: &str) -> Result<Source> {
    if source == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    if let Some(addr) = source.strip_prefix("tcp://") {
        let stream = TcpStream::connect(addr)?;
        return Ok(Box::new(BufReader::new(stream)));
    }
    Ok(Box::new(BufReader::new(File::open(source)?)))
}

pub fn read_stream(source: &str) -> Result<TransitionReader<Source>> {
    Ok(TransitionReader::new(open_source(source)?))
}

/// Reads a whole source into memory.
pub fn read_all(source: &str) -> Result<Vec<Transition>> {
    read_stream(source)?.collect()
}

pub const FLAG_DEGENERATE: &str = "degenerate_denominator";

/// Output form of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub window_index: usize,
    pub t_start: u64,
    pub t_end: u64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "Hf")]
    pub hf: f64,
    #[serde(rename = "Hb")]
    pub hb: f64,
    #[serde(rename = "dH")]
    pub dh: f64,
    #[serde(rename = "H_S")]
    pub h_s: f64,
    #[serde(rename = "H_A")]
    pub h_a: f64,
    #[serde(rename = "H_Snext")]
    pub h_snext: f64,
    #[serde(rename = "MI")]
    pub mi: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_mean: Option<f64>,
    pub flags: Vec<String>,
}

impl From<&WindowMetrics> for MetricsRecord {
    fn from(m: &WindowMetrics) -> Self {
        MetricsRecord {
            window_index: m.window_index,
            t_start: m.t_start,
            t_end: m.t_end,
            p: m.p,
            hf: m.hf,
            hb: m.hb,
            dh: m.dh,
            h_s: m.h_s,
            h_a: m.h_a,
            h_snext: m.h_snext,
            mi: m.mi,
            c: m.c,
            reward_mean: m.reward_mean,
            flags: if m.degenerate {
                vec![FLAG_DEGENERATE.to_string()]
            } else {
                Vec::new()
            },
        }
    }
}

pub fn metrics_line(m: &WindowMetrics) -> String {
    serde_json::to_string(&MetricsRecord::from(m)).expect("records serialize")
}

pub fn event_line(e: &DetectionEvent) -> String {
    serde_json::to_string(e).expect("events serialize")
}

/// Writes one JSON value per line.
pub fn write_jsonl<'a, T: Serialize + 'a>(out: &mut impl Write, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_metrics(out: &mut impl Write, series: &[WindowMetrics]) -> Result<()> {
    for m in series {
        writeln!(out, "{}", metrics_line(m))?;
    }
    Ok(())
}

/// Everything `monitor` needs, produced by `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFile {
    pub discretizer: DiscretizerParams,
    pub grouping: GroupingConfig,
    pub window: WindowSpec,
    pub model: BaselineModel,
}

impl BaselineFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(io::Error::from)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }
}
