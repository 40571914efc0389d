//! Command-line front end. Exit status is 0 on success, 1 on runtime
//! failure and 2 on usage errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_benchmark, BenchmarkReport, Suite};
use crate::detector::DEFAULT_THRESHOLD;
use crate::discretize::{GroupingConfig, DEFAULT_BINS, DEFAULT_CLIP};
use crate::equivalence::estimator_equivalence;
use crate::error::{Error, Result};
use crate::io::{open_source, read_stream, write_metrics, BaselineFile};
use crate::monitor::{fit_baseline, run_monitor, MonitorConfig};
use crate::synth::Perturbation;
use crate::window::{JointMode, WindowSpec, DEFAULT_STRIDE, DEFAULT_WINDOW};

#[derive(Debug, Parser)]
#[command(name = "idt", version, about = "Bi-predictability monitor for agent-environment transition streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit discretizer and detector baseline on a nominal stream prefix.
    Calibrate(CalibrateArgs),
    /// Stream window metrics and detection events for a live source.
    Monitor(MonitorArgs),
    /// Run a perturbation suite on synthetic loops and tabulate detections.
    Bench(BenchArgs),
    /// Compare plug-in estimates with exact values on random finite loops.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    PerGroupMean,
    FullJoint,
}

impl From<ModeArg> for JointMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerGroupMean => JointMode::PerGroupMean,
            ModeArg::FullJoint => JointMode::FullJoint,
        }
    }
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    /// File path, `-` for stdin, or tcp://host:port.
    #[arg(long)]
    input: String,
    #[arg(long, default_value_t = DEFAULT_WINDOW, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
    window: usize,
    #[arg(long, default_value_t = DEFAULT_STRIDE, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
    stride: usize,
    #[arg(long, default_value_t = DEFAULT_BINS, value_parser = clap::value_parser!(u32).range(2..))]
    bins: u32,
    #[arg(long, default_value_t = DEFAULT_CLIP)]
    clip: f64,
    /// JSON file with `state_groups` and `action_groups` index lists.
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "per-group-mean")]
    joint_mode: ModeArg,
    /// Number of leading transitions treated as nominal.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..).map(|v| v as usize))]
    calib_steps: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MonitorArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    baseline: PathBuf,
    /// Defaults to the threshold stored in the baseline.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
    min_consecutive: usize,
    /// Known perturbation onset; adds latencies to events.
    #[arg(long)]
    onset_step: Option<u64>,
    /// Defaults to stdout.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    events_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// JSON suite file; the built-in desk suite when omitted.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Seeds 0..K.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Replace every perturbation with NONE to measure false positives.
    #[arg(long)]
    control: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
    loops: usize,
    /// Alphabet size of states and actions.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=21).map(|v| v as usize))]
    size: usize,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..).map(|v| v as usize))]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit with status 1 when any quantity is further off than this.
    #[arg(long, default_value_t = 0.01)]
    tolerance: f64,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("IDT_LOG", "off");
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging();
    let outcome = match cli.command {
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Monitor(a) => monitor_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::OracleCheck(a) => oracle_cmd(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("idt: {e}");
            1
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

fn calibrate_cmd(a: CalibrateArgs) -> Result<i32> {
    let window = WindowSpec::new(a.window, a.stride)?.with_mode(a.joint_mode.into());
    let grouping: Option<GroupingConfig> = a.groups.as_deref().map(read_json).transpose()?;
    let prefix = read_stream(&a.input)?.take(a.calib_steps).collect::<Result<Vec<_>>>()?;
    if prefix.len() < a.calib_steps {
        return Err(Error::Calibration(format!(
            "asked for {} calibration steps but the stream has {}",
            a.calib_steps,
            prefix.len()
        )));
    }
    let baseline = fit_baseline(&prefix, a.bins, a.clip, grouping, window, a.threshold)?;
    baseline.save(&a.out)?;
    log::info!(
        "calibrated {} channels on {} steps",
        baseline.model.channels.len(),
        prefix.len()
    );
    Ok(0)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn monitor_cmd(a: MonitorArgs) -> Result<i32> {
    let baseline = BaselineFile::load(&a.baseline)?;
    let config = MonitorConfig {
        threshold: a.threshold,
        min_consecutive: a.min_consecutive,
        onset_step: a.onset_step,
    };
    let mut metrics: Box<dyn Write> = match &a.metrics_out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut events = a.events_out.as_deref().map(create).transpose()?;
    let input = open_source(&a.input)?;
    let stats = run_monitor(input, &baseline, &config, &mut metrics, events.as_mut())?;
    metrics.flush()?;
    log::info!(
        "{} transitions, {} windows, {} events",
        stats.transitions,
        stats.windows,
        stats.events
    );
    Ok(0)
}

/// Writes the report files of a benchmark run into `dir`.
pub fn write_bench_outputs(dir: &Path, seeds: &[u64], report: &BenchmarkReport) -> Result<()> {
    fs::create_dir_all(dir.join("series"))?;

    let summary = serde_json::json!({
        "seeds": seeds,
        "failed_trials": report.failed_trials,
        "summary": report.summary,
        "conditions": report.conditions,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(io::Error::from)?;
    fs::write(dir.join("summary.json"), text + "\n")?;

    let mut txt = report.summary.to_text();
    for c in &report.conditions {
        txt.push_str(&format!("\n[{}]\n", c.name));
        txt.push_str(&c.summary.to_text());
    }
    if report.failed_trials > 0 {
        txt.push_str(&format!("\n{} trial(s) failed; see trials.jsonl\n", report.failed_trials));
    }
    fs::write(dir.join("summary.txt"), txt)?;

    let mut trials = create(&dir.join("trials.jsonl"))?;
    crate::io::write_jsonl(&mut trials, &report.trials)?;
    trials.flush()?;

    for t in &report.trials {
        let name = format!("seed{}_cond{}.jsonl", t.seed, t.condition_index);
        let mut out = create(&dir.join("series").join(name))?;
        write_metrics(&mut out, &t.series)?;
        out.flush()?;
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<i32> {
    let mut suite: Suite = match &a.suite {
        Some(path) => read_json(path)?,
        None => Suite::desk(),
    };
    if a.control {
        for c in &mut suite.conditions {
            c.perturbation = Perturbation::none().with_onset(c.perturbation.onset_episode);
        }
    }
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let report = run_benchmark(&suite, &seeds)?;
    write_bench_outputs(&a.out, &seeds, &report)?;
    print!("{}", report.summary.to_text());
    Ok(0)
}

fn oracle_cmd(a: OracleArgs) -> Result<i32> {
    let report = estimator_equivalence(a.loops, a.size, a.samples, a.seed)?;
    println!(
        "{} random {}x{}x{} loops, {} samples each",
        a.loops, a.size, a.size, a.size, a.samples
    );
    for (q, err) in &report.max_abs_error {
        println!("{q:<8} max abs error {err:.3e}");
    }
    println!("overall  max abs error {:.3e}", report.overall_max_abs_error);
    if report.overall_max_abs_error > a.tolerance {
        eprintln!("idt: error exceeds tolerance {}", a.tolerance);
        return Ok(1);
    }
    Ok(0)
}
