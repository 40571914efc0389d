//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use idt_core::bench::{run_benchmark, BenchmarkReport, Suite, DESK_SEEDS};
use idt_core::cli::write_bench_outputs;
use idt_core::detector::{Channel, ChannelBaseline, Direction, UNION_ROW};
use idt_core::equivalence::estimator_equivalence;
use idt_core::io::write_metrics;
use idt_core::synth::{Perturbation, PerturbationKind};
use idt_core::{
    detect, fit_baseline, run_monitor, stream_metrics, summarize, BaselineModel, Discretizer, JointMode,
    MonitorConfig, SymbolizedTransition, TrialOutcome, WindowMetrics, WindowSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

/// Identity audit over every window computed during the run.
#[derive(Default)]
struct Audit {
    windows: usize,
    failures: usize,
    violations: Vec<String>,
}

type Criterion = (u8, &'static str, fn() -> Check);

thread_local! {
    static AUDIT: RefCell<Audit> = RefCell::new(Audit::default());
}

fn audit(ms: &[WindowMetrics]) {
    AUDIT.with(|a| {
        let mut a = a.borrow_mut();
        for m in ms {
            a.windows += 1;
            let fwd = (m.h_snext - (m.mi + m.hf)).abs();
            let bwd = (m.h_sa - (m.mi + m.hb)).abs();
            let bad = fwd >= 1e-9 || bwd >= 1e-9 || m.dh != m.hf - m.hb;
            a.failures += usize::from(bad);
            if bad && a.violations.len() < 5 {
                a.violations.push(format!("window {} fwd {fwd:e} bwd {bwd:e}", m.window_index));
            }
        }
    });
}

fn metrics(stream: &[SymbolizedTransition], spec: &WindowSpec) -> Vec<WindowMetrics> {
    let out = stream_metrics(stream, spec).expect("window metrics");
    audit(&out);
    out
}

fn sym(t: usize, s: Vec<u64>, a: Vec<u64>, sn: Vec<u64>) -> SymbolizedTransition {
    SymbolizedTransition {
        t: t as u64,
        s_sym: s,
        a_sym: a,
        s_next_sym: sn,
        reward: None,
        episode: None,
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took > limit {
        Err(format!("took {took:.1?}, limit {limit:?}"))
    } else {
        Ok(took)
    }
}

// ---- 1: bound under fuzzing -------------------------------------------------

/// Random and adversarial symbol streams: uniform noise, constants, copies,
/// bijections of (s, a), lone outliers, all-distinct symbols and extreme
/// symbol values.
fn fuzz_stream(rng: &mut ChaCha8Rng) -> Vec<SymbolizedTransition> {
    let groups = rng.random_range(1..=4usize);
    let len = rng.random_range(150..400usize);
    let k = rng.random_range(1..=6u64);
    let draw = |rng: &mut ChaCha8Rng, k: u64| -> Vec<u64> { (0..groups).map(|_| rng.random_range(0..k)).collect() };
    match rng.random_range(0..7) {
        0 => (0..len).map(|t| sym(t, draw(rng, k), draw(rng, k), draw(rng, k))).collect(),
        1 => {
            let c = draw(rng, k);
            (0..len).map(|t| sym(t, c.clone(), c.clone(), c.clone())).collect()
        }
        2 => (0..len)
            .map(|t| {
                let s = draw(rng, k);
                sym(t, s.clone(), vec![0; groups], s)
            })
            .collect(),
        3 => (0..len)
            .map(|t| {
                let (s, a) = (draw(rng, k), draw(rng, k));
                let sn = s.iter().zip(&a).map(|(x, y)| x * k + y).collect();
                sym(t, s, a, sn)
            })
            .collect(),
        4 => {
            let at = rng.random_range(0..len);
            (0..len)
                .map(|t| {
                    let v = vec![u64::from(t == at); groups];
                    sym(t, v.clone(), vec![0; groups], v)
                })
                .collect()
        }
        5 => (0..len)
            .map(|t| {
                let v = vec![t as u64; groups];
                sym(t, v.clone(), v.clone(), v)
            })
            .collect(),
        _ => (0..len)
            .map(|t| {
                let s = (0..groups).map(|_| u64::MAX - rng.random_range(0..2)).collect();
                let a = (0..groups).map(|_| rng.random_range(0..3) << 60).collect();
                sym(t, s, a, draw(rng, 2))
            })
            .collect(),
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut windows, mut streams, mut worst) = (0usize, 0usize, 0.0f64);
    while windows < 100_000 {
        let stream = fuzz_stream(&mut rng);
        let length = rng.random_range(2..=stream.len().min(120));
        let stride = rng.random_range(1..=length.min(4));
        let mode = if rng.random() { JointMode::FullJoint } else { JointMode::PerGroupMean };
        let spec = WindowSpec::new(length, stride).unwrap().with_mode(mode);
        for m in metrics(&stream, &spec) {
            if !(m.p >= 0.0 && m.p <= 0.5 + 1e-12) {
                return Err(format!("P = {} in stream {streams} window {}", m.p, m.window_index));
            }
            worst = worst.max(m.p);
            windows += 1;
        }
        streams += 1;
    }
    let took = within(Duration::from_secs(60), start)?;
    Ok(format!("{windows} windows from {streams} streams, max P {worst}, {took:.1?}"))
}

// ---- 2: saturation -----------------------------------------------------------

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let copy: Vec<_> = (0..20_000)
        .map(|t| {
            let s = rng.random_range(0..4u64);
            sym(t, vec![s], vec![0], vec![s])
        })
        .collect();
    let mut checked = 0;
    for m in metrics(&copy, &WindowSpec::new(300, 50).unwrap()) {
        if m.degenerate {
            continue;
        }
        if (m.p - 0.5).abs() > 1e-9 {
            return Err(format!("copy loop window {} has P = {}", m.window_index, m.p));
        }
        checked += 1;
    }

    let n = 200_000;
    let independent: Vec<_> = (0..n)
        .map(|t| {
            let mut d = || vec![rng.random_range(0..4u64)];
            sym(t, d(), d(), d())
        })
        .collect();
    let mut means = Vec::new();
    for w in [100, 300, 1000, 3000, 10_000] {
        let ms = metrics(&independent, &WindowSpec::new(w, w).unwrap());
        let mean = ms.iter().map(|m| m.p).sum::<f64>() / ms.len() as f64;
        let max = ms.iter().map(|m| m.p).fold(0.0, f64::max);
        means.push((w, mean, max));
    }
    let desc = means.iter().map(|(w, m, _)| format!("W={w}: {m:.5}")).collect::<Vec<_>>().join(", ");
    if !means.windows(2).all(|p| p[1].1 < p[0].1) {
        return Err(format!("mean P not strictly decreasing: {desc}"));
    }
    let (_, _, max_10k) = means[4];
    if max_10k >= 0.05 {
        return Err(format!("independent loop P up to {max_10k} at W=10000"));
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!("copy P=0.5 on {checked} windows; independent mean P {desc}; {took:.1?}"))
}

// ---- 4: oracle equivalence -------------------------------------------------

fn criterion_4() -> Check {
    let start = Instant::now();
    let report = estimator_equivalence(20, 3, 1_000_000, 0).map_err(|e| e.to_string())?;
    audit(&report.loops.iter().map(|l| l.estimate.clone()).collect::<Vec<_>>());
    let took = within(Duration::from_secs(300), start)?;
    let worst = report
        .max_abs_error
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap_or_default();
    if report.loops.len() < 20 || report.overall_max_abs_error > 0.01 {
        return Err(format!("max abs error {:.3e} bits on {}", worst.1, worst.0));
    }
    Ok(format!(
        "{} loops at 1e6 samples, max abs error {:.2e} bits ({}), {took:.1?}",
        report.loops.len(),
        worst.1,
        worst.0
    ))
}

// ---- 5: detection logic ----------------------------------------------------

fn canned(index: usize, values: [f64; 5]) -> WindowMetrics {
    WindowMetrics {
        window_index: index,
        t_start: 0,
        t_end: 0,
        h_s: 0.0,
        h_a: 0.0,
        h_snext: 0.0,
        h_sa: 0.0,
        h_joint: 0.0,
        mi: 0.0,
        c: 0.0,
        p: values[0],
        hf: values[1],
        hb: values[2],
        dh: values[3],
        reward_mean: Some(values[4]),
        sample_count: None,
        degenerate: false,
    }
}

/// mu = 1, sigma = 0.25 on every channel: edges at 0.25 and 1.75, exact in
/// binary.
fn unit_model() -> BaselineModel {
    BaselineModel {
        threshold: 3.0,
        channels: Channel::ALL
            .iter()
            .map(|&c| (c, ChannelBaseline { mu: 1.0, sigma: 0.25, n_windows: 100 }))
            .collect(),
    }
}

const LEVELS: [f64; 5] = [0.0, 0.25, 1.0, 1.75, 2.0];

fn reference_direction(x: f64) -> Option<Direction> {
    if x > 1.75 {
        Some(Direction::Above)
    } else if x < 0.25 {
        Some(Direction::Below)
    } else {
        None
    }
}

/// Straight scan for the first run of `k` deviating values at or after onset.
fn reference_latency(values: &[f64], onset: usize, k: usize) -> Option<usize> {
    (onset..values.len())
        .find(|&i| i + k <= values.len() && values[i..i + k].iter().all(|&x| reference_direction(x).is_some()))
        .map(|i| i - onset)
}

fn criterion_5() -> Check {
    let model = unit_model();
    let mut cases = 0usize;
    let mut flagged = BTreeMap::<&str, usize>::new();

    // Every single-channel series over five levels up to length 5, every
    // onset and run length: decision, latency and direction against the
    // reference scan. Edge values must never flag.
    for len in 1..=5u32 {
        for code in 0..5usize.pow(len) {
            let values: Vec<f64> = (0..len).map(|i| LEVELS[code / 5usize.pow(i) % 5]).collect();
            for channel in Channel::ALL {
                let slot = Channel::ALL.iter().position(|&c| c == channel).unwrap();
                let series: Vec<_> = values
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let mut row = [1.0; 5];
                        row[slot] = v;
                        canned(i, row)
                    })
                    .collect();
                for onset in 0..len as usize {
                    for k in 1..=3 {
                        let out = detect(&series, &model, onset, 3.0, k).map_err(|e| e.to_string())?;
                        let got = out.channel(channel);
                        let want = reference_latency(&values, onset, k);
                        if got.latency_windows != want || got.detected != want.is_some() {
                            return Err(format!("{channel:?} {values:?} onset {onset} k {k}: got {:?} want {want:?}", got.latency_windows));
                        }
                        if let (Some(l), Some(e)) = (want, &got.event) {
                            if Some(e.direction) != reference_direction(values[onset + l]) {
                                return Err(format!("wrong direction on {values:?}"));
                            }
                            *flagged.entry(if e.direction == Direction::Above { "above" } else { "below" }).or_default() += 1;
                        }
                        let others_quiet = Channel::ALL.iter().filter(|&&c| c != channel).all(|&c| !out.channel(c).detected);
                        let union_ok = if channel == Channel::Reward {
                            !out.union.detected
                        } else {
                            out.union.latency_windows == want
                        };
                        if !others_quiet || !union_ok {
                            return Err(format!("cross-talk from {channel:?} on {values:?}"));
                        }
                        cases += 1;
                    }
                }
            }
        }
    }

    // Every on/off pattern of the five channels over three windows, with
    // alternating directions: union is the OR and the minimum, per trial
    // and in the summary.
    let mut trials: Vec<(u64, TrialOutcome)> = Vec::new();
    for code in 0..1u32 << 15 {
        let series: Vec<_> = (0..3)
            .map(|i| {
                let mut row = [1.0; 5];
                for (c, v) in row.iter_mut().enumerate() {
                    if code >> (i * 5 + c) & 1 == 1 {
                        *v = if (i + c) % 2 == 0 { 2.0 } else { 0.0 };
                    }
                }
                canned(i, row)
            })
            .collect();
        for onset in 0..3 {
            let out = detect(&series, &model, onset, 3.0, 1).map_err(|e| e.to_string())?;
            let info: Vec<_> = Channel::INFORMATION.iter().map(|&c| out.channel(c)).collect();
            let any = info.iter().any(|o| o.detected);
            let min = info.iter().filter_map(|o| o.latency_windows).min();
            if out.union.detected != any || out.union.latency_windows != min {
                return Err(format!("union mismatch for pattern {code:#x} onset {onset}"));
            }
            cases += 1;
            if onset == 0 {
                trials.push(((code % 5) as u64, out));
            }
        }
    }
    let table = summarize(&trials).map_err(|e| e.to_string())?;
    let union = table.row(UNION_ROW).ok_or("no union row")?;
    for c in Channel::INFORMATION {
        let row = table.row(c.name()).ok_or("missing row")?;
        if union.detection_rate_pct < row.detection_rate_pct {
            return Err(format!("union rate below {}", c.name()));
        }
    }
    if flagged.len() != 2 {
        return Err(format!("only saw directions {flagged:?}"));
    }
    Ok(format!("{cases} cases; edges never flag; flagged above {} / below {} times", flagged["above"], flagged["below"]))
}

// ---- 6: desk suite -----------------------------------------------------------

fn rate(table: &idt_core::SummaryTable, row: &str) -> f64 {
    table.row(row).map(|r| r.detection_rate_pct).unwrap_or(f64::NAN)
}

fn latency(table: &idt_core::SummaryTable, row: &str) -> Option<f64> {
    table.row(row).and_then(|r| r.median_latency_windows)
}

fn bench(suite: &Suite) -> Result<BenchmarkReport, String> {
    let report = run_benchmark(suite, &DESK_SEEDS).map_err(|e| e.to_string())?;
    for t in &report.trials {
        audit(&t.series);
    }
    Ok(report)
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let report = bench(&Suite::desk())?;
    let s = &report.summary;
    let (u, r) = (rate(s, UNION_ROW), rate(s, "reward"));
    let (lu, lr) = (latency(s, UNION_ROW), latency(s, "reward"));
    let fmt = |l: Option<f64>| l.map_or("-".to_string(), |v| v.to_string());
    let mut problems = Vec::new();
    if report.failed_trials > 0 {
        problems.push(format!("{} failed trials", report.failed_trials));
    }
    if u < r {
        problems.push(format!("union rate {u}% below reward {r}%"));
    }
    // a channel that never fires has infinite latency
    match (lu, lr) {
        (None, _) => problems.push("union never detected".into()),
        (Some(a), Some(b)) if a > b => problems.push(format!("union latency {a} above reward {b}")),
        _ => {}
    }

    let control = bench(&Suite::desk_control())?;
    let mut fp = Vec::new();
    for c in Channel::ALL {
        let v = rate(&control.summary, c.name());
        if !(v < 10.0) {
            problems.push(format!("control false positives on {} at {v}%", c.name()));
        }
        fp.push(format!("{} {v:.1}", c.name()));
    }

    let ladder: Vec<f64> = ["ACTION_NOISE@0.01", "ACTION_NOISE@0.03", "ACTION_NOISE@0.04"]
        .iter()
        .filter_map(|n| report.condition(n).map(|t| rate(t, UNION_ROW)))
        .collect();
    let mut strong = Suite::desk();
    strong.conditions.truncate(1);
    strong.conditions[0].perturbation = Perturbation::new(PerturbationKind::ActionNoise, 0.5, strong.conditions[0].perturbation.onset_episode);
    strong.conditions[0].name = strong.conditions[0].perturbation.label();
    let strong_rate = rate(&bench(&strong)?.summary, UNION_ROW);

    let took = within(Duration::from_secs(600), start)?;
    let detail = format!(
        "union {u:.1}% / {} windows vs reward {r:.1}% / {}; control FP % [{}] (union {:.1}, reported only); action ladder {ladder:?}; ACTION_NOISE 0.5 union {strong_rate:.0}%; {took:.1?}",
        fmt(lu),
        fmt(lr),
        fp.join(", "),
        rate(&control.summary, UNION_ROW),
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", problems.join("; ")))
    }
}

// ---- 7: determinism --------------------------------------------------------

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_7() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = Suite::desk();
    let mut dirs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let report = bench(&suite)?;
        write_bench_outputs(&dir, &DESK_SEEDS, &report).map_err(|e| e.to_string())?;
        dirs.push(files(&dir));
    }
    if dirs[0] != dirs[1] {
        return Err("bench outputs differ between runs".into());
    }
    let bytes: usize = dirs[0].iter().map(|(_, b)| b.len()).sum();

    let stream = common::desk_stream(7, 8, 6);
    let path = tmp.path().join("stream.jsonl");
    std::fs::write(&path, common::to_jsonl(&stream)).map_err(|e| e.to_string())?;
    let baseline = fit_baseline(&stream[..2500], 3, 3.0, None, WindowSpec::default(), 3.0).map_err(|e| e.to_string())?;
    let d = Discretizer::new(baseline.discretizer.clone(), baseline.grouping.clone()).map_err(|e| e.to_string())?;
    let symbols: Vec<_> = stream.iter().map(|x| d.apply(x).unwrap()).collect();
    let mut expected = Vec::new();
    write_metrics(&mut expected, &metrics(&symbols, &baseline.window)).map_err(|e| e.to_string())?;
    let input = std::io::BufReader::new(std::fs::File::open(&path).map_err(|e| e.to_string())?);
    let mut got = Vec::new();
    run_monitor(input, &baseline, &MonitorConfig::default(), &mut got, None::<&mut Vec<u8>>).map_err(|e| e.to_string())?;
    if got != expected {
        return Err("monitor output differs from in-process metrics".into());
    }
    Ok(format!(
        "{} bench files ({bytes} bytes) identical across runs; monitor matches in-process on {} bytes",
        dirs[0].len(),
        got.len()
    ))
}

// ---- 8: window arithmetic -------------------------------------------------

fn criterion_8() -> Check {
    let spec = WindowSpec::default();
    let n = spec.window_count(50_000);
    let stream: Vec<_> = (0..50_000).map(|t| sym(t, vec![t as u64 % 3], vec![0], vec![(t as u64 + 1) % 3])).collect();
    let computed = metrics(&stream, &spec).len();
    if n == Some(995) && computed == 995 {
        Ok("N=50000, W=300, stride 50 gives 995 windows".into())
    } else {
        Err(format!("window_count {n:?}, computed {computed}"))
    }
}

// ---- 3: identities over everything above ---------------------------------

fn criterion_3() -> Check {
    AUDIT.with(|a| {
        let a = a.borrow();
        if a.violations.is_empty() && a.windows > 0 {
            Ok(format!("{} windows audited", a.windows))
        } else {
            Err(format!("{} violations, e.g. {:?}", a.failures, a.violations))
        }
    })
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "bound", criterion_1),
        (2, "saturation", criterion_2),
        (4, "oracle equivalence", criterion_4),
        (5, "detection logic", criterion_5),
        (6, "desk suite", criterion_6),
        (7, "determinism", criterion_7),
        (8, "window arithmetic", criterion_8),
        // last, so it covers windows from every other criterion
        (3, "identities", criterion_3),
    ];
    let mut results = BTreeMap::new();
    for (id, name, run) in criteria {
        results.insert(id, (name, run()));
    }
    let mut failed = 0;
    for (id, (name, result)) in &results {
        match result {
            Ok(detail) => println!("criterion {id} {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} {name}: FAIL ({detail})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
