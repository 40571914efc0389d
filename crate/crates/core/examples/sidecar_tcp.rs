//! Sidecar monitoring over TCP: a simulated agent serves its transitions on
//! a local port and the monitor connects, streaming metrics and events to
//! stdout as windows close.

use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::thread;

use idt_core::io::{open_source, transition_line};
use idt_core::synth::{run_linear_loop, LinearLoopConfig, Perturbation, PerturbationKind};
use idt_core::{fit_baseline, run_monitor, MonitorConfig, WindowSpec};

fn main() -> idt_core::Result<()> {
    let config = LinearLoopConfig::desk().with_seed(5);
    let nominal = run_linear_loop(&config, &Perturbation::none(), 8)?.transitions;
    let baseline = fit_baseline(&nominal, 3, 3.0, Some(LinearLoopConfig::desk_grouping()), WindowSpec::default(), 3.0)?;

    let perturbation = Perturbation::new(PerturbationKind::ExternalForce, 1.0, 3);
    let live = run_linear_loop(&config.clone().with_seed(6), &perturbation, 4)?.transitions;
    let onset_step = perturbation.onset_step(config.episode_length);

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let agent = thread::spawn(move || -> std::io::Result<()> {
        let (socket, _) = listener.accept()?;
        let mut out = BufWriter::new(socket);
        for x in &live {
            writeln!(out, "{}", transition_line(x))?;
        }
        out.flush()
    });

    let input = open_source(&format!("tcp://{addr}"))?;
    let monitor = MonitorConfig {
        onset_step: Some(onset_step),
        ..Default::default()
    };
    let mut metrics = Vec::new();
    let mut events = std::io::stdout().lock();
    let stats = run_monitor(input, &baseline, &monitor, &mut metrics, Some(&mut events))?;
    agent.join().expect("agent thread")?;
    println!("{} transitions, {} windows, {} events", stats.transitions, stats.windows, stats.events);
    Ok(())
}
