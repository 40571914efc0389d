//! Write a desk-loop stream as JSON lines for the command-line tool:
//!
//! ```text
//! cargo run --example export_stream -- stream.jsonl
//! idt calibrate --input stream.jsonl --calib-steps 4000 --out baseline.json
//! idt monitor --input stream.jsonl --baseline baseline.json --onset-step 5000 --events-out events.jsonl
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};

use idt_core::io::transition_line;
use idt_core::synth::{run_linear_loop, LinearLoopConfig, Perturbation, PerturbationKind};

fn main() -> idt_core::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "stream.jsonl".into());
    let config = LinearLoopConfig::desk();
    let perturbation = Perturbation::new(PerturbationKind::ActionNoise, 0.5, 11);
    let run = run_linear_loop(&config, &perturbation, 12)?;

    let mut out = BufWriter::new(File::create(&path)?);
    for x in &run.transitions {
        writeln!(out, "{}", transition_line(x))?;
    }
    out.flush()?;
    println!(
        "wrote {} transitions to {path}; perturbation starts at step {}",
        run.transitions.len(),
        perturbation.onset_step(config.episode_length)
    );
    Ok(())
}
