//! Exact metrics of a random finite loop against plug-in estimates at
//! growing sample sizes.

use idt_core::synth::{run_discrete_loop, DiscreteLoopConfig, Perturbation};
use idt_core::{exact_metrics, stationary_joint, window_metrics, JointMode, WindowSpec};

fn main() -> idt_core::Result<()> {
    let config = DiscreteLoopConfig::random(3, 3, 42);
    let exact = exact_metrics(&stationary_joint(&config)?)?;
    println!("exact      P={:.5} MI={:.5} Hf={:.5} Hb={:.5}", exact.p, exact.mi, exact.hf, exact.hb);

    for n in [1_000, 10_000, 100_000, 1_000_000] {
        let stream = run_discrete_loop(&config, &Perturbation::none(), n)?;
        let spec = WindowSpec::new(n, 1)?.with_mode(JointMode::FullJoint);
        let m = window_metrics(&stream, &spec)?;
        println!("n={n:<8} P={:.5} MI={:.5} Hf={:.5} Hb={:.5}", m.p, m.mi, m.hf, m.hb);
    }
    Ok(())
}
