//! Calibrate on the nominal part of a desk run, then detect an action-noise
//! perturbation switched on at episode 10.

use idt_core::synth::{run_linear_loop, LinearLoopConfig, Perturbation, PerturbationKind};
use idt_core::{calibrate, detect, fit_discretizer, stream_metrics, Channel, Discretizer, WindowSpec};

fn main() -> idt_core::Result<()> {
    let config = LinearLoopConfig::desk().with_seed(3);
    let perturbation = Perturbation::new(PerturbationKind::ActionNoise, 0.04, 10);
    let run = run_linear_loop(&config, &perturbation, 12)?;
    let onset = perturbation.onset_step(config.episode_length) as usize;

    let params = fit_discretizer(&run.transitions[..onset], 3, 3.0)?;
    let d = Discretizer::new(params, LinearLoopConfig::desk_grouping())?;
    let symbols = run.transitions.iter().map(|x| d.apply(x)).collect::<idt_core::Result<Vec<_>>>()?;

    let spec = WindowSpec::default();
    let series = stream_metrics(&symbols, &spec)?;
    let onset_window = spec.first_window_reaching(onset);
    let model = calibrate(&series[..onset_window], 3.0)?;
    let outcome = detect(&series, &model, onset_window, 3.0, 1)?;

    println!("{} windows, onset at window {onset_window}", series.len());
    for c in Channel::ALL {
        let o = outcome.channel(c);
        match &o.event {
            Some(e) => println!("{:<7} detected after {} windows, z={:+.2} {:?}", c.name(), o.latency_windows.unwrap(), e.z, e.direction),
            None => println!("{:<7} not detected", c.name()),
        }
    }
    println!("union   {:?}", outcome.union.latency_windows);
    Ok(())
}
