//! Fit a discretizer on a nominal prefix of the desk loop and print the
//! composite symbols of the first few transitions.

use idt_core::synth::{run_linear_loop, LinearLoopConfig, Perturbation};
use idt_core::{fit_discretizer, Discretizer};

fn main() -> idt_core::Result<()> {
    let config = LinearLoopConfig::desk();
    let run = run_linear_loop(&config, &Perturbation::none(), 4)?;
    let params = fit_discretizer(&run.transitions[..1000], 3, 3.0)?;
    let d = Discretizer::new(params, LinearLoopConfig::desk_grouping())?;

    println!("groups: state {:?}, action {:?}", d.grouping().state_groups, d.grouping().action_groups);
    for x in run.transitions.iter().take(8) {
        let s = d.apply(x)?;
        println!("t={:<3} s={:?} a={:?} s'={:?}", s.t, s.s_sym, s.a_sym, s.s_next_sym);
    }
    Ok(())
}
