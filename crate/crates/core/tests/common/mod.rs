#![allow(dead_code)]

use idt_core::synth::{run_linear_loop, LinearLoopConfig, Perturbation, PerturbationKind};
use idt_core::Transition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One state variable on {-1, 0, 1} that is copied to the next step with
/// probability `q(t)` and redrawn uniformly otherwise; constant action.
pub fn noisy_copy_stream(steps: usize, seed: u64, q: impl Fn(usize) -> f64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s: i32 = 0;
    (0..steps)
        .map(|t| {
            let sn = if rng.random::<f64>() < q(t) { s } else { rng.random_range(-1..=1) };
            let x = Transition {
                t: t as u64,
                s: vec![s as f64],
                a: vec![0.0],
                s_next: vec![sn as f64],
                reward: None,
                episode: None,
            };
            s = sn;
            x
        })
        .collect()
}

/// A short run of the desk loop with an action-noise perturbation.
pub fn desk_stream(seed: u64, episodes: u64, onset_episode: u64) -> Vec<Transition> {
    let mut cfg = LinearLoopConfig::desk().with_seed(seed);
    cfg.episode_length = 500;
    let p = Perturbation::new(PerturbationKind::ActionNoise, 0.5, onset_episode);
    run_linear_loop(&cfg, &p, episodes).unwrap().transitions
}

pub fn to_jsonl(stream: &[Transition]) -> String {
    stream.iter().map(|x| idt_core::io::transition_line(x) + "\n").collect()
}
