//! Window metrics on three hand-built streams: a copy loop, independent
//! noise and a noisy copy in between.

use idt_core::{stream_metrics, SymbolizedTransition, WindowSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stream(copy_prob: f64, seed: u64) -> Vec<SymbolizedTransition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..3000u64)
        .map(|t| {
            let s = rng.random_range(0..4u64);
            let sn = if rng.random::<f64>() < copy_prob { s } else { rng.random_range(0..4) };
            SymbolizedTransition {
                t,
                s_sym: vec![s],
                a_sym: vec![0],
                s_next_sym: vec![sn],
                reward: None,
                episode: None,
            }
        })
        .collect()
}

fn main() -> idt_core::Result<()> {
    let spec = WindowSpec::default();
    println!("{:<10} {:>7} {:>7} {:>7} {:>7}", "copy prob", "P", "Hf", "Hb", "dH");
    for q in [1.0, 0.8, 0.5, 0.0] {
        let ms = stream_metrics(&stream(q, 7), &spec)?;
        let mean = |f: fn(&idt_core::WindowMetrics) -> f64| ms.iter().map(f).sum::<f64>() / ms.len() as f64;
        println!(
            "{q:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            mean(|m| m.p),
            mean(|m| m.hf),
            mean(|m| m.hb),
            mean(|m| m.dh)
        );
    }
    Ok(())
}
