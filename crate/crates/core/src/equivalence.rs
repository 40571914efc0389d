//! Plug-in estimates on long sampled runs of random finite loops against the
//! oracle's exact stationary values.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::{exact_metrics, stationary_joint};
use crate::synth::{run_discrete_loop, DiscreteLoopConfig, Perturbation};
use crate::window::{window_metrics, JointMode, WindowMetrics, WindowSpec};

pub const QUANTITIES: [&str; 11] = ["H_S", "H_A", "H_Snext", "H_SA", "H_joint", "MI", "C", "P", "Hf", "Hb", "dH"];

fn values(m: &WindowMetrics) -> [f64; 11] {
    [m.h_s, m.h_a, m.h_snext, m.h_sa, m.h_joint, m.mi, m.c, m.p, m.hf, m.hb, m.dh]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopComparison {
    pub config_seed: u64,
    pub exact: WindowMetrics,
    pub estimate: WindowMetrics,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub samples: usize,
    pub loops: Vec<LoopComparison>,
    /// Largest absolute error per quantity, in [`QUANTITIES`] order.
    pub max_abs_error: Vec<(String, f64)>,
    pub overall_max_abs_error: f64,
}

/// Compares `n_loops` random `size`×`size`×`size` loops, each sampled for
/// `samples` steps and estimated as one window.
pub fn estimator_equivalence(n_loops: usize, size: usize, samples: usize, seed: u64) -> Result<EquivalenceReport> {
    let spec = WindowSpec::new(samples, 1)?.with_mode(JointMode::FullJoint);
    let mut worst = [0.0f64; 11];
    let mut loops = Vec::with_capacity(n_loops);
    for i in 0..n_loops as u64 {
        let config_seed = seed.wrapping_add(i);
        let config = DiscreteLoopConfig::random(size, size, config_seed);
        let exact = exact_metrics(&stationary_joint(&config)?)?;
        let stream = run_discrete_loop(&config, &Perturbation::none(), samples)?;
        let estimate = window_metrics(&stream, &spec)?;
        let mut loop_max = 0.0f64;
        for (k, (e, x)) in values(&estimate).iter().zip(values(&exact)).enumerate() {
            let err = (e - x).abs();
            worst[k] = worst[k].max(err);
            loop_max = loop_max.max(err);
        }
        log::debug!("loop {config_seed}: max abs error {loop_max:.3e}");
        loops.push(LoopComparison {
            config_seed,
            exact,
            estimate,
            max_abs_error: loop_max,
        });
    }
    Ok(EquivalenceReport {
        samples,
        loops,
        max_abs_error: QUANTITIES.iter().map(|q| q.to_string()).zip(worst).collect(),
        overall_max_abs_error: worst.iter().copied().fold(0.0, f64::max),
    })
}
