//! Exact information quantities of fully enumerated `(S, A, S')` tables.
//!
//! This is the ground truth the window estimator is checked against, so it
//! takes a different route: mutual information and both conditional
//! entropies are summed directly as expectations of log-ratios rather than
//! obtained as differences of entropies. All sums are compensated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::DiscreteLoopConfig;
use crate::window::WindowMetrics;

/// Largest table the oracle will enumerate.
pub const MAX_TUPLES: usize = 10_000;

/// Allowed deviation of total probability mass from one.
pub const MASS_TOLERANCE: f64 = 1e-15;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Probability table `p(s, a, s')`, row-major in `(s, a, s')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_next: usize,
    pub p: Vec<f64>,
}

impl JointDistribution {
    pub fn new(n_states: usize, n_actions: usize, n_next: usize, p: Vec<f64>) -> Result<Self> {
        let d = JointDistribution {
            n_states,
            n_actions,
            n_next,
            p,
        };
        d.validate()?;
        Ok(d)
    }

    /// Builds a table from a closure, then rescales it to unit mass.
    pub fn from_weights(
        n_states: usize,
        n_actions: usize,
        n_next: usize,
        mut weight: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut p = Vec::with_capacity(n_states * n_actions * n_next);
        for s in 0..n_states {
            for a in 0..n_actions {
                for sn in 0..n_next {
                    p.push(weight(s, a, sn));
                }
            }
        }
        let total = compensated_sum(p.iter().copied());
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Distribution("weights must have positive finite total".into()));
        }
        for v in &mut p {
            *v /= total;
        }
        JointDistribution::new(n_states, n_actions, n_next, p)
    }

    pub fn validate(&self) -> Result<()> {
        let tuples = self.n_states * self.n_actions * self.n_next;
        if tuples == 0 || tuples > MAX_TUPLES {
            return Err(Error::Distribution(format!(
                "table of {tuples} tuples is outside 1..={MAX_TUPLES}"
            )));
        }
        if self.p.len() != tuples {
            return Err(Error::Distribution(format!(
                "table has {} entries, expected {tuples}",
                self.p.len()
            )));
        }
        if let Some(bad) = self.p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Distribution(format!("invalid probability {bad}")));
        }
        let mass = compensated_sum(self.p.iter().copied());
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Distribution(format!("total mass {mass} is not 1")));
        }
        Ok(())
    }

    pub fn get(&self, s: usize, a: usize, sn: usize) -> f64 {
        self.p[(s * self.n_actions + a) * self.n_next + sn]
    }

    fn tuples(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        (0..self.n_states).flat_map(move |s| {
            (0..self.n_actions).flat_map(move |a| (0..self.n_next).map(move |sn| (s, a, sn, self.get(s, a, sn))))
        })
    }

    /// Merges `S'` symbol `from` into `into`, returning a table with one fewer
    /// outcome symbol.
    pub fn merge_next(&self, into: usize, from: usize) -> Result<Self> {
        if into == from || into >= self.n_next || from >= self.n_next {
            return Err(Error::Distribution("merge needs two distinct outcome symbols".into()));
        }
        let relabel = |sn: usize| {
            let sn = if sn == from { into } else { sn };
            if sn > from {
                sn - 1
            } else {
                sn
            }
        };
        let n_next = self.n_next - 1;
        let mut p = vec![0.0; self.n_states * self.n_actions * n_next];
        for (s, a, sn, v) in self.tuples() {
            p[(s * self.n_actions + a) * n_next + relabel(sn)] += v;
        }
        JointDistribution::new(self.n_states, self.n_actions, n_next, p)
    }
}

fn entropy_of(probs: &[f64]) -> f64 {
    -compensated_sum(probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()))
}

fn clamp_artifact(x: f64) -> f64 {
    if (-crate::window::NEGATIVE_TOLERANCE..0.0).contains(&x) {
        0.0
    } else {
        x
    }
}

/// Exact metrics of `d`, reported in the same shape as a window estimate
/// (no sample count, no reward).
pub fn exact_metrics(d: &JointDistribution) -> Result<WindowMetrics> {
    d.validate()?;
    let (ns, na, nn) = (d.n_states, d.n_actions, d.n_next);

    let mut p_s = vec![Vec::new(); ns];
    let mut p_a = vec![Vec::new(); na];
    let mut p_n = vec![Vec::new(); nn];
    let mut p_sa = vec![Vec::new(); ns * na];
    for (s, a, sn, v) in d.tuples() {
        p_s[s].push(v);
        p_a[a].push(v);
        p_n[sn].push(v);
        p_sa[s * na + a].push(v);
    }
    let fold = |parts: Vec<Vec<f64>>| -> Vec<f64> { parts.into_iter().map(compensated_sum).collect() };
    let (p_s, p_a, p_n, p_sa) = (fold(p_s), fold(p_a), fold(p_n), fold(p_sa));

    let support: Vec<_> = d.tuples().filter(|t| t.3 > 0.0).collect();
    let h_joint = -compensated_sum(support.iter().map(|&(_, _, _, p)| p * p.log2()));
    let mi = compensated_sum(
        support
            .iter()
            .map(|&(s, a, sn, p)| p * (p / (p_sa[s * na + a] * p_n[sn])).log2()),
    );
    let hf = -compensated_sum(support.iter().map(|&(s, a, _, p)| p * (p / p_sa[s * na + a]).log2()));
    let hb = -compensated_sum(support.iter().map(|&(_, _, sn, p)| p * (p / p_n[sn]).log2()));

    let (h_s, h_a, h_snext, h_sa) = (entropy_of(&p_s), entropy_of(&p_a), entropy_of(&p_n), entropy_of(&p_sa));
    let (mi, hf, hb) = (clamp_artifact(mi), clamp_artifact(hf), clamp_artifact(hb));
    let c = h_s + h_a + h_snext;
    let degenerate = c <= 0.0;
    Ok(WindowMetrics {
        window_index: 0,
        t_start: 0,
        t_end: 0,
        h_s,
        h_a,
        h_snext,
        h_sa,
        h_joint,
        mi,
        c,
        p: if degenerate { 0.0 } else { mi / c },
        hf,
        hb,
        dh: hf - hb,
        reward_mean: None,
        sample_count: None,
        degenerate,
    })
}

/// State-to-state transition matrix of the chain induced by policy and kernel.
fn state_chain(config: &DiscreteLoopConfig) -> Vec<Vec<f64>> {
    let n = config.n_states;
    (0..n)
        .map(|s| {
            (0..n)
                .map(|sn| compensated_sum((0..config.n_actions).map(|a| config.policy_prob(s, a) * config.kernel_prob(s, a, sn))))
                .collect()
        })
        .collect()
}

/// Stationary state distribution of the loop, by direct linear solve of
/// `pi (T - I) = 0`, `sum(pi) = 1`.
///
/// A chain with more than one closed class makes the system singular and is
/// rejected.
pub fn stationary_states(config: &DiscreteLoopConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = config.n_states;
    let chain = state_chain(config);

    // Row i of the system is the balance equation of state i, with the last
    // one replaced by the normalisation constraint.
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| chain[j][i]).collect();
            row[i] -= 1.0;
            row.push(0.0);
            row
        })
        .collect();
    m[n - 1] = vec![1.0; n + 1];

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap_or(col);
        if m[pivot][col].abs() < 1e-12 {
            return Err(Error::Oracle(
                "induced chain has no unique stationary distribution (reducible)".into(),
            ));
        }
        m.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let factor = m[row][col] / m[col][col];
                if factor != 0.0 {
                    for k in col..=n {
                        m[row][k] -= factor * m[col][k];
                    }
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..n).map(|i| m[i][n] / m[i][i]).collect();
    if pi.iter().any(|&v| v < -1e-9) {
        return Err(Error::Oracle("stationary solve produced negative mass".into()));
    }
    for v in &mut pi {
        *v = v.max(0.0);
    }
    let total = compensated_sum(pi.iter().copied());
    for v in &mut pi {
        *v /= total;
    }
    let residual = (0..n)
        .map(|j| (compensated_sum((0..n).map(|i| pi[i] * chain[i][j])) - pi[j]).abs())
        .fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(Error::Oracle(format!("stationary residual {residual:e} too large")));
    }
    Ok(pi)
}

/// Stationary joint table `p(s) pi(a|s) k(s'|s,a)` of the nominal loop.
pub fn stationary_joint(config: &DiscreteLoopConfig) -> Result<JointDistribution> {
    let pi = stationary_states(config)?;
    JointDistribution::from_weights(config.n_states, config.n_actions, config.n_states, |s, a, sn| {
        pi[s] * config.policy_prob(s, a) * config.kernel_prob(s, a, sn)
    })
}
