//! Plug-in Shannon entropy over symbol counts, in bits.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Entropy `-sum p log2 p` of the empirical distribution given by `counts`.
///
/// Zero counts contribute nothing. The result does not depend on the order of
/// `counts`: they are summed in sorted order so that any two callers holding
/// the same multiset of counts get bit-identical answers.
pub fn entropy(counts: &[u64]) -> Result<f64> {
    let mut sorted: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    if sorted.is_empty() {
        return Err(Error::Estimation("entropy of an empty count table".into()));
    }
    sorted.sort_unstable();
    Ok(entropy_of_sorted(&sorted))
}

fn entropy_of_sorted(counts: &[u64]) -> f64 {
    if counts.len() == 1 {
        return 0.0;
    }
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    let weighted: f64 = counts
        .iter()
        .map(|&c| {
            let c = c as f64;
            c * c.log2()
        })
        .sum();
    (n.log2() - weighted / n).max(0.0)
}

/// Entropy of a symbol-to-count map.
pub fn entropy_of_map<K: Eq + Hash>(counts: &HashMap<K, u64>) -> Result<f64> {
    let values: Vec<u64> = counts.values().copied().collect();
    entropy(&values)
}
