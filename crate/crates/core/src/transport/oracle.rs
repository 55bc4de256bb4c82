use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

use super::simplex::squared_distance;

/// Largest instance the brute-force oracle accepts.
pub const MAX_ORACLE_ATOMS: usize = 8;

/// Exact `W_2^2` for equal-size, uniform-weight measures by enumerating all
/// assignments. Permutation matrices are the vertices of the doubly
/// stochastic polytope, so the optimum is attained at one of them.
pub fn permutation_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    let n = mu.len();
    if nu.len() != n {
        return Err(Error::UnsupportedInstance(format!("atom counts differ ({n} vs {})", nu.len())));
    }
    if n > MAX_ORACLE_ATOMS {
        return Err(Error::UnsupportedInstance(format!("{n} atoms exceeds the oracle limit of {MAX_ORACLE_ATOMS}")));
    }
    let uniform = 1.0 / n as f64;
    if mu.weights().iter().chain(nu.weights()).any(|w| (w - uniform).abs() > 1e-12) {
        return Err(Error::UnsupportedInstance("weights are not uniform".into()));
    }

    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| squared_distance(mu.location(i), nu.location(j)))
        .collect();
    let total = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>();

    // Heap's algorithm.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = total(&perm);
    let mut counters = vec![0usize; n];
    let mut k = 1;
    while k < n {
        if counters[k] < k {
            let swap_with = if k % 2 == 0 { 0 } else { counters[k] };
            perm.swap(swap_with, k);
            best = best.min(total(&perm));
            counters[k] += 1;
            k = 1;
        } else {
            counters[k] = 0;
            k += 1;
        }
    }
    Ok(best * uniform)
}
