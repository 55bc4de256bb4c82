//! Entropic approximation of `W_2`, computed with log-domain Sinkhorn updates.
//!
//! The returned value is `sqrt(<pi_eps, C>)` for the entropic coupling
//! `pi_eps`, which is a feasible (up to `tol`) coupling and therefore biased
//! upward relative to the exact distance.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

use super::simplex::squared_distance;

#[derive(Debug, Clone, Copy)]
pub struct SinkhornResult {
    /// Approximate `W_2`.
    pub value: f64,
    pub iterations: usize,
    /// L1 violation of the source marginal at exit.
    pub marginal_violation: f64,
}

pub fn sinkhorn_w2(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    regularization: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornResult> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    if !(regularization > 0.0 && regularization.is_finite()) {
        return Err(Error::UnsupportedInstance(format!("regularization {regularization} must be positive")));
    }
    let (n1, n2) = (mu.len(), nu.len());
    let eps = regularization;
    let cost: Vec<f64> = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .map(|(i, j)| squared_distance(mu.location(i), nu.location(j)))
        .collect();
    let log_a: Vec<f64> = mu.weights().iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = nu.weights().iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; n1];
    let mut g = vec![0.0; n2];
    let mut scratch = Vec::with_capacity(n1.max(n2));

    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..n1 {
            scratch.clear();
            scratch.extend((0..n2).map(|j| (g[j] - cost[i * n2 + j]) / eps));
            f[i] = eps * (log_a[i] - log_sum_exp(&scratch));
        }
        for j in 0..n2 {
            scratch.clear();
            scratch.extend((0..n1).map(|i| (f[i] - cost[i * n2 + j]) / eps));
            g[j] = eps * (log_b[j] - log_sum_exp(&scratch));
        }
        // Columns are exact after the g-update; measure the row marginal.
        violation = (0..n1)
            .map(|i| {
                let row: f64 = (0..n2).map(|j| ((f[i] + g[j] - cost[i * n2 + j]) / eps).exp()).sum();
                (row - mu.weights()[i]).abs()
            })
            .sum();
        if violation <= tol {
            break;
        }
    }
    if violation > tol {
        return Err(Error::MaxIterExceeded { iterations, violation });
    }

    let transport_cost: f64 = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .map(|(i, j)| {
            let c = cost[i * n2 + j];
            ((f[i] + g[j] - c) / eps).exp() * c
        })
        .sum();
    Ok(SinkhornResult { value: transport_cost.max(0.0).sqrt(), iterations, marginal_violation: violation })
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diracs() {
        let mu = DiscreteMeasure::dirac(&[0.0, 0.0]);
        let nu = DiscreteMeasure::dirac(&[3.0, 4.0]);
        let r = sinkhorn_w2(&mu, &nu, 1e-3, 1e-12, 10).unwrap();
        assert!((r.value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn identical_measures_are_near_zero() {
        let mu = DiscreteMeasure::uniform(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = sinkhorn_w2(&mu, &mu, 1e-2, 1e-10, 10_000).unwrap();
        assert!(r.value < 1e-6, "{}", r.value);
    }

    #[test]
    fn reports_non_convergence() {
        let mu = DiscreteMeasure::uniform(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let nu = DiscreteMeasure::from_points(&[vec![0.5], vec![3.0]], vec![1.0, 3.0]).unwrap();
        assert!(matches!(sinkhorn_w2(&mu, &nu, 1e-3, 1e-15, 1), Err(Error::MaxIterExceeded { .. })));
        assert!(sinkhorn_w2(&mu, &nu, 0.0, 1e-6, 10).is_err());
    }
}
