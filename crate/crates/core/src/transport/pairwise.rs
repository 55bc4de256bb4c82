use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

use super::matrix::SquaredDistanceMatrix;
use super::simplex::solve_w2;

/// Pairwise `W_2^2` matrix computed with the exact solver.
pub fn pairwise_w2_squared(measures: &[DiscreteMeasure]) -> Result<SquaredDistanceMatrix> {
    pairwise_squared_by(measures, |_, _, mu, nu| Ok(solve_w2(mu, nu)?.cost))
}

/// Assembles a squared-distance matrix from an arbitrary pair evaluator.
///
/// `eval(i, j, mu_i, mu_j)` is called once per pair `i < j`, possibly from
/// several threads. Each entry depends only on its own call, so the result
/// does not depend on scheduling.
pub fn pairwise_squared_by<F>(measures: &[DiscreteMeasure], eval: F) -> Result<SquaredDistanceMatrix>
where
    F: Fn(usize, usize, &DiscreteMeasure, &DiscreteMeasure) -> Result<f64> + Sync,
{
    let n = measures.len();
    if n < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 measures, got {n}")));
    }
    let dim = measures[0].dim();
    if let Some(bad) = measures.iter().find(|m| m.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let upper = pairs
        .par_iter()
        .map(|&(i, j)| {
            eval(i, j, &measures[i], &measures[j]).map_err(|e| Error::Pair { i, j, source: Box::new(e) })
        })
        .collect::<Result<Vec<f64>>>()?;
    SquaredDistanceMatrix::from_upper(n, &upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pair_gives_zero_matrix() {
        let mu = DiscreteMeasure::uniform(&[vec![0.0, 1.0], vec![2.0, 0.5]]).unwrap();
        let w = pairwise_w2_squared(&[mu.clone(), mu]).unwrap();
        assert_eq!(w.entries(), &[0.0; 4]);
    }

    #[test]
    fn errors_carry_pair_indices() {
        let a = DiscreteMeasure::dirac(&[0.0]);
        let b = DiscreteMeasure::dirac(&[1.0]);
        let err = pairwise_squared_by(&[a.clone(), b.clone(), a], |i, j, _, _| {
            if (i, j) == (1, 2) {
                Err(Error::NonConvergence { pivots: 0 })
            } else {
                Ok(1.0)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Pair { i: 1, j: 2, .. }));
        assert!(pairwise_w2_squared(&[b]).is_err());
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        let a = DiscreteMeasure::dirac(&[0.0]);
        let b = DiscreteMeasure::dirac(&[1.0, 2.0]);
        assert!(matches!(pairwise_w2_squared(&[a, b]), Err(Error::DimensionMismatch { .. })));
    }
}
