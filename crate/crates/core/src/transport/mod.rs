//! Exact quadratic Wasserstein distances between discrete measures.

mod matrix;
mod oracle;
mod pairwise;
mod simplex;
mod sinkhorn;

pub use matrix::SquaredDistanceMatrix;
pub use oracle::{permutation_oracle, MAX_ORACLE_ATOMS};
pub use pairwise::{pairwise_squared_by, pairwise_w2_squared};
pub use simplex::{solve_w2, PlanEntry, TransportPlan};
pub use sinkhorn::{sinkhorn_w2, SinkhornResult};

use crate::error::Result;
use crate::measure::DiscreteMeasure;

/// `W_2(mu, nu)`.
pub fn w2(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(solve_w2(mu, nu)?.cost.sqrt())
}
