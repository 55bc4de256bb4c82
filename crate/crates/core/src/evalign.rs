//! Recovery metrics: orthogonal Procrustes alignment, normalized recovery
//! error and a leave-one-out nearest-neighbor probe.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};

/// Best fit `y ~ scale * rotation * x + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidAlignment {
    /// Orthogonal; reflections allowed.
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub scale: f64,
    pub rmse: f64,
}

impl RigidAlignment {
    /// Applies the fitted map to the rows of `x`.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x * self.rotation.transpose() * self.scale;
        for mut row in out.row_iter_mut() {
            row += self.translation.transpose();
        }
        out
    }
}

/// Serializable form of an alignment together with its normalized error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
    pub scale: f64,
    pub rmse: f64,
    pub normalized_error: f64,
}

impl AlignmentReport {
    pub fn new(alignment: &RigidAlignment, normalized_error: f64) -> Self {
        Self {
            rotation: alignment.rotation.row_iter().map(|r| r.iter().copied().collect()).collect(),
            translation: alignment.translation.iter().copied().collect(),
            scale: alignment.scale,
            rmse: alignment.rmse,
            normalized_error,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("alignment report serialization cannot fail")
    }
}

/// Stacks equal-length rows into an `N x d` matrix.
pub fn points_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::ShapeMismatch(format!("rows of length {d} and {}", bad.len())));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn centered(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mean: DVector<f64> = x.row_mean().transpose();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    (c, mean)
}

/// Least-squares fit of `Y` by `s R X + t` over orthogonal `R`, translation
/// `t` and, when `with_scale` is set, a positive scale `s`.
pub fn procrustes(x: &DMatrix<f64>, y: &DMatrix<f64>, with_scale: bool) -> Result<RigidAlignment> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", x.shape(), y.shape())));
    }
    if x.nrows() == 0 {
        return Err(Error::ShapeMismatch("no points to align".into()));
    }
    let (xc, x_mean) = centered(x);
    let (yc, y_mean) = centered(y);
    let cross = yc.transpose() * &xc;
    let svd = cross.clone().svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let rotation = &u * &v_t;
    let norm_x = xc.norm_squared();
    let scale = if with_scale && norm_x > 0.0 {
        let s = svd.singular_values.sum() / norm_x;
        if s > 0.0 {
            s
        } else {
            1.0
        }
    } else {
        1.0
    };
    let translation = &y_mean - &rotation * &x_mean * scale;
    let mut alignment = RigidAlignment { rotation, translation, scale, rmse: 0.0 };
    let residual = alignment.apply(x) - y;
    alignment.rmse = (residual.norm_squared() / x.nrows() as f64).sqrt();
    Ok(alignment)
}

/// Root-mean-square distance of the rows of `x` from their centroid.
pub fn rms_radius(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    (centered(x).0.norm_squared() / x.nrows() as f64).sqrt()
}

/// Procrustes RMSE of the embedding fitted onto `truth`, divided by the RMS
/// radius of `truth`. Returns the alignment alongside the error.
pub fn align_to_truth(points: &DMatrix<f64>, truth: &DMatrix<f64>, with_scale: bool) -> Result<(RigidAlignment, f64)> {
    let alignment = procrustes(points, truth, with_scale)?;
    let radius = rms_radius(truth);
    let error = if radius > 0.0 { alignment.rmse / radius } else { alignment.rmse };
    Ok((alignment, error))
}

pub fn recovery_error(embedding: &Embedding, truth: &DMatrix<f64>, with_scale: bool) -> Result<f64> {
    Ok(align_to_truth(&embedding.points, truth, with_scale)?.1)
}

/// Leave-one-out `k`-nearest-neighbor accuracy of `labels` over the rows of
/// `points`. Votes are tied-broken by the nearest neighbor among the tied
/// labels; equal distances go to the lower index.
pub fn knn_separation<L: Copy + Ord>(points: &DMatrix<f64>, labels: &[L], k: usize) -> Result<f64> {
    let n = points.nrows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} points but {} labels", labels.len())));
    }
    if k == 0 || k >= n {
        return Err(Error::ShapeMismatch(format!("k = {k} must lie in 1..{n}")));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateLabels);
    }

    let mut correct = 0usize;
    let mut others: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        others.clear();
        for j in (0..n).filter(|&j| j != i) {
            others.push(((points.row(i) - points.row(j)).norm_squared(), j));
        }
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let neighbors = &others[..k];
        // (votes, rank of the first neighbor carrying the label)
        let mut tally: Vec<(L, usize, usize)> = Vec::new();
        for (rank, &(_, j)) in neighbors.iter().enumerate() {
            match tally.iter_mut().find(|t| t.0 == labels[j]) {
                Some(t) => t.1 += 1,
                None => tally.push((labels[j], 1, rank)),
            }
        }
        let winner = tally
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
            .expect("k >= 1")
            .0;
        if winner == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / n as f64)
}
