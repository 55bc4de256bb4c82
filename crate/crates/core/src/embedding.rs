//! Classical multidimensional scaling and the end-to-end Wassmap pipeline.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::transport::{pairwise_w2_squared, SquaredDistanceMatrix};

/// Low-dimensional coordinates together with the spectrum they came from.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// `N x d`, one row per input item.
    pub points: DMatrix<f64>,
    /// Retained eigenvalues, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Retained eigenvalues before clamping.
    pub raw_eigenvalues: Vec<f64>,
    /// First eigenvalue after the retained block, if any.
    pub discarded_top: Option<f64>,
    /// Full spectrum of the double-centered matrix, descending.
    pub spectrum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumDoc {
    eigenvalues: Vec<f64>,
    raw_eigenvalues: Vec<f64>,
    discarded_top: Option<f64>,
    clamped_count: usize,
    spectrum: Vec<f64>,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Number of retained eigenvalues that were negative and zeroed.
    pub fn clamped_count(&self) -> usize {
        self.raw_eigenvalues.iter().filter(|v| **v < 0.0).count()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.points.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Eigenvalue diagnostics as a JSON document.
    pub fn spectrum_json(&self) -> String {
        let doc = SpectrumDoc {
            eigenvalues: self.eigenvalues.clone(),
            raw_eigenvalues: self.raw_eigenvalues.clone(),
            discarded_top: self.discarded_top,
            clamped_count: self.clamped_count(),
            spectrum: self.spectrum.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("spectrum serialization cannot fail")
    }

    /// Rebuilds an embedding from its CSV coordinates and JSON diagnostics.
    pub fn from_files(csv: &str, spectrum_json: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = csv
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("embedding CSV: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let doc: SpectrumDoc =
            serde_json::from_str(spectrum_json).map_err(|e| Error::Parse(format!("eigenvalue JSON: {e}")))?;
        let d = doc.eigenvalues.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch(format!("embedding rows must have {d} columns")));
        }
        Ok(Self {
            points: DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]),
            eigenvalues: doc.eigenvalues,
            raw_eigenvalues: doc.raw_eigenvalues,
            discarded_top: doc.discarded_top,
            spectrum: doc.spectrum,
        })
    }
}

/// `B = -1/2 H W H` with the centering matrix `H = I - (1/N) 1 1^T`.
pub fn double_center(w: &SquaredDistanceMatrix) -> DMatrix<f64> {
    let n = w.size();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w.get(i, j)).sum::<f64>() / nf).collect();
    let grand_mean = row_means.iter().sum::<f64>() / nf;
    // W is symmetric, so column means equal row means.
    let mut b = DMatrix::from_fn(n, n, |i, j| -0.5 * (w.get(i, j) - row_means[i] - row_means[j] + grand_mean));
    // Symmetrize exactly.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = avg;
            b[(j, i)] = avg;
        }
    }
    b
}

/// Classical MDS: top-`d` eigenpairs of the double-centered matrix,
/// `points = V_d Lambda_d^{1/2}`. Negative retained eigenvalues are clamped
/// to zero and reported in [`Embedding::raw_eigenvalues`].
pub fn classical_mds(w: &SquaredDistanceMatrix, d: usize) -> Result<Embedding> {
    let n = w.size();
    if d == 0 || d >= n {
        return Err(Error::DimensionTooLarge { dim: d, n });
    }
    let eig = SymmetricEigen::new(double_center(w));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let spectrum: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

    let mut points = DMatrix::zeros(n, d);
    for (col, &k) in order.iter().take(d).enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0);
        let v = eig.eigenvectors.column(k);
        // Sign convention: the largest-magnitude component is positive.
        let pivot = (0..n).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = sign * lambda.sqrt();
        for i in 0..n {
            points[(i, col)] = scale * v[i];
        }
    }

    Ok(Embedding {
        points,
        eigenvalues: spectrum[..d].iter().map(|v| v.max(0.0)).collect(),
        raw_eigenvalues: spectrum[..d].to_vec(),
        discarded_top: spectrum.get(d).copied(),
        spectrum,
    })
}

/// Discrete Wassmap: exact pairwise `W_2^2` followed by classical MDS.
pub fn wassmap(measures: &[DiscreteMeasure], d: usize) -> Result<Embedding> {
    if d == 0 || d >= measures.len() {
        return Err(Error::DimensionTooLarge { dim: d, n: measures.len() });
    }
    classical_mds(&pairwise_w2_squared(measures)?, d)
}
