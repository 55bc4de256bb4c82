use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric matrix of squared pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    n: usize,
    kind: String,
    entries: Vec<Vec<f64>>,
}

impl SquaredDistanceMatrix {
    /// Validates a row-major `n x n` matrix: symmetric, zero diagonal,
    /// nonnegative, finite.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::ShapeMismatch(format!("{} entries for a {n}x{n} matrix", entries.len())));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::ShapeMismatch(format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..i {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::ShapeMismatch(format!("entry ({i}, {j}) = {a} is not a squared distance")));
                }
                if a != b {
                    return Err(Error::ShapeMismatch(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds the matrix from its strict upper triangle, listed row by row.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::ShapeMismatch(format!("{} upper entries for n = {n}", upper.len())));
        }
        let mut entries = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                entries[i * n + j] = upper[k];
                entries[j * n + i] = upper[k];
                k += 1;
            }
        }
        Self::new(n, entries)
    }

    /// Squared Euclidean distances between the rows of a point list.
    pub fn euclidean(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                if points[i].len() != points[j].len() {
                    return Err(Error::DimensionMismatch { expected: points[i].len(), found: points[j].len() });
                }
                upper.push(points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum());
            }
        }
        Self::from_upper(n, &upper)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// First triple `(i, j, k)` with `d_ij > d_ik + d_kj + slack` on the
    /// square-rooted entries, if any.
    pub fn triangle_violation(&self, slack: f64) -> Option<(usize, usize, usize)> {
        let n = self.n;
        let d: Vec<f64> = self.entries.iter().map(|v| v.sqrt()).collect();
        for i in 0..n {
            for j in i + 1..n {
                for k in 0..n {
                    if d[i * n + j] > d[i * n + k] + d[k * n + j] + slack {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    /// Restriction to the given indices, in the given order.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let m = keep.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in keep {
            for &j in keep {
                entries.push(self.get(i, j));
            }
        }
        Self { n: m, entries }
    }

    /// `N` lines of `N` comma-separated values with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 24);
        for row in self.entries.chunks_exact(self.n.max(1)) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("distance CSV: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch("distance CSV is not square".into()));
        }
        Self::new(n, rows.concat())
    }

    /// JSON envelope `{"n": N, "kind": kind, "entries": [[...], ...]}`.
    pub fn to_json(&self, kind: &str) -> String {
        let doc = MatrixDoc {
            n: self.n,
            kind: kind.to_string(),
            entries: self.entries.chunks_exact(self.n.max(1)).map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_string(&doc).expect("matrix serialization cannot fail")
    }

    /// Parses a JSON envelope, returning the matrix and its `kind` tag.
    pub fn from_json(text: &str) -> Result<(Self, String)> {
        let doc: MatrixDoc = serde_json::from_str(text).map_err(|e| Error::Parse(format!("distance JSON: {e}")))?;
        if doc.entries.len() != doc.n || doc.entries.iter().any(|r| r.len() != doc.n) {
            return Err(Error::ShapeMismatch(format!("JSON entries do not form a {0}x{0} matrix", doc.n)));
        }
        Ok((Self::new(doc.n, doc.entries.concat())?, doc.kind))
    }
}
