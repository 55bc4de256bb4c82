//! Discrete probability measures on `R^m` and the raster images they come from.
//!
//! A [`DiscreteMeasure`] is a finite list of atoms with strictly positive
//! weights summing to one. Images become measures by placing each positive
//! pixel's normalized intensity at the pixel center.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Finitely supported probability measure `sum_n w_n delta_{x_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    // Row-major, `len() == weights.len() * dim`.
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from flattened atom locations and nonnegative masses.
    ///
    /// Zero-mass atoms are dropped and the remaining masses are renormalized.
    pub fn new(dim: usize, locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("ambient dimension must be at least 1".into()));
        }
        if locations.len() != weights.len() * dim {
            return Err(Error::InvalidMeasure(format!(
                "{} coordinates do not describe {} atoms in dimension {dim}",
                locations.len(),
                weights.len()
            )));
        }
        if let Some(bad) = locations.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure(format!("non-finite coordinate {bad}")));
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {bad} is negative or non-finite")));
        }

        let mut kept_locations = Vec::with_capacity(locations.len());
        let mut kept_weights = Vec::with_capacity(weights.len());
        for (w, x) in weights.iter().zip(locations.chunks_exact(dim)) {
            if *w > 0.0 {
                kept_locations.extend_from_slice(x);
                kept_weights.push(*w);
            }
        }
        if kept_weights.is_empty() {
            return Err(Error::InvalidMeasure("measure has no positive weight".into()));
        }
        let total: f64 = kept_weights.iter().sum();
        // Already-normalized input (for example a reloaded measure) keeps its
        // exact weights so that its digest survives a round trip.
        if (total - 1.0).abs() > 1e-12 {
            for w in &mut kept_weights {
                *w /= total;
            }
        }
        Ok(Self { dim, locations: kept_locations, weights: kept_weights })
    }

    /// Builds a measure from a list of points.
    pub fn from_points(points: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
        }
        Self::new(dim, points.concat(), weights)
    }

    /// Equal-mass measure on the given points.
    pub fn uniform(points: &[Vec<f64>]) -> Result<Self> {
        Self::from_points(points, vec![1.0; points.len()])
    }

    /// Unit point mass.
    pub fn dirac(point: &[f64]) -> Self {
        Self { dim: point.len(), locations: point.to_vec(), weights: vec![1.0] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flattened row-major atom coordinates.
    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.locations[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.locations.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Barycenter `sum_n w_n x_n`.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for (x, w) in self.atoms() {
            for (m, xi) in mean.iter_mut().zip(x) {
                *m += w * xi;
            }
        }
        mean
    }

    /// `M_2(mu) = sum_n w_n |x_n|^2`.
    pub fn second_moment(&self) -> f64 {
        self.atoms().map(|(x, w)| w * x.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    /// Second moment of the `axis`-th marginal, `sum_n w_n x_n[axis]^2`.
    pub fn marginal_second_moment(&self, axis: usize) -> Result<f64> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim });
        }
        Ok(self.atoms().map(|(x, w)| w * x[axis] * x[axis]).sum())
    }

    /// All marginal second moments, one per axis.
    pub fn marginal_second_moments(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self.atoms().map(|(x, w)| w * x[k] * x[k]).sum()).collect()
    }

    /// Image of the measure under an affine map; weights follow their atoms.
    pub fn pushforward(&self, map: &AffineMap) -> Result<Self> {
        if map.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: map.dim() });
        }
        let mut locations = Vec::with_capacity(self.locations.len());
        for x in self.locations.chunks_exact(self.dim) {
            locations.extend(map.apply(x));
        }
        Ok(Self { dim: self.dim, locations, weights: self.weights.clone() })
    }

    /// Pushforward by `x -> x + shift`.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        self.pushforward(&AffineMap::translation(shift))
    }

    /// Content digest over the exact bit patterns of locations and weights.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        hasher.update((self.len() as u64).to_le_bytes());
        for v in self.locations.iter().chain(&self.weights) {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = MeasureDoc {
            dim: self.dim,
            atoms: self
                .atoms()
                .map(|(x, w)| x.iter().copied().chain(std::iter::once(w)).collect())
                .collect(),
        };
        serde_json::to_string(&doc).expect("measure serialization cannot fail")
    }

    /// Parses `{"dim": m, "atoms": [[x..., w], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MeasureDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("measure JSON: {e}")))?;
        let mut locations = Vec::with_capacity(doc.atoms.len() * doc.dim);
        let mut weights = Vec::with_capacity(doc.atoms.len());
        for atom in &doc.atoms {
            if atom.len() != doc.dim + 1 {
                return Err(Error::DimensionMismatch { expected: doc.dim + 1, found: atom.len() });
            }
            locations.extend_from_slice(&atom[..doc.dim]);
            weights.push(atom[doc.dim]);
        }
        Self::new(doc.dim, locations, weights)
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureDoc {
    dim: usize,
    atoms: Vec<Vec<f64>>,
}

/// Nonnegative raster on a regular grid. Values are row-major, the last axis
/// varying fastest; axis `k` of the grid is coordinate `k` of the ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridImage {
    values: Vec<f64>,
    shape: Vec<usize>,
    origin: Vec<f64>,
    spacing: Vec<f64>,
}

impl GridImage {
    pub fn new(values: Vec<f64>, shape: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || origin.len() != shape.len() || spacing.len() != shape.len() {
            return Err(Error::InvalidImage(format!(
                "shape, origin and spacing must share a nonzero length (got {}, {}, {})",
                shape.len(),
                origin.len(),
                spacing.len()
            )));
        }
        let count: usize = shape.iter().product();
        if count != values.len() {
            return Err(Error::InvalidImage(format!(
                "shape {shape:?} holds {count} values, got {}",
                values.len()
            )));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidImage(format!("spacing {spacing:?} must be positive")));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidImage("pixel values must be finite and nonnegative".into()));
        }
        Ok(Self { values, shape, origin, spacing })
    }

    /// Unit-spaced image with origin at zero, as used for digit scans.
    pub fn unit_spaced(values: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let dim = shape.len();
        Self::new(values, shape, vec![0.0; dim], vec![1.0; dim])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Physical center of the pixel with flat index `flat`.
    pub fn pixel_center(&self, flat: usize) -> Vec<f64> {
        let mut center = vec![0.0; self.dim()];
        let mut rest = flat;
        for k in (0..self.dim()).rev() {
            let idx = rest % self.shape[k];
            rest /= self.shape[k];
            center[k] = self.origin[k] + (idx as f64 + 0.5) * self.spacing[k];
        }
        center
    }

    /// Accumulates the mass of `mu` into the cells of a grid. Atoms outside
    /// the grid are an error.
    pub fn bin_measure(mu: &DiscreteMeasure, shape: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>) -> Result<Self> {
        let dim = shape.len();
        if mu.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: mu.dim() });
        }
        let mut values = vec![0.0; shape.iter().product()];
        for (x, w) in mu.atoms() {
            let mut flat = 0usize;
            for k in 0..dim {
                let cell = ((x[k] - origin[k]) / spacing[k]).floor();
                if cell < 0.0 || cell >= shape[k] as f64 {
                    return Err(Error::InvalidImage(format!("atom {x:?} lies outside the grid")));
                }
                flat = flat * shape[k] + cell as usize;
            }
            values[flat] += w;
        }
        Self::new(values, shape, origin, spacing)
    }
}

/// Converts an image into the probability measure `P(g) = (1/|g|_1) sum g_n delta_{x_n}`
/// over its positive pixels, with atoms at pixel centers.
pub fn image_to_measure(img: &GridImage) -> Result<DiscreteMeasure> {
    let dim = img.dim();
    let positive = img.values.iter().filter(|v| **v > 0.0).count();
    if positive == 0 {
        return Err(Error::AllZeroImage { index: None });
    }
    let mut locations = Vec::with_capacity(positive * dim);
    let mut weights = Vec::with_capacity(positive);
    for (flat, v) in img.values.iter().enumerate() {
        if *v > 0.0 {
            locations.extend(img.pixel_center(flat));
            weights.push(*v);
        }
    }
    DiscreteMeasure::new(dim, locations, weights)
}

/// `x -> A x + b` on `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    // Row-major m x m.
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        let m = offset.len();
        if matrix.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, found: matrix.len() });
        }
        Ok(Self { matrix, offset })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn translation(shift: &[f64]) -> Self {
        let mut map = Self::identity(shift.len());
        map.offset = shift.to_vec();
        map
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let m = diag.len();
        let mut matrix = vec![0.0; m * m];
        for (k, d) in diag.iter().enumerate() {
            matrix[k * m + k] = *d;
        }
        Self { matrix, offset: vec![0.0; m] }
    }

    /// Counter-clockwise planar rotation about the origin.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { matrix: vec![c, -s, s, c], offset: vec![0.0, 0.0] }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|r| {
                let row = &self.matrix[r * m..(r + 1) * m];
                row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offset[r]
            })
            .collect()
    }
}
