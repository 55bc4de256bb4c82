//! Synthetic image manifolds: base shapes and the translation, dilation,
//! rotation and grid-deformation families built from them.
//!
//! Families come in two flavours. In pushforward mode the base shape is
//! rasterized once and its atoms are moved by the exact affine map, so the
//! family is an exact discrete manifold. In raster mode every member is drawn
//! on a fixed grid by testing pixel centers against the transformed shape.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::measure::{image_to_measure, AffineMap, DiscreteMeasure, GridImage};

/// Planar base shapes. All radii are semi-axes along the coordinate axes.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Disk { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], radii: [f64; 2] },
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
    /// Elliptic annulus: inside `outer`, outside `inner`.
    Annulus { center: [f64; 2], outer: [f64; 2], inner: [f64; 2] },
}

impl ShapeSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: &[f64]| v.iter().all(|r| r.is_finite() && *r > 0.0);
        match self {
            ShapeSpec::Disk { radius, .. } if !positive(&[*radius]) => {
                Err(Error::InvalidShape(format!("disk radius {radius} must be positive")))
            }
            ShapeSpec::Ellipse { radii, .. } if !positive(radii) => {
                Err(Error::InvalidShape(format!("ellipse radii {radii:?} must be positive")))
            }
            ShapeSpec::Rectangle { lo, hi } if !(lo[0] < hi[0] && lo[1] < hi[1]) => {
                Err(Error::InvalidShape(format!("rectangle corners {lo:?}, {hi:?} are not ordered")))
            }
            ShapeSpec::Annulus { outer, inner, .. } => {
                if !positive(outer) || !positive(inner) {
                    Err(Error::InvalidShape("annulus radii must be positive".into()))
                } else if !(inner[0] < outer[0] && inner[1] < outer[1]) {
                    Err(Error::InvalidShape("annulus inner radii must lie strictly inside the outer radii".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let inside = |c: [f64; 2], r: [f64; 2]| {
            let (u, v) = ((x[0] - c[0]) / r[0], (x[1] - c[1]) / r[1]);
            u * u + v * v <= 1.0
        };
        match *self {
            ShapeSpec::Disk { center, radius } => inside(center, [radius, radius]),
            ShapeSpec::Ellipse { center, radii } => inside(center, radii),
            ShapeSpec::Rectangle { lo, hi } => x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1],
            ShapeSpec::Annulus { center, outer, inner } => inside(center, outer) && !inside(center, inner),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let around = |c: [f64; 2], r: [f64; 2]| ([c[0] - r[0], c[1] - r[1]], [c[0] + r[0], c[1] + r[1]]);
        match *self {
            ShapeSpec::Disk { center, radius } => around(center, [radius, radius]),
            ShapeSpec::Ellipse { center, radii } => around(center, radii),
            ShapeSpec::Rectangle { lo, hi } => (lo, hi),
            ShapeSpec::Annulus { center, outer, .. } => around(center, outer),
        }
    }
}

/// Rectangular region of the plane covered by a raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Frame {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::InvalidShape(format!("frame corners {lo:?}, {hi:?} are not ordered")));
        }
        Ok(Self { lo, hi })
    }

    pub fn square(half_width: f64) -> Self {
        Self { lo: [-half_width; 2], hi: [half_width; 2] }
    }

    pub fn spacing(&self, resolution: [usize; 2]) -> [f64; 2] {
        [(self.hi[0] - self.lo[0]) / resolution[0] as f64, (self.hi[1] - self.lo[1]) / resolution[1] as f64]
    }

    fn contains_box(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        lo[0] >= self.lo[0] && lo[1] >= self.lo[1] && hi[0] <= self.hi[0] && hi[1] <= self.hi[1]
    }
}

/// Indicator raster of `{x : inside(x)}`, tested at pixel centers.
pub fn rasterize(inside: impl Fn([f64; 2]) -> bool, resolution: [usize; 2], frame: Frame) -> Result<GridImage> {
    if resolution[0] == 0 || resolution[1] == 0 {
        return Err(Error::InvalidImage("resolution must be positive".into()));
    }
    let spacing = frame.spacing(resolution);
    let mut values = Vec::with_capacity(resolution[0] * resolution[1]);
    for a in 0..resolution[0] {
        let x = frame.lo[0] + (a as f64 + 0.5) * spacing[0];
        for b in 0..resolution[1] {
            let y = frame.lo[1] + (b as f64 + 0.5) * spacing[1];
            values.push(if inside([x, y]) { 1.0 } else { 0.0 });
        }
    }
    GridImage::new(values, resolution.to_vec(), frame.lo.to_vec(), spacing.to_vec())
}

fn measure_from_raster(img: &GridImage) -> Result<DiscreteMeasure> {
    match image_to_measure(img) {
        Err(Error::AllZeroImage { .. }) => Err(Error::EmptyShape),
        other => other,
    }
}

/// Uniform measure on the raster cells of `frame` whose centers lie in `shape`.
pub fn base_measure(shape: &ShapeSpec, resolution: [usize; 2], frame: Frame) -> Result<DiscreteMeasure> {
    Ok(base_raster(shape, resolution, frame)?.1)
}

fn base_raster(shape: &ShapeSpec, resolution: [usize; 2], frame: Frame) -> Result<(GridImage, DiscreteMeasure)> {
    shape.validate()?;
    let (lo, hi) = shape.bounds();
    if !frame.contains_box(lo, hi) {
        return Err(Error::InvalidShape(format!("frame {frame:?} does not contain the shape {shape:?}")));
    }
    let img = rasterize(|x| shape.contains(x), resolution, frame)?;
    let mu = measure_from_raster(&img)?;
    Ok((img, mu))
}

/// `{mu_0(. - theta)}`: the base measure shifted by each parameter.
pub fn translation_family(base: &DiscreteMeasure, thetas: &[Vec<f64>]) -> Result<Vec<DiscreteMeasure>> {
    thetas.iter().map(|t| base.translate(t)).collect()
}

fn check_dilations(thetas: &[Vec<f64>]) -> Result<()> {
    match thetas.iter().position(|t| t.iter().any(|v| !(v.is_finite() && *v > 0.0))) {
        Some(index) => Err(Error::NonPositiveDilation { index }),
        None => Ok(()),
    }
}

/// `{det(D_theta) mu_0(D_theta .)}` with `D_theta = diag(1/theta_k)`, realized
/// exactly as the pushforward `x -> (theta_1 x_1, ..., theta_m x_m)`.
pub fn dilation_family(base: &DiscreteMeasure, thetas: &[Vec<f64>]) -> Result<Vec<DiscreteMeasure>> {
    check_dilations(thetas)?;
    thetas.iter().map(|t| base.pushforward(&AffineMap::diagonal(t))).collect()
}

/// `{mu_0(R_theta .)}` realized as pushforwards by the rotations `R_theta`
/// about the origin.
pub fn rotation_family(base: &DiscreteMeasure, angles: &[f64]) -> Result<Vec<DiscreteMeasure>> {
    angles.iter().map(|a| base.pushforward(&AffineMap::rotation(*a))).collect()
}

/// Local rotation angle `theta_1 cos(x_1 + theta_2 x_2) cos(x_2)`.
pub fn deformation_angle(theta: [f64; 2], x: [f64; 2]) -> f64 {
    theta[0] * (x[0] + theta[1] * x[1]).cos() * x[1].cos()
}

/// `T_theta(x)`: rotation of `x` by its own local angle.
pub fn deform(theta: [f64; 2], x: [f64; 2]) -> [f64; 2] {
    let (s, c) = deformation_angle(theta, x).sin_cos();
    [c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

/// Raster of `f_theta(x) = f_0(T_theta(x))`, evaluated at pixel centers.
pub fn deformation_image(base_shape: &ShapeSpec, theta: [f64; 2], resolution: [usize; 2], frame: Frame) -> Result<GridImage> {
    rasterize(|x| base_shape.contains(deform(theta, x)), resolution, frame)
}

/// Grid-deformation family of an (annulus) base shape on a fixed frame.
pub fn grid_deformation_family(
    base_shape: &ShapeSpec,
    params: &[[f64; 2]],
    resolution: [usize; 2],
    frame: Frame,
) -> Result<Vec<DiscreteMeasure>> {
    base_shape.validate()?;
    params
        .iter()
        .map(|p| measure_from_raster(&deformation_image(base_shape, *p, resolution, frame)?))
        .collect()
}

/// Inclusive uniform grid over a box; the first axis varies slowest. An axis
/// with a single sample uses its lower end.
pub fn uniform_grid(ranges: &[(f64, f64)], counts: &[usize]) -> Vec<Vec<f64>> {
    let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
        if n <= 1 {
            return vec![lo; n];
        }
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    };
    let mut points = vec![Vec::new()];
    for (&range, &n) in ranges.iter().zip(counts) {
        let values = axis(range, n);
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    points
}

/// `n` equally spaced angles `2 pi k / n` in `[0, 2 pi)`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Whether members are moved atoms of one raster or individually rasterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pushforward,
    Raster,
}

/// Transformation family with its parameter samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Translation(Vec<Vec<f64>>),
    Dilation(Vec<Vec<f64>>),
    Rotation(Vec<f64>),
    GridDeformation(Vec<[f64; 2]>),
}

impl Family {
    pub fn len(&self) -> usize {
        match self {
            Family::Translation(t) | Family::Dilation(t) => t.len(),
            Family::Rotation(a) => a.len(),
            Family::GridDeformation(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameters as points, one row per member. Rotation angles are mapped
    /// to `(cos, sin)` on the unit circle.
    pub fn parameters(&self) -> Vec<Vec<f64>> {
        match self {
            Family::Translation(t) | Family::Dilation(t) => t.clone(),
            Family::Rotation(a) => a.iter().map(|a| vec![a.cos(), a.sin()]).collect(),
            Family::GridDeformation(p) => p.iter().map(|p| p.to_vec()).collect(),
        }
    }
}

/// Declarative description of a sampled image manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    pub base: ShapeSpec,
    pub family: Family,
    pub mode: Mode,
    pub resolution: [usize; 2],
    pub frame: Frame,
}

/// Members of a generated family. `images` holds the raster of each member
/// (binned onto a common grid in pushforward mode), for pixel-space baselines.
#[derive(Debug, Clone)]
pub struct GeneratedFamily {
    pub measures: Vec<DiscreteMeasure>,
    pub images: Vec<GridImage>,
    pub parameters: Vec<Vec<f64>>,
}

impl ManifoldSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.family.is_empty() {
            return Err(Error::InvalidShape("parameter list is empty".into()));
        }
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(Error::InvalidImage("resolution must be positive".into()));
        }
        match &self.family {
            Family::Translation(t) => {
                if let Some(bad) = t.iter().find(|t| t.len() != 2) {
                    return Err(Error::DimensionMismatch { expected: 2, found: bad.len() });
                }
            }
            Family::Dilation(t) => {
                if let Some(bad) = t.iter().find(|t| t.len() != 2) {
                    return Err(Error::DimensionMismatch { expected: 2, found: bad.len() });
                }
                check_dilations(t)?;
            }
            Family::Rotation(angles) => {
                if let Some(a) = angles.iter().find(|a| !(**a >= 0.0 && **a < TAU)) {
                    return Err(Error::InvalidShape(format!("rotation angle {a} outside [0, 2pi)")));
                }
            }
            Family::GridDeformation(_) => {}
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<GeneratedFamily> {
        self.validate()?;
        let parameters = self.family.parameters();
        if let Family::GridDeformation(params) = &self.family {
            let images = params
                .iter()
                .map(|p| deformation_image(&self.base, *p, self.resolution, self.frame))
                .collect::<Result<Vec<_>>>()?;
            let measures = images.iter().map(measure_from_raster).collect::<Result<Vec<_>>>()?;
            return Ok(GeneratedFamily { measures, images, parameters });
        }

        match self.mode {
            Mode::Pushforward => {
                let (img, base) = base_raster(&self.base, self.resolution, self.frame)?;
                let measures = match &self.family {
                    Family::Translation(t) => translation_family(&base, t)?,
                    Family::Dilation(t) => dilation_family(&base, t)?,
                    Family::Rotation(a) => rotation_family(&base, a)?,
                    Family::GridDeformation(_) => unreachable!(),
                };
                let images = bin_on_common_grid(&measures, img.origin(), img.spacing())?;
                Ok(GeneratedFamily { measures, images, parameters })
            }
            Mode::Raster => {
                self.base.validate()?;
                let images = match &self.family {
                    Family::Translation(t) => t
                        .iter()
                        .map(|t| {
                            let shifted = |x: [f64; 2]| self.base.contains([x[0] - t[0], x[1] - t[1]]);
                            self.raster_checked(shifted, |p| [p[0] + t[0], p[1] + t[1]])
                        })
                        .collect::<Result<Vec<_>>>()?,
                    Family::Dilation(t) => t
                        .iter()
                        .map(|t| {
                            let scaled = |x: [f64; 2]| self.base.contains([x[0] / t[0], x[1] / t[1]]);
                            self.raster_checked(scaled, |p| [p[0] * t[0], p[1] * t[1]])
                        })
                        .collect::<Result<Vec<_>>>()?,
                    Family::Rotation(angles) => angles
                        .iter()
                        .map(|a| {
                            let (s, c) = a.sin_cos();
                            // R_theta^{-1} x: the member is mu_0 rotated by theta.
                            let rotated = |x: [f64; 2]| self.base.contains([c * x[0] + s * x[1], -s * x[0] + c * x[1]]);
                            self.raster_checked(rotated, |p| [c * p[0] - s * p[1], s * p[0] + c * p[1]])
                        })
                        .collect::<Result<Vec<_>>>()?,
                    Family::GridDeformation(_) => unreachable!(),
                };
                let measures = images.iter().map(measure_from_raster).collect::<Result<Vec<_>>>()?;
                Ok(GeneratedFamily { measures, images, parameters })
            }
        }
    }

    /// Rasterizes a transformed shape after checking that the image of the
    /// base bounding box under `forward` stays inside the frame.
    fn raster_checked(&self, inside: impl Fn([f64; 2]) -> bool, forward: impl Fn([f64; 2]) -> [f64; 2]) -> Result<GridImage> {
        let (lo, hi) = self.base.bounds();
        let corners = [lo, [lo[0], hi[1]], [hi[0], lo[1]], hi].map(forward);
        let blo = [corners.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min), corners.iter().map(|c| c[1]).fold(f64::INFINITY, f64::min)];
        let bhi = [corners.iter().map(|c| c[0]).fold(f64::NEG_INFINITY, f64::max), corners.iter().map(|c| c[1]).fold(f64::NEG_INFINITY, f64::max)];
        if !self.frame.contains_box(blo, bhi) {
            return Err(Error::InvalidShape(format!(
                "transformed shape spans {blo:?}..{bhi:?}, outside frame {:?}",
                self.frame
            )));
        }
        rasterize(inside, self.resolution, self.frame)
    }
}

/// Bins every measure onto one grid with the given spacing, aligned with
/// `origin` and large enough to hold all atoms. Pixel values are the binned
/// mass times the atom count, so a uniform measure bins to an indicator.
pub fn bin_on_common_grid(measures: &[DiscreteMeasure], origin: &[f64], spacing: &[f64]) -> Result<Vec<GridImage>> {
    let dim = origin.len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for mu in measures {
        if mu.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: mu.dim() });
        }
        for (x, _) in mu.atoms() {
            for k in 0..dim {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
    }
    let grid_origin: Vec<f64> =
        (0..dim).map(|k| origin[k] + ((lo[k] - origin[k]) / spacing[k]).floor() * spacing[k]).collect();
    // One spare cell on the high side absorbs rounding at cell boundaries.
    let shape: Vec<usize> = (0..dim).map(|k| ((hi[k] - grid_origin[k]) / spacing[k]).floor() as usize + 2).collect();
    measures
        .iter()
        .map(|mu| {
            let binned = GridImage::bin_measure(mu, shape.clone(), grid_origin.clone(), spacing.to_vec())?;
            let scale = mu.len() as f64;
            GridImage::new(
                binned.values().iter().map(|v| v * scale).collect(),
                shape.clone(),
                grid_origin.clone(),
                spacing.to_vec(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_shape_is_a_dirac() {
        let shape = ShapeSpec::Rectangle { lo: [0.1, 0.1], hi: [0.2, 0.2] };
        let mu = base_measure(&shape, [4, 4], Frame::new([0.0, 0.0], [1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.weights(), &[1.0]);
        assert_eq!(mu.location(0), &[0.125, 0.125]);
    }

    #[test]
    fn empty_and_invalid_shapes() {
        let tiny = ShapeSpec::Disk { center: [0.2, 0.3], radius: 0.01 };
        assert!(matches!(base_measure(&tiny, [2, 2], Frame::square(1.0)), Err(Error::EmptyShape)));
        let outside = ShapeSpec::Disk { center: [5.0, 0.0], radius: 1.0 };
        assert!(matches!(base_measure(&outside, [8, 8], Frame::square(1.5)), Err(Error::InvalidShape(_))));
        let bad = ShapeSpec::Annulus { center: [0.0, 0.0], outer: [1.0, 0.5], inner: [0.5, 0.6] };
        assert!(bad.validate().is_err());
        assert!(ShapeSpec::Rectangle { lo: [1.0, 0.0], hi: [0.0, 1.0] }.validate().is_err());
    }

    #[test]
    fn unit_disk_marginal_moments() {
        let mu = base_measure(&ShapeSpec::Disk { center: [0.0, 0.0], radius: 1.0 }, [256, 256], Frame::square(1.5))
            .unwrap();
        for m in mu.marginal_second_moments() {
            assert!((m - 0.25).abs() / 0.25 < 1e-2, "{m}");
        }
    }

    #[test]
    fn rectangle_marginal_moments() {
        let shape = ShapeSpec::Rectangle { lo: [1.0, -1.0], hi: [2.0, 3.0] };
        let mu = base_measure(&shape, [128, 512], Frame::new([1.0, -1.0], [2.0, 3.0]).unwrap()).unwrap();
        for m in mu.marginal_second_moments() {
            assert!((m - 7.0 / 3.0).abs() / (7.0 / 3.0) < 1e-2, "{m}");
        }
    }

    #[test]
    fn trivial_parameters_leave_the_base_unchanged() {
        let mu = base_measure(&ShapeSpec::Ellipse { center: [0.3, 0.0], radii: [1.0, 0.5] }, [16, 16], Frame::square(1.5))
            .unwrap();
        assert_eq!(translation_family(&mu, &[vec![0.0, 0.0]]).unwrap()[0], mu);
        assert_eq!(dilation_family(&mu, &[vec![1.0, 1.0]]).unwrap()[0], mu);
        assert_eq!(rotation_family(&mu, &[0.0]).unwrap()[0], mu);
        assert!(matches!(
            dilation_family(&mu, &[vec![1.0, 1.0], vec![0.0, 2.0]]),
            Err(Error::NonPositiveDilation { index: 1 })
        ));
    }

    #[test]
    fn zero_amplitude_deformation_is_identity() {
        let annulus = ShapeSpec::Annulus { center: [0.0, 0.0], outer: [1.0, 0.6], inner: [0.6, 0.3] };
        let frame = Frame::square(2.0);
        let base = rasterize(|x| annulus.contains(x), [32, 32], frame).unwrap();
        for theta2 in [0.1, 0.5, 1.0] {
            assert_eq!(deformation_image(&annulus, [0.0, theta2], [32, 32], frame).unwrap(), base);
        }
    }

    #[test]
    fn grids_include_endpoints() {
        let g = uniform_grid(&[(-1.0, 1.0), (0.0, 3.0)], &[3, 2]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![-1.0, 0.0]);
        assert_eq!(g[1], vec![-1.0, 3.0]);
        assert_eq!(g[5], vec![1.0, 3.0]);
        let a = uniform_angles(4);
        assert_eq!(a[0], 0.0);
        assert!((a[3] - 1.5 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        let spec = ManifoldSpec {
            base: ShapeSpec::Disk { center: [0.0, 0.0], radius: 1.0 },
            family: Family::Dilation(vec![vec![1.0, 1.0], vec![-1.0, 1.0]]),
            mode: Mode::Pushforward,
            resolution: [8, 8],
            frame: Frame::square(1.5),
        };
        assert!(matches!(spec.validate(), Err(Error::NonPositiveDilation { index: 1 })));
        let spec = ManifoldSpec { family: Family::Rotation(vec![TAU]), ..spec };
        assert!(spec.validate().is_err());
        let spec = ManifoldSpec { family: Family::Rotation(vec![]), ..spec };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn raster_and_pushforward_families_agree_on_translations_by_whole_cells() {
        let spec = ManifoldSpec {
            base: ShapeSpec::Disk { center: [0.0, 0.0], radius: 0.5 },
            family: Family::Translation(vec![vec![0.0, 0.0], vec![0.25, -0.5]]),
            mode: Mode::Raster,
            resolution: [16, 16],
            frame: Frame::square(1.0),
        };
        let raster = spec.generate().unwrap();
        let push = ManifoldSpec { mode: Mode::Pushforward, ..spec }.generate().unwrap();
        for (a, b) in raster.measures.iter().zip(&push.measures) {
            assert_eq!(a.len(), b.len());
            for (x, y) in a.locations().iter().zip(b.locations()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert_eq!(push.images.len(), 2);
        assert_eq!(push.images[0].shape(), push.images[1].shape());
    }
}
