//! Benchmark fixtures shared by the criterion benches.

use wassmap_core::synth::{Family, Frame, ManifoldSpec, Mode, ShapeSpec};
use wassmap_core::DiscreteMeasure;

/// Two rasterized disks of `resolution^2` cells, shifted against each other.
pub fn shifted_disks(resolution: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let spec = ManifoldSpec {
        base: ShapeSpec::Disk { center: [0.0, 0.0], radius: 0.8 },
        family: Family::Translation(vec![vec![0.0, 0.0], vec![0.3, -0.2]]),
        mode: Mode::Pushforward,
        resolution: [resolution, resolution],
        frame: Frame::square(1.0),
    };
    let mut m = spec.generate().expect("valid fixture").measures.into_iter();
    (m.next().unwrap(), m.next().unwrap())
}

/// Dilated ellipses on a `k x k` parameter grid.
pub fn dilation_family(resolution: usize, k: usize) -> Vec<DiscreteMeasure> {
    let grid = wassmap_core::synth::uniform_grid(&[(0.5, 1.5), (0.5, 1.5)], &[k, k]);
    let spec = ManifoldSpec {
        base: ShapeSpec::Ellipse { center: [0.0, 0.0], radii: [0.5, 0.3] },
        family: Family::Dilation(grid),
        mode: Mode::Pushforward,
        resolution: [resolution, resolution],
        frame: Frame::square(1.0),
    };
    spec.generate().expect("valid fixture").measures
}
