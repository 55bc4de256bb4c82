use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;
use wassmap_core::synth::{bin_on_common_grid, dilation_family, rotation_family, translation_family};
use wassmap_core::{
    image_to_measure, load_idx, subsample, to_measures, write_idx, DiscreteMeasure, Family, Frame, GridImage,
    LabeledImageSet, ManifoldSpec, Mode, ShapeSpec,
};

fn fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mnist-subset"))
}

fn load_fixture() -> LabeledImageSet {
    let d = fixture_dir();
    load_idx(d.join("images-idx3-ubyte"), d.join("labels-idx1-ubyte")).unwrap()
}

#[test]
fn bundled_subset_has_200_per_digit() {
    let set = load_fixture();
    assert_eq!(set.len(), 2000);
    assert_eq!(set.images[0].shape(), &[28, 28]);
    assert!(set.class_counts().values().all(|&c| c == 200));
    assert!(set.images.iter().all(|img| img.values().iter().any(|&v| v > 0.0)));
}

#[test]
fn idx_files_round_trip() {
    let set = subsample(&load_fixture(), &BTreeMap::from([(3, 5), (7, 4)]), 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
    write_idx(&set, &ip, &lp).unwrap();
    let back = load_idx(&ip, &lp).unwrap();
    assert_eq!(back.images, set.images);
    assert_eq!(back.labels, set.labels);
}

#[test]
fn subsampling_is_seeded() {
    let set = load_fixture();
    let per_class = BTreeMap::from([(0, 10), (1, 10)]);
    let a = subsample(&set, &per_class, 0).unwrap();
    let b = subsample(&set, &per_class, 0).unwrap();
    let c = subsample(&set, &per_class, 1).unwrap();
    assert_eq!(a.source_indices, b.source_indices);
    assert_ne!(a.source_indices, c.source_indices);
    assert_eq!(a.labels, [vec![0; 10], vec![1; 10]].concat());
    for (k, &i) in a.source_indices.iter().enumerate() {
        assert_eq!(a.images[k], set.images[i]);
    }
}

#[test]
fn digit_measures_carry_pixel_mass() {
    let set = subsample(&load_fixture(), &BTreeMap::from([(8, 3)]), 2).unwrap();
    let mus = to_measures(&set).unwrap();
    for (img, mu) in set.images.iter().zip(&mus) {
        let total: f64 = img.values().iter().sum();
        assert_eq!(mu.len(), img.values().iter().filter(|&&v| v > 0.0).count());
        for (x, w) in mu.atoms() {
            let (r, c) = ((x[0] - 0.5) as usize, (x[1] - 0.5) as usize);
            assert!((w - img.values()[r * 28 + c] / total).abs() < 1e-15);
        }
    }
}

fn base() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::array::uniform2(-2.0..2.0f64), 0.1..1.0f64), 1..20).prop_map(|atoms| {
        let pts: Vec<Vec<f64>> = atoms.iter().map(|(x, _)| x.to_vec()).collect();
        DiscreteMeasure::from_points(&pts, atoms.iter().map(|a| a.1).collect()).unwrap()
    })
}

fn raw_moment(mu: &DiscreteMeasure, axis: usize) -> f64 {
    mu.atoms().map(|(x, w)| w * x[axis] * x[axis]).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_shifts_the_mean(mu in base(), t in prop::array::uniform2(-3.0..3.0f64)) {
        let moved = &translation_family(&mu, &[t.to_vec()]).unwrap()[0];
        let (m0, m1) = (mu.mean(), moved.mean());
        for k in 0..2 {
            prop_assert!((m1[k] - m0[k] - t[k]).abs() <= 1e-12);
        }
        prop_assert_eq!(moved.weights(), mu.weights());
    }

    #[test]
    fn dilation_scales_marginal_moments(mu in base(), t in prop::array::uniform2(0.2..3.0f64)) {
        let moved = &dilation_family(&mu, &[t.to_vec()]).unwrap()[0];
        for k in 0..2 {
            let expected = t[k] * t[k] * raw_moment(&mu, k);
            prop_assert!((raw_moment(moved, k) - expected).abs() <= 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn rotation_preserves_second_moment(mu in base(), a in 0.0..6.3f64) {
        let moved = &rotation_family(&mu, &[a]).unwrap()[0];
        let total = |m: &DiscreteMeasure| raw_moment(m, 0) + raw_moment(m, 1);
        prop_assert!((total(moved) - total(&mu)).abs() <= 1e-12 * total(&mu).max(1.0));
    }
}

#[test]
fn raster_and_pushforward_agree_on_cell_shifts() {
    // A shift by whole cells moves a raster without resampling error.
    let shape = ShapeSpec::Disk { center: [0.0, 0.0], radius: 0.7 };
    let frame = Frame::square(2.0);
    let spacing = frame.spacing([20, 20]);
    let thetas = vec![vec![0.0, 0.0], vec![3.0 * spacing[0], -2.0 * spacing[1]]];
    let gen = |mode| {
        ManifoldSpec { base: shape.clone(), family: Family::Translation(thetas.clone()), mode, resolution: [20, 20], frame }
            .generate()
            .unwrap()
            .measures
    };
    let (push, raster) = (gen(Mode::Pushforward), gen(Mode::Raster));
    for (a, b) in push.iter().zip(&raster) {
        assert_eq!(a.len(), b.len());
        let sort = |m: &DiscreteMeasure| {
            let mut v: Vec<Vec<f64>> = m.atoms().map(|(x, w)| vec![x[0], x[1], w]).collect();
            v.sort_by(|p, q| p.partial_cmp(q).unwrap());
            v
        };
        for (p, q) in sort(a).iter().zip(&sort(b)) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-9, "{p:?} vs {q:?}");
            }
        }
    }
}

#[test]
fn binning_conserves_mass_and_recovers_indicator() {
    let img = GridImage::new(vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0], vec![2, 3], vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
    let mu = image_to_measure(&img).unwrap();
    let binned = bin_on_common_grid(&[mu.clone()], &[0.0, 0.0], &[0.5, 0.5]).unwrap();
    let total: f64 = binned[0].values().iter().sum();
    assert!((total - mu.len() as f64).abs() < 1e-12);
    assert!(binned[0].values().iter().all(|&v| v == 0.0 || (v - 1.0).abs() < 1e-12));
}
