use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use wassmap_core::synth::translation_family;
use wassmap_core::{
    align_to_truth, classical_mds, double_center, knn_separation, points_matrix, procrustes, wassmap, DiscreteMeasure,
    SquaredDistanceMatrix,
};

fn config(max_n: usize, max_d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (1..=max_d).prop_flat_map(move |d| {
        (prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), d + 2..=max_n), Just(d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn double_center_matches_matrix_form((pts, _) in config(12, 3)) {
        let w = SquaredDistanceMatrix::euclidean(&pts).unwrap();
        let n = pts.len();
        let h = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
        let wm = DMatrix::from_fn(n, n, |i, j| w.get(i, j));
        let expected = -0.5 * &h * wm * &h;
        prop_assert!((double_center(&w) - expected).amax() <= 1e-9);
    }

    #[test]
    fn mds_preserves_euclidean_distances((pts, d) in config(30, 4)) {
        let w = SquaredDistanceMatrix::euclidean(&pts).unwrap();
        let e = classical_mds(&w, d).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let got = (e.points.row(i) - e.points.row(j)).norm_squared();
                prop_assert!((got - w.get(i, j)).abs() <= 1e-8 * w.get(i, j).max(1.0));
            }
        }
        prop_assert!(e.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
        prop_assert!(e.spectrum.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn procrustes_undoes_similarity((pts, d) in config(20, 3), angle in 0.0..6.28f64, s in 0.2..4.0f64) {
        let x = points_matrix(&pts).unwrap();
        let mut r = DMatrix::<f64>::identity(d, d);
        if d >= 2 {
            r[(0, 0)] = angle.cos();
            r[(0, 1)] = -angle.sin();
            r[(1, 0)] = angle.sin();
            r[(1, 1)] = angle.cos();
        }
        let mut y = &x * r.transpose() * s;
        for mut row in y.row_iter_mut() {
            row[0] += 1.5;
        }
        let fit = procrustes(&x, &y, true).unwrap();
        prop_assert!((fit.scale - s).abs() <= 1e-9 * s);
        prop_assert!(fit.rmse <= 1e-9);
        prop_assert!((fit.apply(&x) - &y).amax() <= 1e-8);
    }
}

#[test]
fn wassmap_recovers_translation_grid() {
    let base = DiscreteMeasure::from_points(&[vec![0.0, 0.0], vec![0.3, 0.1], vec![-0.1, 0.4]], vec![1.0, 2.0, 1.5]).unwrap();
    let thetas: Vec<Vec<f64>> = (0..3).flat_map(|a| (0..3).map(move |b| vec![a as f64, 0.5 * b as f64])).collect();
    let e = wassmap(&translation_family(&base, &thetas).unwrap(), 2).unwrap();
    let (_, err) = align_to_truth(&e.points, &points_matrix(&thetas).unwrap(), false).unwrap();
    assert!(err <= 1e-10, "{err}");
}

#[test]
fn reflections_are_allowed() {
    let x = points_matrix(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
    let mut y = x.clone();
    y.column_mut(0).neg_mut();
    let fit = procrustes(&x, &y, false).unwrap();
    assert_abs_diff_eq!(fit.rmse, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.rotation.determinant(), -1.0, epsilon = 1e-12);
}

#[test]
fn knn_separation_matches_brute_force() {
    let pts: Vec<Vec<f64>> = (0..40).map(|k| vec![(k as f64 * 1.7).sin() * 3.0, (k as f64 * 0.9).cos()]).collect();
    let labels: Vec<u8> = (0..40).map(|k| u8::from(pts[k][0] > 0.3)).collect();
    let mut correct = 0;
    for i in 0..pts.len() {
        let nearest = (0..pts.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| {
                let da = (pts[a][0] - pts[i][0]).powi(2) + (pts[a][1] - pts[i][1]).powi(2);
                let db = (pts[b][0] - pts[i][0]).powi(2) + (pts[b][1] - pts[i][1]).powi(2);
                da.total_cmp(&db)
            })
            .unwrap();
        correct += usize::from(labels[nearest] == labels[i]);
    }
    let acc = knn_separation(&points_matrix(&pts).unwrap(), &labels, 1).unwrap();
    assert_abs_diff_eq!(acc, correct as f64 / 40.0, epsilon = 1e-15);
}
