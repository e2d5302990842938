use hsi_core::classify::{
    confusion_matrix, kmeans, knn_classify, lda_fit, lda_predict, overall_accuracy, split,
    ClassificationMetrics, DistanceMetric, LabelMap, SplitSpec,
};
use hsi_core::HsiError;
use hsi_testkit::{normal_matrix, rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

/// `per` points around each of `centers` (columns), labels `1..=C`.
fn blobs(centers: &DMatrix<f64>, per: usize, spread: f64, seed: u64) -> (DMatrix<f64>, Vec<u32>) {
    let (f, c) = centers.shape();
    let noise = normal_matrix(f, c * per, seed);
    let x = DMatrix::from_fn(f, c * per, |r, j| {
        centers[(r, j / per)] + spread * noise[(r, j)]
    });
    let y = (0..c * per).map(|j| (j / per) as u32 + 1).collect();
    (x, y)
}

fn centers() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]) * 4.0
}

/// Brute-force KNN with the documented tie rules, written independently.
fn knn_oracle(tx: &DMatrix<f64>, ty: &[u32], q: &DMatrix<f64>, k: usize) -> Vec<u32> {
    q.column_iter()
        .map(|col| {
            let mut d: Vec<(f64, usize)> = tx
                .column_iter()
                .enumerate()
                .map(|(i, t)| ((t - col).norm(), i))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut tally: Vec<(u32, usize, f64)> = Vec::new();
            for &(dist, i) in &d[..k] {
                match tally.iter_mut().find(|t| t.0 == ty[i]) {
                    Some(t) => {
                        t.1 += 1;
                        t.2 += dist;
                    }
                    None => tally.push((ty[i], 1, dist)),
                }
            }
            tally.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)));
            tally[0].0
        })
        .collect()
}

#[test]
fn knn_matches_brute_force_oracle() {
    let (tx, ty) = blobs(&centers(), 30, 1.5, 1);
    let (qx, _) = blobs(&centers(), 20, 1.5, 2);
    for k in [1, 2, 4, 7] {
        let got = knn_classify(&tx, &ty, &qx, k, DistanceMetric::Euclidean).unwrap();
        assert_eq!(got, knn_oracle(&tx, &ty, &qx, k), "k={k}");
    }
}

#[test]
fn knn_separates_well_spaced_blobs() {
    let (tx, ty) = blobs(&centers(), 20, 0.3, 3);
    let (qx, qy) = blobs(&centers(), 20, 0.3, 4);
    let pred = knn_classify(&tx, &ty, &qx, 5, DistanceMetric::Euclidean).unwrap();
    assert_eq!(overall_accuracy(&pred, &qy).unwrap(), 1.0);
}

#[test]
fn spectral_angle_knn_ignores_brightness() {
    let base = centers().add_scalar(1.0);
    let (tx, ty) = blobs(&base, 15, 0.2, 5);
    let (qx, _) = blobs(&base, 10, 0.2, 6);
    let a = knn_classify(&tx, &ty, &qx, 3, DistanceMetric::SpectralAngle).unwrap();
    let b = knn_classify(&tx, &ty, &(qx * 7.5), 3, DistanceMetric::SpectralAngle).unwrap();
    assert_eq!(a, b);
}

#[test]
fn knn_input_errors() {
    let (tx, ty) = blobs(&centers(), 2, 0.1, 7);
    let q = DMatrix::zeros(3, 1);
    assert!(matches!(
        knn_classify(&tx, &ty, &q, 7, DistanceMetric::Euclidean),
        Err(HsiError::KTooLarge { k: 7, available: 6 })
    ));
    assert!(matches!(
        knn_classify(&tx, &ty[..5], &q, 1, DistanceMetric::Euclidean),
        Err(HsiError::LengthMismatch { .. })
    ));
    assert!(matches!(
        knn_classify(&tx, &ty, &q, 1, DistanceMetric::SpectralAngle),
        Err(HsiError::ZeroVector)
    ));
}

#[test]
fn lda_matches_dense_discriminants() {
    let (tx, ty) = blobs(&centers(), 25, 1.2, 8);
    let (qx, _) = blobs(&centers(), 25, 1.2, 9);
    let model = lda_fit(&tx, &ty).unwrap();
    let pred = lda_predict(&model, &qx).unwrap();

    let (f, m, c) = (3, tx.ncols(), 3);
    let means: Vec<DVector<f64>> = (1..=c as u32)
        .map(|k| {
            let cols: Vec<_> = tx
                .column_iter()
                .zip(&ty)
                .filter(|(_, &y)| y == k)
                .map(|(v, _)| v.into_owned())
                .collect();
            cols.iter().fold(DVector::zeros(f), |a, v| a + v) / cols.len() as f64
        })
        .collect();
    let mut cov = DMatrix::zeros(f, f);
    for (col, &y) in tx.column_iter().zip(&ty) {
        let d = col - &means[y as usize - 1];
        cov += &d * d.transpose();
    }
    cov /= (m - c) as f64;
    let ridge = 1e-6 * cov.trace() / f as f64;
    cov += DMatrix::identity(f, f) * ridge;
    let inv = cov.try_inverse().unwrap();
    for (j, q) in qx.column_iter().enumerate() {
        let score = |k: usize| {
            let w = &inv * &means[k];
            q.dot(&w) - 0.5 * means[k].dot(&w) + (25.0 / 75.0f64).ln()
        };
        let best = (0..c)
            .max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)))
            .unwrap();
        assert_eq!(pred[j], best as u32 + 1);
        for k in 0..c {
            let lib = model.weights.column(k).dot(&q) + model.bias[k];
            assert!((lib - score(k)).abs() < 1e-9 * score(k).abs().max(1.0));
        }
    }
}

#[test]
fn lda_needs_two_classes() {
    let x = normal_matrix(2, 5, 1);
    assert!(matches!(
        lda_fit(&x, &[3; 5]),
        Err(HsiError::SingleClass(1))
    ));
}

#[test]
fn kmeans_recovers_blobs_and_descends() {
    let (x, y) = blobs(&centers(), 40, 0.3, 10);
    let res = kmeans(&x, 3, 100, 4).unwrap();
    assert!(res.converged);
    assert!(res.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    // every true blob maps to one cluster
    for c in 1..=3u32 {
        let ids: Vec<usize> = res
            .assignments
            .iter()
            .zip(&y)
            .filter(|(_, &t)| t == c)
            .map(|(&a, _)| a)
            .collect();
        assert!(ids.iter().all(|&a| a == ids[0]));
    }
    for (j, &a) in res.assignments.iter().enumerate() {
        let d = |k: usize| (x.column(j) - res.centroids.column(k)).norm_squared();
        assert!((0..3).all(|k| d(a) <= d(k) + 1e-12));
    }
    let again = kmeans(&x, 3, 100, 4).unwrap();
    assert_eq!(again.assignments, res.assignments);
}

#[test]
fn kmeans_limits() {
    let x = normal_matrix(2, 4, 2);
    assert!(matches!(
        kmeans(&x, 5, 10, 0),
        Err(HsiError::KTooLarge { k: 5, available: 4 })
    ));
    let res = kmeans(&x, 4, 10, 0).unwrap();
    assert!(res.inertia < 1e-20);
}

#[test]
fn stratified_split_covers_every_class() {
    let mut r = rng(3);
    let labels: Vec<u32> = (0..400).map(|_| r.random_range(0..5u32)).collect();
    let map = LabelMap::new(20, 20, labels.clone()).unwrap();
    let spec = SplitSpec {
        train_fraction: 0.1,
        seed: 7,
        stratified: true,
    };
    let (train, test) = split(&map, &spec).unwrap();
    assert_eq!(split(&map, &spec).unwrap(), (train.clone(), test.clone()));
    for c in 1..5u32 {
        let n = labels.iter().filter(|&&l| l == c).count();
        let t = train.iter().filter(|&&i| labels[i] == c).count();
        assert_eq!(t, ((0.1 * n as f64).round() as usize).clamp(1, n));
    }
    assert!(train.iter().chain(&test).all(|&i| labels[i] != 0));
    assert_eq!(
        train.len() + test.len(),
        labels.iter().filter(|&&l| l != 0).count()
    );
}

#[test]
fn metrics_ignore_unlabeled_pixels() {
    let truth = [0, 1, 1, 2, 2, 2];
    let pred = [2, 1, 2, 2, 2, 1];
    assert!((overall_accuracy(&pred, &truth).unwrap() - 0.6).abs() < 1e-15);
    let m = ClassificationMetrics::compute(&pred, &truth, 2).unwrap();
    assert_eq!(m.confusion, confusion_matrix(&pred, &truth, 2).unwrap());
    assert!((m.per_class[0] - 0.5).abs() < 1e-15);
    assert!((m.per_class[1] - 2.0 / 3.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn confusion_rows_count_truth(pairs in prop::collection::vec((0u32..4, 1u32..4), 1..60)) {
        let (pred, truth): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        let pred: Vec<u32> = pred.into_iter().map(|p| p.max(1)).collect();
        let cm = confusion_matrix(&pred, &truth, 3).unwrap();
        for (c, counts) in cm.iter().enumerate() {
            let row: u64 = counts.iter().sum();
            prop_assert_eq!(row as usize, truth.iter().filter(|&&t| t == c as u32 + 1).count());
        }
        let diag: u64 = (0..3).map(|c| cm[c][c]).sum();
        prop_assert!((overall_accuracy(&pred, &truth).unwrap() - diag as f64 / truth.len() as f64).abs() < 1e-12);
    }
}
