mod common;

use common::*;
use milp_isa::cluster::*;
use milp_isa::tensor::{squared_distance, Matrix};
use proptest::prelude::*;

#[test]
fn scans_find_four_blobs() {
    let (mut elbow_hits, mut sil_hits) = (0, 0);
    for seed in 0..10 {
        let (x, _) = blobs(&four_centres_2d(), 50, seed);
        if elbow_scan(&x, 1..=10, seed, ElbowMode::Independent)
            .unwrap()
            .suggested_k
            == 4
        {
            elbow_hits += 1;
        }
        let s = silhouette_scan(&x, 2..=10, seed).unwrap();
        assert!(s.curve.iter().all(|&(_, v)| (-1.0..=1.0).contains(&v)));
        if s.best_k == 4 {
            sil_hits += 1;
        }
    }
    assert!(
        elbow_hits >= 9 && sil_hits >= 9,
        "elbow {elbow_hits}, silhouette {sil_hits}"
    );
}

#[test]
fn nested_elbow_is_monotone() {
    for seed in 0..5 {
        let x = random_matrix(80, 3, seed);
        let scan = elbow_scan(&x, 1..=12, seed, ElbowMode::Nested).unwrap();
        for w in scan.curve.windows(2) {
            assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12), "{:?}", scan.curve);
        }
    }
}

#[test]
fn elbow_single_entry_at_n() {
    let x = Matrix::column(&[0.0, 1.0, 5.0]);
    let scan = elbow_scan(&x, 3..=3, 0, ElbowMode::Independent).unwrap();
    assert_eq!(scan.curve, vec![(3, 0.0)]);
    assert_eq!(scan.suggested_k, 3);
    assert!(matches!(
        elbow_scan(&x, 2..=4, 0, ElbowMode::Independent),
        Err(ClusterError::BadRange { .. })
    ));
    assert!(matches!(
        silhouette_scan(&x, 1..=2, 0),
        Err(ClusterError::BadRange { .. })
    ));
}

#[test]
fn two_blobs_prefer_two() {
    let (x, _) = blobs(&[vec![0.0, 0.0], vec![30.0, 0.0]], 40, 3);
    let s = silhouette_scan(&x, 2..=5, 3).unwrap();
    assert!(s.curve[0].1 > s.curve[3].1);
    assert_eq!(s.best_k, 2);
}

#[test]
fn coincident_clusters_score_at_most_zero() {
    let base = random_matrix(20, 2, 5);
    let mut rows: Vec<Vec<f64>> = base.row_iter().map(<[f64]>::to_vec).collect();
    rows.extend(base.row_iter().map(<[f64]>::to_vec));
    let x = Matrix::from_rows(&rows);
    let labels: Vec<usize> = (0..40).map(|i| i / 20).collect();
    assert!(silhouette_score(&x, &labels).unwrap() <= 0.0);
}

#[test]
fn silhouette_grows_with_separation() {
    let mut last = -1.0;
    for sep in [10.0, 100.0, 1000.0] {
        let (x, labels) = blobs(&[vec![0.0, 0.0], vec![sep, 0.0]], 20, 1);
        let s = silhouette_score(&x, &labels).unwrap();
        assert!(s > last);
        last = s;
    }
    assert!(last > 0.99);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kmeans_invariants(seed in 0u64..500, k in 1usize..8) {
        let x = random_matrix(40, 3, seed);
        let r = kmeans(&x, k, seed).unwrap();
        prop_assert!(r.labels.iter().all(|&l| l < k));
        let recomputed: f64 = x.row_iter().zip(&r.labels).map(|(p, &l)| squared_distance(p, r.centroids.row(l))).sum();
        prop_assert!((recomputed - r.wcss).abs() <= 1e-9 * r.wcss.max(1e-300));
        prop_assert_eq!(&r.labels, &kmeans(&x, k, seed).unwrap().labels);
        if let Some(s) = r.mean_silhouette {
            prop_assert!((-1.0..=1.0).contains(&s));
            // Relabelling by a cyclic shift leaves the score unchanged.
            let shifted: Vec<usize> = r.labels.iter().map(|&l| (l + 1) % k).collect();
            let s2 = silhouette_score(&x, &shifted).unwrap();
            prop_assert!((s - s2).abs() < 1e-12);
        }
    }
}

#[test]
fn combined_scan_matches_separate_scans() {
    let (x, _) = blobs(&four_centres_2d(), 30, 7);
    let cache = DistanceCache::new(&x);
    let both = scan_k(&x, &cache, 1..=8, 7, ElbowMode::Independent).unwrap();
    assert_eq!(both.elbow, elbow_scan(&x, 1..=8, 7, ElbowMode::Independent).unwrap());
    assert_eq!(both.silhouette.unwrap(), silhouette_scan(&x, 2..=8, 7).unwrap());
}
