mod common;

use common::*;
use milp_isa::cluster::{adjusted_rand_index, kmeans};
use milp_isa::reduce::*;
use milp_isa::tensor::{squared_distance, Matrix};
use proptest::prelude::*;

#[test]
fn pca_matches_jacobi_oracle() {
    for seed in 0..50 {
        let x = random_matrix(100, 10, seed);
        let p = pca2(&x).unwrap();
        let (coords, ratios) = oracle_pca(&x);
        let scale = coords.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(p.coords.max_abs_diff(&coords) / scale < 1e-8, "seed {seed}");
        let (r1, r2) = p.explained_variance_ratio.unwrap();
        assert!((r1 - ratios.0).abs() < 1e-8 && (r2 - ratios.1).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pca_is_permutation_invariant(seed in 0u64..1000, rot in 1usize..29) {
        let x = random_matrix(30, 5, seed);
        let perm: Vec<usize> = (0..30).map(|i| (i * 7 + rot) % 30).collect();
        let a = pca2(&x).unwrap();
        let b = pca2(&x.select_rows(&perm)).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert_eq!(a.coords.row(i), b.coords.row(k));
        }
    }
}

fn ari_of(proj: &Projection2D, truth: &[usize]) -> f64 {
    let labels = kmeans(&proj.coords, 3, 0).unwrap().labels;
    adjusted_rand_index(&labels, truth)
}

#[test]
fn tsne_recovers_three_blobs() {
    let mut good = 0;
    for seed in 0..5 {
        let (x, truth) = blobs(&three_centres_10d(), 100, 100 + seed);
        let (p, trace) = tsne2_traced(
            &x,
            &TsneConfig {
                seed,
                ..TsneConfig::default()
            },
        )
        .unwrap();
        assert!(trace.iter().all(|t| t.kl >= 0.0));
        assert!(p.coords.is_finite());
        if ari_of(&p, &truth) >= 0.9 {
            good += 1;
        }
    }
    assert!(good >= 4, "{good}/5");
}

#[test]
fn umap_recovers_three_blobs() {
    let mut good = 0;
    for seed in 0..5 {
        let (x, truth) = blobs(&three_centres_10d(), 100, 200 + seed);
        let p = umap2(
            &x,
            &UmapConfig {
                seed,
                ..UmapConfig::default()
            },
        )
        .unwrap();
        if ari_of(&p, &truth) >= 0.9 {
            good += 1;
        }
    }
    assert!(good >= 4, "{good}/5");
}

fn median_pairwise(m: &Matrix) -> f64 {
    let mut d = Vec::new();
    for i in 0..m.rows() {
        for j in i + 1..m.rows() {
            d.push(squared_distance(m.row(i), m.row(j)));
        }
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

#[test]
fn duplicated_points_land_together() {
    let base = random_matrix(60, 6, 3);
    let mut rows: Vec<Vec<f64>> = base.row_iter().map(<[f64]>::to_vec).collect();
    rows.extend(base.row_iter().map(<[f64]>::to_vec));
    let x = Matrix::from_rows(&rows);
    // n/12 step size; the default 200 oscillates duplicate pairs apart at this n.
    let tsne = tsne2(
        &x,
        &TsneConfig {
            perplexity: 10.0,
            learning_rate: 10.0,
            ..TsneConfig::default()
        },
    )
    .unwrap();
    let umap = umap2(&x, &UmapConfig::default()).unwrap();
    for p in [tsne, umap] {
        let med = median_pairwise(&p.coords);
        for i in 0..60 {
            let d = squared_distance(p.coords.row(i), p.coords.row(i + 60));
            assert!(d < med, "{:?} point {i}: {d} vs median {med}", p.method);
        }
    }
}

#[test]
fn projections_are_seed_deterministic() {
    let (x, _) = blobs(&three_centres_10d(), 40, 1);
    let a = tsne2(&x, &TsneConfig::default()).unwrap();
    let b = tsne2(&x, &TsneConfig::default()).unwrap();
    assert_eq!(a.coords, b.coords);
    let a = umap2(&x, &UmapConfig::default()).unwrap();
    let b = umap2(&x, &UmapConfig::default()).unwrap();
    assert_eq!(a.coords, b.coords);
}

#[test]
fn umap_membership_graph_is_a_valid_fuzzy_set() {
    let x = random_matrix(80, 4, 9);
    let g = symmetrize(&directed_memberships(&knn(&x, 15)));
    assert!(g.iter().all(|&(i, j, w)| i < j && (0.0..=1.0).contains(&w)));
    // Every point's nearest neighbour is connected at full strength.
    let nn = knn(&x, 15);
    for (i, row) in nn.iter().enumerate() {
        let j = row[0].0;
        let key = (i.min(j), i.max(j));
        let w = g.iter().find(|e| (e.0, e.1) == key).unwrap().2;
        assert_eq!(w, 1.0);
    }
}

#[test]
fn invalid_configs_error() {
    let x = random_matrix(20, 3, 0);
    assert!(matches!(
        tsne2(&x, &TsneConfig::default()),
        Err(ReduceError::Perplexity { .. })
    ));
    assert!(matches!(
        umap2(
            &x,
            &UmapConfig {
                n_neighbors: 20,
                ..UmapConfig::default()
            }
        ),
        Err(ReduceError::Neighbors { .. })
    ));
}
