#![allow(dead_code)]

use std::rc::Rc;

use milp_isa::autodiff::{finite_difference_check, Tape};
use milp_isa::gnn::{Architecture, GraphTensors, ModelConfig, ModelParams};
use milp_isa::graph::{BipartiteGraph, Edge};
use milp_isa::tensor::Matrix;
use milp_isa::train::{link_loss_tape, sample_negatives};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Each (var, con) pair is an edge with probability `p`; coefficients in
/// (-3, 3), features uniform in (-1, 1).
pub fn random_graph(seed: u64, n_var: usize, n_con: usize, p: f64) -> BipartiteGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for var in 0..n_var {
        for con in 0..n_con {
            if rng.random_bool(p) {
                let raw: f64 = rng.random_range(-3.0..3.0);
                let raw = if raw == 0.0 { 1.0 } else { raw };
                edges.push(Edge {
                    var,
                    con,
                    raw_coeff: raw,
                    weight: raw.tanh(),
                });
            }
        }
    }
    let mut features = |rows, cols| {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
    };
    BipartiteGraph {
        n_var,
        n_con,
        var_features: features(n_var, 4),
        con_features: features(n_con, 2),
        edges,
    }
}

/// Widths for finite-difference checks, small enough to keep the number of
/// perturbed entries in the hundreds.
pub fn gradient_check_config() -> ModelConfig {
    ModelConfig {
        d_hidden: 4,
        d_out: 3,
        n_heads: 2,
        ..ModelConfig::default()
    }
}

/// Max relative error between reverse-mode and central-difference gradients
/// of the full encoder plus link BCE on a random graph with at most 8
/// variables and 5 constraints.
pub fn gnn_gradient_error(arch: Architecture, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = loop {
        let (n_var, n_con) = (rng.random_range(2..=8), rng.random_range(1..=5));
        let g = random_graph(rng.random(), n_var, n_con, 0.4);
        if !g.edges.is_empty() && g.edges.len() < n_var * n_con {
            break g;
        }
    };
    let positives: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.var, e.con)).collect();
    let m = positives.len().min(g.n_var * g.n_con - positives.len());
    let mut pairs = positives.clone();
    pairs.extend(sample_negatives(&g, m, seed).unwrap());
    let labels: Rc<[f64]> = (0..pairs.len())
        .map(|i| if i < positives.len() { 1.0 } else { 0.0 })
        .collect();
    let params = ModelParams::init(arch, gradient_check_config(), seed).unwrap();
    let mut flat = Vec::new();
    params.for_each(&mut |m| flat.push(m.clone()));
    finite_difference_check(
        |tape: &mut Tape, leaves| {
            let mut k = 0;
            let handles = params.map(&mut |_| {
                k += 1;
                leaves[k - 1]
            });
            let mut gt = GraphTensors::new(tape, &g);
            link_loss_tape(tape, &mut gt, &handles, &pairs, labels.clone())
        },
        &flat,
        1e-5,
    )
    .unwrap()
}

/// Isotropic unit-variance Gaussian blobs around the given centres.
pub fn blobs(centres: &[Vec<f64>], per_blob: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = centres[0].len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (b, c) in centres.iter().enumerate() {
        for _ in 0..per_blob {
            for v in c {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(v + z);
            }
            labels.push(b);
        }
    }
    (Matrix::from_vec(labels.len(), d, data), labels)
}

/// Three 10-dimensional blob centres pairwise 10 apart.
pub fn three_centres_10d() -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; 10]; 3];
    c[1][0] = 10.0;
    c[2][0] = 5.0;
    c[2][1] = 5.0 * 3f64.sqrt();
    c
}

/// Four 2-dimensional blob centres on a square of side 20.
pub fn four_centres_2d() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![20.0, 0.0], vec![0.0, 20.0], vec![20.0, 20.0]]
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect(),
    )
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// decreasing eigenvalue. Independent of the library solver.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|r| v[r][i]).collect()).collect();
    (values, vectors)
}

/// PCA by the textbook recipe on top of [`jacobi_eigen`].
pub fn oracle_pca(x: &Matrix) -> (Matrix, (f64, f64)) {
    let (n, d) = x.shape();
    let mean: Vec<f64> = (0..d)
        .map(|c| (0..n).map(|i| x[(i, c)]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]) / (n - 1) as f64;
            }
        }
    }
    let (values, mut vectors) = jacobi_eigen(&cov);
    for v in vectors.iter_mut() {
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let total: f64 = values.iter().sum();
    let mut coords = Matrix::zeros(n, 2);
    for i in 0..n {
        for c in 0..2 {
            coords[(i, c)] = (0..d).map(|k| (x[(i, k)] - mean[k]) * vectors[c][k]).sum();
        }
    }
    (coords, (values[0] / total, values[1] / total))
}
