//! Two-dimensional projections of embedding matrices: PCA, exact t-SNE and
//! UMAP with an exact k-nearest-neighbour graph.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{squared_distance, Matrix};

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("{method} needs at least {needed} points, got {got}")]
    TooFewPoints { method: Method, needed: usize, got: usize },
    #[error("perplexity {perplexity} is infeasible for {n} points (need 1 < perplexity < n/3)")]
    Perplexity { perplexity: f64, n: usize },
    #[error("n_neighbors {k} must satisfy 2 <= n_neighbors < n = {n}")]
    Neighbors { k: usize, n: usize },
    #[error("invalid {method} configuration: {msg}")]
    Config { method: Method, msg: String },
    #[error("input contains NaN or infinite values")]
    NonFiniteInput,
    #[error("{method} produced non-finite coordinates")]
    NonFiniteOutput { method: Method },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Tsne,
    Umap,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pca, Method::Tsne, Method::Umap];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Tsne => "tsne",
            Method::Umap => "umap",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(Method::Pca),
            "tsne" | "t-sne" => Ok(Method::Tsne),
            "umap" => Ok(Method::Umap),
            other => Err(format!(
                "unknown reduction method `{other}` (expected pca, tsne or umap)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iteration: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iteration: 250,
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<(), ReduceError> {
        if !(self.perplexity > 1.0 && 3.0 * self.perplexity < n as f64) {
            return Err(ReduceError::Perplexity {
                perplexity: self.perplexity,
                n,
            });
        }
        let bad = |msg: &str| {
            Err(ReduceError::Config {
                method: Method::Tsne,
                msg: msg.into(),
            })
        };
        if self.iterations < 250 {
            return bad("iterations must be at least 250");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.early_exaggeration >= 1.0) {
            return bad("early_exaggeration must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapConfig {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negative_sample_rate: usize,
    pub seed: u64,
}

impl Default for UmapConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            epochs: 500,
            learning_rate: 1.0,
            negative_sample_rate: 5,
            seed: 0,
        }
    }
}

impl UmapConfig {
    pub fn validate(&self, n: usize) -> Result<(), ReduceError> {
        if self.n_neighbors < 2 || self.n_neighbors >= n {
            return Err(ReduceError::Neighbors { k: self.n_neighbors, n });
        }
        let bad = |msg: &str| {
            Err(ReduceError::Config {
                method: Method::Umap,
                msg: msg.into(),
            })
        };
        if !(self.min_dist >= 0.0) {
            return bad("min_dist must be non-negative");
        }
        if !(self.spread > 0.0) || self.min_dist > self.spread {
            return bad("spread must be positive and at least min_dist");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodConfig {
    Pca,
    Tsne(TsneConfig),
    Umap(UmapConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    /// `n x 2`.
    pub coords: Matrix,
    pub method: Method,
    pub config: MethodConfig,
    /// PCA only.
    pub explained_variance_ratio: Option<(f64, f64)>,
}

fn check_input(x: &Matrix, method: Method, needed: usize) -> Result<(), ReduceError> {
    if x.rows() < needed {
        return Err(ReduceError::TooFewPoints {
            method,
            needed,
            got: x.rows(),
        });
    }
    if !x.is_finite() {
        return Err(ReduceError::NonFiniteInput);
    }
    Ok(())
}

fn finish(coords: Matrix, method: Method, config: MethodConfig) -> Result<Projection2D, ReduceError> {
    if !coords.is_finite() {
        return Err(ReduceError::NonFiniteOutput { method });
    }
    Ok(Projection2D {
        coords,
        method,
        config,
        explained_variance_ratio: None,
    })
}

// ---------------------------------------------------------------------------
// PCA

/// Sum that does not depend on the order of `values`.
fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Principal axes of `x`, sorted by decreasing variance, with their
/// variances. Eigenvector signs make the largest-magnitude loading positive.
pub fn principal_axes(x: &Matrix) -> (Vec<Vec<f64>>, Vec<f64>, Matrix) {
    let (n, d) = x.shape();
    let mut buf = vec![0.0; n];
    let mean: Vec<f64> = (0..d)
        .map(|c| {
            buf.iter_mut().enumerate().for_each(|(i, b)| *b = x[(i, c)]);
            order_free_sum(&mut buf) / n as f64
        })
        .collect();
    let mut centered = x.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let denom = (n.max(2) - 1) as f64;
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            buf.iter_mut()
                .enumerate()
                .for_each(|(i, p)| *p = centered[(i, a)] * centered[(i, b)]);
            let c = order_free_sum(&mut buf) / denom;
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let mut axes = Vec::with_capacity(d);
    let mut variances = Vec::with_capacity(d);
    for &k in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let pivot = v.iter().enumerate().fold(
            (0, 0.0f64),
            |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best },
        );
        if pivot.1 < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        axes.push(v);
        variances.push(eig.eigenvalues[k].max(0.0));
    }
    (axes, variances, centered)
}

pub fn pca2(x: &Matrix) -> Result<Projection2D, ReduceError> {
    check_input(x, Method::Pca, 2)?;
    let n = x.rows();
    let (axes, variances, centered) = principal_axes(x);
    let total: f64 = variances.iter().sum();
    let mut coords = Matrix::zeros(n, 2);
    let ratio;
    if total > 0.0 {
        for (c, axis) in axes.iter().take(2).enumerate() {
            for i in 0..n {
                coords[(i, c)] = crate::tensor::dot(centered.row(i), axis);
            }
        }
        let r = |k: usize| variances.get(k).map_or(0.0, |v| v / total);
        ratio = (r(0), r(1));
    } else {
        ratio = (0.0, 0.0);
    }
    let mut p = finish(coords, Method::Pca, MethodConfig::Pca)?;
    p.explained_variance_ratio = Some(ratio);
    Ok(p)
}

// ---------------------------------------------------------------------------
// t-SNE

/// Row `i` of the conditional affinity matrix: Gaussian weights over squared
/// distances, bandwidth tuned by bisection to the target perplexity.
pub fn conditional_probabilities(sq_dists: &[f64], perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let d_min = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = sq_dists.iter().map(|d| d - d_min).collect();
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut p = vec![0.0; shifted.len()];
    for _ in 0..200 {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (pj, &d) in p.iter_mut().zip(&shifted) {
            *pj = (-d * beta).exp();
            sum += *pj;
            weighted += d * *pj;
        }
        let entropy = sum.ln() + beta * weighted / sum;
        let diff = entropy - target;
        if diff.abs() < 1e-10 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

/// Index of `(i, j)`, `i < j`, in a packed strict upper triangle.
fn packed(n: usize, i: usize, j: usize) -> usize {
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Symmetrised joint affinities, packed strict upper triangle.
pub fn joint_probabilities(x: &Matrix, perplexity: f64) -> Vec<f64> {
    let n = x.rows();
    let mut cond = vec![0.0; n * (n - 1) / 2 * 2];
    let mut row = Vec::with_capacity(n - 1);
    // cond_upper[k] holds p_{j|i} for (i<j), cond_lower[k] holds p_{i|j}.
    let (cond_upper, cond_lower) = cond.split_at_mut(n * (n - 1) / 2);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| squared_distance(x.row(i), x.row(j))));
        let p = conditional_probabilities(&row, perplexity);
        for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
            if j > i {
                cond_upper[packed(n, i, j)] = p[k];
            } else {
                cond_lower[packed(n, j, i)] = p[k];
            }
        }
    }
    let scale = 1.0 / (2.0 * n as f64);
    cond_upper
        .iter()
        .zip(cond_lower.iter())
        .map(|(a, b)| ((a + b) * scale).max(1e-12))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlPoint {
    pub iteration: usize,
    pub kl: f64,
}

pub const KL_LOG_EVERY: usize = 50;

pub fn tsne2(x: &Matrix, config: &TsneConfig) -> Result<Projection2D, ReduceError> {
    tsne2_traced(x, config).map(|(p, _)| p)
}

/// Exact t-SNE; also returns the KL divergence every [`KL_LOG_EVERY`]
/// iterations and at the last one.
pub fn tsne2_traced(x: &Matrix, config: &TsneConfig) -> Result<(Projection2D, Vec<KlPoint>), ReduceError> {
    check_input(x, Method::Tsne, 4)?;
    let n = x.rows();
    config.validate(n)?;
    let p = joint_probabilities(x, config.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut attract = vec![[0.0; 2]; n];
    let mut repel = vec![[0.0; 2]; n];
    let mut trace = Vec::new();

    for it in 0..config.iterations {
        let exaggeration = if it < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it < config.momentum_switch_iteration {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let log_kl = (it + 1) % KL_LOG_EVERY == 0 || it + 1 == config.iterations;
        attract.iter_mut().for_each(|a| *a = [0.0; 2]);
        repel.iter_mut().for_each(|r| *r = [0.0; 2]);
        let mut z = 0.0;
        let mut kl_p_log_p_over_num = 0.0;
        let mut k = 0;
        for i in 0..n {
            let yi = y[i];
            let mut z_row = 0.0;
            for j in i + 1..n {
                let dx = yi[0] - y[j][0];
                let dy = yi[1] - y[j][1];
                let num = 1.0 / (1.0 + dx * dx + dy * dy);
                let pij = p[k];
                k += 1;
                z_row += num;
                let a = pij * num;
                let r = num * num;
                attract[i][0] += a * dx;
                attract[i][1] += a * dy;
                attract[j][0] -= a * dx;
                attract[j][1] -= a * dy;
                repel[i][0] += r * dx;
                repel[i][1] += r * dy;
                repel[j][0] -= r * dx;
                repel[j][1] -= r * dy;
                if log_kl {
                    kl_p_log_p_over_num += pij * (pij / num).ln();
                }
            }
            z += 2.0 * z_row;
        }
        if log_kl {
            // KL(P||Q) over ordered pairs with q_ij = num_ij / Z.
            let kl = 2.0 * kl_p_log_p_over_num + p.iter().sum::<f64>() * 2.0 * z.ln();
            trace.push(KlPoint {
                iteration: it,
                kl: kl.max(0.0),
            });
        }
        for i in 0..n {
            for c in 0..2 {
                let grad = 4.0 * (exaggeration * attract[i][c] - repel[i][c] / z);
                let g = &mut gains[i][c];
                *g = if (grad > 0.0) != (update[i][c] > 0.0) {
                    *g + 0.2
                } else {
                    *g * 0.8
                };
                *g = (*g).max(0.01);
                update[i][c] = momentum * update[i][c] - config.learning_rate * *g * grad;
                y[i][c] += update[i][c];
            }
        }
        for c in 0..2 {
            let mean = y.iter().map(|v| v[c]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|v| v[c] -= mean);
        }
    }
    let coords = Matrix::from_vec(n, 2, y.into_iter().flatten().collect());
    Ok((finish(coords, Method::Tsne, MethodConfig::Tsne(*config))?, trace))
}

// ---------------------------------------------------------------------------
// UMAP

/// Exact k nearest neighbours of every row (self excluded), nearest first,
/// ties broken by index.
pub fn knn(x: &Matrix, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = x.rows();
    let mut all = Vec::with_capacity(n - 1);
    (0..n)
        .map(|i| {
            all.clear();
            all.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (j, squared_distance(x.row(i), x.row(j)))),
            );
            let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
            if k < all.len() {
                all.select_nth_unstable_by(k, cmp);
                all.truncate(k);
            }
            all.sort_by(cmp);
            all.iter().map(|&(j, d2)| (j, d2.sqrt())).collect()
        })
        .collect()
}

/// Local connectivity `rho` and bandwidth `sigma` of one point from its
/// sorted neighbour distances.
pub fn smooth_knn(dists: &[f64]) -> (f64, f64) {
    let target = (dists.len() as f64).log2();
    let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let psum = |sigma: f64| -> f64 {
        dists
            .iter()
            .map(|&d| {
                let t = d - rho;
                if t <= 0.0 {
                    1.0
                } else {
                    (-t / sigma).exp()
                }
            })
            .sum()
    };
    let (mut lo, mut hi, mut sigma) = (0.0, f64::INFINITY, 1.0);
    for _ in 0..64 {
        let diff = psum(sigma) - target;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            hi = sigma;
            sigma = (lo + hi) / 2.0;
        } else {
            lo = sigma;
            sigma = if hi.is_finite() { (lo + hi) / 2.0 } else { sigma * 2.0 };
        }
    }
    let mean = dists.iter().sum::<f64>() / dists.len().max(1) as f64;
    (rho, sigma.max(1e-3 * mean))
}

pub fn membership(d: f64, rho: f64, sigma: f64) -> f64 {
    let t = d - rho;
    if t <= 0.0 {
        1.0
    } else if sigma > 0.0 {
        (-t / sigma).exp()
    } else {
        0.0
    }
}

/// Directed fuzzy memberships `i -> j` for each point's neighbours.
pub fn directed_memberships(neighbors: &[Vec<(usize, f64)>]) -> Vec<Vec<(usize, f64)>> {
    neighbors
        .iter()
        .map(|row| {
            let dists: Vec<f64> = row.iter().map(|p| p.1).collect();
            let (rho, sigma) = smooth_knn(&dists);
            row.iter().map(|&(j, d)| (j, membership(d, rho, sigma))).collect()
        })
        .collect()
}

/// Fuzzy union `a + b - ab` of the directed memberships. Each undirected
/// edge `(i, j)`, `i < j`, appears once.
pub fn symmetrize(directed: &[Vec<(usize, f64)>]) -> Vec<(usize, usize, f64)> {
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (i, row) in directed.iter().enumerate() {
        for &(j, w) in row {
            if i == j {
                continue;
            }
            let e = pairs.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                e.0 = w;
            } else {
                e.1 = w;
            }
        }
    }
    pairs
        .into_iter()
        .map(|((i, j), (a, b))| (i, j, a + b * (1.0 - a)))
        .filter(|e| e.2 > 0.0)
        .collect()
}

/// Least-squares fit of `1 / (1 + a d^(2b))` to the target curve that is 1
/// below `min_dist` and decays as `exp(-(d - min_dist) / spread)` above it.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|k| 3.0 * spread * k as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let cost = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (1.0 / (1.0 + a * x.powf(2.0 * b)) - y).powi(2))
            .sum()
    };
    let (mut a, mut b) = (1.0, 1.0);
    let mut lambda = 1e-3;
    let mut current = cost(a, b);
    for _ in 0..500 {
        // Gauss-Newton normal equations with Levenberg damping.
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            let u = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let g = 1.0 / (1.0 + a * u);
            let r = g - y;
            let da = -u * g * g;
            let db = if x > 0.0 { -a * g * g * u * 2.0 * x.ln() } else { 0.0 };
            let jrow = [da, db];
            for p in 0..2 {
                jtr[p] += jrow[p] * r;
                for q in 0..2 {
                    jtj[p][q] += jrow[p] * jrow[q];
                }
            }
        }
        let m00 = jtj[0][0] * (1.0 + lambda);
        let m11 = jtj[1][1] * (1.0 + lambda);
        let det = m00 * m11 - jtj[0][1] * jtj[1][0];
        if det == 0.0 {
            break;
        }
        let step_a = -(m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let step_b = -(m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let (na, nb) = (a + step_a, b + step_b);
        let candidate = if na > 0.0 && nb > 0.0 {
            cost(na, nb)
        } else {
            f64::INFINITY
        };
        if candidate < current {
            let improvement = current - candidate;
            (a, b, current) = (na, nb, candidate);
            lambda = (lambda / 10.0).max(1e-12);
            if improvement < 1e-15 * current.max(1e-300) {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b)
}

fn clip(v: f64) -> f64 {
    v.clamp(-4.0, 4.0)
}

/// PCA layout rescaled so the largest coordinate magnitude is 10.
fn umap_init(x: &Matrix, rng: &mut ChaCha8Rng) -> Result<Vec<[f64; 2]>, ReduceError> {
    let pca = pca2(x)?;
    let max = pca.coords.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = Normal::new(0.0, 1e-4).expect("valid normal");
    Ok(pca
        .coords
        .row_iter()
        .map(|r| {
            if max > 0.0 {
                [
                    r[0] * 10.0 / max + noise.sample(rng),
                    r[1] * 10.0 / max + noise.sample(rng),
                ]
            } else {
                [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)]
            }
        })
        .collect())
}

pub fn umap2(x: &Matrix, config: &UmapConfig) -> Result<Projection2D, ReduceError> {
    check_input(x, Method::Umap, 3)?;
    let n = x.rows();
    config.validate(n)?;
    let neighbors = knn(x, config.n_neighbors);
    let graph = symmetrize(&directed_memberships(&neighbors));
    let (a, b) = fit_ab(config.min_dist, config.spread);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut y = umap_init(x, &mut rng)?;

    // Both directions of every undirected edge are sampled.
    let w_max = graph.iter().map(|e| e.2).fold(0.0, f64::max);
    let epochs = config.epochs as f64;
    let mut heads = Vec::new();
    let mut tails = Vec::new();
    let mut eps = Vec::new();
    for &(i, j, w) in &graph {
        if w < w_max / epochs {
            continue;
        }
        for (h, t) in [(i, j), (j, i)] {
            heads.push(h);
            tails.push(t);
            eps.push(w_max / w);
        }
    }
    let neg_rate = config.negative_sample_rate as f64;
    let eps_neg: Vec<f64> = eps.iter().map(|e| e / neg_rate.max(f64::MIN_POSITIVE)).collect();
    let mut next_sample = eps.clone();
    let mut next_neg = eps_neg.clone();

    for epoch in 1..=config.epochs {
        let e = epoch as f64;
        let alpha = config.learning_rate * (1.0 - (e - 1.0) / epochs);
        for k in 0..heads.len() {
            if next_sample[k] > e {
                continue;
            }
            let (i, j) = (heads[k], tails[k]);
            let d2 = (y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2);
            if d2 > 0.0 {
                let coef = -2.0 * a * b * d2.powf(b - 1.0) / (1.0 + a * d2.powf(b));
                for c in 0..2 {
                    let g = clip(coef * (y[i][c] - y[j][c])) * alpha;
                    y[i][c] += g;
                    y[j][c] -= g;
                }
            }
            next_sample[k] += eps[k];

            if config.negative_sample_rate > 0 {
                let n_neg = ((e - next_neg[k]) / eps_neg[k]).floor().max(0.0) as usize;
                for _ in 0..n_neg {
                    let m = rng.random_range(0..n);
                    if m == i {
                        continue;
                    }
                    let d2 = (y[i][0] - y[m][0]).powi(2) + (y[i][1] - y[m][1]).powi(2);
                    let coef = if d2 > 0.0 {
                        2.0 * b / ((0.001 + d2) * (1.0 + a * d2.powf(b)))
                    } else {
                        0.0
                    };
                    for c in 0..2 {
                        let g = if coef > 0.0 {
                            clip(coef * (y[i][c] - y[m][c]))
                        } else {
                            4.0
                        };
                        y[i][c] += g * alpha;
                    }
                }
                next_neg[k] += n_neg as f64 * eps_neg[k];
            }
        }
    }
    let coords = Matrix::from_vec(n, 2, y.into_iter().flatten().collect());
    finish(coords, Method::Umap, MethodConfig::Umap(*config))
}

/// Runs the named method; t-SNE/UMAP take their seed from `seed`.
pub fn reduce(x: &Matrix, method: Method, tsne: &TsneConfig, umap: &UmapConfig) -> Result<Projection2D, ReduceError> {
    match method {
        Method::Pca => pca2(x),
        Method::Tsne => tsne2(x, tsne),
        Method::Umap => umap2(x, umap),
    }
}
