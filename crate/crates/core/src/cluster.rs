//! k-means with k-means++ seeding, silhouette scores and the two model
//! selection scans (elbow on WCSS, best mean silhouette).

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{squared_distance, Matrix};

pub const MAX_ITERATIONS: usize = 300;
pub const RESTARTS: usize = 10;
pub const FIGURE_K: usize = 10;
pub const DEFAULT_K_RANGE: RangeInclusive<usize> = 2..=15;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("silhouette needs at least 2 non-empty clusters, found {0}")]
    SingleCluster(usize),
    #[error("labels have length {labels}, data has {n} rows")]
    LengthMismatch { labels: usize, n: usize },
    #[error("invalid k range {lo}..={hi} for {n} points (allowed {min}..={max})")]
    BadRange {
        lo: usize,
        hi: usize,
        n: usize,
        min: usize,
        max: usize,
    },
    #[error("input contains NaN or infinite values")]
    NonFiniteInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub labels: Vec<usize>,
    /// `k x d`.
    pub centroids: Matrix,
    pub wcss: f64,
    /// `None` when k = 1 or the labels collapse into one cluster.
    pub mean_silhouette: Option<f64>,
    pub n_iterations: usize,
    pub seed: u64,
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.row_iter().enumerate() {
        let d = squared_distance(point, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn wcss_of(x: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    x.row_iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, centroids.row(l)))
        .sum()
}

fn means(x: &Matrix, labels: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let mut sums = Matrix::zeros(k, x.cols());
    let mut counts = vec![0; k];
    for (p, &l) in x.row_iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(p) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            sums.row_mut(c).iter_mut().for_each(|s| *s /= count as f64);
        }
    }
    (sums, counts)
}

/// Index drawn with probability proportional to `weights`; uniform if all
/// weights are zero.
fn weighted_pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.random_range(0..weights.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Adds k-means++ centroids to `existing` until it has `k` rows.
fn plus_plus(x: &Matrix, existing: Option<&Matrix>, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut rows: Vec<Vec<f64>> = existing.map_or_else(Vec::new, |m| m.row_iter().map(<[f64]>::to_vec).collect());
    let mut d2: Vec<f64> = if rows.is_empty() {
        let first = rng.random_range(0..x.rows());
        rows.push(x.row(first).to_vec());
        x.row_iter().map(|p| squared_distance(p, &rows[0])).collect()
    } else {
        let m = Matrix::from_rows(&rows);
        x.row_iter().map(|p| nearest(p, &m).1).collect()
    };
    while rows.len() < k {
        let pick = weighted_pick(&d2, rng);
        let c = x.row(pick).to_vec();
        for (d, p) in d2.iter_mut().zip(x.row_iter()) {
            *d = d.min(squared_distance(p, &c));
        }
        rows.push(c);
    }
    Matrix::from_rows(&rows)
}

struct LloydOutcome {
    labels: Vec<usize>,
    centroids: Matrix,
    wcss: f64,
    iterations: usize,
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing or [`MAX_ITERATIONS`] is reached.
fn lloyd(x: &Matrix, mut centroids: Matrix) -> LloydOutcome {
    let n = x.rows();
    let k = centroids.rows();
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut previous = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (i, p) in x.row_iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            changed |= labels[i] != c;
            labels[i] = c;
            dist[i] = d;
        }
        if !changed || iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;
        let (mut next, mut counts) = means(x, &labels, k);
        // An empty cluster takes over the point farthest from its centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                dist[i] = 0.0;
                next.row_mut(c).copy_from_slice(x.row(i));
            }
        }
        let (recentred, _) = means(x, &labels, k);
        for c in 0..k {
            if counts[c] > 0 {
                next.row_mut(c).copy_from_slice(recentred.row(c));
            }
        }
        let current = wcss_of(x, &labels, &next);
        debug_assert!(
            current <= previous * (1.0 + 1e-9) + 1e-12,
            "Lloyd step increased WCSS: {previous} -> {current}"
        );
        previous = current;
        centroids = next;
    }
    let (mut final_centroids, counts) = means(x, &labels, k);
    for c in 0..k {
        if counts[c] == 0 {
            final_centroids.row_mut(c).copy_from_slice(centroids.row(c));
        }
    }
    LloydOutcome {
        wcss: wcss_of(x, &labels, &final_centroids),
        labels,
        centroids: final_centroids,
        iterations,
    }
}

fn check_k(x: &Matrix, k: usize) -> Result<(), ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > x.rows() {
        return Err(ClusterError::KTooLarge { k, n: x.rows() });
    }
    if !x.is_finite() {
        return Err(ClusterError::NonFiniteInput);
    }
    Ok(())
}

/// Best of [`RESTARTS`] k-means++ restarts, without silhouette.
fn kmeans_raw(x: &Matrix, k: usize, seed: u64) -> Result<(LloydOutcome, ChaCha8Rng), ClusterError> {
    check_k(x, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<LloydOutcome> = None;
    for _ in 0..RESTARTS {
        let run = lloyd(x, plus_plus(x, None, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok((best.expect("at least one restart"), rng))
}

fn result(outcome: LloydOutcome, k: usize, seed: u64, silhouette: Option<f64>) -> ClusteringResult {
    ClusteringResult {
        k,
        labels: outcome.labels,
        centroids: outcome.centroids,
        wcss: outcome.wcss,
        mean_silhouette: silhouette,
        n_iterations: outcome.iterations,
        seed,
    }
}

pub fn kmeans(x: &Matrix, k: usize, seed: u64) -> Result<ClusteringResult, ClusterError> {
    check_k(x, k)?;
    let cache = if k >= 2 { Some(DistanceCache::new(x)) } else { None };
    kmeans_cached(x, cache.as_ref(), k, seed)
}

/// [`kmeans`] with the silhouette read from a precomputed cache for `x`
/// (required when k >= 2).
pub fn kmeans_cached(
    x: &Matrix,
    cache: Option<&DistanceCache>,
    k: usize,
    seed: u64,
) -> Result<ClusteringResult, ClusterError> {
    let (outcome, _) = kmeans_raw(x, k, seed)?;
    let sil = match cache {
        Some(c) if k >= 2 => silhouette_if_defined(c, &outcome.labels)?,
        _ => None,
    };
    Ok(result(outcome, k, seed, sil))
}

/// Pairwise Euclidean distances, condensed upper triangle.
pub struct DistanceCache {
    n: usize,
    d: Vec<f64>,
}

impl DistanceCache {
    pub fn new(x: &Matrix) -> Self {
        let n = x.rows();
        let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                d.push(squared_distance(x.row(i), x.row(j)).sqrt());
            }
        }
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.d[i * (2 * self.n - i - 1) / 2 + j - i - 1],
            std::cmp::Ordering::Greater => self.get(j, i),
        }
    }
}

pub fn silhouette_score(x: &Matrix, labels: &[usize]) -> Result<f64, ClusterError> {
    if labels.len() != x.rows() {
        return Err(ClusterError::LengthMismatch {
            labels: labels.len(),
            n: x.rows(),
        });
    }
    silhouette_cached(&DistanceCache::new(x), labels)
}

/// Per-point silhouettes; singletons score 0.
pub fn silhouette_samples(cache: &DistanceCache, labels: &[usize]) -> Result<Vec<f64>, ClusterError> {
    let n = cache.len();
    if labels.len() != n {
        return Err(ClusterError::LengthMismatch {
            labels: labels.len(),
            n,
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    let non_empty = sizes.iter().filter(|&&s| s > 0).count();
    if non_empty < 2 {
        return Err(ClusterError::SingleCluster(non_empty));
    }
    let mut sums = vec![0.0; k];
    Ok((0..n)
        .map(|i| {
            let own = labels[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            sums.iter_mut().for_each(|s| *s = 0.0);
            for j in 0..n {
                sums[labels[j]] += cache.get(i, j);
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect())
}

pub fn silhouette_cached(cache: &DistanceCache, labels: &[usize]) -> Result<f64, ClusterError> {
    let s = silhouette_samples(cache, labels)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Like [`silhouette_cached`], but `None` when the labels occupy fewer than
/// two clusters (k-means on coincident points collapses that way).
pub fn silhouette_if_defined(cache: &DistanceCache, labels: &[usize]) -> Result<Option<f64>, ClusterError> {
    match silhouette_cached(cache, labels) {
        Ok(s) => Ok(Some(s)),
        Err(ClusterError::SingleCluster(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElbowMode {
    /// Each k is clustered from scratch.
    #[default]
    Independent,
    /// Each k starts from the previous centroids plus one k-means++ centroid.
    Nested,
}

impl std::str::FromStr for ElbowMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "independent" => Ok(ElbowMode::Independent),
            "nested" => Ok(ElbowMode::Nested),
            other => Err(format!("unknown elbow mode '{other}' (expected independent or nested)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowScan {
    pub curve: Vec<(usize, f64)>,
    pub suggested_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteScan {
    /// k with an undefined silhouette are left out.
    pub curve: Vec<(usize, f64)>,
    pub best_k: usize,
}

fn check_range(range: &RangeInclusive<usize>, n: usize, min: usize, max: usize) -> Result<(), ClusterError> {
    let (lo, hi) = (*range.start(), *range.end());
    if lo < min || hi > max || lo > hi {
        return Err(ClusterError::BadRange { lo, hi, n, min, max });
    }
    Ok(())
}

/// k whose point lies farthest from the chord joining the curve's end
/// points, with both axes rescaled to [0, 1]. Ties go to the smaller k.
pub fn knee(curve: &[(usize, f64)]) -> usize {
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    let kx = |k: usize| {
        if last.0 > first.0 {
            (k - first.0) as f64 / (last.0 - first.0) as f64
        } else {
            0.0
        }
    };
    let (w_min, w_max) = curve.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.1), hi.max(p.1))
    });
    let wy = |w: f64| {
        if w_max > w_min {
            (w - w_min) / (w_max - w_min)
        } else {
            0.0
        }
    };
    let (x0, y0, x1, y1) = (kx(first.0), wy(first.1), kx(last.0), wy(last.1));
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut best = (first.0, f64::NEG_INFINITY);
    for &(k, w) in curve {
        let (px, py) = (kx(k), wy(w));
        let dist = if len > 0.0 {
            ((x1 - x0) * (y0 - py) - (x0 - px) * (y1 - y0)).abs() / len
        } else {
            0.0
        };
        if dist > best.1 {
            best = (k, dist);
        }
    }
    best.0
}

pub fn elbow_scan(
    x: &Matrix,
    k_range: RangeInclusive<usize>,
    seed: u64,
    mode: ElbowMode,
) -> Result<ElbowScan, ClusterError> {
    check_range(&k_range, x.rows(), 1, x.rows())?;
    let mut curve = Vec::new();
    let mut previous: Option<(Matrix, ChaCha8Rng)> = None;
    for k in k_range {
        let (outcome, rng) = match (mode, previous.take()) {
            (ElbowMode::Nested, Some((centroids, mut rng))) => {
                let init = plus_plus(x, Some(&centroids), k, &mut rng);
                (lloyd(x, init), rng)
            }
            _ => kmeans_raw(x, k, seed)?,
        };
        if mode == ElbowMode::Nested {
            if let Some(&(_, prev)) = curve.last() {
                assert!(
                    outcome.wcss <= prev * (1.0 + 1e-9) + 1e-12,
                    "nested elbow WCSS increased at k = {k}"
                );
            }
        }
        curve.push((k, outcome.wcss));
        previous = Some((outcome.centroids, rng));
    }
    Ok(ElbowScan {
        suggested_k: knee(&curve),
        curve,
    })
}

pub fn silhouette_scan(x: &Matrix, k_range: RangeInclusive<usize>, seed: u64) -> Result<SilhouetteScan, ClusterError> {
    check_range(&k_range, x.rows(), 2, x.rows().saturating_sub(1))?;
    let cache = DistanceCache::new(x);
    silhouette_scan_cached(x, &cache, k_range, seed)
}

/// Silhouette scan reusing a precomputed distance cache for `x`. Errors
/// with [`ClusterError::SingleCluster`] if every k collapses.
pub fn silhouette_scan_cached(
    x: &Matrix,
    cache: &DistanceCache,
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<SilhouetteScan, ClusterError> {
    check_range(&k_range, x.rows(), 2, x.rows().saturating_sub(1))?;
    let mut curve = Vec::new();
    for k in k_range {
        let (outcome, _) = kmeans_raw(x, k, seed)?;
        if let Some(s) = silhouette_if_defined(cache, &outcome.labels)? {
            curve.push((k, s));
        }
    }
    sil_scan(curve).ok_or(ClusterError::SingleCluster(1))
}

fn sil_scan(curve: Vec<(usize, f64)>) -> Option<SilhouetteScan> {
    let mut best = (0, f64::NEG_INFINITY);
    for &(k, s) in &curve {
        if s > best.1 {
            best = (k, s);
        }
    }
    (!curve.is_empty()).then_some(SilhouetteScan { curve, best_k: best.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScan {
    pub elbow: ElbowScan,
    /// `None` when no k in the range has a defined silhouette.
    pub silhouette: Option<SilhouetteScan>,
}

/// Elbow and silhouette scans over one range. In independent mode each k
/// is clustered once and both curves read that clustering; silhouettes are
/// taken for the k in `2..=n-1` only.
pub fn scan_k(
    x: &Matrix,
    cache: &DistanceCache,
    k_range: RangeInclusive<usize>,
    seed: u64,
    mode: ElbowMode,
) -> Result<KScan, ClusterError> {
    let n = x.rows();
    check_range(&k_range, n, 1, n)?;
    let sil_lo = (*k_range.start()).max(2);
    let sil_hi = (*k_range.end()).min(n.saturating_sub(1));
    let mut sil_curve = Vec::new();
    let elbow = match mode {
        ElbowMode::Nested => {
            let elbow = elbow_scan(x, k_range.clone(), seed, mode)?;
            for k in sil_lo..=sil_hi {
                let (outcome, _) = kmeans_raw(x, k, seed)?;
                if let Some(s) = silhouette_if_defined(cache, &outcome.labels)? {
                    sil_curve.push((k, s));
                }
            }
            elbow
        }
        ElbowMode::Independent => {
            let mut curve = Vec::new();
            for k in k_range {
                let (outcome, _) = kmeans_raw(x, k, seed)?;
                curve.push((k, outcome.wcss));
                if (sil_lo..=sil_hi).contains(&k) {
                    if let Some(s) = silhouette_if_defined(cache, &outcome.labels)? {
                        sil_curve.push((k, s));
                    }
                }
            }
            ElbowScan {
                suggested_k: knee(&curve),
                curve,
            }
        }
    };
    Ok(KScan {
        elbow,
        silhouette: sil_scan(sil_curve),
    })
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0usize; ka * kb];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&i, &j) in a.iter().zip(b) {
        table[i * kb + j] += 1;
        rows[i] += 1;
        cols[j] += 1;
    }
    let c2 = |m: usize| (m * m.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&m| c2(m)).sum();
    let sum_a: f64 = rows.iter().map(|&m| c2(m)).sum();
    let sum_b: f64 = cols.iter().map(|&m| c2(m)).sum();
    let expected = sum_a * sum_b / c2(n).max(1.0);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_points() -> Matrix {
        Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]])
    }

    #[test]
    fn hand_example_two_clusters() {
        let r = kmeans(&four_points(), 2, 0).unwrap();
        assert!((r.wcss - 1.0).abs() < 1e-12);
        let mut cents: Vec<Vec<f64>> = r.centroids.row_iter().map(<[f64]>::to_vec).collect();
        cents.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(cents, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
    }

    #[test]
    fn hand_example_one_cluster() {
        let r = kmeans(&four_points(), 1, 0).unwrap();
        assert!((r.wcss - 101.0).abs() < 1e-12);
        assert_eq!(r.centroids.row(0), &[5.0, 0.5]);
        assert_eq!(r.mean_silhouette, None);
    }

    #[test]
    fn k_equals_n_is_exact() {
        let r = kmeans(&four_points(), 4, 3).unwrap();
        assert_eq!(r.wcss, 0.0);
        assert_eq!(r.mean_silhouette, Some(0.0));
        assert_eq!(
            kmeans(&four_points(), 5, 0).unwrap_err(),
            ClusterError::KTooLarge { k: 5, n: 4 }
        );
        assert_eq!(kmeans(&four_points(), 0, 0).unwrap_err(), ClusterError::ZeroK);
    }

    #[test]
    fn hand_silhouette() {
        let x = Matrix::column(&[0.0, 1.0, 10.0, 11.0]);
        let s = silhouette_samples(&DistanceCache::new(&x), &[0, 0, 1, 1]).unwrap();
        let want = [1.0 - 1.0 / 10.5, 1.0 - 1.0 / 9.5, 1.0 - 1.0 / 9.5, 1.0 - 1.0 / 10.5];
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let mean = silhouette_score(&x, &[0, 0, 1, 1]).unwrap();
        assert!((mean - 0.89975).abs() < 1e-5);
        assert_eq!(silhouette_score(&x, &[1, 1, 1, 1]), Err(ClusterError::SingleCluster(1)));
    }

    #[test]
    fn coincident_points_have_no_silhouette() {
        let x = Matrix::column(&[3.0; 6]);
        let r = kmeans(&x, 3, 0).unwrap();
        assert_eq!(r.mean_silhouette, None);
        assert_eq!(r.wcss, 0.0);
        let scan = scan_k(&x, &DistanceCache::new(&x), 2..=4, 0, ElbowMode::Independent).unwrap();
        assert!(scan.silhouette.is_none());
    }

    #[test]
    fn knee_of_sharp_curve() {
        let curve = vec![(1, 100.0), (2, 60.0), (3, 25.0), (4, 5.0), (5, 4.0), (6, 3.5), (7, 3.0)];
        assert_eq!(knee(&curve), 4);
        assert_eq!(knee(&[(3, 0.0)]), 3);
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        let ari = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]);
        assert!((ari + 0.5).abs() < 1e-12, "{ari}");
    }

    #[test]
    fn distance_cache_indexing() {
        let x = Matrix::column(&[0.0, 1.0, 3.0, 7.0]);
        let c = DistanceCache::new(&x);
        assert_eq!(c.get(0, 3), 7.0);
        assert_eq!(c.get(3, 1), 6.0);
        assert_eq!(c.get(2, 2), 0.0);
    }
}
