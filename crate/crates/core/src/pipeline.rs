//! End-to-end run: parse, build the graph, train each architecture, project
//! and cluster both node types, write every artifact and a manifest.

use std::fs;
use std::io;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{self, ClusterError, ClusteringResult, DistanceCache, ElbowMode, KScan, FIGURE_K};
use crate::export::{self, ExportError, NodeType, ScatterText, Series};
use crate::gnn::{Architecture, EmbeddingSet, ModelParams};
use crate::graph::{build_bipartite_with, BipartiteGraph, GraphOptions, DEFAULT_BOUND_CLAMP};
use crate::mps::{instance_stats, parse_mps_str, InstanceStats, ParseError};
use crate::reduce::{self, Method, Projection2D, ReduceError, TsneConfig, UmapConfig};
use crate::tensor::Matrix;
use crate::train::{self, TrainConfig, TrainError, TrainOutput};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub architectures: Vec<Architecture>,
    /// Feature construction; the pipeline standardizes by default.
    pub graph: GraphOptions,
    /// `architecture` and `seed` are overridden per run.
    pub train: TrainConfig,
    pub tsne: TsneConfig,
    pub umap: UmapConfig,
    pub figure_k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub elbow_mode: ElbowMode,
    /// Uniform subsample size for node sets larger than this.
    pub max_points: Option<usize>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            output_dir: PathBuf::from("out"),
            architectures: vec![Architecture::Gcn, Architecture::Gat],
            graph: GraphOptions {
                bound_clamp: DEFAULT_BOUND_CLAMP,
                standardize: true,
            },
            train: TrainConfig::default(),
            tsne: TsneConfig::default(),
            umap: UmapConfig::default(),
            figure_k: FIGURE_K,
            k_min: *cluster::DEFAULT_K_RANGE.start(),
            k_max: *cluster::DEFAULT_K_RANGE.end(),
            elbow_mode: ElbowMode::Independent,
            max_points: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.architectures.is_empty() {
            return Err("at least one architecture must be selected".into());
        }
        let archs = &self.architectures;
        if archs.iter().enumerate().any(|(i, a)| archs[..i].contains(a)) {
            return Err("architectures must not repeat".into());
        }
        if self.figure_k == 0 {
            return Err("figure_k must be at least 1".into());
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(format!("invalid k range {}..={}", self.k_min, self.k_max));
        }
        if self.max_points.is_some_and(|m| m < 4) {
            return Err("max_points must be at least 4".into());
        }
        if !(self.graph.bound_clamp > 0.0) {
            return Err("bound_clamp must be positive".into());
        }
        self.train.validate().map_err(|e| e.to_string())
    }

    /// The global seed drives every stochastic stage.
    pub fn effective(&self) -> PipelineConfig {
        let mut c = self.clone();
        c.train.seed = self.seed;
        c.tsne.seed = self.seed;
        c.umap.seed = self.seed;
        c
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Loads JSON or TOML by file extension (`.toml` is TOML, anything else
    /// JSON).
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            Self::from_toml(&text)
        } else {
            Self::from_json(&text)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Parse,
    Train,
    Reduce,
    Cluster,
    Export,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[config] {0}")]
    Config(String),
    #[error("[parse] {path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("[train] {architecture:?}: {source}")]
    Train {
        architecture: Architecture,
        source: TrainError,
    },
    #[error("[reduce] {architecture:?} {node_type:?} {method}: {source}")]
    Reduce {
        architecture: Architecture,
        node_type: NodeType,
        method: Method,
        source: ReduceError,
    },
    #[error("[cluster] {what}: {source}")]
    Cluster { what: String, source: ClusterError },
    #[error("[export] {what}: {source}")]
    Export { what: String, source: ExportError },
    #[error("[export] {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Config(_) => Stage::Config,
            PipelineError::Parse { .. } => Stage::Parse,
            PipelineError::Train { .. } => Stage::Train,
            PipelineError::Reduce { .. } => Stage::Reduce,
            PipelineError::Cluster { .. } => Stage::Cluster,
            PipelineError::Export { .. } | PipelineError::Io { .. } => Stage::Export,
        }
    }

    /// 1 usage, 2 parse, 3 numeric, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Parse { .. } => 2,
            PipelineError::Train { source, .. } => match source {
                TrainError::Config(_) | TrainError::Model(_) => 1,
                _ => 3,
            },
            PipelineError::Reduce { source, .. } => match source {
                ReduceError::NonFiniteInput | ReduceError::NonFiniteOutput { .. } => 3,
                _ => 1,
            },
            PipelineError::Cluster { source, .. } => match source {
                ClusterError::NonFiniteInput => 3,
                _ => 1,
            },
            PipelineError::Export { .. } => 3,
            PipelineError::Io { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Content depends on wall-clock time and is excluded from
    /// reproducibility comparisons.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub architecture: Architecture,
    pub epochs: usize,
    pub first_loss: f64,
    pub epoch5_loss: Option<f64>,
    pub final_loss: f64,
    pub train_auc: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureComparison {
    pub gcn_final_loss: f64,
    pub gat_final_loss: f64,
    /// GCN / GAT final loss.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub file: String,
    pub architecture: Architecture,
    pub node_type: NodeType,
    pub method: Method,
    pub n_points: usize,
    pub explained_variance_ratio: Option<(f64, f64)>,
    /// Mean silhouette of figure-k k-means on the 2D coordinates.
    pub figure_k_silhouette_2d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub architecture: Architecture,
    pub node_type: NodeType,
    pub figure_k: usize,
    pub wcss: f64,
    pub mean_silhouette: Option<f64>,
    pub elbow_suggested_k: usize,
    pub silhouette_best_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub instance_name: String,
    pub instance: InstanceStats,
    pub stage_times_ms: Vec<StageTime>,
    pub training: Vec<TrainingSummary>,
    pub architecture_comparison: Option<ArchitectureComparison>,
    pub projections: Vec<ProjectionSummary>,
    pub clusterings: Vec<ClusterSummary>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    /// `(path, sha256)` of every file whose content is reproducible.
    pub fn data_hashes(&self) -> Vec<(&str, &str)> {
        self.files
            .iter()
            .filter(|f| !f.timing)
            .map(|f| (f.path.as_str(), f.sha256.as_str()))
            .collect()
    }

    /// Re-hashes every listed file under `dir`; returns the paths that differ.
    pub fn verify(&self, dir: &Path) -> io::Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            if sha256_hex(&fs::read(dir.join(&f.path))?) != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files under one directory and removes them again unless the run
/// is committed.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<FileEntry>,
    committed: bool,
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self, PipelineError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            committed: false,
        })
    }

    fn write(&mut self, name: &str, content: &str, timing: bool) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|source| PipelineError::Io { path, source })?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
            bytes: content.len() as u64,
            timing,
        });
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(&f.path));
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_FILE));
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

struct Timer {
    times: Vec<StageTime>,
}

impl Timer {
    fn run<T>(&mut self, stage: String, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.times.push(StageTime {
            stage,
            ms: t.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

/// Rows kept for reduction and clustering: all of them, or a sorted
/// uniform subsample when there are more than `max_points`.
pub fn subsample_indices(n: usize, max_points: Option<usize>, seed: u64) -> Vec<usize> {
    match max_points {
        Some(m) if n > m => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = index::sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    }
}

fn file_name(prefix: &str, arch: Architecture, nt: NodeType, suffix: &str) -> String {
    format!("{prefix}_{}_{}{suffix}", arch.tag(), nt.tag())
}

pub fn projection_file(arch: Architecture, nt: NodeType, method: Method) -> String {
    file_name("proj", arch, nt, &format!("_{method}.csv"))
}

fn export_err(what: &str) -> impl FnOnce(ExportError) -> PipelineError + '_ {
    move |source| PipelineError::Export {
        what: what.to_string(),
        source,
    }
}

fn cluster_err(what: String) -> impl FnOnce(ClusterError) -> PipelineError {
    move |source| PipelineError::Cluster { what, source }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let cfg = config.effective();
    let mut timer = Timer { times: Vec::new() };

    let inst = timer.run("parse".into(), || {
        let text = fs::read_to_string(&cfg.input).map_err(ParseError::from)?;
        parse_mps_str(&text)
    });
    let inst = inst.map_err(|source| PipelineError::Parse {
        path: cfg.input.clone(),
        source,
    })?;
    let stats = instance_stats(&inst);

    let mut out = Outputs::open(&cfg.output_dir)?;
    let graph = timer.run("graph".into(), || build_bipartite_with(&inst, &cfg.graph));
    out.write("edges.csv", &export::edges_csv(&graph), false)?;
    out.write("sparsity.svg", &export::sparsity_svg(&inst), false)?;

    let mut training = Vec::new();
    let mut embeddings: Vec<EmbeddingSet> = Vec::new();
    let mut curves = Vec::new();
    for &arch in &cfg.architectures {
        let tc = TrainConfig {
            architecture: arch,
            ..cfg.train.clone()
        };
        let stage = timer.run(format!("train_{}", arch.tag()), || train_stage(&graph, &tc, None))?;
        for f in &stage.files {
            out.write(&f.name, &f.content, f.timing)?;
        }
        training.push(stage.summary);
        curves.push((arch, stage.output.curve));
        embeddings.push(stage.output.embeddings);
    }
    let series: Vec<(String, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|(a, c)| {
            let pts = c.losses.iter().enumerate().map(|(e, &l)| (e as f64, l)).collect();
            (a.tag().to_uppercase(), pts)
        })
        .collect();
    let loss_svg = export::line_chart_svg(
        "Training loss (BCE with logits)",
        "epoch",
        "loss",
        &series
            .iter()
            .map(|(n, p)| Series { name: n, points: p })
            .collect::<Vec<_>>(),
    )
    .map_err(export_err("loss.svg"))?;
    out.write("loss.svg", &loss_svg, false)?;

    let architecture_comparison = {
        let find = |a: Architecture| training.iter().find(|t| t.architecture == a).map(|t| t.final_loss);
        match (find(Architecture::Gcn), find(Architecture::Gat)) {
            (Some(g), Some(a)) => Some(ArchitectureComparison {
                gcn_final_loss: g,
                gat_final_loss: a,
                ratio: g / a,
            }),
            _ => None,
        }
    };

    let mut projections = Vec::new();
    let mut clusterings = Vec::new();
    for z in &embeddings {
        let arch = z.architecture;
        for nt in NodeType::BOTH {
            let full = nt.of(z);
            let keep = subsample_indices(full.rows(), cfg.max_points, cfg.seed);
            let x = if keep.len() == full.rows() {
                full.clone()
            } else {
                full.select_rows(&keep)
            };
            let n = x.rows();
            let tag = format!("{}_{}", arch.tag(), nt.tag());

            // Figure colouring: k-means on the embeddings themselves.
            let k_range = cfg.k_min.min(n)..=cfg.k_max.min(n);
            let clustered = timer.run(format!("cluster_{tag}"), || {
                cluster_stage(&x, &keep, arch, nt, cfg.figure_k, k_range, cfg.elbow_mode, cfg.seed)
            })?;
            for f in &clustered.files {
                out.write(&f.name, &f.content, false)?;
            }
            clusterings.push(clustered.summary);

            for method in Method::ALL {
                let p: Projection2D = timer
                    .run(format!("reduce_{tag}_{method}"), || {
                        reduce::reduce(&x, method, &cfg.tsne, &cfg.umap)
                    })
                    .map_err(|source| PipelineError::Reduce {
                        architecture: arch,
                        node_type: nt,
                        method,
                        source,
                    })?;
                let stage = projection_stage(&p, &keep, arch, nt, &clustered.figure.labels, cfg.figure_k, cfg.seed)?;
                for f in &stage.files {
                    out.write(&f.name, &f.content, false)?;
                }
                projections.push(stage.summary);
            }
        }
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        instance_name: inst.name.clone(),
        instance: stats,
        stage_times_ms: timer.times,
        training,
        architecture_comparison,
        projections,
        clusterings,
        files: out.files.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out.dir.join(MANIFEST_FILE);
    fs::write(&path, json + "\n").map_err(|source| PipelineError::Io { path, source })?;
    out.committed = true;
    Ok(manifest)
}

/// One output file, not yet written.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub content: String,
    pub timing: bool,
}

impl Artifact {
    fn data(name: String, content: String) -> Self {
        Self {
            name,
            content,
            timing: false,
        }
    }
}

pub struct TrainStage {
    pub output: TrainOutput,
    pub summary: TrainingSummary,
    /// `params_{a}.json`, `embeddings_{a}.csv`, `loss_{a}.csv`.
    pub files: Vec<Artifact>,
}

/// Trains one architecture, from `init` when given, and scores the final
/// embeddings on a fresh balanced pair sample.
pub fn train_stage(
    graph: &BipartiteGraph,
    tc: &TrainConfig,
    init: Option<ModelParams>,
) -> Result<TrainStage, PipelineError> {
    let arch = tc.architecture;
    let err = |source| PipelineError::Train {
        architecture: arch,
        source,
    };
    let output = match init {
        Some(p) => train::train_from(graph, tc, p),
        None => train::train(graph, tc),
    }
    .map_err(err)?;
    let metrics =
        train::evaluate_links(graph, &output.embeddings, train::negative_seed(tc.seed, tc.epochs)).map_err(err)?;
    let losses = &output.curve.losses;
    let summary = TrainingSummary {
        architecture: arch,
        epochs: tc.epochs,
        first_loss: losses[0],
        epoch5_loss: losses.get(5).copied(),
        final_loss: *losses.last().expect("epochs >= 1"),
        train_auc: metrics.auc,
        train_accuracy: metrics.accuracy,
    };
    let files = vec![
        Artifact::data(format!("params_{}.json", arch.tag()), output.params.to_json()),
        Artifact::data(
            format!("embeddings_{}.csv", arch.tag()),
            export::embeddings_csv(&output.embeddings),
        ),
        Artifact {
            name: format!("loss_{}.csv", arch.tag()),
            content: export::loss_csv(&output.curve),
            timing: true,
        },
    ];
    Ok(TrainStage { output, summary, files })
}

pub struct ClusterStage {
    /// k-means at the figure k, used to colour scatter plots.
    pub figure: ClusteringResult,
    pub scan: KScan,
    pub summary: ClusterSummary,
    /// `clusters_*.csv`, `scan_*.csv`, `elbow_*.svg` and, when any
    /// silhouette is defined, `silhouette_*.svg`.
    pub files: Vec<Artifact>,
}

/// Figure-k clustering plus elbow and silhouette scans of one embedding
/// matrix. `keep` maps rows of `x` to node indices.
#[allow(clippy::too_many_arguments)]
pub fn cluster_stage(
    x: &Matrix,
    keep: &[usize],
    arch: Architecture,
    nt: NodeType,
    figure_k: usize,
    k_range: RangeInclusive<usize>,
    mode: ElbowMode,
    seed: u64,
) -> Result<ClusterStage, PipelineError> {
    let tag = format!("{}_{}", arch.tag(), nt.tag());
    let cache = DistanceCache::new(x);
    let k = figure_k.min(x.rows());
    let figure = cluster::kmeans_cached(x, Some(&cache), k, seed).map_err(cluster_err(format!("{tag} k={k}")))?;
    let scan = cluster::scan_k(x, &cache, k_range, seed, mode).map_err(cluster_err(format!("{tag} scan")))?;

    let mut files = vec![Artifact::data(
        file_name("clusters", arch, nt, ".csv"),
        export::clusters_csv(nt, figure.k, &figure.labels, keep),
    )];
    let sil_at = |k: usize| {
        scan.silhouette
            .as_ref()
            .and_then(|s| s.curve.iter().find(|p| p.0 == k).map(|p| p.1))
    };
    let rows: Vec<_> = scan.elbow.curve.iter().map(|&(k, w)| (k, Some(w), sil_at(k))).collect();
    files.push(Artifact::data(
        file_name("scan", arch, nt, ".csv"),
        export::scan_csv(&rows),
    ));
    let as_points = |c: &[(usize, f64)]| c.iter().map(|&(k, v)| (k as f64, v)).collect::<Vec<_>>();
    let elbow_pts = as_points(&scan.elbow.curve);
    let name = format!("{} {}", arch.tag().to_uppercase(), nt.label());
    let svg = export::line_chart_svg(
        &format!("Elbow: {name} (suggested k={})", scan.elbow.suggested_k),
        "k",
        "WCSS",
        &[Series {
            name: "WCSS",
            points: &elbow_pts,
        }],
    )
    .map_err(export_err("elbow"))?;
    files.push(Artifact::data(file_name("elbow", arch, nt, ".svg"), svg));
    if let Some(s) = &scan.silhouette {
        let pts = as_points(&s.curve);
        let svg = export::line_chart_svg(
            &format!("Silhouette: {name} (best k={})", s.best_k),
            "k",
            "mean silhouette",
            &[Series {
                name: "silhouette",
                points: &pts,
            }],
        )
        .map_err(export_err("silhouette"))?;
        files.push(Artifact::data(file_name("silhouette", arch, nt, ".svg"), svg));
    }
    let summary = ClusterSummary {
        architecture: arch,
        node_type: nt,
        figure_k: figure.k,
        wcss: figure.wcss,
        mean_silhouette: figure.mean_silhouette,
        elbow_suggested_k: scan.elbow.suggested_k,
        silhouette_best_k: scan.silhouette.as_ref().map(|s| s.best_k),
    };
    Ok(ClusterStage {
        figure,
        scan,
        summary,
        files,
    })
}

pub struct ProjectionStage {
    pub summary: ProjectionSummary,
    /// `proj_*.csv` and the matching scatter `proj_*.svg`.
    pub files: Vec<Artifact>,
}

/// Projection CSV, scatter plot coloured by `labels`, and the 2D
/// figure-k silhouette.
#[allow(clippy::too_many_arguments)]
pub fn projection_stage(
    p: &Projection2D,
    keep: &[usize],
    arch: Architecture,
    nt: NodeType,
    labels: &[usize],
    figure_k: usize,
    seed: u64,
) -> Result<ProjectionStage, PipelineError> {
    let file = projection_file(arch, nt, p.method);
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let title = format!("{}: {} ({}, k={k})", nt.label(), arch.tag().to_uppercase(), p.method);
    let svg = export::scatter_svg(
        p,
        labels,
        &ScatterText {
            title: &title,
            node_type: nt,
        },
    )
    .map_err(export_err("scatter"))?;
    let sil = figure_silhouette_2d(&p.coords, figure_k, seed).map_err(cluster_err(format!("{file} 2d")))?;
    let files = vec![
        Artifact::data(file.clone(), export::projection_csv(nt, p, keep)),
        Artifact::data(file.replace(".csv", ".svg"), svg),
    ];
    Ok(ProjectionStage {
        summary: ProjectionSummary {
            file,
            architecture: arch,
            node_type: nt,
            method: p.method,
            n_points: p.coords.rows(),
            explained_variance_ratio: p.explained_variance_ratio,
            figure_k_silhouette_2d: sil,
        },
        files,
    })
}

/// Mean silhouette of k-means (k = `k`, clamped to the point count) on 2D
/// coordinates; `None` when fewer than two clusters are possible.
pub fn figure_silhouette_2d(coords: &Matrix, k: usize, seed: u64) -> Result<Option<f64>, ClusterError> {
    let k = k.min(coords.rows());
    if k < 2 {
        return Ok(None);
    }
    let cache = DistanceCache::new(coords);
    Ok(cluster::kmeans_cached(coords, Some(&cache), k, seed)?.mean_silhouette)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = PipelineConfig::default();
        assert!(c.validate().is_ok());
        c.architectures.clear();
        assert!(c.validate().is_err());
        c.architectures = vec![Architecture::Gat, Architecture::Gat];
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            k_min: 5,
            k_max: 3,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_files_parse() {
        let c = PipelineConfig::from_json(r#"{"seed": 4, "train": {"epochs": 7}, "architectures": ["gat"]}"#).unwrap();
        assert_eq!(
            (c.seed, c.train.epochs, c.architectures.as_slice()),
            (4, 7, &[Architecture::Gat][..])
        );
        assert_eq!(c.tsne, TsneConfig::default());
        let t = PipelineConfig::from_toml("seed = 2\nfigure_k = 6\n[umap]\nn_neighbors = 5\n").unwrap();
        assert_eq!((t.seed, t.figure_k, t.umap.n_neighbors), (2, 6, 5));
        assert!(PipelineConfig::from_json(r#"{"sed": 1}"#).is_err());
        let e = c.effective();
        assert_eq!((e.train.seed, e.tsne.seed, e.umap.seed), (4, 4, 4));
    }

    #[test]
    fn subsample_is_sorted_and_seeded() {
        assert_eq!(subsample_indices(5, None, 0), vec![0, 1, 2, 3, 4]);
        assert_eq!(subsample_indices(5, Some(10), 0).len(), 5);
        let s = subsample_indices(100, Some(10), 3);
        assert_eq!(s.len(), 10);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, subsample_indices(100, Some(10), 3));
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
