//! `milp-isa`: MILP instance space analysis from the command line.
//!
//! Exit codes: 0 success, 1 usage, 2 parse error, 3 numeric failure, 4 I/O.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use milp_isa::cluster::{self, ElbowMode};
use milp_isa::export::{self, NodeType};
use milp_isa::gnn::{Architecture, EmbeddingSet, ModelParams};
use milp_isa::graph::{build_bipartite_with, GraphOptions};
use milp_isa::mps::{instance_stats, parse_mps_str, write_mps, MilpInstance};
use milp_isa::pipeline::{self, Artifact, PipelineConfig, PipelineError, MANIFEST_FILE};
use milp_isa::reduce::{self, Method};
use milp_isa::synth::generate_set_partitioning;
use milp_isa::train::TrainConfig;

#[derive(Parser)]
#[command(
    name = "milp-isa",
    version,
    about = "Instance space analysis of MILP formulations via GNN embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print instance statistics of an MPS file.
    Parse {
        input: PathBuf,
        /// Print JSON instead of a summary line.
        #[arg(long)]
        json: bool,
    },
    /// Write the bipartite edge list and the sparsity plot.
    Graph {
        input: PathBuf,
        #[arg(short, long, default_value = "out")]
        output_dir: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Train one encoder; writes parameters, embeddings and the loss curve.
    Train {
        input: PathBuf,
        #[arg(short, long, default_value = "out")]
        output_dir: PathBuf,
        #[arg(long, default_value = "gcn")]
        arch: Architecture,
        /// Continue from a saved parameter file.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Project an embeddings CSV to 2D.
    Reduce {
        embeddings: PathBuf,
        #[arg(short, long, default_value = "out")]
        output_dir: PathBuf,
        #[command(flatten)]
        select: SelectArgs,
        /// pca, tsne, umap or all.
        #[arg(long, default_value = "all")]
        method: String,
        /// k of the k-means colouring.
        #[arg(long, default_value_t = cluster::FIGURE_K)]
        figure_k: usize,
        #[command(flatten)]
        reduce: ReduceArgs,
    },
    /// k-means at the figure k plus elbow and silhouette scans of an
    /// embeddings CSV.
    Cluster {
        embeddings: PathBuf,
        #[arg(short, long, default_value = "out")]
        output_dir: PathBuf,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Full pipeline: parse, train, reduce, cluster, export, manifest.
    Run(RunArgs),
    /// Write a synthetic set-partitioning instance as MPS.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 426)]
        flights: usize,
        #[arg(long, default_value_t = 7195)]
        pairings: usize,
        /// Output file; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct FeatureArgs {
    /// Skip feature standardization.
    #[arg(long)]
    raw_features: bool,
    #[arg(long)]
    bound_clamp: Option<f64>,
}

impl FeatureArgs {
    fn apply(&self, g: &mut GraphOptions) {
        if self.raw_features {
            g.standardize = false;
        }
        if let Some(c) = self.bound_clamp {
            g.bound_clamp = c;
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    d_hidden: Option<usize>,
    #[arg(long)]
    d_out: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    /// Reuse one negative sample for every epoch.
    #[arg(long)]
    fixed_negatives: bool,
}

impl TrainArgs {
    fn apply(&self, t: &mut TrainConfig) {
        set(&mut t.epochs, self.epochs);
        set(&mut t.learning_rate, self.lr);
        set(&mut t.model.d_hidden, self.d_hidden);
        set(&mut t.model.d_out, self.d_out);
        set(&mut t.model.n_layers, self.layers);
        set(&mut t.model.n_heads, self.heads);
        if self.fixed_negatives {
            t.resample_negatives_each_epoch = false;
        }
    }
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    tsne_iterations: Option<usize>,
    #[arg(long)]
    tsne_lr: Option<f64>,
    #[arg(long)]
    umap_neighbors: Option<usize>,
    #[arg(long)]
    min_dist: Option<f64>,
    #[arg(long)]
    umap_epochs: Option<usize>,
}

impl ReduceArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        set(&mut c.tsne.perplexity, self.perplexity);
        set(&mut c.tsne.iterations, self.tsne_iterations);
        set(&mut c.tsne.learning_rate, self.tsne_lr);
        set(&mut c.umap.n_neighbors, self.umap_neighbors);
        set(&mut c.umap.min_dist, self.min_dist);
        set(&mut c.umap.epochs, self.umap_epochs);
    }
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    figure_k: Option<usize>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// independent or nested.
    #[arg(long)]
    elbow_mode: Option<ElbowMode>,
}

impl ScanArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        set(&mut c.figure_k, self.figure_k);
        set(&mut c.k_min, self.k_min);
        set(&mut c.k_max, self.k_max);
        set(&mut c.elbow_mode, self.elbow_mode);
    }
}

/// Which rows of an embeddings CSV to use.
#[derive(Args)]
struct SelectArgs {
    /// var or con.
    #[arg(long, default_value = "var")]
    node_type: NodeType,
    /// Taken from an `embeddings_<arch>.csv` file name when absent.
    #[arg(long)]
    arch: Option<Architecture>,
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// MPS file; may instead come from the config file.
    input: Option<PathBuf>,
    /// JSON or TOML pipeline configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Comma-separated subset of gcn,gat.
    #[arg(long, value_delimiter = ',')]
    arch: Option<Vec<Architecture>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_points: Option<usize>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    reduce: ReduceArgs,
    #[command(flatten)]
    scan: ScanArgs,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: 4,
            message: format!("[io] {}: {e}", path.display()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Parse { input, json } => cmd_parse(&input, json),
        Command::Graph {
            input,
            output_dir,
            features,
        } => cmd_graph(&input, &output_dir, &features),
        Command::Train {
            input,
            output_dir,
            arch,
            init,
            seed,
            features,
            train,
        } => cmd_train(&input, &output_dir, arch, init.as_deref(), seed, &features, &train),
        Command::Reduce {
            embeddings,
            output_dir,
            select,
            method,
            figure_k,
            reduce,
        } => cmd_reduce(&embeddings, &output_dir, &select, &method, figure_k, &reduce),
        Command::Cluster {
            embeddings,
            output_dir,
            select,
            scan,
        } => cmd_cluster(&embeddings, &output_dir, &select, &scan),
        Command::Run(args) => cmd_run(&args),
        Command::Gen {
            seed,
            flights,
            pairings,
            output,
        } => cmd_gen(seed, flights, pairings, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_instance(path: &Path) -> Result<MilpInstance, Failure> {
    let parse = |source| PipelineError::Parse {
        path: path.to_path_buf(),
        source,
    };
    let text = fs::read_to_string(path).map_err(|e| parse(e.into()))?;
    Ok(parse_mps_str(&text).map_err(parse)?)
}

/// Writes every artifact, or none if the directory cannot be created.
fn write_all(dir: &Path, files: &[Artifact]) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    for f in files {
        let path = dir.join(&f.name);
        fs::write(&path, &f.content).map_err(|e| Failure::io(&path, e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_parse(input: &Path, json: bool) -> CliResult {
    let inst = read_instance(input)?;
    let stats = instance_stats(&inst);
    if json {
        let v = serde_json::json!({ "name": inst.name, "stats": stats });
        println!("{}", serde_json::to_string_pretty(&v).expect("stats serialize"));
    } else {
        println!("{}: {stats}", inst.name);
    }
    Ok(())
}

fn graph_options(features: &FeatureArgs) -> GraphOptions {
    let mut g = PipelineConfig::default().graph;
    features.apply(&mut g);
    g
}

fn cmd_graph(input: &Path, out: &Path, features: &FeatureArgs) -> CliResult {
    let inst = read_instance(input)?;
    let graph = build_bipartite_with(&inst, &graph_options(features));
    println!(
        "{} var nodes, {} con nodes, {} edges",
        graph.n_var,
        graph.n_con,
        graph.n_edges()
    );
    write_all(
        out,
        &[
            Artifact {
                name: "edges.csv".into(),
                content: export::edges_csv(&graph),
                timing: false,
            },
            Artifact {
                name: "sparsity.svg".into(),
                content: export::sparsity_svg(&inst),
                timing: false,
            },
        ],
    )
}

fn cmd_train(
    input: &Path,
    out: &Path,
    arch: Architecture,
    init: Option<&Path>,
    seed: u64,
    features: &FeatureArgs,
    args: &TrainArgs,
) -> CliResult {
    let mut tc = TrainConfig {
        architecture: arch,
        seed,
        ..TrainConfig::default()
    };
    let init = match init {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            let p = ModelParams::from_json(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            tc.model = p.config;
            Some(p)
        }
        None => None,
    };
    args.apply(&mut tc);
    tc.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let inst = read_instance(input)?;
    let graph = build_bipartite_with(&inst, &graph_options(features));
    let stage = pipeline::train_stage(&graph, &tc, init)?;
    let s = &stage.summary;
    println!(
        "{}: loss {:.4} -> {:.4} over {} epochs, train AUC {:.4}, accuracy {:.4}",
        arch.tag(),
        s.first_loss,
        s.final_loss,
        s.epochs,
        s.train_auc,
        s.train_accuracy
    );
    write_all(out, &stage.files)
}

/// Reads the selected node type of an embeddings CSV, subsampled, with the
/// node index of each kept row.
fn load_embeddings(
    path: &Path,
    select: &SelectArgs,
) -> Result<(Architecture, milp_isa::tensor::Matrix, Vec<usize>), Failure> {
    let arch = match select.arch {
        Some(a) => a,
        None => path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.strip_prefix("embeddings_"))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Failure::usage("cannot infer the architecture from the file name; pass --arch"))?,
    };
    if select.max_points.is_some_and(|m| m < 4) {
        return Err(Failure::usage("max_points must be at least 4"));
    }
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let z: EmbeddingSet = export::parse_embeddings_csv(&text, arch).map_err(|e| Failure {
        code: 2,
        message: format!("[parse] {}: {e}", path.display()),
    })?;
    let full = select.node_type.of(&z);
    let keep = pipeline::subsample_indices(full.rows(), select.max_points, select.seed);
    let x = if keep.len() == full.rows() {
        full.clone()
    } else {
        full.select_rows(&keep)
    };
    Ok((arch, x, keep))
}

fn cmd_reduce(
    path: &Path,
    out: &Path,
    select: &SelectArgs,
    method: &str,
    figure_k: usize,
    args: &ReduceArgs,
) -> CliResult {
    let methods: Vec<Method> = if method.eq_ignore_ascii_case("all") {
        Method::ALL.to_vec()
    } else {
        vec![method.parse().map_err(Failure::usage)?]
    };
    if figure_k == 0 {
        return Err(Failure::usage("figure_k must be at least 1"));
    }
    let mut cfg = PipelineConfig::default();
    args.apply(&mut cfg);
    cfg.seed = select.seed;
    let cfg = cfg.effective();
    let (arch, x, keep) = load_embeddings(path, select)?;
    let nt = select.node_type;
    let k = figure_k.min(x.rows());
    let labels = cluster::kmeans(&x, k, select.seed)
        .map_err(|source| PipelineError::Cluster {
            what: format!("k={k}"),
            source,
        })?
        .labels;
    let mut files = Vec::new();
    for method in methods {
        let p = reduce::reduce(&x, method, &cfg.tsne, &cfg.umap).map_err(|source| PipelineError::Reduce {
            architecture: arch,
            node_type: nt,
            method,
            source,
        })?;
        let stage = pipeline::projection_stage(&p, &keep, arch, nt, &labels, figure_k, select.seed)?;
        if let Some((a, b)) = stage.summary.explained_variance_ratio {
            println!("{method}: explained variance ratio {a:.4}, {b:.4}");
        }
        if let Some(s) = stage.summary.figure_k_silhouette_2d {
            println!("{method}: 2D silhouette at k={k} {s:.4}");
        }
        files.extend(stage.files);
    }
    write_all(out, &files)
}

fn cmd_cluster(path: &Path, out: &Path, select: &SelectArgs, args: &ScanArgs) -> CliResult {
    let mut cfg = PipelineConfig::default();
    args.apply(&mut cfg);
    if cfg.figure_k == 0 || cfg.k_min == 0 || cfg.k_min > cfg.k_max {
        return Err(Failure::usage(format!(
            "invalid k settings: figure_k {}, range {}..={}",
            cfg.figure_k, cfg.k_min, cfg.k_max
        )));
    }
    let (arch, x, keep) = load_embeddings(path, select)?;
    let n = x.rows();
    let hi = cfg.k_max.min(n);
    let stage = pipeline::cluster_stage(
        &x,
        &keep,
        arch,
        select.node_type,
        cfg.figure_k,
        cfg.k_min.min(hi)..=hi,
        cfg.elbow_mode,
        select.seed,
    )?;
    let s = &stage.summary;
    match s.mean_silhouette {
        Some(m) => println!("k={}: WCSS {:.6}, mean silhouette {m:.4}", s.figure_k, s.wcss),
        None => println!("k={}: WCSS {:.6}, silhouette undefined", s.figure_k, s.wcss),
    }
    println!("elbow suggests k={}", s.elbow_suggested_k);
    match s.silhouette_best_k {
        Some(k) => println!("silhouette peaks at k={k}"),
        None => println!("no k in range has a defined silhouette"),
    }
    write_all(out, &stage.files)
}

fn cmd_run(args: &RunArgs) -> CliResult {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path).map_err(Failure::usage)?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.input, args.input.clone());
    set(&mut cfg.output_dir, args.output_dir.clone());
    set(&mut cfg.architectures, args.arch.clone());
    set(&mut cfg.seed, args.seed);
    if args.max_points.is_some() {
        cfg.max_points = args.max_points;
    }
    args.features.apply(&mut cfg.graph);
    args.train.apply(&mut cfg.train);
    args.reduce.apply(&mut cfg);
    args.scan.apply(&mut cfg);
    if args.print_config {
        let json = serde_json::to_string_pretty(&cfg.effective()).expect("config serializes");
        println!("{json}");
        return Ok(());
    }
    if cfg.input.as_os_str().is_empty() {
        return Err(Failure::usage(
            "no input: pass an MPS path or set `input` in the config",
        ));
    }
    let m = pipeline::run_pipeline(&cfg)?;
    println!("{}: {}", m.instance_name, m.instance);
    for t in &m.training {
        println!(
            "{}: loss {:.4} -> {:.4}, train AUC {:.4}",
            t.architecture.tag(),
            t.first_loss,
            t.final_loss,
            t.train_auc
        );
    }
    if let Some(c) = &m.architecture_comparison {
        println!("GCN/GAT final loss ratio {:.4}", c.ratio);
    }
    println!(
        "{} files and {MANIFEST_FILE} written to {}",
        m.files.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_gen(seed: u64, flights: usize, pairings: usize, output: Option<&Path>) -> CliResult {
    let inst = generate_set_partitioning(seed, flights, pairings).map_err(|e| Failure::usage(e.to_string()))?;
    let text = write_mps(&inst);
    match output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
            }
            fs::write(path, text).map_err(|e| Failure::io(path, e))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
