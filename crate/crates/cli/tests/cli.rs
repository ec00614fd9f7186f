use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn milp_isa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_milp-isa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 40-flight, 160-pairing instance written by `gen`.
fn small_instance(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.mps");
    let o = milp_isa(&[
        "gen",
        "--seed",
        "9",
        "--flights",
        "40",
        "--pairings",
        "160",
        "-o",
        s(&path),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    path
}

const SMALL_RUN: &[&str] = &[
    "--epochs",
    "8",
    "--d-hidden",
    "16",
    "--d-out",
    "8",
    "--heads",
    "2",
    "--perplexity",
    "8",
    "--tsne-iterations",
    "250",
    "--umap-neighbors",
    "8",
    "--umap-epochs",
    "50",
    "--k-max",
    "6",
    "--seed",
    "3",
];

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&milp_isa(&[])), 1);
    assert_eq!(code(&milp_isa(&["frobnicate"])), 1);
    assert_eq!(code(&milp_isa(&["train", "x.mps", "--arch", "mlp"])), 1);
    assert_eq!(code(&milp_isa(&["run", "x.mps", "--elbow-mode", "sideways"])), 1);
    let o = milp_isa(&["run"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no input"));
    let o = milp_isa(&["run", "x.mps", "--k-min", "5", "--k-max", "3"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn help_and_version_exit_0() {
    let o = milp_isa(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["parse", "graph", "train", "reduce", "cluster", "run", "gen"] {
        assert!(stdout(&o).contains(sub), "help lacks {sub}");
    }
    assert_eq!(code(&milp_isa(&["--version"])), 0);
}

#[test]
fn parse_reports_stats_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mps = small_instance(dir.path());
    let o = milp_isa(&["parse", s(&mps)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("vars=160 (integer 160) cons=40"), "{}", stdout(&o));
    let o = milp_isa(&["parse", s(&mps), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stats"]["n_vars"], 160);
    assert_eq!(v["stats"]["n_cons"], 40);

    let o = milp_isa(&["parse", s(&dir.path().join("missing.mps"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("[parse]"));

    let bad = dir.path().join("bad.mps");
    fs::write(&bad, "NAME X\nROWS\n N OBJ\nCOLUMNS\n x OBJ abc\nENDATA\n").unwrap();
    let o = milp_isa(&["parse", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}

#[test]
fn gen_to_stdout_is_deterministic() {
    let a = milp_isa(&["gen", "--seed", "7", "--flights", "20", "--pairings", "120"]);
    let b = milp_isa(&["gen", "--seed", "7", "--flights", "20", "--pairings", "120"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("NAME"));
    assert_eq!(code(&milp_isa(&["gen", "--flights", "10", "--pairings", "5"])), 1);
}

#[test]
fn graph_writes_edges_and_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    let mps = small_instance(dir.path());
    let out = dir.path().join("g");
    let o = milp_isa(&["graph", s(&mps), "-o", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let edges = fs::read_to_string(out.join("edges.csv")).unwrap();
    assert_eq!(edges.lines().count(), 1 + 620);
    let svg = fs::read_to_string(out.join("sparsity.svg")).unwrap();
    assert_eq!(svg.matches("class=\"nz\"").count(), 620);

    // An existing file where the output directory should go.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = milp_isa(&["graph", s(&mps), "-o", s(&blocker.join("sub"))]);
    assert_eq!(code(&o), 4);
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mps = small_instance(dir.path());
    let t = dir.path().join("t");
    let o = milp_isa(&[
        "train",
        s(&mps),
        "-o",
        s(&t),
        "--arch",
        "gcn",
        "--epochs",
        "10",
        "--d-hidden",
        "16",
        "--d-out",
        "8",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("train AUC"));
    for f in ["params_gcn.json", "embeddings_gcn.csv", "loss_gcn.csv"] {
        assert!(t.join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_to_string(t.join("loss_gcn.csv")).unwrap().lines().count(), 11);

    let t2 = dir.path().join("t2");
    let params = t.join("params_gcn.json");
    let o = milp_isa(&["train", s(&mps), "-o", s(&t2), "--epochs", "3", "--init", s(&params)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = milp_isa(&["train", s(&mps), "-o", s(&t2), "--arch", "gat", "--init", s(&params)]);
    assert_eq!(code(&o), 1, "architecture mismatch is a usage error");

    let emb = t.join("embeddings_gcn.csv");
    let r = dir.path().join("r");
    let o = milp_isa(&[
        "reduce",
        s(&emb),
        "-o",
        s(&r),
        "--node-type",
        "con",
        "--method",
        "tsne",
        "--perplexity",
        "8",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(r.join("proj_gcn_con_tsne.csv")).unwrap();
    assert_eq!(csv.lines().count(), 41);
    assert!(r.join("proj_gcn_con_tsne.svg").is_file());

    let o = milp_isa(&["reduce", s(&emb), "-o", s(&r), "--node-type", "con", "--method", "tsne"]);
    assert_eq!(code(&o), 1, "perplexity 30 is too large for 40 points");

    let c = dir.path().join("c");
    let o = milp_isa(&["cluster", s(&emb), "-o", s(&c), "--k-max", "6", "--max-points", "100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("elbow suggests"));
    let clusters = fs::read_to_string(c.join("clusters_gcn_var.csv")).unwrap();
    assert_eq!(clusters.lines().count(), 101);
    assert_eq!(
        fs::read_to_string(c.join("scan_gcn_var.csv")).unwrap().lines().count(),
        6
    );

    let renamed = dir.path().join("z.csv");
    fs::copy(&emb, &renamed).unwrap();
    assert_eq!(code(&milp_isa(&["cluster", s(&renamed), "-o", s(&c)])), 1);
    assert_eq!(
        code(&milp_isa(&["cluster", s(&renamed), "-o", s(&c), "--arch", "gcn"])),
        0
    );
}

#[test]
fn run_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(
        &cfg,
        "input = \"a.mps\"\nseed = 5\nfigure_k = 7\n[train]\nepochs = 12\n",
    )
    .unwrap();
    let o = milp_isa(&["run", "--config", s(&cfg), "--seed", "9", "--print-config"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["input"], "a.mps");
    assert_eq!(v["seed"], 9);
    assert_eq!(v["train"]["seed"], 9);
    assert_eq!(v["umap"]["seed"], 9);
    assert_eq!(v["figure_k"], 7);
    assert_eq!(v["train"]["epochs"], 12);
    assert_eq!(v["graph"]["standardize"], true);

    let json = dir.path().join("cfg.json");
    fs::write(&json, r#"{"seed": 1, "unknown_field": 2}"#).unwrap();
    assert_eq!(code(&milp_isa(&["run", "--config", s(&json), "--print-config"])), 1);
}

#[test]
fn run_produces_full_inventory() {
    let dir = tempfile::tempdir().unwrap();
    let mps = small_instance(dir.path());
    let out = dir.path().join("out");
    let mut args = vec!["run", s(&mps), "-o", s(&out)];
    args.extend_from_slice(SMALL_RUN);
    let o = milp_isa(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("GCN/GAT final loss ratio"));
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let count = |p: &str, suffix: &str| names.iter().filter(|n| n.starts_with(p) && n.ends_with(suffix)).count();
    assert_eq!(count("proj_", ".csv"), 12);
    assert_eq!(count("proj_", ".svg"), 12);
    assert_eq!(count("loss_", ".csv"), 2);
    assert!(names.contains(&"manifest.json".to_string()));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), names.len() - 1);
}

#[test]
fn failing_run_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let mps = small_instance(dir.path());
    let out = dir.path().join("out");
    let mut args = vec!["run", s(&mps), "-o", s(&out)];
    args.extend_from_slice(SMALL_RUN);
    let at = args.iter().position(|&a| a == "--perplexity").unwrap();
    args[at + 1] = "30";
    let o = milp_isa(&args);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("[reduce]"));
    assert!(!out.exists());

    let o = milp_isa(&["run", s(&dir.path().join("nope.mps")), "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}
