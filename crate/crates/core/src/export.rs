//! CSV and SVG writers (and the CSV readers the CLI needs to chain stages).

use std::fmt::Write as _;

use thiserror::Error;

use crate::gnn::{Architecture, EmbeddingSet};
use crate::graph::BipartiteGraph;
use crate::mps::{instance_stats, MilpInstance};
use crate::reduce::{Method, Projection2D};
use crate::tensor::Matrix;
use crate::train::LossCurve;

#[derive(Debug, Error, PartialEq)]
pub enum ExportError {
    #[error("no points to plot")]
    NoPoints,
    #[error("{labels} labels for {points} points")]
    LabelMismatch { labels: usize, points: usize },
    #[error("nothing to plot: every series is empty")]
    EmptySeries,
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Tableau 10. Cycles for k > 10.
pub const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

pub fn color(label: usize) -> &'static str {
    PALETTE[label % PALETTE.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Var,
    Con,
}

impl NodeType {
    pub const BOTH: [NodeType; 2] = [NodeType::Var, NodeType::Con];

    pub fn tag(self) -> &'static str {
        match self {
            NodeType::Var => "var",
            NodeType::Con => "con",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeType::Var => "VAR",
            NodeType::Con => "CON",
        }
    }

    pub fn of(self, z: &EmbeddingSet) -> &Matrix {
        match self {
            NodeType::Var => &z.z_var,
            NodeType::Con => &z.z_con,
        }
    }
}

impl std::str::FromStr for NodeType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "var" => Ok(NodeType::Var),
            "con" => Ok(NodeType::Con),
            other => Err(format!("unknown node type `{other}` (expected var or con)")),
        }
    }
}

fn csv_err(line: usize, msg: impl Into<String>) -> ExportError {
    ExportError::Csv { line, msg: msg.into() }
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T, ExportError> {
    field
        .trim()
        .parse()
        .map_err(|_| csv_err(line, format!("bad {what} `{field}`")))
}

// ---------------------------------------------------------------------------
// CSV

pub fn edges_csv(graph: &BipartiteGraph) -> String {
    let mut s = String::from("var_index,con_index,raw_coeff,weight\n");
    for e in &graph.edges {
        let _ = writeln!(s, "{},{},{},{}", e.var, e.con, e.raw_coeff, e.weight);
    }
    s
}

pub fn embeddings_csv(z: &EmbeddingSet) -> String {
    let d = z.z_var.cols();
    let mut s = String::from("node_type,node_index");
    for c in 0..d {
        let _ = write!(s, ",d{c}");
    }
    s.push('\n');
    for nt in NodeType::BOTH {
        for (i, row) in nt.of(z).row_iter().enumerate() {
            s.push_str(nt.tag());
            let _ = write!(s, ",{i}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    s
}

/// Reads an embeddings CSV back; rows must be grouped by node type and
/// numbered from zero.
pub fn parse_embeddings_csv(text: &str, architecture: Architecture) -> Result<EmbeddingSet, ExportError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| csv_err(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "node_type" || cols[1] != "node_index" {
        return Err(csv_err(1, "expected header node_type,node_index,d0,..."));
    }
    let d = cols.len() - 2;
    let mut var = Vec::new();
    let mut con = Vec::new();
    for (k, line) in lines {
        let ln = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != d + 2 {
            return Err(csv_err(ln, format!("expected {} fields, found {}", d + 2, f.len())));
        }
        let nt: NodeType = f[0].parse().map_err(|m: String| csv_err(ln, m))?;
        let idx: usize = parse_field(f[1], ln, "node_index")?;
        let target = match nt {
            NodeType::Var => &mut var,
            NodeType::Con => &mut con,
        };
        if idx != target.len() / d {
            return Err(csv_err(ln, format!("node_index {idx} out of sequence")));
        }
        for v in &f[2..] {
            target.push(parse_field::<f64>(v, ln, "value")?);
        }
    }
    Ok(EmbeddingSet {
        architecture,
        z_var: Matrix::from_vec(var.len() / d, d, var),
        z_con: Matrix::from_vec(con.len() / d, d, con),
        epochs: 0,
        seed: 0,
    })
}

/// `node_indices[i]` names the source row of projection row `i`.
pub fn projection_csv(node_type: NodeType, p: &Projection2D, node_indices: &[usize]) -> String {
    let mut s = String::from("node_type,node_index,x,y,method\n");
    for (row, &idx) in p.coords.row_iter().zip(node_indices) {
        let _ = writeln!(s, "{},{},{},{},{}", node_type.tag(), idx, row[0], row[1], p.method);
    }
    s
}

pub struct ProjectionRows {
    pub node_type: NodeType,
    pub method: Method,
    pub node_indices: Vec<usize>,
    pub coords: Matrix,
}

pub fn parse_projection_csv(text: &str) -> Result<ProjectionRows, ExportError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "node_type,node_index,x,y,method")) => {}
        _ => return Err(csv_err(1, "expected header node_type,node_index,x,y,method")),
    }
    let mut node_type = None;
    let mut method = None;
    let mut idx = Vec::new();
    let mut xy = Vec::new();
    for (k, line) in lines {
        let ln = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(csv_err(ln, "expected 5 fields"));
        }
        let nt: NodeType = f[0].parse().map_err(|m: String| csv_err(ln, m))?;
        let m: Method = f[4].parse().map_err(|m: String| csv_err(ln, m))?;
        if *node_type.get_or_insert(nt) != nt || *method.get_or_insert(m) != m {
            return Err(csv_err(ln, "mixed node types or methods in one file"));
        }
        idx.push(parse_field(f[1], ln, "node_index")?);
        xy.push(parse_field(f[2], ln, "x")?);
        xy.push(parse_field(f[3], ln, "y")?);
    }
    let (Some(node_type), Some(method)) = (node_type, method) else {
        return Err(ExportError::NoPoints);
    };
    Ok(ProjectionRows {
        node_type,
        method,
        coords: Matrix::from_vec(idx.len(), 2, xy),
        node_indices: idx,
    })
}

/// `epoch,loss,wall_ms`.
pub fn loss_csv(curve: &LossCurve) -> String {
    let mut s = String::from("epoch,loss,wall_ms\n");
    for (e, (l, t)) in curve.losses.iter().zip(&curve.wall_ms).enumerate() {
        let _ = writeln!(s, "{e},{l},{t:.3}");
    }
    s
}

pub fn clusters_csv(node_type: NodeType, k: usize, labels: &[usize], node_indices: &[usize]) -> String {
    let mut s = String::from("node_type,node_index,k,label\n");
    for (&idx, &l) in node_indices.iter().zip(labels) {
        let _ = writeln!(s, "{},{idx},{k},{l}", node_type.tag());
    }
    s
}

/// `k,wcss,mean_silhouette`; a missing value is left empty.
pub fn scan_csv(rows: &[(usize, Option<f64>, Option<f64>)]) -> String {
    let mut s = String::from("k,wcss,mean_silhouette\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for &(k, w, sil) in rows {
        let _ = writeln!(s, "{k},{},{}", opt(w), opt(sil));
    }
    s
}

// ---------------------------------------------------------------------------
// SVG

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg_open(s: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text class="title" x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Frame {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if hi > lo {
                let pad = (hi - lo) * 0.04;
                (lo - pad, hi + pad)
            } else {
                (lo - 1.0, lo + 1.0)
            }
        };
        let (x0, x1) = span(&mut { xs });
        let (y0, y1) = span(&mut { ys });
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, s: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(
            s,
            r#"<rect class="frame" x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        for k in 0..=4 {
            let f = f64::from(k) / 4.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            let _ = writeln!(
                s,
                r#"<text class="tick" x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
                self.px(xv),
                b + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text class="tick" x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
                l - 4.0,
                self.py(yv) + 3.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text class="axis-label" x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            HEIGHT - 14.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            r#"<text class="axis-label" x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0,
            escape(y_label)
        );
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(s: &mut String, entries: &[(String, &str)]) {
    let x = WIDTH - RIGHT + 16.0;
    for (i, (name, fill)) in entries.iter().enumerate() {
        let y = TOP + 8.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><rect x="{x}" y="{y:.1}" width="12" height="12" fill="{fill}"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            x + 18.0,
            y + 10.0,
            escape(name)
        );
    }
}

pub struct ScatterText<'a> {
    pub title: &'a str,
    pub node_type: NodeType,
}

/// Scatter plot of a projection, one colour per cluster label.
pub fn scatter_svg(p: &Projection2D, labels: &[usize], text: &ScatterText) -> Result<String, ExportError> {
    let n = p.coords.rows();
    if n == 0 {
        return Err(ExportError::NoPoints);
    }
    if labels.len() != n {
        return Err(ExportError::LabelMismatch {
            labels: labels.len(),
            points: n,
        });
    }
    let frame = Frame::fit(p.coords.row_iter().map(|r| r[0]), p.coords.row_iter().map(|r| r[1]));
    let mut s = String::new();
    svg_open(&mut s, WIDTH, HEIGHT, text.title);
    let method = match p.method {
        Method::Pca => "PCA",
        Method::Tsne => "t-SNE",
        Method::Umap => "UMAP",
    };
    frame.axes(
        &mut s,
        &format!("{method} 1 ({})", text.node_type.label()),
        &format!("{method} 2 ({})", text.node_type.label()),
    );
    s.push_str("<g class=\"points\">\n");
    for (row, &l) in p.coords.row_iter().zip(labels) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.75"/>"#,
            frame.px(row[0]),
            frame.py(row[1]),
            color(l)
        );
    }
    s.push_str("</g>\n");
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let entries: Vec<(String, &str)> = ids.iter().map(|&l| (format!("cluster {l}"), color(l))).collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Sparsity pattern: variables along x, constraints along y (top row
/// first), one mark per nonzero.
pub fn sparsity_svg(inst: &MilpInstance) -> String {
    let stats = instance_stats(inst);
    let (n_cols, n_rows) = (inst.matrix.n_cols().max(1), inst.matrix.n_rows().max(1));
    let plot_w = 720.0;
    let plot_h = (plot_w * n_rows as f64 / n_cols as f64).clamp(120.0, 720.0);
    let (left, top) = (56.0, 40.0);
    let (width, height) = (plot_w + left + 24.0, plot_h + top + 48.0);
    let cw = plot_w / n_cols as f64;
    let ch = plot_h / n_rows as f64;
    let mut s = String::new();
    svg_open(
        &mut s,
        width,
        height,
        &format!("nnz={}, density={:.2}%", stats.nnz, stats.density * 100.0),
    );
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{left}" y="{top}" width="{plot_w}" height="{plot_h:.1}" fill="none" stroke="black"/>"#
    );
    s.push_str("<g fill=\"#1f3b73\">\n");
    for &(row, col, _) in inst.matrix.entries() {
        let _ = writeln!(
            s,
            r#"<rect class="nz" x="{:.2}" y="{:.2}" width="{:.3}" height="{:.3}"/>"#,
            left + col as f64 * cw,
            top + row as f64 * ch,
            cw.max(0.6),
            ch.max(0.6)
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="{:.1}" y="{:.1}" text-anchor="middle">variables ({})</text>"#,
        left + plot_w / 2.0,
        height - 14.0,
        stats.n_vars
    );
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">constraints ({1})</text>"#,
        top + plot_h / 2.0,
        stats.n_cons
    );
    s.push_str("</svg>\n");
    s
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Line chart, one polyline per series, with a marker at each point of
/// short series.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String, ExportError> {
    let all = || series.iter().flat_map(|s| s.points.iter());
    if all().next().is_none() {
        return Err(ExportError::EmptySeries);
    }
    let frame = Frame::fit(all().map(|p| p.0), all().map(|p| p.1));
    let mut s = String::new();
    svg_open(&mut s, WIDTH, HEIGHT, title);
    frame.axes(&mut s, x_label, y_label);
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            color(i),
            pts.join(" ")
        );
        if ser.points.len() <= 40 {
            for &(x, y) in ser.points {
                let _ = writeln!(
                    s,
                    r#"<rect class="marker" x="{:.2}" y="{:.2}" width="4" height="4" fill="{}"/>"#,
                    frame.px(x) - 2.0,
                    frame.py(y) - 2.0,
                    color(i)
                );
            }
        }
    }
    let entries: Vec<(String, &str)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.to_string(), color(i)))
        .collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::MethodConfig;

    fn proj(points: &[[f64; 2]]) -> Projection2D {
        Projection2D {
            coords: Matrix::from_vec(points.len(), 2, points.iter().flatten().copied().collect()),
            method: Method::Pca,
            config: MethodConfig::Pca,
            explained_variance_ratio: None,
        }
    }

    const TEXT: ScatterText<'static> = ScatterText {
        title: "t",
        node_type: NodeType::Var,
    };

    #[test]
    fn scatter_structure() {
        let p = proj(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 3.0]]);
        let svg = scatter_svg(&p, &[0, 1, 0, 1], &TEXT).unwrap();
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 2);
        assert!(svg.contains("PCA 1 (VAR)"));
        assert_eq!(svg, scatter_svg(&p, &[0, 1, 0, 1], &TEXT).unwrap());
    }

    #[test]
    fn scatter_errors() {
        let err = scatter_svg(&proj(&[]), &[], &TEXT).unwrap_err();
        assert_eq!(err.to_string(), "no points to plot");
        assert!(matches!(
            scatter_svg(&proj(&[[0.0, 0.0]]), &[0, 1], &TEXT),
            Err(ExportError::LabelMismatch { .. })
        ));
    }

    #[test]
    fn single_nonzero_sparsity() {
        let inst =
            crate::mps::parse_mps_str("NAME t\nROWS\n N obj\n L c\nCOLUMNS\n x c 2\nRHS\n r c 1\nENDATA\n").unwrap();
        let svg = sparsity_svg(&inst);
        assert_eq!(svg.matches("class=\"nz\"").count(), 1);
        assert!(svg.contains("nnz=1, density=100.00%"));
    }

    #[test]
    fn embeddings_round_trip() {
        let z = EmbeddingSet {
            architecture: Architecture::Gat,
            z_var: Matrix::from_rows(&[vec![0.1, -2.5], vec![1e-17, 3.0]]),
            z_con: Matrix::from_rows(&[vec![7.0, 0.30000000000000004]]),
            epochs: 0,
            seed: 0,
        };
        let back = parse_embeddings_csv(&embeddings_csv(&z), Architecture::Gat).unwrap();
        assert_eq!(back, z);
    }

    #[test]
    fn projection_round_trip() {
        let p = proj(&[[0.5, -1.25], [1e10, 2.0]]);
        let rows = parse_projection_csv(&projection_csv(NodeType::Con, &p, &[4, 9])).unwrap();
        assert_eq!(rows.coords, p.coords);
        assert_eq!(rows.node_indices, vec![4, 9]);
        assert_eq!((rows.node_type, rows.method), (NodeType::Con, Method::Pca));
    }

    #[test]
    fn line_chart_needs_points() {
        assert_eq!(line_chart_svg("t", "x", "y", &[]), Err(ExportError::EmptySeries));
        let svg = line_chart_svg(
            "t",
            "x",
            "y",
            &[Series {
                name: "a",
                points: &[(0.0, 1.0), (1.0, 0.5)],
            }],
        )
        .unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
