//! Heterogeneous bipartite encoders.
//!
//! Both architectures share the same skeleton: a per-type linear input
//! projection followed by `n_layers` message-passing layers with ReLU in
//! between and no activation after the last layer.
//!
//! * GCN: `h_con' = h_con·W_self_con + Σ_i w_ij·(h_var_i·W_vc) + b_con`, and
//!   the symmetric update for variables over reverse edges.
//! * GAT: per head, `e_ij = leaky_relu(a_srcᵀ·W h_i + a_dstᵀ·W h_j + c·w_ij)`,
//!   `α = softmax_j(e)`, `out_j = Σ α_ij·W h_i`. Heads are concatenated on
//!   hidden layers and averaged on the last one.
//!
//! Parameters are stored as [`Params<Matrix>`]; the same structure over
//! [`Tensor`] handles drives the differentiable forward pass.

use std::collections::HashMap;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Tensor};
use crate::graph::{BipartiteGraph, CON_FEATURES, VAR_FEATURES};
use crate::tensor::Matrix;

pub const PARAMS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("parameters are for {found:?}, expected {expected:?}")]
    ArchitectureMismatch {
        expected: Architecture,
        found: Architecture,
    },
    #[error("parameter file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gcn,
    Gat,
}

impl Architecture {
    pub fn tag(self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::Gat => "gat",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Architecture::Gcn),
            "gat" => Ok(Architecture::Gat),
            other => Err(format!("unknown architecture '{other}' (expected gcn or gat)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_hidden: usize,
    pub d_out: usize,
    pub n_layers: usize,
    /// Attention heads per GAT layer; hidden head width is `d_hidden / n_heads`.
    pub n_heads: usize,
    pub leaky_relu_slope: f64,
    pub edge_coef_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_hidden: 64,
            d_out: 64,
            n_layers: 2,
            n_heads: 4,
            leaky_relu_slope: 0.2,
            edge_coef_init: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self, arch: Architecture) -> Result<(), GnnError> {
        if self.n_layers == 0 || self.d_hidden == 0 || self.d_out == 0 {
            return Err(GnnError::Config("layers and widths must be positive".into()));
        }
        if arch == Architecture::Gat {
            if self.n_heads == 0 {
                return Err(GnnError::Config("n_heads must be at least 1".into()));
            }
            if self.n_layers > 1 && self.d_hidden % self.n_heads != 0 {
                return Err(GnnError::Config(format!(
                    "d_hidden {} not divisible by n_heads {}",
                    self.d_hidden, self.n_heads
                )));
            }
        }
        Ok(())
    }

    fn layer_out(&self, layer: usize) -> usize {
        if layer + 1 == self.n_layers {
            self.d_out
        } else {
            self.d_hidden
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear<T> {
    pub weight: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnLayer<T> {
    pub self_var: T,
    pub self_con: T,
    pub var_to_con: T,
    pub con_to_var: T,
    pub bias_var: T,
    pub bias_con: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatHead<T> {
    pub weight: T,
    pub att_src: T,
    pub att_dst: T,
    /// Scalar multiplying the edge weight inside the attention logit.
    pub edge_coef: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatDirection<T> {
    pub heads: Vec<GatHead<T>>,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatLayer<T> {
    pub var_to_con: GatDirection<T>,
    pub con_to_var: GatDirection<T>,
    /// Heads averaged (last layer) instead of concatenated.
    pub average_heads: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layer<T> {
    Gcn(GcnLayer<T>),
    Gat(GatLayer<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    pub architecture: Architecture,
    pub config: ModelConfig,
    pub seed: u64,
    pub var_input: Linear<T>,
    pub con_input: Linear<T>,
    pub layers: Vec<Layer<T>>,
}

pub type ModelParams = Params<Matrix>;

impl<T> Params<T> {
    /// Visits every parameter in a fixed order.
    pub fn for_each(&self, f: &mut impl FnMut(&T)) {
        let linear = |l: &Linear<T>, f: &mut dyn FnMut(&T)| {
            f(&l.weight);
            f(&l.bias);
        };
        linear(&self.var_input, f);
        linear(&self.con_input, f);
        for layer in &self.layers {
            match layer {
                Layer::Gcn(g) => {
                    for t in [
                        &g.self_var,
                        &g.self_con,
                        &g.var_to_con,
                        &g.con_to_var,
                        &g.bias_var,
                        &g.bias_con,
                    ] {
                        f(t);
                    }
                }
                Layer::Gat(g) => {
                    for dir in [&g.var_to_con, &g.con_to_var] {
                        for h in &dir.heads {
                            for t in [&h.weight, &h.att_src, &h.att_dst, &h.edge_coef] {
                                f(t);
                            }
                        }
                        f(&dir.bias);
                    }
                }
            }
        }
    }

    /// Same order as [`Params::for_each`].
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        for l in [&mut self.var_input, &mut self.con_input] {
            f(&mut l.weight);
            f(&mut l.bias);
        }
        for layer in &mut self.layers {
            match layer {
                Layer::Gcn(g) => {
                    for t in [
                        &mut g.self_var,
                        &mut g.self_con,
                        &mut g.var_to_con,
                        &mut g.con_to_var,
                        &mut g.bias_var,
                        &mut g.bias_con,
                    ] {
                        f(t);
                    }
                }
                Layer::Gat(g) => {
                    for dir in [&mut g.var_to_con, &mut g.con_to_var] {
                        for h in &mut dir.heads {
                            for t in [&mut h.weight, &mut h.att_src, &mut h.att_dst, &mut h.edge_coef] {
                                f(t);
                            }
                        }
                        f(&mut dir.bias);
                    }
                }
            }
        }
    }

    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Params<U> {
        let linear = |l: &Linear<T>, f: &mut dyn FnMut(&T) -> U| Linear {
            weight: f(&l.weight),
            bias: f(&l.bias),
        };
        let var_input = linear(&self.var_input, f);
        let con_input = linear(&self.con_input, f);
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Gcn(g) => Layer::Gcn(GcnLayer {
                    self_var: f(&g.self_var),
                    self_con: f(&g.self_con),
                    var_to_con: f(&g.var_to_con),
                    con_to_var: f(&g.con_to_var),
                    bias_var: f(&g.bias_var),
                    bias_con: f(&g.bias_con),
                }),
                Layer::Gat(g) => {
                    let mut dir = |d: &GatDirection<T>| GatDirection {
                        heads: d
                            .heads
                            .iter()
                            .map(|h| GatHead {
                                weight: f(&h.weight),
                                att_src: f(&h.att_src),
                                att_dst: f(&h.att_dst),
                                edge_coef: f(&h.edge_coef),
                            })
                            .collect(),
                        bias: f(&d.bias),
                    };
                    let var_to_con = dir(&g.var_to_con);
                    let con_to_var = dir(&g.con_to_var);
                    Layer::Gat(GatLayer {
                        var_to_con,
                        con_to_var,
                        average_heads: g.average_heads,
                    })
                }
            })
            .collect();
        Params {
            architecture: self.architecture,
            config: self.config,
            seed: self.seed,
            var_input,
            con_input,
            layers,
        }
    }

    pub fn count(&self) -> usize {
        let mut n = 0;
        self.for_each(&mut |_| n += 1);
        n
    }
}

impl ModelParams {
    /// Glorot-uniform weights from a seeded generator, zero biases, edge
    /// coefficients at `config.edge_coef_init`.
    pub fn init(arch: Architecture, config: ModelConfig, seed: u64) -> Result<Self, GnnError> {
        config.validate(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect();
            Matrix::from_vec(rows, cols, data)
        };
        let d = config.d_hidden;
        let var_input = Linear {
            weight: glorot(VAR_FEATURES, d),
            bias: Matrix::zeros(1, d),
        };
        let con_input = Linear {
            weight: glorot(CON_FEATURES, d),
            bias: Matrix::zeros(1, d),
        };
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let out = config.layer_out(l);
            let layer = match arch {
                Architecture::Gcn => Layer::Gcn(GcnLayer {
                    self_var: glorot(d, out),
                    self_con: glorot(d, out),
                    var_to_con: glorot(d, out),
                    con_to_var: glorot(d, out),
                    bias_var: Matrix::zeros(1, out),
                    bias_con: Matrix::zeros(1, out),
                }),
                Architecture::Gat => {
                    let last = l + 1 == config.n_layers;
                    let head_dim = if last { out } else { out / config.n_heads };
                    let mut dir = || GatDirection {
                        heads: (0..config.n_heads)
                            .map(|_| GatHead {
                                weight: glorot(d, head_dim),
                                att_src: glorot(head_dim, 1),
                                att_dst: glorot(head_dim, 1),
                                edge_coef: Matrix::scalar(config.edge_coef_init),
                            })
                            .collect(),
                        bias: Matrix::zeros(1, out),
                    };
                    let var_to_con = dir();
                    let con_to_var = dir();
                    Layer::Gat(GatLayer {
                        var_to_con,
                        con_to_var,
                        average_heads: last,
                    })
                }
            };
            layers.push(layer);
        }
        Ok(Params {
            architecture: arch,
            config,
            seed,
            var_input,
            con_input,
            layers,
        })
    }

    /// Same shapes as [`ModelParams::init`], every entry zero.
    pub fn zeros(arch: Architecture, config: ModelConfig) -> Result<Self, GnnError> {
        let p = Self::init(arch, config, 0)?;
        Ok(p.map(&mut |m: &Matrix| Matrix::zeros(m.rows(), m.cols())))
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(&mut |m| ok &= m.is_finite());
        ok
    }

    pub fn norms(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each(&mut |m| out.push(m.frobenius_norm()));
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Versioned<'a> {
            format_version: u32,
            params: &'a ModelParams,
        }
        serde_json::to_string(&Versioned {
            format_version: PARAMS_FORMAT_VERSION,
            params: self,
        })
        .expect("parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, GnnError> {
        #[derive(Deserialize)]
        struct Versioned {
            format_version: u32,
            params: ModelParams,
        }
        let v: Versioned = serde_json::from_str(text).map_err(|e| GnnError::Format(e.to_string()))?;
        if v.format_version != PARAMS_FORMAT_VERSION {
            return Err(GnnError::Format(format!(
                "unsupported format_version {}",
                v.format_version
            )));
        }
        Ok(v.params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub architecture: Architecture,
    pub z_var: Matrix,
    pub z_con: Matrix,
    pub epochs: usize,
    pub seed: u64,
}

/// Graph structure recorded on a tape as constants.
pub struct GraphTensors {
    pub n_var: usize,
    pub n_con: usize,
    pub var_features: Tensor,
    pub con_features: Tensor,
    pub var_idx: Rc<[usize]>,
    pub con_idx: Rc<[usize]>,
    pub edge_weights: Tensor,
    ones: HashMap<usize, Tensor>,
}

impl GraphTensors {
    pub fn new(tape: &mut Tape, graph: &BipartiteGraph) -> Self {
        Self {
            n_var: graph.n_var,
            n_con: graph.n_con,
            var_features: tape.constant(graph.var_features.clone()),
            con_features: tape.constant(graph.con_features.clone()),
            var_idx: Rc::from(graph.var_indices()),
            con_idx: Rc::from(graph.con_indices()),
            edge_weights: tape.constant(Matrix::column(&graph.weights())),
            ones: HashMap::new(),
        }
    }

    fn ones_row(&mut self, tape: &mut Tape, width: usize) -> Tensor {
        *self
            .ones
            .entry(width)
            .or_insert_with(|| tape.constant(Matrix::filled(1, width, 1.0)))
    }

    /// Repeats an `E x 1` column across `width` columns.
    fn broadcast(&mut self, tape: &mut Tape, column: Tensor, width: usize) -> Result<Tensor, AutodiffError> {
        let ones = self.ones_row(tape, width);
        tape.matmul(column, ones)
    }
}

fn linear(tape: &mut Tape, x: Tensor, l: &Linear<Tensor>) -> Result<Tensor, AutodiffError> {
    let xw = tape.matmul(x, l.weight)?;
    tape.add(xw, l.bias)
}

pub fn gcn_layer_tape(
    tape: &mut Tape,
    g: &mut GraphTensors,
    h_var: Tensor,
    h_con: Tensor,
    p: &GcnLayer<Tensor>,
) -> Result<(Tensor, Tensor), AutodiffError> {
    let width = tape.value(p.var_to_con).cols();
    let w = g.broadcast(tape, g.edge_weights, width)?;

    let src = tape.matmul(h_var, p.var_to_con)?;
    let msg = tape.gather_rows(src, g.var_idx.clone())?;
    let msg = tape.mul(msg, w)?;
    let agg_con = tape.segment_sum(msg, g.con_idx.clone(), g.n_con)?;
    let own = tape.matmul(h_con, p.self_con)?;
    let con = tape.add(own, agg_con)?;
    let con = tape.add(con, p.bias_con)?;

    let src = tape.matmul(h_con, p.con_to_var)?;
    let msg = tape.gather_rows(src, g.con_idx.clone())?;
    let msg = tape.mul(msg, w)?;
    let agg_var = tape.segment_sum(msg, g.var_idx.clone(), g.n_var)?;
    let own = tape.matmul(h_var, p.self_var)?;
    let var = tape.add(own, agg_var)?;
    let var = tape.add(var, p.bias_var)?;
    Ok((var, con))
}

/// Output of one attention direction: node features and per-edge attention
/// (`E x heads`, one column per head).
pub struct AttentionOut {
    pub h_dst: Tensor,
    pub alpha: Vec<Tensor>,
}

#[allow(clippy::too_many_arguments)]
fn gat_direction(
    tape: &mut Tape,
    g: &mut GraphTensors,
    h_src: Tensor,
    h_dst: Tensor,
    src_idx: Rc<[usize]>,
    dst_idx: Rc<[usize]>,
    n_dst: usize,
    p: &GatDirection<Tensor>,
    average: bool,
    slope: f64,
) -> Result<AttentionOut, AutodiffError> {
    let mut outs = Vec::with_capacity(p.heads.len());
    let mut alphas = Vec::with_capacity(p.heads.len());
    for head in &p.heads {
        let xs = tape.matmul(h_src, head.weight)?;
        let xd = tape.matmul(h_dst, head.weight)?;
        let s_src = tape.matmul(xs, head.att_src)?;
        let s_dst = tape.matmul(xd, head.att_dst)?;
        let e_src = tape.gather_rows(s_src, src_idx.clone())?;
        let e_dst = tape.gather_rows(s_dst, dst_idx.clone())?;
        let edge_term = tape.matmul(g.edge_weights, head.edge_coef)?;
        let logits = tape.add(e_src, e_dst)?;
        let logits = tape.add(logits, edge_term)?;
        let logits = tape.leaky_relu(logits, slope);
        let alpha = tape.segment_softmax(logits, dst_idx.clone(), n_dst)?;
        let width = tape.value(xs).cols();
        let alpha_wide = g.broadcast(tape, alpha, width)?;
        let msg = tape.gather_rows(xs, src_idx.clone())?;
        let msg = tape.mul(msg, alpha_wide)?;
        outs.push(tape.segment_sum(msg, dst_idx.clone(), n_dst)?);
        alphas.push(alpha);
    }
    let combined = if average {
        let mut acc = outs[0];
        for &o in &outs[1..] {
            acc = tape.add(acc, o)?;
        }
        tape.scale(acc, 1.0 / outs.len() as f64)
    } else {
        tape.concat_cols(&outs)?
    };
    Ok(AttentionOut {
        h_dst: tape.add(combined, p.bias)?,
        alpha: alphas,
    })
}

/// Returns `(h_var', h_con', α_var→con, α_con→var)`.
pub fn gat_layer_tape(
    tape: &mut Tape,
    g: &mut GraphTensors,
    h_var: Tensor,
    h_con: Tensor,
    p: &GatLayer<Tensor>,
    slope: f64,
) -> Result<(Tensor, Tensor, Vec<Tensor>, Vec<Tensor>), AutodiffError> {
    let (var_idx, con_idx) = (g.var_idx.clone(), g.con_idx.clone());
    let n_con = g.n_con;
    let n_var = g.n_var;
    let to_con = gat_direction(
        tape,
        g,
        h_var,
        h_con,
        var_idx.clone(),
        con_idx.clone(),
        n_con,
        &p.var_to_con,
        p.average_heads,
        slope,
    )?;
    let to_var = gat_direction(
        tape,
        g,
        h_con,
        h_var,
        con_idx,
        var_idx,
        n_var,
        &p.con_to_var,
        p.average_heads,
        slope,
    )?;
    Ok((to_var.h_dst, to_con.h_dst, to_con.alpha, to_var.alpha))
}

/// Full encoder on a tape. Returns `(z_var, z_con)`.
pub fn forward(tape: &mut Tape, g: &mut GraphTensors, p: &Params<Tensor>) -> Result<(Tensor, Tensor), AutodiffError> {
    let mut h_var = linear(tape, g.var_features, &p.var_input)?;
    let mut h_con = linear(tape, g.con_features, &p.con_input)?;
    for (l, layer) in p.layers.iter().enumerate() {
        if l > 0 {
            h_var = tape.relu(h_var);
            h_con = tape.relu(h_con);
        }
        (h_var, h_con) = match layer {
            Layer::Gcn(gl) => gcn_layer_tape(tape, g, h_var, h_con, gl)?,
            Layer::Gat(gl) => {
                let (v, c, _, _) = gat_layer_tape(tape, g, h_var, h_con, gl, p.config.leaky_relu_slope)?;
                (v, c)
            }
        };
    }
    Ok((h_var, h_con))
}

/// Registers `params` on the tape as trainable leaves.
pub fn register_params(tape: &mut Tape, params: &ModelParams) -> Params<Tensor> {
    params.map(&mut |m: &Matrix| tape.param(m.clone()))
}

fn register_constants(tape: &mut Tape, params: &ModelParams) -> Params<Tensor> {
    params.map(&mut |m: &Matrix| tape.constant(m.clone()))
}

/// One GCN layer on plain matrices.
pub fn gcn_layer_forward(
    graph: &BipartiteGraph,
    h_var: &Matrix,
    h_con: &Matrix,
    layer: &GcnLayer<Matrix>,
) -> Result<(Matrix, Matrix), GnnError> {
    let mut tape = Tape::new();
    let mut g = GraphTensors::new(&mut tape, graph);
    let hv = tape.constant(h_var.clone());
    let hc = tape.constant(h_con.clone());
    let p = GcnLayer {
        self_var: tape.constant(layer.self_var.clone()),
        self_con: tape.constant(layer.self_con.clone()),
        var_to_con: tape.constant(layer.var_to_con.clone()),
        con_to_var: tape.constant(layer.con_to_var.clone()),
        bias_var: tape.constant(layer.bias_var.clone()),
        bias_con: tape.constant(layer.bias_con.clone()),
    };
    let (v, c) = gcn_layer_tape(&mut tape, &mut g, hv, hc, &p)?;
    Ok((tape.value(v).clone(), tape.value(c).clone()))
}

/// Result of one GAT layer on plain matrices, with the attention weights
/// (`E x heads`) for both directions.
#[derive(Debug, Clone)]
pub struct GatLayerOutput {
    pub h_var: Matrix,
    pub h_con: Matrix,
    pub alpha_var_to_con: Matrix,
    pub alpha_con_to_var: Matrix,
}

pub fn gat_layer_forward(
    graph: &BipartiteGraph,
    h_var: &Matrix,
    h_con: &Matrix,
    layer: &GatLayer<Matrix>,
    leaky_relu_slope: f64,
) -> Result<GatLayerOutput, GnnError> {
    let mut tape = Tape::new();
    let mut g = GraphTensors::new(&mut tape, graph);
    let hv = tape.constant(h_var.clone());
    let hc = tape.constant(h_con.clone());
    let mut constant = |m: &Matrix| tape.constant(m.clone());
    let mut dir = |d: &GatDirection<Matrix>| GatDirection {
        heads: d
            .heads
            .iter()
            .map(|h| GatHead {
                weight: constant(&h.weight),
                att_src: constant(&h.att_src),
                att_dst: constant(&h.att_dst),
                edge_coef: constant(&h.edge_coef),
            })
            .collect(),
        bias: constant(&d.bias),
    };
    let p = GatLayer {
        var_to_con: dir(&layer.var_to_con),
        con_to_var: dir(&layer.con_to_var),
        average_heads: layer.average_heads,
    };
    let (v, c, a_vc, a_cv) = gat_layer_tape(&mut tape, &mut g, hv, hc, &p, leaky_relu_slope)?;
    let stack = |tape: &mut Tape, cols: &[Tensor]| tape.concat_cols(cols).map(|t| tape.value(t).clone());
    Ok(GatLayerOutput {
        h_var: tape.value(v).clone(),
        h_con: tape.value(c).clone(),
        alpha_var_to_con: stack(&mut tape, &a_vc)?,
        alpha_con_to_var: stack(&mut tape, &a_cv)?,
    })
}

/// Runs the encoder without recording gradients.
pub fn encode(graph: &BipartiteGraph, params: &ModelParams) -> Result<EmbeddingSet, GnnError> {
    encode_checked(graph, params, params.architecture)
}

/// Like [`encode`], rejecting parameters of a different architecture.
pub fn encode_checked(
    graph: &BipartiteGraph,
    params: &ModelParams,
    expected: Architecture,
) -> Result<EmbeddingSet, GnnError> {
    if params.architecture != expected {
        return Err(GnnError::ArchitectureMismatch {
            expected,
            found: params.architecture,
        });
    }
    params.config.validate(params.architecture)?;
    let mut tape = Tape::new();
    let mut g = GraphTensors::new(&mut tape, graph);
    let p = register_constants(&mut tape, params);
    let (z_var, z_con) = forward(&mut tape, &mut g, &p)?;
    Ok(EmbeddingSet {
        architecture: params.architecture,
        z_var: tape.value(z_var).clone(),
        z_con: tape.value(z_con).clone(),
        epochs: 0,
        seed: params.seed,
    })
}
