//! Self-supervised link prediction: true `(var, con)` edges are positives,
//! an equal number of uniformly drawn non-edges are negatives, the score of
//! a pair is the dot product of its two embeddings, and the encoder is
//! trained full-batch with Adam on the mean BCE-with-logits loss.

use std::collections::HashSet;
use std::rc::Rc;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{bce_term, shifted_mean, AutodiffError, Tape, Tensor};
use crate::gnn::{self, Architecture, EmbeddingSet, GnnError, GraphTensors, ModelConfig, ModelParams};
use crate::graph::BipartiteGraph;
use crate::tensor::{dot, Matrix};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no negative pairs exist: every (var, con) pair is an edge")]
    NoNegatives,
    #[error("requested {requested} negatives but only {available} non-edges exist")]
    TooManyNegatives { requested: usize, available: usize },
    #[error("pair {index} = ({var}, {con}) is out of range")]
    PairOutOfRange { index: usize, var: usize, con: usize },
    #[error("logits and labels differ in length ({logits} vs {labels})")]
    LengthMismatch { logits: usize, labels: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite loss {loss} at epoch {epoch}; parameter norms {param_norms:?}")]
    NonFiniteLoss {
        epoch: usize,
        loss: f64,
        param_norms: Vec<f64>,
    },
    #[error(transparent)]
    Model(#[from] GnnError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub model: ModelConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub resample_negatives_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Gcn,
            model: ModelConfig::default(),
            epochs: 100,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            resample_negatives_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainError::Config("Adam betas must lie in [0, 1)".into()));
        }
        self.model.validate(self.architecture)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    /// Mean loss per epoch, measured before that epoch's update.
    pub losses: Vec<f64>,
    pub wall_ms: Vec<f64>,
}

impl LossCurve {
    pub fn first(&self) -> Option<f64> {
        self.losses.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.losses.last().copied()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub embeddings: EmbeddingSet,
    pub curve: LossCurve,
}

fn pair_key(var: usize, con: usize, n_con: usize) -> u64 {
    (var * n_con + con) as u64
}

fn edge_set(graph: &BipartiteGraph) -> HashSet<u64> {
    graph
        .edges
        .iter()
        .map(|e| pair_key(e.var, e.con, graph.n_con))
        .collect()
}

/// Draws `m` distinct `(var, con)` pairs that are not edges, uniformly.
pub fn sample_negatives(graph: &BipartiteGraph, m: usize, seed: u64) -> Result<Vec<(usize, usize)>, TrainError> {
    let edges = edge_set(graph);
    sample_negatives_from(graph, &edges, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn sample_negatives_from(
    graph: &BipartiteGraph,
    edges: &HashSet<u64>,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>, TrainError> {
    let cells = graph.n_var * graph.n_con;
    let available = cells - edges.len();
    if available == 0 {
        return Err(TrainError::NoNegatives);
    }
    if m > available {
        return Err(TrainError::TooManyNegatives {
            requested: m,
            available,
        });
    }
    let n_con = graph.n_con;
    if 2 * m > available {
        // Dense regime: enumerate the complement and subsample it.
        let non_edges: Vec<u64> = (0..cells as u64).filter(|k| !edges.contains(k)).collect();
        return Ok(index::sample(rng, available, m)
            .into_iter()
            .map(|i| {
                let k = non_edges[i] as usize;
                (k / n_con, k % n_con)
            })
            .collect());
    }
    let mut chosen = HashSet::with_capacity(m);
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let var = rng.random_range(0..graph.n_var);
        let con = rng.random_range(0..n_con);
        let key = pair_key(var, con, n_con);
        if !edges.contains(&key) && chosen.insert(key) {
            out.push((var, con));
        }
    }
    Ok(out)
}

fn check_pairs(z: &EmbeddingSet, pairs: &[(usize, usize)]) -> Result<(), TrainError> {
    match pairs
        .iter()
        .enumerate()
        .find(|(_, &(v, c))| v >= z.z_var.rows() || c >= z.z_con.rows())
    {
        Some((index, &(var, con))) => Err(TrainError::PairOutOfRange { index, var, con }),
        None => Ok(()),
    }
}

/// `z_var[i] · z_con[j]` for every pair.
pub fn link_logits(z: &EmbeddingSet, pairs: &[(usize, usize)]) -> Result<Vec<f64>, TrainError> {
    check_pairs(z, pairs)?;
    Ok(pairs
        .iter()
        .map(|&(v, c)| dot(z.z_var.row(v), z.z_con.row(c)))
        .collect())
}

pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> Result<f64, TrainError> {
    if logits.len() != labels.len() {
        return Err(TrainError::LengthMismatch {
            logits: logits.len(),
            labels: labels.len(),
        });
    }
    if logits.is_empty() {
        return Err(TrainError::Empty);
    }
    Ok(shifted_mean(logits.iter().zip(labels).map(|(&z, &y)| bce_term(z, y))))
}

/// Area under the ROC curve by the rank-sum statistic, ties at half weight.
pub fn auc(positive: &[f64], negative: &[f64]) -> f64 {
    if positive.is_empty() || negative.is_empty() {
        return f64::NAN;
    }
    let mut all: Vec<(f64, bool)> = positive
        .iter()
        .map(|&s| (s, true))
        .chain(negative.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // Ranks are 1-based; tied block i..=j shares the mean rank.
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mean_rank * all[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let n_pos = positive.len() as f64;
    let n_neg = negative.len() as f64;
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub auc: f64,
    /// Fraction of pairs whose logit sign matches the label (threshold 0).
    pub accuracy: f64,
    pub loss: f64,
}

/// Scores every edge against an equal number of sampled non-edges.
pub fn evaluate_links(graph: &BipartiteGraph, z: &EmbeddingSet, seed: u64) -> Result<LinkMetrics, TrainError> {
    let positives: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.var, e.con)).collect();
    let negatives = sample_negatives(graph, positives.len(), seed)?;
    let pos = link_logits(z, &positives)?;
    let neg = link_logits(z, &negatives)?;
    let correct = pos.iter().filter(|&&s| s > 0.0).count() + neg.iter().filter(|&&s| s <= 0.0).count();
    let logits: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    let labels: Vec<f64> = std::iter::repeat_n(1.0, pos.len())
        .chain(std::iter::repeat_n(0.0, neg.len()))
        .collect();
    Ok(LinkMetrics {
        auc: auc(&pos, &neg),
        accuracy: correct as f64 / logits.len() as f64,
        loss: bce_with_logits(&logits, &labels)?,
    })
}

/// Loss of `params` on the given pairs, recorded on `tape`.
pub fn link_loss_tape(
    tape: &mut Tape,
    graph_tensors: &mut GraphTensors,
    params: &gnn::Params<Tensor>,
    pairs: &[(usize, usize)],
    labels: Rc<[f64]>,
) -> Result<Tensor, AutodiffError> {
    let (z_var, z_con) = gnn::forward(tape, graph_tensors, params)?;
    let vars: Rc<[usize]> = pairs.iter().map(|p| p.0).collect();
    let cons: Rc<[usize]> = pairs.iter().map(|p| p.1).collect();
    let left = tape.gather_rows(z_var, vars)?;
    let right = tape.gather_rows(z_con, cons)?;
    let logits = tape.row_dot(left, right)?;
    tape.bce_with_logits(logits, labels)
}

struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: i32,
}

impl Adam {
    fn new(params: &ModelParams) -> Self {
        let mut m = Vec::new();
        params.for_each(&mut |p| m.push(Matrix::zeros(p.rows(), p.cols())));
        Self {
            v: m.clone(),
            m,
            step: 0,
        }
    }

    fn update(&mut self, params: &mut ModelParams, grads: &[Matrix], cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step);
        let bc2 = 1.0 - cfg.beta2.powi(self.step);
        let mut k = 0;
        params.for_each_mut(&mut |p| {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for (((w, mi), vi), &gi) in p
                .as_mut_slice()
                .iter_mut()
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
                .zip(g.as_slice())
            {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
            }
            k += 1;
        });
    }
}

/// Deterministic per-epoch seed derivation (SplitMix64 finaliser).
fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn negative_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, epoch as u64)
}

pub fn train(graph: &BipartiteGraph, config: &TrainConfig) -> Result<TrainOutput, TrainError> {
    let params = ModelParams::init(config.architecture, config.model, config.seed)?;
    train_from(graph, config, params)
}

/// Trains starting from the given parameters.
pub fn train_from(
    graph: &BipartiteGraph,
    config: &TrainConfig,
    mut params: ModelParams,
) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    if params.architecture != config.architecture {
        return Err(GnnError::ArchitectureMismatch {
            expected: config.architecture,
            found: params.architecture,
        }
        .into());
    }
    if graph.edges.is_empty() {
        return Err(TrainError::Empty);
    }
    let edges = edge_set(graph);
    let positives: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.var, e.con)).collect();
    let labels: Rc<[f64]> = std::iter::repeat_n(1.0, positives.len())
        .chain(std::iter::repeat_n(0.0, positives.len()))
        .collect();

    let mut adam = Adam::new(&params);
    let mut curve = LossCurve::default();
    let mut pairs = Vec::new();
    for epoch in 0..config.epochs {
        let started = Instant::now();
        if epoch == 0 || config.resample_negatives_each_epoch {
            let mut rng = ChaCha8Rng::seed_from_u64(negative_seed(config.seed, epoch));
            let negatives = sample_negatives_from(graph, &edges, positives.len(), &mut rng)?;
            pairs.clear();
            pairs.extend_from_slice(&positives);
            pairs.extend(negatives);
        }

        let mut tape = Tape::new();
        let mut gt = GraphTensors::new(&mut tape, graph);
        let handles = gnn::register_params(&mut tape, &params);
        let loss = link_loss_tape(&mut tape, &mut gt, &handles, &pairs, labels.clone())?;
        let value = tape.value(loss)[(0, 0)];
        if !value.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                loss: value,
                param_norms: params.norms(),
            });
        }
        let grads = tape.backward(loss)?;
        let mut flat = Vec::with_capacity(params.count());
        handles.for_each(&mut |&h| flat.push(grads.get(&tape, h)));
        adam.update(&mut params, &flat, config);

        curve.losses.push(value);
        curve.wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }

    let mut embeddings = gnn::encode(graph, &params)?;
    embeddings.epochs = config.epochs;
    embeddings.seed = config.seed;
    Ok(TrainOutput {
        params,
        embeddings,
        curve,
    })
}
