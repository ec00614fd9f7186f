//! Variable/constraint bipartite graph built from a [`MilpInstance`].
//!
//! Each nonzero `A_ij` is stored once as an [`Edge`]; the var→con and
//! con→var message directions both read this list and carry the same
//! `tanh(A_ij)` weight.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mps::{ConstraintRecord, MilpInstance, Sense, VariableRecord};
use crate::tensor::Matrix;

pub const DEFAULT_BOUND_CLAMP: f64 = 1e6;
pub const VAR_FEATURES: usize = 4;
pub const CON_FEATURES: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge weight requested for a zero coefficient")]
    ZeroCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Magnitude infinite (or huge) bounds are clamped to.
    pub bound_clamp: f64,
    /// Z-score each feature column. Off unless asked for.
    pub standardize: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            bound_clamp: DEFAULT_BOUND_CLAMP,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub var: usize,
    pub con: usize,
    pub raw_coeff: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub n_var: usize,
    pub n_con: usize,
    /// `[obj_coeff, lower_bound, upper_bound_clamped, integrality_flag]`
    pub var_features: Matrix,
    /// `[rhs, sense_code]`
    pub con_features: Matrix,
    pub edges: Vec<Edge>,
}

impl BipartiteGraph {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn var_indices(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.var).collect()
    }

    pub fn con_indices(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.con).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    pub fn var_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_var];
        self.edges.iter().for_each(|e| d[e.var] += 1);
        d
    }

    pub fn con_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_con];
        self.edges.iter().for_each(|e| d[e.con] += 1);
        d
    }
}

pub fn variable_features(v: &VariableRecord, clamp: f64) -> [f64; VAR_FEATURES] {
    [
        v.obj_coeff,
        v.lower_bound.clamp(-clamp, clamp),
        v.upper_bound.clamp(-clamp, clamp),
        if v.is_integer { 1.0 } else { 0.0 },
    ]
}

pub fn sense_code(sense: Sense) -> f64 {
    match sense {
        Sense::Le => -1.0,
        Sense::Eq => 0.0,
        Sense::Ge => 1.0,
    }
}

pub fn constraint_features(c: &ConstraintRecord) -> [f64; CON_FEATURES] {
    [c.rhs, sense_code(c.sense)]
}

pub fn edge_weight(a_ij: f64) -> Result<f64, GraphError> {
    if a_ij == 0.0 {
        return Err(GraphError::ZeroCoefficient);
    }
    Ok(a_ij.tanh())
}

fn standardize_columns(m: &mut Matrix) {
    let n = m.rows();
    if n == 0 {
        return;
    }
    for c in 0..m.cols() {
        let mean = (0..n).map(|i| m[(i, c)]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (m[(i, c)] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for i in 0..n {
            let centered = m[(i, c)] - mean;
            m[(i, c)] = if sd > 0.0 { centered / sd } else { centered };
        }
    }
}

pub fn build_bipartite(inst: &MilpInstance) -> BipartiteGraph {
    build_bipartite_with(inst, &GraphOptions::default())
}

pub fn build_bipartite_with(inst: &MilpInstance, opts: &GraphOptions) -> BipartiteGraph {
    let n_var = inst.variables.len();
    let n_con = inst.constraints.len();
    let mut var_features = Matrix::zeros(n_var, VAR_FEATURES);
    for (i, v) in inst.variables.iter().enumerate() {
        var_features
            .row_mut(i)
            .copy_from_slice(&variable_features(v, opts.bound_clamp));
    }
    let mut con_features = Matrix::zeros(n_con, CON_FEATURES);
    for (j, c) in inst.constraints.iter().enumerate() {
        con_features.row_mut(j).copy_from_slice(&constraint_features(c));
    }
    if opts.standardize {
        standardize_columns(&mut var_features);
        standardize_columns(&mut con_features);
    }
    let edges = inst
        .matrix
        .entries()
        .iter()
        .map(|&(row, col, value)| Edge {
            var: col,
            con: row,
            raw_coeff: value,
            weight: edge_weight(value).expect("sparse matrix stores nonzeros only"),
        })
        .collect();
    BipartiteGraph {
        n_var,
        n_con,
        var_features,
        con_features,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mps::parse_mps_str;

    fn var(obj: f64, lo: f64, hi: f64, int: bool) -> VariableRecord {
        VariableRecord {
            name: "v".into(),
            obj_coeff: obj,
            lower_bound: lo,
            upper_bound: hi,
            is_integer: int,
        }
    }

    #[test]
    fn variable_feature_rows() {
        assert_eq!(
            variable_features(&var(4500.0, 0.0, 1.0, true), 1e6),
            [4500.0, 0.0, 1.0, 1.0]
        );
        assert_eq!(
            variable_features(&var(0.0, 0.0, f64::INFINITY, false), 1e6),
            [0.0, 0.0, 1e6, 0.0]
        );
        assert_eq!(
            variable_features(&var(-2.0, -5.0, 5.0, true), 1e6),
            [-2.0, -5.0, 5.0, 1.0]
        );
        assert_eq!(
            variable_features(&var(1.0, f64::NEG_INFINITY, f64::INFINITY, false), 1e6),
            [1.0, -1e6, 1e6, 0.0]
        );
    }

    #[test]
    fn constraint_feature_rows() {
        let c = |sense, rhs| ConstraintRecord {
            name: "c".into(),
            sense,
            rhs,
            range: None,
        };
        assert_eq!(constraint_features(&c(Sense::Eq, 1.0)), [1.0, 0.0]);
        assert_eq!(constraint_features(&c(Sense::Le, 100.0)), [100.0, -1.0]);
        assert_eq!(constraint_features(&c(Sense::Ge, 0.0)), [0.0, 1.0]);
    }

    #[test]
    fn edge_weights() {
        assert_eq!(edge_weight(0.0), Err(GraphError::ZeroCoefficient));
        // Reference values of tanh to 12 digits.
        assert!((edge_weight(1.0).unwrap() - 0.761594155956).abs() < 1e-11);
        assert!((edge_weight(-3.0).unwrap() + 0.995054753687).abs() < 1e-11);
        for x in -10..=10 {
            if x == 0 {
                continue;
            }
            let w = edge_weight(f64::from(x)).unwrap();
            assert_eq!(w.signum(), f64::from(x).signum());
            assert!(w.abs() <= 1.0);
        }
    }

    #[test]
    fn single_edge_graph() {
        let inst =
            parse_mps_str("NAME t\nROWS\n N obj\n E c1\nCOLUMNS\n x obj 1 c1 1\nRHS\n r c1 1\nENDATA\n").unwrap();
        let g = build_bipartite(&inst);
        assert_eq!((g.n_var, g.n_con, g.n_edges()), (1, 1, 1));
        assert_eq!(g.edges[0].weight, 1f64.tanh());
        assert_eq!(g.var_features.row(0), &[1.0, 0.0, 1e6, 0.0]);
        assert_eq!(g.con_features.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn standardize_flag_centres_columns() {
        let inst = crate::synth::generate_set_partitioning(3, 10, 40).unwrap();
        let g = build_bipartite_with(
            &inst,
            &GraphOptions {
                standardize: true,
                ..GraphOptions::default()
            },
        );
        let mean0: f64 = (0..g.n_var).map(|i| g.var_features[(i, 0)]).sum::<f64>() / g.n_var as f64;
        assert!(mean0.abs() < 1e-12);
        assert!(g.var_features.is_finite() && g.con_features.is_finite());
    }
}
