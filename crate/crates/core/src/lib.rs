//! MILP instance → bipartite graph → GNN link-prediction embeddings →
//! 2D instance-space projections and clusterings.

pub mod autodiff;
pub mod cluster;
pub mod export;
pub mod gnn;
pub mod graph;
pub mod mps;
pub mod pipeline;
pub mod reduce;
pub mod synth;
pub mod tensor;
pub mod train;
