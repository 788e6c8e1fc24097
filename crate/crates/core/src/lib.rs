//! Graph similarity toolkit: exact and approximate graph edit distance, a
//! multi-scale convolutional similarity model trained with a built-in
//! autodiff kernel, and a similarity-search evaluation harness.

pub mod bipartite;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod ged;
pub mod graph;
pub mod model;
pub mod nn;

pub use graph::{Graph, GraphError, GraphRecord, Vocab};
