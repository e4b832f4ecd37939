//! Measurement, attack and defense tooling for private-attribute leakage
//! through graph structure.
//!
//! * [`homophily`] quantifies leakage per node with the generalized homophily
//!   ratio in its proximity (adjacency) and structure-role (degree
//!   similarity) forms.
//! * [`attack`] is a dual-channel attribute-inference attack: a GIN over the
//!   whole graph, a GIN over every node's ego network, and a ratio-weighted
//!   router between them.
//! * [`publisher`] learns per-edge keep probabilities against that attack and
//!   samples a removal-only graph for release.
//! * [`eval`] scores attacks and published graphs; [`synth`] plants
//!   controllable leakage into synthetic graphs.
//!
//! Gradients come from the small reverse-mode tape in [`autodiff`].

pub mod attack;
pub mod autodiff;
pub mod error;
pub mod eval;
pub mod graph;
pub mod homophily;
pub mod matrix;
pub mod publisher;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId, NodeLabels, Subgraph};
pub use matrix::Matrix;
