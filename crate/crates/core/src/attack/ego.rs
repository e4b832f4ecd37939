use std::rc::Rc;

use crate::autodiff::MessageGraph;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

/// Default cap on the summed size of all ego networks, in nodes.
pub const DEFAULT_EGO_ROW_BUDGET: usize = 4_000_000;

/// The `k`-hop ego networks of a list of centers laid out as one disjoint
/// union.
///
/// Segment `s` (rows `offsets[s]..offsets[s + 1]`) is the ego network of node
/// `centers[s]` with local nodes in sorted order. Union edge `e` is a copy of parent
/// edge `edge_ids[e]`, so parent edge weights map onto the union by a gather.
#[derive(Clone, Debug)]
pub struct EgoBatch {
    pub hops: usize,
    pub centers: Vec<usize>,
    pub graph: Rc<MessageGraph>,
    pub offsets: Rc<Vec<usize>>,
    pub edge_ids: Rc<Vec<usize>>,
    /// Parent features restricted to each ego network, stacked.
    pub features: Matrix,
    node_index: Vec<usize>,
}

impl EgoBatch {
    /// Ego networks of every node.
    pub fn build(graph: &Graph, hops: usize) -> Result<Self> {
        Self::build_with_budget(graph, hops, DEFAULT_EGO_ROW_BUDGET)
    }

    pub fn build_with_budget(graph: &Graph, hops: usize, row_budget: usize) -> Result<Self> {
        Self::for_centers(graph, hops, (0..graph.node_count()).collect(), row_budget)
    }

    pub fn for_centers(graph: &Graph, hops: usize, centers: Vec<usize>, row_budget: usize) -> Result<Self> {
        let mut offsets = Vec::with_capacity(centers.len() + 1);
        let mut node_index = Vec::new();
        let mut edges = Vec::new();
        let mut edge_ids = Vec::new();
        offsets.push(0);
        for &center in &centers {
            let sub = graph.ego_network(center, hops)?;
            let base = node_index.len();
            node_index.extend_from_slice(&sub.nodes);
            if node_index.len() > row_budget {
                return Err(Error::Resource(format!(
                    "{hops}-hop ego networks exceed the budget of {row_budget} stacked nodes"
                )));
            }
            edges.extend(sub.edges.iter().map(|&(u, v)| (base + u, base + v)));
            edge_ids.extend_from_slice(&sub.edge_ids);
            offsets.push(node_index.len());
        }
        let m = graph.feature_dim();
        let mut features = Matrix::zeros(node_index.len(), m);
        for (r, &i) in node_index.iter().enumerate() {
            features.row_mut(r).copy_from_slice(graph.features().row(i));
        }
        Ok(Self {
            hops,
            centers,
            graph: Rc::new(MessageGraph::new(node_index.len(), edges)),
            offsets: Rc::new(offsets),
            edge_ids: Rc::new(edge_ids),
            features,
            node_index,
        })
    }

    pub fn center_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row_count(&self) -> usize {
        self.node_index.len()
    }

    /// Parent node ids of segment `s`, in local order.
    pub fn members(&self, s: usize) -> &[usize] {
        &self.node_index[self.offsets[s]..self.offsets[s + 1]]
    }

    /// Canonical parent edge ids inside segment `s`.
    pub fn segment_edge_ids(&self, s: usize) -> Vec<usize> {
        let (a, b) = (self.offsets[s], self.offsets[s + 1]);
        self.graph
            .edges
            .iter()
            .zip(self.edge_ids.iter())
            .filter(|((u, _), _)| (a..b).contains(&(*u as usize)))
            .map(|(_, &id)| id)
            .collect()
    }
}
