//! Immutable undirected graphs in CSR form, node labels, and the structural
//! primitives built on them: ego networks, normalized Laplacians, clustering
//! coefficients, motif enumeration and edge masking.

mod io;
mod motif;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use io::{load_graph, read_edge_list, read_features, read_labels, write_edge_list, write_features, write_labels};
pub use motif::{
    enumerate_motifs, motif_edge_membership, MotifCatalog, MotifInstances, MotifKind, DEFAULT_MOTIF_BUDGET,
};

pub type NodeId = usize;

/// Undirected simple graph with node features.
///
/// Edges are identified by their index in the canonical list of `(u, v)`
/// pairs with `u < v`, sorted lexicographically. Every per-edge vector in the
/// crate (masks, keep probabilities, relaxed weights) is aligned to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    // canonical edge id of each CSR entry
    entry_edge: Vec<usize>,
    edges: Vec<(NodeId, NodeId)>,
    features: Matrix,
}

impl Graph {
    /// Builds a graph from arbitrary pairs. Duplicates (in either direction)
    /// collapse and self-loops are dropped.
    pub fn from_edges<I>(node_count: usize, pairs: I, features: Matrix) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if features.rows() != node_count {
            return Err(Error::contract(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                node_count
            )));
        }
        let mut edges = Vec::new();
        for (u, v) in pairs {
            for id in [u, v] {
                if id >= node_count {
                    return Err(Error::Range { id, count: node_count });
                }
            }
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_canonical(node_count, edges, features))
    }

    /// Graph with all-ones features of dimension 1.
    pub fn unit_features<I>(node_count: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        Self::from_edges(node_count, pairs, Matrix::filled(node_count, 1, 1.0))
    }

    fn from_canonical(node_count: usize, edges: Vec<(NodeId, NodeId)>, features: Matrix) -> Self {
        let mut degree = vec![0usize; node_count];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..node_count].to_vec();
        let mut neighbors = vec![0; offsets[node_count]];
        let mut entry_edge = vec![0; offsets[node_count]];
        // Edges are sorted by (u, v), so each row is filled in ascending order
        // for the `u` side; the `v` side also ascends because u runs in order.
        for (id, &(u, v)) in edges.iter().enumerate() {
            neighbors[fill[u]] = v;
            entry_edge[fill[u]] = id;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            entry_edge[fill[v]] = id;
            fill[v] += 1;
        }
        for i in 0..node_count {
            let (s, e) = (offsets[i], offsets[i + 1]);
            let mut row: Vec<(NodeId, usize)> = neighbors[s..e]
                .iter()
                .copied()
                .zip(entry_edge[s..e].iter().copied())
                .collect();
            row.sort_unstable();
            for (k, (nb, id)) in row.into_iter().enumerate() {
                neighbors[s + k] = nb;
                entry_edge[s + k] = id;
            }
        }
        Self {
            offsets,
            neighbors,
            entry_edge,
            edges,
            features,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(u, v)` pairs, `u < v`, sorted.
    #[inline]
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Canonical edge ids aligned with [`Graph::neighbors`].
    #[inline]
    pub fn incident_edges(&self, node: NodeId) -> &[usize] {
        &self.entry_edge[self.offsets[node]..self.offsets[node + 1]]
    }

    #[inline]
    pub fn degree(&self, node: NodeId) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.node_count()).map(|i| self.degree(i)).collect()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Same topology with different node features.
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.node_count() {
            return Err(Error::contract("feature rows must match node count"));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edge_id(u, v).is_some()
    }

    /// Canonical id of edge `{u, v}` if present.
    pub fn edge_id(&self, u: NodeId, v: NodeId) -> Option<usize> {
        if u >= self.node_count() || v >= self.node_count() {
            return None;
        }
        let row = self.neighbors(u);
        row.binary_search(&v).ok().map(|k| self.incident_edges(u)[k])
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if node >= self.node_count() {
            Err(Error::Range {
                id: node,
                count: self.node_count(),
            })
        } else {
            Ok(())
        }
    }

    /// Nodes within `k` hops of `node`, mapped to their distance.
    fn bfs_within(&self, node: NodeId, k: usize) -> Vec<NodeId> {
        let mut dist = vec![usize::MAX; self.node_count()];
        let mut queue = VecDeque::new();
        let mut seen = vec![node];
        dist[node] = 0;
        queue.push_back(node);
        while let Some(u) = queue.pop_front() {
            if dist[u] == k {
                continue;
            }
            for &v in self.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    seen.push(v);
                    queue.push_back(v);
                }
            }
        }
        seen.sort_unstable();
        seen
    }

    /// Induced `k`-hop ego network around `node`, center included.
    pub fn ego_network(&self, node: NodeId, k: usize) -> Result<Subgraph> {
        self.check_node(node)?;
        if k == 0 {
            return Err(Error::contract("ego network hop count must be at least 1"));
        }
        let nodes = self.bfs_within(node, k);
        Ok(self.induced(node, k, nodes))
    }

    fn induced(&self, center: NodeId, hops: usize, nodes: Vec<NodeId>) -> Subgraph {
        let mut edges = Vec::new();
        let mut edge_ids = Vec::new();
        for (lu, &u) in nodes.iter().enumerate() {
            for (&v, &id) in self.neighbors(u).iter().zip(self.incident_edges(u)) {
                if v <= u {
                    continue;
                }
                if let Ok(lv) = nodes.binary_search(&v) {
                    edges.push((lu, lv));
                    edge_ids.push(id);
                }
            }
        }
        Subgraph {
            center,
            nodes,
            edges,
            edge_ids,
            hops,
        }
    }

    /// Fraction of closed wedges at `node`; 0 when degree < 2.
    pub fn clustering_coefficient(&self, node: NodeId) -> f64 {
        let nb = self.neighbors(node);
        let d = nb.len();
        if d < 2 {
            return 0.0;
        }
        let mut triangles = 0usize;
        for (a, &u) in nb.iter().enumerate() {
            triangles += sorted_intersection_count(&nb[a + 1..], self.neighbors(u));
        }
        2.0 * triangles as f64 / (d * (d - 1)) as f64
    }

    pub fn clustering_coefficients(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.clustering_coefficient(i)).collect()
    }

    /// Keeps only edges whose mask entry is true. Node set and features are
    /// unchanged.
    pub fn apply_edge_mask(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.edge_count() {
            return Err(Error::contract(format!(
                "edge mask has length {} but graph has {} edges",
                keep.len(),
                self.edge_count()
            )));
        }
        let edges = self
            .edges
            .iter()
            .zip(keep)
            .filter_map(|(&e, &k)| k.then_some(e))
            .collect();
        Ok(Self::from_canonical(self.node_count(), edges, self.features.clone()))
    }
}

/// Count of common elements of two ascending slices.
pub(crate) fn sorted_intersection_count(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Induced subgraph around a center node.
///
/// Local node `i` is `nodes[i]` in the parent graph; `nodes` is sorted, so the
/// local ordering is deterministic. `edge_ids[e]` is the parent's canonical id
/// of local edge `edges[e]`, which lets relaxed parent edge weights be
/// gathered onto the subgraph without re-extraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgraph {
    pub center: NodeId,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<(usize, usize)>,
    pub edge_ids: Vec<usize>,
    pub hops: usize,
}

impl Subgraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn local_center(&self) -> usize {
        self.nodes
            .binary_search(&self.center)
            .expect("center is part of its ego network")
    }

    pub fn dense_adjacency(&self) -> Matrix {
        let n = self.node_count();
        let mut a = Matrix::zeros(n, n);
        for &(u, v) in &self.edges {
            a[(u, v)] = 1.0;
            a[(v, u)] = 1.0;
        }
        a
    }

    /// `I - D^{-1/2} A D^{-1/2}`; rows and columns of isolated nodes are zero.
    pub fn normalized_laplacian(&self) -> Matrix {
        let n = self.node_count();
        let mut degree = vec![0usize; n];
        for &(u, v) in &self.edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            if degree[i] > 0 {
                l[(i, i)] = 1.0;
            }
        }
        for &(u, v) in &self.edges {
            let w = -1.0 / ((degree[u] * degree[v]) as f64).sqrt();
            l[(u, v)] = w;
            l[(v, u)] = w;
        }
        l
    }
}

/// Private (or utility) class labels, possibly partially observed.
///
/// `label[i]` may be present while `known[i]` is false: that is how ground
/// truth for hidden nodes travels alongside the observed set for evaluation.
/// Anything adversarial must go through [`NodeLabels::observed`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLabels {
    pub label: Vec<Option<usize>>,
    pub known: Vec<bool>,
    pub class_count: usize,
}

impl NodeLabels {
    pub fn new(label: Vec<Option<usize>>, known: Vec<bool>, class_count: usize) -> Result<Self> {
        if label.len() != known.len() {
            return Err(Error::contract("label and known-mask lengths differ"));
        }
        for (i, (l, &k)) in label.iter().zip(&known).enumerate() {
            match l {
                Some(c) if *c >= class_count => {
                    return Err(Error::contract(format!(
                        "node {i} has class {c} but class count is {class_count}"
                    )))
                }
                None if k => return Err(Error::contract(format!("node {i} is marked known without a label"))),
                _ => {}
            }
        }
        Ok(Self {
            label,
            known,
            class_count,
        })
    }

    /// Every node labelled and known.
    pub fn fully_known(classes: Vec<usize>, class_count: usize) -> Result<Self> {
        let n = classes.len();
        Self::new(classes.into_iter().map(Some).collect(), vec![true; n], class_count)
    }

    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }

    pub fn known_label(&self, node: NodeId) -> Option<usize> {
        if self.known[node] {
            self.label[node]
        } else {
            None
        }
    }

    /// Copy with hidden labels removed.
    pub fn observed(&self) -> Self {
        Self {
            label: self
                .label
                .iter()
                .zip(&self.known)
                .map(|(&l, &k)| if k { l } else { None })
                .collect(),
            known: self.known.clone(),
            class_count: self.class_count,
        }
    }

    /// Known labels kept; every unknown node takes its pseudo-label.
    pub fn with_pseudo(&self, pseudo: &[usize]) -> Self {
        assert_eq!(pseudo.len(), self.len());
        Self {
            label: (0..self.len())
                .map(|i| if self.known[i] { self.label[i] } else { Some(pseudo[i]) })
                .collect(),
            known: self.known.clone(),
            class_count: self.class_count,
        }
    }

    pub fn known_nodes(&self) -> Vec<NodeId> {
        (0..self.len()).filter(|&i| self.known[i]).collect()
    }

    /// Nodes with a label that is not observed; the evaluation targets.
    pub fn hidden_nodes(&self) -> Vec<NodeId> {
        (0..self.len())
            .filter(|&i| !self.known[i] && self.label[i].is_some())
            .collect()
    }

    /// Per-class counts among known nodes.
    pub fn known_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for i in 0..self.len() {
            if let Some(c) = self.known_label(i) {
                counts[c] += 1;
            }
        }
        counts
    }

    pub fn require_each_class_known(&self) -> Result<()> {
        let counts = self.known_class_counts();
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::contract(format!("class {c} has no known node")));
        }
        Ok(())
    }

    /// Applies a class bijection to every label.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        Self {
            label: self.label.iter().map(|l| l.map(|c| perm[c])).collect(),
            known: self.known.clone(),
            class_count: self.class_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::unit_features(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        Graph::unit_features(leaves + 1, (1..=leaves).map(|i| (0, i))).unwrap()
    }

    #[test]
    fn duplicates_and_self_loops_collapse() {
        let g = Graph::unit_features(2, [(0, 1), (1, 0), (0, 0)]).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        let g = Graph::unit_features(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn out_of_range_node_is_rejected() {
        let err = Graph::unit_features(2, [(0, 2)]).unwrap_err();
        assert!(matches!(err, Error::Range { id: 2, count: 2 }));
    }

    #[test]
    fn csr_entries_carry_canonical_ids() {
        let g = Graph::unit_features(4, [(2, 3), (0, 1), (1, 2), (0, 3)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 3), (1, 2), (2, 3)]);
        for (id, &(u, v)) in g.edges().iter().enumerate() {
            assert_eq!(g.edge_id(u, v), Some(id));
            assert_eq!(g.edge_id(v, u), Some(id));
        }
        assert_eq!(g.edge_id(0, 2), None);
    }

    #[test]
    fn ego_network_of_star_center_is_whole_star() {
        let g = star(4);
        let s = g.ego_network(0, 1).unwrap();
        assert_eq!(s.nodes, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.edges.len(), 4);
        assert_eq!(s.local_center(), 0);
    }

    #[test]
    fn ego_network_on_path() {
        let g = path(5);
        let s = g.ego_network(0, 2).unwrap();
        assert_eq!(s.nodes, vec![0, 1, 2]);
        assert_eq!(s.edges, vec![(0, 1), (1, 2)]);
        assert!(g.ego_network(0, 0).is_err());
        assert!(g.ego_network(9, 1).is_err());
    }

    #[test]
    fn laplacian_of_k2_and_isolated_node() {
        let g = Graph::unit_features(3, [(0, 1)]).unwrap();
        let l = g.ego_network(0, 1).unwrap().normalized_laplacian();
        assert_eq!(l, Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]));
        let iso = g.ego_network(2, 1).unwrap().normalized_laplacian();
        assert_eq!(iso, Matrix::from_rows(&[vec![0.0]]));
    }

    #[test]
    fn clustering_coefficient_basics() {
        let tri = Graph::unit_features(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(tri.clustering_coefficient(0), 1.0);
        assert_eq!(path(3).clustering_coefficient(1), 0.0);
        assert_eq!(path(3).clustering_coefficient(0), 0.0);
    }

    #[test]
    fn edge_mask_extremes() {
        let g = Graph::unit_features(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let same = g.apply_edge_mask(&[true; 4]).unwrap();
        assert_eq!(same, g);
        let empty = g.apply_edge_mask(&[false; 4]).unwrap();
        assert_eq!(empty.edge_count(), 0);
        assert_eq!(empty.degrees(), vec![0; 4]);
        assert!(g.apply_edge_mask(&[true; 3]).is_err());
    }

    #[test]
    fn observed_strips_hidden_labels() {
        let l = NodeLabels::new(vec![Some(0), Some(1), None], vec![true, false, false], 2).unwrap();
        let o = l.observed();
        assert_eq!(o.label, vec![Some(0), None, None]);
        assert_eq!(l.hidden_nodes(), vec![1]);
        assert!(NodeLabels::new(vec![None], vec![true], 1).is_err());
        assert!(NodeLabels::new(vec![Some(3)], vec![true], 2).is_err());
    }
}
