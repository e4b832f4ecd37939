//! Exact enumeration of small sub-structures, each instance reported as the
//! sorted set of canonical edge ids it occupies.
//!
//! Instances are subgraph occurrences (not induced): a 4-clique also contains
//! three 4-cycles and six chordal 4-cycles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Graph, NodeId};
use crate::error::{Error, Result};

/// Default cap on `n * mean_degree^3`.
pub const DEFAULT_MOTIF_BUDGET: f64 = 5.0e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifKind {
    Triangle,
    FourCycle,
    ChordalFourCycle,
    FourClique,
}

impl MotifKind {
    pub const ALL: [MotifKind; 4] = [
        MotifKind::Triangle,
        MotifKind::FourCycle,
        MotifKind::ChordalFourCycle,
        MotifKind::FourClique,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotifKind::Triangle => "triangle",
            MotifKind::FourCycle => "four_cycle",
            MotifKind::ChordalFourCycle => "chordal_four_cycle",
            MotifKind::FourClique => "four_clique",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MotifCatalog {
    pub kinds: Vec<MotifKind>,
    pub budget: f64,
}

impl Default for MotifCatalog {
    fn default() -> Self {
        Self {
            kinds: MotifKind::ALL.to_vec(),
            budget: DEFAULT_MOTIF_BUDGET,
        }
    }
}

pub type MotifInstances = BTreeMap<MotifKind, Vec<Vec<usize>>>;

fn check_budget(graph: &Graph, catalog: &MotifCatalog) -> Result<()> {
    let n = graph.node_count();
    if n > 0 {
        let mean_degree = 2.0 * graph.edge_count() as f64 / n as f64;
        let cost = n as f64 * mean_degree.powi(3);
        if cost > catalog.budget {
            return Err(Error::Resource(format!(
                "motif enumeration cost n*d^3 = {cost:.3e} exceeds budget {:.3e}",
                catalog.budget
            )));
        }
    }
    Ok(())
}

pub fn enumerate_motifs(graph: &Graph, catalog: &MotifCatalog) -> Result<MotifInstances> {
    check_budget(graph, catalog)?;
    let mut out = MotifInstances::new();
    for &kind in &catalog.kinds {
        let instances = match kind {
            MotifKind::Triangle => triangles(graph),
            MotifKind::FourCycle => four_cycles(graph),
            MotifKind::ChordalFourCycle => chordal_cycles(graph),
            MotifKind::FourClique => four_cliques(graph),
        };
        out.insert(kind, instances);
    }
    Ok(out)
}

/// For every kind, whether each canonical edge lies in at least one
/// instance. Runs in roughly `m * d^2` time without listing instances.
pub fn motif_edge_membership(graph: &Graph, catalog: &MotifCatalog) -> Result<BTreeMap<MotifKind, Vec<bool>>> {
    check_budget(graph, catalog)?;
    let mut out = BTreeMap::new();
    for &kind in &catalog.kinds {
        let member = graph
            .edges()
            .iter()
            .map(|&(u, v)| match kind {
                MotifKind::Triangle => !common_neighbors(graph, u, v).is_empty(),
                MotifKind::FourCycle => in_four_cycle(graph, u, v),
                MotifKind::ChordalFourCycle => in_chordal_cycle(graph, u, v),
                MotifKind::FourClique => in_four_clique(graph, u, v),
            })
            .collect();
        out.insert(kind, member);
    }
    Ok(out)
}

// Edge {a, b} closes a 4-cycle a-b-c-d iff some neighbour d of a and some
// neighbour c of b are adjacent, all four distinct.
fn in_four_cycle(g: &Graph, a: NodeId, b: NodeId) -> bool {
    g.neighbors(a)
        .iter()
        .filter(|&&d| d != b)
        .any(|&d| g.neighbors(d).iter().any(|&c| c != a && c != b && g.has_edge(b, c)))
}

// Either the chord (two common neighbours) or a side: with a common
// neighbour z, the chord {x, z} needs a second common neighbour besides y.
fn in_chordal_cycle(g: &Graph, x: NodeId, y: NodeId) -> bool {
    let common = common_neighbors(g, x, y);
    common.len() >= 2
        || common
            .iter()
            .any(|&z| common_neighbors(g, x, z).len() >= 2 || common_neighbors(g, y, z).len() >= 2)
}

fn in_four_clique(g: &Graph, u: NodeId, v: NodeId) -> bool {
    let common = common_neighbors(g, u, v);
    common
        .iter()
        .enumerate()
        .any(|(i, &w)| common[i + 1..].iter().any(|&x| g.has_edge(w, x)))
}

fn eid(g: &Graph, u: NodeId, v: NodeId) -> usize {
    g.edge_id(u, v).expect("motif edge must exist")
}

fn edge_set(g: &Graph, pairs: &[(NodeId, NodeId)]) -> Vec<usize> {
    let mut ids: Vec<usize> = pairs.iter().map(|&(u, v)| eid(g, u, v)).collect();
    ids.sort_unstable();
    ids
}

fn common_neighbors(g: &Graph, u: NodeId, v: NodeId) -> Vec<NodeId> {
    let b = g.neighbors(v);
    g.neighbors(u)
        .iter()
        .copied()
        .filter(|x| b.binary_search(x).is_ok())
        .collect()
}

fn common_above(g: &Graph, u: NodeId, v: NodeId, floor: NodeId) -> Vec<NodeId> {
    let (a, b) = (g.neighbors(u), g.neighbors(v));
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if a[i] > floor {
                    out.push(a[i]);
                }
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn triangles(g: &Graph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for &(u, v) in g.edges() {
        for w in common_above(g, u, v, v) {
            out.push(edge_set(g, &[(u, v), (u, w), (v, w)]));
        }
    }
    out
}

// Each 4-cycle has exactly one diagonal touching its smallest node `a`; the
// opposite corner `c` and the unordered pair {b, d} then identify it once.
fn four_cycles(g: &Graph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for a in 0..g.node_count() {
        let mut opposite: Vec<NodeId> = g
            .neighbors(a)
            .iter()
            .filter(|&&b| b > a)
            .flat_map(|&b| g.neighbors(b).iter().copied())
            .filter(|&c| c > a)
            .collect();
        opposite.sort_unstable();
        opposite.dedup();
        for c in opposite {
            let mids = common_above(g, a, c, a);
            for (i, &b) in mids.iter().enumerate() {
                for &d in &mids[i + 1..] {
                    out.push(edge_set(g, &[(a, b), (b, c), (c, d), (d, a)]));
                }
            }
        }
    }
    out
}

// A chordal 4-cycle is fixed by its chord (the edge whose endpoints both have
// motif degree 3) plus two common neighbours of the chord's endpoints.
fn chordal_cycles(g: &Graph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for &(u, v) in g.edges() {
        let common = common_neighbors(g, u, v);
        for (i, &w1) in common.iter().enumerate() {
            for &w2 in &common[i + 1..] {
                out.push(edge_set(g, &[(u, v), (u, w1), (v, w1), (u, w2), (v, w2)]));
            }
        }
    }
    out
}

fn four_cliques(g: &Graph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for &(u, v) in g.edges() {
        let third = common_above(g, u, v, v);
        for (i, &w) in third.iter().enumerate() {
            for &x in &third[i + 1..] {
                if g.has_edge(w, x) {
                    out.push(edge_set(g, &[(u, v), (u, w), (u, x), (v, w), (v, x), (w, x)]));
                }
            }
        }
    }
    out
}
