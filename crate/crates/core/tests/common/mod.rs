#![allow(dead_code)]

pub mod dense;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structleak::autodiff::ParamSet;
use structleak::{Graph, Matrix, NodeLabels};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn er_pairs(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }
    pairs
}

pub fn er_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    Graph::unit_features(n, er_pairs(n, p, &mut r)).unwrap()
}

/// Erdős–Rényi graph with standard-normal-ish features of width `dim`.
pub fn er_graph_with_features(n: usize, p: f64, dim: usize, seed: u64) -> Graph {
    let mut r = rng(seed);
    let pairs = er_pairs(n, p, &mut r);
    let feats: Vec<f64> = (0..n * dim).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
    Graph::from_edges(n, pairs, Matrix::from_vec(n, dim, feats)).unwrap()
}

/// Uniform random classes; each node known with probability `known`, and
/// every class forced to have a known member.
pub fn random_labels(n: usize, classes: usize, known: f64, seed: u64) -> NodeLabels {
    let mut r = rng(seed);
    let label: Vec<Option<usize>> = (0..n).map(|_| Some(r.random_range(0..classes))).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| r.random::<f64>() < known).collect();
    for c in 0..classes {
        if let Some(i) = (0..n).find(|&i| label[i] == Some(c)) {
            mask[i] = true;
        }
    }
    NodeLabels::new(label, mask, classes).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
    )
}

pub fn dense_adjacency(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] = true;
        a[v][u] = true;
    }
    a
}

/// Overwrites every parameter with uniform draws from [-0.5, 0.5).
pub fn randomize(params: &mut ParamSet, seed: u64) {
    let mut r = rng(seed);
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        for v in params.get_mut(&name).unwrap().as_mut_slice() {
            *v = r.random::<f64>() - 0.5;
        }
    }
}
