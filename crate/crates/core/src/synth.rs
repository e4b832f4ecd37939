//! Planted-partition generator with controllable proximity and
//! structure-role leakage.
//!
//! Edge `{i, j}` appears with probability `p * sqrt(b_i b_j)`, where `p` is
//! `p_in` for same-class pairs and `p_out` otherwise and `b` is the per-class
//! degree boost. Unequal boosts give the classes different typical degrees,
//! which is what the structure-role ratio picks up.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{write_edge_list, write_features, write_labels, Graph, NodeLabels};
use crate::matrix::Matrix;

/// Largest accepted expected degree, `n * p_in * max boost`.
pub const MAX_EXPECTED_DEGREE: f64 = 10_000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub degree_boost: Vec<f64>,
    pub feature_dim: usize,
    /// Fraction of feature dimensions carrying the private class.
    pub feature_signal: f64,
    /// Fraction of feature dimensions carrying the utility class.
    pub utility_signal: f64,
    pub utility_classes: usize,
    pub known_fraction: f64,
    pub seed: u64,
}

impl SynthConfig {
    fn base(n: usize, p_in: f64, p_out: f64, degree_boost: Vec<f64>, seed: u64) -> Self {
        Self {
            n,
            classes: degree_boost.len(),
            p_in,
            p_out,
            degree_boost,
            feature_dim: 8,
            feature_signal: 0.0,
            utility_signal: 0.5,
            utility_classes: 2,
            known_fraction: 0.1,
            seed,
        }
    }

    /// Two communities: dense inside, sparse across, equal degrees.
    pub fn scenario_p(n: usize, seed: u64) -> Self {
        Self::base(n, 0.05, 0.005, vec![1.0, 1.0], seed)
    }

    /// No community structure; the second class has a 4x degree boost.
    pub fn scenario_r(n: usize, seed: u64) -> Self {
        Self::base(n, 0.02, 0.02, vec![1.0, 4.0], seed)
    }

    /// Structure and features independent of the private class.
    pub fn null(n: usize, seed: u64) -> Self {
        Self::base(n, 0.02, 0.02, vec![1.0, 1.0], seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.classes == 0 || self.utility_classes == 0 {
            return bad("class counts must be positive".into());
        }
        if self.n < self.classes.max(self.utility_classes) {
            return bad(format!("n = {} is smaller than the class count", self.n));
        }
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return bad(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            ));
        }
        if self.degree_boost.len() != self.classes {
            return bad(format!(
                "{} degree boosts for {} classes",
                self.degree_boost.len(),
                self.classes
            ));
        }
        if self.degree_boost.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return bad("degree boosts must be positive".into());
        }
        for (name, f) in [
            ("feature_signal", self.feature_signal),
            ("utility_signal", self.utility_signal),
            ("known_fraction", self.known_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} must lie in [0, 1], got {f}"));
            }
        }
        let max_boost = self.degree_boost.iter().copied().fold(0.0, f64::max);
        if self.n as f64 * self.p_in * max_boost > MAX_EXPECTED_DEGREE {
            return bad("expected degree exceeds the generator budget".into());
        }
        Ok(())
    }

    /// Number of private and utility signal dimensions.
    pub fn signal_dims(&self) -> (usize, usize) {
        let m = self.feature_dim;
        let private = ((self.feature_signal * m as f64).round() as usize).min(m);
        let utility = ((self.utility_signal * m as f64).round() as usize).min(m - private);
        (private, utility)
    }

    /// Expected edge count and its standard deviation given the class
    /// assignment.
    pub fn edge_count_moments(&self, classes: &[usize]) -> (f64, f64) {
        let mut per_class = vec![0usize; self.classes];
        for &c in classes {
            per_class[c] += 1;
        }
        let (mut mean, mut var) = (0.0, 0.0);
        for a in 0..self.classes {
            for b in a..self.classes {
                let pairs = if a == b {
                    (per_class[a] * per_class[a].saturating_sub(1) / 2) as f64
                } else {
                    (per_class[a] * per_class[b]) as f64
                };
                let p = self.edge_probability(a, b);
                mean += pairs * p;
                var += pairs * p * (1.0 - p);
            }
        }
        (mean, var.sqrt())
    }

    pub fn edge_probability(&self, a: usize, b: usize) -> f64 {
        let base = if a == b { self.p_in } else { self.p_out };
        (base * (self.degree_boost[a] * self.degree_boost[b]).sqrt()).min(1.0)
    }
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub graph: Graph,
    /// Private labels: all present, `known_fraction` of them observed.
    pub private: NodeLabels,
    /// Utility labels, all known.
    pub utility: NodeLabels,
}

fn balanced_shuffled(n: usize, classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).map(|i| i % classes).collect();
    v.shuffle(rng);
    v
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let classes = balanced_shuffled(n, cfg.classes, &mut rng);
    let utility = balanced_shuffled(n, cfg.utility_classes, &mut rng);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = cfg.edge_probability(classes[i], classes[j]);
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let m = cfg.feature_dim;
    let (sp, su) = cfg.signal_dims();
    let mut features = Matrix::zeros(n, m);
    for i in 0..n {
        let row = features.row_mut(i);
        for (k, x) in row.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            let signal = if k < sp {
                f64::from(u8::from(classes[i] == k % cfg.classes))
            } else if k < sp + su {
                f64::from(u8::from(utility[i] == (k - sp) % cfg.utility_classes))
            } else {
                0.0
            };
            *x = signal + noise;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let target = (cfg.known_fraction * n as f64).round() as usize;
    let mut known = vec![false; n];
    for &i in &order[..target] {
        known[i] = true;
    }
    if target > 0 {
        for c in 0..cfg.classes {
            if !(0..n).any(|i| known[i] && classes[i] == c) {
                let pick = order
                    .iter()
                    .copied()
                    .find(|&i| classes[i] == c)
                    .expect("balanced classes");
                known[pick] = true;
            }
        }
    }

    let graph = Graph::from_edges(n, edges, features)?;
    let private = NodeLabels::new(classes.into_iter().map(Some).collect(), known, cfg.classes)?;
    let utility = NodeLabels::fully_known(utility, cfg.utility_classes)?;
    Ok(SynthDataset {
        graph,
        private,
        utility,
    })
}

pub const EDGES_FILE: &str = "edges.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const UTILITY_LABELS_FILE: &str = "utility_labels.csv";

/// Writes the dataset in the standard ingest formats.
pub fn write_dataset(dir: &Path, data: &SynthDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_edge_list(&dir.join(EDGES_FILE), &data.graph)?;
    write_features(&dir.join(FEATURES_FILE), data.graph.features())?;
    write_labels(&dir.join(LABELS_FILE), &data.private)?;
    write_labels(&dir.join(UTILITY_LABELS_FILE), &data.utility)
}
