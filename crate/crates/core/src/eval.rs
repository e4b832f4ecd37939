//! Scores for attacks and published graphs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{hard_labels, train_attack, AttackConfig, AttackContext, AttackVariant};
use crate::error::{Error, Result};
use crate::graph::{motif_edge_membership, Graph, MotifCatalog, MotifKind, NodeLabels};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub accuracy: f64,
    /// Binary tasks only, and only when both classes occur among the targets.
    pub auc: Option<f64>,
    pub evaluated: usize,
}

/// Accuracy over hidden nodes (label present, not known) and, for two
/// classes, the rank-statistic AUC of the class-1 confidence.
pub fn attack_metrics(distribution: &Matrix, labels: &NodeLabels) -> Result<AttackMetrics> {
    if distribution.rows() != labels.len() {
        return Err(Error::contract(format!(
            "{} prediction rows for {} nodes",
            distribution.rows(),
            labels.len()
        )));
    }
    let hidden = labels.hidden_nodes();
    if hidden.is_empty() {
        return Err(Error::contract("no hidden labelled nodes to evaluate"));
    }
    let pred = hard_labels(distribution);
    let hits = hidden.iter().filter(|&&i| Some(pred[i]) == labels.label[i]).count();
    let auc = if distribution.cols() == 2 && labels.class_count == 2 {
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for &i in &hidden {
            let score = distribution[(i, 1)];
            if labels.label[i] == Some(1) {
                pos.push(score);
            } else {
                neg.push(score);
            }
        }
        auc_mann_whitney(&pos, &neg)
    } else {
        None
    };
    Ok(AttackMetrics {
        accuracy: hits as f64 / hidden.len() as f64,
        auc,
        evaluated: hidden.len(),
    })
}

/// Probability that a random positive outranks a random negative, ties
/// counting half, via average ranks. `None` if either side is empty.
pub fn auc_mann_whitney(pos: &[f64], neg: &[f64]) -> Option<f64> {
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "sigma")]
pub enum Bandwidth {
    /// Median pairwise distance over the pooled sample; 1 if that is 0.
    MedianHeuristic,
    Fixed(f64),
}

/// Median of `|x - y|` over distinct pairs of the pooled sample, or 1 when
/// that median is 0.
pub fn median_bandwidth(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut d = Vec::with_capacity(pooled.len() * pooled.len().saturating_sub(1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            d.push((pooled[i] - pooled[j]).abs());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let k = d.len();
    let med = if k % 2 == 1 {
        d[k / 2]
    } else {
        (d[k / 2 - 1] + d[k / 2]) / 2.0
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Biased squared MMD with an RBF kernel.
pub fn mmd(a: &[f64], b: &[f64], bandwidth: Bandwidth) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("mmd needs two nonempty samples"));
    }
    let sigma = match bandwidth {
        Bandwidth::MedianHeuristic => median_bandwidth(a, b),
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => return Err(Error::Config(format!("bandwidth must be positive, got {s}"))),
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let mean_kernel = |x: &[f64], y: &[f64]| {
        let mut s = 0.0;
        for &p in x {
            for &q in y {
                s += (-(p - q) * (p - q) * gamma).exp();
            }
        }
        s / (x.len() * y.len()) as f64
    };
    Ok(mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyChange {
    pub mmd_degree: f64,
    pub mmd_clustering: f64,
}

pub fn property_change(original: &Graph, published: &Graph, bandwidth: Bandwidth) -> Result<PropertyChange> {
    if original.node_count() != published.node_count() {
        return Err(Error::contract("graphs must share the node set"));
    }
    let deg = |g: &Graph| g.degrees().into_iter().map(|d| d as f64).collect::<Vec<_>>();
    Ok(PropertyChange {
        mmd_degree: mmd(&deg(original), &deg(published), bandwidth)?,
        mmd_clustering: mmd(
            &original.clustering_coefficients(),
            &published.clustering_coefficients(),
            bandwidth,
        )?,
    })
}

/// Mean keep probability over the edges in at least one instance of each
/// motif kind; `None` for kinds with no instance.
pub fn motif_keep_report(
    graph: &Graph,
    keep_probabilities: &[f64],
    catalog: &MotifCatalog,
) -> Result<BTreeMap<MotifKind, Option<f64>>> {
    if keep_probabilities.len() != graph.edge_count() {
        return Err(Error::contract("keep probabilities do not match the edge list"));
    }
    let membership = motif_edge_membership(graph, catalog)?;
    Ok(membership
        .into_iter()
        .map(|(kind, member)| {
            let (mut s, mut n) = (0.0, 0usize);
            for (t, _) in keep_probabilities.iter().zip(&member).filter(|(_, &m)| m) {
                s += t;
                n += 1;
            }
            (kind, (n > 0).then(|| s / n as f64))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub train_fraction: f64,
    pub max_resamples: usize,
    /// Classifier settings; the variant is forced to proximity-only.
    pub classifier: AttackConfig,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.1,
            max_resamples: 10,
            classifier: AttackConfig::default(),
        }
    }
}

/// Test accuracy of a fresh proximity GIN trained on a seeded split of the
/// utility labels over `published`.
pub fn utility_eval(published: &Graph, utility: &NodeLabels, cfg: &UtilityConfig) -> Result<f64> {
    if utility.len() != published.node_count() {
        return Err(Error::contract("utility labels do not cover the graph"));
    }
    let labelled: Vec<usize> = (0..utility.len()).filter(|&i| utility.label[i].is_some()).collect();
    let train_count = ((cfg.train_fraction * labelled.len() as f64).round() as usize).clamp(1, labelled.len());
    if train_count == labelled.len() {
        return Err(Error::contract("split leaves no test nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.classifier.seed);
    let mut split = None;
    for _ in 0..cfg.max_resamples.max(1) {
        let mut order = labelled.clone();
        order.shuffle(&mut rng);
        let mut known = vec![false; utility.len()];
        for &i in &order[..train_count] {
            known[i] = true;
        }
        let labels = NodeLabels::new(utility.label.clone(), known, utility.class_count)?;
        if labels.require_each_class_known().is_ok() {
            split = Some(labels);
            break;
        }
    }
    let labels = split.ok_or_else(|| {
        Error::contract(format!(
            "no split with every class in training after {} draws",
            cfg.max_resamples
        ))
    })?;
    let classifier = AttackConfig {
        variant: AttackVariant::ProxOnly,
        ..cfg.classifier.clone()
    };
    let (model, _) = train_attack(published, &labels, &classifier)?;
    let dist = model.predict(&AttackContext::without_ego(published))?;
    Ok(attack_metrics(&dist, &labels)?.accuracy)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub attack_accuracy: Option<f64>,
    pub attack_auc: Option<f64>,
    pub mmd_degree: Option<f64>,
    pub mmd_clustering: Option<f64>,
    pub motif_avg_prob: BTreeMap<String, Option<f64>>,
    pub utility_accuracy: Option<f64>,
}
