//! Node-level generalized homophily ratios.
//!
//! For node `i` with class `z_i`, the ratio is the fraction of related nodes
//! that share `z_i`:
//!
//! * proximity: related means adjacent;
//! * structure-role: related means any other node whose degree differs from
//!   `deg(i)` by at most `degree_threshold`.
//!
//! A ratio whose related set is empty is *absent* (`None`), never zero.
//!
//! Which labels are counted depends on [`LabelMode`]: `KnownOnly` uses the
//! observed labels only, `PseudoAugmented` counts every present label and
//! expects the caller to have filled hidden nodes with pseudo-labels (see
//! [`NodeLabels::with_pseudo`]).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NodeLabels};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    KnownOnly,
    PseudoAugmented,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomophilyConfig {
    pub degree_threshold: usize,
    pub label_mode: LabelMode,
}

impl Default for HomophilyConfig {
    fn default() -> Self {
        Self {
            degree_threshold: 5,
            label_mode: LabelMode::KnownOnly,
        }
    }
}

/// Label of `node` as counted under `mode`.
pub fn counted_label(labels: &NodeLabels, node: NodeId, mode: LabelMode) -> Option<usize> {
    match mode {
        LabelMode::KnownOnly => labels.known_label(node),
        LabelMode::PseudoAugmented => labels.label[node],
    }
}

fn counted_labels(labels: &NodeLabels, mode: LabelMode) -> Vec<Option<usize>> {
    (0..labels.len()).map(|i| counted_label(labels, i, mode)).collect()
}

fn check_inputs(graph: &Graph, labels: &NodeLabels) -> Result<()> {
    if graph.node_count() != labels.len() {
        return Err(Error::contract(format!(
            "graph has {} nodes but labels cover {}",
            graph.node_count(),
            labels.len()
        )));
    }
    Ok(())
}

fn own_label(labels: &NodeLabels, node: NodeId, mode: LabelMode) -> Result<usize> {
    if node >= labels.len() {
        return Err(Error::Range {
            id: node,
            count: labels.len(),
        });
    }
    counted_label(labels, node, mode)
        .ok_or_else(|| Error::contract(format!("label of node {node} is unavailable in {mode:?} mode")))
}

fn ratio(same: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| same as f64 / total as f64)
}

pub fn prox_ghratio(graph: &Graph, labels: &NodeLabels, node: NodeId, cfg: &HomophilyConfig) -> Result<Option<f64>> {
    check_inputs(graph, labels)?;
    let z = own_label(labels, node, cfg.label_mode)?;
    let (mut same, mut total) = (0, 0);
    for &j in graph.neighbors(node) {
        if let Some(c) = counted_label(labels, j, cfg.label_mode) {
            total += 1;
            same += usize::from(c == z);
        }
    }
    Ok(ratio(same, total))
}

pub fn role_ghratio(graph: &Graph, labels: &NodeLabels, node: NodeId, cfg: &HomophilyConfig) -> Result<Option<f64>> {
    check_inputs(graph, labels)?;
    let z = own_label(labels, node, cfg.label_mode)?;
    let d = graph.degree(node);
    let (mut same, mut total) = (0, 0);
    for j in 0..graph.node_count() {
        if j == node || graph.degree(j).abs_diff(d) > cfg.degree_threshold {
            continue;
        }
        if let Some(c) = counted_label(labels, j, cfg.label_mode) {
            total += 1;
            same += usize::from(c == z);
        }
    }
    Ok(ratio(same, total))
}

/// Proximity ratios of every node; `None` where the node's own label is not
/// counted or it has no counted neighbour.
pub fn prox_ratios(graph: &Graph, labels: &NodeLabels, cfg: &HomophilyConfig) -> Result<Vec<Option<f64>>> {
    check_inputs(graph, labels)?;
    let counted = counted_labels(labels, cfg.label_mode);
    Ok((0..graph.node_count())
        .map(|i| {
            let z = counted[i]?;
            let (mut same, mut total) = (0, 0);
            for &j in graph.neighbors(i) {
                if let Some(c) = counted[j] {
                    total += 1;
                    same += usize::from(c == z);
                }
            }
            ratio(same, total)
        })
        .collect())
}

/// Structure-role ratios of every node in `O(n + max_degree * C)` using
/// per-class prefix counts over degree.
pub fn role_ratios(graph: &Graph, labels: &NodeLabels, cfg: &HomophilyConfig) -> Result<Vec<Option<f64>>> {
    check_inputs(graph, labels)?;
    let counted = counted_labels(labels, cfg.label_mode);
    let degrees = graph.degrees();
    Ok(role_ratios_from_degrees(
        &degrees,
        &counted,
        labels.class_count,
        cfg.degree_threshold,
    ))
}

pub(crate) fn role_ratios_from_degrees(
    degrees: &[usize],
    counted: &[Option<usize>],
    class_count: usize,
    theta: usize,
) -> Vec<Option<f64>> {
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    // prefix[c][d + 1] = number of counted nodes of class c with degree <= d
    let mut prefix = vec![vec![0usize; max_deg + 2]; class_count];
    for (&d, &c) in degrees.iter().zip(counted) {
        if let Some(c) = c {
            prefix[c][d + 1] += 1;
        }
    }
    for row in &mut prefix {
        for d in 1..row.len() {
            row[d] += row[d - 1];
        }
    }
    let window = |c: usize, d: usize| {
        let lo = d.saturating_sub(theta);
        let hi = (d + theta).min(max_deg);
        prefix[c][hi + 1] - prefix[c][lo]
    };
    degrees
        .iter()
        .zip(counted)
        .map(|(&d, &z)| {
            let z = z?;
            let total: usize = (0..class_count).map(|c| window(c, d)).sum::<usize>() - 1;
            let same = window(z, d) - 1;
            ratio(same, total)
        })
        .collect()
}

/// Empirical class frequencies among known labels.
pub fn class_priors(labels: &NodeLabels) -> Result<Vec<f64>> {
    let counts = labels.known_class_counts();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::contract("no known labels to estimate class priors"));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Frequency of the node's class among known labels: the ratio a node would
/// have if structure carried no information about its class.
pub fn prior_baseline(labels: &NodeLabels, node: NodeId) -> Result<f64> {
    let priors = class_priors(labels)?;
    let z = labels
        .label
        .get(node)
        .copied()
        .flatten()
        .ok_or_else(|| Error::contract(format!("node {node} has no label")))?;
    Ok(priors[z])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: NodeId,
    pub prox: Option<f64>,
    pub role: Option<f64>,
    pub prior: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl SummaryStats {
    /// `None` for an empty sample. Quartiles interpolate linearly between
    /// order statistics.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub prox: Option<SummaryStats>,
    pub role: Option<SummaryStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomophilyReport {
    pub theta: usize,
    pub label_mode: LabelMode,
    pub class_frequency: Vec<f64>,
    pub nodes: Vec<NodeReport>,
    pub summary: Summary,
}

impl HomophilyReport {
    pub fn prox_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| n.prox)
    }

    pub fn role_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| n.role)
    }

    pub fn mean_prox(&self) -> Option<f64> {
        self.summary.prox.as_ref().map(|s| s.mean)
    }

    pub fn mean_role(&self) -> Option<f64> {
        self.summary.role.as_ref().map(|s| s.mean)
    }

    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut s = String::from("id,prox,role,prior\n");
        for n in &self.nodes {
            writeln!(s, "{},{},{},{}", n.id, fmt(n.prox), fmt(n.role), fmt(n.prior)).unwrap();
        }
        s
    }
}

/// Both ratios and the prior for every node, with summary statistics over
/// the present values.
pub fn audit(graph: &Graph, labels: &NodeLabels, cfg: &HomophilyConfig) -> Result<HomophilyReport> {
    let prox = prox_ratios(graph, labels, cfg)?;
    let role = role_ratios(graph, labels, cfg)?;
    let class_frequency = class_priors(labels)?;
    let nodes: Vec<NodeReport> = (0..graph.node_count())
        .map(|i| NodeReport {
            id: i,
            prox: prox[i],
            role: role[i],
            prior: counted_label(labels, i, cfg.label_mode).map(|c| class_frequency[c]),
        })
        .collect();
    let summary = Summary {
        prox: SummaryStats::from_values(prox.iter().flatten().copied()),
        role: SummaryStats::from_values(role.iter().flatten().copied()),
    };
    Ok(HomophilyReport {
        theta: cfg.degree_threshold,
        label_mode: cfg.label_mode,
        class_frequency,
        nodes,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn known(classes: &[usize], c: usize) -> NodeLabels {
        NodeLabels::fully_known(classes.to_vec(), c).unwrap()
    }

    #[test]
    fn prox_two_thirds() {
        let g = Graph::unit_features(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let l = known(&[0, 0, 0, 1], 2);
        let r = prox_ghratio(&g, &l, 0, &HomophilyConfig::default()).unwrap();
        assert_eq!(r, Some(2.0 / 3.0));
    }

    #[test]
    fn prox_all_same_and_isolated() {
        let g = Graph::unit_features(7, (1..6).map(|i| (0, i))).unwrap();
        let l = known(&[1, 1, 1, 1, 1, 1, 0], 2);
        let cfg = HomophilyConfig::default();
        assert_eq!(prox_ghratio(&g, &l, 0, &cfg).unwrap(), Some(1.0));
        assert_eq!(prox_ghratio(&g, &l, 6, &cfg).unwrap(), None);
    }

    #[test]
    fn role_on_p3() {
        let g = Graph::unit_features(3, [(0, 1), (1, 2)]).unwrap();
        let l = known(&[0, 1, 0], 2);
        let cfg = HomophilyConfig {
            degree_threshold: 0,
            ..Default::default()
        };
        assert_eq!(role_ghratio(&g, &l, 0, &cfg).unwrap(), Some(1.0));
        assert_eq!(role_ghratio(&g, &l, 1, &cfg).unwrap(), None);
        assert_eq!(role_ratios(&g, &l, &cfg).unwrap(), vec![Some(1.0), None, Some(1.0)]);
    }

    #[test]
    fn unknown_label_is_contract_error_in_known_only_mode() {
        let g = Graph::unit_features(2, [(0, 1)]).unwrap();
        let l = NodeLabels::new(vec![Some(0), Some(1)], vec![false, true], 2).unwrap();
        let cfg = HomophilyConfig::default();
        assert!(matches!(prox_ghratio(&g, &l, 0, &cfg), Err(Error::Contract(_))));
        let pseudo = HomophilyConfig {
            label_mode: LabelMode::PseudoAugmented,
            ..cfg
        };
        assert_eq!(prox_ghratio(&g, &l, 0, &pseudo).unwrap(), Some(0.0));
    }

    #[test]
    fn prior_examples() {
        let l = known(&[0, 0, 1, 1], 2);
        assert_eq!(prior_baseline(&l, 0).unwrap(), 0.5);
        let l = known(&[2, 2, 2], 3);
        assert_eq!(prior_baseline(&l, 1).unwrap(), 1.0);
        let l = known(&[0, 0, 0, 1], 2);
        assert_eq!(prior_baseline(&l, 3).unwrap(), 0.25);
        let none = NodeLabels::new(vec![Some(0)], vec![false], 1).unwrap();
        assert!(prior_baseline(&none, 0).is_err());
    }

    #[test]
    fn audit_of_disjoint_label_aligned_cliques() {
        let mut pairs = Vec::new();
        for block in 0..2 {
            let base = block * 5;
            for u in 0..5 {
                for v in u + 1..5 {
                    pairs.push((base + u, base + v));
                }
            }
        }
        let g = Graph::unit_features(10, pairs).unwrap();
        let l = known(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1], 2);
        let report = audit(&g, &l, &HomophilyConfig::default()).unwrap();
        assert!(report.nodes.iter().all(|n| n.prox == Some(1.0)));
        assert_eq!(report.class_frequency, vec![0.5, 0.5]);
    }

    #[test]
    fn audit_of_complete_balanced_graph() {
        let pairs = (0..10).flat_map(|u| (u + 1..10).map(move |v| (u, v)));
        let g = Graph::unit_features(10, pairs).unwrap();
        let l = known(&[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 2);
        let report = audit(&g, &l, &HomophilyConfig::default()).unwrap();
        for n in &report.nodes {
            assert_eq!(n.prox, Some(4.0 / 9.0));
            assert_eq!(n.prior, Some(0.5));
        }
        let csv = report.to_csv();
        assert!(csv.starts_with("id,prox,role,prior\n0,0.4444444444444444,"));
    }

    #[test]
    fn summary_quartiles() {
        let s = SummaryStats::from_values([4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert_eq!(s.mean, 2.5);
        assert!(SummaryStats::from_values([]).is_none());
    }
}
