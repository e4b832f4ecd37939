use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{known_targets, AttackConfig, Predictions};
use crate::autodiff::{adamw_step, softmax_cross_entropy, AdamWConfig, Initializer, Mlp2, OptimizerState, Tape};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabels};
use crate::homophily::class_priors;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Two-layer MLP on node features; ignores structure.
    FeatureMlp,
    /// Plurality label among known neighbours, else the global prior.
    MajorityNeighbor,
}

pub fn baseline_attack(
    kind: BaselineKind,
    graph: &Graph,
    labels: &NodeLabels,
    cfg: &AttackConfig,
) -> Result<Predictions> {
    if labels.len() != graph.node_count() {
        return Err(Error::contract("labels do not cover the graph"));
    }
    labels.require_each_class_known()?;
    let dist = match kind {
        BaselineKind::FeatureMlp => feature_mlp(graph, labels, cfg)?,
        BaselineKind::MajorityNeighbor => majority_neighbor(graph, labels)?,
    };
    Ok(Predictions::new(dist, labels.known.clone()))
}

fn majority_neighbor(graph: &Graph, labels: &NodeLabels) -> Result<Matrix> {
    let c = labels.class_count;
    let prior = class_priors(labels)?;
    let mut out = Matrix::zeros(graph.node_count(), c);
    for i in 0..graph.node_count() {
        let mut counts = vec![0.0; c];
        for &j in graph.neighbors(i) {
            if let Some(z) = labels.known_label(j) {
                counts[z] += 1.0;
            }
        }
        let total: f64 = counts.iter().sum();
        let row = out.row_mut(i);
        if total > 0.0 {
            for (o, n) in row.iter_mut().zip(&counts) {
                *o = n / total;
            }
        } else {
            row.copy_from_slice(&prior);
        }
    }
    Ok(out)
}

fn feature_mlp(graph: &Graph, labels: &NodeLabels, cfg: &AttackConfig) -> Result<Matrix> {
    cfg.validate()?;
    let mlp = Mlp2::new("mlp", graph.feature_dim(), cfg.hidden, labels.class_count);
    let mut init = Initializer::new(cfg.seed);
    mlp.init(&mut init)?;
    let mut params = init.finish();
    let targets = Rc::new(known_targets(labels));
    let mut opt = OptimizerState::new(AdamWConfig::new(cfg.lr, cfg.weight_decay));
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let x = tape.constant(graph.features().clone());
        let logits = mlp.forward(&mut tape, &params, x)?;
        let loss = softmax_cross_entropy(&mut tape, logits, &targets)?;
        let grads = tape.backward(loss)?.for_params(&tape, &params);
        adamw_step(&mut params, &grads, &mut opt)?;
    }
    let mut tape = Tape::new();
    let x = tape.constant(graph.features().clone());
    let logits = mlp.forward(&mut tape, &params, x)?;
    let probs = tape.softmax_rows(logits);
    tape.check()?;
    Ok(tape.value(probs).clone())
}
