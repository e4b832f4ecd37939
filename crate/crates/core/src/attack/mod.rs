//! Dual-channel private-attribute inference.
//!
//! The proximity channel runs a two-layer GIN over the whole graph. The
//! structure-role channel runs a second two-layer GIN over every node's
//! ego network and mean-pools it. Each channel has a linear head; per node,
//! the two softmax outputs are mixed with weights proportional to the node's
//! current (pseudo-label) homophily ratios.

mod baseline;
mod ego;
mod theorem;

use std::fmt::Write as _;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

pub use baseline::{baseline_attack, BaselineKind};
pub use ego::{EgoBatch, DEFAULT_EGO_ROW_BUDGET};
pub use theorem::{check_theorem_bound, spectral_norm, BoundReport, PsiEncoder};

use crate::autodiff::{
    adamw_step, softmax_rows, AdamWConfig, GinLayer, Initializer, Linear, MessageGraph, OptimizerState, ParamSet, Tape,
    Var,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabels};
use crate::homophily::{class_priors, prox_ratios, role_ratios, HomophilyConfig, LabelMode};
use crate::matrix::Matrix;

/// Which channels feed the prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackVariant {
    /// Ratio-weighted routing refreshed from pseudo-labels.
    Full,
    /// Fixed 0.5 / 0.5 mix.
    Equal,
    ProxOnly,
    RoleOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub hops: usize,
    pub hidden: usize,
    pub degree_threshold: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub update_interval: usize,
    pub variant: AttackVariant,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            hops: 2,
            hidden: 64,
            degree_threshold: 5,
            lr: 1e-3,
            weight_decay: 5e-4,
            epochs: 300,
            update_interval: 10,
            variant: AttackVariant::Full,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.hops == 0 {
            return bad("hops must be at least 1");
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive");
        }
        if self.update_interval == 0 {
            return bad("update interval must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be non-negative");
        }
        Ok(())
    }
}

/// Per-node routing inputs. Absent ratios fall back to `prior`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutingState {
    pub prox: Option<f64>,
    pub role: Option<f64>,
    pub prior: Option<f64>,
}

impl RoutingState {
    pub const INITIAL: Self = Self::fixed(0.5, 0.5);

    pub const fn fixed(prox: f64, role: f64) -> Self {
        Self {
            prox: Some(prox),
            role: Some(role),
            prior: None,
        }
    }

    /// Mixing weights normalized to sum 1. When both are zero the channels
    /// are mixed equally.
    pub fn weights(&self) -> Result<(f64, f64)> {
        let fill = |r: Option<f64>| {
            r.or(self.prior)
                .ok_or_else(|| Error::contract("routing ratio absent and no prior available"))
        };
        let p = fill(self.prox)?;
        let r = fill(self.role)?;
        let s = p + r;
        Ok(if s > 0.0 { (p / s, r / s) } else { (0.5, 0.5) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackArch {
    pub feature_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub hops: usize,
}

struct Channel {
    layers: [GinLayer; 2],
    head: Linear,
}

impl Channel {
    fn new(name: &str, arch: &AttackArch) -> Self {
        Self {
            layers: [
                GinLayer::new(&format!("{name}.gin0"), arch.feature_dim, arch.hidden),
                GinLayer::new(&format!("{name}.gin1"), arch.hidden, arch.hidden),
            ],
            head: Linear::new(format!("{name}.head"), arch.hidden, arch.classes),
        }
    }

    fn init(&self, init: &mut Initializer) -> Result<()> {
        for l in &self.layers {
            l.init(init)?;
        }
        self.head.init(init)
    }

    fn encode(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        x: Var,
        graph: &Rc<MessageGraph>,
        weights: Option<Var>,
    ) -> Result<Var> {
        let h = self.layers[0].forward(tape, params, x, graph, weights)?;
        self.layers[1].forward(tape, params, h, graph, weights)
    }
}

/// Message graph over the canonical edge list, so edge weight `e` belongs to
/// `graph.edges()[e]`.
pub fn message_graph(graph: &Graph) -> Rc<MessageGraph> {
    Rc::new(MessageGraph::new(graph.node_count(), graph.edges().iter().copied()))
}

/// Graph-derived inputs shared by every forward pass over one graph.
///
/// `rows` optionally restricts the output to a subset of nodes, in which case
/// the ego batch covers only those centers. The proximity channel still runs
/// on the whole graph.
pub struct AttackContext {
    pub graph: Rc<MessageGraph>,
    pub features: Matrix,
    pub ego: Option<EgoBatch>,
    pub rows: Option<Rc<Vec<usize>>>,
}

impl AttackContext {
    /// Context with the ego batch for `hops`, as the role channel needs.
    pub fn new(graph: &Graph, hops: usize) -> Result<Self> {
        Ok(Self {
            ego: Some(EgoBatch::build(graph, hops)?),
            ..Self::without_ego(graph)
        })
    }

    pub fn without_ego(graph: &Graph) -> Self {
        Self {
            graph: message_graph(graph),
            features: graph.features().clone(),
            ego: None,
            rows: None,
        }
    }

    /// Builds the ego batch only when the model routes weight to the role
    /// channel.
    pub fn for_model(graph: &Graph, model: &AttackModel) -> Result<Self> {
        if model.uses_role()? {
            Self::new(graph, model.arch.hops)
        } else {
            Ok(Self::without_ego(graph))
        }
    }

    /// Like [`AttackContext::for_model`] with output restricted to `rows`.
    pub fn for_rows(graph: &Graph, model: &AttackModel, rows: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= graph.node_count()) {
            return Err(Error::contract(format!("row {bad} is not a node")));
        }
        let ego = if model.uses_role()? {
            Some(EgoBatch::for_centers(
                graph,
                model.arch.hops,
                rows.clone(),
                DEFAULT_EGO_ROW_BUDGET,
            )?)
        } else {
            None
        };
        Ok(Self {
            ego,
            rows: Some(Rc::new(rows)),
            ..Self::without_ego(graph)
        })
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count
    }

    /// Node id of each output row.
    pub fn row_nodes(&self) -> Vec<usize> {
        match &self.rows {
            Some(r) => r.to_vec(),
            None => (0..self.node_count()).collect(),
        }
    }
}

pub struct AttackForward {
    pub prox_logits: Option<Var>,
    pub role_logits: Option<Var>,
    /// Log of the routed class distribution, one row per node.
    pub log_distribution: Var,
    pub distribution: Matrix,
}

pub struct AttackModel {
    pub arch: AttackArch,
    pub degree_threshold: usize,
    pub variant: AttackVariant,
    pub params: ParamSet,
    pub routing: Vec<RoutingState>,
    prox: Channel,
    role: Channel,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    arch: AttackArch,
    degree_threshold: usize,
    variant: AttackVariant,
    routing: Vec<RoutingState>,
}

impl AttackModel {
    pub fn new(arch: AttackArch, node_count: usize, cfg: &AttackConfig) -> Result<Self> {
        if arch.classes == 0 {
            return Err(Error::contract("attack needs at least one class"));
        }
        let prox = Channel::new("prox", &arch);
        let role = Channel::new("role", &arch);
        let mut init = Initializer::new(cfg.seed);
        prox.init(&mut init)?;
        role.init(&mut init)?;
        let mut params = init.finish();
        // Sum aggregation makes hidden states grow with degree, so random
        // heads would start with saturated softmaxes; the routed mixture then
        // sends no gradient to whichever channel is confidently wrong.
        for head in [&prox.head, &role.head] {
            params
                .get_mut(&head.weight_name())
                .expect("head weight")
                .as_mut_slice()
                .fill(0.0);
        }
        let start = match cfg.variant {
            AttackVariant::Full | AttackVariant::Equal => RoutingState::INITIAL,
            AttackVariant::ProxOnly => RoutingState::fixed(1.0, 0.0),
            AttackVariant::RoleOnly => RoutingState::fixed(0.0, 1.0),
        };
        Ok(Self {
            arch,
            degree_threshold: cfg.degree_threshold,
            variant: cfg.variant,
            params,
            routing: vec![start; node_count],
            prox,
            role,
        })
    }

    fn with_params(
        arch: AttackArch,
        degree_threshold: usize,
        variant: AttackVariant,
        params: ParamSet,
        routing: Vec<RoutingState>,
    ) -> Self {
        Self {
            prox: Channel::new("prox", &arch),
            role: Channel::new("role", &arch),
            arch,
            degree_threshold,
            variant,
            params,
            routing,
        }
    }

    /// Normalized per-node weights `(prox, role)`.
    pub fn routing_weights(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut wp = Vec::with_capacity(self.routing.len());
        let mut wr = Vec::with_capacity(self.routing.len());
        for s in &self.routing {
            let (p, r) = s.weights()?;
            wp.push(p);
            wr.push(r);
        }
        Ok((wp, wr))
    }

    pub fn uses_prox(&self) -> Result<bool> {
        Ok(self.routing_weights()?.0.iter().any(|&w| w > 0.0))
    }

    pub fn uses_role(&self) -> Result<bool> {
        Ok(self.routing_weights()?.1.iter().any(|&w| w > 0.0))
    }

    fn check_context(&self, ctx: &AttackContext) -> Result<()> {
        if ctx.node_count() != self.routing.len() {
            return Err(Error::contract(format!(
                "model routes {} nodes but the graph has {}",
                self.routing.len(),
                ctx.node_count()
            )));
        }
        if ctx.features.cols() != self.arch.feature_dim {
            return Err(Error::contract(format!(
                "model expects {} features, graph has {}",
                self.arch.feature_dim,
                ctx.features.cols()
            )));
        }
        Ok(())
    }

    /// Proximity-channel logits; `weights` are optional `m x 1` edge weights
    /// over the canonical edge list.
    pub fn prox_logits(&self, tape: &mut Tape, ctx: &AttackContext, weights: Option<Var>) -> Result<Var> {
        self.check_context(ctx)?;
        let x = tape.constant(ctx.features.clone());
        let h = self.prox.encode(tape, &self.params, x, &ctx.graph, weights)?;
        let h = match &ctx.rows {
            Some(rows) => tape.gather(h, Rc::clone(rows)),
            None => h,
        };
        self.prox.head.forward(tape, &self.params, h)
    }

    /// Structure-role logits: the GIN runs on every ego network and the
    /// node states of each are averaged before the head.
    pub fn role_logits(&self, tape: &mut Tape, ctx: &AttackContext, weights: Option<Var>) -> Result<Var> {
        self.check_context(ctx)?;
        let ego = ctx
            .ego
            .as_ref()
            .ok_or_else(|| Error::contract("role channel needs an ego batch"))?;
        let expected = ctx.row_nodes();
        if ego.centers != expected {
            return Err(Error::contract("ego batch centers differ from the context rows"));
        }
        if ego.hops != self.arch.hops {
            return Err(Error::contract(format!(
                "ego batch built for {} hops, model uses {}",
                ego.hops, self.arch.hops
            )));
        }
        let x = tape.constant(ego.features.clone());
        let w = weights.map(|w| tape.gather(w, Rc::clone(&ego.edge_ids)));
        let h = self.role.encode(tape, &self.params, x, &ego.graph, w)?;
        let pooled = tape.segment_mean(h, Rc::clone(&ego.offsets));
        self.role.head.forward(tape, &self.params, pooled)
    }

    /// Role logits of one node from a freshly extracted ego network.
    pub fn role_logits_uncached(&self, graph: &Graph, node: usize) -> Result<Vec<f64>> {
        let sub = graph.ego_network(node, self.arch.hops)?;
        let mut tape = Tape::new();
        let mut feats = Matrix::zeros(sub.node_count(), graph.feature_dim());
        for (r, &i) in sub.nodes.iter().enumerate() {
            feats.row_mut(r).copy_from_slice(graph.features().row(i));
        }
        let x = tape.constant(feats);
        let local = Rc::new(MessageGraph::new(sub.node_count(), sub.edges.iter().copied()));
        let h = self.role.encode(&mut tape, &self.params, x, &local, None)?;
        let all: Vec<usize> = (0..sub.node_count()).collect();
        let pooled = crate::autodiff::mean_pool(&mut tape, h, &all)?;
        let logits = self.role.head.forward(&mut tape, &self.params, pooled)?;
        tape.check()?;
        Ok(tape.value(logits).as_slice().to_vec())
    }

    /// Both channels (those with nonzero routing weight) and the routed
    /// distribution, one row per context row.
    pub fn forward(&self, tape: &mut Tape, ctx: &AttackContext, weights: Option<Var>) -> Result<AttackForward> {
        let (wp, wr) = self.routing_weights()?;
        let (wp, wr) = match &ctx.rows {
            Some(rows) => (
                rows.iter().map(|&i| wp[i]).collect(),
                rows.iter().map(|&i| wr[i]).collect(),
            ),
            None => (wp, wr),
        };
        let use_p = wp.iter().any(|&w| w > 0.0);
        let use_r = wr.iter().any(|&w| w > 0.0);
        let prox_logits = use_p.then(|| self.prox_logits(tape, ctx, weights)).transpose()?;
        let role_logits = use_r.then(|| self.role_logits(tape, ctx, weights)).transpose()?;
        let log_distribution = match (prox_logits, role_logits) {
            (Some(p), Some(r)) => {
                let lp = tape.log_softmax_rows(p);
                let lr = tape.log_softmax_rows(r);
                tape.log_mix(lp, lr, Rc::new(wp), Rc::new(wr))
            }
            (Some(x), None) | (None, Some(x)) => tape.log_softmax_rows(x),
            (None, None) => unreachable!("normalized weights never both vanish"),
        };
        tape.check()?;
        let distribution = tape.value(log_distribution).map(f64::exp);
        Ok(AttackForward {
            prox_logits,
            role_logits,
            log_distribution,
            distribution,
        })
    }

    /// Routed distribution without gradients.
    pub fn predict(&self, ctx: &AttackContext) -> Result<Matrix> {
        let mut tape = Tape::new();
        Ok(self.forward(&mut tape, ctx, None)?.distribution)
    }

    /// Recomputes routing from the pseudo-labels implied by `distribution`.
    /// Only the full variant routes adaptively; the others keep their fixed
    /// weights. Returns the pseudo-labels.
    pub fn update_routing(&mut self, graph: &Graph, labels: &NodeLabels, distribution: &Matrix) -> Result<Vec<usize>> {
        let pseudo = hard_labels(distribution);
        if self.variant == AttackVariant::Full {
            self.routing = pseudo_routing(graph, labels, &pseudo, self.degree_threshold)?;
        }
        Ok(pseudo)
    }

    pub fn sidecar_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Sidecar {
            format_version: crate::autodiff::PARAM_FORMAT_VERSION,
            arch: self.arch,
            degree_threshold: self.degree_threshold,
            variant: self.variant,
            routing: self.routing.clone(),
        })?)
    }

    pub fn from_parts(params: ParamSet, sidecar_json: &str) -> Result<Self> {
        let s: Sidecar = serde_json::from_str(sidecar_json)?;
        let model = Self::with_params(s.arch, s.degree_threshold, s.variant, params, s.routing);
        let mut expected = Initializer::new(0);
        model.prox.init(&mut expected)?;
        model.role.init(&mut expected)?;
        let expected = expected.finish();
        let matches = expected.len() == model.params.len()
            && expected
                .iter()
                .all(|(k, v)| model.params.get(k).is_some_and(|p| p.shape() == v.shape()));
        if !matches {
            return Err(Error::Config(
                "parameters do not match the recorded architecture".into(),
            ));
        }
        Ok(model)
    }
}

/// Routing state from the homophily ratios under pseudo-augmented labels:
/// known nodes keep their label, hidden nodes take `pseudo`.
pub fn pseudo_routing(
    graph: &Graph,
    labels: &NodeLabels,
    pseudo: &[usize],
    degree_threshold: usize,
) -> Result<Vec<RoutingState>> {
    let observed = labels.observed();
    let aug = observed.with_pseudo(pseudo);
    let cfg = HomophilyConfig {
        degree_threshold,
        label_mode: LabelMode::PseudoAugmented,
    };
    let prox = prox_ratios(graph, &aug, &cfg)?;
    let role = role_ratios(graph, &aug, &cfg)?;
    let priors = class_priors(&observed)?;
    Ok((0..graph.node_count())
        .map(|i| RoutingState {
            prox: prox[i],
            role: role[i],
            prior: aug.label[i].map(|c| priors[c]),
        })
        .collect())
}

/// Row-wise argmax; ties go to the smallest class id.
pub fn hard_labels(distribution: &Matrix) -> Vec<usize> {
    (0..distribution.rows())
        .map(|i| {
            let row = distribution.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// `w_p softmax(prox) + w_r softmax(role)` per row with normalized weights.
pub fn route(prox_logits: &Matrix, role_logits: &Matrix, routing: &[RoutingState]) -> Result<Matrix> {
    if prox_logits.shape() != role_logits.shape() || prox_logits.rows() != routing.len() {
        return Err(Error::contract("route inputs disagree in shape"));
    }
    let p = softmax_rows(prox_logits);
    let r = softmax_rows(role_logits);
    let mut out = Matrix::zeros(p.rows(), p.cols());
    for (i, s) in routing.iter().enumerate() {
        let (wp, wr) = s.weights()?;
        for c in 0..p.cols() {
            out[(i, c)] = wp * p[(i, c)] + wr * r[(i, c)];
        }
    }
    Ok(out)
}

/// `-(1/|T|) sum log p[i][c]` over targets, given `log p`.
pub fn routed_cross_entropy(tape: &mut Tape, log_distribution: Var, targets: &[(usize, usize)]) -> Result<Var> {
    if targets.is_empty() {
        return Err(Error::contract("cross-entropy over an empty mask"));
    }
    let picked = tape.pick_mean(log_distribution, Rc::new(targets.to_vec()));
    Ok(tape.scale(picked, -1.0))
}

/// `(node, class)` pairs of every known node.
pub fn known_targets(labels: &NodeLabels) -> Vec<(usize, usize)> {
    (0..labels.len())
        .filter_map(|i| labels.known_label(i).map(|c| (i, c)))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub train_accuracy: f64,
}

/// Trains the attack on the known labels with AdamW.
pub fn train_attack(graph: &Graph, labels: &NodeLabels, cfg: &AttackConfig) -> Result<(AttackModel, TrainHistory)> {
    cfg.validate()?;
    if labels.len() != graph.node_count() {
        return Err(Error::contract("labels do not cover the graph"));
    }
    labels.require_each_class_known()?;
    let observed = labels.observed();
    let arch = AttackArch {
        feature_dim: graph.feature_dim(),
        hidden: cfg.hidden,
        classes: labels.class_count,
        hops: cfg.hops,
    };
    let mut model = AttackModel::new(arch, graph.node_count(), cfg)?;
    let targets = known_targets(&observed);
    // The loss only reads known nodes, so the role channel trains on their
    // ego networks alone; routing refreshes use a full pass.
    let full = AttackContext::for_model(graph, &model)?;
    let (train, train_targets) = if model.uses_role()? {
        let rows = targets.iter().map(|&(i, _)| i).collect();
        let local = targets.iter().enumerate().map(|(r, &(_, c))| (r, c)).collect();
        (Some(AttackContext::for_rows(graph, &model, rows)?), local)
    } else {
        (None, targets.clone())
    };
    let ctx = train.as_ref().unwrap_or(&full);
    let mut opt = OptimizerState::new(AdamWConfig::new(cfg.lr, cfg.weight_decay));
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, ctx, None)?;
        let loss = routed_cross_entropy(&mut tape, fwd.log_distribution, &train_targets)?;
        let grads = tape.backward(loss)?;
        let grads = grads.for_params(&tape, &model.params);
        history.loss.push(tape.value(loss).item());
        adamw_step(&mut model.params, &grads, &mut opt)?;
        if model.variant == AttackVariant::Full && (epoch + 1) % cfg.update_interval == 0 {
            let dist = model.predict(&full)?;
            model.update_routing(graph, &observed, &dist)?;
        }
    }
    let pred = hard_labels(&model.predict(&full)?);
    let hits = targets.iter().filter(|&&(i, c)| pred[i] == c).count();
    history.train_accuracy = hits as f64 / targets.len() as f64;
    Ok((model, history))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub distribution: Matrix,
    pub hard: Vec<usize>,
    pub known: Vec<bool>,
}

impl Predictions {
    pub fn new(distribution: Matrix, known: Vec<bool>) -> Self {
        Self {
            hard: hard_labels(&distribution),
            distribution,
            known,
        }
    }

    /// `node,pred,conf_0..conf_{C-1}`, one row per node.
    pub fn to_csv(&self) -> String {
        let c = self.distribution.cols();
        let mut s = String::from("node,pred");
        for k in 0..c {
            write!(s, ",conf_{k}").unwrap();
        }
        s.push('\n');
        for (i, &p) in self.hard.iter().enumerate() {
            write!(s, "{i},{p}").unwrap();
            for &v in self.distribution.row(i) {
                write!(s, ",{v:.6}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Full forward of both channels and the router. Known nodes are predicted
/// like any other; their labels are left untouched in `labels`.
pub fn infer(model: &AttackModel, graph: &Graph, labels: &NodeLabels) -> Result<Predictions> {
    let ctx = AttackContext::for_model(graph, model)?;
    Ok(Predictions::new(model.predict(&ctx)?, labels.known.clone()))
}

/// Proximity logits of every node.
pub fn prox_channel(graph: &Graph, model: &AttackModel) -> Result<Matrix> {
    let ctx = AttackContext::without_ego(graph);
    let mut tape = Tape::new();
    let v = model.prox_logits(&mut tape, &ctx, None)?;
    tape.check()?;
    Ok(tape.value(v).clone())
}

/// Structure-role logits of every node.
pub fn role_channel(graph: &Graph, model: &AttackModel) -> Result<Matrix> {
    let ctx = AttackContext::new(graph, model.arch.hops)?;
    let mut tape = Tape::new();
    let v = model.role_logits(&mut tape, &ctx, None)?;
    tape.check()?;
    Ok(tape.value(v).clone())
}
