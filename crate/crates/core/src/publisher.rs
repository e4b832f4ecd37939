//! Learnable removal-only edge sampler.
//!
//! A two-layer GraphSAGE encoder and an MLP scorer assign every edge a keep
//! probability `T`. Training alternates with an attack co-model: each epoch
//! draws a relaxed graph `A' = sigmoid((log U - log(1-U) + logit T) / eps)`,
//! steps the attack on its own loss over `A'`, then steps the sampler on
//! `-gamma * adv + eta * dis + lambda * reg`, where `dis` pulls both soft
//! homophily ratios towards the class prior and `reg` rewards keeping edges.

use std::fmt::Write as _;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{
    known_targets, message_graph, pseudo_routing, routed_cross_entropy, AttackArch, AttackConfig, AttackContext,
    AttackModel,
};
use crate::autodiff::{
    adamw_step, sigmoid_scalar, AdamWConfig, Initializer, MessageGraph, Mlp2, OptimizerState, ParamSet, SageLayer,
    Tape, Var,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabels};
use crate::homophily::{class_priors, LabelMode};
use crate::matrix::Matrix;

pub const PROB_FLOOR: f64 = 1e-6;
/// Soft denominators below this make the corresponding ratio absent.
pub const SOFT_ABSENT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerVariant {
    Full,
    /// Adversarial and retention terms only (`eta = 0`).
    AdvOnly,
    /// Disentangling and retention terms only (`gamma = 0`).
    DisOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub hidden: usize,
    pub scorer_hidden: usize,
    pub temperature: f64,
    pub gamma: f64,
    pub eta: f64,
    pub lambda: f64,
    pub smoothing: f64,
    pub degree_threshold: usize,
    pub update_interval: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Attack updates per epoch; extra ones reuse the epoch's relaxed draw.
    pub attack_steps: usize,
    /// Sampler updates per epoch; extra ones draw a fresh relaxed graph.
    pub sampler_steps: usize,
    pub label_mode: LabelMode,
    pub variant: SamplerVariant,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            scorer_hidden: 32,
            temperature: 0.5,
            gamma: 5.0,
            eta: 5.0,
            lambda: 1.0,
            smoothing: 1.0,
            degree_threshold: 5,
            update_interval: 10,
            lr: 2e-3,
            weight_decay: 5e-4,
            epochs: 200,
            attack_steps: 1,
            sampler_steps: 1,
            label_mode: LabelMode::PseudoAugmented,
            variant: SamplerVariant::Full,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return bad("smoothing must be positive");
        }
        for w in [self.gamma, self.eta, self.lambda] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad("loss weights must be non-negative");
            }
        }
        if self.hidden == 0 || self.scorer_hidden == 0 {
            return bad("hidden widths must be positive");
        }
        if self.update_interval == 0 {
            return bad("update interval must be positive");
        }
        if self.attack_steps == 0 || self.sampler_steps == 0 {
            return bad("inner step counts must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }

    /// `(gamma, eta, lambda)` after applying the variant.
    pub fn effective_weights(&self) -> (f64, f64, f64) {
        match self.variant {
            SamplerVariant::Full => (self.gamma, self.eta, self.lambda),
            SamplerVariant::AdvOnly => (self.gamma, 0.0, self.lambda),
            SamplerVariant::DisOnly => (0.0, self.eta, self.lambda),
        }
    }
}

/// `sigmoid((log U - log(1 - U) + logit T) / eps)`.
pub fn gumbel_relax(t: f64, u: f64, eps: f64) -> f64 {
    let t = t.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let logit = (t / (1.0 - t)).ln();
    sigmoid_scalar(((u.ln() - (1.0 - u).ln()) + logit) / eps)
}

/// Uniform draw from the open interval (0, 1).
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub struct SamplerModel {
    pub config: SamplerConfig,
    pub params: ParamSet,
    encoder: [SageLayer; 2],
    scorer: Mlp2,
}

impl SamplerModel {
    pub fn new(feature_dim: usize, config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        let encoder = [
            SageLayer::new("enc.sage0", feature_dim, config.hidden),
            SageLayer::new("enc.sage1", config.hidden, config.hidden),
        ];
        let scorer = Mlp2::new("scorer", 2 * config.hidden, config.scorer_hidden, 1);
        let mut init = Initializer::new(config.seed);
        for l in &encoder {
            l.init(&mut init)?;
        }
        scorer.init(&mut init)?;
        Ok(Self {
            config: config.clone(),
            params: init.finish(),
            encoder,
            scorer,
        })
    }

    /// Keep probabilities as an `m x 1` var, clamped to
    /// `[PROB_FLOOR, 1 - PROB_FLOOR]`.
    pub fn probabilities(&self, tape: &mut Tape, graph: &Graph, msg: &Rc<MessageGraph>) -> Result<Var> {
        let x = tape.constant(graph.features().clone());
        let h = self.encoder[0].forward(tape, &self.params, x, msg, None)?;
        let h = self.encoder[1].forward(tape, &self.params, h, msg, None)?;
        let us = Rc::new(graph.edges().iter().map(|&(u, _)| u).collect::<Vec<_>>());
        let vs = Rc::new(graph.edges().iter().map(|&(_, v)| v).collect::<Vec<_>>());
        let hu = tape.gather(h, us);
        let hv = tape.gather(h, vs);
        let pair = tape.concat_cols(hu, hv);
        let score = self.scorer.forward(tape, &self.params, pair)?;
        let t = tape.sigmoid(score);
        let t = tape.clamp(t, PROB_FLOOR, 1.0 - PROB_FLOOR);
        tape.check()?;
        Ok(t)
    }

    /// Zeroes the scorer's output layer so every edge starts at `T = 0.5`.
    pub fn zero_scorer_output(&mut self) {
        for name in [self.scorer.second.weight_name(), self.scorer.second.bias_name()] {
            let p = self.params.get_mut(&name).expect("scorer parameter");
            p.as_mut_slice().fill(0.0);
        }
    }
}

/// Keep probability of every canonical edge.
pub fn edge_probabilities(graph: &Graph, model: &SamplerModel) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let msg = message_graph(graph);
    let t = model.probabilities(&mut tape, graph, &msg)?;
    Ok(tape.value(t).as_slice().to_vec())
}

/// Relaxed edge weights drawn on the tape; differentiable in `t`.
pub fn relax_on_tape(tape: &mut Tape, t: Var, uniforms: &[f64], eps: f64) -> Var {
    let noise: Vec<f64> = uniforms.iter().map(|&u| u.ln() - (1.0 - u).ln()).collect();
    let noise = tape.constant(Matrix::column(noise));
    let log_t = tape.ln(t);
    let one_minus = tape.affine(t, -1.0, 1.0);
    let log_1mt = tape.ln(one_minus);
    let logit = tape.sub(log_t, log_1mt);
    let z = tape.add(noise, logit);
    let z = tape.scale(z, 1.0 / eps);
    tape.sigmoid(z)
}

/// Soft proximity and structure-role ratios of a weighted graph.
pub struct SoftRatios {
    pub prox: Var,
    pub role: Var,
    pub prox_denominator: Vec<f64>,
    pub role_denominator: Vec<f64>,
    pub soft_degree: Vec<f64>,
}

impl SoftRatios {
    /// Whether node `i`'s proximity ratio is present.
    pub fn prox_present(&self, i: usize) -> bool {
        self.prox_denominator[i] >= SOFT_ABSENT
    }

    /// Whether node `i`'s role ratio is present. A node whose soft degree has
    /// vanished is treated as absent too: it has no structure left to leak.
    pub fn role_present(&self, i: usize) -> bool {
        self.role_denominator[i] >= SOFT_ABSENT && self.soft_degree[i] >= SOFT_ABSENT
    }
}

/// Differentiable ratios under edge weights `a` (`m x 1`, aligned with the
/// edges of `msg`). Uncounted nodes (`classes[i] == None`) get 0 and neither
/// contribute to nor receive ratios. Degrees within `theta` count as similar
/// through the kernel `sigmoid((theta + 0.5 - |d_i - d_j|) / s)`.
pub fn soft_ghratio(
    tape: &mut Tape,
    a: Var,
    msg: &Rc<MessageGraph>,
    classes: &Rc<Vec<Option<usize>>>,
    theta: usize,
    smoothing: f64,
) -> SoftRatios {
    let m = msg.edges.len();
    let mut same_u = Vec::with_capacity(m);
    let mut same_v = Vec::with_capacity(m);
    let mut cnt_u = Vec::with_capacity(m);
    let mut cnt_v = Vec::with_capacity(m);
    for &(u, v) in &msg.edges {
        let (cu, cv) = (classes[u as usize], classes[v as usize]);
        let same = f64::from(u8::from(cu.is_some() && cu == cv));
        same_u.push(same);
        same_v.push(same);
        cnt_u.push(f64::from(u8::from(cv.is_some())));
        cnt_v.push(f64::from(u8::from(cu.is_some())));
    }
    let num = tape.incident_sum(a, msg, Rc::new(same_u), Rc::new(same_v));
    let den = tape.incident_sum(a, msg, Rc::new(cnt_u), Rc::new(cnt_v));
    let inv = tape.safe_recip(den);
    let prox = tape.mul(num, inv);
    let ones = Rc::new(vec![1.0; m]);
    let degree = tape.incident_sum(a, msg, Rc::clone(&ones), ones);
    let role = tape.soft_role(degree, Rc::clone(classes), theta as f64 + 0.5, smoothing);
    SoftRatios {
        prox_denominator: tape.value(den).as_slice().to_vec(),
        role_denominator: tape.soft_role_denominators(role).to_vec(),
        soft_degree: tape.value(degree).as_slice().to_vec(),
        prox,
        role,
    }
}

/// Mean over counted nodes of `|prox - prior| + |role - prior|`, skipping
/// absent terms. Nodes with both terms absent do not count; if none remain
/// the loss is 0.
pub fn disentangle_loss(tape: &mut Tape, ratios: &SoftRatios, priors: &[Option<f64>]) -> Var {
    let n = priors.len();
    let mut wp = vec![0.0; n];
    let mut wr = vec![0.0; n];
    let mut prior_col = vec![0.0; n];
    let mut counted = 0usize;
    for i in 0..n {
        let Some(p) = priors[i] else { continue };
        prior_col[i] = p;
        let (hp, hr) = (ratios.prox_present(i), ratios.role_present(i));
        wp[i] = f64::from(u8::from(hp));
        wr[i] = f64::from(u8::from(hr));
        counted += usize::from(hp || hr);
    }
    if counted == 0 {
        return tape.constant(Matrix::scalar(0.0));
    }
    let scale = 1.0 / counted as f64;
    wp.iter_mut().chain(wr.iter_mut()).for_each(|w| *w *= scale);
    let prior = tape.constant(Matrix::column(prior_col));
    let dp = tape.sub(ratios.prox, prior);
    let dp = tape.abs(dp);
    let dr = tape.sub(ratios.role, prior);
    let dr = tape.abs(dr);
    let lp = tape.weighted_sum(dp, Rc::new(wp));
    let lr = tape.weighted_sum(dr, Rc::new(wr));
    tape.add(lp, lr)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub adv: f64,
    pub dis: f64,
    pub reg: f64,
    pub total: f64,
}

/// Label and prior inputs of the disentangling loss.
#[derive(Clone, Debug)]
pub struct DisTargets {
    pub classes: Rc<Vec<Option<usize>>>,
    pub priors: Vec<Option<f64>>,
}

impl DisTargets {
    /// Counted labels are the known ones, plus `pseudo` for hidden nodes
    /// when given.
    pub fn new(labels: &NodeLabels, pseudo: Option<&[usize]>) -> Result<Self> {
        let observed = labels.observed();
        let freq = class_priors(&observed)?;
        let counted = match pseudo {
            Some(p) => observed.with_pseudo(p).label,
            None => observed.label,
        };
        Ok(Self {
            priors: counted.iter().map(|c| c.map(|c| freq[c])).collect(),
            classes: Rc::new(counted),
        })
    }
}

/// Vars of one forward pass through the relaxed graph.
pub struct LossVars {
    pub adv: Option<Var>,
    pub dis: Var,
    pub reg: Var,
    pub total: Var,
    pub keep: Var,
    pub relaxed: Var,
    pub distribution: Option<Matrix>,
}

/// All three losses for one relaxed draw. `attack` may be omitted when
/// `gamma = 0`; `adv` is then absent and contributes nothing.
#[allow(clippy::too_many_arguments)]
pub fn losses_on_tape(
    tape: &mut Tape,
    graph: &Graph,
    msg: &Rc<MessageGraph>,
    sampler: &SamplerModel,
    attack: Option<(&AttackModel, &AttackContext)>,
    targets: &[(usize, usize)],
    dis: &DisTargets,
    uniforms: &[f64],
) -> Result<LossVars> {
    let cfg = &sampler.config;
    let (gamma, eta, lambda) = cfg.effective_weights();
    let keep = sampler.probabilities(tape, graph, msg)?;
    let relaxed = relax_on_tape(tape, keep, uniforms, cfg.temperature);
    let (adv, distribution) = match attack {
        Some((model, ctx)) => {
            let f = model.forward(tape, ctx, Some(relaxed))?;
            (
                Some(routed_cross_entropy(tape, f.log_distribution, targets)?),
                Some(f.distribution),
            )
        }
        None => (None, None),
    };
    let ratios = soft_ghratio(tape, relaxed, msg, &dis.classes, cfg.degree_threshold, cfg.smoothing);
    let dis_v = disentangle_loss(tape, &ratios, &dis.priors);
    let log_t = tape.ln(keep);
    let mean_log = tape.mean(log_t);
    let reg = tape.scale(mean_log, -1.0);
    let mut total = tape.scale(reg, lambda);
    let d = tape.scale(dis_v, eta);
    total = tape.add(total, d);
    if let Some(a) = adv {
        let a = tape.scale(a, -gamma);
        total = tape.add(total, a);
    }
    tape.check()?;
    Ok(LossVars {
        adv,
        dis: dis_v,
        reg,
        total,
        keep,
        relaxed,
        distribution,
    })
}

impl LossVars {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        LossBreakdown {
            adv: self.adv.map_or(0.0, |a| tape.value(a).item()),
            dis: tape.value(self.dis).item(),
            reg: tape.value(self.reg).item(),
            total: tape.value(self.total).item(),
        }
    }
}

pub struct TrainedSampler {
    pub model: SamplerModel,
    pub attack: Option<AttackModel>,
    pub history: Vec<LossBreakdown>,
    pub keep_probabilities: Vec<f64>,
}

fn uniforms(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| open_uniform(rng)).collect()
}

/// Alternating training of the sampler against an attack co-model.
pub fn train_sampler(
    graph: &Graph,
    labels: &NodeLabels,
    attack_cfg: &AttackConfig,
    cfg: &SamplerConfig,
) -> Result<TrainedSampler> {
    cfg.validate()?;
    attack_cfg.validate()?;
    if labels.len() != graph.node_count() {
        return Err(Error::contract("labels do not cover the graph"));
    }
    labels.require_each_class_known()?;
    let observed = labels.observed();
    let (gamma, eta, _) = cfg.effective_weights();
    let pseudo_mode = cfg.label_mode == LabelMode::PseudoAugmented;
    let needs_attack = gamma > 0.0 || (eta > 0.0 && pseudo_mode);

    let msg = message_graph(graph);
    let mut sampler = SamplerModel::new(graph.feature_dim(), cfg)?;
    let mut attack = if needs_attack {
        let arch = AttackArch {
            feature_dim: graph.feature_dim(),
            hidden: attack_cfg.hidden,
            classes: labels.class_count,
            hops: attack_cfg.hops,
        };
        Some(AttackModel::new(arch, graph.node_count(), attack_cfg)?)
    } else {
        None
    };
    let targets = known_targets(&observed);
    // The adversarial loss reads known nodes only; pseudo-label refreshes
    // run the attack over every node.
    let (full_ctx, ctx, train_targets) = match &attack {
        Some(a) => {
            let rows = targets.iter().map(|&(i, _)| i).collect();
            let local: Vec<(usize, usize)> = targets.iter().enumerate().map(|(r, &(_, c))| (r, c)).collect();
            (
                Some(AttackContext::for_model(graph, a)?),
                Some(AttackContext::for_rows(graph, a, rows)?),
                local,
            )
        }
        None => (None, None, targets.clone()),
    };
    let mut dis = DisTargets::new(labels, None)?;
    let mut opt_phi = OptimizerState::new(AdamWConfig::new(cfg.lr, cfg.weight_decay));
    let mut opt_theta = OptimizerState::new(AdamWConfig::new(attack_cfg.lr, attack_cfg.weight_decay));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e_ed0f_ed6e);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let u = uniforms(&mut rng, graph.edge_count());
        if let (Some(model), Some(c)) = (attack.as_mut(), ctx.as_ref()) {
            if cfg.attack_steps > 1 {
                let mut draw = Tape::new();
                let keep = sampler.probabilities(&mut draw, graph, &msg)?;
                let relaxed = relax_on_tape(&mut draw, keep, &u, cfg.temperature);
                let relaxed = draw.value(relaxed).clone();
                for _ in 1..cfg.attack_steps {
                    let mut t = Tape::new();
                    let w = t.constant(relaxed.clone());
                    let f = model.forward(&mut t, c, Some(w))?;
                    let adv = routed_cross_entropy(&mut t, f.log_distribution, &train_targets)?;
                    let grads = t
                        .backward(adv)
                        .map_err(|e| diverged(e, epoch, &history))?
                        .for_params(&t, &model.params);
                    adamw_step(&mut model.params, &grads, &mut opt_theta)?;
                }
            }
        }
        let mut tape = Tape::new();
        let pair = attack.as_ref().zip(ctx.as_ref());
        let vars = losses_on_tape(&mut tape, graph, &msg, &sampler, pair, &train_targets, &dis, &u)
            .map_err(|e| diverged(e, epoch, &history))?;
        let breakdown = vars.breakdown(&tape);
        if !breakdown.total.is_finite() {
            return Err(diverged(Error::numeric("non-finite loss"), epoch, &history));
        }
        history.push(breakdown);

        let phi_grads = tape
            .backward(vars.total)
            .map_err(|e| diverged(e, epoch, &history))?
            .for_params(&tape, &sampler.params);
        if let (Some(model), Some(adv)) = (attack.as_mut(), vars.adv) {
            let theta_grads = tape
                .backward(adv)
                .map_err(|e| diverged(e, epoch, &history))?
                .for_params(&tape, &model.params);
            adamw_step(&mut model.params, &theta_grads, &mut opt_theta)?;
        }
        adamw_step(&mut sampler.params, &phi_grads, &mut opt_phi)?;
        for _ in 1..cfg.sampler_steps {
            let u = uniforms(&mut rng, graph.edge_count());
            let mut t = Tape::new();
            let pair = attack.as_ref().zip(ctx.as_ref());
            let extra = losses_on_tape(&mut t, graph, &msg, &sampler, pair, &train_targets, &dis, &u)
                .map_err(|e| diverged(e, epoch, &history))?;
            let grads = t
                .backward(extra.total)
                .map_err(|e| diverged(e, epoch, &history))?
                .for_params(&t, &sampler.params);
            adamw_step(&mut sampler.params, &grads, &mut opt_phi)?;
        }

        if (epoch + 1) % cfg.update_interval == 0 {
            if let (Some(model), Some(full)) = (attack.as_mut(), full_ctx.as_ref()) {
                let mut refresh = Tape::new();
                let w = refresh.constant(tape.value(vars.relaxed).clone());
                let dist = model.forward(&mut refresh, full, Some(w))?.distribution;
                let keep: Vec<bool> = tape.value(vars.keep).as_slice().iter().map(|&t| t >= 0.5).collect();
                let hard = graph.apply_edge_mask(&keep)?;
                let pseudo = crate::attack::hard_labels(&dist);
                if model.variant == crate::attack::AttackVariant::Full {
                    model.routing = pseudo_routing(&hard, labels, &pseudo, model.degree_threshold)?;
                }
                if pseudo_mode {
                    dis = DisTargets::new(labels, Some(&pseudo))?;
                }
            }
        }
    }
    let keep_probabilities = edge_probabilities(graph, &sampler)?;
    Ok(TrainedSampler {
        model: sampler,
        attack,
        history,
        keep_probabilities,
    })
}

fn diverged(err: Error, epoch: usize, history: &[LossBreakdown]) -> Error {
    match err {
        Error::Numeric(msg) => {
            let last = history
                .last()
                .map(|b| {
                    format!(
                        "; last losses adv={} dis={} reg={} total={}",
                        b.adv, b.dis, b.reg, b.total
                    )
                })
                .unwrap_or_default();
            Error::numeric(format!("sampler training diverged at epoch {epoch}: {msg}{last}"))
        }
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum PublishMode {
    Bernoulli { seed: u64 },
    Threshold,
}

#[derive(Clone, Debug)]
pub struct PublishedGraph {
    pub graph: Graph,
    pub keep_probabilities: Vec<f64>,
    pub mask: Vec<bool>,
    pub mode: PublishMode,
}

impl PublishedGraph {
    pub fn retention(&self) -> f64 {
        if self.mask.is_empty() {
            1.0
        } else {
            self.mask.iter().filter(|&&k| k).count() as f64 / self.mask.len() as f64
        }
    }
}

/// Draws the hard keep mask and removes the dropped edges.
pub fn publish(graph: &Graph, keep_probabilities: &[f64], mode: PublishMode) -> Result<PublishedGraph> {
    if keep_probabilities.len() != graph.edge_count() {
        return Err(Error::contract(format!(
            "{} keep probabilities for {} edges",
            keep_probabilities.len(),
            graph.edge_count()
        )));
    }
    let mask: Vec<bool> = match mode {
        PublishMode::Threshold => keep_probabilities.iter().map(|&t| t >= 0.5).collect(),
        PublishMode::Bernoulli { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            keep_probabilities.iter().map(|&t| rng.random::<f64>() < t).collect()
        }
    };
    Ok(PublishedGraph {
        graph: graph.apply_edge_mask(&mask)?,
        keep_probabilities: keep_probabilities.to_vec(),
        mask,
        mode,
    })
}

/// `u,v,keep_prob` with six decimals, one row per canonical edge.
pub fn probs_csv(graph: &Graph, keep_probabilities: &[f64]) -> String {
    let mut s = String::from("u,v,keep_prob\n");
    for (&(u, v), t) in graph.edges().iter().zip(keep_probabilities) {
        writeln!(s, "{u},{v},{t:.6}").unwrap();
    }
    s
}

/// Keeps a uniformly random `retention` fraction of edges.
pub fn random_drop(graph: &Graph, retention: f64, seed: u64) -> Result<Graph> {
    let m = graph.edge_count();
    let keep_count = retained_count(m, retention)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, m, keep_count);
    let mut mask = vec![false; m];
    for i in chosen {
        mask[i] = true;
    }
    graph.apply_edge_mask(&mask)
}

/// Drops the edges with the largest endpoint degree sum first; ties drop the
/// later canonical edge first.
pub fn degree_drop(graph: &Graph, retention: f64) -> Result<Graph> {
    let m = graph.edge_count();
    let keep_count = retained_count(m, retention)?;
    let mut order: Vec<usize> = (0..m).collect();
    let score = |e: usize| {
        let (u, v) = graph.edges()[e];
        graph.degree(u) + graph.degree(v)
    };
    order.sort_by_key(|&e| (score(e), e));
    let mut mask = vec![false; m];
    for &e in &order[..keep_count] {
        mask[e] = true;
    }
    graph.apply_edge_mask(&mask)
}

fn retained_count(m: usize, retention: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&retention) {
        return Err(Error::Config(format!("retention must lie in [0, 1], got {retention}")));
    }
    Ok(((retention * m as f64).round() as usize).min(m))
}
