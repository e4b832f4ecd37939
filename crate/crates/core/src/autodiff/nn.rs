use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{Initializer, MessageGraph, ParamSet, Tape, Var};
use crate::error::{Error, Result};

/// Dense layer `x W + b` stored as `{prefix}.w` and `{prefix}.b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub prefix: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(prefix: impl Into<String>, in_dim: usize, out_dim: usize) -> Self {
        Self {
            prefix: prefix.into(),
            in_dim,
            out_dim,
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.w", self.prefix)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.b", self.prefix)
    }

    pub fn init(&self, init: &mut Initializer) -> Result<()> {
        init.glorot(&self.weight_name(), self.in_dim, self.out_dim)?;
        init.zeros(&self.bias_name(), 1, self.out_dim)
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var) -> Result<Var> {
        check_width(tape, x, self.in_dim, &self.prefix)?;
        let w = tape.param(params, &self.weight_name());
        let b = tape.param(params, &self.bias_name());
        Ok(tape.dense(x, w, b))
    }
}

fn check_width(tape: &Tape, x: Var, expected: usize, layer: &str) -> Result<()> {
    let got = tape.value(x).cols();
    if got != expected {
        return Err(Error::contract(format!(
            "layer `{layer}` expects width {expected}, got {got}"
        )));
    }
    Ok(())
}

/// Two dense layers with a ReLU between them and a linear output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp2 {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp2 {
    pub fn new(prefix: &str, in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            first: Linear::new(format!("{prefix}.0"), in_dim, hidden),
            second: Linear::new(format!("{prefix}.1"), hidden, out_dim),
        }
    }

    pub fn init(&self, init: &mut Initializer) -> Result<()> {
        self.first.init(init)?;
        self.second.init(init)
    }

    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var) -> Result<Var> {
        let h = self.first.forward(tape, params, x)?;
        let h = tape.relu(h);
        self.second.forward(tape, params, h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GnnKind {
    Gin,
    SageMean,
}

/// GIN layer with epsilon fixed at 0: `ReLU(MLP(h_i + sum_j w_ij h_j))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GinLayer {
    pub mlp: Mlp2,
}

impl GinLayer {
    pub fn new(prefix: &str, in_dim: usize, out_dim: usize) -> Self {
        Self {
            mlp: Mlp2::new(&format!("{prefix}.mlp"), in_dim, out_dim, out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.mlp.first.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.mlp.second.out_dim
    }

    pub fn init(&self, init: &mut Initializer) -> Result<()> {
        self.mlp.init(init)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        h: Var,
        graph: &Rc<MessageGraph>,
        weights: Option<Var>,
    ) -> Result<Var> {
        check_shape(tape, h, graph, weights)?;
        let agg = tape.aggregate(h, graph, weights);
        let z = tape.add(h, agg);
        let out = self.mlp.forward(tape, params, z)?;
        Ok(tape.relu(out))
    }
}

/// GraphSAGE layer with weighted mean aggregation:
/// `ReLU(h_i W_s + (sum_j w_ij h_j / sum_j w_ij) W_n + b)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SageLayer {
    pub prefix: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl SageLayer {
    pub fn new(prefix: &str, in_dim: usize, out_dim: usize) -> Self {
        Self {
            prefix: prefix.to_string(),
            in_dim,
            out_dim,
        }
    }

    fn names(&self) -> [String; 3] {
        [
            format!("{}.w_self", self.prefix),
            format!("{}.w_nbr", self.prefix),
            format!("{}.b", self.prefix),
        ]
    }

    pub fn init(&self, init: &mut Initializer) -> Result<()> {
        let [ws, wn, b] = self.names();
        init.glorot(&ws, self.in_dim, self.out_dim)?;
        init.glorot(&wn, self.in_dim, self.out_dim)?;
        init.zeros(&b, 1, self.out_dim)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        h: Var,
        graph: &Rc<MessageGraph>,
        weights: Option<Var>,
    ) -> Result<Var> {
        check_shape(tape, h, graph, weights)?;
        check_width(tape, h, self.in_dim, &self.prefix)?;
        let [ws, wn, b] = self.names();
        let agg = tape.aggregate(h, graph, weights);
        let inv_deg = match weights {
            Some(w) => {
                let ones = Rc::new(vec![1.0; graph.edges.len()]);
                let deg = tape.incident_sum(w, graph, Rc::clone(&ones), ones);
                tape.safe_recip(deg)
            }
            None => {
                let inv = graph
                    .degrees()
                    .into_iter()
                    .map(|d| if d > 0.0 { 1.0 / d } else { 0.0 })
                    .collect();
                tape.constant(crate::Matrix::column(inv))
            }
        };
        let mean = tape.mul_rows(agg, inv_deg);
        let ws = tape.param(params, &ws);
        let wn = tape.param(params, &wn);
        let b = tape.param(params, &b);
        let a = tape.matmul(h, ws);
        let n = tape.matmul(mean, wn);
        let s = tape.add(a, n);
        let s = tape.add_bias(s, b);
        Ok(tape.relu(s))
    }
}

fn check_shape(tape: &Tape, h: Var, graph: &MessageGraph, weights: Option<Var>) -> Result<()> {
    let rows = tape.value(h).rows();
    if rows != graph.node_count {
        return Err(Error::contract(format!(
            "feature rows {rows} do not match node count {}",
            graph.node_count
        )));
    }
    if let Some(w) = weights {
        let wv = tape.value(w);
        if wv.cols() != 1 || wv.rows() != graph.edges.len() {
            return Err(Error::contract(format!(
                "edge weights must be {}x1, got {}x{}",
                graph.edges.len(),
                wv.rows(),
                wv.cols()
            )));
        }
    }
    Ok(())
}

/// One message-passing layer of either kind; `prefix` names its parameters.
#[allow(clippy::too_many_arguments)]
pub fn gnn_layer(
    tape: &mut Tape,
    kind: GnnKind,
    params: &ParamSet,
    prefix: &str,
    h: Var,
    graph: &Rc<MessageGraph>,
    weights: Option<Var>,
) -> Result<Var> {
    let width = |name: String| {
        params
            .get(&name)
            .map(|m| m.shape())
            .ok_or_else(|| Error::contract(format!("missing parameter `{name}`")))
    };
    let out = match kind {
        GnnKind::Gin => {
            let (i, hdn) = width(format!("{prefix}.mlp.0.w"))?;
            let layer = GinLayer::new(prefix, i, hdn);
            layer.forward(tape, params, h, graph, weights)?
        }
        GnnKind::SageMean => {
            let (i, o) = width(format!("{prefix}.w_self"))?;
            SageLayer::new(prefix, i, o).forward(tape, params, h, graph, weights)?
        }
    };
    tape.check()?;
    Ok(out)
}

/// Mean of the selected rows, as a `1 x d` var.
pub fn mean_pool(tape: &mut Tape, x: Var, nodes: &[usize]) -> Result<Var> {
    if nodes.is_empty() {
        return Err(Error::contract("mean_pool over an empty node set"));
    }
    let rows = tape.value(x).rows();
    if let Some(&bad) = nodes.iter().find(|&&i| i >= rows) {
        return Err(Error::Range { id: bad, count: rows });
    }
    let g = tape.gather(x, Rc::new(nodes.to_vec()));
    Ok(tape.segment_mean(g, Rc::new(vec![0, nodes.len()])))
}

/// `-(1/|T|) sum_{(i, c) in T} log softmax(logits_i)[c]`.
pub fn softmax_cross_entropy(tape: &mut Tape, logits: Var, targets: &[(usize, usize)]) -> Result<Var> {
    if targets.is_empty() {
        return Err(Error::contract("cross-entropy over an empty mask"));
    }
    let (rows, classes) = tape.value(logits).shape();
    for &(i, c) in targets {
        if i >= rows || c >= classes {
            return Err(Error::contract(format!(
                "target ({i}, {c}) outside logits of shape {rows}x{classes}"
            )));
        }
    }
    let lsm = tape.log_softmax_rows(logits);
    let picked = tape.pick_mean(lsm, Rc::new(targets.to_vec()));
    Ok(tape.scale(picked, -1.0))
}
