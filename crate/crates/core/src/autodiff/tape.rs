//! Define-by-run reverse-mode tape over dense matrices.
//!
//! Every value is a 2-D [`Matrix`]; column vectors are `n x 1` and scalars
//! `1 x 1`. A tape is built fresh for each forward pass, then
//! [`Tape::backward`] walks it once in reverse from any scalar root. The
//! same tape may be differentiated from several roots.
//!
//! The first op producing a NaN or infinity poisons the tape; `backward` and
//! [`Tape::check`] then report it as a numeric error.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

use super::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

/// Undirected message-passing structure: every pair sends a message in both
/// directions. Optional per-pair weights are supplied as an `m x 1` [`Var`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageGraph {
    pub node_count: usize,
    pub edges: Vec<(u32, u32)>,
}

impl MessageGraph {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            node_count,
            edges: edges.into_iter().map(|(u, v)| (u as u32, v as u32)).collect(),
        }
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.node_count];
        for &(u, v) in &self.edges {
            d[u as usize] += 1.0;
            d[v as usize] += 1.0;
        }
        d
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Dense(Var, Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Log {
        x: Var,
        floor: f64,
    },
    Abs(Var),
    Clamp {
        x: Var,
        lo: f64,
        hi: f64,
    },
    SafeRecip(Var),
    ScaleRows(Var, Rc<Vec<f64>>),
    MulRows(Var, Var),
    Aggregate {
        h: Var,
        weights: Option<Var>,
        graph: Rc<MessageGraph>,
    },
    IncidentSum {
        w: Var,
        graph: Rc<MessageGraph>,
        coef_u: Rc<Vec<f64>>,
        coef_v: Rc<Vec<f64>>,
    },
    Gather(Var, Rc<Vec<usize>>),
    ConcatCols(Var, Var),
    SegmentMean(Var, Rc<Vec<usize>>),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    LogMix {
        a: Var,
        b: Var,
        wa: Rc<Vec<f64>>,
        wb: Rc<Vec<f64>>,
    },
    PickMean(Var, Rc<Vec<(usize, usize)>>),
    WeightedSum(Var, Rc<Vec<f64>>),
    SoftRole(Box<SoftRoleSpec>),
}

struct SoftRoleSpec {
    degrees: Var,
    classes: Rc<Vec<Option<usize>>>,
    center: f64,
    smoothing: f64,
    denominators: Vec<f64>,
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Dense(..) => "dense",
            Op::AddBias(..) => "add_bias",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Affine(..) => "affine",
            Op::Relu(..) => "relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Log { .. } => "log",
            Op::Abs(..) => "abs",
            Op::Clamp { .. } => "clamp",
            Op::SafeRecip(..) => "safe_recip",
            Op::ScaleRows(..) => "scale_rows",
            Op::MulRows(..) => "mul_rows",
            Op::Aggregate { .. } => "aggregate",
            Op::IncidentSum { .. } => "incident_sum",
            Op::Gather(..) => "gather",
            Op::ConcatCols(..) => "concat_cols",
            Op::SegmentMean(..) => "segment_mean",
            Op::SoftmaxRows(..) => "softmax",
            Op::LogSoftmaxRows(..) => "log_softmax",
            Op::LogMix { .. } => "log_mix",
            Op::PickMean(..) => "pick_mean",
            Op::WeightedSum(..) => "weighted_sum",
            Op::SoftRole(..) => "soft_role",
        }
    }
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
    fault: Option<String>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    sigmoid(x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        if self.fault.is_none() && !value.is_finite() {
            self.fault = Some(format!(
                "non-finite value produced by `{}` (tape node {})",
                op.name(),
                self.nodes.len()
            ));
        }
        let requires_grad = match &op {
            Op::Leaf => false,
            _ => self.inputs(&op).iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn inputs(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::Dense(x, w, b) => vec![*x, *w, *b],
            Op::MatMul(a, b)
            | Op::AddBias(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::ConcatCols(a, b)
            | Op::MulRows(a, b) => vec![*a, *b],
            Op::Affine(x, _)
            | Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Log { x, .. }
            | Op::Abs(x)
            | Op::Clamp { x, .. }
            | Op::SafeRecip(x)
            | Op::ScaleRows(x, _)
            | Op::Gather(x, _)
            | Op::SegmentMean(x, _)
            | Op::SoftmaxRows(x)
            | Op::LogSoftmaxRows(x)
            | Op::PickMean(x, _)
            | Op::WeightedSum(x, _) => vec![*x],
            Op::Aggregate { h, weights, .. } => {
                let mut v = vec![*h];
                v.extend(weights.iter().copied());
                v
            }
            Op::IncidentSum { w, .. } => vec![*w],
            Op::LogMix { a, b, .. } => vec![*a, *b],
            Op::SoftRole(spec) => vec![spec.degrees],
        }
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Constant input; gradients never flow into it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Differentiable leaf that is not a named parameter (e.g. edge
    /// probabilities under test).
    pub fn variable(&mut self, value: Matrix) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].requires_grad = true;
        v
    }

    /// Leaf for a named parameter, registered once per tape.
    pub fn param(&mut self, params: &ParamSet, name: &str) -> Var {
        if let Some(&v) = self.params.get(name) {
            return v;
        }
        let value = params
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` is not defined"))
            .clone();
        let v = self.variable(value);
        self.params.insert(name.to_string(), v);
        v
    }

    /// Fails if any recorded op produced a non-finite value.
    pub fn check(&self) -> Result<()> {
        match &self.fault {
            Some(msg) => Err(Error::numeric(msg.clone())),
            None => Ok(()),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `x w + b` with `b` a `1 x c` row, as one tape node.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Var {
        let bias = self.value(b);
        assert_eq!(bias.rows(), 1);
        let mut out = self.value(x).matmul(self.value(w));
        for i in 0..out.rows() {
            for (o, &bb) in out.row_mut(i).iter_mut().zip(bias.as_slice()) {
                *o += bb;
            }
        }
        self.push(out, Op::Dense(x, w, b))
    }

    /// Adds a `1 x c` row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!(b.rows(), 1);
        let mut out = self.value(x).clone();
        for i in 0..out.rows() {
            for (o, &bb) in out.row_mut(i).iter_mut().zip(b.as_slice()) {
                *o += bb;
            }
        }
        self.push(out, Op::AddBias(x, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x / y);
        self.push(v, Op::Div(a, b))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(x).map(|a| scale * a + shift);
        self.push(v, Op::Affine(x, scale))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.affine(x, s, 0.0)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|a| a.max(0.0));
        self.push(v, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.ln_floored(x, 0.0)
    }

    /// `ln(max(x, floor))`; no gradient where the floor is active.
    pub fn ln_floored(&mut self, x: Var, floor: f64) -> Var {
        let v = self.value(x).map(|a| a.max(floor).ln());
        self.push(v, Op::Log { x, floor })
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::abs);
        self.push(v, Op::Abs(x))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(x).map(|a| a.clamp(lo, hi));
        self.push(v, Op::Clamp { x, lo, hi })
    }

    /// `1/x` for positive entries, 0 elsewhere.
    pub fn safe_recip(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|a| if a > 0.0 { 1.0 / a } else { 0.0 });
        self.push(v, Op::SafeRecip(x))
    }

    /// Multiplies row `i` of `x` by the constant `scales[i]`.
    pub fn scale_rows(&mut self, x: Var, scales: Rc<Vec<f64>>) -> Var {
        let mut out = self.value(x).clone();
        assert_eq!(out.rows(), scales.len());
        for (i, &s) in scales.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|a| *a *= s);
        }
        self.push(out, Op::ScaleRows(x, scales))
    }

    /// Multiplies row `i` of `x` by `s[i]`, where `s` is an `n x 1` var.
    pub fn mul_rows(&mut self, x: Var, s: Var) -> Var {
        let sv = self.value(s);
        assert_eq!(sv.cols(), 1);
        let mut out = self.value(x).clone();
        assert_eq!(out.rows(), sv.rows());
        for i in 0..out.rows() {
            let f = sv.as_slice()[i];
            out.row_mut(i).iter_mut().for_each(|a| *a *= f);
        }
        self.push(out, Op::MulRows(x, s))
    }

    /// `out[v] = sum over pairs {u, v} of w_uv * h[u]`.
    pub fn aggregate(&mut self, h: Var, graph: &Rc<MessageGraph>, weights: Option<Var>) -> Var {
        let hv = self.value(h);
        assert_eq!(hv.rows(), graph.node_count, "aggregate row mismatch");
        let wv = weights.map(|w| self.value(w).as_slice());
        if let Some(w) = wv {
            assert_eq!(w.len(), graph.edges.len(), "aggregate weight mismatch");
        }
        let mut out = Matrix::zeros(hv.rows(), hv.cols());
        for (e, &(u, v)) in graph.edges.iter().enumerate() {
            let (u, v) = (u as usize, v as usize);
            let w = wv.map_or(1.0, |w| w[e]);
            if w == 0.0 {
                continue;
            }
            for (o, &x) in out.row_mut(v).iter_mut().zip(hv.row(u)) {
                *o += w * x;
            }
            for (o, &x) in out.row_mut(u).iter_mut().zip(hv.row(v)) {
                *o += w * x;
            }
        }
        self.push(
            out,
            Op::Aggregate {
                h,
                weights,
                graph: Rc::clone(graph),
            },
        )
    }

    /// Per-node sums of pair weights: pair `e = {u, v}` adds `w_e * coef_u[e]`
    /// to node `u` and `w_e * coef_v[e]` to node `v`.
    pub fn incident_sum(
        &mut self,
        w: Var,
        graph: &Rc<MessageGraph>,
        coef_u: Rc<Vec<f64>>,
        coef_v: Rc<Vec<f64>>,
    ) -> Var {
        let wv = self.value(w).as_slice();
        assert_eq!(wv.len(), graph.edges.len());
        let mut out = vec![0.0; graph.node_count];
        for (e, &(u, v)) in graph.edges.iter().enumerate() {
            out[u as usize] += wv[e] * coef_u[e];
            out[v as usize] += wv[e] * coef_v[e];
        }
        self.push(
            Matrix::column(out),
            Op::IncidentSum {
                w,
                graph: Rc::clone(graph),
                coef_u,
                coef_v,
            },
        )
    }

    /// Row `k` of the result is row `index[k]` of `x`.
    pub fn gather(&mut self, x: Var, index: Rc<Vec<usize>>) -> Var {
        let xv = self.value(x);
        let mut out = Matrix::zeros(index.len(), xv.cols());
        for (k, &i) in index.iter().enumerate() {
            out.row_mut(k).copy_from_slice(xv.row(i));
        }
        self.push(out, Op::Gather(x, index))
    }

    /// `[a | b]`; both must have the same row count.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.rows(), bv.rows(), "concat row mismatch");
        let (ca, cb) = (av.cols(), bv.cols());
        let mut out = Matrix::zeros(av.rows(), ca + cb);
        for i in 0..av.rows() {
            let row = out.row_mut(i);
            row[..ca].copy_from_slice(av.row(i));
            row[ca..].copy_from_slice(bv.row(i));
        }
        self.push(out, Op::ConcatCols(a, b))
    }

    /// Means of consecutive row blocks `offsets[s]..offsets[s + 1]`. Every
    /// block must be nonempty.
    pub fn segment_mean(&mut self, x: Var, offsets: Rc<Vec<usize>>) -> Var {
        let xv = self.value(x);
        let segs = offsets.len() - 1;
        let mut out = Matrix::zeros(segs, xv.cols());
        for s in 0..segs {
            let (a, b) = (offsets[s], offsets[s + 1]);
            assert!(b > a, "empty segment");
            let inv = 1.0 / (b - a) as f64;
            let row = out.row_mut(s);
            for r in a..b {
                for (o, &v) in row.iter_mut().zip(xv.row(r)) {
                    *o += v;
                }
            }
            row.iter_mut().for_each(|o| *o *= inv);
        }
        self.push(out, Op::SegmentMean(x, offsets))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let v = softmax_rows(self.value(x));
        self.push(v, Op::SoftmaxRows(x))
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = xv.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|a| (a - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|a| *a -= lse);
        }
        self.push(out, Op::LogSoftmaxRows(x))
    }

    /// `ln(wa_i exp(a_ij) + wb_i exp(b_ij))` computed without underflow.
    /// Weights are non-negative per row and not both zero; a zero weight
    /// removes its term, so `a` or `b` may then hold anything finite.
    pub fn log_mix(&mut self, a: Var, b: Var, wa: Rc<Vec<f64>>, wb: Rc<Vec<f64>>) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "log_mix shape mismatch");
        assert_eq!(av.rows(), wa.len());
        assert_eq!(av.rows(), wb.len());
        let mut out = Matrix::zeros(av.rows(), av.cols());
        for i in 0..av.rows() {
            for c in 0..av.cols() {
                out[(i, c)] = log_mix_entry(av[(i, c)], bv[(i, c)], wa[i], wb[i]);
            }
        }
        self.push(out, Op::LogMix { a, b, wa, wb })
    }

    /// Mean of the selected `(row, col)` entries, as a scalar.
    pub fn pick_mean(&mut self, x: Var, picks: Rc<Vec<(usize, usize)>>) -> Var {
        assert!(!picks.is_empty());
        let xv = self.value(x);
        let s: f64 = picks.iter().map(|&(r, c)| xv[(r, c)]).sum();
        let v = Matrix::scalar(s / picks.len() as f64);
        self.push(v, Op::PickMean(x, picks))
    }

    /// `sum_k weights[k] * x_k` over the entries of `x` in row-major order.
    pub fn weighted_sum(&mut self, x: Var, weights: Rc<Vec<f64>>) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.as_slice().len(), weights.len());
        let v = Matrix::scalar(dot(xv.as_slice(), &weights));
        self.push(v, Op::WeightedSum(x, weights))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let n = self.value(x).as_slice().len();
        self.weighted_sum(x, Rc::new(vec![1.0; n]))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).as_slice().len();
        self.weighted_sum(x, Rc::new(vec![1.0 / n as f64; n]))
    }

    /// Soft structure-role ratio.
    ///
    /// With `k_ij = sigmoid((center - |d_i - d_j|) / smoothing)` over counted
    /// pairs `j != i`, returns `sum_j k_ij [c_i = c_j] / sum_j k_ij` for every
    /// counted node `i` and 0 for uncounted nodes. `degrees` is `n x 1`.
    pub fn soft_role(&mut self, degrees: Var, classes: Rc<Vec<Option<usize>>>, center: f64, smoothing: f64) -> Var {
        let d = self.value(degrees).as_slice().to_vec();
        assert_eq!(d.len(), classes.len());
        let counted: Vec<usize> = (0..d.len()).filter(|&i| classes[i].is_some()).collect();
        let mut out = vec![0.0; d.len()];
        let mut denominators = vec![0.0; d.len()];
        for &i in &counted {
            let (mut num, mut den) = (0.0, 0.0);
            for &j in &counted {
                if j == i {
                    continue;
                }
                let k = sigmoid((center - (d[i] - d[j]).abs()) / smoothing);
                den += k;
                if classes[i] == classes[j] {
                    num += k;
                }
            }
            denominators[i] = den;
            out[i] = if den > 0.0 { num / den } else { 0.0 };
        }
        self.push(
            Matrix::column(out),
            Op::SoftRole(Box::new(SoftRoleSpec {
                degrees,
                classes,
                center,
                smoothing,
                denominators,
            })),
        )
    }

    /// Denominators of a [`Tape::soft_role`] node, for absence checks.
    pub fn soft_role_denominators(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].op {
            Op::SoftRole(spec) => &spec.denominators,
            _ => panic!("not a soft_role node"),
        }
    }

    /// Gradients of the scalar `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        self.check()?;
        assert_eq!(self.value(root).shape(), (1, 1), "backward root must be scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.is_finite() {
                    return Err(Error::numeric(format!(
                        "non-finite gradient at `{}` (tape node {i})",
                        self.nodes[i].op.name()
                    )));
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |v: Var, delta: Matrix| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.matmul_t(self.value(*b)));
                }
                if self.wants(*b) {
                    acc(*b, self.value(*a).t_matmul(g));
                }
            }
            Op::Dense(x, w, b) => {
                if self.wants(*b) {
                    acc(*b, column_sums(g));
                }
                if self.wants(*x) {
                    acc(*x, g.matmul_t(self.value(*w)));
                }
                if self.wants(*w) {
                    acc(*w, self.value(*x).t_matmul(g));
                }
            }
            Op::AddBias(x, b) => {
                if self.wants(*b) {
                    acc(*b, column_sums(g));
                }
                if self.wants(*x) {
                    acc(*x, g.clone());
                }
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.clone());
                }
                if self.wants(*b) {
                    acc(*b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.clone());
                }
                if self.wants(*b) {
                    acc(*b, g.map(|v| -v));
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.wants(*b) {
                    acc(*b, g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::Div(a, b) => {
                let bv = self.value(*b);
                if self.wants(*a) {
                    acc(*a, g.zip_map(bv, |x, y| x / y));
                }
                if self.wants(*b) {
                    // d(a/b)/db = -(a/b)/b
                    let q = out.zip_map(bv, |o, y| -o / y);
                    acc(*b, g.zip_map(&q, |x, y| x * y));
                }
            }
            Op::Affine(x, s) => acc(*x, g.map(|v| v * s)),
            Op::Relu(x) => acc(*x, g.zip_map(out, |d, o| if o > 0.0 { d } else { 0.0 })),
            Op::Sigmoid(x) => acc(*x, g.zip_map(out, |d, s| d * s * (1.0 - s))),
            Op::Log { x, floor } => {
                let xv = self.value(*x);
                acc(*x, g.zip_map(xv, |d, a| if a > *floor { d / a } else { 0.0 }));
            }
            Op::Abs(x) => {
                let xv = self.value(*x);
                acc(*x, g.zip_map(xv, |d, a| d * sign(a)));
            }
            Op::Clamp { x, lo, hi } => {
                let xv = self.value(*x);
                acc(*x, g.zip_map(xv, |d, a| if a > *lo && a < *hi { d } else { 0.0 }));
            }
            Op::SafeRecip(x) => {
                let xv = self.value(*x);
                acc(*x, g.zip_map(xv, |d, a| if a > 0.0 { -d / (a * a) } else { 0.0 }));
            }
            Op::ScaleRows(x, scales) => {
                let mut dx = g.clone();
                for (i, &s) in scales.iter().enumerate() {
                    dx.row_mut(i).iter_mut().for_each(|a| *a *= s);
                }
                acc(*x, dx);
            }
            Op::MulRows(x, s) => {
                let sv = self.value(*s);
                if self.wants(*x) {
                    let mut dx = g.clone();
                    for i in 0..dx.rows() {
                        let f = sv.as_slice()[i];
                        dx.row_mut(i).iter_mut().for_each(|a| *a *= f);
                    }
                    acc(*x, dx);
                }
                if self.wants(*s) {
                    let xv = self.value(*x);
                    let ds = (0..g.rows()).map(|i| dot(g.row(i), xv.row(i))).collect();
                    acc(*s, Matrix::column(ds));
                }
            }
            Op::Aggregate { h, weights, graph } => {
                let hv = self.value(*h);
                let wv = weights.map(|w| self.value(w).as_slice());
                if self.wants(*h) {
                    let mut dh = Matrix::zeros(hv.rows(), hv.cols());
                    for (e, &(u, v)) in graph.edges.iter().enumerate() {
                        let (u, v) = (u as usize, v as usize);
                        let w = wv.map_or(1.0, |w| w[e]);
                        if w == 0.0 {
                            continue;
                        }
                        for (o, &x) in dh.row_mut(u).iter_mut().zip(g.row(v)) {
                            *o += w * x;
                        }
                        for (o, &x) in dh.row_mut(v).iter_mut().zip(g.row(u)) {
                            *o += w * x;
                        }
                    }
                    acc(*h, dh);
                }
                if let Some(w) = weights {
                    if self.wants(*w) {
                        let dw = graph
                            .edges
                            .iter()
                            .map(|&(u, v)| {
                                let (u, v) = (u as usize, v as usize);
                                dot(g.row(v), hv.row(u)) + dot(g.row(u), hv.row(v))
                            })
                            .collect();
                        acc(*w, Matrix::column(dw));
                    }
                }
            }
            Op::IncidentSum {
                w,
                graph,
                coef_u,
                coef_v,
            } => {
                let gs = g.as_slice();
                let dw = graph
                    .edges
                    .iter()
                    .enumerate()
                    .map(|(e, &(u, v))| gs[u as usize] * coef_u[e] + gs[v as usize] * coef_v[e])
                    .collect();
                acc(*w, Matrix::column(dw));
            }
            Op::Gather(x, index) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for (k, &i) in index.iter().enumerate() {
                    for (o, &v) in dx.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                acc(*x, dx);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let split = |lo: usize, hi: usize| {
                    let mut m = Matrix::zeros(g.rows(), hi - lo);
                    for i in 0..g.rows() {
                        m.row_mut(i).copy_from_slice(&g.row(i)[lo..hi]);
                    }
                    m
                };
                if self.wants(*a) {
                    acc(*a, split(0, ca));
                }
                if self.wants(*b) {
                    acc(*b, split(ca, g.cols()));
                }
            }
            Op::SegmentMean(x, offsets) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for s in 0..offsets.len() - 1 {
                    let (a, b) = (offsets[s], offsets[s + 1]);
                    let inv = 1.0 / (b - a) as f64;
                    for r in a..b {
                        for (o, &v) in dx.row_mut(r).iter_mut().zip(g.row(s)) {
                            *o = v * inv;
                        }
                    }
                }
                acc(*x, dx);
            }
            Op::SoftmaxRows(x) => {
                let mut dx = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let p = out.row(i);
                    let gi = g.row(i);
                    let inner = dot(p, gi);
                    for (d, (&pj, &gj)) in dx.row_mut(i).iter_mut().zip(p.iter().zip(gi)) {
                        *d = pj * (gj - inner);
                    }
                }
                acc(*x, dx);
            }
            Op::LogSoftmaxRows(x) => {
                let mut dx = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let gi = g.row(i);
                    let total: f64 = gi.iter().sum();
                    for (d, (&lp, &gj)) in dx.row_mut(i).iter_mut().zip(out.row(i).iter().zip(gi)) {
                        *d = gj - lp.exp() * total;
                    }
                }
                acc(*x, dx);
            }
            Op::LogMix { a, b, wa, wb } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let share = |x: &Matrix, w: &[f64]| {
                    let mut d = Matrix::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        if w[i] == 0.0 {
                            continue;
                        }
                        for c in 0..x.cols() {
                            d[(i, c)] = g[(i, c)] * w[i] * (x[(i, c)] - out[(i, c)]).exp();
                        }
                    }
                    d
                };
                if self.wants(*a) {
                    acc(*a, share(av, wa));
                }
                if self.wants(*b) {
                    acc(*b, share(bv, wb));
                }
            }
            Op::PickMean(x, picks) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                let f = g.item() / picks.len() as f64;
                for &(r, c) in picks.iter() {
                    dx[(r, c)] += f;
                }
                acc(*x, dx);
            }
            Op::WeightedSum(x, weights) => {
                let xv = self.value(*x);
                let f = g.item();
                let data = weights.iter().map(|w| w * f).collect();
                acc(*x, Matrix::from_vec(xv.rows(), xv.cols(), data));
            }
            Op::SoftRole(spec) => {
                let d = self.value(spec.degrees).as_slice();
                let gs = g.as_slice();
                let role = out.as_slice();
                let classes = &spec.classes;
                let counted: Vec<usize> = (0..d.len()).filter(|&i| classes[i].is_some()).collect();
                let mut dd = vec![0.0; d.len()];
                for &i in &counted {
                    let den = spec.denominators[i];
                    if gs[i] == 0.0 || den <= 0.0 {
                        continue;
                    }
                    let scale = gs[i] / den;
                    for &j in &counted {
                        if j == i {
                            continue;
                        }
                        let delta = d[i] - d[j];
                        let k = sigmoid((spec.center - delta.abs()) / spec.smoothing);
                        let same = if classes[i] == classes[j] { 1.0 } else { 0.0 };
                        let c = scale * (same - role[i]) * k * (1.0 - k) * (-sign(delta) / spec.smoothing);
                        dd[i] += c;
                        dd[j] -= c;
                    }
                }
                acc(spec.degrees, Matrix::column(dd));
            }
        }
    }

    /// Named parameter leaves registered on this tape.
    pub fn params(&self) -> impl Iterator<Item = (&str, Var)> {
        self.params.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

fn log_mix_entry(a: f64, b: f64, wa: f64, wb: f64) -> f64 {
    match (wa > 0.0, wb > 0.0) {
        (true, false) => wa.ln() + a,
        (false, true) => wb.ln() + b,
        _ => {
            let (x, y) = (wa.ln() + a, wb.ln() + b);
            let hi = x.max(y);
            hi + ((x - hi).exp() + (y - hi).exp()).ln()
        }
    }
}

#[inline]
fn sign(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in row.iter_mut() {
            *a = (*a - max).exp();
            total += *a;
        }
        row.iter_mut().for_each(|a| *a /= total);
    }
    out
}

pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for every tensor of `params`; zeros for tensors that did not
    /// take part in the computation.
    pub fn for_params(&self, tape: &Tape, params: &ParamSet) -> BTreeMap<String, Matrix> {
        params
            .iter()
            .map(|(name, value)| {
                let g = tape
                    .params
                    .get(name)
                    .and_then(|&v| self.wrt(v).cloned())
                    .unwrap_or_else(|| Matrix::zeros(value.rows(), value.cols()));
                (name.to_string(), g)
            })
            .collect()
    }
}

fn column_sums(g: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, g.cols());
    for i in 0..g.rows() {
        for (d, &v) in out.as_mut_slice().iter_mut().zip(g.row(i)) {
            *d += v;
        }
    }
    out
}
