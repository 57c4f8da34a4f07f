//! Tape-based reverse-mode differentiation over batched matrix ops.
//!
//! A [`Graph`] is rebuilt for every forward pass. Nodes are appended in
//! topological order, so the backward sweep just walks the tape in reverse.
//! Operator coverage is intentionally limited to what the uplift model and
//! the value-weight model need: dense layers, embedding lookups (plain and
//! mean-pooled), row softmax, convex mixtures, concatenation, squared error,
//! and a floored KL divergence.

use std::collections::HashMap;

use crate::nn::math::{kl_row, sigmoid, softmax_in_place, KL_EPSILON};
use crate::nn::params::{ParamId, ParamStore};
use crate::nn::tensor::Tensor;
use crate::nn::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
}

impl Activation {
    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

enum Op {
    Input,
    Param(ParamId),
    /// `act(x . w^T + b)` with `x: B x in`, `w: out x in`, `b: 1 x out`.
    Dense {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        act: Activation,
    },
    SoftmaxRows(NodeId),
    ConcatCols(NodeId, NodeId),
    /// Row gather: `out[i] = table[ids[i]]`.
    Gather {
        table: NodeId,
        ids: Vec<usize>,
    },
    /// Ragged mean pool: `out[i] = mean(table[id] for id in ids[i])`.
    GatherMean {
        table: NodeId,
        ids: Vec<Vec<usize>>,
    },
    /// Convex combination: `out[i] = sum_m weights[i][m] * parts[m][i]`.
    Mix {
        weights: NodeId,
        parts: Vec<NodeId>,
    },
    /// Elementwise average of same-shaped nodes.
    MeanOf(Vec<NodeId>),
    /// Per-row `D_KL(p_row || floor(q_row))`, output `B x 1`.
    KlRows {
        p: NodeId,
        q: NodeId,
    },
    /// Per-row `(pred - target)^2` for `B x 1` predictions.
    SqErr {
        pred: NodeId,
        target: Vec<f64>,
    },
    SumAll(NodeId),
    AddN(Vec<NodeId>),
    Scale {
        x: NodeId,
        c: f64,
    },
    StopGrad(#[allow(dead_code)] NodeId),
}

struct Node {
    value: Tensor,
    op: Op,
    label: String,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: HashMap<usize, NodeId>,
    backward_done: bool,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, label: impl Into<String>) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            label: label.into(),
        });
        NodeId(self.nodes.len() - 1)
    }

    fn val(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.val(id)
    }

    pub fn scalar_value(&self, id: NodeId) -> Result<f64, NnError> {
        let t = self.val(id);
        if !t.is_scalar() {
            return Err(NnError::Dimension {
                op: "scalar_value",
                detail: format!("node has shape {:?}", t.shape()),
            });
        }
        Ok(t.at(0, 0))
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Input, "")
    }

    /// Leaf node bound to a stored parameter. Repeated calls for the same
    /// parameter return the same node so gradients accumulate in one place.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&raw_param_index(id)) {
            return node;
        }
        let p = store.get(id);
        let value = Tensor::new(p.rows, p.cols, p.values.clone());
        let node = self.push(value, Op::Param(id), p.name.clone());
        self.param_nodes.insert(raw_param_index(id), node);
        node
    }

    /// `act(x . w^T + b)`; `w` is `out x in` so `w`'s column count must match
    /// the input width.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId, act: Activation) -> Result<NodeId, NnError> {
        let (batch, in_dim) = self.val(x).shape();
        let (out_dim, w_in) = self.val(w).shape();
        let (b_rows, b_cols) = self.val(b).shape();
        if w_in != in_dim {
            return Err(NnError::Dimension {
                op: "dense",
                detail: format!("weight expects input width {w_in}, got {in_dim}"),
            });
        }
        if b_rows != 1 || b_cols != out_dim {
            return Err(NnError::Dimension {
                op: "dense",
                detail: format!("bias shape {b_rows}x{b_cols} does not match output width {out_dim}"),
            });
        }
        let mut out = Tensor::zeros(batch, out_dim);
        {
            let xv = self.val(x);
            let wv = self.val(w);
            let bv = self.val(b);
            for r in 0..batch {
                let xr = xv.row(r);
                let or = out.row_mut(r);
                for o in 0..out_dim {
                    let wr = wv.row(o);
                    let mut acc = bv.at(0, o);
                    for i in 0..in_dim {
                        acc += xr[i] * wr[i];
                    }
                    or[o] = act.apply(acc);
                }
            }
        }
        Ok(self.push(out, Op::Dense { x, w, b, act }, ""))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let v = self.val(x);
        if v.cols() == 0 {
            return Err(NnError::Dimension {
                op: "softmax_rows",
                detail: "empty rows".into(),
            });
        }
        let mut out = v.clone();
        for r in 0..out.rows() {
            softmax_in_place(out.row_mut(r));
        }
        Ok(self.push(out, Op::SoftmaxRows(x), ""))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (ra, ca) = self.val(a).shape();
        let (rb, cb) = self.val(b).shape();
        if ra != rb {
            return Err(NnError::Dimension {
                op: "concat_cols",
                detail: format!("row counts differ: {ra} vs {rb}"),
            });
        }
        let mut out = Tensor::zeros(ra, ca + cb);
        for r in 0..ra {
            out.row_mut(r)[..ca].copy_from_slice(self.val(a).row(r));
            out.row_mut(r)[ca..].copy_from_slice(self.val(b).row(r));
        }
        Ok(self.push(out, Op::ConcatCols(a, b), ""))
    }

    /// Embedding lookup: one output row per id.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, NnError> {
        let t = self.val(table);
        let rows = t.rows();
        if let Some(&bad) = ids.iter().find(|&&id| id >= rows) {
            return Err(NnError::IndexOutOfRange {
                name: self.nodes[table.0].label.clone(),
                id: bad,
                rows,
            });
        }
        let mut out = Tensor::zeros(ids.len(), t.cols());
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.val(table).row(id));
        }
        Ok(self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            "",
        ))
    }

    /// Mean-pooled lookup over a ragged id list per output row.
    pub fn gather_mean(&mut self, table: NodeId, ids: &[Vec<usize>]) -> Result<NodeId, NnError> {
        let t = self.val(table);
        let rows = t.rows();
        for group in ids {
            if group.is_empty() {
                return Err(NnError::Dimension {
                    op: "gather_mean",
                    detail: "empty id group".into(),
                });
            }
            if let Some(&bad) = group.iter().find(|&&id| id >= rows) {
                return Err(NnError::IndexOutOfRange {
                    name: self.nodes[table.0].label.clone(),
                    id: bad,
                    rows,
                });
            }
        }
        let cols = t.cols();
        let mut out = Tensor::zeros(ids.len(), cols);
        for (r, group) in ids.iter().enumerate() {
            let inv = 1.0 / group.len() as f64;
            for &id in group {
                let src = self.val(table).row(id).to_vec();
                let dst = out.row_mut(r);
                for c in 0..cols {
                    dst[c] += src[c] * inv;
                }
            }
        }
        Ok(self.push(
            out,
            Op::GatherMean {
                table,
                ids: ids.to_vec(),
            },
            "",
        ))
    }

    /// Convex combination of `parts` (each `B x d`) under per-row weights
    /// (`B x M`, one column per part).
    pub fn mix(&mut self, weights: NodeId, parts: &[NodeId]) -> Result<NodeId, NnError> {
        if parts.is_empty() {
            return Err(NnError::Dimension {
                op: "mix",
                detail: "no parts".into(),
            });
        }
        let (batch, m) = self.val(weights).shape();
        if m != parts.len() {
            return Err(NnError::Dimension {
                op: "mix",
                detail: format!("{} weight columns for {} parts", m, parts.len()),
            });
        }
        let (pr, pc) = self.val(parts[0]).shape();
        if pr != batch {
            return Err(NnError::Dimension {
                op: "mix",
                detail: format!("weights have {batch} rows, parts have {pr}"),
            });
        }
        for &p in parts {
            if self.val(p).shape() != (pr, pc) {
                return Err(NnError::Dimension {
                    op: "mix",
                    detail: "part shapes differ".into(),
                });
            }
        }
        let mut out = Tensor::zeros(batch, pc);
        for (mi, &p) in parts.iter().enumerate() {
            for r in 0..batch {
                let w = self.val(weights).at(r, mi);
                let src = self.val(p).row(r).to_vec();
                let dst = out.row_mut(r);
                for c in 0..pc {
                    dst[c] += w * src[c];
                }
            }
        }
        Ok(self.push(
            out,
            Op::Mix {
                weights,
                parts: parts.to_vec(),
            },
            "",
        ))
    }

    /// Elementwise average of same-shaped nodes.
    pub fn mean_of(&mut self, nodes: &[NodeId]) -> Result<NodeId, NnError> {
        if nodes.is_empty() {
            return Err(NnError::Dimension {
                op: "mean_of",
                detail: "no inputs".into(),
            });
        }
        let shape = self.val(nodes[0]).shape();
        let mut out = Tensor::zeros(shape.0, shape.1);
        let inv = 1.0 / nodes.len() as f64;
        for &n in nodes {
            if self.val(n).shape() != shape {
                return Err(NnError::Dimension {
                    op: "mean_of",
                    detail: "input shapes differ".into(),
                });
            }
            for (o, v) in out.data_mut().iter_mut().zip(self.val(n).data().to_vec()) {
                *o += v * inv;
            }
        }
        Ok(self.push(out, Op::MeanOf(nodes.to_vec()), ""))
    }

    /// Per-row KL divergence with the epsilon floor applied to `q` rows.
    pub fn kl_rows(&mut self, p: NodeId, q: NodeId) -> Result<NodeId, NnError> {
        let shape = self.val(p).shape();
        if self.val(q).shape() != shape {
            return Err(NnError::Dimension {
                op: "kl_rows",
                detail: "p and q shapes differ".into(),
            });
        }
        let mut out = Tensor::zeros(shape.0, 1);
        for r in 0..shape.0 {
            *out.at_mut(r, 0) = kl_row(self.val(p).row(r), self.val(q).row(r));
        }
        Ok(self.push(out, Op::KlRows { p, q }, ""))
    }

    /// Per-row squared error against a constant target; `pred` must be `B x 1`.
    pub fn sq_err(&mut self, pred: NodeId, target: &[f64]) -> Result<NodeId, NnError> {
        let (rows, cols) = self.val(pred).shape();
        if cols != 1 || rows != target.len() {
            return Err(NnError::Dimension {
                op: "sq_err",
                detail: format!("pred is {rows}x{cols}, target has length {}", target.len()),
            });
        }
        let mut out = Tensor::zeros(rows, 1);
        for r in 0..rows {
            let d = self.val(pred).at(r, 0) - target[r];
            *out.at_mut(r, 0) = d * d;
        }
        Ok(self.push(
            out,
            Op::SqErr {
                pred,
                target: target.to_vec(),
            },
            "",
        ))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.val(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(x), "")
    }

    pub fn add_n(&mut self, nodes: &[NodeId]) -> Result<NodeId, NnError> {
        if nodes.is_empty() {
            return Err(NnError::Dimension {
                op: "add_n",
                detail: "no inputs".into(),
            });
        }
        let shape = self.val(nodes[0]).shape();
        let mut out = Tensor::zeros(shape.0, shape.1);
        for &n in nodes {
            if self.val(n).shape() != shape {
                return Err(NnError::Dimension {
                    op: "add_n",
                    detail: "input shapes differ".into(),
                });
            }
            for (o, v) in out.data_mut().iter_mut().zip(self.val(n).data().to_vec()) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::AddN(nodes.to_vec()), ""))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let mut out = self.val(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v *= c);
        self.push(out, Op::Scale { x, c }, "")
    }

    /// Identity in the forward pass; blocks gradient flow in the backward
    /// pass.
    pub fn stop_grad(&mut self, x: NodeId) -> NodeId {
        let out = self.val(x).clone();
        self.push(out, Op::StopGrad(x), "")
    }

    /// Reverse sweep from a scalar loss node. Parameter gradients are
    /// accumulated into `store` (callers zero them beforehand).
    pub fn backward(&mut self, loss: NodeId, store: &mut ParamStore) -> Result<(), NnError> {
        if self.backward_done {
            return Err(NnError::State(
                "backward already ran on this graph; rebuild the graph for a new pass".into(),
            ));
        }
        if !self.val(loss).is_scalar() {
            return Err(NnError::State(format!(
                "backward requires a scalar loss node, got shape {:?}",
                self.val(loss).shape()
            )));
        }
        self.backward_done = true;

        let mut grads: Vec<Tensor> = self.nodes.iter().map(|n| Tensor::zeros_like(&n.value)).collect();
        *grads[loss.0].at_mut(0, 0) = 1.0;

        for i in (0..=loss.0).rev() {
            let (head, tail) = grads.split_at_mut(i);
            let g = &tail[0];
            if g.data().iter().all(|&v| v == 0.0) {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => store.accumulate_grad(*id, g.data()),
                Op::Dense { x, w, b, act } => {
                    let xv = self.val(*x);
                    let wv = self.val(*w);
                    let out = &node.value;
                    let (batch, out_dim) = out.shape();
                    let in_dim = xv.cols();
                    // Gradient through the activation, using the stored output.
                    let mut gz = Tensor::zeros(batch, out_dim);
                    for r in 0..batch {
                        for o in 0..out_dim {
                            *gz.at_mut(r, o) = g.at(r, o) * act.derivative_from_output(out.at(r, o));
                        }
                    }
                    {
                        let gx = &mut head[x.0];
                        for r in 0..batch {
                            let gzr = gz.row(r);
                            let gxr = gx.row_mut(r);
                            for o in 0..out_dim {
                                let wr = wv.row(o);
                                let s = gzr[o];
                                if s == 0.0 {
                                    continue;
                                }
                                for c in 0..in_dim {
                                    gxr[c] += s * wr[c];
                                }
                            }
                        }
                    }
                    {
                        let gw = &mut head[w.0];
                        for r in 0..batch {
                            let xr = xv.row(r);
                            let gzr = gz.row(r);
                            for o in 0..out_dim {
                                let s = gzr[o];
                                if s == 0.0 {
                                    continue;
                                }
                                let gwr = gw.row_mut(o);
                                for c in 0..in_dim {
                                    gwr[c] += s * xr[c];
                                }
                            }
                        }
                    }
                    {
                        let gb = &mut head[b.0];
                        for r in 0..batch {
                            let gzr = gz.row(r);
                            let gbr = gb.row_mut(0);
                            for o in 0..out_dim {
                                gbr[o] += gzr[o];
                            }
                        }
                    }
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let gx = &mut head[x.0];
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        let gxr = gx.row_mut(r);
                        for c in 0..yr.len() {
                            gxr[c] += yr[c] * (gr[c] - dot);
                        }
                    }
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.val(*a).cols();
                    {
                        let ga = &mut head[a.0];
                        for r in 0..ga.rows() {
                            let src = &g.row(r)[..ca];
                            for (dst, s) in ga.row_mut(r).iter_mut().zip(src) {
                                *dst += s;
                            }
                        }
                    }
                    {
                        let gb = &mut head[b.0];
                        for r in 0..gb.rows() {
                            let src = &g.row(r)[ca..];
                            for (dst, s) in gb.row_mut(r).iter_mut().zip(src) {
                                *dst += s;
                            }
                        }
                    }
                }
                Op::Gather { table, ids } => {
                    let gt = &mut head[table.0];
                    for (r, &id) in ids.iter().enumerate() {
                        let src = g.row(r);
                        for (dst, s) in gt.row_mut(id).iter_mut().zip(src) {
                            *dst += s;
                        }
                    }
                }
                Op::GatherMean { table, ids } => {
                    let gt = &mut head[table.0];
                    for (r, group) in ids.iter().enumerate() {
                        let inv = 1.0 / group.len() as f64;
                        let src = g.row(r);
                        for &id in group {
                            for (dst, s) in gt.row_mut(id).iter_mut().zip(src) {
                                *dst += s * inv;
                            }
                        }
                    }
                }
                Op::Mix { weights, parts } => {
                    let wv = self.val(*weights);
                    let (batch, _) = wv.shape();
                    for (mi, p) in parts.iter().enumerate() {
                        let pv_rows: Vec<Vec<f64>> = (0..batch).map(|r| self.val(*p).row(r).to_vec()).collect();
                        {
                            let gw = &mut head[weights.0];
                            for r in 0..batch {
                                let dot: f64 = g.row(r).iter().zip(&pv_rows[r]).map(|(a, b)| a * b).sum();
                                *gw.at_mut(r, mi) += dot;
                            }
                        }
                        {
                            let gp = &mut head[p.0];
                            for r in 0..batch {
                                let w = wv.at(r, mi);
                                if w == 0.0 {
                                    continue;
                                }
                                for (dst, s) in gp.row_mut(r).iter_mut().zip(g.row(r)) {
                                    *dst += w * s;
                                }
                            }
                        }
                    }
                }
                Op::MeanOf(nodes) => {
                    let inv = 1.0 / nodes.len() as f64;
                    for n in nodes {
                        let gn = &mut head[n.0];
                        for (dst, s) in gn.data_mut().iter_mut().zip(g.data()) {
                            *dst += s * inv;
                        }
                    }
                }
                Op::KlRows { p, q } => {
                    let pv = self.val(*p);
                    let qv = self.val(*q);
                    let (rows, cols) = pv.shape();
                    // val(row) = sum_j p_j (ln p_j - ln m_j + ln S), m_j = max(q_j, eps),
                    // S = sum_j m_j. d/dp_j = ln p_j - ln m_j + ln S + 1 (0 when p_j = 0);
                    // d/dq_j = [q_j > eps] * (P/S - p_j/m_j) with P = sum_j p_j.
                    for r in 0..rows {
                        let up = g.at(r, 0);
                        if up == 0.0 {
                            continue;
                        }
                        let prow = pv.row(r).to_vec();
                        let qrow = qv.row(r).to_vec();
                        let m: Vec<f64> = qrow.iter().map(|&x| x.max(KL_EPSILON)).collect();
                        let s: f64 = m.iter().sum();
                        let psum: f64 = prow.iter().sum();
                        let ln_s = s.ln();
                        {
                            let gp = &mut head[p.0];
                            let gpr = gp.row_mut(r);
                            for j in 0..cols {
                                if prow[j] > 0.0 {
                                    gpr[j] += up * (prow[j].ln() - m[j].ln() + ln_s + 1.0);
                                }
                            }
                        }
                        {
                            let gq = &mut head[q.0];
                            let gqr = gq.row_mut(r);
                            for j in 0..cols {
                                if qrow[j] > KL_EPSILON {
                                    gqr[j] += up * (psum / s - prow[j] / m[j]);
                                }
                            }
                        }
                    }
                }
                Op::SqErr { pred, target } => {
                    let pv = self.val(*pred);
                    let gp = &mut head[pred.0];
                    for r in 0..target.len() {
                        *gp.at_mut(r, 0) += g.at(r, 0) * 2.0 * (pv.at(r, 0) - target[r]);
                    }
                }
                Op::SumAll(x) => {
                    let s = g.at(0, 0);
                    let gx = &mut head[x.0];
                    gx.data_mut().iter_mut().for_each(|v| *v += s);
                }
                Op::AddN(nodes) => {
                    for n in nodes {
                        let gn = &mut head[n.0];
                        for (dst, s) in gn.data_mut().iter_mut().zip(g.data()) {
                            *dst += s;
                        }
                    }
                }
                Op::Scale { x, c } => {
                    let gx = &mut head[x.0];
                    for (dst, s) in gx.data_mut().iter_mut().zip(g.data()) {
                        *dst += s * c;
                    }
                }
                Op::StopGrad(_) => {}
            }
        }
        Ok(())
    }
}

fn raw_param_index(id: ParamId) -> usize {
    // ParamId is an index newtype; HashMap key only, no ordering relied upon.
    id.0
}

/// Single-vector dense layer: `act(w . input + b)` with `w` of shape
/// `out x in`. Shares the kernel with the batched graph op.
pub fn dense_forward(
    input: &[f64],
    weights: &[Vec<f64>],
    bias: &[f64],
    act: Activation,
) -> Result<Vec<f64>, NnError> {
    let out_dim = weights.len();
    if bias.len() != out_dim {
        return Err(NnError::Dimension {
            op: "dense_forward",
            detail: format!("bias length {} does not match {out_dim} output rows", bias.len()),
        });
    }
    let mut out = Vec::with_capacity(out_dim);
    for (o, row) in weights.iter().enumerate() {
        if row.len() != input.len() {
            return Err(NnError::Dimension {
                op: "dense_forward",
                detail: format!("weight row expects input width {}, got {}", row.len(), input.len()),
            });
        }
        let mut acc = bias[o];
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        out.push(act.apply(acc));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dense_forward_identity() {
        let w = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let out = dense_forward(&[1.0, 1.0], &w, &[0.0, 0.0], Activation::Linear).unwrap();
        assert_eq!(out, vec![1.0, 1.0]);
    }

    #[test]
    fn dense_forward_relu_clamps() {
        let out = dense_forward(&[-3.0], &[vec![1.0]], &[0.0], Activation::Relu).unwrap();
        assert_eq!(out, vec![0.0]);
    }

    #[test]
    fn dense_forward_hand_arithmetic() {
        // 1*1 + 1*2 + 0.5 = 3.5
        let out = dense_forward(&[1.0, 2.0], &[vec![1.0, 1.0]], &[0.5], Activation::Linear).unwrap();
        assert_relative_eq!(out[0], 3.5, epsilon = 1e-12);
    }

    #[test]
    fn dense_forward_shape_mismatch() {
        assert!(dense_forward(&[1.0], &[vec![1.0, 1.0]], &[0.0], Activation::Linear).is_err());
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", 1, 2, vec![0.3, -0.2]);
        let mut g = Graph::new();
        let _ = g.param(&store, w);
        let c = g.input(Tensor::scalar(5.0));
        store.zero_grads();
        g.backward(c, &mut store).unwrap();
        assert!(store.get(w).grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut store = ParamStore::new();
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(2, 2));
        assert!(matches!(g.backward(x, &mut store), Err(NnError::State(_))));
    }

    #[test]
    fn backward_twice_is_a_state_error() {
        let mut store = ParamStore::new();
        let mut g = Graph::new();
        let x = g.input(Tensor::scalar(1.0));
        g.backward(x, &mut store).unwrap();
        assert!(g.backward(x, &mut store).is_err());
    }

    #[test]
    fn gather_out_of_range_names_table() {
        let mut store = ParamStore::new();
        let t = store.add("feat_table", 2, 3, vec![0.0; 6]);
        let mut g = Graph::new();
        let tn = g.param(&store, t);
        let err = g.gather(tn, &[0, 5]).unwrap_err();
        match err {
            NnError::IndexOutOfRange { name, id, rows } => {
                assert_eq!(name, "feat_table");
                assert_eq!(id, 5);
                assert_eq!(rows, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn gather_equals_one_hot_multiply() {
        // Embedding lookup on a 3-row table equals E^T . x for one-hot x.
        let table = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 3x2
        let mut store = ParamStore::new();
        let t = store.add("e", 3, 2, table.clone());
        let mut g = Graph::new();
        let tn = g.param(&store, t);
        let out = g.gather(tn, &[2, 0, 2]).unwrap();
        assert_eq!(g.value(out).row(0), &[5.0, 6.0]);
        assert_eq!(g.value(out).row(1), &[1.0, 2.0]);
        // two equal ids -> identical rows
        assert_eq!(g.value(out).row(0), g.value(out).row(2));
    }

    #[test]
    fn stop_grad_blocks_flow() {
        let mut store = ParamStore::new();
        let w = store.add("w", 1, 1, vec![2.0]);
        let mut g = Graph::new();
        let wn = g.param(&store, w);
        let frozen = g.stop_grad(wn);
        let loss = g.sum_all(frozen);
        store.zero_grads();
        g.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(w).grad, vec![0.0]);
    }

    #[test]
    fn mix_of_identical_parts_ignores_weights() {
        // With identical experts the mixture is independent of the gate.
        let store = ParamStore::new();
        let mut g = Graph::new();
        let part = g.input(Tensor::new(1, 2, vec![3.0, 4.0]));
        let w1 = g.input(Tensor::new(1, 2, vec![0.9, 0.1]));
        let w2 = g.input(Tensor::new(1, 2, vec![0.25, 0.75]));
        let m1 = g.mix(w1, &[part, part]).unwrap();
        let m2 = g.mix(w2, &[part, part]).unwrap();
        assert_relative_eq!(g.value(m1).at(0, 0), g.value(m2).at(0, 0), epsilon = 1e-12);
        assert_relative_eq!(g.value(m1).at(0, 1), g.value(m2).at(0, 1), epsilon = 1e-12);
        let _ = store;
    }
}
