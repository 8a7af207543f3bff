use super::{bce, Tensor};
use crate::{Error, Result};

/// Predictions are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the
/// cross-entropy. Inside the clamped region the loss is constant in the
/// prediction, so its gradient there is zero.
pub const BCE_CLAMP: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(VarId, VarId),
    Transpose(VarId),
    AddBias(VarId, VarId),
    Relu(VarId),
    Sigmoid(VarId),
    ConcatRows(VarId, VarId),
    SelectRows(VarId, Vec<usize>),
    Bce { pred: VarId, labels: Vec<bool> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records one forward pass. Nodes are appended in evaluation order, so the
/// inputs of every node precede it.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Clears all recorded nodes so the tape can record a fresh pass.
    pub fn reset(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> VarId {
        self.nodes.push(Node { value, op });
        VarId(self.nodes.len() - 1)
    }

    fn check(&self, id: VarId) -> Result<&Tensor> {
        self.nodes.get(id.0).map(|n| &n.value).ok_or(Error::OutOfRange {
            kind: "tape node",
            id: id.0,
            count: self.nodes.len(),
        })
    }

    /// Records a leaf. Gradients are reported for every leaf.
    pub fn leaf(&mut self, value: Tensor) -> VarId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = self.check(a)?.matmul(self.check(b)?)?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: VarId) -> Result<VarId> {
        let v = self.check(a)?.transpose();
        Ok(self.push(v, Op::Transpose(a)))
    }

    pub fn add_bias(&mut self, x: VarId, bias: VarId) -> Result<VarId> {
        let v = self.check(x)?.add_bias(self.check(bias)?)?;
        Ok(self.push(v, Op::AddBias(x, bias)))
    }

    pub fn relu(&mut self, x: VarId) -> Result<VarId> {
        let v = self.check(x)?.relu();
        Ok(self.push(v, Op::Relu(x)))
    }

    pub fn sigmoid(&mut self, x: VarId) -> Result<VarId> {
        let v = self.check(x)?.sigmoid();
        Ok(self.push(v, Op::Sigmoid(x)))
    }

    pub fn concat_rows(&mut self, a: VarId, b: VarId) -> Result<VarId> {
        let v = self.check(a)?.concat_rows(self.check(b)?)?;
        Ok(self.push(v, Op::ConcatRows(a, b)))
    }

    pub fn select_row(&mut self, table: VarId, row: usize) -> Result<VarId> {
        self.select_rows(table, &[row])
    }

    pub fn select_rows(&mut self, table: VarId, rows: &[usize]) -> Result<VarId> {
        let v = self.check(table)?.select_rows(rows)?;
        Ok(self.push(v, Op::SelectRows(table, rows.to_vec())))
    }

    /// Mean binary cross-entropy of a `B × 1` prediction column; a `1 × 1` node.
    pub fn bce_loss(&mut self, pred: VarId, labels: &[bool]) -> Result<VarId> {
        let loss = bce(self.check(pred)?, labels)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("bce loss {loss}")));
        }
        Ok(self.push(
            Tensor::scalar(loss)?,
            Op::Bce {
                pred,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: VarId) -> Result<Gradients> {
        let shape = self.check(loss)?.shape();
        if shape != (1, 1) {
            return Err(Error::NotScalar(shape));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0)?);

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let da = upstream.matmul(&bv.transpose())?;
                    let db = av.transpose().matmul(&upstream)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, upstream.transpose()),
                Op::AddBias(x, b) => {
                    let mut db = Tensor::zeros(1, upstream.cols());
                    for r in 0..upstream.rows() {
                        for (acc, g) in db.as_mut_slice().iter_mut().zip(upstream.row(r)) {
                            *acc += *g;
                        }
                    }
                    accumulate(&mut grads, *x, upstream.clone());
                    accumulate(&mut grads, *b, db);
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[x.0].value;
                    let mut dx = upstream.clone();
                    for (g, &v) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sigmoid(x) => {
                    let mut dx = upstream.clone();
                    for (g, &s) in dx.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        *g *= s * (1.0 - s);
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatRows(a, b) => {
                    let ac = self.nodes[a.0].value.cols();
                    let bc = self.nodes[b.0].value.cols();
                    let mut da = Tensor::zeros(upstream.rows(), ac);
                    let mut db = Tensor::zeros(upstream.rows(), bc);
                    for r in 0..upstream.rows() {
                        let row = upstream.row(r);
                        da.row_mut(r).copy_from_slice(&row[..ac]);
                        db.row_mut(r).copy_from_slice(&row[ac..]);
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::SelectRows(table, rows) => {
                    let tv = &self.nodes[table.0].value;
                    let mut dt = Tensor::zeros(tv.rows(), tv.cols());
                    for (out_r, &src) in rows.iter().enumerate() {
                        for (acc, g) in dt.row_mut(src).iter_mut().zip(upstream.row(out_r)) {
                            *acc += *g;
                        }
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::Bce { pred, labels } => {
                    let pv = &self.nodes[pred.0].value;
                    let scale = upstream.get(0, 0) / labels.len() as f64;
                    let mut dp = Tensor::zeros(pv.rows(), 1);
                    for (i, (&p, &y)) in pv.as_slice().iter().zip(labels).enumerate() {
                        // zero gradient where the clamp is active
                        if p > BCE_CLAMP && p < 1.0 - BCE_CLAMP {
                            let d = if y { -1.0 / p } else { 1.0 / (1.0 - p) };
                            dp.as_mut_slice()[i] = scale * d;
                        }
                    }
                    accumulate(&mut grads, *pred, dp);
                }
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(upstream);
            }
        }

        let leaves = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| match n.op {
                Op::Leaf => Some(
                    grads[i]
                        .take()
                        .unwrap_or_else(|| Tensor::zeros(n.value.rows(), n.value.cols())),
                ),
                _ => None,
            })
            .collect();
        Ok(Gradients { leaves })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: VarId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Gradients of one scalar with respect to every leaf on the tape.
#[derive(Debug)]
pub struct Gradients {
    leaves: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a leaf; `None` if `id` is not a leaf.
    pub fn get(&self, id: VarId) -> Option<&Tensor> {
        self.leaves.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: VarId) -> Option<Tensor> {
        self.leaves.get_mut(id.0).and_then(|g| g.take())
    }
}
