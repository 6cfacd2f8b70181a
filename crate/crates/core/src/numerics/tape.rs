//! Reverse-mode differentiation over a linear record of operations.
//!
//! Every operation appends one node to the [`Tape`]; node ids are therefore a
//! topological order, and [`Tape::backward`] walks them once from the loss
//! down to zero. Nodes built only from constants are recorded with
//! `requires_grad == false` and skipped during the backward sweep.

use std::cell::{Ref, RefCell};

use super::params::{ParamId, ParamStore};
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use super::NumericsError;

#[derive(Debug, Clone)]
enum Op {
    Leaf(Option<ParamId>),
    Constant,
    MatMul(usize, usize),
    MatMulNt(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    Softplus(usize),
    Concat { parts: Vec<usize>, axis: usize },
    SliceCols { src: usize, start: usize },
    SelectRows { src: usize, index: Vec<usize> },
    MeanRows(usize),
    Sum(usize),
    Mean(usize),
    RowSoftmax(usize),
    FrobeniusSq(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of a forward computation. Single-threaded by construction
/// (interior mutability through `RefCell`).
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

/// Gradients produced by one backward sweep, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, or `None` when the loss
    /// does not depend on it.
    pub fn wrt(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    pub fn wrt_or_zeros(&self, var: Var<'_>) -> Tensor {
        self.wrt(var).cloned().unwrap_or_else(|| {
            let [r, c] = var.shape();
            Tensor::zeros(r, c)
        })
    }
}

fn broadcast_shape(op: &'static str, a: [usize; 2], b: [usize; 2]) -> Result<[usize; 2], NumericsError> {
    if a == b || b == [1, 1] {
        Ok(a)
    } else if a == [1, 1] {
        Ok(b)
    } else {
        Err(NumericsError::Shape { op, left: a, right: b })
    }
}

fn zip_broadcast(a: &Tensor, b: &Tensor, shape: [usize; 2], f: impl Fn(f64, f64) -> f64) -> Tensor {
    let len = shape[0] * shape[1];
    let data = (0..len)
        .map(|i| {
            let x = if a.len() == 1 { a.data()[0] } else { a.data()[i] };
            let y = if b.len() == 1 { b.data()[0] } else { b.data()[i] };
            f(x, y)
        })
        .collect();
    Tensor::from_vec(shape[0], shape[1], data).expect("broadcast shape")
}

/// Sums `g` down to `shape`, which is either `g`'s own shape or a scalar.
fn reduce_to(g: &Tensor, shape: [usize; 2]) -> Tensor {
    if g.shape() == shape {
        g.clone()
    } else {
        Tensor::scalar(g.sum())
    }
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

#[inline]
fn softplus(x: f64) -> f64 {
    // log(1 + e^x) without overflow
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Drops every recorded node. Parameter values live in a [`ParamStore`]
    /// and are not touched.
    pub fn clear(&self) {
        self.nodes.borrow_mut().clear();
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// A value that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Constant, false)
    }

    /// A differentiable input that is not backed by a parameter.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf(None), true)
    }

    /// A differentiable input whose gradient is accumulated into the
    /// parameter `id` by [`Tape::backward`].
    pub fn param(&self, id: ParamId, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf(Some(id)), true)
    }

    fn check_owner(&self, v: Var<'_>) -> Result<(), NumericsError> {
        if std::ptr::eq(self, v.tape) {
            Ok(())
        } else {
            Err(NumericsError::ForeignVar)
        }
    }

    /// Concatenates along `axis` (0 stacks rows, 1 joins columns).
    pub fn concat<'t>(&'t self, parts: &[Var<'t>], axis: usize) -> Result<Var<'t>, NumericsError> {
        if axis > 1 {
            return Err(NumericsError::ConcatAxis { axis });
        }
        if parts.is_empty() {
            return Err(NumericsError::EmptyConcat);
        }
        for p in parts {
            self.check_owner(*p)?;
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let value = {
            let nodes = self.nodes.borrow();
            let first = nodes[ids[0]].value.shape();
            let keep = 1 - axis;
            let mut total = 0;
            for &i in &ids {
                let s = nodes[i].value.shape();
                if s[keep] != first[keep] {
                    return Err(NumericsError::Shape { op: "concat", left: first, right: s });
                }
                total += s[axis];
            }
            if axis == 0 {
                let mut data = Vec::with_capacity(total * first[1]);
                for &i in &ids {
                    data.extend_from_slice(nodes[i].value.data());
                }
                Tensor::from_vec(total, first[1], data)?
            } else {
                let rows = first[0];
                let mut data = Vec::with_capacity(rows * total);
                for r in 0..rows {
                    for &i in &ids {
                        data.extend_from_slice(nodes[i].value.row(r));
                    }
                }
                Tensor::from_vec(rows, total, data)?
            }
        };
        let rg = self.requires(&ids);
        Ok(self.push(value, Op::Concat { parts: ids, axis }, rg))
    }

    /// Computes `d loss / d node` for every node reachable from `loss`, and
    /// adds the gradients of parameter leaves into `store`.
    ///
    /// Gradients are accumulated, never overwritten: two calls without
    /// [`ParamStore::zero_grad`] in between double the stored gradients.
    pub fn backward(&self, loss: Var<'_>, store: &mut ParamStore) -> Result<Gradients, NumericsError> {
        let grads = self.gradients(loss)?;
        let nodes = self.nodes.borrow();
        for (node, g) in nodes.iter().zip(&grads.grads) {
            if let (Op::Leaf(Some(pid)), Some(g)) = (&node.op, g) {
                store.accumulate_grad(*pid, g)?;
            }
        }
        Ok(grads)
    }

    /// Backward sweep without touching any parameter store.
    pub fn gradients(&self, loss: Var<'_>) -> Result<Gradients, NumericsError> {
        if self.is_empty() {
            return Err(NumericsError::EmptyTape);
        }
        self.check_owner(loss)?;
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape();
        if shape != [1, 1] {
            return Err(NumericsError::NotScalar { shape });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        if nodes[loss.id].requires_grad {
            grads[loss.id] = Some(Tensor::scalar(1.0));
        }

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            backprop_node(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

/// Adds `delta` into the gradient slot of `id`, creating it on first use.
fn accumulate(nodes: &[Node], grads: &mut [Option<Tensor>], id: usize, f: impl FnOnce(&mut Tensor)) {
    if !nodes[id].requires_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| {
        let [r, c] = nodes[id].value.shape();
        Tensor::zeros(r, c)
    });
    f(slot);
}

fn backprop_node(nodes: &[Node], node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let val = |i: usize| &nodes[i].value;
    match &node.op {
        Op::Leaf(_) | Op::Constant => {}
        Op::MatMul(a, b) => {
            accumulate(nodes, grads, *a, |ga| gemm_nt(g, val(*b), ga));
            accumulate(nodes, grads, *b, |gb| gemm_tn(val(*a), g, gb));
        }
        Op::MatMulNt(a, b) => {
            accumulate(nodes, grads, *a, |ga| gemm_nn(g, val(*b), ga));
            accumulate(nodes, grads, *b, |gb| gemm_tn(g, val(*a), gb));
        }
        Op::Transpose(a) => {
            accumulate(nodes, grads, *a, |ga| ga.add_assign(&g.transpose()));
        }
        Op::Add(a, b) => {
            accumulate(nodes, grads, *a, |ga| ga.add_assign(&reduce_to(g, val(*a).shape())));
            accumulate(nodes, grads, *b, |gb| gb.add_assign(&reduce_to(g, val(*b).shape())));
        }
        Op::Sub(a, b) => {
            accumulate(nodes, grads, *a, |ga| ga.add_assign(&reduce_to(g, val(*a).shape())));
            accumulate(nodes, grads, *b, |gb| gb.add_assign(&reduce_to(&g.map(|x| -x), val(*b).shape())));
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            accumulate(nodes, grads, *a, |ga| {
                let prod = zip_broadcast(g, bv, g.shape(), |x, y| x * y);
                ga.add_assign(&reduce_to(&prod, av.shape()));
            });
            accumulate(nodes, grads, *b, |gb| {
                let prod = zip_broadcast(g, av, g.shape(), |x, y| x * y);
                gb.add_assign(&reduce_to(&prod, bv.shape()));
            });
        }
        Op::AddRow(x, bias) => {
            accumulate(nodes, grads, *x, |gx| gx.add_assign(g));
            accumulate(nodes, grads, *bias, |gb| {
                let cols = g.cols();
                let out = gb.data_mut();
                for r in 0..g.rows() {
                    for (o, v) in out.iter_mut().zip(&g.data()[r * cols..(r + 1) * cols]) {
                        *o += v;
                    }
                }
            });
        }
        Op::Scale(a, c) => {
            accumulate(nodes, grads, *a, |ga| {
                for (o, v) in ga.data_mut().iter_mut().zip(g.data()) {
                    *o += c * v;
                }
            });
        }
        Op::Relu(a) => {
            let x = val(*a);
            accumulate(nodes, grads, *a, |ga| {
                for ((o, v), xi) in ga.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                    if *xi > 0.0 {
                        *o += v;
                    }
                }
            });
        }
        Op::Sigmoid(a) => {
            let y = &node.value;
            accumulate(nodes, grads, *a, |ga| {
                for ((o, v), yi) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                    *o += v * yi * (1.0 - yi);
                }
            });
        }
        Op::Softplus(a) => {
            let x = val(*a);
            accumulate(nodes, grads, *a, |ga| {
                for ((o, v), xi) in ga.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                    *o += v * sigmoid(*xi);
                }
            });
        }
        Op::Concat { parts, axis } => {
            let mut offset = 0;
            for &p in parts {
                let [pr, pc] = val(p).shape();
                accumulate(nodes, grads, p, |gp| {
                    if *axis == 0 {
                        let start = offset * pc;
                        for (o, v) in gp.data_mut().iter_mut().zip(&g.data()[start..start + pr * pc]) {
                            *o += v;
                        }
                    } else {
                        for r in 0..pr {
                            let src = &g.row(r)[offset..offset + pc];
                            for (o, v) in gp.data_mut()[r * pc..(r + 1) * pc].iter_mut().zip(src) {
                                *o += v;
                            }
                        }
                    }
                });
                offset += if *axis == 0 { pr } else { pc };
            }
        }
        Op::SliceCols { src, start } => {
            let w = g.cols();
            let sc = val(*src).cols();
            accumulate(nodes, grads, *src, |gs| {
                for r in 0..g.rows() {
                    for (o, v) in gs.data_mut()[r * sc + start..r * sc + start + w].iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
            });
        }
        Op::SelectRows { src, index } => {
            let c = g.cols();
            accumulate(nodes, grads, *src, |gs| {
                for (r, &i) in index.iter().enumerate() {
                    for (o, v) in gs.data_mut()[i * c..(i + 1) * c].iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
            });
        }
        Op::MeanRows(a) => {
            let rows = val(*a).rows();
            let inv = 1.0 / rows as f64;
            accumulate(nodes, grads, *a, |ga| {
                let c = ga.cols();
                for r in 0..rows {
                    for (o, v) in ga.data_mut()[r * c..(r + 1) * c].iter_mut().zip(g.data()) {
                        *o += v * inv;
                    }
                }
            });
        }
        Op::Sum(a) => {
            let s = g.item();
            accumulate(nodes, grads, *a, |ga| ga.data_mut().iter_mut().for_each(|o| *o += s));
        }
        Op::Mean(a) => {
            let s = g.item() / val(*a).len() as f64;
            accumulate(nodes, grads, *a, |ga| ga.data_mut().iter_mut().for_each(|o| *o += s));
        }
        Op::RowSoftmax(a) => {
            let y = &node.value;
            accumulate(nodes, grads, *a, |ga| {
                let c = y.cols();
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for ((o, yi), gi) in ga.data_mut()[r * c..(r + 1) * c].iter_mut().zip(yr).zip(gr) {
                        *o += yi * (gi - dot);
                    }
                }
            });
        }
        Op::FrobeniusSq(a) => {
            let s = 2.0 * g.item();
            let x = val(*a);
            accumulate(nodes, grads, *a, |ga| {
                for (o, xi) in ga.data_mut().iter_mut().zip(x.data()) {
                    *o += s * xi;
                }
            });
        }
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> [usize; 2] {
        self.tape.nodes.borrow()[self.id].value.shape()
    }

    pub fn rows(&self) -> usize {
        self.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.shape()[1]
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    /// Borrow of the forward value; must be dropped before recording new ops.
    pub fn value_ref(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    /// Scalar value of a `1 x 1` node.
    pub fn item(&self) -> f64 {
        self.value_ref().data()[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn same_tape(&self, other: Var<'t>) -> Result<(), NumericsError> {
        self.tape.check_owner(other)
    }

    fn unary(&self, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'t> {
        let value = f(&self.value_ref());
        let rg = self.requires_grad();
        self.tape.push(value, op, rg)
    }

    fn binary(
        &self,
        other: Var<'t>,
        op: Op,
        f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor, NumericsError>,
    ) -> Result<Var<'t>, NumericsError> {
        self.same_tape(other)?;
        let value = {
            let nodes = self.tape.nodes.borrow();
            f(&nodes[self.id].value, &nodes[other.id].value)?
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(value, op, rg))
    }

    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.binary(other, Op::MatMul(self.id, other.id), |a, b| a.matmul(b))
    }

    /// `self * other^T`
    pub fn matmul_t(&self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.binary(other, Op::MatMulNt(self.id, other.id), |a, b| {
            if a.cols() != b.cols() {
                return Err(NumericsError::Shape { op: "matmul_t", left: a.shape(), right: b.shape() });
            }
            let mut out = Tensor::zeros(a.rows(), b.rows());
            gemm_nt(a, b, &mut out);
            Ok(out)
        })
    }

    pub fn transpose(&self) -> Var<'t> {
        self.unary(Op::Transpose(self.id), |a| a.transpose())
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.binary(other, Op::Add(self.id, other.id), |a, b| {
            let s = broadcast_shape("add", a.shape(), b.shape())?;
            Ok(zip_broadcast(a, b, s, |x, y| x + y))
        })
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.binary(other, Op::Sub(self.id, other.id), |a, b| {
            let s = broadcast_shape("sub", a.shape(), b.shape())?;
            Ok(zip_broadcast(a, b, s, |x, y| x - y))
        })
    }

    /// Elementwise product.
    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.binary(other, Op::Mul(self.id, other.id), |a, b| {
            let s = broadcast_shape("mul", a.shape(), b.shape())?;
            Ok(zip_broadcast(a, b, s, |x, y| x * y))
        })
    }

    /// Adds the `1 x cols` row `bias` to every row.
    pub fn add_row(&self, bias: Var<'t>) -> Result<Var<'t>, NumericsError> {
        self.binary(bias, Op::AddRow(self.id, bias.id), |a, b| {
            if b.rows() != 1 || b.cols() != a.cols() {
                return Err(NumericsError::Shape { op: "add_row", left: a.shape(), right: b.shape() });
            }
            let mut out = a.clone();
            let c = a.cols();
            for r in 0..a.rows() {
                for (o, v) in out.data_mut()[r * c..(r + 1) * c].iter_mut().zip(b.data()) {
                    *o += v;
                }
            }
            Ok(out)
        })
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, c), |a| a.map(|x| c * x))
    }

    pub fn neg(&self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn relu(&self) -> Var<'t> {
        self.unary(Op::Relu(self.id), |a| a.map(|x| x.max(0.0)))
    }

    pub fn sigmoid(&self) -> Var<'t> {
        self.unary(Op::Sigmoid(self.id), |a| a.map(sigmoid))
    }

    pub fn softplus(&self) -> Var<'t> {
        self.unary(Op::Softplus(self.id), |a| a.map(softplus))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Var<'t>, NumericsError> {
        let [rows, cols] = self.shape();
        if start > end || end > cols {
            return Err(NumericsError::SliceRange { start, end, cols });
        }
        Ok(self.unary(Op::SliceCols { src: self.id, start }, |a| {
            Tensor::from_fn(rows, end - start, |r, c| a.get(r, start + c))
        }))
    }

    /// Gathers rows: output row `r` is input row `index[r]`.
    pub fn select_rows(&self, index: &[usize]) -> Result<Var<'t>, NumericsError> {
        let [rows, cols] = self.shape();
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(NumericsError::RowIndex { index: bad, rows });
        }
        Ok(self.unary(Op::SelectRows { src: self.id, index: index.to_vec() }, |a| {
            Tensor::from_fn(index.len(), cols, |r, c| a.get(index[r], c))
        }))
    }

    /// Column means, as a `1 x cols` row.
    pub fn mean_rows(&self) -> Result<Var<'t>, NumericsError> {
        let [rows, cols] = self.shape();
        if rows == 0 {
            return Err(NumericsError::EmptyReduction);
        }
        Ok(self.unary(Op::MeanRows(self.id), |a| {
            let mut out = Tensor::zeros(1, cols);
            for r in 0..rows {
                for (o, v) in out.data_mut().iter_mut().zip(a.row(r)) {
                    *o += v;
                }
            }
            out.map(|x| x / rows as f64)
        }))
    }

    pub fn sum(&self) -> Var<'t> {
        self.unary(Op::Sum(self.id), |a| Tensor::scalar(a.sum()))
    }

    pub fn mean(&self) -> Result<Var<'t>, NumericsError> {
        if self.value_ref().is_empty() {
            return Err(NumericsError::EmptyReduction);
        }
        Ok(self.unary(Op::Mean(self.id), |a| Tensor::scalar(a.sum() / a.len() as f64)))
    }

    /// Softmax over each row, max-shifted for stability.
    pub fn row_softmax(&self) -> Var<'t> {
        self.unary(Op::RowSoftmax(self.id), |a| {
            let mut out = a.clone();
            let c = a.cols();
            for r in 0..a.rows() {
                let row = &mut out.data_mut()[r * c..(r + 1) * c];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for x in row.iter_mut() {
                    *x = (*x - max).exp();
                    total += *x;
                }
                for x in row.iter_mut() {
                    *x /= total;
                }
            }
            out
        })
    }

    /// Sum of squared entries.
    pub fn frobenius_sq(&self) -> Var<'t> {
        self.unary(Op::FrobeniusSq(self.id), |a| Tensor::scalar(a.frobenius_sq()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_chain_rule() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(2.0));
        let b = tape.leaf(Tensor::scalar(3.0));
        let c = a.matmul(b).unwrap();
        assert_eq!(c.item(), 6.0);
        let g = tape.gradients(c).unwrap();
        assert_eq!(g.wrt(a).unwrap().item(), 3.0);
        assert_eq!(g.wrt(b).unwrap().item(), 2.0);
    }

    #[test]
    fn square_power_rule() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let loss = x.mul(x).unwrap();
        let g = tape.gradients(loss).unwrap();
        assert_eq!(g.wrt(x).unwrap().item(), 6.0);
    }

    #[test]
    fn relu_values_and_slopes() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_rows(&[[-2.0, 3.0]]));
        let y = x.relu();
        assert_eq!(y.value().data(), &[0.0, 3.0]);
        let g = tape.gradients(y.sum()).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn uniform_softmax() {
        let tape = Tape::new();
        let y = tape.constant(Tensor::zeros(1, 3)).row_softmax();
        for v in y.value().data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_broadcast_only() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 3));
        let s = tape.leaf(Tensor::scalar(1.5));
        let bad = tape.leaf(Tensor::zeros(1, 3));
        assert!(a.add(s).is_ok());
        assert!(matches!(a.add(bad), Err(NumericsError::Shape { .. })));
        let g = tape.gradients(a.mul(s).unwrap().sum()).unwrap();
        assert_eq!(g.wrt(s).unwrap().item(), 0.0);
    }

    #[test]
    fn concat_axis_out_of_range() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 2));
        assert!(matches!(tape.concat(&[a, a], 2), Err(NumericsError::ConcatAxis { axis: 2 })));
    }

    #[test]
    fn backward_errors() {
        let tape = Tape::new();
        let other = Tape::new();
        let mut store = ParamStore::new();
        let x = other.leaf(Tensor::scalar(1.0));
        assert!(matches!(tape.backward(x, &mut store), Err(NumericsError::EmptyTape)));
        let m = tape.leaf(Tensor::zeros(2, 2));
        assert!(matches!(tape.backward(m, &mut store), Err(NumericsError::NotScalar { .. })));
        assert!(matches!(tape.backward(x, &mut store), Err(NumericsError::ForeignVar)));
    }

    #[test]
    fn constants_do_not_require_grad() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::filled(2, 2, 1.0));
        let b = a.relu().sum();
        assert!(!b.requires_grad());
        let g = tape.gradients(b).unwrap();
        assert!(g.wrt(a).is_none());
    }
}
