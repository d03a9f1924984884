use std::cell::{Cell, Ref, RefCell};
use std::fmt;

use super::kernels::{gemm_nn, gemm_nt, gemm_tn};
use crate::error::{Error, Result};
use crate::tensor::{broadcast_index_map, broadcast_shape, numel, strides, Tensor};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    MatMul(NodeId, NodeId),
    Unary(NodeId, UnaryKind),
    Softmax(NodeId),
    Reshape(NodeId),
    Permute(NodeId, Vec<usize>),
    GatherRows(NodeId, Vec<usize>),
    Sum(NodeId),
    Mean(NodeId),
}

#[derive(Clone, Copy, Debug)]
enum UnaryKind {
    Relu,
    Sigmoid,
    Tanh,
    Abs,
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations in execution order so gradients can be propagated
/// back through them once.
///
/// A tape is built per forward pass; it is cheap to create and is dropped
/// after the gradients have been read out.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    corrupt_matmul: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: NodeId,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} {:?})", self.id, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `t` as a leaf; it is differentiated when `t.requires_grad()`.
    pub fn leaf(&self, t: Tensor) -> Var<'_> {
        let needs = t.requires_grad();
        self.push(t, Op::Leaf, needs)
    }

    /// Records `t` as a differentiable leaf regardless of its flag.
    pub fn param(&self, t: Tensor) -> Var<'_> {
        self.push(t.with_requires_grad(true), Op::Leaf, true)
    }

    pub fn constant(&self, t: Tensor) -> Var<'_> {
        self.push(t.with_requires_grad(false), Op::Leaf, false)
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Test hook: perturbs the matmul right-operand gradient so that the
    /// gradient checker can demonstrate it catches a broken backward rule.
    #[doc(hidden)]
    pub fn corrupt_backward(&self, on: bool) {
        self.corrupt_matmul.set(on);
    }

    fn push(&self, value: Tensor, op: Op, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].needs_grad)
    }

    fn value(&self, id: NodeId) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Propagates d(loss)/d(node) to every node that needs a gradient.
    ///
    /// Each recorded operation is visited once, in reverse recording order.
    /// Uses of a value in several places accumulate additively.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes.is_empty() {
            return Err(Error::Contract("backward on an empty tape".into()));
        }
        let seed = &nodes[loss.id].value;
        if seed.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                seed.shape()
            )));
        }
        let corrupt = self.corrupt_matmul.get();
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let out = &node.value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    if nodes[*a].needs_grad {
                        let r = reduce_to(&g, out.shape(), nodes[*a].value.shape());
                        accumulate(&mut grads[*a], r);
                    }
                    if nodes[*b].needs_grad {
                        let mut r = reduce_to(&g, out.shape(), nodes[*b].value.shape());
                        if sign < 0.0 {
                            r.iter_mut().for_each(|v| *v = -*v);
                        }
                        accumulate(&mut grads[*b], r);
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    let amap = broadcast_index_map(out.shape(), va.shape());
                    let bmap = broadcast_index_map(out.shape(), vb.shape());
                    if nodes[*a].needs_grad {
                        let mut r = vec![0.0; va.numel()];
                        for (i, gi) in g.iter().enumerate() {
                            r[amap[i]] += gi * vb.data()[bmap[i]];
                        }
                        accumulate(&mut grads[*a], r);
                    }
                    if nodes[*b].needs_grad {
                        let mut r = vec![0.0; vb.numel()];
                        for (i, gi) in g.iter().enumerate() {
                            r[bmap[i]] += gi * va.data()[amap[i]];
                        }
                        accumulate(&mut grads[*b], r);
                    }
                }
                Op::Scale(x, f) => {
                    accumulate(&mut grads[*x], g.iter().map(|v| v * f).collect());
                }
                Op::AddScalar(x) => accumulate(&mut grads[*x], g),
                Op::MatMul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    let plan = MatMulPlan::new(va.shape(), vb.shape())?;
                    if nodes[*a].needs_grad {
                        let mut r = vec![0.0; va.numel()];
                        plan.backward_lhs(&g, vb.data(), &mut r);
                        accumulate(&mut grads[*a], r);
                    }
                    if nodes[*b].needs_grad {
                        let mut r = vec![0.0; vb.numel()];
                        plan.backward_rhs(va.data(), &g, &mut r);
                        if corrupt {
                            r.iter_mut().for_each(|v| *v *= 1.01);
                        }
                        accumulate(&mut grads[*b], r);
                    }
                }
                Op::Unary(x, kind) => {
                    let xv = nodes[*x].value.data();
                    let y = out.data();
                    let r: Vec<f64> = match kind {
                        UnaryKind::Relu => g
                            .iter()
                            .zip(xv)
                            .map(|(gi, &xi)| if xi > 0.0 { *gi } else { 0.0 })
                            .collect(),
                        UnaryKind::Sigmoid => {
                            g.iter().zip(y).map(|(gi, yi)| gi * yi * (1.0 - yi)).collect()
                        }
                        UnaryKind::Tanh => {
                            g.iter().zip(y).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect()
                        }
                        UnaryKind::Abs => g
                            .iter()
                            .zip(xv)
                            .map(|(gi, &xi)| {
                                if xi > 0.0 {
                                    *gi
                                } else if xi < 0.0 {
                                    -gi
                                } else {
                                    0.0
                                }
                            })
                            .collect(),
                    };
                    accumulate(&mut grads[*x], r);
                }
                Op::Softmax(x) => {
                    let n = *out.shape().last().unwrap_or(&1);
                    let y = out.data();
                    let mut r = vec![0.0; y.len()];
                    for ((rr, yy), gg) in r.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)) {
                        let dot: f64 = yy.iter().zip(gg).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            rr[j] = yy[j] * (gg[j] - dot);
                        }
                    }
                    accumulate(&mut grads[*x], r);
                }
                Op::Reshape(x) => accumulate(&mut grads[*x], g),
                Op::Permute(x, perm) => {
                    let map = permute_map(nodes[*x].value.shape(), perm);
                    let mut r = vec![0.0; g.len()];
                    for (o, &src) in map.iter().enumerate() {
                        r[src] += g[o];
                    }
                    accumulate(&mut grads[*x], r);
                }
                Op::GatherRows(table, indices) => {
                    let tv = &nodes[*table].value;
                    let width = tv.shape()[1];
                    let mut r = vec![0.0; tv.numel()];
                    for (row, &src) in indices.iter().enumerate() {
                        let dst = &mut r[src * width..(src + 1) * width];
                        for (d, s) in dst.iter_mut().zip(&g[row * width..(row + 1) * width]) {
                            *d += s;
                        }
                    }
                    accumulate(&mut grads[*table], r);
                }
                Op::Sum(x) => {
                    let n = nodes[*x].value.numel();
                    accumulate(&mut grads[*x], vec![g[0]; n]);
                }
                Op::Mean(x) => {
                    let n = nodes[*x].value.numel();
                    accumulate(&mut grads[*x], vec![g[0] / n as f64; n]);
                }
            }
        }

        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        // Only leaf gradients are meaningful to callers; interior ones were consumed.
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

fn reduce_to(g: &[f64], out_shape: &[usize], in_shape: &[usize]) -> Vec<f64> {
    if out_shape == in_shape {
        return g.to_vec();
    }
    let map = broadcast_index_map(out_shape, in_shape);
    let mut r = vec![0.0; numel(in_shape)];
    for (i, &dst) in map.iter().enumerate() {
        r[dst] += g[i];
    }
    r
}

/// For each flat output position of `permute(x, perm)`, the flat input position.
fn permute_map(in_shape: &[usize], perm: &[usize]) -> Vec<usize> {
    let in_strides = strides(in_shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
    let eff: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = out_shape.len();
    let total = numel(&out_shape);
    let mut map = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    let mut pos = 0usize;
    for _ in 0..total {
        map.push(pos);
        for axis in (0..n).rev() {
            idx[axis] += 1;
            pos += eff[axis];
            if idx[axis] < out_shape[axis] {
                break;
            }
            pos -= eff[axis] * idx[axis];
            idx[axis] = 0;
        }
    }
    map
}

/// Shape bookkeeping for a batched matrix product with broadcast batch axes.
struct MatMulPlan {
    m: usize,
    k: usize,
    n: usize,
    out_shape: Vec<usize>,
    a_batches: Vec<usize>,
    b_batches: Vec<usize>,
}

impl MatMulPlan {
    fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() < 2 || b.len() < 2 {
            return Err(Error::dim("matmul", a, b));
        }
        let (m, k) = (a[a.len() - 2], a[a.len() - 1]);
        let (k2, n) = (b[b.len() - 2], b[b.len() - 1]);
        if k != k2 {
            return Err(Error::dim("matmul", a, b));
        }
        let a_batch = &a[..a.len() - 2];
        let b_batch = &b[..b.len() - 2];
        let batch = broadcast_shape(a_batch, b_batch).ok_or_else(|| Error::dim("matmul", a, b))?;
        let mut out_shape = batch.clone();
        out_shape.extend([m, n]);
        Ok(Self {
            m,
            k,
            n,
            out_shape,
            a_batches: broadcast_index_map(&batch, a_batch),
            b_batches: broadcast_index_map(&batch, b_batch),
        })
    }

    /// True when `b` is shared by every batch and `a` is laid out densely,
    /// so the whole product collapses into one tall matrix multiply.
    fn tall(&self) -> bool {
        self.b_batches.iter().all(|&i| i == 0)
            && self.a_batches.iter().enumerate().all(|(i, &j)| i == j)
    }

    fn forward(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let (m, k, n) = (self.m, self.k, self.n);
        let mut c = vec![0.0; numel(&self.out_shape)];
        if self.tall() {
            gemm_nn(a, b, &mut c, m * self.a_batches.len(), k, n);
            return c;
        }
        for (i, (&ia, &ib)) in self.a_batches.iter().zip(&self.b_batches).enumerate() {
            gemm_nn(
                &a[ia * m * k..(ia + 1) * m * k],
                &b[ib * k * n..(ib + 1) * k * n],
                &mut c[i * m * n..(i + 1) * m * n],
                m,
                k,
                n,
            );
        }
        c
    }

    fn backward_lhs(&self, g: &[f64], b: &[f64], ga: &mut [f64]) {
        let (m, k, n) = (self.m, self.k, self.n);
        if self.tall() {
            gemm_nt(g, b, ga, m * self.a_batches.len(), n, k);
            return;
        }
        for (i, (&ia, &ib)) in self.a_batches.iter().zip(&self.b_batches).enumerate() {
            gemm_nt(
                &g[i * m * n..(i + 1) * m * n],
                &b[ib * k * n..(ib + 1) * k * n],
                &mut ga[ia * m * k..(ia + 1) * m * k],
                m,
                n,
                k,
            );
        }
    }

    fn backward_rhs(&self, a: &[f64], g: &[f64], gb: &mut [f64]) {
        let (m, k, n) = (self.m, self.k, self.n);
        if self.tall() {
            gemm_tn(a, g, gb, m * self.a_batches.len(), k, n);
            return;
        }
        for (i, (&ia, &ib)) in self.a_batches.iter().zip(&self.b_batches).enumerate() {
            gemm_tn(
                &a[ia * m * k..(ia + 1) * m * k],
                &g[i * m * n..(i + 1) * m * n],
                &mut gb[ib * k * n..(ib + 1) * k * n],
                m,
                k,
                n,
            );
        }
    }
}

/// Gradients produced by one [`Tape::backward`] call, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`, or `None` when `v` does not influence it.
    pub fn get(&self, v: Var<'_>) -> Option<Tensor> {
        self.get_id(v.id)
    }

    pub fn get_id(&self, id: NodeId) -> Option<Tensor> {
        let g = self.grads.get(id)?.as_ref()?;
        Some(Tensor::new(&self.shapes[id], g.clone()).expect("gradient shape"))
    }

    /// Like [`get`](Self::get) but zeros for unreachable values.
    pub fn wrt(&self, v: Var<'_>) -> Tensor {
        self.get(v)
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.id]))
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.value(self.id).shape().to_vec()
    }

    pub fn value(&self) -> Tensor {
        self.tape.value(self.id).clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.value(self.id))
    }

    pub fn item(&self) -> f64 {
        self.tape.value(self.id).data()[0]
    }

    fn same_tape(&self, other: &Var<'_>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "operands recorded on different tapes"
        );
    }

    fn binary(self, other: Var<'t>, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        self.same_tape(&other);
        let a = self.tape.value(self.id);
        let b = self.tape.value(other.id);
        let value = if a.shape() == b.shape() {
            let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
            Tensor::new(a.shape(), data)?
        } else {
            let out = broadcast_shape(a.shape(), b.shape())
                .ok_or_else(|| Error::dim(name, a.shape(), b.shape()))?;
            let amap = broadcast_index_map(&out, a.shape());
            let bmap = broadcast_index_map(&out, b.shape());
            let data = amap
                .iter()
                .zip(&bmap)
                .map(|(&i, &j)| f(a.data()[i], b.data()[j]))
                .collect();
            Tensor::new(&out, data)?
        };
        drop((a, b));
        Ok((value, self.tape.needs(&[self.id, other.id])))
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let (v, needs) = self.binary(other, "add", |x, y| x + y)?;
        Ok(self.tape.push(v, Op::Add(self.id, other.id), needs))
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let (v, needs) = self.binary(other, "sub", |x, y| x - y)?;
        Ok(self.tape.push(v, Op::Sub(self.id, other.id), needs))
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (v, needs) = self.binary(other, "mul", |x, y| x * y)?;
        Ok(self.tape.push(v, Op::Mul(self.id, other.id), needs))
    }

    pub fn scale(self, factor: f64) -> Var<'t> {
        let v = self.map_values(|x| x * factor);
        let needs = self.tape.needs(&[self.id]);
        self.tape.push(v, Op::Scale(self.id, factor), needs)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        let v = self.map_values(|x| x + c);
        let needs = self.tape.needs(&[self.id]);
        self.tape.push(v, Op::AddScalar(self.id), needs)
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let x = self.tape.value(self.id);
        Tensor::new(x.shape(), x.data().iter().map(|&v| f(v)).collect()).expect("same shape")
    }

    fn unary(self, kind: UnaryKind) -> Var<'t> {
        let v = match kind {
            UnaryKind::Relu => self.map_values(|x| if x > 0.0 { x } else { 0.0 }),
            UnaryKind::Sigmoid => self.map_values(sigmoid),
            UnaryKind::Tanh => self.map_values(f64::tanh),
            UnaryKind::Abs => self.map_values(f64::abs),
        };
        let needs = self.tape.needs(&[self.id]);
        self.tape.push(v, Op::Unary(self.id, kind), needs)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(UnaryKind::Relu)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(UnaryKind::Sigmoid)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(UnaryKind::Tanh)
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(UnaryKind::Abs)
    }

    pub fn activation(self, kind: Activation) -> Var<'t> {
        match kind {
            Activation::Relu => self.relu(),
            Activation::Sigmoid => self.sigmoid(),
            Activation::Tanh => self.tanh(),
        }
    }

    /// Softmax over the last axis, stabilized by subtracting the row maximum.
    pub fn softmax_lastdim(self) -> Var<'t> {
        let x = self.tape.value(self.id);
        let n = *x.shape().last().unwrap_or(&1);
        let mut data = vec![0.0; x.numel()];
        for (out, row) in data.chunks_mut(n).zip(x.data().chunks(n)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (o, &v) in out.iter_mut().zip(row) {
                *o = (v - max).exp();
                total += *o;
            }
            out.iter_mut().for_each(|o| *o /= total);
        }
        let v = Tensor::new(x.shape(), data).expect("same shape");
        drop(x);
        let needs = self.tape.needs(&[self.id]);
        self.tape.push(v, Op::Softmax(self.id), needs)
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other);
        let a = self.tape.value(self.id);
        let b = self.tape.value(other.id);
        let plan = MatMulPlan::new(a.shape(), b.shape())?;
        let v = Tensor::new(&plan.out_shape, plan.forward(a.data(), b.data()))?;
        drop((a, b));
        let needs = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(v, Op::MatMul(self.id, other.id), needs))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let v = self.value().reshape(shape)?;
        let needs = self.tape.needs(&[self.id]);
        Ok(self.tape.push(v, Op::Reshape(self.id), needs))
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(self, perm: &[usize]) -> Result<Var<'t>> {
        let x = self.tape.value(self.id);
        let nd = x.ndim();
        let mut seen = vec![false; nd];
        if perm.len() != nd || perm.iter().any(|&p| p >= nd || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::dim("permute", x.shape(), perm));
        }
        let map = permute_map(x.shape(), perm);
        let out_shape: Vec<usize> = perm.iter().map(|&p| x.shape()[p]).collect();
        let data = map.iter().map(|&i| x.data()[i]).collect();
        let v = Tensor::new(&out_shape, data)?;
        drop(x);
        let needs = self.tape.needs(&[self.id]);
        Ok(self.tape.push(v, Op::Permute(self.id, perm.to_vec()), needs))
    }

    /// Swaps the two innermost axes.
    pub fn transpose_last2(self) -> Result<Var<'t>> {
        let nd = self.shape().len();
        if nd < 2 {
            return Err(Error::dim("transpose_last2", &self.shape(), &[]));
        }
        let mut perm: Vec<usize> = (0..nd).collect();
        perm.swap(nd - 2, nd - 1);
        self.permute(&perm)
    }

    /// Selects rows of a 2-D table: `out[r] = self[indices[r]]`.
    pub fn gather_rows(self, indices: &[usize]) -> Result<Var<'t>> {
        let t = self.tape.value(self.id);
        if t.ndim() != 2 || indices.is_empty() {
            return Err(Error::dim("gather_rows", t.shape(), &[indices.len()]));
        }
        let (rows, width) = (t.shape()[0], t.shape()[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::dim("gather_rows", t.shape(), &[bad]));
        }
        let mut data = Vec::with_capacity(indices.len() * width);
        for &i in indices {
            data.extend_from_slice(&t.data()[i * width..(i + 1) * width]);
        }
        let v = Tensor::new(&[indices.len(), width], data)?;
        drop(t);
        let needs = self.tape.needs(&[self.id]);
        Ok(self.tape.push(v, Op::GatherRows(self.id, indices.to_vec()), needs))
    }

    pub fn sum(self) -> Var<'t> {
        let s: f64 = self.tape.value(self.id).data().iter().sum();
        let needs = self.tape.needs(&[self.id]);
        self.tape.push(Tensor::scalar(s), Op::Sum(self.id), needs)
    }

    pub fn mean(self) -> Var<'t> {
        let x = self.tape.value(self.id);
        let m = x.data().iter().sum::<f64>() / x.numel() as f64;
        drop(x);
        let needs = self.tape.needs(&[self.id]);
        self.tape.push(Tensor::scalar(m), Op::Mean(self.id), needs)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
