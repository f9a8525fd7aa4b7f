use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::kernels;
use crate::{AdError, Result, Tensor, LAYER_NORM_EPS};

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    MatMul(usize, usize),
    MatMulT(usize, usize),
    Transpose(usize),
    Concat(Vec<usize>),
    SliceCols { input: usize, start: usize },
    GatherRows { input: usize, index: Vec<usize> },
    Sum(usize),
    Mean(usize),
    Softmax(usize),
    LayerNorm { input: usize, rstd: Vec<f64> },
    Silu(usize),
    Gelu(usize),
    Sigmoid(usize),
    Exp(usize),
    Log(usize),
    Square(usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
struct Inner {
    values: Vec<Rc<Tensor>>,
    nodes: Vec<Node>,
}

/// Recording tape. Nodes are appended in evaluation order, so every node's
/// inputs have smaller ids than the node itself.
#[derive(Default)]
pub struct Graph {
    inner: RefCell<Inner>,
    consumed: Cell<bool>,
}

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Gradients indexed by node id, produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: &Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(|g| g.as_ref())
    }

    /// Gradient of a leaf, or zeros of its shape when nothing flowed into it.
    pub fn get_or_zeros(&self, var: &Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.shape()))
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Leaf that receives a gradient.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    /// Gradient-receiving leaf that shares its storage with the caller.
    pub fn param_shared(&self, value: Rc<Tensor>) -> Var<'_> {
        self.push_rc(value, Op::Leaf, true)
    }

    pub fn constant_shared(&self, value: Rc<Tensor>) -> Var<'_> {
        self.push_rc(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        self.push_rc(Rc::new(value), op, requires_grad)
    }

    fn push_rc(&self, value: Rc<Tensor>, op: Op, requires_grad: bool) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.values.push(value);
        inner.nodes.push(Node { op, requires_grad });
        Var { graph: self, id }
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.inner.borrow().values[id])
    }

    fn requires_grad(&self, id: usize) -> bool {
        self.inner.borrow().nodes[id].requires_grad
    }

    /// Reverse sweep from a scalar `loss`. The tape can be swept once.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        if !std::ptr::eq(loss.graph, self) {
            return Err(AdError::ForeignVar);
        }
        if self.consumed.replace(true) {
            return Err(AdError::TapeConsumed);
        }
        let inner = self.inner.borrow();
        let loss_val = &inner.values[loss.id];
        if !loss_val.is_scalar() {
            return Err(AdError::NonScalarLoss(loss_val.shape().to_vec()));
        }
        let n = inner.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let Some(gy) = grads[id].take() else { continue };
            let node = &inner.nodes[id];
            if !node.requires_grad {
                continue;
            }
            backprop_node(&inner, id, &node.op, &gy, &mut grads);
            grads[id] = Some(gy);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| {
                let node = &inner.nodes[id];
                match (&node.op, g) {
                    (Op::Leaf, Some(g)) if node.requires_grad => {
                        Some(Tensor::new(inner.values[id].shape().to_vec(), g).expect("grad shape"))
                    }
                    _ => None,
                }
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn accumulate(inner: &Inner, grads: &mut [Option<Vec<f64>>], id: usize, contrib: Vec<f64>) {
    if !inner.nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(g) => {
            for (a, b) in g.iter_mut().zip(contrib) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(contrib),
    }
}

fn elementwise_unary(
    inner: &Inner,
    grads: &mut [Option<Vec<f64>>],
    input: usize,
    gy: &[f64],
    f: impl Fn(f64) -> f64,
) {
    let x = &inner.values[input];
    let g = x.data().iter().zip(gy).map(|(&x, &g)| g * f(x)).collect();
    accumulate(inner, grads, input, g);
}

fn backprop_node(inner: &Inner, id: usize, op: &Op, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let out = &inner.values[id];
    match op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(inner, grads, *a, gy.to_vec());
            accumulate(inner, grads, *b, gy.to_vec());
        }
        Op::Sub(a, b) => {
            accumulate(inner, grads, *a, gy.to_vec());
            accumulate(inner, grads, *b, gy.iter().map(|g| -g).collect());
        }
        Op::Mul(a, b) => {
            let av = &inner.values[*a];
            let bv = &inner.values[*b];
            let ga = gy.iter().zip(bv.data()).map(|(g, b)| g * b).collect();
            let gb = gy.iter().zip(av.data()).map(|(g, a)| g * a).collect();
            accumulate(inner, grads, *a, ga);
            accumulate(inner, grads, *b, gb);
        }
        Op::AddRow(a, b) => {
            let d = inner.values[*b].numel();
            accumulate(inner, grads, *a, gy.to_vec());
            let mut gb = vec![0.0; d];
            for row in gy.chunks(d) {
                for (acc, g) in gb.iter_mut().zip(row) {
                    *acc += g;
                }
            }
            accumulate(inner, grads, *b, gb);
        }
        Op::MulRow(a, b) => {
            let av = &inner.values[*a];
            let bv = &inner.values[*b];
            let d = bv.numel();
            let mut ga = vec![0.0; gy.len()];
            let mut gb = vec![0.0; d];
            for ((grow, arow), garow) in gy.chunks(d).zip(av.data().chunks(d)).zip(ga.chunks_mut(d))
            {
                for j in 0..d {
                    garow[j] = grow[j] * bv.data()[j];
                    gb[j] += grow[j] * arow[j];
                }
            }
            accumulate(inner, grads, *a, ga);
            accumulate(inner, grads, *b, gb);
        }
        Op::Scale(a, s) => accumulate(inner, grads, *a, gy.iter().map(|g| g * s).collect()),
        Op::AddScalar(a) => accumulate(inner, grads, *a, gy.to_vec()),
        Op::MatMul(a, b) => {
            let av = &inner.values[*a];
            let bv = &inner.values[*b];
            let (m, k) = (av.shape()[0], av.shape()[1]);
            let n = bv.shape()[1];
            if inner.nodes[*a].requires_grad {
                // dA = dC * B^T
                let bt = kernels::transpose(bv.data(), k, n);
                accumulate(inner, grads, *a, kernels::matmul(gy, &bt, m, n, k));
            }
            if inner.nodes[*b].requires_grad {
                // dB = A^T * dC
                let at = kernels::transpose(av.data(), m, k);
                accumulate(inner, grads, *b, kernels::matmul(&at, gy, k, m, n));
            }
        }
        Op::MatMulT(a, b) => {
            // C = A * B^T with A [m,k], B [n,k]
            let av = &inner.values[*a];
            let bv = &inner.values[*b];
            let (m, k) = (av.shape()[0], av.shape()[1]);
            let n = bv.shape()[0];
            if inner.nodes[*a].requires_grad {
                accumulate(inner, grads, *a, kernels::matmul(gy, bv.data(), m, n, k));
            }
            if inner.nodes[*b].requires_grad {
                let gt = kernels::transpose(gy, m, n);
                accumulate(inner, grads, *b, kernels::matmul(&gt, av.data(), n, m, k));
            }
        }
        Op::Transpose(a) => {
            let (r, c) = (out.shape()[0], out.shape()[1]);
            accumulate(inner, grads, *a, kernels::transpose(gy, r, c));
        }
        Op::Concat(parts) => {
            let total = out.cols();
            let rows = out.rows();
            let mut offset = 0;
            for &p in parts {
                let c = inner.values[p].cols();
                if inner.nodes[p].requires_grad {
                    let mut g = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        g.extend_from_slice(&gy[r * total + offset..r * total + offset + c]);
                    }
                    accumulate(inner, grads, p, g);
                }
                offset += c;
            }
        }
        Op::SliceCols { input, start } => {
            let x = &inner.values[*input];
            let c_in = x.cols();
            let c_out = out.cols();
            let mut g = vec![0.0; x.numel()];
            for r in 0..x.rows() {
                g[r * c_in + start..r * c_in + start + c_out]
                    .copy_from_slice(&gy[r * c_out..(r + 1) * c_out]);
            }
            accumulate(inner, grads, *input, g);
        }
        Op::GatherRows { input, index } => {
            let x = &inner.values[*input];
            let c = x.cols();
            let mut g = vec![0.0; x.numel()];
            for (r, &src) in index.iter().enumerate() {
                for j in 0..c {
                    g[src * c + j] += gy[r * c + j];
                }
            }
            accumulate(inner, grads, *input, g);
        }
        Op::Sum(a) => {
            let n = inner.values[*a].numel();
            accumulate(inner, grads, *a, vec![gy[0]; n]);
        }
        Op::Mean(a) => {
            let n = inner.values[*a].numel();
            accumulate(inner, grads, *a, vec![gy[0] / n as f64; n]);
        }
        Op::Softmax(a) => {
            let c = out.cols();
            let mut g = vec![0.0; gy.len()];
            for ((yrow, grow), dst) in out.data().chunks(c).zip(gy.chunks(c)).zip(g.chunks_mut(c)) {
                let mut dot = 0.0;
                for (y, gv) in yrow.iter().zip(grow) {
                    dot += y * gv;
                }
                for j in 0..c {
                    dst[j] = yrow[j] * (grow[j] - dot);
                }
            }
            accumulate(inner, grads, *a, g);
        }
        Op::LayerNorm { input, rstd } => {
            let c = out.cols();
            let inv_n = 1.0 / c as f64;
            let mut g = vec![0.0; gy.len()];
            for (((xhat, grow), dst), &r) in out
                .data()
                .chunks(c)
                .zip(gy.chunks(c))
                .zip(g.chunks_mut(c))
                .zip(rstd)
            {
                let mut sum_g = 0.0;
                let mut sum_gx = 0.0;
                for (xh, gv) in xhat.iter().zip(grow) {
                    sum_g += gv;
                    sum_gx += gv * xh;
                }
                for j in 0..c {
                    dst[j] = r * (grow[j] - inv_n * sum_g - xhat[j] * inv_n * sum_gx);
                }
            }
            accumulate(inner, grads, *input, g);
        }
        Op::Silu(a) => elementwise_unary(inner, grads, *a, gy, |x| {
            let s = kernels::sigmoid(x);
            s * (1.0 + x * (1.0 - s))
        }),
        Op::Gelu(a) => elementwise_unary(inner, grads, *a, gy, kernels::gelu_grad),
        Op::Sigmoid(a) => {
            let g = out
                .data()
                .iter()
                .zip(gy)
                .map(|(s, g)| g * s * (1.0 - s))
                .collect();
            accumulate(inner, grads, *a, g);
        }
        Op::Exp(a) => {
            let g = out.data().iter().zip(gy).map(|(y, g)| g * y).collect();
            accumulate(inner, grads, *a, g);
        }
        Op::Log(a) => elementwise_unary(inner, grads, *a, gy, |x| 1.0 / x),
        Op::Square(a) => elementwise_unary(inner, grads, *a, gy, |x| 2.0 * x),
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> AdError {
    AdError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

impl<'g> Var<'g> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// Current value (shared, cheap to clone).
    pub fn value(&self) -> Rc<Tensor> {
        self.graph.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.requires_grad(self.id)
    }

    /// Constant copy of this node's value; gradients stop here.
    pub fn detach(&self) -> Var<'g> {
        self.graph.constant((*self.value()).clone())
    }

    fn same_graph(&self, other: &Var<'g>) -> Result<()> {
        if std::ptr::eq(self.graph, other.graph) {
            Ok(())
        } else {
            Err(AdError::ForeignVar)
        }
    }

    fn unary(&self, op: Op, value: Tensor) -> Var<'g> {
        let rg = self.requires_grad();
        self.graph.push(value, op, rg)
    }

    fn binary(&self, other: &Var<'g>, op: Op, value: Tensor) -> Var<'g> {
        let rg = self.requires_grad() || other.requires_grad();
        self.graph.push(value, op, rg)
    }

    fn zip_same(
        &self,
        other: &Var<'g>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'g>> {
        self.same_graph(other)?;
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(shape_err(name, &a, &b));
        }
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(a.shape().to_vec(), data)?;
        Ok(self.binary(other, op, value))
    }

    pub fn add(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.zip_same(other, "add", |a, b| a + b, Op::Add(self.id, other.id))
    }

    pub fn sub(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.zip_same(other, "sub", |a, b| a - b, Op::Sub(self.id, other.id))
    }

    pub fn mul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.zip_same(other, "mul", |a, b| a * b, Op::Mul(self.id, other.id))
    }

    fn row_broadcast(
        &self,
        row: &Var<'g>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var<'g>> {
        self.same_graph(row)?;
        let (a, b) = (self.value(), row.value());
        let d = a.cols();
        if b.numel() != d || b.rows() != 1 {
            return Err(shape_err(name, &a, &b));
        }
        let mut data = Vec::with_capacity(a.numel());
        for r in a.data().chunks(d) {
            data.extend(r.iter().zip(b.data()).map(|(&x, &y)| f(x, y)));
        }
        let value = Tensor::new(a.shape().to_vec(), data)?;
        Ok(self.binary(row, op, value))
    }

    /// Adds a `[d]` (or `[1, d]`) row to every row of `self`.
    pub fn add_row(&self, row: &Var<'g>) -> Result<Var<'g>> {
        self.row_broadcast(row, "add_row", |a, b| a + b, Op::AddRow(self.id, row.id))
    }

    /// Multiplies every row of `self` elementwise by a `[d]` row.
    pub fn mul_row(&self, row: &Var<'g>) -> Result<Var<'g>> {
        self.row_broadcast(row, "mul_row", |a, b| a * b, Op::MulRow(self.id, row.id))
    }

    pub fn scale(&self, s: f64) -> Var<'g> {
        let v = self.value().map(|x| x * s);
        self.unary(Op::Scale(self.id, s), v)
    }

    pub fn neg(&self) -> Var<'g> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, s: f64) -> Var<'g> {
        let v = self.value().map(|x| x + s);
        self.unary(Op::AddScalar(self.id), v)
    }

    fn check_matrix(t: &Tensor, op: &'static str, other: &Tensor) -> Result<()> {
        if t.shape().len() != 2 {
            return Err(shape_err(op, t, other));
        }
        Ok(())
    }

    /// `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.same_graph(other)?;
        let (a, b) = (self.value(), other.value());
        Self::check_matrix(&a, "matmul", &b)?;
        Self::check_matrix(&b, "matmul", &a)?;
        if a.shape()[1] != b.shape()[0] {
            return Err(shape_err("matmul", &a, &b));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let data = kernels::matmul(a.data(), b.data(), m, k, n);
        let value = Tensor::new([m, n], data)?;
        Ok(self.binary(other, Op::MatMul(self.id, other.id), value))
    }

    /// `[m,k] x [n,k]^T -> [m,n]`.
    pub fn matmul_t(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.same_graph(other)?;
        let (a, b) = (self.value(), other.value());
        Self::check_matrix(&a, "matmul_t", &b)?;
        Self::check_matrix(&b, "matmul_t", &a)?;
        if a.shape()[1] != b.shape()[1] {
            return Err(shape_err("matmul_t", &a, &b));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[0]);
        let bt = kernels::transpose(b.data(), n, k);
        let data = kernels::matmul(a.data(), &bt, m, k, n);
        let value = Tensor::new([m, n], data)?;
        Ok(self.binary(other, Op::MatMulT(self.id, other.id), value))
    }

    pub fn transpose(&self) -> Result<Var<'g>> {
        let a = self.value();
        if a.shape().len() != 2 {
            return Err(AdError::InvalidArgument {
                op: "transpose",
                msg: format!("expected a matrix, got shape {:?}", a.shape()),
            });
        }
        let (r, c) = (a.shape()[0], a.shape()[1]);
        let value = Tensor::new([c, r], kernels::transpose(a.data(), r, c))?;
        Ok(self.unary(Op::Transpose(self.id), value))
    }

    /// Concatenates along the last axis. All parts must share leading axes.
    pub fn concat(parts: &[Var<'g>]) -> Result<Var<'g>> {
        let first = parts.first().ok_or(AdError::InvalidArgument {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let lead = &values[0].shape()[..values[0].shape().len().saturating_sub(1)];
        for (p, v) in parts.iter().zip(&values) {
            first.same_graph(p)?;
            if v.shape().len() != values[0].shape().len() || &v.shape()[..lead.len()] != lead {
                return Err(shape_err("concat", &values[0], v));
            }
        }
        let rows = values[0].rows();
        let total: usize = values.iter().map(|v| v.cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for v in &values {
                data.extend_from_slice(v.row(r));
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        let value = Tensor::new(shape, data)?;
        let rg = parts.iter().any(|p| p.requires_grad());
        Ok(first
            .graph
            .push(value, Op::Concat(parts.iter().map(|p| p.id).collect()), rg))
    }

    /// Columns `start..end` of the last axis.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Var<'g>> {
        let a = self.value();
        let c = a.cols();
        if start >= end || end > c {
            return Err(AdError::InvalidArgument {
                op: "slice_cols",
                msg: format!(
                    "range {start}..{end} out of bounds for shape {:?}",
                    a.shape()
                ),
            });
        }
        let w = end - start;
        let mut data = Vec::with_capacity(a.rows() * w);
        for r in 0..a.rows() {
            data.extend_from_slice(&a.row(r)[start..end]);
        }
        let mut shape = a.shape().to_vec();
        if shape.is_empty() {
            shape.push(w);
        } else {
            *shape.last_mut().unwrap() = w;
        }
        let value = Tensor::new(shape, data)?;
        Ok(self.unary(
            Op::SliceCols {
                input: self.id,
                start,
            },
            value,
        ))
    }

    /// Selects rows of a matrix by index (repeats allowed).
    pub fn gather_rows(&self, index: &[usize]) -> Result<Var<'g>> {
        let a = self.value();
        if a.shape().len() != 2 {
            return Err(AdError::InvalidArgument {
                op: "gather_rows",
                msg: format!("expected a matrix, got shape {:?}", a.shape()),
            });
        }
        let (r, c) = (a.shape()[0], a.shape()[1]);
        if let Some(&bad) = index.iter().find(|&&i| i >= r) {
            return Err(AdError::InvalidArgument {
                op: "gather_rows",
                msg: format!("row {bad} out of range for {r} rows"),
            });
        }
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index {
            data.extend_from_slice(a.row(i));
        }
        let value = Tensor::new([index.len(), c], data)?;
        Ok(self.unary(
            Op::GatherRows {
                input: self.id,
                index: index.to_vec(),
            },
            value,
        ))
    }

    pub fn sum(&self) -> Var<'g> {
        let mut s = 0.0;
        for &x in self.value().data() {
            s += x;
        }
        self.unary(Op::Sum(self.id), Tensor::scalar(s))
    }

    pub fn mean(&self) -> Var<'g> {
        let v = self.value();
        let mut s = 0.0;
        for &x in v.data() {
            s += x;
        }
        let m = s / v.numel() as f64;
        self.unary(Op::Mean(self.id), Tensor::scalar(m))
    }

    /// Softmax over the last axis.
    pub fn softmax(&self) -> Var<'g> {
        let a = self.value();
        let value = Tensor::new(
            a.shape().to_vec(),
            kernels::softmax_rows(a.data(), a.cols()),
        )
        .expect("same shape");
        self.unary(Op::Softmax(self.id), value)
    }

    /// Layer norm over the last axis without affine parameters.
    pub fn layer_norm(&self) -> Var<'g> {
        let a = self.value();
        let (data, rstd) = kernels::layer_norm_rows(a.data(), a.cols(), LAYER_NORM_EPS);
        let value = Tensor::new(a.shape().to_vec(), data).expect("same shape");
        self.unary(
            Op::LayerNorm {
                input: self.id,
                rstd,
            },
            value,
        )
    }

    /// Layer norm followed by a learned per-feature scale and shift.
    pub fn layer_norm_affine(&self, gamma: &Var<'g>, beta: &Var<'g>) -> Result<Var<'g>> {
        self.layer_norm().mul_row(gamma)?.add_row(beta)
    }

    fn map_unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Var<'g> {
        let v = self.value().map(f);
        self.unary(op, v)
    }

    pub fn silu(&self) -> Var<'g> {
        self.map_unary(Op::Silu(self.id), |x| x * kernels::sigmoid(x))
    }

    pub fn gelu(&self) -> Var<'g> {
        self.map_unary(Op::Gelu(self.id), kernels::gelu)
    }

    pub fn sigmoid(&self) -> Var<'g> {
        self.map_unary(Op::Sigmoid(self.id), kernels::sigmoid)
    }

    pub fn exp(&self) -> Var<'g> {
        self.map_unary(Op::Exp(self.id), f64::exp)
    }

    pub fn ln(&self) -> Var<'g> {
        self.map_unary(Op::Log(self.id), f64::ln)
    }

    pub fn square(&self) -> Var<'g> {
        self.map_unary(Op::Square(self.id), |x| x * x)
    }
}
