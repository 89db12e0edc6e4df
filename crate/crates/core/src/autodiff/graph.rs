use std::cell::{Cell, RefCell};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::tensor::{gemm_acc, transpose};
use super::{AutodiffError, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which operand of a binary op is repeated over the leading dimension.
#[derive(Debug, Clone, Copy)]
enum Broadcast {
    None,
    /// right operand is a single row repeated over the rows of the left one
    Right,
    Left,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
    MaxRows { input: Var, argmax: Vec<usize> },
    ConcatCols(Vec<(Var, usize)>),
    SliceCols { input: Var, start: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A single-use reverse-mode tape.
///
/// Nodes are appended in creation order, which is already a topological order,
/// so [`Graph::backward`] is a single reverse sweep. Build a fresh graph per
/// training step.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Tensor>>>,
    branches: Cell<u64>,
}

fn bad_shape(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

/// Broadcasting is only allowed over the leading (batch) dimension: a `[1, c]`
/// or `[c]` operand against a `[r, c]` one.
fn broadcast_kind(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Broadcast, AutodiffError> {
    if a.shape() == b.shape() {
        return Ok(Broadcast::None);
    }
    let is_row_of = |row: &Tensor, full: &Tensor| -> bool {
        let fs = full.shape();
        if fs.is_empty() {
            return false;
        }
        let rs = row.shape();
        rs == &fs[1..] || (rs.len() == fs.len() && rs[0] == 1 && rs[1..] == fs[1..])
    };
    if is_row_of(b, a) {
        Ok(Broadcast::Right)
    } else if is_row_of(a, b) {
        Ok(Broadcast::Left)
    } else {
        Err(bad_shape(op, a, b))
    }
}

fn binary_forward(a: &Tensor, b: &Tensor, bc: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
    match bc {
        Broadcast::None => a.zip_map(b, f),
        Broadcast::Right => {
            let w = b.len();
            let data = a
                .data()
                .chunks(w)
                .flat_map(|row| row.iter().zip(b.data()).map(|(&x, &y)| f(x, y)))
                .collect();
            Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
        }
        Broadcast::Left => {
            let w = a.len();
            let data = b
                .data()
                .chunks(w)
                .flat_map(|row| a.data().iter().zip(row).map(|(&x, &y)| f(x, y)))
                .collect();
            Tensor::new(b.shape().to_vec(), data).expect("shape preserved")
        }
    }
}

/// Sum the rows of `g` (shape of the full operand) down to one row shaped like `like`.
fn reduce_rows(g: &Tensor, like: &Tensor) -> Tensor {
    let w = like.len();
    let mut out = vec![0.0; w];
    for row in g.data().chunks(w) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Tensor::new(like.shape().to_vec(), out).expect("shape preserved")
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite {
                op: op_name(&op),
            });
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(nodes.len() - 1))
    }

    fn needs_grad(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    fn record_branch(&self, h: impl Hash) {
        let mut s = DefaultHasher::new();
        self.branches.get().hash(&mut s);
        h.hash(&mut s);
        self.branches.set(s.finish());
    }

    /// Hash of every discrete choice made so far (ReLU signs, max-pool argmaxes).
    ///
    /// Two evaluations with equal signatures lie in the same smooth piece of
    /// the function, which finite-difference checks use to avoid kinks.
    pub fn branch_signature(&self) -> u64 {
        self.branches.get()
    }

    /// A trainable leaf; gradients are accumulated for it.
    pub fn param(&self, value: Tensor) -> Result<Var, AutodiffError> {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf; no gradient flows into it.
    pub fn constant(&self, value: Tensor) -> Result<Var, AutodiffError> {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn item(&self, v: Var) -> f64 {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let value = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let ((n, k), (k2, m)) = match (ta.dims2(), tb.dims2()) {
                (Some(x), Some(y)) if x.1 == y.0 => (x, y),
                _ => return Err(bad_shape("matmul", ta, tb)),
            };
            debug_assert_eq!(k, k2);
            let mut out = vec![0.0; n * m];
            gemm_acc(ta.data(), tb.data(), &mut out, n, k, m);
            Tensor::matrix(n, m, out)?
        };
        let rg = self.needs_grad(&[a, b]);
        self.push(value, Op::MatMul(a, b), rg)
    }

    fn binary(
        &self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl FnOnce(Broadcast) -> Op,
    ) -> Result<Var, AutodiffError> {
        let (value, bc) = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let bc = broadcast_kind(name, ta, tb)?;
            (binary_forward(ta, tb, bc, f), bc)
        };
        let rg = self.needs_grad(&[a, b]);
        self.push(value, op(bc), rg)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary("add", a, b, |x, y| x + y, |bc| Op::Add(a, b, bc))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary("sub", a, b, |x, y| x - y, |bc| Op::Sub(a, b, bc))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary("mul", a, b, |x, y| x * y, |bc| Op::Mul(a, b, bc))
    }

    pub fn scale(&self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        let value = self.nodes.borrow()[a.0].value.map(|x| x * c);
        let rg = self.needs_grad(&[a]);
        self.push(value, Op::Scale(a, c), rg)
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var, AutodiffError> {
        let value = self.nodes.borrow()[a.0].value.map(f);
        let rg = self.needs_grad(&[a]);
        self.push(value, op, rg)
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&self, a: Var) -> Result<Var, AutodiffError> {
        {
            let nodes = self.nodes.borrow();
            let bits: Vec<bool> = nodes[a.0].value.data().iter().map(|&x| x > 0.0).collect();
            self.record_branch(bits);
        }
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn exp(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn log(&self, a: Var) -> Result<Var, AutodiffError> {
        self.unary(a, f64::ln, Op::Log(a))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&self, a: Var) -> Result<Var, AutodiffError> {
        let s = self.nodes.borrow()[a.0].value.data().iter().sum();
        let rg = self.needs_grad(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&self, a: Var) -> Result<Var, AutodiffError> {
        let m = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            if t.is_empty() {
                return Err(AutodiffError::Empty { op: "mean" });
            }
            t.data().iter().sum::<f64>() / t.len() as f64
        };
        let rg = self.needs_grad(&[a]);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    /// Column-wise maximum over the rows of a `[r, c]` tensor, giving `[1, c]`.
    ///
    /// The subgradient goes to the argmax row; ties go to the lowest row index.
    pub fn max_rows(&self, a: Var) -> Result<Var, AutodiffError> {
        let (value, argmax) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            let (r, c) = match t.dims2() {
                Some((r, c)) if r > 0 => (r, c),
                _ => return Err(AutodiffError::Empty { op: "max_rows" }),
            };
            let d = t.data();
            let mut best = d[..c].to_vec();
            let mut arg = vec![0usize; c];
            for i in 1..r {
                for j in 0..c {
                    let v = d[i * c + j];
                    if v > best[j] {
                        best[j] = v;
                        arg[j] = i;
                    }
                }
            }
            (Tensor::row(best), arg)
        };
        self.record_branch(&argmax);
        let rg = self.needs_grad(&[a]);
        self.push(value, Op::MaxRows { input: a, argmax }, rg)
    }

    /// Concatenate rank-2 tensors with equal row counts along the columns.
    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let (value, widths) = {
            let nodes = self.nodes.borrow();
            let first = &nodes[parts.first().ok_or(AutodiffError::Empty { op: "concat" })?.0].value;
            let rows = first.dims2().ok_or_else(|| bad_shape("concat", first, first))?.0;
            let mut widths = Vec::with_capacity(parts.len());
            for p in parts {
                let t = &nodes[p.0].value;
                match t.dims2() {
                    Some((r, c)) if r == rows => widths.push(c),
                    _ => return Err(bad_shape("concat", first, t)),
                }
            }
            let total: usize = widths.iter().sum();
            let mut out = Vec::with_capacity(rows * total);
            for i in 0..rows {
                for (p, &w) in parts.iter().zip(&widths) {
                    out.extend_from_slice(&nodes[p.0].value.data()[i * w..(i + 1) * w]);
                }
            }
            (Tensor::matrix(rows, total, out)?, widths)
        };
        let rg = self.needs_grad(parts);
        let op = Op::ConcatCols(parts.iter().copied().zip(widths).collect());
        self.push(value, op, rg)
    }

    /// Columns `start..end` of a rank-2 tensor.
    pub fn slice_cols(&self, a: Var, start: usize, end: usize) -> Result<Var, AutodiffError> {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            let (r, c) = match t.dims2() {
                Some((r, c)) if start < end && end <= c => (r, c),
                _ => {
                    return Err(AutodiffError::Slice {
                        shape: t.shape().to_vec(),
                        start,
                        end,
                    })
                }
            };
            let w = end - start;
            let mut out = Vec::with_capacity(r * w);
            for i in 0..r {
                out.extend_from_slice(&t.data()[i * c + start..i * c + end]);
            }
            Tensor::matrix(r, w, out)?
        };
        let rg = self.needs_grad(&[a]);
        self.push(value, Op::SliceCols { input: a, start }, rg)
    }

    /// Reverse sweep from a scalar `loss`. Gradients accumulate, so shared
    /// subexpressions receive the sum of all paths.
    pub fn backward(&self, loss: Var) -> Result<(), AutodiffError> {
        let nodes = self.nodes.borrow();
        let lv = &nodes[loss.0].value;
        if !lv.is_scalar() {
            return Err(AutodiffError::NonScalarLoss {
                shape: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        let accumulate = |grads: &mut Vec<Option<Tensor>>, v: Var, g: Tensor| {
            if !nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        };

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].clone() else {
                continue;
            };
            let val = |v: Var| &nodes[v.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (val(*a), val(*b));
                    let (n, k) = ta.dims2().expect("checked in forward");
                    let m = tb.dims2().expect("checked in forward").1;
                    if nodes[a.0].requires_grad {
                        let bt = transpose(tb.data(), k, m);
                        let mut da = vec![0.0; n * k];
                        gemm_acc(g.data(), &bt, &mut da, n, m, k);
                        accumulate(&mut grads, *a, Tensor::matrix(n, k, da)?);
                    }
                    if nodes[b.0].requires_grad {
                        let at = transpose(ta.data(), n, k);
                        let mut db = vec![0.0; k * m];
                        gemm_acc(&at, g.data(), &mut db, k, n, m);
                        accumulate(&mut grads, *b, Tensor::matrix(k, m, db)?);
                    }
                }
                Op::Add(a, b, bc) | Op::Sub(a, b, bc) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    let gb = g.map(|x| sign * x);
                    match bc {
                        Broadcast::None => {
                            accumulate(&mut grads, *a, g);
                            accumulate(&mut grads, *b, gb);
                        }
                        Broadcast::Right => {
                            accumulate(&mut grads, *b, reduce_rows(&gb, val(*b)));
                            accumulate(&mut grads, *a, g);
                        }
                        Broadcast::Left => {
                            accumulate(&mut grads, *a, reduce_rows(&g, val(*a)));
                            accumulate(&mut grads, *b, gb);
                        }
                    }
                }
                Op::Mul(a, b, bc) => {
                    let (ta, tb) = (val(*a), val(*b));
                    let (ga, gb) = match bc {
                        Broadcast::None => (g.zip_map(tb, |x, y| x * y), g.zip_map(ta, |x, y| x * y)),
                        Broadcast::Right => (
                            binary_forward(&g, tb, Broadcast::Right, |x, y| x * y),
                            reduce_rows(&g.zip_map(ta, |x, y| x * y), tb),
                        ),
                        Broadcast::Left => (
                            reduce_rows(&g.zip_map(tb, |x, y| x * y), ta),
                            binary_forward(ta, &g, Broadcast::Left, |x, y| x * y),
                        ),
                    };
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.map(|x| x * c)),
                Op::Sigmoid(a) => {
                    let d = g.zip_map(&node.value, |gi, s| gi * s * (1.0 - s));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = g.zip_map(&node.value, |gi, t| gi * (1.0 - t * t));
                    accumulate(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let d = g.zip_map(val(*a), |gi, x| if x > 0.0 { gi } else { 0.0 });
                    accumulate(&mut grads, *a, d);
                }
                Op::Exp(a) => accumulate(&mut grads, *a, g.zip_map(&node.value, |gi, e| gi * e)),
                Op::Log(a) => accumulate(&mut grads, *a, g.zip_map(val(*a), |gi, x| gi / x)),
                Op::Sum(a) => {
                    let ta = val(*a);
                    accumulate(&mut grads, *a, Tensor::full(ta.shape(), g.item()));
                }
                Op::Mean(a) => {
                    let ta = val(*a);
                    let s = g.item() / ta.len() as f64;
                    accumulate(&mut grads, *a, Tensor::full(ta.shape(), s));
                }
                Op::MaxRows { input, argmax } => {
                    let ta = val(*input);
                    let c = argmax.len();
                    let mut d = Tensor::zeros(ta.shape());
                    let dd = d.data_mut();
                    for (j, &i) in argmax.iter().enumerate() {
                        dd[i * c + j] += g.data()[j];
                    }
                    accumulate(&mut grads, *input, d);
                }
                Op::ConcatCols(parts) => {
                    let (rows, total) = node.value.dims2().expect("rank 2");
                    let mut offset = 0;
                    for &(p, w) in parts {
                        if nodes[p.0].requires_grad {
                            let mut out = Vec::with_capacity(rows * w);
                            for i in 0..rows {
                                out.extend_from_slice(&g.data()[i * total + offset..i * total + offset + w]);
                            }
                            accumulate(&mut grads, p, Tensor::matrix(rows, w, out)?);
                        }
                        offset += w;
                    }
                }
                Op::SliceCols { input, start } => {
                    let ta = val(*input);
                    let (r, c) = ta.dims2().expect("rank 2");
                    let w = node.value.dims2().expect("rank 2").1;
                    let mut d = Tensor::zeros(ta.shape());
                    let dd = d.data_mut();
                    for i in 0..r {
                        for j in 0..w {
                            dd[i * c + start + j] += g.data()[i * w + j];
                        }
                    }
                    accumulate(&mut grads, *input, d);
                }
            }
        }
        drop(nodes);
        *self.grads.borrow_mut() = grads;
        Ok(())
    }

    /// Gradient of the last [`Graph::backward`] loss with respect to `v`.
    ///
    /// Nodes the loss does not depend on get a zero tensor of matching shape.
    pub fn grad(&self, v: Var) -> Tensor {
        let grads = self.grads.borrow();
        match grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.nodes.borrow()[v.0].value.shape()),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::Sigmoid(_) => "sigmoid",
        Op::Tanh(_) => "tanh",
        Op::Relu(_) => "relu",
        Op::Exp(_) => "exp",
        Op::Log(_) => "log",
        Op::Sum(_) => "sum",
        Op::Mean(_) => "mean",
        Op::MaxRows { .. } => "max_rows",
        Op::ConcatCols(_) => "concat",
        Op::SliceCols { .. } => "slice",
    }
}
