use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use super::tensor::{matmul_raw, Tensor};
use super::AutodiffError;

type Result<T> = std::result::Result<T, AutodiffError>;

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale(f64),
    Matmul,
    Transpose,
    AddBias,
    SumRows,
    BroadcastRows,
    SumCols,
    BroadcastCols,
    Expand,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Abs,
    Log,
    Clamp(f64, f64),
    Sum,
    Mean,
    L2NormRows,
    Concat(Vec<usize>),
    SliceCols(usize),
    PadCols(usize),
    Reshape,
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Scale(_) => "scale",
            Op::Matmul => "matmul",
            Op::Transpose => "transpose",
            Op::AddBias => "add_bias",
            Op::SumRows => "sum_rows",
            Op::BroadcastRows => "broadcast_rows",
            Op::SumCols => "sum_cols",
            Op::BroadcastCols => "broadcast_cols",
            Op::Expand => "expand",
            Op::Relu => "relu",
            Op::LeakyRelu(_) => "leaky_relu",
            Op::Tanh => "tanh",
            Op::Sigmoid => "sigmoid",
            Op::Abs => "abs",
            Op::Log => "log",
            Op::Clamp(..) => "clamp",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::L2NormRows => "l2_norm_rows",
            Op::Concat(_) => "concat",
            Op::SliceCols(_) => "slice_cols",
            Op::PadCols(_) => "pad_cols",
            Op::Reshape => "reshape",
        }
    }
}

pub(crate) struct Node {
    pub(crate) op: Op,
    pub(crate) parents: Vec<usize>,
    pub(crate) value: Rc<Tensor>,
}

pub(crate) struct TapeInner {
    pub(crate) nodes: Vec<Node>,
    pub(crate) recording: bool,
}

/// Append-only record of every operation evaluated on its [`Value`]s.
///
/// Nodes only ever reference earlier nodes, so the graph is acyclic by
/// construction. A tape is single-threaded; use one per training thread.
#[derive(Clone)]
pub struct Tape {
    pub(crate) inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                recording: true,
            })),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers a tensor as a leaf (parameter, input or constant).
    pub fn leaf(&self, tensor: Tensor) -> Value {
        self.push(Op::Leaf, Vec::new(), tensor)
    }

    pub fn scalar(&self, v: f64) -> Value {
        self.leaf(Tensor::scalar(v))
    }

    pub(crate) fn same(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub(crate) fn set_recording(&self, on: bool) -> bool {
        let mut inner = self.inner.borrow_mut();
        std::mem::replace(&mut inner.recording, on)
    }

    pub(crate) fn value_of(&self, id: usize) -> Value {
        let value = self.inner.borrow().nodes[id].value.clone();
        Value {
            tape: self.clone(),
            id,
            value,
        }
    }

    fn push(&self, op: Op, parents: Vec<usize>, tensor: Tensor) -> Value {
        let value = Rc::new(tensor);
        let mut inner = self.inner.borrow_mut();
        let (op, parents) = if inner.recording {
            (op, parents)
        } else {
            (Op::Leaf, Vec::new())
        };
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op,
            parents,
            value: value.clone(),
        });
        Value {
            tape: self.clone(),
            id,
            value,
        }
    }
}

/// A tensor produced on a [`Tape`], together with the node that produced it.
#[derive(Clone)]
pub struct Value {
    pub(crate) tape: Tape,
    pub(crate) id: usize,
    value: Rc<Tensor>,
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Value")
            .field("id", &self.id)
            .field("shape", &self.value.shape())
            .finish()
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

impl Value {
    pub fn tensor(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn data(&self) -> &[f64] {
        self.value.data()
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// The single entry of a one-element value.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(AutodiffError::NotScalar {
                shape: self.shape().to_vec(),
            });
        }
        Ok(self.data()[0])
    }

    /// A leaf copy of this value with no recorded history.
    pub fn detach(&self) -> Value {
        self.tape.leaf((*self.value).clone())
    }

    fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        self.value.dims2().ok_or_else(|| AutodiffError::NotMatrix {
            op,
            shape: self.shape().to_vec(),
        })
    }

    fn check_tape(&self, other: &Value) -> Result<()> {
        if self.tape.same(&other.tape) {
            Ok(())
        } else {
            Err(AutodiffError::ForeignTape)
        }
    }

    fn emit(&self, op: Op, parents: Vec<usize>, tensor: Tensor) -> Result<Value> {
        if !tensor.is_finite() {
            return Err(AutodiffError::NonFinite { op: op.name() });
        }
        Ok(self.tape.push(op, parents, tensor))
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Result<Value> {
        let out = self.value.map(f);
        self.emit(op, vec![self.id], out)
    }

    fn binary(&self, other: &Value, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Value> {
        self.check_tape(other)?;
        let (a, b) = (&*self.value, &*other.value);
        let out = if a.shape() == b.shape() {
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(&x, &y)| f(x, y))
                .collect();
            Tensor::new(a.shape().to_vec(), data)?
        } else if a.is_scalar() {
            let x = a.data()[0];
            b.map(|y| f(x, y))
        } else if b.is_scalar() {
            let y = b.data()[0];
            a.map(|x| f(x, y))
        } else {
            return Err(mismatch(op.name(), a.shape(), b.shape()));
        };
        self.emit(op, vec![self.id, other.id], out)
    }

    pub fn add(&self, other: &Value) -> Result<Value> {
        self.binary(other, Op::Add, |x, y| x + y)
    }

    pub fn sub(&self, other: &Value) -> Result<Value> {
        self.binary(other, Op::Sub, |x, y| x - y)
    }

    pub fn mul(&self, other: &Value) -> Result<Value> {
        self.binary(other, Op::Mul, |x, y| x * y)
    }

    pub fn div(&self, other: &Value) -> Result<Value> {
        self.binary(other, Op::Div, |x, y| x / y)
    }

    pub fn neg(&self) -> Result<Value> {
        self.unary(Op::Neg, |x| -x)
    }

    /// Multiplies by a constant.
    pub fn scale(&self, c: f64) -> Result<Value> {
        self.unary(Op::Scale(c), |x| c * x)
    }

    /// Adds a constant.
    pub fn add_scalar(&self, c: f64) -> Result<Value> {
        let c = self.tape.scalar(c);
        self.add(&c)
    }

    pub fn matmul(&self, other: &Value) -> Result<Value> {
        self.check_tape(other)?;
        let (n, k) = self.dims2("matmul")?;
        let (k2, m) = other.dims2("matmul")?;
        if k != k2 {
            return Err(mismatch("matmul", self.shape(), other.shape()));
        }
        let data = matmul_raw(self.data(), other.data(), n, k, m);
        self.emit(
            Op::Matmul,
            vec![self.id, other.id],
            Tensor::new(vec![n, m], data)?,
        )
    }

    pub fn transpose(&self) -> Result<Value> {
        let t = self.value.transpose()?;
        self.emit(Op::Transpose, vec![self.id], t)
    }

    /// Adds a `[1, m]` (or `[m]`) bias to every row of an `[n, m]` matrix.
    pub fn add_bias(&self, bias: &Value) -> Result<Value> {
        self.check_tape(bias)?;
        let (n, m) = self.dims2("add_bias")?;
        if bias.numel() != m {
            return Err(mismatch("add_bias", self.shape(), bias.shape()));
        }
        let b = bias.data();
        let mut data = self.data().to_vec();
        for row in data.chunks_mut(m) {
            for (x, &bj) in row.iter_mut().zip(b) {
                *x += bj;
            }
        }
        self.emit(
            Op::AddBias,
            vec![self.id, bias.id],
            Tensor::new(vec![n, m], data)?,
        )
    }

    /// Column sums: `[n, m] -> [1, m]`.
    pub fn sum_rows(&self) -> Result<Value> {
        let (_, m) = self.dims2("sum_rows")?;
        let mut out = vec![0.0; m];
        for row in self.data().chunks(m.max(1)) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        self.emit(Op::SumRows, vec![self.id], Tensor::new(vec![1, m], out)?)
    }

    /// Repeats a `[1, m]` row `n` times.
    pub fn broadcast_rows(&self, n: usize) -> Result<Value> {
        let (r, m) = self.dims2("broadcast_rows")?;
        if r != 1 {
            return Err(mismatch("broadcast_rows", self.shape(), &[1, m]));
        }
        let data = self.data().repeat(n);
        self.emit(
            Op::BroadcastRows,
            vec![self.id],
            Tensor::new(vec![n, m], data)?,
        )
    }

    /// Row sums: `[n, m] -> [n, 1]`.
    pub fn sum_cols(&self) -> Result<Value> {
        let (n, m) = self.dims2("sum_cols")?;
        let out = if m == 0 {
            vec![0.0; n]
        } else {
            self.data().chunks(m).map(|r| r.iter().sum()).collect()
        };
        self.emit(Op::SumCols, vec![self.id], Tensor::new(vec![n, 1], out)?)
    }

    /// Repeats a `[n, 1]` column `m` times.
    pub fn broadcast_cols(&self, m: usize) -> Result<Value> {
        let (n, c) = self.dims2("broadcast_cols")?;
        if c != 1 {
            return Err(mismatch("broadcast_cols", self.shape(), &[n, 1]));
        }
        let data = self
            .data()
            .iter()
            .flat_map(|&x| std::iter::repeat_n(x, m))
            .collect();
        self.emit(
            Op::BroadcastCols,
            vec![self.id],
            Tensor::new(vec![n, m], data)?,
        )
    }

    /// Broadcasts a one-element value to `shape`.
    pub fn expand(&self, shape: &[usize]) -> Result<Value> {
        let x = self.item()?;
        self.emit(Op::Expand, vec![self.id], Tensor::full(shape, x))
    }

    pub fn relu(&self) -> Result<Value> {
        self.unary(Op::Relu, |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn leaky_relu(&self, slope: f64) -> Result<Value> {
        self.unary(
            Op::LeakyRelu(slope),
            |x| if x > 0.0 { x } else { slope * x },
        )
    }

    pub fn tanh(&self) -> Result<Value> {
        self.unary(Op::Tanh, f64::tanh)
    }

    pub fn sigmoid(&self) -> Result<Value> {
        self.unary(Op::Sigmoid, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        })
    }

    pub fn abs(&self) -> Result<Value> {
        self.unary(Op::Abs, f64::abs)
    }

    pub fn ln(&self) -> Result<Value> {
        self.unary(Op::Log, f64::ln)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Value> {
        self.unary(Op::Clamp(lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn sum(&self) -> Result<Value> {
        let s = self.data().iter().sum();
        self.emit(Op::Sum, vec![self.id], Tensor::scalar(s))
    }

    pub fn mean(&self) -> Result<Value> {
        if self.numel() == 0 {
            return Err(AutodiffError::Empty { op: "mean" });
        }
        let s: f64 = self.data().iter().sum();
        self.emit(
            Op::Mean,
            vec![self.id],
            Tensor::scalar(s / self.numel() as f64),
        )
    }

    /// Euclidean norm of every row: `[n, m] -> [n, 1]`.
    pub fn l2_norm_rows(&self) -> Result<Value> {
        let (n, m) = self.dims2("l2_norm_rows")?;
        let out = (0..n)
            .map(|i| {
                self.data()[i * m..(i + 1) * m]
                    .iter()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        self.emit(Op::L2NormRows, vec![self.id], Tensor::new(vec![n, 1], out)?)
    }

    /// Concatenates matrices with equal row counts along the column axis.
    pub fn concat(parts: &[&Value]) -> Result<Value> {
        let first = parts.first().ok_or(AutodiffError::Empty { op: "concat" })?;
        let (n, _) = first.dims2("concat")?;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            first.check_tape(p)?;
            let (r, c) = p.dims2("concat")?;
            if r != n {
                return Err(mismatch("concat", first.shape(), p.shape()));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&p.data()[i * w..(i + 1) * w]);
            }
        }
        let ids = parts.iter().map(|p| p.id).collect();
        first.emit(Op::Concat(widths), ids, Tensor::new(vec![n, total], data)?)
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Value> {
        let (n, m) = self.dims2("slice_cols")?;
        if start > end || end > m {
            return Err(AutodiffError::SliceOutOfRange { start, end, len: m });
        }
        let w = end - start;
        let mut data = Vec::with_capacity(n * w);
        for row in self.data().chunks(m.max(1)).take(n) {
            data.extend_from_slice(&row[start..end]);
        }
        self.emit(
            Op::SliceCols(start),
            vec![self.id],
            Tensor::new(vec![n, w], data)?,
        )
    }

    /// Zero-pads columns so this matrix occupies `start..start+w` of `total`.
    pub fn pad_cols(&self, start: usize, total: usize) -> Result<Value> {
        let (n, w) = self.dims2("pad_cols")?;
        if start + w > total {
            return Err(AutodiffError::SliceOutOfRange {
                start,
                end: start + w,
                len: total,
            });
        }
        let mut data = vec![0.0; n * total];
        for i in 0..n {
            data[i * total + start..i * total + start + w]
                .copy_from_slice(&self.data()[i * w..(i + 1) * w]);
        }
        self.emit(
            Op::PadCols(start),
            vec![self.id],
            Tensor::new(vec![n, total], data)?,
        )
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Value> {
        let t = Tensor::new(shape.to_vec(), self.data().to_vec())?;
        self.emit(Op::Reshape, vec![self.id], t)
    }
}
