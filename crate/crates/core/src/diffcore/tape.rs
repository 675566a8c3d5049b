use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`]. Ids grow in recording order, so
/// every node's inputs carry smaller ids than the node itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node(usize);

impl Node {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    Log,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 6] = [
        UnaryOp::Neg,
        UnaryOp::Tanh,
        UnaryOp::Sigmoid,
        UnaryOp::Relu,
        UnaryOp::Exp,
        UnaryOp::Log,
    ];

    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            UnaryOp::Neg => -x,
            UnaryOp::Tanh => x.tanh(),
            UnaryOp::Sigmoid => sigmoid(x),
            UnaryOp::Relu => x.max(T::zero()),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => x.ln(),
        }
    }

    /// Local derivative given input `x` and output `y`.
    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            UnaryOp::Neg => -T::one(),
            UnaryOp::Tanh => T::one() - y * y,
            UnaryOp::Sigmoid => y * (T::one() - y),
            UnaryOp::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            UnaryOp::Exp => y,
            UnaryOp::Log => x.recip(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

impl BinaryOp {
    fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Unary(UnaryOp, Node),
    Binary(BinaryOp, Node, Node),
    MatMul(Node, Node),
    Scale(Node, T),
    ScaleBy { scalar: Node, tensor: Node },
    Softmax(Node),
    LogSoftmax(Node),
    Sum(Node),
    Pick(Node, usize),
}

#[derive(Clone, Debug)]
struct Entry<T> {
    value: Tensor<T>,
    grad: Tensor<T>,
    op: Op<T>,
}

/// Append-only record of a computation for reverse-mode differentiation.
///
/// A tape is built fresh for each forward pass. Parameters enter as leaves,
/// every op appends one node, and [`Tape::backward`] accumulates
/// `∂root/∂node` into each node's gradient.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    entries: Vec<Entry<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Node {
        let grad = Tensor::zeros_like(&value);
        self.entries.push(Entry { value, grad, op });
        Node(self.entries.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> Node {
        self.push(value, Op::Leaf)
    }

    pub fn leaf_vector(&mut self, data: Vec<T>) -> Node {
        self.leaf(Tensor::vector(data))
    }

    pub fn value(&self, node: Node) -> &Tensor<T> {
        &self.entries[node.0].value
    }

    pub fn grad(&self, node: Node) -> &Tensor<T> {
        &self.entries[node.0].grad
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(T::zero());
        }
    }

    pub fn unary(&mut self, op: UnaryOp, x: Node) -> Result<Node> {
        let input = self.value(x);
        if op == UnaryOp::Log {
            if let Some(index) = input.data().iter().position(|&v| v <= T::zero()) {
                return Err(Error::Domain {
                    op: "log",
                    index,
                    value: input.data()[index].as_f64(),
                });
            }
        }
        let value = input.map(|v| op.apply(v));
        Ok(self.push(value, Op::Unary(op, x)))
    }

    pub fn binary(&mut self, op: BinaryOp, a: Node, b: Node) -> Result<Node> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Dimension {
                op: op.name(),
                left: va.shape().to_vec(),
                right: vb.shape().to_vec(),
            });
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
            })
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Binary(op, a, b)))
    }

    pub fn add(&mut self, a: Node, b: Node) -> Result<Node> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Node, b: Node) -> Result<Node> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Node, b: Node) -> Result<Node> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn neg(&mut self, x: Node) -> Node {
        self.unary(UnaryOp::Neg, x).expect("neg is total")
    }

    pub fn tanh(&mut self, x: Node) -> Node {
        self.unary(UnaryOp::Tanh, x).expect("tanh is total")
    }

    pub fn sigmoid(&mut self, x: Node) -> Node {
        self.unary(UnaryOp::Sigmoid, x).expect("sigmoid is total")
    }

    pub fn relu(&mut self, x: Node) -> Node {
        self.unary(UnaryOp::Relu, x).expect("relu is total")
    }

    pub fn exp(&mut self, x: Node) -> Node {
        self.unary(UnaryOp::Exp, x).expect("exp is total")
    }

    pub fn log(&mut self, x: Node) -> Result<Node> {
        self.unary(UnaryOp::Log, x)
    }

    /// Matrix product `a·b`. `a` must be a matrix; `b` may be a matrix or a
    /// vector, in which case it is treated as a column and the result is a
    /// vector.
    pub fn matmul(&mut self, a: Node, b: Node) -> Result<Node> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rank() != 2 || va.cols() != vb.rows() {
            return Err(Error::Dimension {
                op: "matmul",
                left: va.shape().to_vec(),
                right: vb.shape().to_vec(),
            });
        }
        let (m, k, n) = (va.rows(), va.cols(), vb.cols());
        let (ad, bd) = (va.data(), vb.data());
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &ad[i * k..(i + 1) * k];
            let dst = &mut out[i * n..(i + 1) * n];
            for (p, &aip) in row.iter().enumerate() {
                if aip == T::zero() {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (d, &bpj) in dst.iter_mut().zip(brow) {
                    *d += aip * bpj;
                }
            }
        }
        let shape = if vb.rank() == 1 { vec![m] } else { vec![m, n] };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// Multiplies by a constant that is not itself differentiated.
    pub fn scale(&mut self, x: Node, factor: T) -> Node {
        let value = self.value(x).map(|v| v * factor);
        self.push(value, Op::Scale(x, factor))
    }

    /// Explicit scalar-by-tensor product; `scalar` must hold one entry.
    pub fn scale_by(&mut self, scalar: Node, tensor: Node) -> Result<Node> {
        let s = self.value(scalar);
        if s.len() != 1 {
            return Err(Error::Dimension {
                op: "scale_by",
                left: s.shape().to_vec(),
                right: self.value(tensor).shape().to_vec(),
            });
        }
        let s = s.data()[0];
        let value = self.value(tensor).map(|v| v * s);
        Ok(self.push(value, Op::ScaleBy { scalar, tensor }))
    }

    fn check_logits(&self, op: &'static str, x: Node) -> Result<&Tensor<T>> {
        let v = self.value(x);
        if v.rank() != 1 || v.is_empty() {
            return Err(Error::Dimension {
                op,
                left: v.shape().to_vec(),
                right: vec![],
            });
        }
        if let Some(i) = v.first_non_finite() {
            return Err(Error::Numeric {
                context: format!("{op} input entry {i} = {}", v.data()[i]),
            });
        }
        Ok(v)
    }

    /// Softmax of a vector, computed with max subtraction.
    pub fn softmax(&mut self, x: Node) -> Result<Node> {
        let v = self.check_logits("softmax", x)?;
        let value = Tensor::vector(softmax_values(v.data()));
        Ok(self.push(value, Op::Softmax(x)))
    }

    /// `x − logsumexp(x)`; finite even where the softmax underflows.
    pub fn log_softmax(&mut self, x: Node) -> Result<Node> {
        let v = self.check_logits("log_softmax", x)?;
        let lse = log_sum_exp(v.data());
        let value = v.map(|e| e - lse);
        Ok(self.push(value, Op::LogSoftmax(x)))
    }

    pub fn sum(&mut self, x: Node) -> Node {
        let s = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Entry `index` of a vector as a scalar node.
    pub fn pick(&mut self, x: Node, index: usize) -> Result<Node> {
        let v = self.value(x);
        if index >= v.len() {
            return Err(Error::Index {
                index,
                len: v.len(),
            });
        }
        let s = v.data()[index];
        Ok(self.push(Tensor::scalar(s), Op::Pick(x, index)))
    }

    /// Sum of equally shaped nodes.
    pub fn add_n(&mut self, nodes: &[Node]) -> Result<Node> {
        let (&first, rest) = nodes
            .split_first()
            .ok_or_else(|| Error::Contract("add_n of an empty list".into()))?;
        rest.iter().try_fold(first, |acc, &n| self.add(acc, n))
    }

    /// Accumulates `∂root/∂node` into the gradient of every node reachable
    /// from `root`. Calling it twice without [`Tape::zero_grad`] doubles the
    /// stored gradients.
    pub fn backward(&mut self, root: Node) -> Result<()> {
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                rv.shape()
            )));
        }
        let mut adj: Vec<Option<Vec<T>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![T::one()]);

        for id in (0..=root.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let entry = &self.entries[id];
            match &entry.op {
                Op::Leaf => {}
                Op::Unary(op, x) => {
                    let xv = self.entries[x.0].value.data();
                    let yv = entry.value.data();
                    let d = g
                        .iter()
                        .zip(xv.iter().zip(yv))
                        .map(|(&gi, (&xi, &yi))| gi * op.derivative(xi, yi))
                        .collect();
                    accumulate(&mut adj, *x, d);
                }
                Op::Binary(op, a, b) => {
                    match op {
                        BinaryOp::Add => {
                            accumulate(&mut adj, *a, g.clone());
                            accumulate(&mut adj, *b, g.clone());
                        }
                        BinaryOp::Sub => {
                            accumulate(&mut adj, *a, g.clone());
                            accumulate(&mut adj, *b, g.iter().map(|&v| -v).collect());
                        }
                        BinaryOp::Mul => {
                            let av = self.entries[a.0].value.data();
                            let bv = self.entries[b.0].value.data();
                            let da = g.iter().zip(bv).map(|(&gi, &bi)| gi * bi).collect();
                            let db = g.iter().zip(av).map(|(&gi, &ai)| gi * ai).collect();
                            accumulate(&mut adj, *a, da);
                            accumulate(&mut adj, *b, db);
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let va = &self.entries[a.0].value;
                    let vb = &self.entries[b.0].value;
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    let (ad, bd) = (va.data(), vb.data());
                    // dA = dC·Bᵀ
                    let mut da = vec![T::zero(); m * k];
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            da[i * k + p] = gi.iter().zip(brow).map(|(&x, &y)| x * y).sum();
                        }
                    }
                    // dB = Aᵀ·dC
                    let mut db = vec![T::zero(); k * n];
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = ad[i * k + p];
                            let dst = &mut db[p * n..(p + 1) * n];
                            for (d, &gij) in dst.iter_mut().zip(gi) {
                                *d += aip * gij;
                            }
                        }
                    }
                    accumulate(&mut adj, *a, da);
                    accumulate(&mut adj, *b, db);
                }
                Op::Scale(x, c) => {
                    let c = *c;
                    accumulate(&mut adj, *x, g.iter().map(|&v| v * c).collect());
                }
                Op::ScaleBy { scalar, tensor } => {
                    let s = self.entries[scalar.0].value.data()[0];
                    let tv = self.entries[tensor.0].value.data();
                    let ds: T = g.iter().zip(tv).map(|(&gi, &ti)| gi * ti).sum();
                    accumulate(&mut adj, *scalar, vec![ds]);
                    accumulate(&mut adj, *tensor, g.iter().map(|&v| v * s).collect());
                }
                Op::Softmax(x) => {
                    let y = entry.value.data();
                    let dot: T = g.iter().zip(y).map(|(&gi, &yi)| gi * yi).sum();
                    let d = g.iter().zip(y).map(|(&gi, &yi)| yi * (gi - dot)).collect();
                    accumulate(&mut adj, *x, d);
                }
                Op::LogSoftmax(x) => {
                    let total: T = g.iter().copied().sum();
                    let d = g
                        .iter()
                        .zip(entry.value.data())
                        .map(|(&gi, &yi)| gi - yi.exp() * total)
                        .collect();
                    accumulate(&mut adj, *x, d);
                }
                Op::Sum(x) => {
                    let n = self.entries[x.0].value.len();
                    accumulate(&mut adj, *x, vec![g[0]; n]);
                }
                Op::Pick(x, index) => {
                    let mut d = vec![T::zero(); self.entries[x.0].value.len()];
                    d[*index] = g[0];
                    accumulate(&mut adj, *x, d);
                }
            }
            for (dst, &v) in self.entries[id].grad.data_mut().iter_mut().zip(&g) {
                *dst += v;
            }
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(adj: &mut [Option<Vec<T>>], node: Node, d: Vec<T>) {
    match &mut adj[node.0] {
        Some(acc) => {
            for (a, v) in acc.iter_mut().zip(d) {
                *a += v;
            }
        }
        slot @ None => *slot = Some(d),
    }
}

pub fn log_sum_exp<T: Scalar>(x: &[T]) -> T {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    max + x.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

pub fn softmax_values<T: Scalar>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let z: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / z).collect()
}
