//! Reverse-mode automatic differentiation over dense vectors.
//!
//! A [`Tape`] records one forward evaluation. Nodes are appended in creation
//! order, so parents always precede their consumers and a single reverse
//! sweep visits every node after all of its uses.

mod check;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use check::{grad_check, grad_check_sampled, relative_error};

use crate::error::{Error, Result};
use crate::scalar::{relu, sigmoid, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Input,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    AddScalar(NodeId),
    MatVec { m: NodeId, x: NodeId, rows: usize },
    Affine { w: NodeId, x: NodeId, b: NodeId, rows: usize },
    Concat(Vec<NodeId>),
    Slice { a: NodeId, start: usize },
    Sum(NodeId),
    Mean(NodeId),
    Square(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Abs(NodeId),
    Dropout { a: NodeId, mask: Vec<T> },
    Lstm { x: NodeId, hc: NodeId, w: NodeId, b: NodeId, gates: Vec<T>, tanh_c: Vec<T> },
}

impl<T> Op<T> {
    fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Input => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Slice { a, .. }
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Square(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Abs(a)
            | Op::Dropout { a, .. } => vec![*a],
            Op::MatVec { m, x, .. } => vec![*m, *x],
            Op::Affine { w, x, b, .. } => vec![*w, *x, *b],
            Op::Concat(v) => v.clone(),
            Op::Lstm { x, hc, w, b, .. } => vec![*x, *hc, *w, *b],
        }
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Gradients of a scalar root, indexed by node. Only nodes that the root
/// depends on and that lead back to a variable carry a gradient.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&[T]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `id`, or zeros of length `len` when the root does not reach it.
    pub fn get_or_zeros(&self, id: NodeId, len: usize) -> Vec<T> {
        self.get(id).map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); len])
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

fn mismatch(op: &'static str, a: usize, b: usize) -> Error {
    Error::ShapeMismatch { op, detail: format!("lengths {a} and {b}") }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<T>, op: Op<T>) -> NodeId {
        let needs_grad = op.parents().iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf whose gradient is wanted.
    pub fn var(&mut self, value: Vec<T>) -> NodeId {
        self.nodes.push(Node { value, op: Op::Input, needs_grad: true });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, value: Vec<T>) -> NodeId {
        self.nodes.push(Node { value, op: Op::Input, needs_grad: false });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        &self.nodes[id.0].value
    }

    /// The single value of a scalar node.
    pub fn scalar(&self, id: NodeId) -> T {
        self.nodes[id.0].value[0]
    }

    fn same_len(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la == lb {
            Ok(())
        } else {
            Err(mismatch(op, la, lb))
        }
    }

    fn zip(&self, a: NodeId, b: NodeId, f: impl Fn(T, T) -> T) -> Vec<T> {
        self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect()
    }

    fn map(&self, a: NodeId, f: impl Fn(T) -> T) -> Vec<T> {
        self.value(a).iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len("add", a, b)?;
        let v = self.zip(a, b, |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len("sub", a, b)?;
        let v = self.zip(a, b, |x, y| x - y);
        Ok(self.push(v, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len("mul", a, b)?;
        let v = self.zip(a, b, |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, k: T) -> NodeId {
        let v = self.map(a, |x| x * k);
        self.push(v, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: NodeId, k: T) -> NodeId {
        let v = self.map(a, |x| x + k);
        self.push(v, Op::AddScalar(a))
    }

    /// `m · x` with `m` stored row-major as `rows × len(x)`.
    pub fn matvec(&mut self, m: NodeId, x: NodeId, rows: usize) -> Result<NodeId> {
        let cols = self.value(x).len();
        if self.value(m).len() != rows * cols {
            return Err(mismatch("matvec", self.value(m).len(), rows * cols));
        }
        let v = matvec_values(self.value(m), self.value(x), rows);
        Ok(self.push(v, Op::MatVec { m, x, rows }))
    }

    /// `w · x + b`.
    pub fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> Result<NodeId> {
        let rows = self.value(b).len();
        let cols = self.value(x).len();
        if self.value(w).len() != rows * cols {
            return Err(mismatch("affine", self.value(w).len(), rows * cols));
        }
        let mut v = matvec_values(self.value(w), self.value(x), rows);
        for (o, &bi) in v.iter_mut().zip(self.value(b)) {
            *o += bi;
        }
        Ok(self.push(v, Op::Affine { w, x, b, rows }))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let v: Vec<T> = parts.iter().flat_map(|p| self.value(*p).iter().copied()).collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let n = self.value(a).len();
        if start + len > n {
            return Err(Error::ShapeMismatch { op: "slice", detail: format!("{start}+{len} exceeds {n}") });
        }
        let v = self.value(a)[start..start + len].to_vec();
        Ok(self.push(v, Op::Slice { a, start }))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).iter().copied().sum();
        self.push(vec![s], Op::Sum(a))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = T::lit(self.value(a).len().max(1) as f64);
        let s: T = self.value(a).iter().copied().sum();
        self.push(vec![s / n], Op::Mean(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, |x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, T::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, relu);
        self.push(v, Op::Relu(a))
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, T::abs);
        self.push(v, Op::Abs(a))
    }

    /// Inverted dropout: during training each entry is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`. Outside
    /// training this is the identity and returns `a` itself.
    pub fn dropout(&mut self, a: NodeId, p: f64, train: bool, seed: u64) -> NodeId {
        if !train || p <= 0.0 {
            return a;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = T::lit(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.value(a).len()).map(|_| if rng.random::<f64>() < p { T::zero() } else { keep }).collect();
        let v = self.value(a).iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        self.push(v, Op::Dropout { a, mask })
    }

    /// One LSTM cell step with gate order input, forget, candidate, output.
    ///
    /// `hc` holds `[h_prev; c_prev]`, `w` is `4H × (len(x) + H)` row-major over
    /// `[x; h_prev]`, and the result is `[h; c]`.
    pub fn lstm_cell(&mut self, x: NodeId, hc: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let h = self.value(hc).len() / 2;
        let nx = self.value(x).len();
        if self.value(hc).len() != 2 * h || self.value(b).len() != 4 * h {
            return Err(mismatch("lstm_cell", self.value(b).len(), 4 * h));
        }
        if self.value(w).len() != 4 * h * (nx + h) {
            return Err(mismatch("lstm_cell", self.value(w).len(), 4 * h * (nx + h)));
        }
        let mut input = Vec::with_capacity(nx + h);
        input.extend_from_slice(self.value(x));
        input.extend_from_slice(&self.value(hc)[..h]);
        let mut z = matvec_values(self.value(w), &input, 4 * h);
        for (zi, &bi) in z.iter_mut().zip(self.value(b)) {
            *zi += bi;
        }
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = if (2 * h..3 * h).contains(&k) { zk.tanh() } else { sigmoid(*zk) };
        }
        let c_prev = &self.value(hc)[h..];
        let mut out = vec![T::zero(); 2 * h];
        let mut tanh_c = vec![T::zero(); h];
        for j in 0..h {
            let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            let c = f * c_prev[j] + i * g;
            tanh_c[j] = c.tanh();
            out[j] = o * tanh_c[j];
            out[h + j] = c;
        }
        Ok(self.push(out, Op::Lstm { x, hc, w, b, gates: z, tanh_c }))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<T>> {
        let n_root = self.value(root).len();
        if n_root != 1 {
            return Err(Error::NonScalarRoot(n_root));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            for p in node.op.parents() {
                if p.0 >= i {
                    return Err(Error::CycleDetected(i));
                }
            }
            if node.needs_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let mut acc = |id: NodeId, f: &mut dyn FnMut(&mut [T])| {
            if !self.nodes[id.0].needs_grad {
                return;
            }
            let len = self.nodes[id.0].value.len();
            let buf = grads[id.0].get_or_insert_with(|| vec![T::zero(); len]);
            f(buf);
        };
        match &node.op {
            Op::Input => {}
            Op::Add(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| add_into(d, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| d.iter_mut().zip(g).for_each(|(d, &g)| *d -= g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                acc(*a, &mut |d| (0..d.len()).for_each(|k| d[k] += g[k] * vb[k]));
                acc(*b, &mut |d| (0..d.len()).for_each(|k| d[k] += g[k] * va[k]));
            }
            Op::Scale(a, k) => acc(*a, &mut |d| d.iter_mut().zip(g).for_each(|(d, &g)| *d += g * *k)),
            Op::AddScalar(a) => acc(*a, &mut |d| add_into(d, g)),
            Op::MatVec { m, x, rows } => {
                let (vm, vx) = (self.value(*m), self.value(*x));
                acc(*m, &mut |d| outer_into(d, g, vx));
                acc(*x, &mut |d| matvec_t_into(d, vm, g, *rows));
            }
            Op::Affine { w, x, b, rows } => {
                let (vw, vx) = (self.value(*w), self.value(*x));
                acc(*w, &mut |d| outer_into(d, g, vx));
                acc(*x, &mut |d| matvec_t_into(d, vw, g, *rows));
                acc(*b, &mut |d| add_into(d, g));
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    acc(*p, &mut |d| add_into(d, &g[off..off + len]));
                    off += len;
                }
            }
            Op::Slice { a, start } => acc(*a, &mut |d| add_into(&mut d[*start..*start + g.len()], g)),
            Op::Sum(a) => acc(*a, &mut |d| d.iter_mut().for_each(|d| *d += g[0])),
            Op::Mean(a) => {
                let k = g[0] / T::lit(self.value(*a).len().max(1) as f64);
                acc(*a, &mut |d| d.iter_mut().for_each(|d| *d += k));
            }
            Op::Square(a) => {
                let va = self.value(*a);
                acc(*a, &mut |d| (0..d.len()).for_each(|k| d[k] += g[k] * T::lit(2.0) * va[k]));
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                acc(*a, &mut |d| (0..d.len()).for_each(|k| d[k] += g[k] * y[k] * (T::one() - y[k])));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                acc(*a, &mut |d| (0..d.len()).for_each(|k| d[k] += g[k] * (T::one() - y[k] * y[k])));
            }
            Op::Relu(a) => {
                let va = self.value(*a);
                acc(*a, &mut |d| {
                    (0..d.len()).for_each(|k| {
                        if va[k] > T::zero() {
                            d[k] += g[k]
                        }
                    })
                });
            }
            Op::Abs(a) => {
                let va = self.value(*a);
                acc(*a, &mut |d| {
                    (0..d.len()).for_each(|k| {
                        if va[k] > T::zero() {
                            d[k] += g[k]
                        } else if va[k] < T::zero() {
                            d[k] -= g[k]
                        }
                    })
                });
            }
            Op::Dropout { a, mask } => acc(*a, &mut |d| (0..d.len()).for_each(|k| d[k] += g[k] * mask[k])),
            Op::Lstm { x, hc, w, b, gates, tanh_c } => {
                let h = tanh_c.len();
                let vx = self.value(*x);
                let vhc = self.value(*hc);
                let vw = self.value(*w);
                let c_prev = &vhc[h..];
                let (dh, dc_out) = g.split_at(h);
                let mut dz = vec![T::zero(); 4 * h];
                let mut dc_prev = vec![T::zero(); h];
                for j in 0..h {
                    let (i, f, gg, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                    let tc = tanh_c[j];
                    let dc = dc_out[j] + dh[j] * o * (T::one() - tc * tc);
                    dz[j] = dc * gg * i * (T::one() - i);
                    dz[h + j] = dc * c_prev[j] * f * (T::one() - f);
                    dz[2 * h + j] = dc * i * (T::one() - gg * gg);
                    dz[3 * h + j] = dh[j] * tc * o * (T::one() - o);
                    dc_prev[j] = dc * f;
                }
                let nx = vx.len();
                let mut input = Vec::with_capacity(nx + h);
                input.extend_from_slice(vx);
                input.extend_from_slice(&vhc[..h]);
                acc(*w, &mut |d| outer_into(d, &dz, &input));
                acc(*b, &mut |d| add_into(d, &dz));
                let needs_x = self.nodes[x.0].needs_grad;
                let needs_hc = self.nodes[hc.0].needs_grad;
                if needs_x || needs_hc {
                    let mut dinput = vec![T::zero(); nx + h];
                    matvec_t_into(&mut dinput, vw, &dz, 4 * h);
                    acc(*x, &mut |d| add_into(d, &dinput[..nx]));
                    acc(*hc, &mut |d| {
                        add_into(&mut d[..h], &dinput[nx..]);
                        add_into(&mut d[h..], &dc_prev);
                    });
                }
            }
        }
    }
}

fn add_into<T: Real>(d: &mut [T], g: &[T]) {
    for (d, &g) in d.iter_mut().zip(g) {
        *d += g;
    }
}

fn matvec_values<T: Real>(m: &[T], x: &[T], rows: usize) -> Vec<T> {
    let cols = x.len();
    (0..rows)
        .map(|r| {
            let row = &m[r * cols..(r + 1) * cols];
            row.iter().zip(x).fold(T::zero(), |s, (&a, &b)| s + a * b)
        })
        .collect()
}

/// `d += g ⊗ x` for a row-major matrix gradient.
fn outer_into<T: Real>(d: &mut [T], g: &[T], x: &[T]) {
    let cols = x.len();
    for (r, &gr) in g.iter().enumerate() {
        if gr == T::zero() {
            continue;
        }
        for (dv, &xv) in d[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *dv += gr * xv;
        }
    }
}

/// `d += mᵀ g`.
fn matvec_t_into<T: Real>(d: &mut [T], m: &[T], g: &[T], rows: usize) {
    let cols = d.len();
    for r in 0..rows {
        let gr = g[r];
        if gr == T::zero() {
            continue;
        }
        for (dv, &mv) in d.iter_mut().zip(&m[r * cols..(r + 1) * cols]) {
            *dv += gr * mv;
        }
    }
}
