//! A small reverse-mode automatic differentiation tape over dense vectors.
//!
//! Nodes are appended in topological order, so the backward pass is a
//! single reverse sweep. Trainable tensors live in a [`ParamStore`] and
//! are referenced by [`ParamId`]; their gradients accumulate in a
//! separate [`Grads`] buffer. Matrices are row-major.

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign};

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Scalar type of a tape: `f32` for training, `f64` for gradient checks.
pub trait Real: Float + Default + Debug + Send + Sync + AddAssign + MulAssign + 'static {
    fn of(x: f64) -> Self {
        Self::from(x).unwrap()
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param<R> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<R>,
    /// Frozen parameters keep their value during optimization.
    pub frozen: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<R> {
    params: Vec<Param<R>>,
    by_name: HashMap<String, ParamId>,
}

impl<R: Real> ParamStore<R> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, value: Vec<R>) -> ParamId {
        assert_eq!(value.len(), rows * cols, "shape mismatch for {name}");
        assert!(!self.by_name.contains_key(name), "duplicate parameter {name}");
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            rows,
            cols,
            value,
            frozen: false,
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Param<R> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<R> {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<R>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalars.
    pub fn size(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|x| x.is_finite()))
    }

    /// Converts every value to another scalar type.
    pub fn cast<S: Real>(&self) -> ParamStore<S> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    rows: p.rows,
                    cols: p.cols,
                    value: p.value.iter().map(|x| S::of(x.f64())).collect(),
                    frozen: p.frozen,
                })
                .collect(),
            by_name: self.by_name.clone(),
        }
    }
}

/// Gradient buffers shaped like a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<R> {
    pub g: Vec<Vec<R>>,
}

impl<R: Real> Grads<R> {
    pub fn zeros(store: &ParamStore<R>) -> Self {
        Grads {
            g: store.params.iter().map(|p| vec![R::zero(); p.value.len()]).collect(),
        }
    }

    pub fn clear(&mut self) {
        for v in &mut self.g {
            v.iter_mut().for_each(|x| *x = R::zero());
        }
    }

    pub fn norm(&self) -> R {
        self.g
            .iter()
            .flat_map(|v| v.iter())
            .fold(R::zero(), |acc, x| acc + *x * *x)
            .sqrt()
    }

    pub fn scale(&mut self, s: R) {
        for v in &mut self.g {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.g.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// Deliberate backward-rule corruptions used as negative controls for
/// gradient checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Uses `1 - y` instead of `1 - y^2` as the tanh derivative.
    TanhBackward,
    /// Drops the gradient of the second operand of elementwise products.
    MulBackward,
}

#[derive(Clone, Debug)]
enum Op<R> {
    Input,
    Param(ParamId),
    Row(ParamId, usize),
    MatVec(ParamId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Mask(NodeId, Vec<R>),
    Scale(NodeId, R),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    Dot(NodeId, NodeId),
    AdditiveScores {
        keys: Vec<NodeId>,
        query: NodeId,
        v: ParamId,
    },
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Pick(NodeId, usize),
    WeightedSum {
        weights: NodeId,
        items: Vec<NodeId>,
    },
    Sum(Vec<NodeId>),
}

struct Node<R> {
    value: Vec<R>,
    op: Op<R>,
    needs_grad: bool,
}

pub struct Tape<'p, R: Real> {
    params: &'p ParamStore<R>,
    nodes: Vec<Node<R>>,
    fault: Option<Fault>,
}

fn sigmoid<R: Real>(x: R) -> R {
    R::one() / (R::one() + (-x).exp())
}

impl<'p, R: Real> Tape<'p, R> {
    pub fn new(params: &'p ParamStore<R>) -> Self {
        Tape {
            params,
            nodes: Vec::with_capacity(1024),
            fault: None,
        }
    }

    pub fn with_fault(mut self, fault: Option<Fault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn params(&self) -> &'p ParamStore<R> {
        self.params
    }

    pub fn value(&self, n: NodeId) -> &[R] {
        &self.nodes[n.0].value
    }

    pub fn scalar(&self, n: NodeId) -> R {
        self.nodes[n.0].value[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<R>, op: Op<R>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, n: NodeId) -> bool {
        self.nodes[n.0].needs_grad
    }

    /// A constant.
    pub fn input(&mut self, value: Vec<R>) -> NodeId {
        self.push(value, Op::Input, false)
    }

    /// A whole parameter as a vector.
    pub fn param(&mut self, p: ParamId) -> NodeId {
        let v = self.params.get(p).value.clone();
        self.push(v, Op::Param(p), true)
    }

    /// Row `i` of a parameter matrix (embedding lookup).
    pub fn row(&mut self, p: ParamId, i: usize) -> NodeId {
        let param = self.params.get(p);
        let v = param.value[i * param.cols..(i + 1) * param.cols].to_vec();
        self.push(v, Op::Row(p, i), true)
    }

    /// `W x` for a parameter matrix `W`. Zero entries of `x` are skipped.
    pub fn matvec(&mut self, p: ParamId, x: NodeId) -> NodeId {
        let w = self.params.get(p);
        let xv = &self.nodes[x.0].value;
        assert_eq!(
            xv.len(),
            w.cols,
            "matvec {}: input {} vs cols {}",
            w.name,
            xv.len(),
            w.cols
        );
        let nz: Vec<usize> = (0..xv.len()).filter(|&j| xv[j] != R::zero()).collect();
        let mut y = vec![R::zero(); w.rows];
        if nz.len() * 2 < xv.len() {
            for (r, yr) in y.iter_mut().enumerate() {
                let row = &w.value[r * w.cols..(r + 1) * w.cols];
                let mut acc = R::zero();
                for &j in &nz {
                    acc += row[j] * xv[j];
                }
                *yr = acc;
            }
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                let row = &w.value[r * w.cols..(r + 1) * w.cols];
                let mut acc = R::zero();
                for (a, b) in row.iter().zip(xv) {
                    acc += *a * *b;
                }
                *yr = acc;
            }
        }
        self.push(y, Op::MatVec(p, x), true)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.len(), vb.len());
        let v = va.iter().zip(vb).map(|(x, y)| *x + *y).collect();
        let g = self.ng(a) || self.ng(b);
        self.push(v, Op::Add(a, b), g)
    }

    /// Sum of several same-length vectors.
    pub fn add_all(&mut self, xs: &[NodeId]) -> NodeId {
        let mut acc = xs[0];
        for &x in &xs[1..] {
            acc = self.add(acc, x);
        }
        acc
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.len(), vb.len());
        let v = va.iter().zip(vb).map(|(x, y)| *x * *y).collect();
        let g = self.ng(a) || self.ng(b);
        self.push(v, Op::Mul(a, b), g)
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, a: NodeId, mask: Vec<R>) -> NodeId {
        let v = self.nodes[a.0].value.iter().zip(&mask).map(|(x, m)| *x * *m).collect();
        let g = self.ng(a);
        self.push(v, Op::Mask(a, mask), g)
    }

    pub fn scale(&mut self, a: NodeId, s: R) -> NodeId {
        let v = self.nodes[a.0].value.iter().map(|x| *x * s).collect();
        let g = self.ng(a);
        self.push(v, Op::Scale(a, s), g)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.iter().map(|x| x.tanh()).collect();
        let g = self.ng(a);
        self.push(v, Op::Tanh(a), g)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.iter().map(|x| sigmoid(*x)).collect();
        let g = self.ng(a);
        self.push(v, Op::Sigmoid(a), g)
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> NodeId {
        let mut v = Vec::new();
        for x in xs {
            v.extend_from_slice(&self.nodes[x.0].value);
        }
        let g = xs.iter().any(|x| self.ng(*x));
        self.push(v, Op::Concat(xs.to_vec()), g)
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let v = self.nodes[a.0].value[start..start + len].to_vec();
        let g = self.ng(a);
        self.push(v, Op::Slice(a, start), g)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.len(), vb.len());
        let v = va.iter().zip(vb).fold(R::zero(), |acc, (x, y)| acc + *x * *y);
        let g = self.ng(a) || self.ng(b);
        self.push(vec![v], Op::Dot(a, b), g)
    }

    /// `e_i = v · tanh(keys_i + query)` for every key.
    pub fn additive_scores(&mut self, keys: &[NodeId], query: NodeId, v: ParamId) -> NodeId {
        let vv = &self.params.get(v).value;
        let q = &self.nodes[query.0].value;
        let e = keys
            .iter()
            .map(|k| {
                self.nodes[k.0]
                    .value
                    .iter()
                    .zip(q)
                    .zip(vv)
                    .fold(R::zero(), |acc, ((a, b), w)| acc + *w * (*a + *b).tanh())
            })
            .collect();
        self.push(
            e,
            Op::AdditiveScores {
                keys: keys.to_vec(),
                query,
                v,
            },
            true,
        )
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = softmax(&self.nodes[a.0].value);
        let g = self.ng(a);
        self.push(v, Op::Softmax(a), g)
    }

    pub fn log_softmax(&mut self, a: NodeId) -> NodeId {
        let x = &self.nodes[a.0].value;
        let m = x.iter().fold(R::neg_infinity(), |acc, v| acc.max(*v));
        let lse = m + x.iter().fold(R::zero(), |acc, v| acc + (*v - m).exp()).ln();
        let v = x.iter().map(|v| *v - lse).collect();
        let g = self.ng(a);
        self.push(v, Op::LogSoftmax(a), g)
    }

    pub fn pick(&mut self, a: NodeId, i: usize) -> NodeId {
        let v = vec![self.nodes[a.0].value[i]];
        let g = self.ng(a);
        self.push(v, Op::Pick(a, i), g)
    }

    /// `Σ weights_i · items_i`.
    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> NodeId {
        let w = &self.nodes[weights.0].value;
        assert_eq!(w.len(), items.len());
        let mut v = vec![R::zero(); self.nodes[items[0].0].value.len()];
        for (wi, it) in w.iter().zip(items) {
            for (o, x) in v.iter_mut().zip(&self.nodes[it.0].value) {
                *o += *wi * *x;
            }
        }
        let g = self.ng(weights) || items.iter().any(|x| self.ng(*x));
        self.push(
            v,
            Op::WeightedSum {
                weights,
                items: items.to_vec(),
            },
            g,
        )
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, xs: &[NodeId]) -> NodeId {
        let v = xs.iter().fold(R::zero(), |acc, x| acc + self.nodes[x.0].value[0]);
        let g = xs.iter().any(|x| self.ng(*x));
        self.push(vec![v], Op::Sum(xs.to_vec()), g)
    }

    /// Backpropagates from scalar `loss`, adding parameter gradients to
    /// `grads`. Frozen parameters receive gradients too; the optimizer
    /// ignores them.
    pub fn backward(&self, loss: NodeId, grads: &mut Grads<R>) {
        let mut g: Vec<Option<Vec<R>>> = Vec::with_capacity(loss.0 + 1);
        g.resize_with(loss.0 + 1, || None);
        g[loss.0] = Some(vec![R::one()]);
        for i in (0..=loss.0).rev() {
            let Some(gy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.backward_node(node, &gy, &mut g, grads);
        }
    }

    fn acc(&self, g: &mut [Option<Vec<R>>], n: NodeId, f: impl FnOnce(&mut [R])) {
        if !self.nodes[n.0].needs_grad {
            return;
        }
        let slot = g[n.0].get_or_insert_with(|| vec![R::zero(); self.nodes[n.0].value.len()]);
        f(slot);
    }

    fn backward_node(&self, node: &Node<R>, gy: &[R], g: &mut [Option<Vec<R>>], grads: &mut Grads<R>) {
        let y = &node.value;
        match &node.op {
            Op::Input => {}
            Op::Param(p) => {
                for (d, s) in grads.g[p.0].iter_mut().zip(gy) {
                    *d += *s;
                }
            }
            Op::Row(p, r) => {
                let cols = self.params.get(*p).cols;
                for (d, s) in grads.g[p.0][r * cols..(r + 1) * cols].iter_mut().zip(gy) {
                    *d += *s;
                }
            }
            Op::MatVec(p, x) => {
                let w = self.params.get(*p);
                let xv = &self.nodes[x.0].value;
                let gw = &mut grads.g[p.0];
                let nz: Vec<usize> = (0..xv.len()).filter(|&j| xv[j] != R::zero()).collect();
                for (r, gr) in gy.iter().enumerate() {
                    if *gr == R::zero() {
                        continue;
                    }
                    let row = &mut gw[r * w.cols..(r + 1) * w.cols];
                    for &j in &nz {
                        row[j] += *gr * xv[j];
                    }
                }
                self.acc(g, *x, |gx| {
                    for (r, gr) in gy.iter().enumerate() {
                        let row = &w.value[r * w.cols..(r + 1) * w.cols];
                        for (d, wv) in gx.iter_mut().zip(row) {
                            *d += *gr * *wv;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for n in [*a, *b] {
                    self.acc(g, n, |d| d.iter_mut().zip(gy).for_each(|(d, s)| *d += *s));
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                self.acc(g, *a, |d| {
                    for ((d, s), o) in d.iter_mut().zip(gy).zip(vb) {
                        *d += *s * *o;
                    }
                });
                if self.fault != Some(Fault::MulBackward) {
                    self.acc(g, *b, |d| {
                        for ((d, s), o) in d.iter_mut().zip(gy).zip(va) {
                            *d += *s * *o;
                        }
                    });
                }
            }
            Op::Mask(a, m) => self.acc(g, *a, |d| {
                for ((d, s), k) in d.iter_mut().zip(gy).zip(m) {
                    *d += *s * *k;
                }
            }),
            Op::Scale(a, s) => self.acc(g, *a, |d| d.iter_mut().zip(gy).for_each(|(d, v)| *d += *v * *s)),
            Op::Tanh(a) => {
                let faulty = self.fault == Some(Fault::TanhBackward);
                self.acc(g, *a, |d| {
                    for ((d, s), t) in d.iter_mut().zip(gy).zip(y) {
                        let deriv = if faulty { R::one() - *t } else { R::one() - *t * *t };
                        *d += *s * deriv;
                    }
                })
            }
            Op::Sigmoid(a) => self.acc(g, *a, |d| {
                for ((d, s), t) in d.iter_mut().zip(gy).zip(y) {
                    *d += *s * *t * (R::one() - *t);
                }
            }),
            Op::Concat(xs) => {
                let mut off = 0;
                for x in xs {
                    let n = self.nodes[x.0].value.len();
                    self.acc(g, *x, |d| {
                        d.iter_mut().zip(&gy[off..off + n]).for_each(|(d, s)| *d += *s)
                    });
                    off += n;
                }
            }
            Op::Slice(a, start) => {
                let n = y.len();
                self.acc(g, *a, |d| {
                    d[*start..*start + n].iter_mut().zip(gy).for_each(|(d, s)| *d += *s)
                })
            }
            Op::Dot(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let s = gy[0];
                self.acc(g, *a, |d| d.iter_mut().zip(vb).for_each(|(d, o)| *d += s * *o));
                self.acc(g, *b, |d| d.iter_mut().zip(va).for_each(|(d, o)| *d += s * *o));
            }
            Op::AdditiveScores { keys, query, v } => {
                let vv = &self.params.get(*v).value;
                let q = &self.nodes[query.0].value;
                let faulty = self.fault == Some(Fault::TanhBackward);
                let mut gq = vec![R::zero(); q.len()];
                for (k, ge) in keys.iter().zip(gy) {
                    let kv = &self.nodes[k.0].value;
                    let t: Vec<R> = kv.iter().zip(q).map(|(a, b)| (*a + *b).tanh()).collect();
                    for (d, ti) in grads.g[v.0].iter_mut().zip(&t) {
                        *d += *ge * *ti;
                    }
                    let dz: Vec<R> = t
                        .iter()
                        .zip(vv)
                        .map(|(ti, w)| {
                            let deriv = if faulty { R::one() - *ti } else { R::one() - *ti * *ti };
                            *ge * *w * deriv
                        })
                        .collect();
                    for (a, b) in gq.iter_mut().zip(&dz) {
                        *a += *b;
                    }
                    self.acc(g, *k, |d| d.iter_mut().zip(&dz).for_each(|(d, s)| *d += *s));
                }
                self.acc(g, *query, |d| d.iter_mut().zip(&gq).for_each(|(d, s)| *d += *s));
            }
            Op::Softmax(a) => {
                let dotp = y.iter().zip(gy).fold(R::zero(), |acc, (p, s)| acc + *p * *s);
                self.acc(g, *a, |d| {
                    for ((d, p), s) in d.iter_mut().zip(y).zip(gy) {
                        *d += *p * (*s - dotp);
                    }
                })
            }
            Op::LogSoftmax(a) => {
                let total = gy.iter().fold(R::zero(), |acc, s| acc + *s);
                self.acc(g, *a, |d| {
                    for ((d, l), s) in d.iter_mut().zip(y).zip(gy) {
                        *d += *s - l.exp() * total;
                    }
                })
            }
            Op::Pick(a, i) => self.acc(g, *a, |d| d[*i] += gy[0]),
            Op::WeightedSum { weights, items } => {
                let w = &self.nodes[weights.0].value;
                let gw: Vec<R> = items
                    .iter()
                    .map(|it| {
                        self.nodes[it.0]
                            .value
                            .iter()
                            .zip(gy)
                            .fold(R::zero(), |acc, (x, s)| acc + *x * *s)
                    })
                    .collect();
                self.acc(g, *weights, |d| d.iter_mut().zip(&gw).for_each(|(d, s)| *d += *s));
                for (wi, it) in w.iter().zip(items) {
                    self.acc(g, *it, |d| d.iter_mut().zip(gy).for_each(|(d, s)| *d += *wi * *s));
                }
            }
            Op::Sum(xs) => {
                for x in xs {
                    self.acc(g, *x, |d| d[0] += gy[0]);
                }
            }
        }
    }
}

pub fn softmax<R: Real>(x: &[R]) -> Vec<R> {
    let m = x.iter().fold(R::neg_infinity(), |acc, v| acc.max(*v));
    let e: Vec<R> = x.iter().map(|v| (*v - m).exp()).collect();
    let s = e.iter().fold(R::zero(), |acc, v| acc + *v);
    e.into_iter().map(|v| v / s).collect()
}

/// Adam with bias correction. Frozen parameters are skipped.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(store: &ParamStore<f32>, lr: f64) -> Self {
        let zeros: Vec<Vec<f32>> = store.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore<f32>, grads: &Grads<f32>) {
        self.t += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let step = (self.lr * c2.sqrt() / c1) as f32;
        let eps = self.eps as f32;
        for (i, p) in store.params.iter_mut().enumerate() {
            if p.frozen {
                continue;
            }
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads.g[i]);
            for k in 0..p.value.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                p.value[k] -= step * m[k] / (v[k].sqrt() + eps);
            }
        }
    }
}
