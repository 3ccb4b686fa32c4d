//! Tape-based reverse-mode differentiation over vector-valued nodes.
//!
//! Every node holds a flat `Vec<f64>`. Binary elementwise operations accept
//! operands of equal length or a length-1 operand that is broadcast. Complex
//! quantities are carried as separate real and imaginary nodes (see
//! [`super::cvar::CVar`]), so every derivative here is an ordinary real one.
//!
//! ```
//! use wavelab::numerics::autodiff::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.param(vec![3.0]);
//! let y = (x * x).sum();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x), vec![6.0]);
//! ```

use std::cell::{Cell, RefCell};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::rc::Rc;

use crate::error::{invalid, Result};
use crate::numerics::signal::wrap_angle;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Offset(usize),
    Exp(usize),
    Log(usize),
    Sqrt(usize),
    Square(usize),
    Abs(usize),
    Sin(usize),
    Cos(usize),
    Relu(usize),
    Sigmoid(usize),
    Softplus(usize),
    Clamp(usize, f64, f64),
    Wrap(usize),
    Atan2(usize, usize),
    Sum(usize),
    Mean(usize),
    LogSumExp(Vec<usize>),
    MatMul {
        a: usize,
        b: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    AddRowBias {
        x: usize,
        bias: usize,
        cols: usize,
    },
    Conv(usize, usize),
    Upsample(usize, usize),
    Downsample {
        x: usize,
        factor: usize,
        offset: usize,
    },
    Gather(usize, Rc<Vec<usize>>),
    Concat(Vec<usize>),
}

struct Node {
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Records primitive operations for a single forward/backward pass.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    origin_hits: Cell<usize>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}", self.id)
    }
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v` (zeros if `v` does not influence it).
    pub fn wrt(&self, v: Var<'_>) -> Vec<f64> {
        match &self.grads[v.id] {
            Some(g) => g.clone(),
            None => vec![0.0; self.lens[v.id]],
        }
    }
}

fn broadcast_len(a: usize, b: usize) -> Option<usize> {
    if a == b {
        Some(a)
    } else if a == 1 {
        Some(b)
    } else if b == 1 {
        Some(a)
    } else {
        None
    }
}

#[inline]
fn at(v: &[f64], i: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
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

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            origin_hits: Cell::new(0),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// How many times `atan2` was evaluated at the origin (gradient taken as zero).
    pub fn origin_hits(&self) -> usize {
        self.origin_hits.get()
    }

    /// Trainable leaf.
    pub fn param(&self, values: Vec<f64>) -> Var<'_> {
        self.push(values, Op::Leaf, true)
    }

    /// Non-trainable leaf; gradients never flow into it.
    pub fn constant(&self, values: Vec<f64>) -> Var<'_> {
        self.push(values, Op::Leaf, false)
    }

    pub fn scalar(&self, v: f64) -> Var<'_> {
        self.constant(vec![v])
    }

    fn push(&self, value: Vec<f64>, op: Op, needs_grad: bool) -> Var<'_> {
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

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].needs_grad)
    }

    fn unary(&self, x: usize, op: Op, f: impl Fn(f64) -> f64) -> Var<'_> {
        let value: Vec<f64> = self.nodes.borrow()[x].value.iter().map(|&v| f(v)).collect();
        let ng = self.needs(&[x]);
        self.push(value, op, ng)
    }

    fn binary(&self, a: usize, b: usize, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'_> {
        let value = {
            let nodes = self.nodes.borrow();
            let (va, vb) = (&nodes[a].value, &nodes[b].value);
            let n = broadcast_len(va.len(), vb.len()).unwrap_or_else(|| {
                panic!(
                    "elementwise length mismatch: {} vs {}",
                    va.len(),
                    vb.len()
                )
            });
            (0..n).map(|i| f(at(va, i), at(vb, i))).collect::<Vec<_>>()
        };
        let ng = self.needs(&[a, b]);
        self.push(value, op, ng)
    }

    /// Elementwise log-sum-exp across equally long nodes (max-subtracted).
    pub fn logsumexp<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        assert!(!xs.is_empty(), "logsumexp over an empty set");
        let ids: Vec<usize> = xs.iter().map(|v| v.id).collect();
        let value = {
            let nodes = self.nodes.borrow();
            let n = nodes[ids[0]].value.len();
            assert!(ids.iter().all(|&i| nodes[i].value.len() == n));
            (0..n)
                .map(|j| {
                    let m = ids
                        .iter()
                        .map(|&i| nodes[i].value[j])
                        .fold(f64::NEG_INFINITY, f64::max);
                    if m == f64::NEG_INFINITY {
                        return m;
                    }
                    m + ids
                        .iter()
                        .map(|&i| (nodes[i].value[j] - m).exp())
                        .sum::<f64>()
                        .ln()
                })
                .collect::<Vec<_>>()
        };
        let ng = self.needs(&ids);
        self.push(value, Op::LogSumExp(ids), ng)
    }

    /// Row-major matrix product `a (m x k) * b (k x n)`.
    pub fn matmul<'t>(&'t self, a: Var<'t>, b: Var<'t>, m: usize, k: usize, n: usize) -> Var<'t> {
        let value = {
            let nodes = self.nodes.borrow();
            let (va, vb) = (&nodes[a.id].value, &nodes[b.id].value);
            assert_eq!(va.len(), m * k, "matmul: lhs shape");
            assert_eq!(vb.len(), k * n, "matmul: rhs shape");
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                let row = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let aip = va[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    let brow = &vb[p * n..(p + 1) * n];
                    for (o, &bv) in row.iter_mut().zip(brow) {
                        *o += aip * bv;
                    }
                }
            }
            out
        };
        let ng = self.needs(&[a.id, b.id]);
        self.push(
            value,
            Op::MatMul {
                a: a.id,
                b: b.id,
                m,
                k,
                n,
            },
            ng,
        )
    }

    /// Adds `bias[r]` to every entry of row `r` of a row-major matrix with `cols` columns.
    pub fn add_row_bias<'t>(&'t self, x: Var<'t>, bias: Var<'t>, cols: usize) -> Var<'t> {
        let value = {
            let nodes = self.nodes.borrow();
            let (vx, vb) = (&nodes[x.id].value, &nodes[bias.id].value);
            assert_eq!(vx.len(), vb.len() * cols, "add_row_bias: shape");
            vx.iter()
                .enumerate()
                .map(|(i, &v)| v + vb[i / cols])
                .collect::<Vec<_>>()
        };
        let ng = self.needs(&[x.id, bias.id]);
        self.push(
            value,
            Op::AddRowBias {
                x: x.id,
                bias: bias.id,
                cols,
            },
            ng,
        )
    }

    /// Concatenation of several nodes.
    pub fn concat<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let ids: Vec<usize> = xs.iter().map(|v| v.id).collect();
        let value = {
            let nodes = self.nodes.borrow();
            ids.iter()
                .flat_map(|&i| nodes[i].value.iter().copied())
                .collect::<Vec<_>>()
        };
        let ng = self.needs(&ids);
        self.push(value, Op::Concat(ids), ng)
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes[loss.id].value.len() != 1 {
            return invalid(format!(
                "backward requires a scalar loss, got length {}",
                nodes[loss.id].value.len()
            ));
        }
        let lens: Vec<usize> = nodes.iter().map(|n| n.value.len()).collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.needs_grad {
                grads[id] = Some(g);
                continue;
            }
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc_bcast(&mut grads, &nodes, *a, &g, |_, gi| gi);
                    acc_bcast(&mut grads, &nodes, *b, &g, |_, gi| gi);
                }
                Op::Sub(a, b) => {
                    acc_bcast(&mut grads, &nodes, *a, &g, |_, gi| gi);
                    acc_bcast(&mut grads, &nodes, *b, &g, |_, gi| -gi);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    acc_bcast(&mut grads, &nodes, *a, &g, |i, gi| gi * at(vb, i));
                    acc_bcast(&mut grads, &nodes, *b, &g, |i, gi| gi * at(va, i));
                }
                Op::Div(a, b) => {
                    let vb = &nodes[*b].value;
                    acc_bcast(&mut grads, &nodes, *a, &g, |i, gi| gi / at(vb, i));
                    acc_bcast(&mut grads, &nodes, *b, &g, |i, gi| -gi * y[i] / at(vb, i));
                }
                Op::Neg(x) => acc_map(&mut grads, &nodes, *x, &g, |_, gi| -gi),
                Op::Scale(x, c) => acc_map(&mut grads, &nodes, *x, &g, |_, gi| gi * c),
                Op::Offset(x) => acc_map(&mut grads, &nodes, *x, &g, |_, gi| gi),
                Op::Exp(x) => acc_map(&mut grads, &nodes, *x, &g, |i, gi| gi * y[i]),
                Op::Log(x) => {
                    let vx = &nodes[*x].value;
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| gi / vx[i])
                }
                Op::Sqrt(x) => acc_map(&mut grads, &nodes, *x, &g, |i, gi| {
                    if y[i] > 0.0 {
                        gi * 0.5 / y[i]
                    } else {
                        0.0
                    }
                }),
                Op::Square(x) => {
                    let vx = &nodes[*x].value;
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| 2.0 * gi * vx[i])
                }
                Op::Abs(x) => {
                    let vx = &nodes[*x].value;
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| {
                        if vx[i] > 0.0 {
                            gi
                        } else if vx[i] < 0.0 {
                            -gi
                        } else {
                            0.0
                        }
                    })
                }
                Op::Sin(x) => {
                    let vx = &nodes[*x].value;
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| gi * vx[i].cos())
                }
                Op::Cos(x) => {
                    let vx = &nodes[*x].value;
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| -gi * vx[i].sin())
                }
                Op::Relu(x) => {
                    let vx = &nodes[*x].value;
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| if vx[i] > 0.0 { gi } else { 0.0 })
                }
                Op::Sigmoid(x) => {
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| gi * y[i] * (1.0 - y[i]))
                }
                Op::Softplus(x) => {
                    let vx = &nodes[*x].value;
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| gi * sigmoid(vx[i]))
                }
                Op::Clamp(x, lo, hi) => {
                    let vx = &nodes[*x].value;
                    acc_map(&mut grads, &nodes, *x, &g, |i, gi| {
                        if vx[i] > *lo && vx[i] < *hi {
                            gi
                        } else {
                            0.0
                        }
                    })
                }
                Op::Wrap(x) => acc_map(&mut grads, &nodes, *x, &g, |_, gi| gi),
                Op::Atan2(a, b) => {
                    let (vy, vx) = (&nodes[*a].value, &nodes[*b].value);
                    let r2 = |i: usize| {
                        let (yy, xx) = (at(vy, i), at(vx, i));
                        xx * xx + yy * yy
                    };
                    acc_bcast(&mut grads, &nodes, *a, &g, |i, gi| {
                        let d = r2(i);
                        if d > 0.0 {
                            gi * at(vx, i) / d
                        } else {
                            0.0
                        }
                    });
                    acc_bcast(&mut grads, &nodes, *b, &g, |i, gi| {
                        let d = r2(i);
                        if d > 0.0 {
                            -gi * at(vy, i) / d
                        } else {
                            0.0
                        }
                    });
                }
                Op::Sum(x) => {
                    let g0 = g[0];
                    acc_map(&mut grads, &nodes, *x, &vec![g0; lens[*x]], |_, gi| gi)
                }
                Op::Mean(x) => {
                    let n = lens[*x];
                    let g0 = g[0] / n as f64;
                    acc_map(&mut grads, &nodes, *x, &vec![g0; n], |_, gi| gi)
                }
                Op::LogSumExp(ids) => {
                    for &src in ids {
                        let vs = &nodes[src].value;
                        acc_map(&mut grads, &nodes, src, &g, |i, gi| {
                            if y[i] == f64::NEG_INFINITY {
                                0.0
                            } else {
                                gi * (vs[i] - y[i]).exp()
                            }
                        });
                    }
                }
                Op::MatMul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].needs_grad {
                        let ga = slot(&mut grads, *a, m * k);
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let brow = &vb[p * n..(p + 1) * n];
                                ga[i * k + p] +=
                                    grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    }
                    if nodes[*b].needs_grad {
                        let gb = slot(&mut grads, *b, k * n);
                        for i in 0..m {
                            let grow = &g[i * n..(i + 1) * n];
                            for p in 0..k {
                                let aip = va[i * k + p];
                                if aip == 0.0 {
                                    continue;
                                }
                                let gbrow = &mut gb[p * n..(p + 1) * n];
                                for (o, &gv) in gbrow.iter_mut().zip(grow) {
                                    *o += aip * gv;
                                }
                            }
                        }
                    }
                }
                Op::AddRowBias { x, bias, cols } => {
                    acc_map(&mut grads, &nodes, *x, &g, |_, gi| gi);
                    if nodes[*bias].needs_grad {
                        let rows = lens[*bias];
                        let gb = slot(&mut grads, *bias, rows);
                        for (r, gbr) in gb.iter_mut().enumerate() {
                            *gbr += g[r * cols..(r + 1) * cols].iter().sum::<f64>();
                        }
                    }
                }
                Op::Conv(x, h) => {
                    let (vx, vh) = (&nodes[*x].value, &nodes[*h].value);
                    if nodes[*x].needs_grad {
                        let gx = slot(&mut grads, *x, vx.len());
                        for (i, gxi) in gx.iter_mut().enumerate() {
                            *gxi += vh
                                .iter()
                                .zip(&g[i..i + vh.len()])
                                .map(|(a, b)| a * b)
                                .sum::<f64>();
                        }
                    }
                    if nodes[*h].needs_grad {
                        let gh = slot(&mut grads, *h, vh.len());
                        for (i, &xi) in vx.iter().enumerate() {
                            if xi == 0.0 {
                                continue;
                            }
                            for (ghj, &gv) in gh.iter_mut().zip(&g[i..i + vh.len()]) {
                                *ghj += xi * gv;
                            }
                        }
                    }
                }
                Op::Upsample(x, factor) => {
                    if nodes[*x].needs_grad {
                        let gx = slot(&mut grads, *x, lens[*x]);
                        for (k, gxk) in gx.iter_mut().enumerate() {
                            *gxk += g[k * factor];
                        }
                    }
                }
                Op::Downsample { x, factor, offset } => {
                    if nodes[*x].needs_grad {
                        let gx = slot(&mut grads, *x, lens[*x]);
                        for (k, &gk) in g.iter().enumerate() {
                            gx[offset + k * factor] += gk;
                        }
                    }
                }
                Op::Gather(x, idx) => {
                    if nodes[*x].needs_grad {
                        let gx = slot(&mut grads, *x, lens[*x]);
                        for (t, &i) in idx.iter().enumerate() {
                            gx[i] += g[t];
                        }
                    }
                }
                Op::Concat(ids) => {
                    let mut start = 0;
                    for &src in ids {
                        let n = lens[src];
                        if nodes[src].needs_grad {
                            let gs = slot(&mut grads, src, n);
                            for (o, &gv) in gs.iter_mut().zip(&g[start..start + n]) {
                                *o += gv;
                            }
                        }
                        start += n;
                    }
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads, lens })
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], id: usize, len: usize) -> &mut Vec<f64> {
    grads[id].get_or_insert_with(|| vec![0.0; len])
}

/// Accumulate an elementwise gradient into a same-length input.
fn acc_map(
    grads: &mut [Option<Vec<f64>>],
    nodes: &[Node],
    src: usize,
    g: &[f64],
    f: impl Fn(usize, f64) -> f64,
) {
    if !nodes[src].needs_grad {
        return;
    }
    let n = nodes[src].value.len();
    let gs = slot(grads, src, n);
    for (i, o) in gs.iter_mut().enumerate() {
        *o += f(i, g[i]);
    }
}

/// Like [`acc_map`] but sums over the broadcast dimension for length-1 inputs.
fn acc_bcast(
    grads: &mut [Option<Vec<f64>>],
    nodes: &[Node],
    src: usize,
    g: &[f64],
    f: impl Fn(usize, f64) -> f64,
) {
    if !nodes[src].needs_grad {
        return;
    }
    let n = nodes[src].value.len();
    if n == g.len() {
        acc_map(grads, nodes, src, g, f);
    } else {
        let total: f64 = g.iter().enumerate().map(|(i, &gi)| f(i, gi)).sum();
        slot(grads, src, 1)[0] += total;
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Vec<f64> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    /// First entry; handy for scalar nodes.
    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value[0]
    }

    pub fn len(&self) -> usize {
        self.tape.nodes.borrow()[self.id].value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.tape.unary(self.id, Op::Scale(self.id, c), |v| v * c)
    }

    pub fn offset(self, c: f64) -> Var<'t> {
        self.tape.unary(self.id, Op::Offset(self.id), |v| v + c)
    }

    pub fn exp(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Exp(self.id), f64::exp)
    }

    pub fn ln(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Log(self.id), f64::ln)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Sqrt(self.id), f64::sqrt)
    }

    pub fn square(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Square(self.id), |v| v * v)
    }

    pub fn abs(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Abs(self.id), f64::abs)
    }

    pub fn sin(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Sin(self.id), f64::sin)
    }

    pub fn cos(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Cos(self.id), f64::cos)
    }

    /// `max(x, 0)`.
    pub fn relu(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Relu(self.id), |v| v.max(0.0))
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Sigmoid(self.id), sigmoid)
    }

    /// `ln(1 + e^x)` in overflow-safe form.
    pub fn softplus(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Softplus(self.id), softplus)
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        self.tape
            .unary(self.id, Op::Clamp(self.id, lo, hi), |v| v.clamp(lo, hi))
    }

    /// Wraps angles into (-pi, pi]; gradient passes through unchanged.
    pub fn wrap_angle(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Wrap(self.id), wrap_angle)
    }

    /// `atan2(self, x)`, branch cut on the negative real axis.
    pub fn atan2(self, x: Var<'t>) -> Var<'t> {
        let tape = self.tape;
        let v = tape.binary(self.id, x.id, Op::Atan2(self.id, x.id), f64::atan2);
        let hits = {
            let nodes = tape.nodes.borrow();
            let (vy, vx) = (&nodes[self.id].value, &nodes[x.id].value);
            let n = nodes[v.id].value.len();
            (0..n)
                .filter(|&i| at(vy, i) == 0.0 && at(vx, i) == 0.0)
                .count()
        };
        tape.origin_hits.set(tape.origin_hits.get() + hits);
        v
    }

    pub fn sum(self) -> Var<'t> {
        let s: f64 = self.tape.nodes.borrow()[self.id].value.iter().sum();
        let ng = self.tape.needs(&[self.id]);
        self.tape.push(vec![s], Op::Sum(self.id), ng)
    }

    pub fn mean(self) -> Var<'t> {
        let (s, n) = {
            let nodes = self.tape.nodes.borrow();
            let v = &nodes[self.id].value;
            (v.iter().sum::<f64>(), v.len())
        };
        let ng = self.tape.needs(&[self.id]);
        self.tape.push(vec![s / n as f64], Op::Mean(self.id), ng)
    }

    /// Sum of elementwise products.
    pub fn dot(self, other: Var<'t>) -> Var<'t> {
        (self * other).sum()
    }

    /// Full linear convolution with kernel `h`.
    pub fn conv(self, h: Var<'t>) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (vx, vh) = (&nodes[self.id].value, &nodes[h.id].value);
            assert!(!vx.is_empty() && !vh.is_empty(), "conv: empty input");
            let mut out = vec![0.0; vx.len() + vh.len() - 1];
            for (i, &xi) in vx.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (o, &hj) in out[i..i + vh.len()].iter_mut().zip(vh) {
                    *o += xi * hj;
                }
            }
            out
        };
        let ng = self.tape.needs(&[self.id, h.id]);
        self.tape.push(value, Op::Conv(self.id, h.id), ng)
    }

    pub fn upsample(self, factor: usize) -> Var<'t> {
        assert!(factor >= 1, "upsample: factor must be >= 1");
        let value = {
            let nodes = self.tape.nodes.borrow();
            let vx = &nodes[self.id].value;
            let mut out = vec![0.0; vx.len() * factor];
            for (k, &v) in vx.iter().enumerate() {
                out[k * factor] = v;
            }
            out
        };
        let ng = self.tape.needs(&[self.id]);
        self.tape.push(value, Op::Upsample(self.id, factor), ng)
    }

    /// `out[k] = x[offset + k*factor]` for `k < count`.
    pub fn downsample(self, factor: usize, offset: usize, count: usize) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let vx = &nodes[self.id].value;
            assert!(
                factor >= 1 && (count == 0 || offset + (count - 1) * factor < vx.len()),
                "downsample: out of range"
            );
            (0..count).map(|k| vx[offset + k * factor]).collect()
        };
        let ng = self.tape.needs(&[self.id]);
        self.tape.push(
            value,
            Op::Downsample {
                x: self.id,
                factor,
                offset,
            },
            ng,
        )
    }

    /// `out[t] = x[idx[t]]`.
    pub fn gather(self, idx: Rc<Vec<usize>>) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let vx = &nodes[self.id].value;
            idx.iter().map(|&i| vx[i]).collect()
        };
        let ng = self.tape.needs(&[self.id]);
        self.tape.push(value, Op::Gather(self.id, idx), ng)
    }

    /// Contiguous slice `[start, start+len)`.
    pub fn slice(self, start: usize, len: usize) -> Var<'t> {
        self.downsample(1, start, len)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident, $f:expr) => {
        impl<'t> $trait for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                self.tape
                    .binary(self.id, rhs.id, Op::$variant(self.id, rhs.id), $f)
            }
        }
    };
}

binop!(Add, add, Add, |a, b| a + b);
binop!(Sub, sub, Sub, |a, b| a - b);
binop!(Mul, mul, Mul, |a, b| a * b);
binop!(Div, div, Div, |a, b| a / b);

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self.id, Op::Neg(self.id), |v| -v)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.scale(c)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.offset(c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.offset(-c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central finite differences of `f` around `x0`.
    fn finite_diff(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], h: f64) -> Vec<f64> {
        (0..x0.len())
            .map(|i| {
                let mut xp = x0.to_vec();
                let mut xm = x0.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn check(build: &dyn for<'t> Fn(&'t Tape, Var<'t>) -> Var<'t>, x0: &[f64]) {
        let tape = Tape::new();
        let x = tape.param(x0.to_vec());
        let loss = build(&tape, x);
        let g = tape.backward(loss).unwrap().wrt(x);
        let f = |xs: &[f64]| {
            let t = Tape::new();
            let v = t.param(xs.to_vec());
            build(&t, v).item()
        };
        let fd = finite_diff(&f, x0, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
            assert!(rel < 1e-4, "autodiff {a} vs fd {b}");
        }
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    }

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let x = tape.param(vec![3.0]);
        let y = x.square().sum();
        assert_eq!(tape.backward(y).unwrap().wrt(x), vec![6.0]);
    }

    #[test]
    fn complex_abs_squared_as_real_pair() {
        let tape = Tape::new();
        let re = tape.param(vec![1.0]);
        let im = tape.param(vec![2.0]);
        let y = (re * re + im * im).sum();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(re), vec![2.0]);
        assert_eq!(g.wrt(im), vec![4.0]);
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let tape = Tape::new();
        let x = tape.param(vec![1.0, 2.0]);
        assert!(tape.backward(x.exp()).is_err());
    }

    #[test]
    fn elementwise_primitives_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = rand_vec(&mut rng, 6, 0.3, 2.0);
        check(&|_, x| (x.exp() + x.ln() - x.sqrt() * x.square()).sum(), &x0);
        check(&|_, x| (x.sin() * x.cos() + x.abs().sigmoid()).mean(), &x0);
        check(&|t, x| ((x - t.scalar(1.0)).relu() + x.softplus()).sum(), &x0);
        check(&|t, x| (t.scalar(2.0) / x - (-x).scale(0.3)).sum(), &x0);
        check(&|_, x| x.clamp(0.5, 1.5).wrap_angle().offset(1.0).sum(), &x0);
    }

    #[test]
    fn atan2_and_origin_counter() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = rand_vec(&mut rng, 8, -1.0, 1.0);
        check(
            &|_, v| {
                let y = v.slice(0, 4);
                let x = v.slice(4, 4);
                y.atan2(x).square().sum()
            },
            &x0,
        );
        let tape = Tape::new();
        let y = tape.param(vec![0.0, 1.0]);
        let x = tape.param(vec![0.0, 1.0]);
        let a = y.atan2(x).sum();
        let g = tape.backward(a).unwrap();
        assert_eq!(g.wrt(y)[0], 0.0);
        assert_eq!(tape.origin_hits(), 1);
    }

    #[test]
    fn reductions_and_structure_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x0 = rand_vec(&mut rng, 12, -1.0, 1.0);
        check(
            &|t, x| {
                let a = x.slice(0, 4);
                let b = x.slice(4, 4);
                let c = x.slice(8, 4);
                t.logsumexp(&[a, b.scale(2.0), c]).sum()
            },
            &x0,
        );
        check(
            &|t, x| {
                let w = x.slice(0, 6);
                let v = x.slice(6, 6);
                let y = t.matmul(w, v, 2, 3, 2);
                let yb = t.add_row_bias(y, x.slice(0, 2), 2);
                yb.square().sum()
            },
            &x0,
        );
        check(
            &|_, x| {
                let s = x.slice(0, 5).upsample(3);
                let y = s.conv(x.slice(5, 4));
                y.downsample(2, 1, 6).square().sum()
            },
            &x0,
        );
        check(
            &|t, x| {
                let g = x.gather(Rc::new(vec![0, 0, 3, 11, 7]));
                t.concat(&[g, x.slice(2, 3)]).square().mean()
            },
            &x0,
        );
    }

    #[test]
    fn broadcast_scalar_gradients_sum() {
        let tape = Tape::new();
        let s = tape.param(vec![2.0]);
        let v = tape.constant(vec![1.0, 2.0, 3.0]);
        let y = (v * s).sum();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(s), vec![6.0]);
        assert_eq!(g.wrt(v), vec![0.0; 3]);
    }
}
