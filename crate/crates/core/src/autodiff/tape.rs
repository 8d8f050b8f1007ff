//! Append-only reverse-mode tape over small dense vectors.
//!
//! Every node holds a vector value (scalars are length-1 vectors, matrices
//! are stored row-major with their shape). Nodes are recorded in evaluation
//! order, so a single reverse sweep from the loss visits each node once.

use std::sync::atomic::{AtomicU32, Ordering};

use super::params::{ParamId, ParameterStore};
use super::special::{digamma, ln_beta, trigamma};
use crate::{Error, Result};

/// Smallest value passed to `ln` when evaluating Beta densities.
pub const BETA_CLAMP: f64 = 1e-6;

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

fn fresh_id() -> u32 {
    NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Handle to a node on a particular [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u32,
    idx: u32,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Linear {
        x: usize,
        w: usize,
        b: usize,
    },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    Relu(usize),
    Softmax(usize),
    Softplus(usize),
    Sum(usize),
    Pick(usize, usize),
    LogPick(usize, usize),
    Entropy(usize),
    BetaLogProb {
        alpha: usize,
        beta: usize,
        x: Vec<f64>,
    },
    BetaEntropy {
        alpha: usize,
        beta: usize,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
}

#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Parameters of a store recorded as leaves on a tape, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn get(&self, id: ParamId) -> Var {
        self.vars[id.index()]
    }
}

/// Gradients of one backward pass, readable for any node on the tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Vec<f64>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// d(loss)/d(var); zeros when the loss does not depend on `var`.
    pub fn get(&self, var: Var) -> Result<Vec<f64>> {
        if var.tape != self.tape || var.idx as usize >= self.grads.len() {
            return Err(Error::ForeignVar);
        }
        let g = &self.grads[var.idx as usize];
        Ok(if g.is_empty() {
            vec![0.0; self.lens[var.idx as usize]]
        } else {
            g.clone()
        })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: fresh_id(),
            nodes: Vec::new(),
        }
    }

    /// Drops all nodes. Vars from before the call become foreign to this tape.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.id = fresh_id();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
        });
        Var {
            tape: self.id,
            idx: (self.nodes.len() - 1) as u32,
        }
    }

    fn index(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx as usize >= self.nodes.len() {
            return Err(Error::ForeignVar);
        }
        Ok(v.idx as usize)
    }

    fn vector(&self, v: Var) -> Result<usize> {
        let i = self.index(v)?;
        if self.nodes[i].cols != 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected a vector, got a {}x{} matrix",
                self.nodes[i].rows, self.nodes[i].cols
            )));
        }
        Ok(i)
    }

    fn same_len(&self, a: Var, b: Var) -> Result<(usize, usize)> {
        let (i, j) = (self.vector(a)?, self.vector(b)?);
        if self.nodes[i].value.len() != self.nodes[j].value.len() {
            return Err(Error::ShapeMismatch(format!(
                "operands have lengths {} and {}",
                self.nodes[i].value.len(),
                self.nodes[j].value.len()
            )));
        }
        Ok((i, j))
    }

    /// Value of `v`. Panics if `v` was recorded on another tape.
    pub fn value(&self, v: Var) -> &[f64] {
        let i = self.index(v).expect("variable belongs to this tape");
        &self.nodes[i].value
    }

    /// First component of `v`, for scalar nodes.
    pub fn scalar_value(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(Op::Leaf, n, 1, value)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.constant(vec![value])
    }

    pub fn matrix(&mut self, value: Vec<f64>, rows: usize, cols: usize) -> Result<Var> {
        if value.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                value.len()
            )));
        }
        Ok(self.push(Op::Leaf, rows, cols, value))
    }

    /// Copies the current value of `v` into a new leaf, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Result<Var> {
        let i = self.index(v)?;
        let n = &self.nodes[i];
        let (rows, cols, value) = (n.rows, n.cols, n.value.clone());
        Ok(self.push(Op::Leaf, rows, cols, value))
    }

    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> Var {
        let p = store.get(id);
        self.push(Op::Param(id), p.rows, p.cols, p.value.clone())
    }

    /// Records every parameter of `store` as a leaf.
    pub fn bind(&mut self, store: &ParameterStore) -> Bound {
        Bound {
            vars: store.ids().map(|id| self.param(store, id)).collect(),
        }
    }

    /// `y = W x + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xi, wi, bi) = (self.vector(x)?, self.index(w)?, self.vector(b)?);
        let (rows, cols) = (self.nodes[wi].rows, self.nodes[wi].cols);
        if self.nodes[xi].value.len() != cols || self.nodes[bi].value.len() != rows {
            return Err(Error::ShapeMismatch(format!(
                "linear: W is {rows}x{cols}, x has {}, b has {}",
                self.nodes[xi].value.len(),
                self.nodes[bi].value.len()
            )));
        }
        let xv = &self.nodes[xi].value;
        let wv = &self.nodes[wi].value;
        let value: Vec<f64> = self.nodes[bi]
            .value
            .iter()
            .enumerate()
            .map(|(r, b)| {
                b + wv[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(xv)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
            })
            .collect();
        Ok(self.push(
            Op::Linear {
                x: xi,
                w: wi,
                b: bi,
            },
            rows,
            1,
            value,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (i, j) = self.same_len(a, b)?;
        let value = zip_map(&self.nodes[i].value, &self.nodes[j].value, |x, y| x + y);
        let n = value.len();
        Ok(self.push(Op::Add(i, j), n, 1, value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (i, j) = self.same_len(a, b)?;
        let value = zip_map(&self.nodes[i].value, &self.nodes[j].value, |x, y| x - y);
        let n = value.len();
        Ok(self.push(Op::Sub(i, j), n, 1, value))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (i, j) = self.same_len(a, b)?;
        let value = zip_map(&self.nodes[i].value, &self.nodes[j].value, |x, y| x * y);
        let n = value.len();
        Ok(self.push(Op::Mul(i, j), n, 1, value))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let i = self.vector(a)?;
        let value: Vec<f64> = self.nodes[i].value.iter().map(|x| c * x).collect();
        let n = value.len();
        Ok(self.push(Op::Scale(i, c), n, 1, value))
    }

    /// Adds the constant `c` to every component.
    pub fn offset(&mut self, a: Var, c: f64) -> Result<Var> {
        let i = self.vector(a)?;
        let value: Vec<f64> = self.nodes[i].value.iter().map(|x| x + c).collect();
        let n = value.len();
        Ok(self.push(Op::Offset(i), n, 1, value))
    }

    /// Elementwise `max(0, x)`, with zero derivative at zero.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let i = self.vector(a)?;
        let value: Vec<f64> = self.nodes[i].value.iter().map(|&x| x.max(0.0)).collect();
        let n = value.len();
        Ok(self.push(Op::Relu(i), n, 1, value))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let i = self.vector(a)?;
        let value = softmax_values(&self.nodes[i].value);
        let n = value.len();
        Ok(self.push(Op::Softmax(i), n, 1, value))
    }

    /// Elementwise `ln(1 + e^x)`.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let i = self.vector(a)?;
        let value: Vec<f64> = self.nodes[i].value.iter().map(|&x| softplus(x)).collect();
        let n = value.len();
        Ok(self.push(Op::Softplus(i), n, 1, value))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let i = self.vector(a)?;
        let s = self.nodes[i].value.iter().sum();
        Ok(self.push(Op::Sum(i), 1, 1, vec![s]))
    }

    /// Component `index` of `a` as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let i = self.vector(a)?;
        let len = self.nodes[i].value.len();
        let v = *self.nodes[i]
            .value
            .get(index)
            .ok_or(Error::IndexOutOfRange { index, len })?;
        Ok(self.push(Op::Pick(i, index), 1, 1, vec![v]))
    }

    /// Log-probability of `index` and entropy of the categorical distribution `probs`.
    pub fn categorical_logprob_entropy(&mut self, probs: Var, index: usize) -> Result<(Var, Var)> {
        let i = self.vector(probs)?;
        let p = &self.nodes[i].value;
        let len = p.len();
        let pi = *p.get(index).ok_or(Error::IndexOutOfRange { index, len })?;
        let logp = pi.max(f64::MIN_POSITIVE).ln();
        let entropy = -p
            .iter()
            .filter(|&&q| q > 0.0)
            .map(|&q| q * q.ln())
            .sum::<f64>();
        let lp = self.push(Op::LogPick(i, index), 1, 1, vec![logp]);
        let h = self.push(Op::Entropy(i), 1, 1, vec![entropy]);
        Ok((lp, h))
    }

    /// Elementwise Beta log-density of the constants `x` under `(alpha, beta)`.
    ///
    /// `x` is clamped to `[BETA_CLAMP, 1 - BETA_CLAMP]`; values outside `[0, 1]`
    /// or NaN are rejected.
    pub fn beta_logprob(&mut self, alpha: Var, beta: Var, x: &[f64]) -> Result<Var> {
        let (ai, bi) = self.same_len(alpha, beta)?;
        if x.len() != self.nodes[ai].value.len() {
            return Err(Error::ShapeMismatch(format!(
                "beta_logprob: {} samples for {} distributions",
                x.len(),
                self.nodes[ai].value.len()
            )));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "Beta sample {bad} outside (0, 1)"
            )));
        }
        let (av, bv) = (&self.nodes[ai].value, &self.nodes[bi].value);
        if av.iter().chain(bv).any(|&c| c <= 0.0 || !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "Beta concentrations must be positive".into(),
            ));
        }
        let xs: Vec<f64> = x
            .iter()
            .map(|v| v.clamp(BETA_CLAMP, 1.0 - BETA_CLAMP))
            .collect();
        let value: Vec<f64> = xs
            .iter()
            .zip(av.iter().zip(bv))
            .map(|(&x, (&a, &b))| beta_log_density(a, b, x))
            .collect();
        let n = value.len();
        Ok(self.push(
            Op::BetaLogProb {
                alpha: ai,
                beta: bi,
                x: xs,
            },
            n,
            1,
            value,
        ))
    }

    /// Elementwise differential entropy of `Beta(alpha, beta)`.
    pub fn beta_entropy(&mut self, alpha: Var, beta: Var) -> Result<Var> {
        let (ai, bi) = self.same_len(alpha, beta)?;
        let value: Vec<f64> = self.nodes[ai]
            .value
            .iter()
            .zip(&self.nodes[bi].value)
            .map(|(&a, &b)| beta_entropy(a, b))
            .collect();
        let n = value.len();
        Ok(self.push(
            Op::BetaEntropy {
                alpha: ai,
                beta: bi,
            },
            n,
            1,
            value,
        ))
    }

    /// Propagates d(loss)/d(node) back through the tape and adds the parameter
    /// gradients into `store`. Calling twice without zeroing accumulates.
    pub fn backward(&self, loss: Var, store: &mut ParameterStore) -> Result<Gradients> {
        let li = self.index(loss)?;
        if self.nodes[li].value.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "loss must be scalar, has {} components",
                self.nodes[li].value.len()
            )));
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        grads[li] = vec![1.0];

        for i in (0..=li).rev() {
            let g = std::mem::take(&mut grads[i]);
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let p = store.get_mut(*id);
                    if p.grad.len() != g.len() {
                        return Err(Error::ShapeMismatch(format!(
                            "parameter {} changed shape since it was bound",
                            p.name
                        )));
                    }
                    p.grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                }
                &Op::Linear { x, w, b } => {
                    let cols = self.nodes[w].cols;
                    let xv = &self.nodes[x].value;
                    let wv = &self.nodes[w].value;
                    {
                        let gw = slot(&mut grads, w, wv.len());
                        for (r, gr) in g.iter().enumerate() {
                            for (c, xc) in xv.iter().enumerate() {
                                gw[r * cols + c] += gr * xc;
                            }
                        }
                    }
                    {
                        let gx = slot(&mut grads, x, cols);
                        for (r, gr) in g.iter().enumerate() {
                            for (c, gxc) in gx.iter_mut().enumerate() {
                                *gxc += wv[r * cols + c] * gr;
                            }
                        }
                    }
                    add_into(slot(&mut grads, b, g.len()), &g);
                }
                &Op::Add(a, b) => {
                    add_into(slot(&mut grads, a, g.len()), &g);
                    add_into(slot(&mut grads, b, g.len()), &g);
                }
                &Op::Sub(a, b) => {
                    add_into(slot(&mut grads, a, g.len()), &g);
                    let gb = slot(&mut grads, b, g.len());
                    gb.iter_mut().zip(&g).for_each(|(s, d)| *s -= d);
                }
                &Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
                    let ga = slot(&mut grads, a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * bv[k];
                    }
                    let gb = slot(&mut grads, b, g.len());
                    for k in 0..g.len() {
                        gb[k] += g[k] * av[k];
                    }
                }
                &Op::Scale(a, c) => {
                    let ga = slot(&mut grads, a, g.len());
                    ga.iter_mut().zip(&g).for_each(|(s, d)| *s += c * d);
                }
                &Op::Offset(a) => add_into(slot(&mut grads, a, g.len()), &g),
                &Op::Relu(a) => {
                    let av = &self.nodes[a].value;
                    let ga = slot(&mut grads, a, g.len());
                    for k in 0..g.len() {
                        if av[k] > 0.0 {
                            ga[k] += g[k];
                        }
                    }
                }
                &Op::Softmax(a) => {
                    let p = &node.value;
                    let dot: f64 = p.iter().zip(&g).map(|(p, g)| p * g).sum();
                    let ga = slot(&mut grads, a, g.len());
                    for k in 0..g.len() {
                        ga[k] += p[k] * (g[k] - dot);
                    }
                }
                &Op::Softplus(a) => {
                    let av = &self.nodes[a].value;
                    let ga = slot(&mut grads, a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * sigmoid(av[k]);
                    }
                }
                &Op::Sum(a) => {
                    let n = self.nodes[a].value.len();
                    slot(&mut grads, a, n).iter_mut().for_each(|s| *s += g[0]);
                }
                &Op::Pick(a, k) => {
                    let n = self.nodes[a].value.len();
                    slot(&mut grads, a, n)[k] += g[0];
                }
                &Op::LogPick(a, k) => {
                    let p = self.nodes[a].value[k].max(f64::MIN_POSITIVE);
                    let n = self.nodes[a].value.len();
                    slot(&mut grads, a, n)[k] += g[0] / p;
                }
                &Op::Entropy(a) => {
                    let pv = &self.nodes[a].value;
                    let ga = slot(&mut grads, a, pv.len());
                    for (s, &p) in ga.iter_mut().zip(pv) {
                        if p > 0.0 {
                            *s -= g[0] * (p.ln() + 1.0);
                        }
                    }
                }
                Op::BetaLogProb { alpha, beta, x } => {
                    let (av, bv) = (&self.nodes[*alpha].value, &self.nodes[*beta].value);
                    let mut da = vec![0.0; g.len()];
                    let mut db = vec![0.0; g.len()];
                    for k in 0..g.len() {
                        let psi_ab = digamma(av[k] + bv[k]);
                        da[k] = g[k] * (x[k].ln() - digamma(av[k]) + psi_ab);
                        db[k] = g[k] * ((1.0 - x[k]).ln() - digamma(bv[k]) + psi_ab);
                    }
                    add_into(slot(&mut grads, *alpha, g.len()), &da);
                    add_into(slot(&mut grads, *beta, g.len()), &db);
                }
                &Op::BetaEntropy { alpha, beta } => {
                    let (av, bv) = (&self.nodes[alpha].value, &self.nodes[beta].value);
                    let mut da = vec![0.0; g.len()];
                    let mut db = vec![0.0; g.len()];
                    for k in 0..g.len() {
                        let (a, b) = (av[k], bv[k]);
                        let t_ab = (a + b - 2.0) * trigamma(a + b);
                        da[k] = g[k] * (t_ab - (a - 1.0) * trigamma(a));
                        db[k] = g[k] * (t_ab - (b - 1.0) * trigamma(b));
                    }
                    add_into(slot(&mut grads, alpha, g.len()), &da);
                    add_into(slot(&mut grads, beta, g.len()), &db);
                }
            }
            grads[i] = g;
        }

        Ok(Gradients {
            tape: self.id,
            grads,
            lens: self.nodes.iter().map(|n| n.value.len()).collect(),
        })
    }
}

fn slot(grads: &mut [Vec<f64>], i: usize, len: usize) -> &mut Vec<f64> {
    if grads[i].is_empty() {
        grads[i] = vec![0.0; len];
    }
    &mut grads[i]
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// Max-subtracted softmax.
pub fn softmax_values(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
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

/// `ln Beta(x; a, b)` without clamping.
pub fn beta_log_density(a: f64, b: f64, x: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

pub fn beta_entropy(a: f64, b: f64) -> f64 {
    ln_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b)
}
