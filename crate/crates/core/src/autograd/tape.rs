//! Thread-local reverse-mode tape.
//!
//! A [`Tape`] owns the recording for one forward pass on the current thread.
//! Every operation on tracked [`Var`]s appends a node holding the local
//! partial derivatives with respect to its parents; [`Tape::gradient`] then
//! sweeps the nodes once in reverse creation order, which is a reverse
//! topological order by construction.

use std::cell::RefCell;
use std::collections::HashMap;
use std::marker::PhantomData;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{acosh1p_derivative, acosh1p_value, sigmoid_value, Real};

const CONST: u32 = u32::MAX;

/// Primitive tags, reported when the backward pass hits a non-finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sqrt,
    Exp,
    Ln,
    Cosh,
    Sinh,
    Tanh,
    Sigmoid,
    Relu,
    Acosh1p,
    Dot,
    Sum,
}

impl Op {
    fn name(self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Sqrt => "sqrt",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Cosh => "cosh",
            Op::Sinh => "sinh",
            Op::Tanh => "tanh",
            Op::Sigmoid => "sigmoid",
            Op::Relu => "relu",
            Op::Acosh1p => "acosh",
            Op::Dot => "dot",
            Op::Sum => "sum",
        }
    }
}

#[derive(Clone, Copy)]
struct Node {
    start: u32,
    len: u32,
    op: Op,
    scope: u16,
}

struct Recording {
    generation: u32,
    nodes: Vec<Node>,
    parents: Vec<u32>,
    partials: Vec<f64>,
    scope_paths: Vec<String>,
    scope_index: HashMap<String, u16>,
    scope: u16,
}

impl Recording {
    fn new(generation: u32) -> Self {
        let mut scope_index = HashMap::new();
        scope_index.insert(String::new(), 0);
        Self {
            generation,
            nodes: Vec::with_capacity(1 << 16),
            parents: Vec::with_capacity(1 << 17),
            partials: Vec::with_capacity(1 << 17),
            scope_paths: vec![String::new()],
            scope_index,
            scope: 0,
        }
    }

    #[inline]
    fn push(&mut self, op: Op, parents: impl Iterator<Item = (u32, f64)>) -> u32 {
        let start = self.parents.len() as u32;
        for (p, w) in parents {
            self.parents.push(p);
            self.partials.push(w);
        }
        let len = self.parents.len() as u32 - start;
        let idx = self.nodes.len() as u32;
        assert!(idx < CONST, "tape overflow");
        self.nodes.push(Node {
            start,
            len,
            op,
            scope: self.scope,
        });
        idx
    }
}

thread_local! {
    static ACTIVE: RefCell<Option<Recording>> = const { RefCell::new(None) };
    static GENERATION: RefCell<u32> = const { RefCell::new(0) };
}

/// A differentiable scalar. Constants carry no tape index.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    val: f64,
    idx: u32,
    generation: u32,
}

impl Var {
    pub fn constant(val: f64) -> Self {
        Self {
            val,
            idx: CONST,
            generation: 0,
        }
    }

    pub fn is_tracked(&self) -> bool {
        self.idx != CONST
    }

    #[inline]
    fn record(val: f64, op: Op, parents: &[(Var, f64)]) -> Var {
        if parents.iter().all(|(p, _)| !p.is_tracked()) {
            return Var::constant(val);
        }
        ACTIVE.with(|cell| {
            let mut guard = cell.borrow_mut();
            let rec = guard.as_mut().expect("tracked variable used with no active tape");
            let generation = rec.generation;
            let idx = rec.push(
                op,
                parents.iter().filter(|(p, _)| p.is_tracked()).map(|(p, w)| {
                    assert_eq!(p.generation, generation, "variable from a stale tape");
                    (p.idx, *w)
                }),
            );
            Var { val, idx, generation }
        })
    }

    fn record_many(val: f64, op: Op, parents: impl Iterator<Item = (Var, f64)> + Clone) -> Var {
        if parents.clone().all(|(p, _)| !p.is_tracked()) {
            return Var::constant(val);
        }
        ACTIVE.with(|cell| {
            let mut guard = cell.borrow_mut();
            let rec = guard.as_mut().expect("tracked variable used with no active tape");
            let generation = rec.generation;
            let idx = rec.push(
                op,
                parents.filter(|(p, _)| p.is_tracked()).map(|(p, w)| {
                    assert_eq!(p.generation, generation, "variable from a stale tape");
                    (p.idx, w)
                }),
            );
            Var { val, idx, generation }
        })
    }

    #[inline]
    fn unary(self, val: f64, op: Op, d: f64) -> Var {
        if !self.is_tracked() {
            return Var::constant(val);
        }
        Var::record(val, op, &[(self, d)])
    }
}

impl Add for Var {
    type Output = Var;
    #[inline]
    fn add(self, rhs: Var) -> Var {
        Var::record(self.val + rhs.val, Op::Add, &[(self, 1.0), (rhs, 1.0)])
    }
}

impl Sub for Var {
    type Output = Var;
    #[inline]
    fn sub(self, rhs: Var) -> Var {
        Var::record(self.val - rhs.val, Op::Sub, &[(self, 1.0), (rhs, -1.0)])
    }
}

impl Mul for Var {
    type Output = Var;
    #[inline]
    fn mul(self, rhs: Var) -> Var {
        Var::record(self.val * rhs.val, Op::Mul, &[(self, rhs.val), (rhs, self.val)])
    }
}

impl Div for Var {
    type Output = Var;
    #[inline]
    fn div(self, rhs: Var) -> Var {
        let q = self.val / rhs.val;
        Var::record(q, Op::Div, &[(self, 1.0 / rhs.val), (rhs, -q / rhs.val)])
    }
}

impl Neg for Var {
    type Output = Var;
    #[inline]
    fn neg(self) -> Var {
        self.unary(-self.val, Op::Neg, -1.0)
    }
}

impl Real for Var {
    #[inline]
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }

    #[inline]
    fn value(self) -> f64 {
        self.val
    }

    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, Op::Sqrt, 0.5 / s)
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, Op::Exp, e)
    }

    fn ln(self) -> Self {
        self.unary(self.val.ln(), Op::Ln, 1.0 / self.val)
    }

    fn cosh(self) -> Self {
        self.unary(self.val.cosh(), Op::Cosh, self.val.sinh())
    }

    fn sinh(self) -> Self {
        self.unary(self.val.sinh(), Op::Sinh, self.val.cosh())
    }

    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, Op::Tanh, 1.0 - t * t)
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid_value(self.val);
        self.unary(s, Op::Sigmoid, s * (1.0 - s))
    }

    fn relu(self) -> Self {
        if self.val > 0.0 {
            self.unary(self.val, Op::Relu, 1.0)
        } else {
            self.unary(0.0, Op::Relu, 0.0)
        }
    }

    fn acosh1p(self) -> Self {
        self.unary(acosh1p_value(self.val), Op::Acosh1p, acosh1p_derivative(self.val))
    }

    fn scale(self, c: f64) -> Self {
        self.unary(self.val * c, Op::Mul, c)
    }

    fn square(self) -> Self {
        self.unary(self.val * self.val, Op::Mul, 2.0 * self.val)
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let mut val = 0.0;
        for (x, y) in a.iter().zip(b) {
            val += x.val * y.val;
        }
        let lhs = a.iter().zip(b).map(|(x, y)| (*x, y.val));
        let rhs = b.iter().zip(a).map(|(y, x)| (*y, x.val));
        Var::record_many(val, Op::Dot, lhs.chain(rhs))
    }

    fn sum(a: &[Self]) -> Self {
        let mut val = 0.0;
        for x in a {
            val += x.val;
        }
        Var::record_many(val, Op::Sum, a.iter().map(|x| (*x, 1.0)))
    }
}

/// Adjoints of every node recorded on a tape, produced by [`Tape::gradient`].
pub struct Adjoints {
    adjoints: Vec<f64>,
    generation: u32,
}

impl Adjoints {
    /// d(output)/d(v). Constants have zero gradient.
    pub fn wrt(&self, v: Var) -> f64 {
        if !v.is_tracked() {
            return 0.0;
        }
        assert_eq!(v.generation, self.generation, "variable from another tape");
        self.adjoints[v.idx as usize]
    }
}

/// Handle on the active recording for the current thread.
///
/// Only one tape may be active per thread; it is released on drop.
pub struct Tape {
    generation: u32,
    _not_send: PhantomData<*const ()>,
}

impl Tape {
    /// Start recording. Panics if the thread already has an active tape.
    pub fn new() -> Self {
        let generation = GENERATION.with(|g| {
            let mut g = g.borrow_mut();
            *g = g.wrapping_add(1).max(1);
            *g
        });
        ACTIVE.with(|cell| {
            let mut guard = cell.borrow_mut();
            assert!(guard.is_none(), "a tape is already active on this thread");
            *guard = Some(Recording::new(generation));
        });
        Self {
            generation,
            _not_send: PhantomData,
        }
    }

    /// Register a differentiable input.
    pub fn var(&self, val: f64) -> Var {
        ACTIVE.with(|cell| {
            let mut guard = cell.borrow_mut();
            let rec = guard.as_mut().expect("tape not active");
            let idx = rec.push(Op::Leaf, std::iter::empty());
            Var {
                val,
                idx,
                generation: self.generation,
            }
        })
    }

    pub fn len(&self) -> usize {
        ACTIVE.with(|cell| cell.borrow().as_ref().map_or(0, |r| r.nodes.len()))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reverse sweep from `output`, seeded with adjoint `seed`.
    pub fn gradient_seeded(&self, output: Var, seed: f64) -> Result<Adjoints> {
        ACTIVE.with(|cell| {
            let guard = cell.borrow();
            let rec = guard.as_ref().expect("tape not active");
            let mut adjoints = vec![0.0; rec.nodes.len()];
            if !output.is_tracked() {
                return Ok(Adjoints {
                    adjoints,
                    generation: self.generation,
                });
            }
            assert_eq!(output.generation, self.generation);
            adjoints[output.idx as usize] = seed;
            for i in (0..=output.idx as usize).rev() {
                let a = adjoints[i];
                if a == 0.0 {
                    continue;
                }
                let node = rec.nodes[i];
                if !a.is_finite() {
                    return Err(Error::NumericFailure {
                        op: node.op.name(),
                        scope: rec.scope_paths[node.scope as usize].clone(),
                    });
                }
                let (s, e) = (node.start as usize, (node.start + node.len) as usize);
                for (p, w) in rec.parents[s..e].iter().zip(&rec.partials[s..e]) {
                    let contrib = a * w;
                    if !contrib.is_finite() {
                        return Err(Error::NumericFailure {
                            op: node.op.name(),
                            scope: rec.scope_paths[node.scope as usize].clone(),
                        });
                    }
                    adjoints[*p as usize] += contrib;
                }
            }
            Ok(Adjoints {
                adjoints,
                generation: self.generation,
            })
        })
    }

    pub fn gradient(&self, output: Var) -> Result<Adjoints> {
        self.gradient_seeded(output, 1.0)
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for Tape {
    fn drop(&mut self) {
        ACTIVE.with(|cell| cell.borrow_mut().take());
    }
}

/// Label nodes recorded while the guard lives. No-op without an active tape.
pub struct ScopeGuard {
    previous: Option<u16>,
}

pub fn scope(name: &str) -> ScopeGuard {
    let previous = ACTIVE.with(|cell| {
        let mut guard = cell.borrow_mut();
        let rec = guard.as_mut()?;
        let prev = rec.scope;
        let parent = &rec.scope_paths[prev as usize];
        let path = if parent.is_empty() {
            name.to_string()
        } else {
            format!("{parent}/{name}")
        };
        let next = match rec.scope_index.get(&path) {
            Some(&i) => i,
            None => {
                let i = rec.scope_paths.len() as u16;
                rec.scope_paths.push(path.clone());
                rec.scope_index.insert(path, i);
                i
            }
        };
        rec.scope = next;
        Some(prev)
    });
    ScopeGuard { previous }
}

impl Drop for ScopeGuard {
    fn drop(&mut self) {
        if let Some(prev) = self.previous {
            ACTIVE.with(|cell| {
                if let Some(rec) = cell.borrow_mut().as_mut() {
                    rec.scope = prev;
                }
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = tape.var(-2.0);
        let z = x * x * y + y.exp();
        let g = tape.gradient(z).unwrap();
        assert_eq!(g.wrt(x), 2.0 * 3.0 * -2.0);
        assert!((g.wrt(y) - (9.0 + (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn constants_are_not_recorded() {
        let tape = Tape::new();
        let a = Var::constant(2.0) * Var::constant(5.0);
        assert!(!a.is_tracked());
        assert!(tape.is_empty());
    }

    #[test]
    fn fused_dot_and_sum() {
        let tape = Tape::new();
        let a: Vec<Var> = [1.0, 2.0, 3.0].iter().map(|&v| tape.var(v)).collect();
        let b = vec![Var::constant(4.0), tape.var(5.0), Var::constant(6.0)];
        let d = Var::dot(&a, &b) + Var::sum(&a);
        assert_eq!(d.value(), 4.0 + 10.0 + 18.0 + 6.0);
        let g = tape.gradient(d).unwrap();
        assert_eq!(g.wrt(a[0]), 5.0);
        assert_eq!(g.wrt(a[1]), 6.0);
        assert_eq!(g.wrt(b[1]), 2.0);
        assert_eq!(g.wrt(b[0]), 0.0);
    }

    #[test]
    fn non_finite_adjoint_names_op_and_scope() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let y = {
            let _s = scope("layer0");
            let _t = scope("inner");
            x.sqrt()
        };
        let err = tape.gradient(y).err().expect("sqrt at zero is singular");
        match err {
            Error::NumericFailure { op, scope } => {
                assert_eq!(op, "sqrt");
                assert_eq!(scope, "layer0/inner");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn seeding_scales_gradient_exactly() {
        let tape = Tape::new();
        let x = tape.var(0.7);
        let y = x.cosh() * x.sigmoid();
        let g1 = tape.gradient(y).unwrap().wrt(x);
        let g4 = tape.gradient_seeded(y, 4.0).unwrap().wrt(x);
        assert_eq!(4.0 * g1, g4);
        let g3 = tape.gradient_seeded(y, 3.0).unwrap().wrt(x);
        assert!((3.0 * g1 - g3).abs() <= 4.0 * f64::EPSILON * g3.abs());
    }
}
