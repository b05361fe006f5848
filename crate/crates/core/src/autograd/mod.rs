//! Reverse-mode differentiation over the geometric and layer primitives,
//! plus the optimizers that consume its gradients.
//!
//! Any function written against [`Real`](crate::scalar::Real) can be
//! differentiated: instantiate it with [`Var`] while a [`Tape`] is active.

mod check;
mod optim;
mod params;
mod tape;

pub use check::{finite_diff_check, grad, FdEntry, FdReport, ScalarLoss};
pub use optim::{adam_step, rgd_step, AdamConfig};
pub use params::{Gradients, Leaves, Param, ParamStore};
pub use tape::{scope, Adjoints, ScopeGuard, Tape, Var};
