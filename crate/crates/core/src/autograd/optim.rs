use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Lorentz, LorentzPoint, TangentVector};

use super::params::{Gradients, ParamStore};

/// Adam with bias correction and decoupled weight decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// One Adam step over every leaf of `store`, in path order.
#[allow(clippy::needless_range_loop)]
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    for (path, p) in &store.params {
        let found = grads.get(path).map(<[f64]>::len);
        if found != Some(p.data.len()) {
            return Err(Error::ShapeMismatch {
                path: path.clone(),
                expected: p.shape.clone(),
                found: found.map(|n| vec![n]).unwrap_or_default(),
            });
        }
    }
    if let Some(extra) = grads.map.keys().find(|k| !store.params.contains_key(*k)) {
        return Err(Error::UnknownParameter(extra.clone()));
    }
    store.step += 1;
    let t = store.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (path, p) in store.params.iter_mut() {
        let g = grads.get(path).expect("checked above");
        for i in 0..p.data.len() {
            if cfg.weight_decay != 0.0 {
                p.data[i] -= cfg.lr * cfg.weight_decay * p.data[i];
            }
            let gi = g[i];
            p.first_moment[i] = cfg.beta1 * p.first_moment[i] + (1.0 - cfg.beta1) * gi;
            p.second_moment[i] = cfg.beta2 * p.second_moment[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = p.first_moment[i] / bc1;
            let v_hat = p.second_moment[i] / bc2;
            p.data[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Riemannian gradient step `exp_x(−lr · grad)`.
pub fn rgd_step(
    manifold: &Lorentz,
    point: &LorentzPoint<f64>,
    rgrad: &TangentVector<f64>,
    lr: f64,
) -> Result<LorentzPoint<f64>> {
    if rgrad.base != *point {
        return Err(Error::InvariantViolation(
            "gradient is not based at the point being updated".into(),
        ));
    }
    manifold.exp_map(&rgrad.scaled(-lr))
}
