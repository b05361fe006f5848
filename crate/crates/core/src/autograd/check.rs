use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::rng;
use crate::scalar::Real;

use super::params::{Gradients, Leaves, ParamStore};
use super::tape::Tape;

/// A scalar objective over the leaves of a [`ParamStore`], evaluable both
/// in plain floats and on the tape.
pub trait ScalarLoss {
    fn eval<T: Real>(&self, params: &Leaves<T>) -> Result<T>;
}

/// Exact reverse-mode gradient of `loss` with respect to every leaf.
pub fn grad<L: ScalarLoss + ?Sized>(loss: &L, store: &ParamStore) -> Result<(f64, Gradients)> {
    let tape = Tape::new();
    let leaves = store.track(&tape);
    let out = loss.eval(&leaves)?;
    let adjoints = tape.gradient(out)?;
    Ok((out.value(), leaves.gradients(&adjoints)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdEntry {
    pub path: String,
    /// `‖fd − ad‖ / max(‖fd‖, ‖ad‖)` over the sampled directions.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Worst single-direction relative error.
    pub max_dir_rel_error: f64,
}

/// Per-leaf agreement between reverse-mode and central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
}

impl FdReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }
}

/// Directional derivatives below this magnitude are compared absolutely.
const FD_FLOOR: f64 = 1e-8;

/// Compare `grad` against central differences `(f(θ+hu) − f(θ−hu)) / 2h`
/// along `dirs` random unit directions per leaf. A leaf's error is taken over
/// the vector of its directional derivatives, so a direction nearly
/// orthogonal to a tiny gradient does not amplify round-off.
pub fn finite_diff_check<L: ScalarLoss + ?Sized>(
    loss: &L,
    store: &ParamStore,
    h: f64,
    dirs: usize,
    seed: u64,
) -> Result<FdReport> {
    assert!(h > 0.0, "step must be positive");
    let (_, gradients) = grad(loss, store)?;
    let mut rng = rng::stream(seed, rng::streams::FINITE_DIFF);
    let mut entries = Vec::new();
    for (path, param) in &store.params {
        let g = gradients.get(path).expect("every leaf has a gradient");
        let mut fds = Vec::with_capacity(dirs);
        let mut ads = Vec::with_capacity(dirs);
        for _ in 0..dirs {
            let mut u: Vec<f64> = (0..param.data.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 {
                continue;
            }
            u.iter_mut().for_each(|x| *x /= n);
            let eval_at = |sign: f64| -> Result<f64> {
                let mut s = store.clone();
                let p = s.get_mut(path)?;
                for (d, ui) in p.data.iter_mut().zip(&u) {
                    *d += sign * h * ui;
                }
                loss.eval::<f64>(&s.values())
            };
            let fd = (eval_at(1.0)? - eval_at(-1.0)?) / (2.0 * h);
            let ad: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
            fds.push(fd);
            ads.push(ad);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let err: Vec<f64> = fds.iter().zip(&ads).map(|(f, a)| f - a).collect();
        let max_dir_rel_error = fds
            .iter()
            .zip(&ads)
            .map(|(f, a)| (f - a).abs() / f.abs().max(a.abs()).max(FD_FLOOR))
            .fold(0.0, f64::max);
        entries.push(FdEntry {
            path: path.clone(),
            max_rel_error: norm(&err) / norm(&fds).max(norm(&ads)).max(FD_FLOOR),
            max_abs_error: err.iter().fold(0.0, |m, e| m.max(e.abs())),
            max_dir_rel_error,
        });
    }
    Ok(FdReport { entries })
}
