//! Kernel-point placement.
//!
//! `K` points near the origin of 𝕃^m are placed by minimizing
//!
//! ```text
//! L(x̃) = Σ_k Σ_{l≠k} 1 / d(x̃_l, x̃_k) + Σ_k d(o, x̃_k)
//! ```
//!
//! with Riemannian gradient descent. The first term pushes the points apart,
//! the second keeps them close to the origin, where distance gradients do not
//! vanish (see [`gradient_decay_experiment`]).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{
    inner, CovarianceFactor, Lorentz, LorentzPoint, ManifoldConfig, TangentVector, WrappedNormalParams,
};
use crate::rng;
use crate::scalar::Real;
use crate::Point;

/// Pairs closer than this make the repulsion term undefined.
const COINCIDENT: f64 = 1e-12;
/// Separation below which the solver jitters a point.
const MIN_SEPARATION: f64 = 1e-6;
const JITTER_SCALE: f64 = 1e-3;
const DIVERGENCE_LOSS: f64 = 1e6;
/// Later iterates win ties in the best-iterate record up to rounding noise.
const BEST_SLACK: f64 = 1e-13;
/// Relative loss increase tolerated when recentring a solution.
const RECENTRE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Optimized,
    RandomWrappedNormal,
    Loaded,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Optimized => "optimized",
            Provenance::RandomWrappedNormal => "random_wrapped_normal",
            Provenance::Loaded => "loaded",
        }
    }
}

/// `K` fixed points in 𝕃^m.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSet {
    points: Vec<Point>,
    cfg: ManifoldConfig,
    provenance: Provenance,
}

impl KernelSet {
    /// Validate and wrap: every point on the manifold, pairwise distinct,
    /// at least two points for optimized sets.
    pub fn new(points: Vec<Point>, cfg: ManifoldConfig, provenance: Provenance) -> Result<Self> {
        let m = Lorentz::new(cfg)?;
        if points.is_empty() {
            return Err(Error::Validation("kernel set is empty".into()));
        }
        if provenance == Provenance::Optimized && points.len() < 2 {
            return Err(Error::Validation("optimized kernels need K >= 2".into()));
        }
        for p in &points {
            m.check_point(p)?;
        }
        if let Some((i, j)) = closest_pair(&m, &points)
            .filter(|&(_, _, d)| d <= 0.0)
            .map(|(i, j, _)| (i, j))
        {
            return Err(Error::DegenerateKernels(i, j));
        }
        Ok(Self {
            points,
            cfg,
            provenance,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim
    }

    pub fn config(&self) -> &ManifoldConfig {
        &self.cfg
    }

    pub fn manifold(&self) -> Lorentz {
        Lorentz::new(self.cfg).expect("validated on construction")
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn to_file(&self) -> KernelFile {
        KernelFile {
            curvature: self.cfg.curvature,
            dim: self.cfg.dim,
            k: self.points.len(),
            provenance: self.provenance,
            points: self.points.iter().map(|p| p.coords().to_vec()).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    /// Parse and re-validate a kernel file.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: KernelFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn from_file(file: KernelFile) -> Result<Self> {
        if file.points.len() != file.k {
            return Err(Error::Validation(format!(
                "K = {} but {} points listed",
                file.k,
                file.points.len()
            )));
        }
        let cfg = ManifoldConfig::new(file.curvature, file.dim)?;
        let m = Lorentz::new(cfg)?;
        let points = file
            .points
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                m.point(c)
                    .map_err(|e| Error::Validation(format!("kernel point {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, cfg, file.provenance)
    }

    /// Pairwise distances, sorted ascending.
    pub fn sorted_pairwise_distances(&self) -> Vec<f64> {
        let m = self.manifold();
        let mut d = Vec::new();
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                d.push(m.distance(&self.points[i], &self.points[j]));
            }
        }
        d.sort_by(f64::total_cmp);
        d
    }
}

/// On-disk kernel format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    #[serde(with = "crate::serde_f64")]
    pub curvature: f64,
    pub dim: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub provenance: Provenance,
    #[serde(with = "crate::serde_f64::vecvec")]
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_iters: 200_000,
            grad_tol: 1e-6,
            seed: 0,
            init_scale: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.max_iters == 0 || !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate, max_iters and grad_tol must be positive".into(),
            ));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::InvalidConfig("init_scale must be positive".into()));
        }
        Ok(())
    }
}

fn closest_pair(m: &Lorentz, points: &[Point]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = m.distance(&points[i], &points[j]);
            if best.is_none_or(|(_, _, b)| d < b) {
                best = Some((i, j, d));
            }
        }
    }
    best
}

/// Loss over raw points; see the module docs. Ordered pairs are counted
/// separately, so each unordered pair contributes twice to the first term.
pub fn kernel_loss_points(m: &Lorentz, points: &[Point]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Validation("kernel loss needs at least two points".into()));
    }
    let o = m.origin::<f64>();
    let mut repulsion = 0.0;
    for k in 0..points.len() {
        for l in 0..points.len() {
            if l == k {
                continue;
            }
            let d = m.distance(&points[l], &points[k]);
            if d < COINCIDENT {
                return Err(Error::DegenerateKernels(k.min(l), k.max(l)));
            }
            repulsion += 1.0 / d;
        }
    }
    let anchor: f64 = points.iter().map(|p| m.distance(&o, p)).sum();
    Ok(repulsion + anchor)
}

pub fn kernel_loss(kernels: &KernelSet) -> Result<f64> {
    kernel_loss_points(&kernels.manifold(), &kernels.points)
}

/// `δ(a, x) = −κ⟨a − x, a − x⟩_𝓛 / 2` without allocating.
fn delta_f64(kappa: f64, a: &[f64], x: &[f64]) -> f64 {
    let t = a[0] - x[0];
    let s: f64 = a[1..].iter().zip(&x[1..]).map(|(p, q)| (p - q) * (p - q)).sum();
    -0.5 * kappa * (s - t * t)
}

fn distance_f64(m: &Lorentz, a: &Point, x: &Point) -> f64 {
    delta_f64(m.curvature(), a.coords(), x.coords()).acosh1p() / (-m.curvature()).sqrt()
}

/// Add `w · ∂d(a, x)/∂x` (ambient coordinates) to `g`.
fn add_distance_gradient(m: &Lorentz, a: &Point, x: &Point, w: f64, g: &mut [f64]) {
    let kappa = m.curvature();
    let delta = delta_f64(kappa, a.coords(), x.coords());
    if delta <= 0.0 {
        return;
    }
    // d = acosh(ψ)/sqrt(−κ), ψ = κ⟨a, x⟩, ∂ψ/∂x = κ 𝔤a, sqrt(ψ² − 1) = sqrt(δ(2 + δ)).
    let c = w * kappa / ((-kappa).sqrt() * (delta * (delta + 2.0)).sqrt());
    for (i, (gi, &ai)) in g.iter_mut().zip(a.coords()).enumerate() {
        *gi += if i == 0 { -c * ai } else { c * ai };
    }
}

/// Ambient (Euclidean) gradient of the loss with respect to the coordinates
/// of point `k`. `with_anchor = false` keeps only the repulsion term.
pub fn euclidean_grad(m: &Lorentz, points: &[Point], k: usize, with_anchor: bool) -> Vec<f64> {
    let n = points[k].coords().len();
    let mut g = vec![0.0; n];
    for (l, p) in points.iter().enumerate() {
        if l == k {
            continue;
        }
        let d = m.distance(p, &points[k]);
        if d <= 0.0 {
            continue;
        }
        // both ordered pairs (k, l) and (l, k) depend on x_k
        add_distance_gradient(m, p, &points[k], -2.0 / (d * d), &mut g);
    }
    if with_anchor {
        add_distance_gradient(m, &m.origin(), &points[k], 1.0, &mut g);
    }
    g
}

/// Riemannian gradient: raise the index with 𝔤⁻¹ (negate the time entry),
/// then project onto the tangent space at the point.
pub fn riemannian_from_euclidean(m: &Lorentz, x: &Point, mut g: Vec<f64>) -> TangentVector<f64> {
    g[0] = -g[0];
    m.to_tangent(x, &g)
}

fn riemannian_grad_points(m: &Lorentz, points: &[Point], k: usize, with_anchor: bool) -> TangentVector<f64> {
    riemannian_from_euclidean(m, &points[k], euclidean_grad(m, points, k, with_anchor))
}

/// Riemannian gradient of [`kernel_loss`] at kernel `k`.
pub fn riemannian_grad(kernels: &KernelSet, k: usize) -> TangentVector<f64> {
    riemannian_grad_points(&kernels.manifold(), &kernels.points, k, true)
}

/// One line of the solver's convergence log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub kernels: KernelSet,
    pub loss: f64,
    /// Largest per-point Riemannian gradient norm at the returned iterate.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<ConvergenceRecord>,
}

impl SolveReport {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,loss,grad_norm\n");
        for r in &self.history {
            let _ = writeln!(out, "{},{:.17e},{:.17e}", r.iter, r.loss, r.grad_norm);
        }
        out
    }
}

/// Pairwise distances, row-major `K × K`.
fn pairwise(m: &Lorentz, points: &[Point]) -> Vec<f64> {
    let k = points.len();
    let mut d = vec![0.0; k * k];
    for j in 1..k {
        for i in 0..j {
            let v = distance_f64(m, &points[i], &points[j]);
            d[i * k + j] = v;
            d[j * k + i] = v;
        }
    }
    d
}

fn loss_from(m: &Lorentz, points: &[Point], dist: &[f64]) -> Result<f64> {
    let k = points.len();
    let o = m.origin::<f64>();
    let mut repulsion = 0.0;
    for i in 0..k {
        for l in 0..k {
            if l == i {
                continue;
            }
            let d = dist[l * k + i];
            if d < COINCIDENT {
                return Err(Error::DegenerateKernels(i.min(l), i.max(l)));
            }
            repulsion += 1.0 / d;
        }
    }
    let anchor: f64 = points.iter().map(|p| distance_f64(m, &o, p)).sum();
    Ok(repulsion + anchor)
}

/// Riemannian gradients of the repulsion term at every kernel.
fn repulsion_grads(m: &Lorentz, points: &[Point], dist: &[f64]) -> Vec<TangentVector<f64>> {
    let k = points.len();
    (0..k)
        .map(|i| {
            let mut g = vec![0.0; m.dim() + 1];
            for (l, p) in points.iter().enumerate() {
                let d = dist[l * k + i];
                if l == i || d <= 0.0 {
                    continue;
                }
                add_distance_gradient(m, p, &points[i], -2.0 / (d * d), &mut g);
            }
            riemannian_from_euclidean(m, &points[i], g)
        })
        .collect()
}

/// Norm of the minimal-norm Riemannian subgradient at each kernel, given the
/// repulsion gradients.
///
/// Away from the origin this is the ordinary gradient norm. A kernel sitting
/// exactly at the origin sees the anchor term as a cone whose subdifferential
/// is the unit ball, so only the excess of the repulsion gradient counts.
fn max_stationarity(m: &Lorentz, points: &[Point], rep: &[TangentVector<f64>]) -> f64 {
    let o = m.origin();
    points
        .iter()
        .zip(rep)
        .map(|(x, g)| {
            if m.distance(&o, x) == 0.0 {
                (g.norm() - 1.0).max(0.0)
            } else {
                let mut e = vec![0.0; x.coords().len()];
                add_distance_gradient(m, &o, x, 1.0, &mut e);
                let a = riemannian_from_euclidean(m, x, e);
                let vec = g.vec.iter().zip(&a.vec).map(|(p, q)| p + q).collect();
                TangentVector::new(x.clone(), vec).norm()
            }
        })
        .fold(0.0, f64::max)
}

fn max_grad_norm(m: &Lorentz, points: &[Point]) -> f64 {
    let dist = pairwise(m, points);
    max_stationarity(m, points, &repulsion_grads(m, points, &dist))
}

/// One solver step for a single kernel: a Riemannian gradient step on the
/// repulsion term, then the proximal step of the anchor term, which moves the
/// point `lr` along the geodesic towards the origin and stops there.
fn solver_step(m: &Lorentz, g: &TangentVector<f64>, lr: f64) -> Result<Point> {
    let y = m.exp_map(&g.scaled(-lr))?;
    // on the geodesic from o, sinh(sqrt(−κ) d(o, y)) = sqrt(−κ) ‖y_s‖
    let sk = (-m.curvature()).sqrt();
    let norm = y.spatial().iter().map(|v| v * v).sum::<f64>().sqrt();
    let d = (sk * norm).asinh() / sk;
    if d <= lr {
        return Ok(m.origin());
    }
    let ratio = (sk * (d - lr)).sinh() / (sk * norm);
    m.project(&y.spatial().iter().map(|v| v * ratio).collect::<Vec<_>>())
}

/// Iterations between convergence-log records.
const LOG_EVERY: usize = 1000;

/// Minimize the kernel loss from a wrapped-normal start.
///
/// Deterministic given `solver.seed`. Returns the iterate with the lowest loss.
pub fn solve_kernels(k: usize, dim: usize, solver: &SolverConfig, cfg: &ManifoldConfig) -> Result<SolveReport> {
    if k < 2 {
        return Err(Error::InvalidConfig("kernel solver needs K >= 2".into()));
    }
    solver.validate()?;
    let cfg = ManifoldConfig { dim, ..*cfg };
    let m = Lorentz::new(cfg)?;

    let o = m.origin::<f64>();
    let init =
        CovarianceFactor::new(&WrappedNormalParams::isotropic(o.clone(), solver.init_scale, solver.seed).covariance)?;
    let mut init_rng = rng::stream(solver.seed, rng::streams::KERNEL_INIT);
    let mut points = (0..k)
        .map(|_| m.sample_wrapped_normal_with(&o, &init, &mut init_rng))
        .collect::<Result<Vec<_>>>()?;
    let jitter =
        CovarianceFactor::new(&WrappedNormalParams::isotropic(o.clone(), JITTER_SCALE, solver.seed).covariance)?;
    let mut jitter_rng = rng::stream(solver.seed, rng::streams::KERNEL_JITTER);
    separate(&m, &mut points, &jitter, &mut jitter_rng)?;

    let mut dist = pairwise(&m, &points);
    let mut loss = loss_from(&m, &points, &dist)?;
    let mut best = (loss, points.clone());
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..solver.max_iters {
        let rep = repulsion_grads(&m, &points, &dist);
        let grad_norm = max_stationarity(&m, &points, &rep);
        if iter % LOG_EVERY == 0 {
            history.push(ConvergenceRecord { iter, loss, grad_norm });
        }
        if grad_norm <= solver.grad_tol {
            converged = true;
            iterations = iter;
            if iter % LOG_EVERY != 0 {
                history.push(ConvergenceRecord { iter, loss, grad_norm });
            }
            break;
        }
        points = rep
            .iter()
            .map(|g| solver_step(&m, g, solver.learning_rate))
            .collect::<Result<Vec<_>>>()?;
        debug_assert!(
            points.iter().all(|p| m.check_point(p).is_ok()),
            "solver iterate left the manifold"
        );
        dist = pairwise(&m, &points);
        if dist
            .iter()
            .enumerate()
            .any(|(i, &d)| i % (k + 1) != 0 && d < MIN_SEPARATION)
        {
            separate(&m, &mut points, &jitter, &mut jitter_rng)?;
            dist = pairwise(&m, &points);
        }
        loss = loss_from(&m, &points, &dist)?;
        iterations = iter + 1;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::SolverDiverged {
                iteration: iterations,
                loss,
            });
        }
        if loss <= best.0 + BEST_SLACK * best.0.abs() {
            best = (loss, points.clone());
        }
    }

    let (mut best_loss, mut best_points) = best;
    let mut grad_norm = max_grad_norm(&m, &best_points);
    // The loss is flat along some translations (an antipodal pair can slide
    // along its geodesic through the origin); among equal-loss solutions
    // prefer the one centred at the origin.
    let centred = recentre(&m, &best_points)?;
    let centred_loss = kernel_loss_points(&m, &centred)?;
    let centred_grad = max_grad_norm(&m, &centred);
    if centred_loss <= best_loss + RECENTRE_SLACK * best_loss && centred_grad <= grad_norm.max(solver.grad_tol) {
        best_loss = best_loss.min(centred_loss);
        best_points = centred;
        grad_norm = centred_grad;
    }
    if !converged {
        history.push(ConvergenceRecord {
            iter: iterations,
            loss: best_loss,
            grad_norm,
        });
    }
    Ok(SolveReport {
        kernels: KernelSet::new(best_points, cfg, Provenance::Optimized)?,
        loss: best_loss,
        grad_norm,
        iterations,
        converged,
        history,
    })
}

/// Translate the points so that their unweighted centroid is the origin.
fn recentre(m: &Lorentz, points: &[Point]) -> Result<Vec<Point>> {
    let mut sum = vec![0.0; m.dim() + 1];
    for p in points {
        sum.iter_mut().zip(p.coords()).for_each(|(s, x)| *s += x);
    }
    let scale = 1.0 / (m.curvature() * inner(&sum, &sum)).sqrt();
    let c = m.project(&sum[1..].iter().map(|s| s * scale).collect::<Vec<_>>())?;
    points.iter().map(|p| m.ominus(p, &c)).collect()
}

/// Minimum-separation guard: jitter the later point of any pair closer than
/// [`MIN_SEPARATION`].
fn separate(m: &Lorentz, points: &mut [Point], jitter: &CovarianceFactor, rng: &mut rng::Rng) -> Result<()> {
    for j in 1..points.len() {
        for i in 0..j {
            while m.distance(&points[i], &points[j]) < MIN_SEPARATION {
                points[j] = m.sample_wrapped_normal_with(&points[j].clone(), jitter, rng)?;
            }
        }
    }
    Ok(())
}

/// `K` i.i.d. draws from the wrapped normal centred at the origin with unit
/// covariance.
pub fn random_kernels(k: usize, dim: usize, seed: u64, cfg: &ManifoldConfig) -> Result<KernelSet> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be positive".into()));
    }
    let cfg = ManifoldConfig { dim, ..*cfg };
    let m = Lorentz::new(cfg)?;
    let o = m.origin::<f64>();
    let factor = WrappedNormalParams::isotropic(o.clone(), 1.0, seed).factor()?;
    let mut rng = rng::stream(seed, rng::streams::RANDOM_KERNELS);
    let points = (0..k)
        .map(|_| m.sample_wrapped_normal_with(&o, &factor, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    KernelSet::new(points, cfg, Provenance::RandomWrappedNormal)
}

/// One row of the gradient-decay table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRow {
    pub radius: f64,
    /// Norm of the ambient gradient of the repulsion term over all points.
    pub grad_norm: f64,
    /// Same gradient measured as a Riemannian gradient in the Lorentz metric.
    pub riemannian_norm: f64,
}

/// `K` points in 𝕃² at equally spaced directions on the unit circle, all at
/// distance `r` from the origin.
pub fn circle_configuration(m: &Lorentz, k: usize, r: f64) -> Result<Vec<Point>> {
    if m.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: m.dim(),
        });
    }
    let o = m.origin::<f64>();
    (0..k)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / k as f64;
            m.exp_map(&TangentVector::new(
                o.clone(),
                vec![0.0, r * theta.cos(), r * theta.sin()],
            ))
        })
        .collect()
}

/// Gradient norm of the repulsion term as the circle configuration is moved
/// away from the origin, one row per radius.
pub fn gradient_decay_experiment(k: usize, radii: &[f64], curvature: f64) -> Result<Vec<DecayRow>> {
    if k < 2 {
        return Err(Error::InvalidConfig("need at least two points".into()));
    }
    if radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("radii must be positive and ascending".into()));
    }
    let m = Lorentz::new(ManifoldConfig::new(curvature, 2)?)?;
    radii
        .iter()
        .map(|&r| {
            let points = circle_configuration(&m, k, r)?;
            let mut eucl = 0.0;
            let mut riem = 0.0;
            for i in 0..k {
                let g = euclidean_grad(&m, &points, i, false);
                eucl += g.iter().map(|x| x * x).sum::<f64>();
                let t = riemannian_from_euclidean(&m, &points[i], g);
                riem += t.norm().powi(2);
            }
            Ok(DecayRow {
                radius: r,
                grad_norm: eucl.sqrt(),
                riemannian_norm: riem.sqrt(),
            })
        })
        .collect()
}

/// Least-squares fit of `log(grad_norm)` against radius: `(slope, intercept, R²)`.
pub fn log_linear_fit(rows: &[DecayRow]) -> (f64, f64, f64) {
    let xs: Vec<f64> = rows.iter().map(|r| r.radius).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.grad_norm.ln()).collect();
    linear_fit(&xs, &ys)
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut out = String::from("radius,grad_norm\n");
    for r in rows {
        let _ = writeln!(out, "{:.17e},{:.17e}", r.radius, r.grad_norm);
    }
    out
}

/// Parse `start:stop:step` (inclusive stop, up to rounding).
pub fn parse_radii(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidConfig(format!("radii must be start:stop:step, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(start > 0.0) || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// Poincaré-disk coordinates of 2-D kernels as `x,y` CSV.
pub fn poincare_csv(kernels: &KernelSet) -> Result<String> {
    if kernels.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: kernels.dim(),
        });
    }
    let m = kernels.manifold();
    let mut out = String::from("x,y\n");
    for p in kernels.points() {
        let q = m.to_poincare(p);
        let _ = writeln!(out, "{:.17e},{:.17e}", q[0], q[1]);
    }
    Ok(out)
}

/// Geodesics from kernel `from` to every other kernel, sampled at 64 steps,
/// in Poincaré coordinates: `path,step,x,y`.
pub fn geodesics_csv(kernels: &KernelSet, from: usize) -> Result<String> {
    const STEPS: usize = 64;
    if kernels.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: kernels.dim(),
        });
    }
    let m = kernels.manifold();
    let start = &kernels.points()[from];
    let mut out = String::from("path,step,x,y\n");
    for (j, p) in kernels.points().iter().enumerate() {
        if j == from {
            continue;
        }
        for (s, q) in m.geodesic(start, p, STEPS)?.iter().enumerate() {
            let q = m.to_poincare(q);
            let _ = writeln!(out, "{j},{s},{:.17e},{:.17e}", q[0], q[1]);
        }
    }
    Ok(out)
}

/// Place `K` points antipodally on a geodesic through the origin at distance
/// `r` each. Only meaningful for `K = 2`; used by tests and the analytic check.
pub fn antipodal_pair(m: &Lorentz, r: f64) -> Result<Vec<LorentzPoint<f64>>> {
    let o = m.origin::<f64>();
    let mut v = vec![0.0; m.dim() + 1];
    v[1] = r;
    let a = m.exp_map(&TangentVector::new(o.clone(), v.clone()))?;
    v[1] = -r;
    let b = m.exp_map(&TangentVector::new(o, v))?;
    Ok(vec![a, b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg2() -> ManifoldConfig {
        ManifoldConfig::new(-1.0, 2).unwrap()
    }

    #[test]
    fn loss_of_antipodal_pairs() {
        let m = Lorentz::standard(2);
        let pair = antipodal_pair(&m, 0.5).unwrap();
        assert_relative_eq!(kernel_loss_points(&m, &pair).unwrap(), 3.0, epsilon = 1e-12);
        let pair = antipodal_pair(&m, 0.5f64.sqrt()).unwrap();
        assert_relative_eq!(
            kernel_loss_points(&m, &pair).unwrap(),
            2.0 * 2f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn loss_terms_move_in_opposite_directions_with_scale() {
        let m = Lorentz::standard(2);
        let near = antipodal_pair(&m, 0.3).unwrap();
        let far = antipodal_pair(&m, 0.9).unwrap();
        let o = m.origin::<f64>();
        let rep = |p: &[Point]| 2.0 / m.distance(&p[0], &p[1]);
        let anchor = |p: &[Point]| m.distance(&o, &p[0]) + m.distance(&o, &p[1]);
        assert!(rep(&far) < rep(&near));
        assert!(anchor(&far) > anchor(&near));
    }

    #[test]
    fn coincident_points_are_rejected() {
        let m = Lorentz::standard(2);
        let p = m.project(&[0.1, 0.2]).unwrap();
        assert!(matches!(
            kernel_loss_points(&m, &[p.clone(), p.clone()]),
            Err(Error::DegenerateKernels(0, 1))
        ));
        assert!(KernelSet::new(vec![p.clone(), p], cfg2(), Provenance::Loaded).is_err());
    }

    #[test]
    fn gradient_vanishes_at_the_pair_optimum() {
        let m = Lorentz::standard(2);
        let pair = antipodal_pair(&m, 0.5f64.sqrt()).unwrap();
        for k in 0..2 {
            let g = riemannian_grad_points(&m, &pair, k, true);
            assert!(g.norm() <= 1e-4, "{}", g.norm());
        }
    }

    #[test]
    fn kernel_file_round_trip_and_validation() {
        let ks = random_kernels(4, 3, 11, &cfg2()).unwrap();
        let text = ks.to_json().unwrap();
        assert!(text.contains("\"K\": 4"));
        assert!(text.contains("\"provenance\": \"random_wrapped_normal\""));
        let back = KernelSet::from_json(&text).unwrap();
        assert_eq!(back, ks);

        let mut file = ks.to_file();
        file.points[1][0] += 1e-3;
        let err = KernelSet::from_file(file).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn random_kernels_are_reproducible() {
        let a = random_kernels(5, 2, 3, &cfg2()).unwrap();
        let b = random_kernels(5, 2, 3, &cfg2()).unwrap();
        let c = random_kernels(5, 2, 4, &cfg2()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.provenance(), Provenance::RandomWrappedNormal);
    }

    #[test]
    fn radii_parsing() {
        let r = parse_radii("0.5:5.0:0.5").unwrap();
        assert_eq!(r.len(), 10);
        assert_relative_eq!(r[9], 5.0, epsilon = 1e-12);
        assert!(parse_radii("1:0:1").is_err());
        assert!(parse_radii("1:2").is_err());
    }

    #[test]
    fn circle_configuration_is_equidistant() {
        let m = Lorentz::standard(2);
        let pts = circle_configuration(&m, 8, 1.5).unwrap();
        let o = m.origin();
        for p in &pts {
            assert_relative_eq!(m.distance(&o, p), 1.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn poincare_export_stays_in_the_unit_disk() {
        let ks = random_kernels(6, 2, 1, &cfg2()).unwrap();
        let csv = poincare_csv(&ks).unwrap();
        assert_eq!(csv.lines().count(), 7);
        for line in csv.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert!(v[0].hypot(v[1]) < 1.0);
        }
        let g = geodesics_csv(&ks, 0).unwrap();
        assert_eq!(g.lines().count(), 1 + 5 * 65);
    }
}
