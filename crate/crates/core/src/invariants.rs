//! Randomized property suites.
//!
//! Each property draws random instances from a seeded stream, measures the
//! worst violation over all trials, and compares it with a tolerance. The
//! manifold under test can carry a deliberately broken parallel transport
//! ([`Transport::CorrectionOnly`]) so that the suites themselves can be shown
//! to catch a faulty primitive.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::autograd::{finite_diff_check, Leaves, ParamStore, ScalarLoss};
use crate::error::{Error, Result};
use crate::graphnet::{build_hkn, DatasetFile, GraphBatch, HKNConfig, KernelSource, Masks, Task};
use crate::kernelgen::{random_kernels, KernelSet};
use crate::layers::{
    attention_weights, hcdist, hcent, hkconv, hlinear, Activation, CentroidBank, ConvMode, HKConvLayer, HKConvParams,
    HLinearParams, HLinearShape, Pooling,
};
use crate::manifold::{Lorentz, LorentzPoint, ManifoldConfig, TangentVector, Transport};
use crate::rng::{self, streams, Rng};
use crate::scalar::Real;
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    All,
    Manifold,
    Layers,
    Theorem1,
    Prop1,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "manifold" => Ok(Suite::Manifold),
            "layers" => Ok(Suite::Layers),
            "theorem1" => Ok(Suite::Theorem1),
            "prop1" => Ok(Suite::Prop1),
            other => Err(Error::InvalidConfig(format!("unknown suite {other:?}"))),
        }
    }

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }

    fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Manifold => "manifold",
            Suite::Layers => "layers",
            Suite::Theorem1 => "theorem1",
            Suite::Prop1 => "prop1",
        }
    }
}

/// Outcome of one property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub suite: String,
    pub trials: usize,
    #[serde(with = "crate::serde_f64")]
    pub max_error: f64,
    #[serde(with = "crate::serde_f64")]
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PropertyResult {
    fn new(name: &str, suite: Suite, trials: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            suite: suite.name().into(),
            trials,
            max_error,
            tolerance,
            passed: max_error.is_finite() && max_error <= tolerance,
            error: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub transport: String,
    pub properties: Vec<PropertyResult>,
    pub failures: usize,
}

/// Settings for a suite run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantConfig {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    /// Transport used by the primitives under test.
    pub transport: Transport,
    /// Largest distance from the origin of sampled points.
    pub max_radius: f64,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            trials: 100,
            seed: 0,
            transport: Transport::Isometric,
            max_radius: 10.0,
        }
    }
}

/// Cap on the finite-difference trials, which are far costlier than the rest.
const MAX_GRADIENT_TRIALS: usize = 10;
const MAX_MODEL_TRIALS: usize = 20;
const FD_STEP: f64 = 1e-5;
const FD_DIRECTIONS: usize = 3;

type Property = fn(&Ctx, usize) -> Result<PropertyResult>;

const PROPERTIES: &[(Suite, &str, Property)] = &[
    (Suite::Manifold, "closure_compositions", closure_compositions),
    (Suite::Manifold, "exp_log_inverse", exp_log_inverse),
    (Suite::Manifold, "log_exp_inverse", log_exp_inverse),
    (Suite::Manifold, "distance_preservation", distance_preservation),
    (Suite::Manifold, "log_norm_distance", log_norm_distance),
    (Suite::Manifold, "translate_isometry", translate_isometry),
    (Suite::Manifold, "metric_axioms", metric_axioms),
    (Suite::Manifold, "transport_isometry", transport_isometry),
    (Suite::Layers, "hlinear_on_manifold", hlinear_on_manifold),
    (Suite::Layers, "hlinear_norm", hlinear_norm),
    (Suite::Layers, "hcent_on_manifold", hcent_on_manifold),
    (
        Suite::Layers,
        "hcent_scale_invariance_pow2",
        hcent_scale_invariance_pow2,
    ),
    (Suite::Layers, "hcent_scale_invariance", hcent_scale_invariance),
    (Suite::Layers, "hcdist_matches_distance", hcdist_matches_distance),
    (Suite::Layers, "attention_row_sums", attention_row_sums),
    (Suite::Layers, "hkconv_on_manifold", hkconv_on_manifold),
    (Suite::Layers, "hkconv_self_reduction", hkconv_self_reduction),
    (Suite::Layers, "gradient_hlinear", |c, n| {
        gradient_check(c, n, GradTarget::HLinear)
    }),
    (Suite::Layers, "gradient_hcent", |c, n| {
        gradient_check(c, n, GradTarget::HCent)
    }),
    (Suite::Layers, "gradient_hcdist", |c, n| {
        gradient_check(c, n, GradTarget::HCDist)
    }),
    (Suite::Layers, "gradient_hkconv", |c, n| {
        gradient_check(c, n, GradTarget::HKConv)
    }),
    (
        Suite::Theorem1,
        "local_translation_invariance",
        local_translation_invariance,
    ),
    (
        Suite::Prop1,
        "hkconv_permutation_equivariance",
        hkconv_permutation_equivariance,
    ),
    (
        Suite::Prop1,
        "node_logits_permutation_equivariance",
        node_logits_permutation_equivariance,
    ),
    (
        Suite::Prop1,
        "graph_logits_permutation_invariance",
        graph_logits_permutation_invariance,
    ),
];

/// Trials actually run for a property: gradient checks and whole-model
/// checks are capped.
fn trials_for(name: &str, trials: usize) -> usize {
    if name.starts_with("gradient_") {
        trials.min(MAX_GRADIENT_TRIALS)
    } else if name.ends_with("_logits_permutation_equivariance") || name.ends_with("_logits_permutation_invariance") {
        trials.min(MAX_MODEL_TRIALS)
    } else {
        trials
    }
}

/// Run the selected suites. A property whose evaluation errors is reported
/// as failed with an infinite error.
pub fn run(cfg: &InvariantConfig) -> InvariantReport {
    let ctx = Ctx::new(cfg);
    let properties: Vec<PropertyResult> = PROPERTIES
        .iter()
        .filter(|(suite, _, _)| cfg.suite.includes(*suite))
        .map(|&(suite, name, f)| {
            let n = trials_for(name, cfg.trials);
            f(&ctx, n).unwrap_or_else(|e| PropertyResult {
                error: Some(e.to_string()),
                ..PropertyResult::new(name, suite, n, f64::INFINITY, 0.0)
            })
        })
        .collect();
    let failures = properties.iter().filter(|p| !p.passed).count();
    InvariantReport {
        suite: cfg.suite,
        trials: cfg.trials,
        seed: cfg.seed,
        transport: match cfg.transport {
            Transport::Isometric => "isometric".into(),
            Transport::CorrectionOnly => "correction_only".into(),
        },
        properties,
        failures,
    }
}

/// Shared state: the clean manifold used to draw inputs and the manifold
/// under test.
pub struct Ctx {
    seed: u64,
    transport: Transport,
    max_radius: f64,
}

impl Ctx {
    pub fn new(cfg: &InvariantConfig) -> Self {
        Self {
            seed: cfg.seed,
            transport: cfg.transport,
            max_radius: cfg.max_radius,
        }
    }

    /// Independent stream per property.
    fn rng(&self, property: &str) -> Rng {
        let tag = property.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        });
        rng::stream(self.seed ^ tag, streams::INVARIANTS)
    }

    fn clean(&self, dim: usize) -> Lorentz {
        Lorentz::standard(dim)
    }

    fn tested(&self, dim: usize) -> Lorentz {
        Lorentz::standard(dim).with_transport(self.transport)
    }
}

/// Point at distance uniform in `[0, r]` from the origin in a uniformly
/// random direction.
pub fn sample_point(m: &Lorentz, rng: &mut Rng, r: f64) -> Point {
    let dist = rng.random_range(0.0..=r);
    sample_at_distance(m, rng, dist)
}

pub fn sample_at_distance(m: &Lorentz, rng: &mut Rng, dist: f64) -> Point {
    let o = m.origin::<f64>();
    let mut dir = unit_spatial(m.dim(), rng);
    dir.iter_mut().for_each(|c| *c *= dist);
    let mut v = vec![0.0];
    v.extend(dir);
    m.exp_map(&TangentVector::new(o, v)).expect("tangent at the origin")
}

fn unit_spatial(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return u.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Tangent vector at `x` with Lorentz norm uniform in `(0, max_norm]`.
pub fn sample_tangent(m: &Lorentz, rng: &mut Rng, x: &Point, max_norm: f64) -> TangentVector<f64> {
    let norm = max_norm * (1.0 - rng.random::<f64>());
    m.random_tangent(rng, x, norm)
}

fn residual(m: &Lorentz, p: &Point) -> f64 {
    m.residual(p)
}

/// Residual relative to `max(1, x_t²)`, the scale of its rounding error.
fn scaled_residual(m: &Lorentz, p: &Point) -> f64 {
    m.residual(p) / p.time().powi(2).max(1.0)
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Bit-level mismatch measure: zero iff every entry is bitwise identical,
/// otherwise the largest absolute difference (at least the smallest
/// subnormal, so that a mismatch never reads as zero).
fn bitwise_error(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()) {
        0.0
    } else if a.len() != b.len() {
        f64::INFINITY
    } else {
        max_abs_diff(a, b).max(f64::from_bits(1))
    }
}

/// HLinear parameters with every field randomized.
fn random_hlinear(rng: &mut Rng, in_dim: usize, out_dim: usize, activation: Activation) -> HLinearParams<f64> {
    let cols = in_dim + 1;
    let a = (cols as f64).powf(-0.5);
    let u = Uniform::new_inclusive(-a, a).expect("valid bounds");
    HLinearParams {
        in_dim,
        out_dim,
        w: (0..out_dim * cols).map(|_| u.sample(rng)).collect(),
        v: (0..cols).map(|_| 0.3 * u.sample(rng)).collect(),
        b: (0..out_dim).map(|_| 0.1 * u.sample(rng)).collect(),
        b_prime: 0.1 * u.sample(rng),
        log_lambda: rng.random_range(-0.5..0.5),
        activation,
    }
}

/// Store with randomized leaves for a layer.
fn randomize_store(store: &mut ParamStore, rng: &mut Rng) {
    for (path, p) in store.params.iter_mut() {
        let scale = if path.ends_with(".W") { 0.0 } else { 0.2 };
        for d in p.data.iter_mut() {
            *d += scale * rng.random_range(-1.0..1.0);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn random_layer(
    rng: &mut Rng,
    in_dim: usize,
    out_dim: usize,
    k: usize,
    mode: ConvMode,
    pooling: Pooling,
    activation: Activation,
    transport: Transport,
) -> Result<(HKConvLayer, ParamStore, HKConvParams<f64>)> {
    let cfg = ManifoldConfig {
        dim: in_dim,
        ..Default::default()
    };
    let kernels = random_kernels(k, in_dim, rng.random(), &cfg)?;
    let layer = HKConvLayer::new(HLinearShape::new(in_dim, out_dim, activation), kernels, mode, pooling)?;
    let mut store = ParamStore::new();
    layer.init(&mut store, "l", rng);
    randomize_store(&mut store, rng);
    let mut p = layer.bind::<f64>(&store.values(), "l")?;
    p.input = p.input.with_transport(transport);
    p.output = p.output.with_transport(transport);
    Ok((layer, store, p))
}

fn pooling_weights(p: &HKConvParams<f64>, x: &Point, nbrs: &[Point]) -> Result<Option<Vec<f64>>> {
    Ok(match p.pooling {
        Pooling::Uniform => None,
        Pooling::Attention => {
            Some(attention_weights(&p.input, std::slice::from_ref(x), nbrs, p.input.dim())?.remove(0))
        }
    })
}

// ---------------------------------------------------------------- manifold

/// Hyperboloid residuals of every point produced by random compositions.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureStats {
    pub compositions: usize,
    pub points: usize,
    /// Largest `|⟨y, y⟩_𝓛 − 1/κ|`.
    pub max_residual: f64,
    /// Largest residual divided by `max(1, y_t²)`.
    pub max_scaled_residual: f64,
    /// Largest residual among outputs with `d(o, y) ≤ r`, for `r = 1, 2, …`.
    pub max_residual_within: Vec<(f64, f64)>,
}

/// Random compositions of every point-producing operation with all inputs
/// and outputs kept within `max_radius` of the origin.
///
/// Each composition applies four operations in a row, each drawn from exp,
/// log (followed by exp), parallel transport (followed by exp), translate,
/// ⊖, hlinear, hcent and hkconv. Outputs that leave the ball are discarded
/// and redrawn.
pub fn closure_stats(ctx: &Ctx, compositions: usize) -> Result<ClosureStats> {
    const STEPS: usize = 4;
    const MAX_ATTEMPTS: usize = 100;
    let mut rng = ctx.rng("closure");
    let dim = 3;
    let clean = ctx.clean(dim);
    let m = ctx.tested(dim);
    let o = clean.origin::<f64>();
    let r = ctx.max_radius;
    let bands = r.ceil().max(1.0) as usize;
    let mut stats = ClosureStats {
        compositions,
        points: 0,
        max_residual: 0.0,
        max_scaled_residual: 0.0,
        max_residual_within: (1..=bands).map(|b| (b as f64, 0.0)).collect(),
    };
    let (_, _, conv) = random_layer(
        &mut rng,
        dim,
        dim,
        3,
        ConvMode::Relative,
        Pooling::Uniform,
        Activation::Tanh,
        ctx.transport,
    )?;
    for _ in 0..compositions {
        let mut c = sample_point(&clean, &mut rng, r);
        let mut done = 0;
        let mut attempts = 0;
        while done < STEPS && attempts < MAX_ATTEMPTS {
            attempts += 1;
            let room = (r - clean.distance(&o, &c)).max(0.0);
            let y = match rng.random_range(0..8) {
                0 => {
                    let v = sample_tangent(&clean, &mut rng, &c, room.min(5.0));
                    m.exp_map(&v)?
                }
                1 => {
                    let u = sample_point(&clean, &mut rng, r);
                    m.exp_map(&m.log_map(&c, &u)?)?
                }
                2 => {
                    let u = sample_point(&clean, &mut rng, r);
                    let v = sample_tangent(&clean, &mut rng, &u, room.min(5.0));
                    let w = m.parallel_transport(&u, &c, &v)?;
                    m.exp_map(&m.to_tangent(&c, &w.vec))?
                }
                3 => {
                    let a = sample_point(&clean, &mut rng, r);
                    let b = sample_point(&clean, &mut rng, r);
                    m.translate(&a, &b, &c)?
                }
                4 => {
                    let a = sample_point(&clean, &mut rng, r);
                    m.ominus(&c, &a)?
                }
                5 => {
                    let p = random_hlinear(&mut rng, dim, dim, Activation::Tanh);
                    hlinear(&m, &c, &p, &mut None)?
                }
                6 => {
                    let mut pts = vec![c.clone()];
                    for _ in 0..rng.random_range(1..4) {
                        pts.push(sample_point(&clean, &mut rng, r));
                    }
                    let w: Vec<f64> = pts.iter().map(|_| rng.random_range(0.1..2.0)).collect();
                    hcent(&m, &pts, &w)?
                }
                _ => {
                    let nbrs: Vec<Point> = (0..rng.random_range(1..5))
                        .map(|_| {
                            clean
                                .exp_map(&sample_tangent(&clean, &mut rng, &c, 1.0))
                                .expect("tangent")
                        })
                        .filter(|p| clean.distance(&o, p) <= r)
                        .collect();
                    if nbrs.is_empty() {
                        continue;
                    }
                    let refs: Vec<&Point> = nbrs.iter().collect();
                    hkconv(&c, &refs, &conv, None, &mut None)?
                }
            };
            let dist = clean.distance(&o, &y);
            if !(dist <= r) {
                continue;
            }
            let res = residual(&clean, &y);
            stats.points += 1;
            stats.max_residual = stats.max_residual.max(res);
            stats.max_scaled_residual = stats.max_scaled_residual.max(scaled_residual(&clean, &y));
            for (bound, worst) in stats.max_residual_within.iter_mut() {
                if dist <= *bound {
                    *worst = worst.max(res);
                }
            }
            c = y;
            done += 1;
        }
    }
    Ok(stats)
}

/// Closure of random compositions, with the residual measured relative to
/// the magnitude of the output (see [`closure_stats`] for absolute values).
pub fn closure_compositions(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let stats = closure_stats(ctx, trials)?;
    Ok(PropertyResult::new(
        "closure_compositions",
        Suite::Manifold,
        trials,
        stats.max_scaled_residual,
        1e-9,
    ))
}

/// Base point from the standard test-point generator.
fn base_point(m: &Lorentz, rng: &mut Rng) -> Point {
    m.random_point(rng)
}

/// `‖log_x(exp_x(v)) − v‖ ≤ 1e−8 (1 + ‖v‖)` for `‖v‖_𝓛 ≤ 5`.
pub fn exp_log_inverse(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("exp_log");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let dim = 2 + t % 3;
        let clean = ctx.clean(dim);
        let m = ctx.tested(dim);
        let x = base_point(&clean, &mut rng);
        let v = sample_tangent(&clean, &mut rng, &x, 5.0);
        let back = m.log_map(&x, &m.exp_map(&v)?)?;
        let diff = back
            .vec
            .iter()
            .zip(&v.vec)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = v.vec.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / (1.0 + norm));
    }
    Ok(PropertyResult::new(
        "exp_log_inverse",
        Suite::Manifold,
        trials,
        worst,
        1e-8,
    ))
}

/// `d(exp_x(log_x(u)), u) ≤ 1e−8`.
pub fn log_exp_inverse(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("log_exp");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let dim = 2 + t % 3;
        let clean = ctx.clean(dim);
        let m = ctx.tested(dim);
        let x = base_point(&clean, &mut rng);
        let u = base_point(&clean, &mut rng);
        let back = m.exp_map(&m.log_map(&x, &u)?)?;
        worst = worst.max(clean.distance(&back, &u));
    }
    Ok(PropertyResult::new(
        "log_exp_inverse",
        Suite::Manifold,
        trials,
        worst,
        1e-8,
    ))
}

/// `‖log_x(u)‖_𝓛 = d(x, u)`, relative.
pub fn log_norm_distance(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("log_norm");
    let m = ctx.tested(3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = base_point(&m, &mut rng);
        let u = base_point(&m, &mut rng);
        let d = m.distance(&x, &u);
        if d > 0.0 {
            worst = worst.max((m.log_map(&x, &u)?.norm() - d).abs() / d);
        }
    }
    Ok(PropertyResult::new(
        "log_norm_distance",
        Suite::Manifold,
        trials,
        worst,
        1e-8,
    ))
}

/// `|d(x, xᵢ) − d(o, xᵢ ⊖ x)| ≤ 1e−8`.
pub fn distance_preservation(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("distance_preservation");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let dim = 2 + t % 3;
        let clean = ctx.clean(dim);
        let m = ctx.tested(dim);
        let x = base_point(&clean, &mut rng);
        let xi = base_point(&clean, &mut rng);
        let rel = m.ominus(&xi, &x)?;
        let err = (clean.distance(&x, &xi) - clean.distance(&clean.origin(), &rel)).abs();
        worst = worst.max(err);
    }
    Ok(PropertyResult::new(
        "distance_preservation",
        Suite::Manifold,
        trials,
        worst,
        1e-8,
    ))
}

/// `d(T(u₁), T(u₂)) = d(u₁, u₂)`, relative.
pub fn translate_isometry(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("translate_isometry");
    let clean = ctx.clean(3);
    let m = ctx.tested(3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let [x, y, a, b] = [(); 4].map(|_| base_point(&clean, &mut rng));
        let d = clean.distance(&a, &b);
        let moved = clean.distance(&m.translate(&x, &y, &a)?, &m.translate(&x, &y, &b)?);
        worst = worst.max((moved - d).abs() / d.max(f64::MIN_POSITIVE));
    }
    Ok(PropertyResult::new(
        "translate_isometry",
        Suite::Manifold,
        trials,
        worst,
        1e-8,
    ))
}

/// Symmetry, nonnegativity, identity and the triangle inequality.
pub fn metric_axioms(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("metric_axioms");
    let m = ctx.tested(3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = sample_point(&m, &mut rng, ctx.max_radius);
        let y = sample_point(&m, &mut rng, ctx.max_radius);
        let z = sample_point(&m, &mut rng, ctx.max_radius);
        let (xy, yx) = (m.distance(&x, &y), m.distance(&y, &x));
        worst = worst.max((xy - yx).abs());
        worst = worst.max(m.distance(&x, &z) - xy - m.distance(&y, &z) - 1e-8);
        if !(xy >= 0.0) || m.distance(&x, &x) != 0.0 {
            worst = f64::INFINITY;
        }
    }
    Ok(PropertyResult::new(
        "metric_axioms",
        Suite::Manifold,
        trials,
        worst,
        0.0,
    ))
}

/// Parallel transport preserves Lorentz inner products.
pub fn transport_isometry(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("transport_isometry");
    let clean = ctx.clean(3);
    let m = ctx.tested(3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = base_point(&clean, &mut rng);
        let y = base_point(&clean, &mut rng);
        let u = sample_tangent(&clean, &mut rng, &x, 3.0);
        let v = sample_tangent(&clean, &mut rng, &x, 3.0);
        let pu = m.parallel_transport(&x, &y, &u)?;
        let pv = m.parallel_transport(&x, &y, &v)?;
        let before = crate::manifold::lorentz_inner(&u.vec, &v.vec)?;
        let after = crate::manifold::lorentz_inner(&pu.vec, &pv.vec)?;
        worst = worst.max((before - after).abs());
    }
    Ok(PropertyResult::new(
        "transport_isometry",
        Suite::Manifold,
        trials,
        worst,
        1e-9,
    ))
}

// ------------------------------------------------------------------ layers

pub fn hlinear_on_manifold(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("hlinear_on_manifold");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let (i, o) = (2 + t % 3, 2 + (t / 3) % 3);
        let act = [Activation::Identity, Activation::Relu, Activation::Tanh][t % 3];
        let x = sample_point(&ctx.clean(i), &mut rng, ctx.max_radius);
        let p = random_hlinear(&mut rng, i, o, act);
        let out = ctx.tested(o);
        let y = hlinear(&out, &x, &p, &mut None)?;
        worst = worst.max(scaled_residual(&out, &y));
    }
    Ok(PropertyResult::new(
        "hlinear_on_manifold",
        Suite::Layers,
        trials,
        worst,
        1e-9,
    ))
}

/// `‖y_s‖ = λ σ(vᵀx + b′)`.
pub fn hlinear_norm(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("hlinear_norm");
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        // beyond this radius the gate saturates to zero
        let x = sample_point(&ctx.clean(3), &mut rng, ctx.max_radius.min(5.0));
        let p = random_hlinear(&mut rng, 3, 4, Activation::Tanh);
        let y = hlinear(&ctx.tested(4), &x, &p, &mut None)?;
        let norm = y.spatial().iter().map(|c| c * c).sum::<f64>().sqrt();
        let gate = (p.v.iter().zip(x.coords()).map(|(a, b)| a * b).sum::<f64>() + p.b_prime).sigmoid();
        let expect = p.log_lambda.exp() * gate;
        worst = worst.max((norm - expect).abs() / expect);
    }
    Ok(PropertyResult::new("hlinear_norm", Suite::Layers, trials, worst, 1e-14))
}

pub fn hcent_on_manifold(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("hcent_on_manifold");
    let clean = ctx.clean(3);
    let m = ctx.tested(3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let pts: Vec<Point> = (0..rng.random_range(1..6))
            .map(|_| sample_point(&clean, &mut rng, ctx.max_radius))
            .collect();
        let w: Vec<f64> = pts.iter().map(|_| rng.random_range(0.0..2.0)).collect();
        if w.iter().sum::<f64>() <= 0.0 {
            continue;
        }
        worst = worst.max(scaled_residual(&m, &hcent(&m, &pts, &w)?));
    }
    Ok(PropertyResult::new(
        "hcent_on_manifold",
        Suite::Layers,
        trials,
        worst,
        1e-9,
    ))
}

/// `hcent(points, cν) = hcent(points, ν)` bit for bit when `c` is a power
/// of two, which scales every partial sum exactly.
pub fn hcent_scale_invariance_pow2(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    scale_invariance(ctx, trials, &[2.0, 0.5, 4.0], "hcent_scale_invariance_pow2", 0.0)
}

/// `hcent(points, cν) = hcent(points, ν)` for general `c`, with the relative
/// difference divided by the condition number `Σ νᵢ‖xᵢ‖ · ‖s‖ / |⟨s, s⟩_𝓛|`
/// of the sum `s = Σ νᵢxᵢ`.
pub fn hcent_scale_invariance(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    scale_invariance(ctx, trials, &[3.0, 10.0, 0.3], "hcent_scale_invariance", 1e-14)
}

fn scale_invariance(ctx: &Ctx, trials: usize, scales: &[f64], name: &str, tolerance: f64) -> Result<PropertyResult> {
    let mut rng = ctx.rng(name);
    let clean = ctx.clean(3);
    let m = ctx.tested(3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let pts: Vec<Point> = (0..rng.random_range(1..6))
            .map(|_| sample_point(&clean, &mut rng, ctx.max_radius))
            .collect();
        let w: Vec<f64> = pts.iter().map(|_| rng.random_range(0.1..2.0)).collect();
        let base = hcent(&m, &pts, &w)?;
        for &c in scales {
            let scaled: Vec<f64> = w.iter().map(|x| c * x).collect();
            let other = hcent(&m, &pts, &scaled)?;
            let err = if tolerance == 0.0 {
                bitwise_error(other.coords(), base.coords())
            } else {
                rel_diff(other.coords(), base.coords()) / sum_condition(&pts, &w)
            };
            worst = worst.max(err);
        }
    }
    Ok(PropertyResult::new(name, Suite::Layers, trials, worst, tolerance))
}

fn sum_condition(pts: &[Point], w: &[f64]) -> f64 {
    let n = pts[0].coords().len();
    let mut s = vec![0.0; n];
    let mut mass = 0.0;
    for (p, &wi) in pts.iter().zip(w) {
        mass += wi * p.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        s.iter_mut().zip(p.coords()).for_each(|(a, &c)| *a += wi * c);
    }
    let norm = s.iter().map(|c| c * c).sum::<f64>().sqrt();
    let lorentz = crate::manifold::lorentz_inner(&s, &s).expect("equal lengths").abs();
    mass * norm / lorentz
}

pub fn hcdist_matches_distance(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("hcdist");
    let m = ctx.tested(3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = sample_point(&m, &mut rng, ctx.max_radius);
        let bank = CentroidBank {
            centroids: (0..rng.random_range(1..5))
                .map(|_| sample_point(&m, &mut rng, ctx.max_radius))
                .collect(),
        };
        let d = hcdist(&m, &x, &bank)?;
        let oracle: Vec<f64> = bank.centroids.iter().map(|c| m.distance(&x, c)).collect();
        worst = worst.max(bitwise_error(&d, &oracle));
        if d.iter().any(|&v| !(v >= 0.0)) {
            worst = f64::INFINITY;
        }
    }
    Ok(PropertyResult::new(
        "hcdist_matches_distance",
        Suite::Layers,
        trials,
        worst,
        0.0,
    ))
}

pub fn attention_row_sums(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("attention");
    let m = ctx.tested(3);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let q: Vec<Point> = (0..rng.random_range(1..4))
            .map(|_| sample_point(&m, &mut rng, ctx.max_radius))
            .collect();
        let k: Vec<Point> = (0..rng.random_range(1..6))
            .map(|_| sample_point(&m, &mut rng, ctx.max_radius))
            .collect();
        for row in attention_weights(&m, &q, &k, 3)? {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            if row.iter().any(|&w| !(w >= 0.0)) {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(PropertyResult::new(
        "attention_row_sums",
        Suite::Layers,
        trials,
        worst,
        1e-12,
    ))
}

/// Outputs of HKConv in every mode and pooling stay on the manifold.
pub fn hkconv_on_manifold(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("hkconv_on_manifold");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mode = [ConvMode::Relative, ConvMode::Direct][t % 2];
        let pooling = [Pooling::Uniform, Pooling::Attention][(t / 2) % 2];
        let (i, o) = (2 + t % 3, 2 + (t / 3) % 2);
        let (_, _, p) = random_layer(
            &mut rng,
            i,
            o,
            2 + t % 4,
            mode,
            pooling,
            Activation::Relu,
            ctx.transport,
        )?;
        let clean = ctx.clean(i);
        let x = sample_point(&clean, &mut rng, ctx.max_radius.min(5.0));
        let nbrs: Vec<Point> = (0..rng.random_range(1..6))
            .map(|_| {
                clean
                    .exp_map(&sample_tangent(&clean, &mut rng, &x, 2.0))
                    .expect("tangent")
            })
            .collect();
        let refs: Vec<&Point> = nbrs.iter().collect();
        let attn = pooling_weights(&p, &x, &nbrs)?;
        let y = hkconv(&x, &refs, &p, attn.as_deref(), &mut None)?;
        worst = worst.max(scaled_residual(&p.output, &y));
    }
    Ok(PropertyResult::new(
        "hkconv_on_manifold",
        Suite::Layers,
        trials,
        worst,
        1e-9,
    ))
}

/// With `𝒩(x) = {x}` the output is `hcent({hlinear_k(o)}, {d(o, x̃ₖ)})`.
pub fn hkconv_self_reduction(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("hkconv_self");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let (_, _, p) = random_layer(
            &mut rng,
            3,
            2,
            2 + t % 4,
            ConvMode::Relative,
            Pooling::Uniform,
            Activation::Tanh,
            ctx.transport,
        )?;
        let m = p.input;
        let o = m.origin::<f64>();
        let outs = p
            .sublayers
            .iter()
            .map(|s| hlinear(&p.output, &o, s, &mut None))
            .collect::<Result<Vec<_>>>()?;
        let nu: Vec<f64> = p.kernels.iter().map(|k| m.distance(&o, k)).collect();
        let expect = hcent(&p.output, &outs, &nu)?;
        let expect = hcent(&p.output, &[expect], &[1.0])?;
        let x = sample_point(&ctx.clean(3), &mut rng, ctx.max_radius);
        let y = hkconv(&x, &[&x], &p, None, &mut None)?;
        worst = worst.max(rel_diff(y.coords(), expect.coords()));
    }
    Ok(PropertyResult::new(
        "hkconv_self_reduction",
        Suite::Layers,
        trials,
        worst,
        1e-12,
    ))
}

#[derive(Clone, Copy, Debug)]
#[allow(clippy::enum_variant_names)]
enum GradTarget {
    HLinear,
    HCent,
    HCDist,
    HKConv,
}

/// Linear read-out `Σ cᵢ yᵢ` of a layer output, over Euclidean leaves
/// (`z.*` inputs are embedded at the origin).
struct LayerLoss {
    target: GradTarget,
    dim: usize,
    coeffs: Vec<f64>,
    layer: Option<HKConvLayer>,
    shape: HLinearShape,
    n_inputs: usize,
}

impl ScalarLoss for LayerLoss {
    fn eval<T: Real>(&self, p: &Leaves<T>) -> Result<T> {
        let m = Lorentz::standard(self.dim);
        let input = |i: usize| -> Result<LorentzPoint<T>> { m.embed_euclidean(p.get(&format!("z.{i}"))?) };
        let c = |xs: &[T]| -> T {
            let cs: Vec<T> = self.coeffs[..xs.len()].iter().map(|&c| T::cst(c)).collect();
            T::dot(&cs, xs)
        };
        match self.target {
            GradTarget::HLinear => {
                let params = self.shape.bind(p, "h")?;
                let out = Lorentz::standard(self.shape.out_dim);
                Ok(c(hlinear(&out, &input(0)?, &params, &mut None)?.coords()))
            }
            GradTarget::HCent => {
                let pts = (0..self.n_inputs).map(input).collect::<Result<Vec<_>>>()?;
                let w: Vec<T> = p.get("w")?.iter().map(|w| w.exp()).collect();
                Ok(c(hcent(&m, &pts, &w)?.coords()))
            }
            GradTarget::HCDist => {
                let bank = CentroidBank::from_euclidean(&m, p.get("centroids")?)?;
                Ok(c(&hcdist(&m, &input(0)?, &bank)?))
            }
            GradTarget::HKConv => {
                let layer = self.layer.as_ref().expect("hkconv loss has a layer");
                let params = layer.bind(p, "l")?;
                let x = input(0)?;
                let nbrs = (1..self.n_inputs).map(input).collect::<Result<Vec<_>>>()?;
                let refs: Vec<&LorentzPoint<T>> = nbrs.iter().collect();
                Ok(c(hkconv(&x, &refs, &params, None, &mut None)?.coords()))
            }
        }
    }
}

fn gradient_check(ctx: &Ctx, trials: usize, target: GradTarget) -> Result<PropertyResult> {
    let name = match target {
        GradTarget::HLinear => "gradient_hlinear",
        GradTarget::HCent => "gradient_hcent",
        GradTarget::HCDist => "gradient_hcdist",
        GradTarget::HKConv => "gradient_hkconv",
    };
    let mut rng = ctx.rng(name);
    let dim = 3;
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut store = ParamStore::new();
        let n_inputs = match target {
            GradTarget::HLinear | GradTarget::HCDist => 1,
            GradTarget::HCent => 2 + t % 3,
            GradTarget::HKConv => 2 + t % 3,
        };
        for i in 0..n_inputs {
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            store.insert(format!("z.{i}"), vec![dim], z);
        }
        let shape = HLinearShape::new(dim, 2, [Activation::Identity, Activation::Tanh][t % 2]);
        let mut layer = None;
        match target {
            GradTarget::HLinear => {
                shape.init(&mut store, "h", &mut rng);
                randomize_store(&mut store, &mut rng);
            }
            GradTarget::HCent => {
                let w: Vec<f64> = (0..n_inputs).map(|_| rng.random_range(-1.0..1.0)).collect();
                store.insert("w", vec![n_inputs], w);
            }
            GradTarget::HCDist => {
                let c: Vec<f64> = (0..3 * dim).map(|_| rng.random_range(-1.5..1.5)).collect();
                store.insert("centroids", vec![3, dim], c);
            }
            GradTarget::HKConv => {
                let (l, s, _) = random_layer(
                    &mut rng,
                    dim,
                    2,
                    2 + t % 3,
                    ConvMode::Relative,
                    Pooling::Uniform,
                    shape.activation,
                    Transport::Isometric,
                )?;
                for (k, v) in s.params {
                    store.params.insert(k, v);
                }
                layer = Some(l);
            }
        }
        let loss = LayerLoss {
            target,
            dim,
            coeffs: (0..dim + 1).map(|_| rng.random_range(-1.0..1.0)).collect(),
            layer,
            shape,
            n_inputs,
        };
        let report = finite_diff_check(&loss, &store, FD_STEP, FD_DIRECTIONS, rng.random())?;
        worst = worst.max(report.max_rel_error());
    }
    Ok(PropertyResult::new(name, Suite::Layers, trials, worst, 1e-4))
}

// ------------------------------------------------- local translation invariance

/// `hkconv(T_{x→y}(x); T_{x→y}(𝒩(x))) = hkconv(x; 𝒩(x))` for `y` on the
/// geodesic from `o` to `x`, relative mode.
pub fn local_translation_invariance(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("theorem1");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let dim = 2 + t % 3;
        let pooling = [Pooling::Uniform, Pooling::Attention][t % 2];
        let (_, _, p) = random_layer(
            &mut rng,
            dim,
            2 + t % 2,
            2 + t % 4,
            ConvMode::Relative,
            pooling,
            Activation::Tanh,
            ctx.transport,
        )?;
        let clean = ctx.clean(dim);
        let m = ctx.tested(dim);
        let x = sample_point(&clean, &mut rng, ctx.max_radius.min(5.0));
        let nbrs: Vec<Point> = (0..rng.random_range(1..6))
            .map(|_| {
                clean
                    .exp_map(&sample_tangent(&clean, &mut rng, &x, 1.5))
                    .expect("tangent")
            })
            .collect();
        let s: f64 = rng.random();
        let o = clean.origin();
        let y = clean.exp_map(&clean.log_map(&o, &x)?.scaled(s))?;
        let x2 = m.translate(&x, &y, &x)?;
        let nbrs2 = nbrs
            .iter()
            .map(|u| m.translate(&x, &y, u))
            .collect::<Result<Vec<_>>>()?;
        let attn = pooling_weights(&p, &x, &nbrs)?;
        let attn2 = pooling_weights(&p, &x2, &nbrs2)?;
        let a = hkconv(&x, &nbrs.iter().collect::<Vec<_>>(), &p, attn.as_deref(), &mut None)?;
        let b = hkconv(&x2, &nbrs2.iter().collect::<Vec<_>>(), &p, attn2.as_deref(), &mut None)?;
        worst = worst.max(rel_diff(b.coords(), a.coords()));
    }
    Ok(PropertyResult::new(
        "local_translation_invariance",
        Suite::Theorem1,
        trials,
        worst,
        1e-6,
    ))
}

// -------------------------------------------------- permutation equivariance

struct RandomGraph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
}

fn random_graph(rng: &mut Rng, n: usize, p: f64) -> RandomGraph {
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    RandomGraph { n, adjacency }
}

fn random_permutation(rng: &mut Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

fn conv_all(p: &HKConvParams<f64>, graph: &RandomGraph, xs: &[Point]) -> Result<Vec<Point>> {
    (0..graph.n)
        .map(|i| {
            let nbrs: Vec<Point> = if graph.adjacency[i].is_empty() {
                vec![xs[i].clone()]
            } else {
                graph.adjacency[i].iter().map(|&j| xs[j].clone()).collect()
            };
            let refs: Vec<&Point> = nbrs.iter().collect();
            let order = crate::layers::canonical_order(&refs);
            let sorted: Vec<Point> = order.iter().map(|&k| nbrs[k].clone()).collect();
            let sorted_refs: Vec<&Point> = sorted.iter().collect();
            let attn = pooling_weights(p, &xs[i], &sorted)?;
            hkconv(&xs[i], &sorted_refs, p, attn.as_deref(), &mut None)
        })
        .collect()
}

/// Node-wise HKConv commutes with relabelling the nodes, bit for bit.
pub fn hkconv_permutation_equivariance(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("prop1_hkconv");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mode = [ConvMode::Relative, ConvMode::Direct][t % 2];
        let pooling = [Pooling::Uniform, Pooling::Attention][(t / 2) % 2];
        let (_, _, p) = random_layer(&mut rng, 3, 3, 3, mode, pooling, Activation::Relu, ctx.transport)?;
        let clean = ctx.clean(3);
        let n = rng.random_range(4..12);
        let graph = random_graph(&mut rng, n, 0.35);
        let xs: Vec<Point> = (0..n).map(|_| sample_point(&clean, &mut rng, 3.0)).collect();
        let out = conv_all(&p, &graph, &xs)?;
        // node i of the relabelled graph is node perm[i] of the original
        let perm = random_permutation(&mut rng, n);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let permuted = RandomGraph {
            n,
            adjacency: perm
                .iter()
                .map(|&old| {
                    let mut a: Vec<usize> = graph.adjacency[old].iter().map(|&j| inverse[j]).collect();
                    a.sort_unstable();
                    a
                })
                .collect(),
        };
        let xs2: Vec<Point> = perm.iter().map(|&old| xs[old].clone()).collect();
        let out2 = conv_all(&p, &permuted, &xs2)?;
        for (new, &old) in perm.iter().enumerate() {
            worst = worst.max(bitwise_error(out2[new].coords(), out[old].coords()));
        }
    }
    Ok(PropertyResult::new(
        "hkconv_permutation_equivariance",
        Suite::Prop1,
        trials,
        worst,
        0.0,
    ))
}

fn random_dataset(rng: &mut Rng, graphs: usize, features: usize) -> Result<GraphBatch> {
    let mut file = DatasetFile {
        num_nodes: 0,
        features: Vec::new(),
        edges: Vec::new(),
        graph_ids: (graphs > 0).then(Vec::new),
        labels: Vec::new(),
        masks: None,
    };
    let count = graphs.max(1);
    for g in 0..count {
        let n = rng.random_range(5..10);
        let graph = random_graph(rng, n, 0.4);
        let base = file.num_nodes;
        for i in 0..n {
            file.features
                .push((0..features).map(|_| rng.random_range(-1.0..1.0)).collect());
            for &j in &graph.adjacency[i] {
                if i < j {
                    file.edges.push([base + i, base + j]);
                }
            }
            if let Some(ids) = file.graph_ids.as_mut() {
                ids.push(g);
            } else {
                file.labels.push(i % 2);
            }
        }
        file.num_nodes += n;
        if graphs > 0 {
            file.labels.push(g % 2);
        }
    }
    let items = file.labels.len();
    file.masks = Some(Masks {
        train: vec![true; items],
        val: vec![false; items],
        test: vec![false; items],
    });
    GraphBatch::from_file(file)
}

fn small_model(data: &GraphBatch, task: Task, seed: u64, pooling: Pooling) -> Result<crate::graphnet::Hkn> {
    let cfg = HKNConfig {
        layers: 2,
        k: 3,
        hidden_dim: 4,
        task,
        pooling,
        kernel_source: KernelSource::Random,
        seed,
        ..HKNConfig::default()
    };
    let kernels = crate::graphnet::make_kernels(&cfg, data.feature_dim())?;
    let mut model = build_hkn(&cfg, data.feature_dim(), data.num_classes(), kernels)?;
    let mut rng = rng::stream(seed, streams::INVARIANTS);
    randomize_store(&mut model.store, &mut rng);
    Ok(model)
}

/// Node-task logits permute with the nodes.
pub fn node_logits_permutation_equivariance(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("prop1_node_logits");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let data = random_dataset(&mut rng, 0, 4)?;
        let pooling = [Pooling::Uniform, Pooling::Attention][t % 2];
        let model = small_model(&data, Task::Node, rng.random(), pooling)?;
        let perm = random_permutation(&mut rng, data.num_nodes());
        let permuted = data.permute_nodes(&perm)?;
        let a = model.logits(&model.store.values::<f64>(), &data)?;
        let b = model.logits(&model.store.values::<f64>(), &permuted)?;
        for (new, &old) in perm.iter().enumerate() {
            worst = worst.max(bitwise_error(&b[new], &a[old]));
        }
    }
    Ok(PropertyResult::new(
        "node_logits_permutation_equivariance",
        Suite::Prop1,
        trials,
        worst,
        0.0,
    ))
}

/// Graph-task logits ignore the order of nodes.
pub fn graph_logits_permutation_invariance(ctx: &Ctx, trials: usize) -> Result<PropertyResult> {
    let mut rng = ctx.rng("prop1_graph_logits");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let data = random_dataset(&mut rng, 3, 4)?;
        let pooling = [Pooling::Uniform, Pooling::Attention][t % 2];
        let model = small_model(&data, Task::Graph, rng.random(), pooling)?;
        let perm = random_permutation(&mut rng, data.num_nodes());
        let permuted = data.permute_nodes(&perm)?;
        let a = model.logits(&model.store.values::<f64>(), &data)?;
        let b = model.logits(&model.store.values::<f64>(), &permuted)?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max(bitwise_error(y, x));
        }
    }
    Ok(PropertyResult::new(
        "graph_logits_permutation_invariance",
        Suite::Prop1,
        trials,
        worst,
        0.0,
    ))
}

/// Kernel set shared by property tests that need fixed kernels.
pub fn fixed_kernels(k: usize, dim: usize, seed: u64) -> Result<KernelSet> {
    random_kernels(
        k,
        dim,
        seed,
        &ManifoldConfig {
            dim,
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(suite: Suite, transport: Transport) -> InvariantConfig {
        InvariantConfig {
            suite,
            trials: 20,
            transport,
            ..Default::default()
        }
    }

    #[test]
    fn every_suite_passes_on_a_clean_build() {
        let report = run(&config(Suite::All, Transport::Isometric));
        let failed: Vec<_> = report.properties.iter().filter(|p| !p.passed).collect();
        assert!(failed.is_empty(), "{failed:?}");
        assert_eq!(report.properties.len(), PROPERTIES.len());
    }

    #[test]
    fn corrupted_transport_fails_theorem1() {
        let report = run(&config(Suite::Theorem1, Transport::CorrectionOnly));
        assert_eq!(report.failures, 1);
        assert_eq!(report.properties[0].name, "local_translation_invariance");
    }

    #[test]
    fn suites_select_their_properties() {
        let report = run(&config(Suite::Prop1, Transport::Isometric));
        assert!(report.properties.iter().all(|p| p.suite == "prop1"));
        assert_eq!(report.properties.len(), 3);
    }

    #[test]
    fn report_round_trips_through_json() {
        let report = run(&config(Suite::Theorem1, Transport::CorrectionOnly));
        let text = serde_json::to_string(&report).unwrap();
        let back: InvariantReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn sampled_points_respect_the_radius() {
        let m = Lorentz::standard(3);
        let mut rng = rng::stream(1, streams::INVARIANTS);
        for _ in 0..200 {
            let x = sample_point(&m, &mut rng, 4.0);
            assert!(m.distance(&m.origin(), &x) <= 4.0 + 1e-12);
        }
        let x = sample_at_distance(&m, &mut rng, 2.5);
        assert!((m.distance(&m.origin(), &x) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn bitwise_error_flags_any_difference() {
        assert_eq!(bitwise_error(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!(bitwise_error(&[0.0], &[-0.0]) > 0.0);
        assert!(bitwise_error(&[1.0], &[1.0, 2.0]).is_infinite());
    }
}
