//! Hyperbolic layers: HLinear, HCent, HCDist, attention weights and the
//! kernel-point convolution HKConv.
//!
//! Every routine is generic over [`Real`], so the same code runs on plain
//! floats and on tape-tracked scalars. Parameters are owned by a
//! [`ParamStore`] and bound to a scalar type for one forward pass.

use std::cmp::Ordering;

use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::autograd::{scope, Leaves, ParamStore};
use crate::error::{Error, Result};
use crate::kernelgen::KernelSet;
use crate::manifold::{Lorentz, LorentzPoint};
use crate::rng::Rng;
use crate::scalar::Real;

/// Below this norm the HLinear direction is undefined.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;

/// Componentwise activation `τ` applied to all `m + 1` input coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.relu(),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// How HKConv positions a neighbor relative to the kernels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    /// Neighbors are moved to the origin with `xᵢ ⊖ x` first.
    #[default]
    Relative,
    /// Linear maps act on raw neighbors; kernels are translated to `x`.
    Direct,
}

/// Neighborhood pooling weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Uniform,
    Attention,
}

/// Inverted dropout on Euclidean pre-activations.
pub struct Dropout<'a> {
    rate: f64,
    rng: &'a mut Rng,
}

impl<'a> Dropout<'a> {
    pub fn new(rate: f64, rng: &'a mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, rng })
    }

    /// Multipliers `0` or `1/(1 − rate)`. A mask that would drop every entry
    /// is redrawn.
    pub fn mask(&mut self, len: usize) -> Vec<f64> {
        let keep = 1.0 / (1.0 - self.rate);
        loop {
            let mask: Vec<f64> = (0..len)
                .map(|_| {
                    if self.rng.random::<f64>() < self.rate {
                        0.0
                    } else {
                        keep
                    }
                })
                .collect();
            if self.rate == 0.0 || mask.iter().any(|&v| v > 0.0) {
                return mask;
            }
        }
    }
}

fn apply_mask<T: Real>(xs: &mut [T], dropout: &mut Option<&mut Dropout<'_>>) {
    if let Some(d) = dropout.as_deref_mut() {
        if d.rate > 0.0 {
            let mask = d.mask(xs.len());
            for (x, m) in xs.iter_mut().zip(mask) {
                *x = x.scale(m);
            }
        }
    }
}

/// Raw feature dropout for embedding inputs.
pub fn dropout_features(xs: &mut [f64], dropout: &mut Option<&mut Dropout<'_>>) {
    apply_mask(xs, dropout);
}

/// Shape of one HLinear sublayer: `𝕃^m → 𝕃ⁿ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HLinearShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl HLinearShape {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    /// Register freshly initialized leaves under `prefix`: `W` uniform in
    /// `±(m+1)^{-1/2}`, `b = 0`, `v = 0`, `b′ = 0`, `λ = 1`.
    pub fn init(&self, store: &mut ParamStore, prefix: &str, rng: &mut Rng) {
        let cols = self.in_dim + 1;
        let a = (cols as f64).powf(-0.5);
        let dist = Uniform::new_inclusive(-a, a).expect("valid bounds");
        let w: Vec<f64> = (0..self.out_dim * cols).map(|_| dist.sample(rng)).collect();
        store.insert(format!("{prefix}.W"), vec![self.out_dim, cols], w);
        store.insert(format!("{prefix}.b"), vec![self.out_dim], vec![0.0; self.out_dim]);
        store.insert(format!("{prefix}.v"), vec![cols], vec![0.0; cols]);
        store.insert(format!("{prefix}.b_prime"), vec![1], vec![0.0]);
        store.insert(format!("{prefix}.log_lambda"), vec![1], vec![0.0]);
    }

    /// Read this sublayer's leaves from `leaves`.
    pub fn bind<T: Real>(&self, leaves: &Leaves<T>, prefix: &str) -> Result<HLinearParams<T>> {
        let cols = self.in_dim + 1;
        let get = |name: &str, len: usize| -> Result<Vec<T>> {
            let path = format!("{prefix}.{name}");
            let v = leaves.get(&path)?;
            if v.len() != len {
                return Err(Error::ShapeMismatch {
                    path,
                    expected: vec![len],
                    found: vec![v.len()],
                });
            }
            Ok(v.to_vec())
        };
        Ok(HLinearParams {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            w: get("W", self.out_dim * cols)?,
            v: get("v", cols)?,
            b: get("b", self.out_dim)?,
            b_prime: get("b_prime", 1)?[0],
            log_lambda: get("log_lambda", 1)?[0],
            activation: self.activation,
        })
    }
}

/// HLinear weights bound to a scalar type. `W` is row-major `n × (m+1)`;
/// `λ` is stored as its logarithm.
#[derive(Clone, Debug)]
pub struct HLinearParams<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<T>,
    pub v: Vec<T>,
    pub b: Vec<T>,
    pub b_prime: T,
    pub log_lambda: T,
    pub activation: Activation,
}

impl<T: Real> HLinearParams<T> {
    pub fn lambda(&self) -> T {
        self.log_lambda.exp()
    }
}

/// `y = (sqrt(‖h‖² − 1/κ), h)` with
/// `h = λ σ(vᵀx + b′) (Wτ(x) + b) / ‖Wτ(x) + b‖`.
///
/// `out` is the output manifold 𝕃ⁿ. Dropout, if given, masks `Wτ(x) + b`.
pub fn hlinear<T: Real>(
    out: &Lorentz,
    x: &LorentzPoint<T>,
    p: &HLinearParams<T>,
    dropout: &mut Option<&mut Dropout<'_>>,
) -> Result<LorentzPoint<T>> {
    let cols = p.in_dim + 1;
    if x.coords().len() != cols {
        return Err(Error::DimensionMismatch {
            expected: cols,
            found: x.coords().len(),
        });
    }
    if out.dim() != p.out_dim {
        return Err(Error::DimensionMismatch {
            expected: p.out_dim,
            found: out.dim(),
        });
    }
    let tx: Vec<T> = x.coords().iter().map(|&c| p.activation.apply(c)).collect();
    let mut a: Vec<T> =
        p.w.chunks_exact(cols)
            .zip(&p.b)
            .map(|(row, &bi)| T::dot(row, &tx) + bi)
            .collect();
    apply_mask(&mut a, dropout);
    let norm = T::dot(&a, &a).sqrt();
    if !(norm.value() >= MIN_DIRECTION_NORM) {
        return Err(Error::DegenerateDirection { norm: norm.value() });
    }
    let gate = (T::dot(&p.v, x.coords()) + p.b_prime).sigmoid();
    let s = p.lambda() * gate / norm;
    let h: Vec<T> = a.into_iter().map(|ai| ai * s).collect();
    out.project(&h)
}

/// Validated nonnegative weights with positive sum.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Real> WeightVector<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

fn check_weights<T: Real>(weights: &[T]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(w.value() >= 0.0) || !w.value().is_finite()) {
        return Err(Error::InvalidWeights(format!(
            "weight {} is negative or not finite",
            w.value()
        )));
    }
    if !(weights.iter().map(|w| w.value()).sum::<f64>() > 0.0) {
        return Err(Error::InvalidWeights("weights sum to zero".into()));
    }
    Ok(())
}

/// Weighted Lorentzian centroid
/// `Σνᵢxᵢ / (sqrt(−κ) |‖Σνᵢxᵢ‖_𝓛|)`, summed in slice order.
pub fn hcent<T: Real>(m: &Lorentz, points: &[LorentzPoint<T>], weights: &[T]) -> Result<LorentzPoint<T>> {
    if points.is_empty() {
        return Err(Error::InvalidWeights("centroid of an empty set".into()));
    }
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: weights.len(),
        });
    }
    check_weights(weights)?;
    let n = m.dim() + 1;
    let mut s = vec![T::zero(); n];
    for (p, &w) in points.iter().zip(weights) {
        if p.coords().len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.coords().len(),
            });
        }
        for (si, &xi) in s.iter_mut().zip(p.coords()) {
            *si = *si + w * xi;
        }
    }
    // Σνᵢxᵢ is future timelike, so ⟨s, s⟩_𝓛 < 0.
    let sq = T::dot(&s[1..], &s[1..]) - s[0] * s[0];
    let den = (-sq).sqrt().scale((-m.curvature()).sqrt());
    let spatial: Vec<T> = s[1..].iter().map(|&c| c / den).collect();
    m.project(&spatial)
}

/// Distances from `x` to every centroid.
pub fn hcdist<T: Real>(m: &Lorentz, x: &LorentzPoint<T>, bank: &CentroidBank<T>) -> Result<Vec<T>> {
    bank.centroids
        .iter()
        .map(|c| {
            if c.coords().len() != x.coords().len() {
                return Err(Error::DimensionMismatch {
                    expected: x.coords().len(),
                    found: c.coords().len(),
                });
            }
            Ok(m.distance(x, c))
        })
        .collect()
}

/// `ℓ` centroids in 𝕃ⁿ for the distance head.
#[derive(Clone, Debug)]
pub struct CentroidBank<T> {
    pub centroids: Vec<LorentzPoint<T>>,
}

impl<T: Real> CentroidBank<T> {
    /// Realize Euclidean parameters `z` (row-major `ℓ × n`) as
    /// `embed_euclidean(zᵢ)`.
    pub fn from_euclidean(m: &Lorentz, z: &[T]) -> Result<Self> {
        let n = m.dim();
        if z.is_empty() || !z.len().is_multiple_of(n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: z.len(),
            });
        }
        Ok(Self {
            centroids: z
                .chunks_exact(n)
                .map(|zi| m.embed_euclidean(zi))
                .collect::<Result<_>>()?,
        })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

/// Row-stochastic weights `softmax_j(−d²(qᵢ, kⱼ)/√n)`.
pub fn attention_weights<T: Real>(
    m: &Lorentz,
    queries: &[LorentzPoint<T>],
    keys: &[LorentzPoint<T>],
    n: usize,
) -> Result<Vec<Vec<T>>> {
    if queries.is_empty() || keys.is_empty() || n == 0 {
        return Err(Error::InvalidConfig("attention needs queries, keys and n > 0".into()));
    }
    let scale = -1.0 / (n as f64).sqrt();
    queries
        .iter()
        .map(|q| {
            let logits: Vec<T> = keys.iter().map(|k| m.distance(q, k).square().scale(scale)).collect();
            let max = logits.iter().map(|l| l.value()).fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<T> = logits.iter().map(|&l| (l - T::cst(max)).exp()).collect();
            let z = T::sum(&e);
            Ok(e.into_iter().map(|ei| ei / z).collect())
        })
        .collect()
}

/// Structure of one HKConv layer: `K` sublayers `𝕃^m → 𝕃ⁿ` sharing one
/// kernel set in 𝕃^m.
#[derive(Clone, Debug, PartialEq)]
pub struct HKConvLayer {
    pub sublayer: HLinearShape,
    pub kernels: KernelSet,
    pub mode: ConvMode,
    pub pooling: Pooling,
}

impl HKConvLayer {
    pub fn new(sublayer: HLinearShape, kernels: KernelSet, mode: ConvMode, pooling: Pooling) -> Result<Self> {
        if kernels.dim() != sublayer.in_dim {
            return Err(Error::InvalidConfig(format!(
                "kernels live in dimension {} but the layer input has dimension {}",
                kernels.dim(),
                sublayer.in_dim
            )));
        }
        Ok(Self {
            sublayer,
            kernels,
            mode,
            pooling,
        })
    }

    pub fn k(&self) -> usize {
        self.kernels.k()
    }

    fn sub_prefix(prefix: &str, k: usize) -> String {
        format!("{prefix}.k{k}")
    }

    pub fn init(&self, store: &mut ParamStore, prefix: &str, rng: &mut Rng) {
        for k in 0..self.k() {
            self.sublayer.init(store, &Self::sub_prefix(prefix, k), rng);
        }
    }

    pub fn bind<T: Real>(&self, leaves: &Leaves<T>, prefix: &str) -> Result<HKConvParams<T>> {
        let sublayers = (0..self.k())
            .map(|k| self.sublayer.bind(leaves, &Self::sub_prefix(prefix, k)))
            .collect::<Result<Vec<_>>>()?;
        Ok(HKConvParams {
            sublayers,
            kernels: self.kernels.points().iter().map(LorentzPoint::lift).collect(),
            input: self.kernels.manifold(),
            output: self.kernels.manifold().with_dim(self.sublayer.out_dim)?,
            mode: self.mode,
            pooling: self.pooling,
        })
    }
}

/// HKConv parameters bound to a scalar type.
#[derive(Clone, Debug)]
pub struct HKConvParams<T> {
    pub sublayers: Vec<HLinearParams<T>>,
    /// Kernel points lifted as constants.
    pub kernels: Vec<LorentzPoint<T>>,
    pub input: Lorentz,
    pub output: Lorentz,
    pub mode: ConvMode,
    pub pooling: Pooling,
}

/// Total order on points by coordinate values.
pub fn canonical_cmp<T: Real>(a: &LorentzPoint<T>, b: &LorentzPoint<T>) -> Ordering {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(x, y)| x.value().total_cmp(&y.value()))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Indices of `points` in canonical order, so that sums over a neighborhood
/// do not depend on how the nodes happen to be numbered.
pub fn canonical_order<T: Real>(points: &[&LorentzPoint<T>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| canonical_cmp(points[i], points[j]));
    idx
}

/// One HKConv application at node `x`.
///
/// For each neighbor `xᵢ` the `K` sublayer outputs are averaged with weights
/// `νₖ` equal to the kernel distances, then the per-neighbor results are
/// pooled with uniform or attention weights. Neighbors are visited in
/// [`canonical_order`]; `attn[i]` belongs to `neighbors[i]`.
pub fn hkconv<T: Real>(
    x: &LorentzPoint<T>,
    neighbors: &[&LorentzPoint<T>],
    p: &HKConvParams<T>,
    attn: Option<&[T]>,
    dropout: &mut Option<&mut Dropout<'_>>,
) -> Result<LorentzPoint<T>> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighborhood(0));
    }
    if p.sublayers.len() != p.kernels.len() {
        return Err(Error::InvalidConfig(format!(
            "{} sublayers for {} kernels",
            p.sublayers.len(),
            p.kernels.len()
        )));
    }
    match (p.pooling, attn) {
        (Pooling::Attention, Some(w)) if w.len() == neighbors.len() => {}
        (Pooling::Attention, Some(w)) => {
            return Err(Error::DimensionMismatch {
                expected: neighbors.len(),
                found: w.len(),
            })
        }
        (Pooling::Attention, None) => return Err(Error::InvalidConfig("attention pooling needs weights".into())),
        (Pooling::Uniform, Some(_)) => {
            return Err(Error::InvalidConfig("weights supplied with uniform pooling".into()))
        }
        (Pooling::Uniform, None) => {}
    }

    let _scope = scope("hkconv");
    let m = &p.input;
    // Direct mode compares raw neighbors with kernels moved next to x.
    let moved: Vec<LorentzPoint<T>> = match p.mode {
        ConvMode::Relative => Vec::new(),
        ConvMode::Direct => {
            let o = m.origin();
            p.kernels.iter().map(|k| m.translate(&o, x, k)).collect::<Result<_>>()?
        }
    };

    let order = canonical_order(neighbors);
    let mut pooled = Vec::with_capacity(order.len());
    let mut weights = Vec::with_capacity(order.len());
    for &i in &order {
        let xi = neighbors[i];
        let (input, kernels) = match p.mode {
            ConvMode::Relative => (m.ominus(xi, x)?, &p.kernels),
            ConvMode::Direct => (xi.clone(), &moved),
        };
        let nu: Vec<T> = kernels.iter().map(|k| m.distance(&input, k)).collect();
        if nu.iter().all(|v| v.value() == 0.0) {
            return Err(Error::InvariantViolation(
                "neighbor coincides with every kernel point".into(),
            ));
        }
        let outs = p
            .sublayers
            .iter()
            .map(|sub| hlinear(&p.output, &input, sub, dropout))
            .collect::<Result<Vec<_>>>()?;
        pooled.push(hcent(&p.output, &outs, &nu)?);
        weights.push(match attn {
            Some(w) => w[i],
            None => T::one(),
        });
    }
    hcent(&p.output, &pooled, &weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernelgen::{random_kernels, Provenance};
    use crate::manifold::ManifoldConfig;
    use crate::rng::{self, streams};

    fn identity_params(out_dim: usize, lambda: f64) -> HLinearParams<f64> {
        // W = [0 I₂]
        HLinearParams {
            in_dim: 2,
            out_dim,
            w: vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            v: vec![0.0; 3],
            b: vec![0.0; 2],
            b_prime: 0.0,
            log_lambda: lambda.ln(),
            activation: Activation::Identity,
        }
    }

    #[test]
    fn hlinear_drops_time_and_scales_direction() {
        let m = Lorentz::standard(2);
        let x = m.point(vec![1f64.cosh(), 1f64.sinh(), 0.0]).unwrap();
        let y = hlinear(&m, &x, &identity_params(2, 2.0), &mut None).unwrap();
        assert!((y.coords()[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((y.coords()[1] - 1.0).abs() < 1e-15);
        assert_eq!(y.coords()[2], 0.0);
    }

    #[test]
    fn hlinear_degenerate_direction_is_an_error() {
        let m = Lorentz::standard(2);
        let mut p = identity_params(2, 1.0);
        p.w = vec![0.0; 6];
        let err = hlinear(&m, &m.origin(), &p, &mut None).unwrap_err();
        assert!(matches!(err, Error::DegenerateDirection { .. }));
    }

    #[test]
    fn hcent_of_symmetric_pair_is_origin() {
        let m = Lorentz::standard(2);
        let a = m.point(vec![1f64.cosh(), 1f64.sinh(), 0.0]).unwrap();
        let b = m.point(vec![1f64.cosh(), -1f64.sinh(), 0.0]).unwrap();
        let c = hcent(&m, &[a, b], &[1.0, 1.0]).unwrap();
        assert_eq!(c.coords(), m.origin::<f64>().coords());
    }

    #[test]
    fn hcent_rejects_bad_weights() {
        let m = Lorentz::standard(2);
        let o = m.origin::<f64>();
        assert!(hcent(&m, std::slice::from_ref(&o), &[0.0]).is_err());
        assert!(hcent(&m, &[o.clone(), o], &[1.0, -0.5]).is_err());
        assert!(WeightVector::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn attention_singleton_and_equidistant() {
        let m = Lorentz::standard(2);
        let o = m.origin::<f64>();
        let a = m.project(&[0.5, 0.0]).unwrap();
        let b = m.project(&[-0.5, 0.0]).unwrap();
        let w = attention_weights(&m, std::slice::from_ref(&a), std::slice::from_ref(&b), 2).unwrap();
        assert_eq!(w, vec![vec![1.0]]);
        let w = attention_weights(&m, &[o], &[a, b], 2).unwrap();
        assert_eq!(w[0], vec![0.5, 0.5]);
    }

    #[test]
    fn dropout_never_drops_everything() {
        let mut r = rng::stream(0, streams::DROPOUT);
        let mut d = Dropout::new(0.9, &mut r).unwrap();
        for _ in 0..200 {
            let mask = d.mask(2);
            assert!(mask.iter().any(|&v| v > 0.0));
            assert!(mask.iter().all(|&v| v == 0.0 || (v - 10.0).abs() < 1e-12));
        }
        assert!(Dropout::new(1.0, &mut r).is_err());
    }

    #[test]
    fn hkconv_with_self_neighbor_depends_only_on_parameters() {
        let cfg = ManifoldConfig {
            dim: 3,
            ..Default::default()
        };
        let kernels = random_kernels(3, 3, 1, &cfg).unwrap();
        assert_eq!(kernels.provenance(), Provenance::RandomWrappedNormal);
        let layer = HKConvLayer::new(
            HLinearShape::new(3, 2, Activation::Identity),
            kernels,
            ConvMode::Relative,
            Pooling::Uniform,
        )
        .unwrap();
        let mut store = ParamStore::new();
        layer.init(&mut store, "l", &mut rng::stream(0, streams::PARAM_INIT));
        let p = layer.bind::<f64>(&store.values(), "l").unwrap();
        let m = p.input;
        let mut r = rng::stream(3, streams::INVARIANTS);
        let o = m.origin::<f64>();
        let expect = {
            let outs: Vec<_> = p
                .sublayers
                .iter()
                .map(|s| hlinear(&p.output, &o, s, &mut None).unwrap())
                .collect();
            let nu: Vec<f64> = p.kernels.iter().map(|k| m.distance(&o, k)).collect();
            hcent(&p.output, &outs, &nu).unwrap()
        };
        for _ in 0..5 {
            let x = m.random_point(&mut r);
            let y = hkconv(&x, &[&x], &p, None, &mut None).unwrap();
            for (a, b) in y.coords().iter().zip(expect.coords()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn pooling_and_weights_must_agree() {
        let cfg = ManifoldConfig {
            dim: 2,
            ..Default::default()
        };
        let layer = HKConvLayer::new(
            HLinearShape::new(2, 2, Activation::Identity),
            random_kernels(2, 2, 0, &cfg).unwrap(),
            ConvMode::Relative,
            Pooling::Uniform,
        )
        .unwrap();
        let mut store = ParamStore::new();
        layer.init(&mut store, "l", &mut rng::stream(0, streams::PARAM_INIT));
        let p = layer.bind::<f64>(&store.values(), "l").unwrap();
        let o = p.input.origin::<f64>();
        assert!(hkconv(&o, &[&o], &p, Some(&[1.0]), &mut None).is_err());
        assert!(matches!(
            hkconv(&o, &[], &p, None, &mut None),
            Err(Error::EmptyNeighborhood(_))
        ));
    }
}
