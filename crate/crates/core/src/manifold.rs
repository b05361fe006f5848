//! Lorentz (hyperboloid) model of hyperbolic space.
//!
//! Points of 𝕃ⁿ are (n+1)-vectors `x = (x_t, x_s)` with `x_t > 0` and
//! `⟨x, x⟩_𝓛 = 1/κ`, where `⟨x, y⟩_𝓛 = −x_t y_t + x_sᵀ y_s` and `κ < 0` is the
//! curvature. All maps here are generic over [`Real`], so the same code serves
//! plain evaluation and reverse-mode differentiation.
//!
//! Two implementation choices worth knowing about:
//!
//! - Distances and logarithms use `δ = −κ⟨x−y, x−y⟩_𝓛 / 2 = κ⟨x, y⟩_𝓛 − 1`
//!   instead of `κ⟨x, y⟩_𝓛` directly, so nearly coincident points keep their
//!   relative precision. `δ` is clamped at zero.
//! - Every map that produces a point recomputes the time component from the
//!   spatial one, `x_t = sqrt(‖x_s‖² − 1/κ)`. This is the identity on the
//!   manifold and removes accumulated drift off it.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Below this geodesic length `exp` switches to its first-order form.
pub const SMALL_ANGLE: f64 = 1e-7;
/// Below this `δ` the logarithm uses a series for `acosh(1+δ)/sqrt(δ(2+δ))`.
const SMALL_DELTA: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldConfig {
    pub curvature: f64,
    pub dim: usize,
    pub tol_manifold: f64,
    pub tol_inverse: f64,
}

impl ManifoldConfig {
    pub fn new(curvature: f64, dim: usize) -> Result<Self> {
        let cfg = Self {
            curvature,
            dim,
            tol_manifold: 1e-9,
            tol_inverse: 1e-8,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.curvature < 0.0 && self.curvature.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "curvature must be finite and negative, got {}",
                self.curvature
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if !(self.tol_manifold > 0.0 && self.tol_inverse > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            curvature: -1.0,
            dim: 2,
            tol_manifold: 1e-9,
            tol_inverse: 1e-8,
        }
    }
}

/// Which parallel-transport formula to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transport {
    /// `v + ⟨y, v⟩_𝓛 / (−1/κ − ⟨x, y⟩_𝓛) · (x + y)`, the isometry between
    /// tangent spaces.
    #[default]
    Isometric,
    /// The correction term alone, without the leading `v`. Not an isometry;
    /// exists so the invariant suites can be mutation-tested.
    CorrectionOnly,
}

/// A point on the hyperboloid. `coords[0]` is the time component.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzPoint<T> {
    coords: Vec<T>,
}

impl<T: Real> LorentzPoint<T> {
    /// Wrap raw coordinates without checking the constraint.
    pub fn from_coords_unchecked(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn time(&self) -> T {
        self.coords[0]
    }

    pub fn spatial(&self) -> &[T] {
        &self.coords[1..]
    }

    /// Number of spatial dimensions `n`.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn values(&self) -> LorentzPoint<f64> {
        LorentzPoint {
            coords: self.coords.iter().map(|c| c.value()).collect(),
        }
    }

    pub fn lift<U: Real>(&self) -> LorentzPoint<U> {
        LorentzPoint {
            coords: self.coords.iter().map(|c| U::cst(c.value())).collect(),
        }
    }
}

/// A vector in the tangent space at `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector<T> {
    pub base: LorentzPoint<T>,
    pub vec: Vec<T>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(base: LorentzPoint<T>, vec: Vec<T>) -> Self {
        Self { base, vec }
    }

    pub fn zero(base: LorentzPoint<T>) -> Self {
        let n = base.coords.len();
        Self {
            base,
            vec: vec![T::zero(); n],
        }
    }

    /// `c · v` at the same base point.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            base: self.base.clone(),
            vec: self.vec.iter().map(|&v| v * c).collect(),
        }
    }

    /// Lorentz norm `sqrt(max(⟨v, v⟩_𝓛, 0))`.
    pub fn norm(&self) -> f64 {
        inner(&self.vec, &self.vec).value().max(0.0).sqrt()
    }
}

/// Serialized point: `{"curvature", "dim", "coords"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(with = "crate::serde_f64")]
    pub curvature: f64,
    pub dim: usize,
    #[serde(with = "crate::serde_f64::vec")]
    pub coords: Vec<f64>,
}

#[inline]
pub(crate) fn inner<T: Real>(x: &[T], y: &[T]) -> T {
    T::dot(&x[1..], &y[1..]) - x[0] * y[0]
}

/// Lorentz inner product `−x₀y₀ + Σ_{i≥1} xᵢyᵢ`.
pub fn lorentz_inner<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: x.len(),
        });
    }
    Ok(inner(x, y))
}

fn euclid_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Geometry of 𝕃ⁿ at a fixed curvature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lorentz {
    cfg: ManifoldConfig,
    transport: Transport,
}

impl Lorentz {
    pub fn new(cfg: ManifoldConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            transport: Transport::Isometric,
        })
    }

    /// `κ = −1` in `n` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self::new(ManifoldConfig::new(-1.0, dim).expect("valid")).expect("valid")
    }

    pub fn with_transport(mut self, transport: Transport) -> Self {
        self.transport = transport;
        self
    }

    pub fn config(&self) -> &ManifoldConfig {
        &self.cfg
    }

    pub fn curvature(&self) -> f64 {
        self.cfg.curvature
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim
    }

    pub fn transport(&self) -> Transport {
        self.transport
    }

    /// Same curvature and transport, different dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        let cfg = ManifoldConfig { dim, ..self.cfg };
        cfg.validate()?;
        Ok(Self { cfg, ..*self })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.cfg.dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.dim + 1,
                found: len,
            });
        }
        Ok(())
    }

    /// `1/κ`, the value of `⟨x, x⟩_𝓛` on the manifold.
    fn inv_k(&self) -> f64 {
        1.0 / self.cfg.curvature
    }

    /// `o = ((−κ)^{−1/2}, 0, …, 0)`.
    pub fn origin<T: Real>(&self) -> LorentzPoint<T> {
        let mut coords = vec![T::zero(); self.cfg.dim + 1];
        coords[0] = T::cst((-self.cfg.curvature).powf(-0.5));
        LorentzPoint { coords }
    }

    /// Lift a spatial component onto the manifold: `x_t = sqrt(‖x_s‖² − 1/κ)`.
    pub fn project<T: Real>(&self, spatial: &[T]) -> Result<LorentzPoint<T>> {
        self.check_len(spatial.len() + 1)?;
        Ok(self.lift_spatial(spatial))
    }

    fn lift_spatial<T: Real>(&self, spatial: &[T]) -> LorentzPoint<T> {
        let t = (T::dot(spatial, spatial) - T::cst(self.inv_k())).sqrt();
        let mut coords = Vec::with_capacity(spatial.len() + 1);
        coords.push(t);
        coords.extend_from_slice(spatial);
        LorentzPoint { coords }
    }

    fn renormalize<T: Real>(&self, coords: &[T]) -> LorentzPoint<T> {
        self.lift_spatial(&coords[1..])
    }

    /// `|⟨x, x⟩_𝓛 − 1/κ|`.
    pub fn residual(&self, x: &LorentzPoint<f64>) -> f64 {
        (inner(&x.coords, &x.coords) - self.inv_k()).abs()
    }

    /// Validate a point: dimension, positive time, and the hyperboloid
    /// constraint to `tol_manifold`, measured relative to `max(1, x_t²)`
    /// because the constraint cannot be represented more finely than that.
    pub fn check_point(&self, x: &LorentzPoint<f64>) -> Result<()> {
        self.check_len(x.coords.len())?;
        let residual = self.residual(x);
        let scale = x.coords[0].powi(2).max(1.0);
        if !(x.coords[0] > 0.0) || !(residual <= self.cfg.tol_manifold * scale) {
            return Err(Error::OffManifold { residual });
        }
        Ok(())
    }

    /// Validate raw coordinates and wrap them as a point.
    pub fn point(&self, coords: Vec<f64>) -> Result<LorentzPoint<f64>> {
        let p = LorentzPoint { coords };
        self.check_point(&p)?;
        Ok(p)
    }

    fn check_tangent<T: Real>(&self, base: &[T], vec: &[T]) -> Result<()> {
        self.check_len(base.len())?;
        self.check_len(vec.len())?;
        let b: Vec<f64> = base.iter().map(|v| v.value()).collect();
        let v: Vec<f64> = vec.iter().map(|v| v.value()).collect();
        let residual = inner(&b, &v).abs();
        let allowed = self.cfg.tol_manifold * (1.0 + euclid_norm(&b) * euclid_norm(&v));
        if !(residual <= allowed) {
            return Err(Error::NotTangent { residual });
        }
        Ok(())
    }

    /// Project an ambient vector onto the tangent space at `x`:
    /// `u ↦ u − κ⟨x, u⟩_𝓛 x`.
    pub fn to_tangent<T: Real>(&self, x: &LorentzPoint<T>, u: &[T]) -> TangentVector<T> {
        let c = inner(&x.coords, u).scale(-self.cfg.curvature);
        let vec = u.iter().zip(&x.coords).map(|(&ui, &xi)| ui + c * xi).collect();
        TangentVector { base: x.clone(), vec }
    }

    /// `δ(x, y) = κ⟨x, y⟩_𝓛 − 1`, computed from the difference vector.
    fn delta<T: Real>(&self, x: &[T], y: &[T]) -> T {
        let diff: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
        inner(&diff, &diff).scale(-0.5 * self.cfg.curvature)
    }

    /// Geodesic distance `(−κ)^{−1/2} cosh⁻¹(κ⟨x, y⟩_𝓛)`, argument clamped
    /// to `[1, ∞)`.
    pub fn distance<T: Real>(&self, x: &LorentzPoint<T>, y: &LorentzPoint<T>) -> T {
        assert_eq!(x.coords.len(), y.coords.len(), "dimension mismatch");
        self.delta(&x.coords, &y.coords)
            .acosh1p()
            .scale((-self.cfg.curvature).powf(-0.5))
    }

    /// `exp_x(v) = cosh(φ)x + φ⁻¹ sinh(φ) v`, `φ = sqrt(−κ)‖v‖_𝓛`.
    pub fn exp_map<T: Real>(&self, v: &TangentVector<T>) -> Result<LorentzPoint<T>> {
        self.check_tangent(&v.base.coords, &v.vec)?;
        Ok(self.exp_unchecked(&v.base, &v.vec))
    }

    fn exp_unchecked<T: Real>(&self, x: &LorentzPoint<T>, v: &[T]) -> LorentzPoint<T> {
        if v.iter().all(|c| c.value() == 0.0) {
            return x.clone();
        }
        let mut sq = inner(v, v);
        if sq.value() < 0.0 {
            sq = T::zero();
        }
        let phi_sq = sq.scale(-self.cfg.curvature);
        let coords: Vec<T> = if phi_sq.value().sqrt() < SMALL_ANGLE {
            let c = T::one() + phi_sq.scale(0.5);
            x.coords.iter().zip(v).map(|(&xi, &vi)| c * xi + vi).collect()
        } else {
            let phi = phi_sq.sqrt();
            let c = phi.cosh();
            let s = phi.sinh() / phi;
            x.coords.iter().zip(v).map(|(&xi, &vi)| c * xi + s * vi).collect()
        };
        self.renormalize(&coords)
    }

    /// `log_x(u) = cosh⁻¹(ψ)/sqrt(−κ) · (u − ψx)/‖u − ψx‖_𝓛`, `ψ = κ⟨x, u⟩_𝓛`.
    ///
    /// Evaluated as `acosh(ψ)/sqrt(ψ² − 1) · (u − ψx)`, which is the same
    /// vector. Coincident points give the zero vector.
    pub fn log_map<T: Real>(&self, x: &LorentzPoint<T>, u: &LorentzPoint<T>) -> Result<TangentVector<T>> {
        self.check_len(x.coords.len())?;
        self.check_len(u.coords.len())?;
        Ok(self.log_unchecked(x, u))
    }

    fn log_unchecked<T: Real>(&self, x: &LorentzPoint<T>, u: &LorentzPoint<T>) -> TangentVector<T> {
        let diff: Vec<T> = u.coords.iter().zip(&x.coords).map(|(&a, &b)| a - b).collect();
        let delta = inner(&diff, &diff).scale(-0.5 * self.cfg.curvature);
        let d = delta.value();
        if !(d > 0.0) {
            return TangentVector::zero(x.clone());
        }
        let factor = if d < SMALL_DELTA {
            T::one() - delta.scale(1.0 / 3.0)
        } else {
            delta.acosh1p() / (delta * (delta + T::cst(2.0))).sqrt()
        };
        // u − ψx = (u − x) − δx
        let vec = diff
            .iter()
            .zip(&x.coords)
            .map(|(&di, &xi)| factor * (di - delta * xi))
            .collect();
        TangentVector { base: x.clone(), vec }
    }

    /// Parallel transport of `v ∈ 𝒯ₓ` to `𝒯_y` along the geodesic.
    pub fn parallel_transport<T: Real>(
        &self,
        x: &LorentzPoint<T>,
        y: &LorentzPoint<T>,
        v: &TangentVector<T>,
    ) -> Result<TangentVector<T>> {
        self.check_len(y.coords.len())?;
        self.check_tangent(&x.coords, &v.vec)?;
        self.transport_unchecked(x, y, &v.vec)
    }

    fn transport_unchecked<T: Real>(
        &self,
        x: &LorentzPoint<T>,
        y: &LorentzPoint<T>,
        v: &[T],
    ) -> Result<TangentVector<T>> {
        // −1/κ − ⟨x, y⟩_𝓛 = (−1/κ)(2 + δ)
        let delta = self.delta(&x.coords, &y.coords);
        let denom = (delta + T::cst(2.0)).scale(-self.inv_k());
        if !(denom.value() > 1e-300) || !denom.value().is_finite() {
            return Err(Error::DegenerateTransport);
        }
        let coef = inner(&y.coords, v) / denom;
        let vec = match self.transport {
            Transport::Isometric => v
                .iter()
                .zip(x.coords.iter().zip(&y.coords))
                .map(|(&vi, (&xi, &yi))| vi + coef * (xi + yi))
                .collect(),
            Transport::CorrectionOnly => x
                .coords
                .iter()
                .zip(&y.coords)
                .map(|(&xi, &yi)| coef * (xi + yi))
                .collect(),
        };
        Ok(TangentVector { base: y.clone(), vec })
    }

    /// `T_{x→y}(u) = exp_y(PT_{x→y}(log_x(u)))`.
    pub fn translate<T: Real>(
        &self,
        x: &LorentzPoint<T>,
        y: &LorentzPoint<T>,
        u: &LorentzPoint<T>,
    ) -> Result<LorentzPoint<T>> {
        self.check_len(x.coords.len())?;
        self.check_len(y.coords.len())?;
        self.check_len(u.coords.len())?;
        let v = self.log_unchecked(x, u);
        let w = self.transport_unchecked(x, y, &v.vec)?;
        Ok(self.exp_unchecked(y, &w.vec))
    }

    /// `u ⊖ x = T_{x→o}(u)`: the position of `u` relative to `x`, moved to
    /// the origin.
    pub fn ominus<T: Real>(&self, u: &LorentzPoint<T>, x: &LorentzPoint<T>) -> Result<LorentzPoint<T>> {
        self.translate(x, &self.origin(), u)
    }

    /// `exp_o((0, z))`.
    pub fn embed_euclidean<T: Real>(&self, z: &[T]) -> Result<LorentzPoint<T>> {
        self.check_len(z.len() + 1)?;
        let mut v = Vec::with_capacity(z.len() + 1);
        v.push(T::zero());
        v.extend_from_slice(z);
        Ok(self.exp_unchecked(&self.origin(), &v))
    }

    /// Poincaré-ball coordinates `x_s / (1 + sqrt(−κ) x_t)`.
    pub fn to_poincare(&self, x: &LorentzPoint<f64>) -> Vec<f64> {
        let s = (-self.cfg.curvature).sqrt();
        let den = 1.0 + s * x.coords[0];
        x.coords[1..].iter().map(|c| c / den).collect()
    }

    /// Points along the geodesic from `x` to `y`, `steps + 1` samples.
    pub fn geodesic(
        &self,
        x: &LorentzPoint<f64>,
        y: &LorentzPoint<f64>,
        steps: usize,
    ) -> Result<Vec<LorentzPoint<f64>>> {
        let v = self.log_map(x, y)?;
        (0..=steps)
            .map(|i| self.exp_map(&v.scaled(i as f64 / steps as f64)))
            .collect()
    }

    pub fn record(&self, x: &LorentzPoint<f64>) -> PointRecord {
        PointRecord {
            curvature: self.cfg.curvature,
            dim: self.cfg.dim,
            coords: x.coords.clone(),
        }
    }

    /// Parse and validate a serialized point against this manifold.
    pub fn from_record(&self, rec: &PointRecord) -> Result<LorentzPoint<f64>> {
        if rec.curvature != self.cfg.curvature {
            return Err(Error::Validation(format!(
                "curvature {} does not match {}",
                rec.curvature, self.cfg.curvature
            )));
        }
        if rec.dim != self.cfg.dim {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.dim,
                found: rec.dim,
            });
        }
        self.point(rec.coords.clone())
    }

    /// Test-point generator: spatial components uniform in `[−2, 2]`.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> LorentzPoint<f64> {
        let s: Vec<f64> = (0..self.cfg.dim).map(|_| rng.random_range(-2.0..=2.0)).collect();
        self.lift_spatial(&s)
    }

    /// Random tangent vector at `x` with Lorentz norm `norm`.
    pub fn random_tangent<R: Rng>(&self, rng: &mut R, x: &LorentzPoint<f64>, norm: f64) -> TangentVector<f64> {
        loop {
            let u: Vec<f64> = (0..=self.cfg.dim).map(|_| StandardNormal.sample(rng)).collect();
            let t = self.to_tangent(x, &u);
            let n = t.norm();
            if n > 1e-6 {
                return t.scaled(norm / n);
            }
        }
    }

    /// One draw from the wrapped normal `𝒢(μ, Σ)`.
    pub fn sample_wrapped_normal(&self, params: &WrappedNormalParams) -> Result<LorentzPoint<f64>> {
        let factor = params.factor()?;
        let mut rng = rng::stream(params.seed, 0);
        self.sample_wrapped_normal_with(&params.mean, &factor, &mut rng)
    }

    /// Draw from the wrapped normal given a factor `L` with `L Lᵀ = Σ`:
    /// `e ~ N(0, Σ)`, `x = embed(e)`, result `exp_μ(PT_{o→μ}(log_o(x)))`.
    pub fn sample_wrapped_normal_with<R: Rng>(
        &self,
        mean: &LorentzPoint<f64>,
        factor: &CovarianceFactor,
        rng: &mut R,
    ) -> Result<LorentzPoint<f64>> {
        self.check_len(mean.coords.len())?;
        if factor.dim() != self.cfg.dim {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.dim,
                found: factor.dim(),
            });
        }
        let xi: Vec<f64> = (0..self.cfg.dim).map(|_| StandardNormal.sample(rng)).collect();
        let e = factor.apply(&xi);
        let x = self.embed_euclidean(&e)?;
        let o = self.origin();
        let v = self.log_unchecked(&o, &x);
        let w = self.transport_unchecked(&o, mean, &v.vec)?;
        Ok(self.exp_unchecked(mean, &w.vec))
    }
}

/// Parameters of a wrapped normal distribution.
#[derive(Clone, Debug)]
pub struct WrappedNormalParams {
    pub mean: LorentzPoint<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub seed: u64,
}

impl WrappedNormalParams {
    /// `Σ = σ² I`.
    pub fn isotropic(mean: LorentzPoint<f64>, sigma: f64, seed: u64) -> Self {
        let n = mean.dim();
        let covariance = (0..n)
            .map(|i| (0..n).map(|j| if i == j { sigma * sigma } else { 0.0 }).collect())
            .collect();
        Self { mean, covariance, seed }
    }

    pub fn factor(&self) -> Result<CovarianceFactor> {
        CovarianceFactor::new(&self.covariance)
    }
}

/// Lower-triangular `L` with `L Lᵀ = Σ` for a positive-semidefinite `Σ`.
#[derive(Clone, Debug)]
pub struct CovarianceFactor {
    lower: Vec<Vec<f64>>,
}

impl CovarianceFactor {
    pub fn new(cov: &[Vec<f64>]) -> Result<Self> {
        let n = cov.len();
        for (i, row) in cov.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidCovariance(format!("row {i} has length {}", row.len())));
            }
            if !(row[i] >= 0.0) {
                return Err(Error::InvalidCovariance(format!("negative diagonal at {i}")));
            }
            for j in 0..i {
                if (row[j] - cov[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidCovariance(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        let scale = (0..n).map(|i| cov[i][i]).fold(0.0f64, f64::max).max(1.0);
        let tol = 1e-12 * scale;
        let mut lower = vec![vec![0.0; n]; n];
        for j in 0..n {
            let d = cov[j][j] - (0..j).map(|k| lower[j][k] * lower[j][k]).sum::<f64>();
            if d < -tol {
                return Err(Error::InvalidCovariance(format!("negative pivot {d:e} at {j}")));
            }
            if d <= tol {
                for i in j + 1..n {
                    let r = cov[i][j] - (0..j).map(|k| lower[i][k] * lower[j][k]).sum::<f64>();
                    if r.abs() > 1e-9 * scale {
                        return Err(Error::InvalidCovariance(format!("inconsistent null direction at {j}")));
                    }
                }
                continue;
            }
            let ljj = d.sqrt();
            lower[j][j] = ljj;
            for i in j + 1..n {
                let r = cov[i][j] - (0..j).map(|k| lower[i][k] * lower[j][k]).sum::<f64>();
                lower[i][j] = r / ljj;
            }
        }
        Ok(Self { lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn apply(&self, xi: &[f64]) -> Vec<f64> {
        self.lower
            .iter()
            .map(|row| row.iter().zip(xi).map(|(l, x)| l * x).sum())
            .collect()
    }
}
