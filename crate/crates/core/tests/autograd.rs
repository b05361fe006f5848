use hkconv::autograd::*;
use hkconv::layers::{hlinear, Activation, HLinearShape};
use hkconv::manifold::{Lorentz, TangentVector};
use hkconv::rng::{self, streams};
use hkconv::{Real, Result};
use proptest::prelude::*;

struct SquaredDistance;

impl ScalarLoss for SquaredDistance {
    fn eval<T: Real>(&self, p: &Leaves<T>) -> Result<T> {
        let m = Lorentz::standard(2);
        let o = m.origin::<T>();
        let v = p.get("v")?;
        let y = m.exp_map(&TangentVector::new(o.clone(), vec![T::zero(), v[0], v[1]]))?;
        Ok(m.distance(&o, &y).square())
    }
}

struct Scaled<L>(f64, L);

impl<L: ScalarLoss> ScalarLoss for Scaled<L> {
    fn eval<T: Real>(&self, p: &Leaves<T>) -> Result<T> {
        Ok(self.1.eval(p)?.scale(self.0))
    }
}

struct HLinearOnly(HLinearShape);

impl ScalarLoss for HLinearOnly {
    fn eval<T: Real>(&self, p: &Leaves<T>) -> Result<T> {
        let input = Lorentz::standard(self.0.in_dim);
        let output = Lorentz::standard(self.0.out_dim);
        let x = input.project(&[T::cst(0.7), T::cst(-0.4), T::cst(1.2)])?;
        let y = hlinear(&output, &x, &self.0.bind(p, "h")?, &mut None)?;
        let target = output.project(&[T::cst(0.1), T::cst(0.3)])?;
        Ok(output.distance(&y, &target))
    }
}

struct Quadratic;

impl ScalarLoss for Quadratic {
    fn eval<T: Real>(&self, p: &Leaves<T>) -> Result<T> {
        let w = p.get("w")?;
        let mut acc = T::zero();
        for (i, &x) in w.iter().enumerate() {
            let d = x - T::cst(i as f64 * 0.5 - 2.0);
            acc = acc + d.square().scale(1.0 + i as f64);
        }
        Ok(acc)
    }
}

fn v_store(v: [f64; 2]) -> ParamStore {
    let mut s = ParamStore::new();
    s.insert("v", vec![2], v.to_vec());
    s
}

fn hlinear_store(shape: &HLinearShape, seed: u64) -> ParamStore {
    let mut s = ParamStore::new();
    shape.init(&mut s, "h", &mut rng::stream(seed, streams::PARAM_INIT));
    s.get_mut("h.v").unwrap().data = vec![0.3, -0.2, 0.5, 0.1];
    s.get_mut("h.b_prime").unwrap().data = vec![-0.4];
    s
}

#[test]
fn squared_distance_after_exp_has_gradient_two_v() {
    for v in [[0.3, -0.8], [1.5, 2.0], [-0.01, 0.02]] {
        let (_, g) = grad(&SquaredDistance, &v_store(v)).unwrap();
        let g = g.get("v").unwrap();
        for (gi, vi) in g.iter().zip(v) {
            assert!((gi - 2.0 * vi).abs() <= 1e-12 * (1.0 + vi.abs()), "{g:?} vs {v:?}");
        }
    }
}

#[test]
fn hlinear_gradients_match_finite_differences() {
    let shape = HLinearShape::new(3, 2, Activation::Tanh);
    let store = hlinear_store(&shape, 1);
    let report = finite_diff_check(&HLinearOnly(shape), &store, 1e-5, 5, 2).unwrap();
    assert_eq!(report.entries.len(), 5);
    assert!(report.max_rel_error() <= 1e-5, "{report:?}");
}

#[test]
fn adam_reaches_the_minimum_of_a_convex_quadratic() {
    let mut store = ParamStore::new();
    store.insert("w", vec![10], vec![0.0; 10]);
    let cfg = AdamConfig::new(0.01, 0.0);
    for _ in 0..5000 {
        let (_, g) = grad(&Quadratic, &store).unwrap();
        adam_step(&mut store, &g, &cfg).unwrap();
    }
    for (i, w) in store.get("w").unwrap().data.iter().enumerate() {
        assert!((w - (i as f64 * 0.5 - 2.0)).abs() <= 1e-6, "w[{i}] = {w}");
    }
}

#[test]
fn adam_trajectories_are_reproducible() {
    let run = || {
        let shape = HLinearShape::new(3, 2, Activation::Relu);
        let mut store = hlinear_store(&shape, 9);
        for _ in 0..50 {
            let (_, g) = grad(&HLinearOnly(shape), &store).unwrap();
            adam_step(&mut store, &g, &AdamConfig::new(1e-2, 1e-3)).unwrap();
        }
        store
            .values::<f64>()
            .iter()
            .map(|(_, v)| v.to_vec())
            .collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    let bits = |x: &Vec<Vec<f64>>| x.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn distance_gradient_step_shortens_the_distance_by_the_step() {
    let m = Lorentz::standard(2);
    let o = m.origin::<f64>();
    let x = m.exp_map(&TangentVector::new(o.clone(), vec![0.0, 0.6, 0.8])).unwrap();
    assert!((m.distance(&o, &x) - 1.0).abs() < 1e-12);
    // grad of d(o, ·) at x is −log_x(o) / d(o, x)
    let g = m.log_map(&x, &o).unwrap().scaled(-1.0);
    let y = rgd_step(&m, &x, &g, 0.1).unwrap();
    assert!((m.distance(&o, &y) - 0.9).abs() <= 1e-9);
    assert_eq!(rgd_step(&m, &x, &g.scaled(0.0), 0.1).unwrap(), x);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_linear_in_the_output_scale(v0 in -2.0f64..2.0, v1 in -2.0f64..2.0, k in -4i32..4) {
        let a = 2f64.powi(k);
        let store = v_store([v0, v1]);
        let (_, g) = grad(&SquaredDistance, &store).unwrap();
        let (_, ga) = grad(&Scaled(a, SquaredDistance), &store).unwrap();
        for (x, y) in g.get("v").unwrap().iter().zip(ga.get("v").unwrap()) {
            prop_assert_eq!((a * x).to_bits(), y.to_bits());
        }
    }
}
