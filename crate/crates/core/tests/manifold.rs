use hkconv::manifold::{lorentz_inner, Lorentz, ManifoldConfig, WrappedNormalParams};
use hkconv::Point;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn manifold(curvature: f64, dim: usize) -> Lorentz {
    Lorentz::new(ManifoldConfig::new(curvature, dim).unwrap()).unwrap()
}

/// Poincaré-ball distance for κ = −1, written out independently of the
/// hyperboloid formulas.
fn ball_distance(p: &[f64], q: &[f64]) -> f64 {
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let diff: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
    (1.0 + 2.0 * sq(&diff) / ((1.0 - sq(p)) * (1.0 - sq(q)))).acosh()
}

fn ball(x: &Point) -> Vec<f64> {
    let t = x.time();
    x.spatial().iter().map(|s| s / (1.0 + t)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn distance_matches_arc_length_of_the_radial_curve() {
    let m = Lorentz::standard(2);
    // γ(s) = (sqrt(1 + r(s)²), r(s), 0) with r(s) = s sinh 2; integrate the
    // Lorentz speed with composite Simpson.
    let n = 2000;
    let point = |s: f64| {
        let r = s * 2f64.sinh();
        [(1.0 + r * r).sqrt(), r, 0.0]
    };
    let speed = |s: f64| {
        let h = 1e-6;
        let (a, b) = (point(s - h), point(s + h));
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (y - x) / (2.0 * h)).collect();
        (d[1] * d[1] + d[2] * d[2] - d[0] * d[0]).sqrt()
    };
    let step = 1.0 / n as f64;
    let mut acc = speed(1e-6) + speed(1.0 - 1e-6);
    for i in 1..n {
        acc += speed(i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let arc = acc * step / 3.0;
    let target = m.point(vec![2f64.cosh(), 2f64.sinh(), 0.0]).unwrap();
    let d = m.distance(&m.origin(), &target);
    assert!((d - 2.0).abs() < 1e-12);
    assert!((arc - d).abs() < 1e-6, "arc {arc} vs {d}");
}

#[test]
fn exp_and_log_examples_agree_with_the_constraint() {
    let m = Lorentz::standard(2);
    let o = m.origin::<f64>();
    let y = m.exp_map(&m.to_tangent(&o, &[0.0, 1.0, 0.0])).unwrap();
    assert!((lorentz_inner(y.coords(), y.coords()).unwrap() + 1.0).abs() < 1e-14);
    assert!((m.distance(&o, &y) - 1.0).abs() < 1e-14);
    let v = m.log_map(&o, &y).unwrap();
    assert!(v.vec[0].abs() < 1e-14 && (v.vec[1] - 1.0).abs() < 1e-14 && v.vec[2].abs() < 1e-14);
}

#[test]
fn origin_scales_with_curvature() {
    assert_eq!(manifold(-4.0, 2).origin::<f64>().coords(), &[0.5, 0.0, 0.0]);
    let m = manifold(-0.25, 1);
    let p = m.project(&[1.0]).unwrap();
    assert!((p.time() - 5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn embedded_vectors_keep_their_length() {
    let m = Lorentz::standard(3);
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let z: Vec<f64> = (0..3).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let x = m.embed_euclidean(&z).unwrap();
        assert!(rel(m.distance(&m.origin(), &x), norm) < 1e-10);
    }
}

#[test]
fn wrapped_normal_spreads_with_sigma() {
    let m = Lorentz::standard(2);
    let mean = m.project(&[0.4, -0.3]).unwrap();
    let mean_distance = |sigma: f64| {
        let params = WrappedNormalParams::isotropic(mean.clone(), sigma, 0);
        let factor = params.factor().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(162);
        let total: f64 = (0..10_000)
            .map(|_| {
                let x = m.sample_wrapped_normal_with(&mean, &factor, &mut rng).unwrap();
                assert!(m.residual(&x) < 1e-9);
                m.distance(&mean, &x)
            })
            .sum();
        total / 10_000.0
    };
    let spreads: Vec<f64> = [0.1, 0.5, 1.0].iter().map(|&s| mean_distance(s)).collect();
    assert!(spreads.iter().all(|s| s.is_finite()));
    assert!(spreads[0] < spreads[1] && spreads[1] < spreads[2], "{spreads:?}");
    // a Rayleigh radius with σ = 0.1 has mean σ sqrt(π/2)
    assert!((spreads[0] - 0.1 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 3e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn distance_agrees_with_the_ball_model(seed in any::<u64>(), dim in 1usize..5) {
        let m = Lorentz::standard(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (m.random_point(&mut rng), m.random_point(&mut rng));
        let d = m.distance(&x, &y);
        prop_assert!(rel(d, ball_distance(&ball(&x), &ball(&y))) < 1e-9);
        prop_assert_eq!(d, m.distance(&y, &x));
    }

    #[test]
    fn exp_moves_by_the_tangent_norm(seed in any::<u64>(), norm in 1e-6f64..5.0) {
        let m = Lorentz::standard(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = m.random_point(&mut rng);
        let v = m.random_tangent(&mut rng, &x, norm);
        let y = m.exp_map(&v).unwrap();
        prop_assert!(m.residual(&y) <= 1e-9 * y.time() * y.time());
        prop_assert!(rel(m.distance(&x, &y), norm) < 1e-8);
    }

    #[test]
    fn transport_is_a_linear_isometry(seed in any::<u64>()) {
        let m = Lorentz::standard(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (m.random_point(&mut rng), m.random_point(&mut rng));
        let u = m.random_tangent(&mut rng, &x, 1.0);
        let v = m.random_tangent(&mut rng, &x, 2.0);
        let (pu, pv) = (m.parallel_transport(&x, &y, &u).unwrap(), m.parallel_transport(&x, &y, &v).unwrap());
        let before = lorentz_inner(&u.vec, &v.vec).unwrap();
        let after = lorentz_inner(&pu.vec, &pv.vec).unwrap();
        prop_assert!((before - after).abs() <= 1e-9);
        prop_assert!(lorentz_inner(y.coords(), &pu.vec).unwrap().abs() <= 1e-9 * y.time() * y.time());
    }

    #[test]
    fn translation_preserves_distances(seed in any::<u64>()) {
        let m = Lorentz::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p: Vec<Point> = (0..4).map(|_| m.random_point(&mut rng)).collect();
        let a = m.translate(&p[0], &p[1], &p[2]).unwrap();
        let b = m.translate(&p[0], &p[1], &p[3]).unwrap();
        prop_assert!(rel(m.distance(&a, &b), m.distance(&p[2], &p[3])) < 1e-8);
        let moved = m.translate(&p[0], &p[1], &p[0]).unwrap();
        prop_assert!(m.distance(&moved, &p[1]) < 1e-7);
    }

    #[test]
    fn relative_position_keeps_the_distance(seed in any::<u64>()) {
        let m = Lorentz::standard(4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, u) = (m.random_point(&mut rng), m.random_point(&mut rng));
        let r = m.ominus(&u, &x).unwrap();
        prop_assert!(rel(m.distance(&m.origin(), &r), m.distance(&x, &u)) < 1e-8);
        prop_assert!(m.distance(&m.ominus(&x, &x).unwrap(), &m.origin()) < 1e-7);
        prop_assert!(m.distance(&m.ominus(&u, &m.origin()).unwrap(), &u) < 1e-12 * u.time());
    }
}
