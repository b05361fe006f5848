use hkconv::autograd::ParamStore;
use hkconv::kernelgen::random_kernels;
use hkconv::layers::*;
use hkconv::manifold::{lorentz_inner, Lorentz, ManifoldConfig};
use hkconv::rng::{self, streams};
use hkconv::Point;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(rng: &mut ChaCha8Rng, in_dim: usize, out_dim: usize, activation: Activation) -> HLinearParams<f64> {
    let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    HLinearParams {
        in_dim,
        out_dim,
        w: draw(out_dim * (in_dim + 1)),
        v: draw(in_dim + 1),
        b: draw(out_dim),
        b_prime: draw(1)[0],
        log_lambda: draw(1)[0],
        activation,
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Boost taking `x` to the origin on the κ = −1 hyperboloid.
fn boost_to_origin(x: &[f64], u: &[f64]) -> Vec<f64> {
    let (t, s) = (x[0], &x[1..]);
    let su: f64 = s.iter().zip(&u[1..]).map(|(a, b)| a * b).sum();
    let mut out = vec![t * u[0] - su];
    for (i, &si) in s.iter().enumerate() {
        out.push(-si * u[0] + u[i + 1] + si * su / (1.0 + t));
    }
    out
}

fn arccosh_distance(x: &[f64], y: &[f64]) -> f64 {
    let ip: f64 = x[1..].iter().zip(&y[1..]).map(|(a, b)| a * b).sum::<f64>() - x[0] * y[0];
    (-ip).max(1.0).acosh()
}

fn naive_hlinear(x: &[f64], p: &HLinearParams<f64>) -> Vec<f64> {
    let tx: Vec<f64> = x.iter().map(|&c| c.max(0.0)).collect();
    let a: Vec<f64> = (0..p.out_dim)
        .map(|r| (0..x.len()).map(|c| p.w[r * x.len() + c] * tx[c]).sum::<f64>() + p.b[r])
        .collect();
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gate = sigmoid(p.v.iter().zip(x).map(|(v, c)| v * c).sum::<f64>() + p.b_prime);
    let h: Vec<f64> = a.iter().map(|ai| p.log_lambda.exp() * gate * ai / norm).collect();
    let mut y = vec![(1.0 + h.iter().map(|v| v * v).sum::<f64>()).sqrt()];
    y.extend(h);
    y
}

fn naive_centroid(points: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; points[0].len()];
    for (p, wi) in points.iter().zip(w) {
        for (a, b) in s.iter_mut().zip(p) {
            *a += wi * b;
        }
    }
    let n = (s[0] * s[0] - s[1..].iter().map(|v| v * v).sum::<f64>()).sqrt();
    s.iter().map(|v| v / n).collect()
}

#[test]
fn hkconv_matches_a_direct_transcription() {
    let cfg = ManifoldConfig::new(-1.0, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(342);
    for trial in 0..20 {
        let layer = HKConvLayer::new(
            HLinearShape::new(3, 2, Activation::Relu),
            random_kernels(4, 3, trial, &cfg).unwrap(),
            ConvMode::Relative,
            Pooling::Uniform,
        )
        .unwrap();
        let mut store = ParamStore::new();
        layer.init(&mut store, "l", &mut rng::stream(trial, streams::PARAM_INIT));
        let mut p = layer.bind::<f64>(&store.values(), "l").unwrap();
        for s in p.sublayers.iter_mut() {
            *s = random_params(&mut rng, 3, 2, Activation::Relu);
        }
        let m = p.input;
        let x = m.random_point(&mut rng);
        let nbrs: Vec<Point> = (0..1 + trial as usize % 4).map(|_| m.random_point(&mut rng)).collect();
        let refs: Vec<&Point> = nbrs.iter().collect();
        let got = hkconv(&x, &refs, &p, None, &mut None).unwrap();

        let per_neighbor: Vec<Vec<f64>> = nbrs
            .iter()
            .map(|xi| {
                let u = boost_to_origin(x.coords(), xi.coords());
                let nu: Vec<f64> = p.kernels.iter().map(|k| arccosh_distance(&u, k.coords())).collect();
                let outs: Vec<Vec<f64>> = p.sublayers.iter().map(|s| naive_hlinear(&u, s)).collect();
                naive_centroid(&outs, &nu)
            })
            .collect();
        let want = naive_centroid(&per_neighbor, &vec![1.0; nbrs.len()]);
        for (a, b) in got.coords().iter().zip(&want) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "trial {trial}: {a} vs {b}");
        }
    }
}

#[test]
fn hcent_examples() {
    let m = Lorentz::standard(2);
    let x = m.project(&[0.3f64, -1.1]).unwrap();
    let single = hcent(&m, std::slice::from_ref(&x), &[1.0]).unwrap();
    for (a, b) in single.coords().iter().zip(x.coords()) {
        assert!((a - b).abs() < 1e-14);
    }
    let pts = [m.project(&[0.5, 0.1]).unwrap(), m.project(&[-1.0, 2.0]).unwrap(), x];
    let nu = [0.2, 1.3, 0.7];
    let base = hcent(&m, &pts, &nu).unwrap();
    let doubled: Vec<f64> = nu.iter().map(|v| 2.0 * v).collect();
    assert_eq!(hcent(&m, &pts, &doubled).unwrap(), base);
    let tripled: Vec<f64> = nu.iter().map(|v| 3.0 * v).collect();
    for (a, b) in hcent(&m, &pts, &tripled).unwrap().coords().iter().zip(base.coords()) {
        assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
    }
}

#[test]
fn hcdist_matches_pairwise_distances() {
    let m = Lorentz::standard(3);
    let mut rng = ChaCha8Rng::seed_from_u64(332);
    for _ in 0..100 {
        let z: Vec<f64> = (0..3 * 4).map(|_| rng.random_range(-1.5..1.5)).collect();
        let bank = CentroidBank::from_euclidean(&m, &z).unwrap();
        let x = m.random_point(&mut rng);
        let d = hcdist(&m, &x, &bank).unwrap();
        for (di, c) in d.iter().zip(&bank.centroids) {
            assert!((di - arccosh_distance(x.coords(), c.coords())).abs() < 1e-9);
        }
    }
    let o = m.origin::<f64>();
    let bank = CentroidBank {
        centroids: vec![o.clone(), o.clone()],
    };
    assert_eq!(hcdist(&m, &o, &bank).unwrap(), vec![0.0, 0.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hlinear_lands_on_the_manifold_with_the_gated_radius(seed in any::<u64>(), out_dim in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = Lorentz::standard(3);
        let output = Lorentz::standard(out_dim);
        let p = random_params(&mut rng, 3, out_dim, Activation::Tanh);
        let x = input.random_point(&mut rng);
        let y = hlinear(&output, &x, &p, &mut None).unwrap();
        prop_assert!((lorentz_inner(y.coords(), y.coords()).unwrap() + 1.0).abs() <= 1e-9 * y.time() * y.time());
        let gate = sigmoid(p.v.iter().zip(x.coords()).map(|(v, c)| v * c).sum::<f64>() + p.b_prime);
        let radius = y.spatial().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((radius - p.lambda() * gate).abs() <= 1e-12);
    }

    #[test]
    fn centroid_is_on_the_manifold_and_scale_free(seed in any::<u64>(), n in 1usize..6, c in 0.1f64..10.0) {
        let m = Lorentz::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point> = (0..n).map(|_| m.random_point(&mut rng)).collect();
        let nu: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..2.0)).collect();
        let a = hcent(&m, &pts, &nu).unwrap();
        let scaled: Vec<f64> = nu.iter().map(|v| c * v).collect();
        let b = hcent(&m, &pts, &scaled).unwrap();
        prop_assert!(m.residual(&a) <= 1e-9 * a.time() * a.time());
        prop_assert!(m.distance(&a, &b) <= 1e-7);
    }

    #[test]
    fn attention_rows_are_distributions(seed in any::<u64>(), q in 1usize..5, k in 1usize..6) {
        let m = Lorentz::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let queries: Vec<Point> = (0..q).map(|_| m.random_point(&mut rng)).collect();
        let keys: Vec<Point> = (0..k).map(|_| m.random_point(&mut rng)).collect();
        for row in attention_weights(&m, &queries, &keys, 2).unwrap() {
            prop_assert!(row.iter().all(|&w| w >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
