use std::time::{Duration, Instant};

use hkconv::autograd::{finite_diff_check, Leaves, ScalarLoss};
use hkconv::graphnet::{
    build_hkn, evaluate, make_kernels, sweep_kernels, synth_trees_vs_random, train, Checkpoint, DatasetFile,
    GraphBatch, HKNConfig, Hkn, KernelSource, Masks, Split, Task,
};
use hkconv::invariants::{self, closure_stats, sample_tangent, Ctx, InvariantConfig, Suite};
use hkconv::kernelgen::{gradient_decay_experiment, log_linear_fit, parse_radii, solve_kernels, SolverConfig};
use hkconv::manifold::{Lorentz, ManifoldConfig};
use hkconv::{Real, Result};
use hkconv_validation::{exclusive, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, title: &'static str, start: Instant, passed: bool, detail: String) -> Verdict {
    Verdict {
        id,
        title,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn within(start: Instant, secs: u64) -> bool {
    start.elapsed() < Duration::from_secs(secs)
}

fn ctx(trials: usize, max_radius: f64) -> Ctx {
    Ctx::new(&InvariantConfig {
        suite: Suite::All,
        trials,
        max_radius,
        ..InvariantConfig::default()
    })
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Synthetic suite used by the learning criteria.
fn synth() -> GraphBatch {
    synth_trees_vs_random(200, 16, 0).unwrap()
}

#[test]
fn criterion_01_manifold_closure() {
    let _g = exclusive();
    let start = Instant::now();
    let stats = closure_stats(&ctx(10_000, 10.0), 10_000).unwrap();
    let tol = 1e-9;
    // rounding x_t = cosh(10) alone perturbs x_t² by about x_t² · 2⁻⁵²
    let floor = 10f64.cosh().powi(2) * f64::EPSILON;
    let bands: Vec<String> = stats
        .max_residual_within
        .iter()
        .map(|(r, e)| format!("d<={r}: {e:.1e}"))
        .collect();
    verdict(
        1,
        "manifold closure",
        start,
        stats.max_residual <= tol && within(start, 30),
        format!(
            "{} compositions, {} points, max |<y,y> - 1/k| = {:.2e} (tol {tol:.0e}); f64 rounding floor at d=10 is {floor:.1e}; by radius {}",
            stats.compositions,
            stats.points,
            stats.max_residual,
            bands.join(", ")
        ),
    )
    .report();
}

#[test]
fn criterion_02_inverse_maps() {
    let _g = exclusive();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_log: f64 = 0.0;
    let mut worst_exp: f64 = 0.0;
    for t in 0..1000 {
        let m = Lorentz::standard(2 + t % 3);
        let x = m.random_point(&mut rng);
        let v = sample_tangent(&m, &mut rng, &x, 5.0);
        let back = m.log_map(&x, &m.exp_map(&v).unwrap()).unwrap();
        worst_log = worst_log.max(diff(&back.vec, &v.vec) / euclid(&v.vec));
        let u = m.random_point(&mut rng);
        let again = m.exp_map(&m.log_map(&x, &u).unwrap()).unwrap();
        worst_exp = worst_exp.max(diff(again.coords(), u.coords()) / euclid(u.coords()));
    }
    let tol = 1e-8;
    verdict(
        2,
        "inverse maps",
        start,
        worst_log <= tol && worst_exp <= tol,
        format!("1000 draws, |v| <= 5: log(exp v) rel {worst_log:.2e}, exp(log u) rel {worst_exp:.2e} (tol {tol:.0e})"),
    )
    .report();
}

#[test]
fn criterion_03_distance_preservation() {
    let _g = exclusive();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for t in 0..1000 {
        let m = Lorentz::standard(2 + t % 3);
        let x = m.random_point(&mut rng);
        let xi = m.random_point(&mut rng);
        let rel = m.ominus(&xi, &x).unwrap();
        worst = worst.max((m.distance(&x, &xi) - m.distance(&m.origin(), &rel)).abs());
    }
    let tol = 1e-8;
    verdict(
        3,
        "distance preservation",
        start,
        worst <= tol,
        format!("1000 pairs: max |d(x,xi) - d(o, xi - x)| = {worst:.2e} (tol {tol:.0e})"),
    )
    .report();
}

#[test]
fn criterion_04_local_translation_invariance() {
    let _g = exclusive();
    let start = Instant::now();
    let r = invariants::local_translation_invariance(&ctx(100, 10.0), 100).unwrap();
    verdict(
        4,
        "local translation invariance",
        start,
        r.passed && within(start, 60),
        format!(
            "{} trials: max relative disagreement {:.2e} (tol {:.0e})",
            r.trials, r.max_error, r.tolerance
        ),
    )
    .report();
}

#[test]
fn criterion_05_permutation_equivariance() {
    let _g = exclusive();
    let start = Instant::now();
    let c = ctx(20, 10.0);
    let layer = invariants::hkconv_permutation_equivariance(&c, 20).unwrap();
    let logits = invariants::node_logits_permutation_equivariance(&c, 20).unwrap();
    verdict(
        5,
        "permutation equivariance",
        start,
        layer.passed && logits.passed,
        format!(
            "20 graphs: hkconv max bit error {:.1e}, node logits max bit error {:.1e} (bitwise)",
            layer.max_error, logits.max_error
        ),
    )
    .report();
}

#[test]
fn criterion_06_kernel_solver() {
    let _g = exclusive();
    let start = Instant::now();
    let cfg = ManifoldConfig::new(-1.0, 2).unwrap();
    let m = Lorentz::new(cfg).unwrap();
    let o = m.origin::<f64>();
    let mut pair_ok = true;
    let mut radius_err: f64 = 0.0;
    let mut mutual_err: f64 = 0.0;
    for seed in 0..5 {
        let rep = solve_kernels(
            2,
            2,
            &SolverConfig {
                seed,
                ..SolverConfig::default()
            },
            &cfg,
        )
        .unwrap();
        let p = rep.kernels.points();
        for x in p {
            radius_err = radius_err.max((m.distance(&o, x) - 0.5f64.sqrt()).abs());
        }
        mutual_err = mutual_err.max((m.distance(&p[0], &p[1]) - 2f64.sqrt()).abs());
        pair_ok &= rep.converged;
    }
    pair_ok &= radius_err <= 1e-3 && mutual_err <= 2e-3;
    let solver = SolverConfig {
        max_iters: 5_000_000,
        ..SolverConfig::default()
    };
    let five = solve_kernels(5, 2, &solver, &cfg).unwrap();
    let min_pair = five.kernels.sorted_pairwise_distances()[0];
    let five_ok = five.converged && five.grad_norm <= 1e-6 && min_pair > 0.3;
    verdict(
        6,
        "kernel solver",
        start,
        pair_ok && five_ok && within(start, 120),
        format!(
            "K=2 over 5 seeds: radius err {radius_err:.1e}, mutual err {mutual_err:.1e}; K=5: grad {:.2e} after {} iterations, min pair {min_pair:.4}, loss {:.6}",
            five.grad_norm, five.iterations, five.loss
        ),
    )
    .report();
}

#[test]
fn criterion_07_gradient_decay() {
    let _g = exclusive();
    let start = Instant::now();
    let rows = gradient_decay_experiment(8, &parse_radii("0.5:5.0:0.5").unwrap(), -1.0).unwrap();
    let (slope, _, r2) = log_linear_fit(&rows);
    verdict(
        7,
        "gradient decay fit",
        start,
        rows.len() == 10 && slope < 0.0 && r2 >= 0.95 && within(start, 30),
        format!("{} radii: slope {slope:.4}, R^2 {r2:.4}", rows.len()),
    )
    .report();
}

struct NetworkLoss<'a> {
    model: &'a Hkn,
    data: &'a GraphBatch,
    items: Vec<usize>,
}

impl ScalarLoss for NetworkLoss<'_> {
    fn eval<T: Real>(&self, params: &Leaves<T>) -> Result<T> {
        self.model.loss(params, self.data, &self.items)
    }
}

/// Connected 30-node graph with three node classes.
fn thirty_node_graph() -> GraphBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 30;
    let mut edges: Vec<[usize; 2]> = (1..n).map(|i| [rng.random_range(0..i), i]).collect();
    for _ in 0..15 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && !edges.contains(&[a.min(b), a.max(b)]) && !edges.contains(&[a.max(b), a.min(b)]) {
            edges.push([a.min(b), a.max(b)]);
        }
    }
    let features = (0..n)
        .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    GraphBatch::from_file(DatasetFile {
        num_nodes: n,
        features,
        edges,
        graph_ids: None,
        labels: (0..n).map(|i| i % 3).collect(),
        masks: Some(Masks {
            train: vec![true; n],
            val: vec![false; n],
            test: vec![false; n],
        }),
    })
    .unwrap()
}

#[test]
fn criterion_08_gradient_correctness() {
    let _g = exclusive();
    let start = Instant::now();
    let data = thirty_node_graph();
    let cfg = HKNConfig {
        task: Task::Node,
        hidden_dim: 8,
        kernel_source: KernelSource::Random,
        ..HKNConfig::default()
    };
    let kernels = make_kernels(&cfg, data.feature_dim()).unwrap();
    let model = build_hkn(&cfg, data.feature_dim(), data.num_classes(), kernels).unwrap();
    let loss = NetworkLoss {
        model: &model,
        data: &data,
        items: data.split(Split::Train).unwrap(),
    };
    let report = finite_diff_check(&loss, &model.store, 1e-5, 4, 8).unwrap();
    let worst = report
        .entries
        .iter()
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
        .unwrap();
    let tol = 1e-4;
    verdict(
        8,
        "gradient correctness",
        start,
        report.max_rel_error() <= tol && report.entries.len() == model.store.params.len() && within(start, 120),
        format!(
            "{} leaves, {} scalars: max rel error {:.2e} at {} (tol {tol:.0e}); worst single direction {:.2e}",
            report.entries.len(),
            model.store.num_scalars(),
            worst.max_rel_error,
            worst.path,
            report.entries.iter().map(|e| e.max_dir_rel_error).fold(0.0, f64::max)
        ),
    )
    .report();
}

#[test]
fn criterion_09_desk_scale_learning() {
    let _g = exclusive();
    let start = Instant::now();
    let data = synth();
    let cfg = HKNConfig {
        layers: 2,
        k: 4,
        hidden_dim: 16,
        epochs: 200,
        ..HKNConfig::default()
    };
    let kernels = make_kernels(&cfg, data.feature_dim()).unwrap();
    let mut model = build_hkn(&cfg, data.feature_dim(), data.num_classes(), kernels).unwrap();
    let report = train(&mut model, &data).unwrap();
    verdict(
        9,
        "desk-scale learning",
        start,
        report.test.accuracy >= 0.95 && report.epochs_run <= 200 && within(start, 300),
        format!(
            "test accuracy {:.4} (best epoch {} of {} run)",
            report.test.accuracy, report.best_epoch, report.epochs_run
        ),
    )
    .report();
}

/// Shortened schedule for the multi-run directional checks.
fn short_schedule() -> HKNConfig {
    HKNConfig {
        epochs: 10,
        patience: 10,
        ..HKNConfig::default()
    }
}

#[test]
fn criterion_10_optimized_vs_random_kernels() {
    let _g = exclusive();
    let start = Instant::now();
    let data = synth();
    let mean = |source| {
        let base = HKNConfig {
            kernel_source: source,
            ..short_schedule()
        };
        sweep_kernels(&base, &data, &[4], 5).unwrap().mean(4).unwrap()
    };
    let optimized = mean(KernelSource::Optimized);
    let random = mean(KernelSource::Random);
    verdict(
        10,
        "optimized vs random kernels",
        start,
        optimized >= random,
        format!("mean test accuracy over 5 seeds: optimized {optimized:.4}, random {random:.4}"),
    )
    .report();
}

#[test]
fn criterion_11_kernel_count_sweep() {
    let _g = exclusive();
    let start = Instant::now();
    let data = synth();
    let sweep = sweep_kernels(&short_schedule(), &data, &[2, 3, 4, 5, 6], 3).unwrap();
    let at_two = sweep.mean(2).unwrap();
    let (best_k, best) = (3..=6)
        .map(|k| (k, sweep.mean(k).unwrap()))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let means: Vec<String> = sweep
        .summary
        .iter()
        .map(|s| format!("K={}: {:.4}", s.k, s.mean))
        .collect();
    verdict(
        11,
        "kernel-count sweep",
        start,
        best >= at_two,
        format!(
            "best of K=3..6 is K={best_k} at {best:.4} vs K=2 at {at_two:.4}; {}",
            means.join(", ")
        ),
    )
    .report();
}

#[test]
fn criterion_12_determinism_and_serialization() {
    let _g = exclusive();
    let start = Instant::now();
    let data = synth_trees_vs_random(40, 8, 12).unwrap();
    let cfg = HKNConfig {
        epochs: 5,
        seed: 12,
        ..HKNConfig::default()
    };
    let run = || {
        let kernels = make_kernels(&cfg, data.feature_dim()).unwrap();
        let kernel_json: Vec<String> = kernels.iter().map(|k| k.to_json().unwrap()).collect();
        let mut model = build_hkn(&cfg, data.feature_dim(), data.num_classes(), kernels).unwrap();
        let report = train(&mut model, &data).unwrap();
        let checkpoint = serde_json::to_string(&model.checkpoint(Some(report.test))).unwrap();
        (kernel_json, report.metrics_csv(), checkpoint)
    };
    let (k1, m1, c1) = run();
    let (k2, m2, c2) = run();
    let ck: Checkpoint = serde_json::from_str(&c1).unwrap();
    let stored = ck.test_metrics.unwrap();
    let reloaded = Hkn::from_checkpoint(&ck).unwrap();
    let fresh = evaluate(&reloaded, &data, Split::Test).unwrap();
    let same_metric = fresh.accuracy.to_bits() == stored.accuracy.to_bits()
        && fresh.macro_f1.to_bits() == stored.macro_f1.to_bits()
        && fresh.loss.to_bits() == stored.loss.to_bits();
    let checks = [
        ("kernels", k1 == k2),
        ("metric history", m1 == m2),
        ("checkpoint", c1 == c2),
        ("reloaded test metric", same_metric),
    ];
    let detail: Vec<String> = checks
        .iter()
        .map(|(name, ok)| format!("{name} {}", if *ok { "identical" } else { "DIFFERS" }))
        .collect();
    verdict(
        12,
        "determinism and serialization",
        start,
        checks.iter().all(|c| c.1),
        detail.join(", "),
    )
    .report();
}
