use hkconv::graphnet::*;
use proptest::prelude::*;

fn small() -> GraphBatch {
    synth_trees_vs_random(24, 8, 5).unwrap()
}

fn quick(epochs: usize) -> HKNConfig {
    HKNConfig {
        k: 3,
        hidden_dim: 6,
        epochs,
        kernel_source: KernelSource::Random,
        ..HKNConfig::default()
    }
}

fn model(cfg: &HKNConfig, data: &GraphBatch) -> Hkn {
    let kernels = make_kernels(cfg, data.feature_dim()).unwrap();
    build_hkn(cfg, data.feature_dim(), data.num_classes(), kernels).unwrap()
}

/// Harmonic mean of per-class precision and recall, averaged over the
/// classes present in either vector.
fn macro_f1(t: &[usize], p: &[usize]) -> f64 {
    let mut f1 = Vec::new();
    for c in 0..=t.iter().chain(p).copied().max().unwrap() {
        let predicted = p.iter().filter(|&&x| x == c).count() as f64;
        let actual = t.iter().filter(|&&x| x == c).count() as f64;
        if predicted + actual == 0.0 {
            continue;
        }
        let hits = t.iter().zip(p).filter(|(a, b)| **a == c && **b == c).count() as f64;
        let (precision, recall) = (hits / predicted.max(1.0), hits / actual.max(1.0));
        f1.push(if hits == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        });
    }
    f1.iter().sum::<f64>() / f1.len() as f64
}

#[test]
fn synthetic_suite_is_reproducible_and_balanced() {
    let (a, b) = (small(), small());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_ne!(
        a.to_json().unwrap(),
        synth_trees_vs_random(24, 8, 6).unwrap().to_json().unwrap()
    );
    assert_eq!(a.num_graphs(), 24);
    assert_eq!(a.task(), Task::Graph);
    let trees = a.labels().iter().filter(|&&l| l == 0).count();
    assert_eq!(trees, 12);
    for split in [Split::Train, Split::Val, Split::Test] {
        assert!(!a.split(split).unwrap().is_empty());
    }
}

#[test]
fn dataset_files_round_trip() {
    let data = small();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.json");
    data.save(&path).unwrap();
    let back = GraphBatch::load(&path).unwrap();
    assert_eq!(back.to_json().unwrap(), data.to_json().unwrap());
    assert_eq!(back.directed_edges(), data.directed_edges());
}

#[test]
fn checkpoint_restores_identical_logits() {
    let data = small();
    let mut net = model(&quick(3), &data);
    let report = train(&mut net, &data).unwrap();
    let text = serde_json::to_string(&net.checkpoint(Some(report.test))).unwrap();
    let restored = Hkn::from_checkpoint(&serde_json::from_str(&text).unwrap()).unwrap();
    let logits = |m: &Hkn| m.logits::<f64>(&m.store.values(), &data).unwrap();
    let bits = |l: Vec<Vec<f64>>| l.into_iter().flatten().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(logits(&net)), bits(logits(&restored)));
    assert_eq!(evaluate(&restored, &data, Split::Test).unwrap(), report.test);
}

#[test]
fn training_lowers_the_training_loss() {
    let data = small();
    let mut net = model(&quick(20), &data);
    let report = train(&mut net, &data).unwrap();
    let losses = report.losses(Split::Train);
    assert!(losses.iter().all(|l| l.is_finite()));
    let best = losses[1..].iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(best < losses[0], "{losses:?}");
    assert!(report.metrics_csv().lines().count() >= 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scores_match_a_counting_oracle(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40)) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let (acc, f1) = classification_scores(&t, &p);
        let hits = t.iter().zip(&p).filter(|(a, b)| a == b).count() as f64;
        prop_assert!((acc - hits / t.len() as f64).abs() < 1e-15);
        prop_assert!((f1 - macro_f1(&t, &p)).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_matches_log_sum_exp(logits in prop::collection::vec(-30.0f64..30.0, 2..6), pick in 0usize..6) {
        let y = pick % logits.len();
        let lse = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
        prop_assert!((cross_entropy(&logits, y) - (lse - logits[y])).abs() <= 1e-12 * lse.abs().max(1.0));
    }
}
