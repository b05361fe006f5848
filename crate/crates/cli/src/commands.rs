use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use hkconv::graphnet::{
    self, build_hkn, evaluate, make_kernels, synth_trees_vs_random, Checkpoint, GraphBatch, HKNConfig, Hkn,
    KernelSource, Metrics, Split, Task,
};
use hkconv::invariants::{self, InvariantConfig};
use hkconv::kernelgen::{
    decay_csv, geodesics_csv, gradient_decay_experiment, log_linear_fit, parse_radii, poincare_csv, solve_kernels,
    KernelSet, SolverConfig,
};
use hkconv::manifold::ManifoldConfig;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{resolve, resolve_opt, usage, ConfigFile};
use crate::options::{ActivationArg, ModeArg, PoolingArg, SplitArg, SuiteArg, TaskArg, TransportArg};
use crate::{AppendixArgs, EvalArgs, Global, InvariantArgs, KernelGenArgs, ModelArgs, SweepArgs, TrainArgs};

const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
const DEFAULT_GRAPHS: usize = 200;
const DEFAULT_NODES: usize = 16;
const DEFAULT_RADII: &str = "0.5:5.0:0.5";
const DEFAULT_K_LIST: &str = "2,3,4,5,6";

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_hash: Option<String>,
    artifacts: Vec<&'a str>,
}

fn write(out: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    write(out, name, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn kernel_hash(sets: &[KernelSet]) -> anyhow::Result<String> {
    let mut text = String::new();
    for ks in sets {
        text.push_str(&ks.to_json()?);
        text.push('\n');
    }
    Ok(sha256_hex(text.as_bytes()))
}

// ------------------------------------------------------------- kernel-gen

pub fn kernel_gen(g: &Global, a: &KernelGenArgs) -> anyhow::Result<u8> {
    let f = &g.file;
    let k = resolve_opt(a.k, f, "kernel.K")?.ok_or_else(|| usage("--K is required"))?;
    if k < 2 {
        return Err(usage(format!("--K must be at least 2, got {k}")));
    }
    let d = SolverConfig::default();
    let solver = SolverConfig {
        learning_rate: resolve(a.lr, f, "kernel.lr", d.learning_rate)?,
        max_iters: resolve(a.max_iters, f, "kernel.max_iters", d.max_iters)?,
        grad_tol: resolve(a.grad_tol, f, "kernel.grad_tol", d.grad_tol)?,
        seed: g.seed,
        init_scale: resolve(a.init_scale, f, "kernel.init_scale", d.init_scale)?,
    };
    solver.validate().map_err(|e| usage(e.to_string()))?;
    let dim = resolve(a.dim, f, "kernel.dim", 2)?;
    let curvature = resolve(a.curvature, f, "kernel.curvature", -1.0)?;
    let mcfg = ManifoldConfig::new(curvature, dim).map_err(|e| usage(e.to_string()))?;
    if a.plot && dim != 2 {
        return Err(usage("--plot needs --dim 2"));
    }

    let report = solve_kernels(k, dim, &solver, &mcfg)?;
    let kernels_json = report.kernels.to_json()? + "\n";
    write(&g.out, "kernels.json", &kernels_json)?;
    write(&g.out, "convergence.csv", &report.history_csv())?;
    let mut artifacts = vec!["kernels.json", "convergence.csv"];
    if a.plot {
        write(&g.out, "poincare.csv", &poincare_csv(&report.kernels)?)?;
        write(&g.out, "geodesics.csv", &geodesics_csv(&report.kernels, 0)?)?;
        artifacts.extend(["poincare.csv", "geodesics.csv"]);
    }
    artifacts.push("manifest.json");
    write_json(
        &g.out,
        "manifest.json",
        &Manifest {
            command: "kernel-gen",
            version: VERSION,
            seed: g.seed,
            config: json!({ "K": k, "manifold": mcfg, "solver": solver }),
            data: None,
            kernel_hash: Some(sha256_hex(kernels_json.as_bytes())),
            artifacts,
        },
    )?;

    let dists = report.kernels.sorted_pairwise_distances();
    println!(
        "K={k} dim={dim}: loss {:.9} grad norm {:.3e} after {} iterations; min pairwise distance {:.6}",
        report.loss, report.grad_norm, report.iterations, dists[0]
    );
    if !report.converged {
        eprintln!(
            "error: solver did not reach grad norm {:e} within {} iterations; the best iterate was written",
            solver.grad_tol, solver.max_iters
        );
        return Ok(1);
    }
    Ok(0)
}

// ------------------------------------------------------------- invariants

pub fn invariants(g: &Global, a: &InvariantArgs) -> anyhow::Result<u8> {
    let f = &g.file;
    let cfg = InvariantConfig {
        suite: resolve(a.suite, f, "invariants.suite", SuiteArg::All)?.into(),
        trials: resolve(a.trials, f, "invariants.trials", 100)?,
        seed: g.seed,
        transport: resolve(a.transport, f, "invariants.transport", TransportArg::Isometric)?.into(),
        max_radius: resolve(a.radius, f, "invariants.radius", 10.0)?,
    };
    if cfg.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    if cfg.max_radius.is_nan() || cfg.max_radius <= 0.0 {
        return Err(usage("--radius must be positive"));
    }
    let report = invariants::run(&cfg);
    write_json(&g.out, "report.json", &report)?;
    write_json(
        &g.out,
        "manifest.json",
        &Manifest {
            command: "invariants",
            version: VERSION,
            seed: g.seed,
            config: json!({
                "suite": report.suite,
                "trials": cfg.trials,
                "radius": cfg.max_radius,
                "transport": report.transport,
            }),
            data: None,
            kernel_hash: None,
            artifacts: vec!["report.json", "manifest.json"],
        },
    )?;
    for p in &report.properties {
        let status = if p.passed { "PASS" } else { "FAIL" };
        print!(
            "{status} {:<10} {:<40} trials {:>5}  max error {:.3e}  tolerance {:.0e}",
            p.suite, p.name, p.trials, p.max_error, p.tolerance
        );
        match &p.error {
            Some(e) => println!("  ({e})"),
            None => println!(),
        }
    }
    println!("{} of {} properties failed", report.failures, report.properties.len());
    Ok(report.failures.min(125) as u8)
}

// ------------------------------------------------------------- appendix-a

pub fn appendix_a(g: &Global, a: &AppendixArgs) -> anyhow::Result<u8> {
    let f = &g.file;
    let k = resolve(a.k, f, "appendix.K", 8)?;
    let radii_spec: String = resolve(a.radii.clone(), f, "appendix.radii", DEFAULT_RADII.to_string())?;
    let curvature = resolve(a.curvature, f, "appendix.curvature", -1.0)?;
    let radii = parse_radii(&radii_spec).map_err(|e| usage(e.to_string()))?;
    if k < 2 {
        return Err(usage("--K must be at least 2"));
    }
    ManifoldConfig::new(curvature, 2).map_err(|e| usage(e.to_string()))?;
    let rows = gradient_decay_experiment(k, &radii, curvature)?;
    let (slope, intercept, r2) = log_linear_fit(&rows);
    write(&g.out, "appendix_a.csv", &decay_csv(&rows))?;
    write_json(
        &g.out,
        "report.json",
        &json!({
            "K": k,
            "curvature": curvature,
            "slope": slope,
            "intercept": intercept,
            "r2": r2,
            "rows": rows.iter().map(|r| json!({ "radius": r.radius, "grad_norm": r.grad_norm })).collect::<Vec<_>>(),
        }),
    )?;
    write_json(
        &g.out,
        "manifest.json",
        &Manifest {
            command: "appendix-a",
            version: VERSION,
            seed: g.seed,
            config: json!({ "K": k, "radii": radii_spec, "curvature": curvature }),
            data: None,
            kernel_hash: None,
            artifacts: vec!["appendix_a.csv", "report.json", "manifest.json"],
        },
    )?;
    println!(
        "slope {slope:.6}  intercept {intercept:.6}  R² {r2:.6}  ({} radii)",
        rows.len()
    );
    Ok(0)
}

// ------------------------------------------------------------------ data

#[derive(Clone, Debug, PartialEq)]
enum DataSpec {
    Synth { graphs: usize, nodes: usize, seed: u64 },
    File(PathBuf),
}

impl DataSpec {
    fn load(&self) -> anyhow::Result<(GraphBatch, Value)> {
        match self {
            DataSpec::Synth { graphs, nodes, seed } => {
                let data = synth_trees_vs_random(*graphs, *nodes, *seed).map_err(|e| usage(e.to_string()))?;
                let desc = json!({ "source": "synth", "graphs": graphs, "nodes": nodes, "seed": seed });
                Ok((data, desc))
            }
            DataSpec::File(path) => {
                let bytes = fs::read(path).with_context(|| format!("cannot read dataset {}", path.display()))?;
                let text = String::from_utf8(bytes.clone()).context("dataset is not UTF-8")?;
                let data = GraphBatch::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
                let desc = json!({ "source": path.display().to_string(), "sha256": sha256_hex(&bytes) });
                Ok((data, desc))
            }
        }
    }

    fn from_manifest(v: &Value) -> Option<Self> {
        let source = v.get("source")?.as_str()?;
        if source == "synth" {
            Some(DataSpec::Synth {
                graphs: v.get("graphs")?.as_u64()? as usize,
                nodes: v.get("nodes")?.as_u64()? as usize,
                seed: v.get("seed")?.as_u64()?,
            })
        } else {
            Some(DataSpec::File(PathBuf::from(source)))
        }
    }
}

fn data_spec(
    f: &ConfigFile,
    data: Option<String>,
    graphs: Option<usize>,
    nodes: Option<usize>,
    seed: Option<u64>,
    fallback: Option<DataSpec>,
) -> anyhow::Result<DataSpec> {
    let source = resolve_opt(data, f, "data.source")?;
    let graphs = resolve_opt(graphs, f, "data.graphs")?;
    let nodes = resolve_opt(nodes, f, "data.nodes")?;
    let seed = resolve_opt(seed, f, "data.seed")?;
    let explicit = source.is_some() || graphs.is_some() || nodes.is_some() || seed.is_some();
    if let (false, Some(spec)) = (explicit, fallback) {
        return Ok(spec);
    }
    match source.as_deref().unwrap_or("synth") {
        "synth" => Ok(DataSpec::Synth {
            graphs: graphs.unwrap_or(DEFAULT_GRAPHS),
            nodes: nodes.unwrap_or(DEFAULT_NODES),
            seed: seed.unwrap_or(0),
        }),
        path => {
            if graphs.is_some() || nodes.is_some() || seed.is_some() {
                return Err(usage("--graphs, --nodes and --data-seed apply only to --data synth"));
            }
            Ok(DataSpec::File(PathBuf::from(path)))
        }
    }
}

// ----------------------------------------------------------------- model

enum KernelChoice {
    Optimized,
    Random,
    File(PathBuf, KernelSet),
}

impl KernelChoice {
    fn describe(&self) -> String {
        match self {
            KernelChoice::Optimized => "optimized".into(),
            KernelChoice::Random => "random".into(),
            KernelChoice::File(p, _) => p.display().to_string(),
        }
    }
}

struct Setup {
    cfg: HKNConfig,
    kernels: KernelChoice,
    data: GraphBatch,
    data_desc: Value,
}

fn setup(g: &Global, a: &ModelArgs) -> anyhow::Result<Setup> {
    let f = &g.file;
    let d = HKNConfig::default();
    let spec = data_spec(f, a.data.clone(), a.graphs, a.nodes, a.data_seed, None)?;
    let task: Task = resolve(a.task, f, "model.task", TaskArg::Graph)?.into();
    let kernel: String = resolve(a.kernel.clone(), f, "model.kernel", "optimized".to_string())?;
    let kernels = match kernel.as_str() {
        "optimized" => KernelChoice::Optimized,
        "random" => KernelChoice::Random,
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read kernel file {path}"))?;
            let ks = KernelSet::from_json(&text).with_context(|| format!("loading {path}"))?;
            KernelChoice::File(PathBuf::from(path), ks)
        }
    };
    let k_flag = resolve_opt(a.k, f, "model.K")?;
    let k = match (&kernels, k_flag) {
        (KernelChoice::File(p, ks), Some(k)) if k != ks.k() => {
            return Err(usage(format!(
                "--K {k} conflicts with kernel file {} holding {} points",
                p.display(),
                ks.k()
            )))
        }
        (KernelChoice::File(_, ks), _) => ks.k(),
        (_, k) => k.unwrap_or(d.k),
    };
    let cfg = HKNConfig {
        layers: resolve(a.layers, f, "model.layers", d.layers)?,
        k,
        hidden_dim: resolve(a.hidden, f, "model.hidden_dim", d.hidden_dim)?,
        curvature: resolve(a.curvature, f, "model.curvature", d.curvature)?,
        dropout: resolve(a.dropout, f, "train.dropout", d.dropout)?,
        lr: resolve(a.lr, f, "train.lr", d.lr)?,
        weight_decay: resolve(a.weight_decay, f, "train.weight_decay", d.weight_decay)?,
        pooling: resolve(a.pooling, f, "model.pooling", PoolingArg::Uniform)?.into(),
        kernel_source: match kernels {
            KernelChoice::Random => KernelSource::Random,
            _ => KernelSource::Optimized,
        },
        mode: resolve(a.mode, f, "model.mode", ModeArg::Relative)?.into(),
        activation: resolve(a.activation, f, "model.activation", ActivationArg::Relu)?.into(),
        task,
        epochs: resolve(a.epochs, f, "train.epochs", d.epochs)?,
        patience: resolve(a.patience, f, "train.patience", d.patience)?,
        batch_size: resolve(a.batch_size, f, "train.batch_size", d.batch_size)?,
        seed: g.seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if let KernelChoice::File(p, ks) = &kernels {
        if ks.config().curvature != cfg.curvature {
            return Err(usage(format!(
                "kernel file {} has curvature {}, the model uses {}",
                p.display(),
                ks.config().curvature,
                cfg.curvature
            )));
        }
    }
    if matches!(spec, DataSpec::Synth { .. }) && task == Task::Node {
        return Err(usage(
            "the synthetic suite is a graph task; use --task graph or a node dataset",
        ));
    }
    let (data, data_desc) = spec.load()?;
    if data.task() != task {
        return Err(usage(format!(
            "--task {:?} does not match the dataset, which is a {:?} task",
            task,
            data.task()
        )));
    }
    Ok(Setup {
        cfg,
        kernels,
        data,
        data_desc,
    })
}

/// Kernel sets per layer. A kernel file serves every layer whose input
/// dimension matches it; other layers get optimized kernels.
fn layer_kernels(s: &Setup) -> anyhow::Result<Vec<KernelSet>> {
    let in_dim = s.data.feature_dim();
    match &s.kernels {
        KernelChoice::File(p, ks) => {
            let dims = graphnet::layer_dims(&s.cfg, in_dim);
            if !dims.contains(&ks.dim()) {
                return Err(usage(format!(
                    "kernel file {} has dimension {}, but layer inputs have dimensions {dims:?}",
                    p.display(),
                    ks.dim()
                )));
            }
            let solved = if dims.iter().all(|&d| d == ks.dim()) {
                Vec::new()
            } else {
                make_kernels(&s.cfg, in_dim)?
            };
            Ok(dims
                .iter()
                .enumerate()
                .map(|(l, &d)| if d == ks.dim() { ks.clone() } else { solved[l].clone() })
                .collect())
        }
        _ => Ok(make_kernels(&s.cfg, in_dim)?),
    }
}

// ----------------------------------------------------------------- train

#[derive(Serialize)]
struct TrainSummary {
    best_epoch: usize,
    epochs_run: usize,
    val: Metrics,
    test: Metrics,
}

pub fn train(g: &Global, a: &TrainArgs) -> anyhow::Result<u8> {
    let s = setup(g, &a.model)?;
    let kernels = layer_kernels(&s)?;
    let hash = kernel_hash(&kernels)?;
    let mut model = build_hkn(&s.cfg, s.data.feature_dim(), s.data.num_classes(), kernels)?;
    let report = graphnet::train(&mut model, &s.data)?;
    write(&g.out, "metrics.csv", &report.metrics_csv())?;
    write_json(&g.out, "checkpoint.json", &model.checkpoint(Some(report.test)))?;
    write_json(
        &g.out,
        "report.json",
        &TrainSummary {
            best_epoch: report.best_epoch,
            epochs_run: report.epochs_run,
            val: report.val,
            test: report.test,
        },
    )?;
    write_json(
        &g.out,
        "manifest.json",
        &Manifest {
            command: "train",
            version: VERSION,
            seed: g.seed,
            config: json!({ "model": s.cfg, "kernel": s.kernels.describe() }),
            data: Some(s.data_desc),
            kernel_hash: Some(hash),
            artifacts: vec!["metrics.csv", "checkpoint.json", "report.json", "manifest.json"],
        },
    )?;
    println!(
        "best epoch {} of {}: val accuracy {:.4}, test accuracy {:.4}, test macro-F1 {:.4}",
        report.best_epoch, report.epochs_run, report.val.accuracy, report.test.accuracy, report.test.macro_f1
    );
    Ok(0)
}

// ------------------------------------------------------------------ eval

pub fn eval(g: &Global, a: &EvalArgs) -> anyhow::Result<u8> {
    let f = &g.file;
    let path = match resolve_opt(a.checkpoint.clone(), f, "eval.checkpoint")? {
        Some(p) => p,
        None => g.out.join("checkpoint.json"),
    };
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read checkpoint {}", path.display()))?;
    let ck: Checkpoint = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let model = Hkn::from_checkpoint(&ck)?;
    let beside = path.with_file_name("manifest.json");
    let fallback = fs::read_to_string(&beside)
        .ok()
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .and_then(|m| m.get("data").and_then(DataSpec::from_manifest));
    let d = &a.data;
    let spec = data_spec(f, d.data.clone(), d.graphs, d.nodes, d.data_seed, fallback)?;
    let (data, data_desc) = spec.load()?;
    let split: Split = resolve(a.split, f, "eval.split", SplitArg::Test)?.into();
    let metrics = evaluate(&model, &data, split)?;
    let same = |a: &Metrics, b: &Metrics| {
        a.accuracy.to_bits() == b.accuracy.to_bits()
            && a.macro_f1.to_bits() == b.macro_f1.to_bits()
            && a.loss.to_bits() == b.loss.to_bits()
    };
    let matches = match (split, &ck.test_metrics) {
        (Split::Test, Some(stored)) => Some(same(stored, &metrics)),
        _ => None,
    };
    write_json(
        &g.out,
        "eval_report.json",
        &json!({
            "checkpoint": path.display().to_string(),
            "split": split,
            "metrics": metrics,
            "stored_test_metrics": ck.test_metrics,
            "matches_stored": matches,
        }),
    )?;
    write_json(
        &g.out,
        "eval_manifest.json",
        &Manifest {
            command: "eval",
            version: VERSION,
            seed: g.seed,
            config: json!({ "model": ck.config, "checkpoint": path.display().to_string(), "split": split }),
            data: Some(data_desc),
            kernel_hash: Some(kernel_hash(
                &model.layers.iter().map(|l| l.kernels.clone()).collect::<Vec<_>>(),
            )?),
            artifacts: vec!["eval_report.json", "eval_manifest.json"],
        },
    )?;
    print!(
        "{} accuracy {:.4}, macro-F1 {:.4}, loss {:.6}",
        split.as_str(),
        metrics.accuracy,
        metrics.macro_f1,
        metrics.loss
    );
    match matches {
        Some(true) => println!(" (identical to the stored test metrics)"),
        Some(false) => println!(" (differs from the stored test metrics)"),
        None => println!(),
    }
    Ok(0)
}

// ----------------------------------------------------------------- sweep

fn parse_k_list(s: &str) -> anyhow::Result<Vec<usize>> {
    let ks = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| usage(format!("--K-list must be comma-separated integers, got `{s}`")))?;
    if ks.is_empty() {
        return Err(usage("--K-list is empty"));
    }
    Ok(ks)
}

pub fn sweep(g: &Global, a: &SweepArgs) -> anyhow::Result<u8> {
    let f = &g.file;
    let s = setup(g, &a.model)?;
    if let KernelChoice::File(..) = s.kernels {
        return Err(usage("sweep varies K, so --kernel must be `optimized` or `random`"));
    }
    let k_spec: String = resolve(a.k_list.clone(), f, "sweep.K", DEFAULT_K_LIST.to_string())?;
    let k_list = parse_k_list(&k_spec)?;
    for &k in &k_list {
        HKNConfig { k, ..s.cfg.clone() }
            .validate()
            .map_err(|e| usage(e.to_string()))?;
    }
    let seeds = resolve(a.seeds, f, "sweep.seeds", 3)?;
    if seeds == 0 {
        return Err(usage("--seeds must be positive"));
    }
    let report = graphnet::sweep_kernels(&s.cfg, &s.data, &k_list, seeds)?;
    write(&g.out, "sweep.csv", &report.csv())?;
    write(&g.out, "sweep_summary.csv", &report.summary_csv())?;
    write_json(
        &g.out,
        "report.json",
        &json!({
            "metric": "test_accuracy",
            "summary": report.summary.iter().map(|s| json!({ "K": s.k, "mean": s.mean, "std": s.std })).collect::<Vec<_>>(),
        }),
    )?;
    write_json(
        &g.out,
        "manifest.json",
        &Manifest {
            command: "sweep",
            version: VERSION,
            seed: g.seed,
            config: json!({ "model": s.cfg, "kernel": s.kernels.describe(), "K": k_list, "seeds": seeds }),
            data: Some(s.data_desc),
            kernel_hash: None,
            artifacts: vec!["sweep.csv", "sweep_summary.csv", "report.json", "manifest.json"],
        },
    )?;
    for row in &report.summary {
        println!("K={} mean test accuracy {:.4} (std {:.4})", row.k, row.mean, row.std);
    }
    Ok(0)
}
