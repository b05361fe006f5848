//! Graph data, the HKN model, and its training and evaluation loops.
//!
//! An HKN embeds Euclidean node features at the origin of 𝕃^F, applies a
//! stack of HKConv layers (`F → n`, then `n → n`), and scores classes with a
//! distance head: logits are negated distances to learnable centroids. Graph
//! tasks pool node outputs with a uniform centroid before the head.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::autograd::{adam_step, scope, AdamConfig, Gradients, Leaves, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::kernelgen::{random_kernels, solve_kernels, KernelFile, KernelSet, SolverConfig};
use crate::layers::{
    attention_weights, canonical_order, dropout_features, hcdist, hcent, hkconv, Activation, CentroidBank, ConvMode,
    Dropout, HKConvLayer, HKConvParams, HLinearShape, Pooling,
};
use crate::manifold::{Lorentz, LorentzPoint, ManifoldConfig};
use crate::rng::{self, streams};
use crate::scalar::Real;

/// Degrees at or above this share the last one-hot slot.
pub const DEGREE_CAP: usize = 8;
const CENTROID_INIT: f64 = 1e-2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Graph,
    Node,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSource {
    #[default]
    Optimized,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Boolean split masks. Node tasks index nodes; graph tasks index graphs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn get(&self, split: Split) -> &[bool] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// On-disk dataset layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub num_nodes: usize,
    #[serde(with = "crate::serde_f64::vecvec")]
    pub features: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_ids: Option<Vec<usize>>,
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<Masks>,
}

/// A validated dataset with symmetric adjacency.
///
/// With `graph_ids` present the task is graph-level: labels and masks are
/// per graph. Otherwise labels and masks are per node.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch {
    file: DatasetFile,
    adjacency: Vec<Vec<usize>>,
    groups: Vec<Vec<usize>>,
    position: Vec<usize>,
    num_classes: usize,
}

impl GraphBatch {
    pub fn from_file(file: DatasetFile) -> Result<Self> {
        let n = file.num_nodes;
        if n == 0 {
            return Err(Error::Dataset("num_nodes is zero".into()));
        }
        if file.features.len() != n {
            return Err(Error::Dataset(format!(
                "features: {} rows for {n} nodes",
                file.features.len()
            )));
        }
        let width = file.features[0].len();
        if width == 0 {
            return Err(Error::Dataset("features: zero feature columns".into()));
        }
        for (i, row) in file.features.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Dataset(format!(
                    "features[{i}]: {} columns, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("features[{i}]: non-finite value")));
            }
        }
        let mut adj = vec![BTreeSet::new(); n];
        for (e, &[s, d]) in file.edges.iter().enumerate() {
            if s >= n || d >= n {
                return Err(Error::Dataset(format!("edges[{e}] = [{s}, {d}]: index out of range")));
            }
            if s == d {
                return Err(Error::Dataset(format!("edges[{e}] = [{s}, {d}]: self-loop")));
            }
            adj[s].insert(d);
            adj[d].insert(s);
        }
        let adjacency: Vec<Vec<usize>> = adj.into_iter().map(|s| s.into_iter().collect()).collect();

        let (groups, items) = match &file.graph_ids {
            Some(ids) => {
                if ids.len() != n {
                    return Err(Error::Dataset(format!(
                        "graph_ids: {} entries for {n} nodes",
                        ids.len()
                    )));
                }
                let count = ids.iter().max().map_or(0, |&m| m + 1);
                let mut groups = vec![Vec::new(); count];
                for (i, &g) in ids.iter().enumerate() {
                    groups[g].push(i);
                }
                if let Some(g) = groups.iter().position(Vec::is_empty) {
                    return Err(Error::Dataset(format!("graph_ids: graph {g} has no nodes")));
                }
                for (e, &[s, d]) in file.edges.iter().enumerate() {
                    if ids[s] != ids[d] {
                        return Err(Error::Dataset(format!("edges[{e}] = [{s}, {d}]: crosses graphs")));
                    }
                }
                (groups, count)
            }
            None => (vec![(0..n).collect()], n),
        };
        let mut position = vec![0; n];
        for g in &groups {
            for (j, &i) in g.iter().enumerate() {
                position[i] = j;
            }
        }
        if file.labels.len() != items {
            return Err(Error::Dataset(format!(
                "labels: {} entries, expected {items}",
                file.labels.len()
            )));
        }
        let num_classes = file.labels.iter().max().map_or(0, |&m| m + 1);
        if num_classes < 2 {
            return Err(Error::Dataset("labels: fewer than two classes".into()));
        }
        if let Some(masks) = &file.masks {
            for split in Split::ALL {
                if masks.get(split).len() != items {
                    return Err(Error::Dataset(format!(
                        "masks.{}: {} entries, expected {items}",
                        split.as_str(),
                        masks.get(split).len()
                    )));
                }
            }
            for i in 0..items {
                let hits = Split::ALL.iter().filter(|&&s| masks.get(s)[i]).count();
                if hits > 1 {
                    return Err(Error::Dataset(format!("masks: item {i} is in {hits} splits")));
                }
            }
        }
        Ok(Self {
            file,
            adjacency,
            groups,
            position,
            num_classes,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Dataset(format!("schema: {e}")))?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.file)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn file(&self) -> &DatasetFile {
        &self.file
    }

    pub fn task(&self) -> Task {
        if self.file.graph_ids.is_some() {
            Task::Graph
        } else {
            Task::Node
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.file.num_nodes
    }

    pub fn feature_dim(&self) -> usize {
        self.file.features[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_graphs(&self) -> usize {
        self.groups.len()
    }

    /// Node lists per graph (a single group for node tasks).
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Neighbors of node `i`, ascending, excluding `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn is_isolated(&self, i: usize) -> bool {
        self.adjacency[i].is_empty()
    }

    /// Number of directed adjacency entries.
    pub fn directed_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn labels(&self) -> &[usize] {
        &self.file.labels
    }

    /// Items (graphs or nodes) in `split`, ascending.
    pub fn split(&self, split: Split) -> Result<Vec<usize>> {
        let masks = self
            .file
            .masks
            .as_ref()
            .ok_or_else(|| Error::EmptySplit(format!("{} (dataset has no masks)", split.as_str())))?;
        let items: Vec<usize> = masks
            .get(split)
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        if items.is_empty() {
            return Err(Error::EmptySplit(split.as_str().into()));
        }
        Ok(items)
    }

    /// Relabel nodes: node `i` of the result is node `perm[i]` of `self`.
    /// Edges keep their listing order with endpoints renamed.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::Dataset("permutation is not a bijection".into()));
            }
            inverse[old] = new;
        }
        if perm.len() != n {
            return Err(Error::Dataset("permutation has the wrong length".into()));
        }
        let f = &self.file;
        let node_items = f.graph_ids.is_none();
        let remap = |v: &[bool]| -> Vec<bool> {
            if node_items {
                perm.iter().map(|&o| v[o]).collect()
            } else {
                v.to_vec()
            }
        };
        Self::from_file(DatasetFile {
            num_nodes: n,
            features: perm.iter().map(|&o| f.features[o].clone()).collect(),
            edges: f.edges.iter().map(|&[s, d]| [inverse[s], inverse[d]]).collect(),
            graph_ids: f.graph_ids.as_ref().map(|ids| perm.iter().map(|&o| ids[o]).collect()),
            labels: if node_items {
                perm.iter().map(|&o| f.labels[o]).collect()
            } else {
                f.labels.clone()
            },
            masks: f.masks.as_ref().map(|m| Masks {
                train: remap(&m.train),
                val: remap(&m.val),
                test: remap(&m.test),
            }),
        })
    }
}

/// Uniform random labelled tree on `n` nodes from a Prüfer sequence.
fn prufer_tree(n: usize, rng: &mut rng::Rng) -> Vec<[usize; 2]> {
    if n == 2 {
        return vec![[0, 1]];
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &s in &seq {
        let leaf = *leaves.iter().next().expect("a tree always has a leaf");
        leaves.remove(&leaf);
        edges.push([leaf.min(s), leaf.max(s)]);
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.insert(s);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    edges.push([rest[0], rest[1]]);
    edges
}

fn erdos_renyi(n: usize, p: f64, rng: &mut rng::Rng) -> Vec<[usize; 2]> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push([i, j]);
            }
        }
    }
    edges
}

/// Graph classification: random trees (label 0) against Erdős–Rényi graphs
/// with expected degree 3 (label 1). Node features are one-hot degrees
/// capped at [`DEGREE_CAP`]; the split is 60/20/20 per class.
pub fn synth_trees_vs_random(n_graphs: usize, nodes_per_graph: usize, seed: u64) -> Result<GraphBatch> {
    if n_graphs == 0 || !n_graphs.is_multiple_of(2) {
        return Err(Error::InvalidConfig("n_graphs must be even and positive".into()));
    }
    if nodes_per_graph < 8 {
        return Err(Error::InvalidConfig("nodes_per_graph must be at least 8".into()));
    }
    let mut rng = rng::stream(seed, streams::DATASET);
    let n = nodes_per_graph;
    let p = 3.0 / (n as f64 - 1.0);
    let mut labels: Vec<usize> = (0..n_graphs).map(|g| usize::from(g >= n_graphs / 2)).collect();
    labels.shuffle(&mut rng);

    let mut features = Vec::with_capacity(n_graphs * n);
    let mut edges = Vec::new();
    let mut graph_ids = Vec::with_capacity(n_graphs * n);
    for (g, &label) in labels.iter().enumerate() {
        let local = if label == 0 {
            prufer_tree(n, &mut rng)
        } else {
            erdos_renyi(n, p, &mut rng)
        };
        let mut degree = vec![0usize; n];
        for &[s, d] in &local {
            degree[s] += 1;
            degree[d] += 1;
        }
        let base = g * n;
        for d in degree {
            let mut row = vec![0.0; DEGREE_CAP + 1];
            row[d.min(DEGREE_CAP)] = 1.0;
            features.push(row);
            graph_ids.push(g);
        }
        edges.extend(local.into_iter().map(|[s, d]| [base + s, base + d]));
    }

    let mut split_rng = rng::stream(seed, streams::SPLIT);
    let mut masks = Masks {
        train: vec![false; n_graphs],
        val: vec![false; n_graphs],
        test: vec![false; n_graphs],
    };
    for class in 0..2 {
        let mut members: Vec<usize> = (0..n_graphs).filter(|&g| labels[g] == class).collect();
        members.shuffle(&mut split_rng);
        let n_train = members.len() * 3 / 5;
        let n_val = members.len() / 5;
        for (r, &g) in members.iter().enumerate() {
            if r < n_train {
                masks.train[g] = true;
            } else if r < n_train + n_val {
                masks.val[g] = true;
            } else {
                masks.test[g] = true;
            }
        }
    }
    let batch = GraphBatch::from_file(DatasetFile {
        num_nodes: n_graphs * n,
        features,
        edges,
        graph_ids: Some(graph_ids),
        labels,
        masks: Some(masks),
    })?;
    let oracle = histogram_oracle_accuracy(&batch)?;
    if !(0.6..=0.99).contains(&oracle) {
        log::warn!("degree-histogram baseline reaches {oracle:.3} on this suite");
    }
    Ok(batch)
}

/// Leave-one-out accuracy of a nearest-centroid classifier on normalized
/// degree histograms over every graph of the suite.
///
/// A cheap independent baseline: it should beat chance but stay short of
/// perfect on a suite worth learning.
pub fn histogram_oracle_accuracy(data: &GraphBatch) -> Result<f64> {
    if data.task() != Task::Graph {
        return Err(Error::InvalidConfig("the histogram oracle needs a graph task".into()));
    }
    let hists: Vec<Vec<f64>> = data
        .groups()
        .iter()
        .map(|nodes| {
            let mut h = [0.0; DEGREE_CAP + 1];
            for &i in nodes {
                h[data.neighbors(i).len().min(DEGREE_CAP)] += 1.0;
            }
            h.iter().map(|v| v / nodes.len() as f64).collect()
        })
        .collect();
    let c = data.num_classes();
    let mut sums = vec![vec![0.0; DEGREE_CAP + 1]; c];
    let mut counts = vec![0usize; c];
    for (h, &y) in hists.iter().zip(data.labels()) {
        counts[y] += 1;
        for (a, b) in sums[y].iter_mut().zip(h) {
            *a += b;
        }
    }
    let correct = hists
        .iter()
        .zip(data.labels())
        .filter(|&(h, &y)| {
            let pred = (0..c)
                .filter_map(|k| {
                    let n = counts[k] - usize::from(k == y);
                    if n == 0 {
                        return None;
                    }
                    let d: f64 = sums[k]
                        .iter()
                        .zip(h)
                        .map(|(s, v)| {
                            let own = if k == y { *v } else { 0.0 };
                            ((s - own) / n as f64 - v).powi(2)
                        })
                        .sum();
                    Some((k, d))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k);
            pred == Some(y)
        })
        .count();
    Ok(correct as f64 / hists.len() as f64)
}

/// Model and training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HKNConfig {
    pub layers: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub hidden_dim: usize,
    #[serde(with = "crate::serde_f64")]
    pub curvature: f64,
    #[serde(with = "crate::serde_f64")]
    pub dropout: f64,
    #[serde(with = "crate::serde_f64")]
    pub lr: f64,
    #[serde(with = "crate::serde_f64")]
    pub weight_decay: f64,
    pub pooling: Pooling,
    pub kernel_source: KernelSource,
    pub mode: ConvMode,
    pub activation: Activation,
    pub task: Task,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for HKNConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            k: 4,
            hidden_dim: 16,
            curvature: -1.0,
            dropout: 0.0,
            lr: 1e-2,
            weight_decay: 0.0,
            pooling: Pooling::Uniform,
            kernel_source: KernelSource::Optimized,
            mode: ConvMode::Relative,
            activation: Activation::Relu,
            task: Task::Graph,
            epochs: 500,
            patience: 50,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl HKNConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(2..=7).contains(&self.layers) {
            return bad(format!("layers = {} outside 2..=7", self.layers));
        }
        if !(2..=9).contains(&self.k) {
            return bad(format!("K = {} outside 2..=9", self.k));
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive".into());
        }
        if !(self.curvature < 0.0) || !self.curvature.is_finite() {
            return bad(format!("curvature {} must be negative", self.curvature));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return bad(format!("weight_decay {} must be nonnegative", self.weight_decay));
        }
        if self.epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return bad("epochs, patience and batch_size must be positive".into());
        }
        Ok(())
    }

    pub fn manifold(&self, dim: usize) -> Result<ManifoldConfig> {
        ManifoldConfig::new(self.curvature, dim)
    }
}

/// Input dimension of each layer.
pub fn layer_dims(cfg: &HKNConfig, in_dim: usize) -> Vec<usize> {
    (0..cfg.layers)
        .map(|l| if l == 0 { in_dim } else { cfg.hidden_dim })
        .collect()
}

/// One kernel set per layer, from the configured source. Layers with the same
/// input dimension share a set.
pub fn make_kernels(cfg: &HKNConfig, in_dim: usize) -> Result<Vec<KernelSet>> {
    cfg.validate()?;
    let mut cache: BTreeMap<usize, KernelSet> = BTreeMap::new();
    layer_dims(cfg, in_dim)
        .into_iter()
        .map(|dim| {
            if let Some(ks) = cache.get(&dim) {
                return Ok(ks.clone());
            }
            let mcfg = cfg.manifold(dim)?;
            let ks = match cfg.kernel_source {
                KernelSource::Optimized => {
                    let solver = SolverConfig {
                        seed: cfg.seed,
                        ..SolverConfig::default()
                    };
                    let report = solve_kernels(cfg.k, dim, &solver, &mcfg)?;
                    if !report.converged {
                        log::warn!(
                            "kernel solver for K={} dim={dim} stopped at grad norm {:.3e}; using the best iterate",
                            cfg.k,
                            report.grad_norm
                        );
                    }
                    report.kernels
                }
                KernelSource::Random => random_kernels(cfg.k, dim, cfg.seed, &mcfg)?,
            };
            cache.insert(dim, ks.clone());
            Ok(ks)
        })
        .collect()
}

/// Per-split evaluation summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(with = "crate::serde_f64")]
    pub accuracy: f64,
    #[serde(with = "crate::serde_f64")]
    pub macro_f1: f64,
    #[serde(with = "crate::serde_f64")]
    pub loss: f64,
}

/// Accuracy and macro-F1. Classes that occur in neither the targets nor the
/// predictions are left out of the F1 average.
pub fn classification_scores(targets: &[usize], predictions: &[usize]) -> (f64, f64) {
    assert_eq!(targets.len(), predictions.len());
    if targets.is_empty() {
        return (0.0, 0.0);
    }
    let correct = targets.iter().zip(predictions).filter(|(a, b)| a == b).count();
    let classes: BTreeSet<usize> = targets.iter().chain(predictions).copied().collect();
    let f1_sum: f64 = classes
        .iter()
        .map(|&c| {
            let tp = targets
                .iter()
                .zip(predictions)
                .filter(|&(&t, &p)| t == c && p == c)
                .count() as f64;
            let fp = targets
                .iter()
                .zip(predictions)
                .filter(|&(&t, &p)| t != c && p == c)
                .count() as f64;
            let fn_ = targets
                .iter()
                .zip(predictions)
                .filter(|&(&t, &p)| t == c && p != c)
                .count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            }
        })
        .sum();
    (correct as f64 / targets.len() as f64, f1_sum / classes.len() as f64)
}

/// Softmax cross-entropy of `logits` against class `y`.
pub fn cross_entropy<T: Real>(logits: &[T], y: usize) -> T {
    let max = logits.iter().map(|l| l.value()).fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<T> = logits.iter().map(|&l| (l - T::cst(max)).exp()).collect();
    T::sum(&shifted).ln() + T::cst(max) - logits[y]
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// An assembled HKN: architecture plus parameters.
#[derive(Clone, Debug)]
pub struct Hkn {
    pub cfg: HKNConfig,
    pub in_dim: usize,
    pub num_classes: usize,
    pub layers: Vec<HKConvLayer>,
    pub store: ParamStore,
}

/// HKN parameters bound to a scalar type for one forward pass.
pub struct BoundHkn<T> {
    layers: Vec<HKConvParams<T>>,
    head: CentroidBank<T>,
}

/// Assemble an HKN with fresh parameters. `kernels[l]` must live in the
/// input dimension of layer `l`.
pub fn build_hkn(cfg: &HKNConfig, in_dim: usize, num_classes: usize, kernels: Vec<KernelSet>) -> Result<Hkn> {
    cfg.validate()?;
    if in_dim == 0 || num_classes < 2 {
        return Err(Error::InvalidConfig("need features and at least two classes".into()));
    }
    if kernels.len() != cfg.layers {
        return Err(Error::InvalidConfig(format!(
            "{} kernel sets for {} layers",
            kernels.len(),
            cfg.layers
        )));
    }
    let dims = layer_dims(cfg, in_dim);
    let mut layers = Vec::with_capacity(cfg.layers);
    for (l, (ks, dim)) in kernels.into_iter().zip(dims).enumerate() {
        if ks.k() != cfg.k {
            return Err(Error::InvalidConfig(format!(
                "layer {l}: {} kernels, K = {}",
                ks.k(),
                cfg.k
            )));
        }
        if ks.dim() != dim || ks.config().curvature != cfg.curvature {
            return Err(Error::InvalidConfig(format!(
                "layer {l}: kernels in dimension {} at curvature {}, need {dim} at {}",
                ks.dim(),
                ks.config().curvature,
                cfg.curvature
            )));
        }
        layers.push(HKConvLayer::new(
            HLinearShape::new(dim, cfg.hidden_dim, cfg.activation),
            ks,
            cfg.mode,
            cfg.pooling,
        )?);
    }
    let mut store = ParamStore::new();
    let mut rng = rng::stream(cfg.seed, streams::PARAM_INIT);
    for (l, layer) in layers.iter().enumerate() {
        layer.init(&mut store, &format!("layer{l}"), &mut rng);
    }
    let dist = Uniform::new_inclusive(-CENTROID_INIT, CENTROID_INIT).expect("valid bounds");
    let z: Vec<f64> = (0..num_classes * cfg.hidden_dim)
        .map(|_| dist.sample(&mut rng))
        .collect();
    store.insert("head.z", vec![num_classes, cfg.hidden_dim], z);
    Ok(Hkn {
        cfg: cfg.clone(),
        in_dim,
        num_classes,
        layers,
        store,
    })
}

impl Hkn {
    pub fn embed_manifold(&self) -> Lorentz {
        Lorentz::new(self.cfg.manifold(self.in_dim).expect("validated")).expect("validated")
    }

    pub fn hidden_manifold(&self) -> Lorentz {
        Lorentz::new(self.cfg.manifold(self.cfg.hidden_dim).expect("validated")).expect("validated")
    }

    pub fn bind<T: Real>(&self, leaves: &Leaves<T>) -> Result<BoundHkn<T>> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| layer.bind(leaves, &format!("layer{l}")))
            .collect::<Result<Vec<_>>>()?;
        let head = CentroidBank::from_euclidean(&self.hidden_manifold(), leaves.get("head.z")?)?;
        Ok(BoundHkn { layers, head })
    }

    fn check_data(&self, data: &GraphBatch) -> Result<()> {
        if data.feature_dim() != self.in_dim {
            return Err(Error::InvalidConfig(format!(
                "model expects {} features, data has {}",
                self.in_dim,
                data.feature_dim()
            )));
        }
        if data.num_classes() > self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "model has {} classes, data has {}",
                self.num_classes,
                data.num_classes()
            )));
        }
        if data.task() != self.cfg.task {
            return Err(Error::InvalidConfig(format!(
                "model task {:?} does not match data task {:?}",
                self.cfg.task,
                data.task()
            )));
        }
        Ok(())
    }

    /// Node representations after the last layer for the nodes of `group`.
    fn node_states<T: Real>(
        &self,
        bound: &BoundHkn<T>,
        data: &GraphBatch,
        group: &[usize],
        dropout: &mut Option<&mut Dropout<'_>>,
        trace: &mut Option<&mut Vec<LorentzPoint<f64>>>,
    ) -> Result<Vec<LorentzPoint<T>>> {
        let embed = self.embed_manifold();
        let mut states = group
            .iter()
            .map(|&i| {
                let mut f = data.file.features[i].clone();
                dropout_features(&mut f, dropout);
                let z: Vec<T> = f.into_iter().map(T::cst).collect();
                embed.embed_euclidean(&z)
            })
            .collect::<Result<Vec<_>>>()?;
        record(trace, &states);
        for (l, p) in bound.layers.iter().enumerate() {
            let _s = scope(&format!("layer{l}"));
            let m = p.input;
            let next = group
                .iter()
                .enumerate()
                .map(|(j, &i)| {
                    let x = &states[j];
                    let nbrs: Vec<&LorentzPoint<T>> = if data.is_isolated(i) {
                        vec![x]
                    } else {
                        data.neighbors(i).iter().map(|&u| &states[data.position[u]]).collect()
                    };
                    let sorted: Vec<&LorentzPoint<T>> = canonical_order(&nbrs).into_iter().map(|k| nbrs[k]).collect();
                    let attn = match p.pooling {
                        Pooling::Uniform => None,
                        Pooling::Attention => {
                            let keys: Vec<LorentzPoint<T>> = sorted.iter().map(|&y| y.clone()).collect();
                            Some(attention_weights(&m, std::slice::from_ref(x), &keys, m.dim())?.remove(0))
                        }
                    };
                    hkconv(x, &sorted, p, attn.as_deref(), dropout).map_err(|e| match e {
                        Error::EmptyNeighborhood(_) => Error::EmptyNeighborhood(i),
                        e => e,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            states = next;
            record(trace, &states);
        }
        Ok(states)
    }

    /// Logits for every item (graph or node) of `group`.
    fn group_logits<T: Real>(
        &self,
        bound: &BoundHkn<T>,
        data: &GraphBatch,
        group: &[usize],
        dropout: &mut Option<&mut Dropout<'_>>,
        trace: &mut Option<&mut Vec<LorentzPoint<f64>>>,
    ) -> Result<Vec<Vec<T>>> {
        let states = self.node_states(bound, data, group, dropout, trace)?;
        let hidden = self.hidden_manifold();
        let _s = scope("head");
        let logits = |x: &LorentzPoint<T>| -> Result<Vec<T>> {
            Ok(hcdist(&hidden, x, &bound.head)?.into_iter().map(|d| -d).collect())
        };
        match self.cfg.task {
            Task::Graph => {
                let refs: Vec<&LorentzPoint<T>> = states.iter().collect();
                let sorted: Vec<LorentzPoint<T>> =
                    canonical_order(&refs).into_iter().map(|k| states[k].clone()).collect();
                let pooled = hcent(&hidden, &sorted, &vec![T::one(); sorted.len()])?;
                record(trace, std::slice::from_ref(&pooled));
                Ok(vec![logits(&pooled)?])
            }
            Task::Node => states.iter().map(logits).collect(),
        }
    }

    /// Logits of every graph (graph task) or node (node task), in item order.
    pub fn logits<T: Real>(&self, leaves: &Leaves<T>, data: &GraphBatch) -> Result<Vec<Vec<T>>> {
        self.check_data(data)?;
        let bound = self.bind(leaves)?;
        let mut out = Vec::new();
        for group in data.groups() {
            out.extend(self.group_logits(&bound, data, group, &mut None, &mut None)?);
        }
        Ok(out)
    }

    /// Every intermediate point of a plain-float forward pass.
    pub fn trace(&self, data: &GraphBatch) -> Result<Vec<LorentzPoint<f64>>> {
        self.check_data(data)?;
        let bound = self.bind(&self.store.values::<f64>())?;
        let mut points = Vec::new();
        for group in data.groups() {
            self.group_logits(&bound, data, group, &mut None, &mut Some(&mut points))?;
        }
        Ok(points)
    }

    /// Mean cross-entropy over `items` of `split`, generic so it can be
    /// checked against finite differences.
    pub fn loss<T: Real>(&self, leaves: &Leaves<T>, data: &GraphBatch, items: &[usize]) -> Result<T> {
        self.check_data(data)?;
        let bound = self.bind(leaves)?;
        self.batch_loss(&bound, data, items, &mut None)
    }

    fn batch_loss<T: Real>(
        &self,
        bound: &BoundHkn<T>,
        data: &GraphBatch,
        items: &[usize],
        dropout: &mut Option<&mut Dropout<'_>>,
    ) -> Result<T> {
        let labels = data.labels();
        let mut terms = Vec::with_capacity(items.len());
        match self.cfg.task {
            Task::Graph => {
                for &g in items {
                    let logits = self.group_logits(bound, data, &data.groups()[g], dropout, &mut None)?;
                    terms.push(cross_entropy(&logits[0], labels[g]));
                }
            }
            Task::Node => {
                let logits = self.group_logits(bound, data, &data.groups()[0], dropout, &mut None)?;
                for &i in items {
                    terms.push(cross_entropy(&logits[i], labels[i]));
                }
            }
        }
        Ok(T::sum(&terms).scale(1.0 / items.len() as f64))
    }
}

fn record<T: Real>(trace: &mut Option<&mut Vec<LorentzPoint<f64>>>, points: &[LorentzPoint<T>]) {
    if let Some(t) = trace.as_deref_mut() {
        t.extend(points.iter().map(LorentzPoint::values));
    }
}

/// Accuracy, macro-F1 and mean loss over a split, without touching the
/// parameters.
pub fn evaluate(model: &Hkn, data: &GraphBatch, split: Split) -> Result<Metrics> {
    let items = data.split(split)?;
    let logits = model.logits(&model.store.values::<f64>(), data)?;
    Ok(metrics_from_logits(&logits, data.labels(), &items))
}

fn metrics_from_logits(logits: &[Vec<f64>], labels: &[usize], items: &[usize]) -> Metrics {
    let targets: Vec<usize> = items.iter().map(|&i| labels[i]).collect();
    let predictions: Vec<usize> = items.iter().map(|&i| argmax(&logits[i])).collect();
    let loss = items.iter().map(|&i| cross_entropy(&logits[i], labels[i])).sum::<f64>() / items.len() as f64;
    let (accuracy, macro_f1) = classification_scores(&targets, &predictions);
    Metrics {
        accuracy,
        macro_f1,
        loss,
    }
}

/// One metrics-CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: Split,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Epoch 0 is the untrained model; epoch `e` follows `e` passes over the
    /// training items.
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val: Metrics,
    pub test: Metrics,
}

impl TrainReport {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("epoch,split,loss,accuracy,macro_f1\n");
        for r in &self.history {
            let _ = writeln!(
                out,
                "{},{},{:.17e},{:.17e},{:.17e}",
                r.epoch,
                r.split.as_str(),
                r.metrics.loss,
                r.metrics.accuracy,
                r.metrics.macro_f1
            );
        }
        out
    }

    pub fn losses(&self, split: Split) -> Vec<f64> {
        self.history
            .iter()
            .filter(|r| r.split == split)
            .map(|r| r.metrics.loss)
            .collect()
    }
}

/// Interval, in epochs, of the on-manifold check in debug builds.
const MANIFOLD_CHECK_EVERY: usize = 10;

/// Train with Adam on mini-batches of training items, early-stopping on
/// validation accuracy. The parameters of the best validation epoch are
/// restored before returning.
pub fn train(model: &mut Hkn, data: &GraphBatch) -> Result<TrainReport> {
    model.check_data(data)?;
    let cfg = model.cfg.clone();
    let train_items = data.split(Split::Train)?;
    let splits: Vec<(Split, Vec<usize>)> = Split::ALL
        .iter()
        .map(|&s| Ok((s, data.split(s)?)))
        .collect::<Result<_>>()?;
    let adam = AdamConfig::new(cfg.lr, cfg.weight_decay);
    let mut shuffle_rng = rng::stream(cfg.seed, streams::SHUFFLE);
    let mut dropout_rng = rng::stream(cfg.seed, streams::DROPOUT);

    let mut history = Vec::new();
    let snapshot = |model: &Hkn, epoch: usize, history: &mut Vec<EpochRecord>| -> Result<(Metrics, Metrics)> {
        let logits = model.logits(&model.store.values::<f64>(), data)?;
        let mut val = None;
        let mut test = None;
        for (split, items) in &splits {
            let metrics = metrics_from_logits(&logits, data.labels(), items);
            if !metrics.loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    context: format!("{} evaluation", split.as_str()),
                });
            }
            match split {
                Split::Val => val = Some(metrics),
                Split::Test => test = Some(metrics),
                Split::Train => {}
            }
            history.push(EpochRecord {
                epoch,
                split: *split,
                metrics,
            });
        }
        Ok((val.expect("val split"), test.expect("test split")))
    };

    let (mut best_val, mut best_test) = snapshot(model, 0, &mut history)?;
    let mut best_epoch = 0;
    let mut best_store = model.store.clone();
    let mut epochs_run = 0;

    for epoch in 1..=cfg.epochs {
        let mut order = match cfg.task {
            Task::Graph => train_items.clone(),
            Task::Node => vec![0],
        };
        order.shuffle(&mut shuffle_rng);
        let batches: Vec<Vec<usize>> = match cfg.task {
            Task::Graph => order.chunks(cfg.batch_size).map(<[usize]>::to_vec).collect(),
            Task::Node => vec![train_items.clone()],
        };
        for batch in batches {
            let mut grads = Gradients::zeros_like(&model.store);
            // Graph tasks take one tape per graph; node tasks one per step.
            let units: Vec<Vec<usize>> = match cfg.task {
                Task::Graph => batch.iter().map(|&g| vec![g]).collect(),
                Task::Node => vec![batch.clone()],
            };
            for unit in &units {
                let tape = Tape::new();
                let leaves = model.store.track(&tape);
                let bound = model.bind(&leaves)?;
                let mut dropout = Dropout::new(cfg.dropout, &mut dropout_rng)?;
                let mut d = Some(&mut dropout);
                let loss = model.batch_loss(&bound, data, unit, &mut d)?;
                if !loss.value().is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        context: format!("training items {unit:?}"),
                    });
                }
                let adjoints = tape.gradient(loss).map_err(|e| match e {
                    Error::NumericFailure { op, scope } => Error::NonFiniteLoss {
                        epoch,
                        context: format!("backward through {op} at {scope}"),
                    },
                    e => e,
                })?;
                let weight = unit.len() as f64 / batch.len() as f64;
                grads.accumulate(&leaves.gradients(&adjoints), weight);
            }
            adam_step(&mut model.store, &grads, &adam)?;
        }
        epochs_run = epoch;

        if cfg!(debug_assertions) && epoch % MANIFOLD_CHECK_EVERY == 0 {
            let hidden = model.hidden_manifold();
            let embed = model.embed_manifold();
            for p in model.trace(data)? {
                let m = if p.dim() == hidden.dim() { &hidden } else { &embed };
                debug_assert!(m.check_point(&p).is_ok(), "off-manifold intermediate at epoch {epoch}");
            }
        }

        let (val, test) = snapshot(model, epoch, &mut history)?;
        if val.accuracy > best_val.accuracy {
            best_val = val;
            best_test = test;
            best_epoch = epoch;
            best_store = model.store.clone();
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    model.store = best_store;
    Ok(TrainReport {
        history,
        best_epoch,
        epochs_run,
        val: best_val,
        test: best_test,
    })
}

/// Self-contained model checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub config: HKNConfig,
    pub in_dim: usize,
    pub num_classes: usize,
    pub kernels: Vec<KernelFile>,
    pub params: ParamStore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_metrics: Option<Metrics>,
}

pub const CHECKPOINT_FORMAT: &str = "hkconv-checkpoint-v1";

impl Hkn {
    pub fn checkpoint(&self, test_metrics: Option<Metrics>) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config: self.cfg.clone(),
            in_dim: self.in_dim,
            num_classes: self.num_classes,
            kernels: self.layers.iter().map(|l| l.kernels.to_file()).collect(),
            params: self.store.clone(),
            test_metrics,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Validation(format!("unknown checkpoint format {:?}", ck.format)));
        }
        let kernels = ck
            .kernels
            .iter()
            .cloned()
            .map(KernelSet::from_file)
            .collect::<Result<Vec<_>>>()?;
        let mut model = build_hkn(&ck.config, ck.in_dim, ck.num_classes, kernels)?;
        for (path, p) in &model.store.params {
            let q = ck.params.get(path)?;
            if q.shape != p.shape || q.data.len() != p.data.len() {
                return Err(Error::ShapeMismatch {
                    path: path.clone(),
                    expected: p.shape.clone(),
                    found: q.shape.clone(),
                });
            }
        }
        if let Some(extra) = ck.params.paths().find(|p| !model.store.params.contains_key(*p)) {
            return Err(Error::UnknownParameter(extra.to_string()));
        }
        model.store = ck.params.clone();
        Ok(model)
    }
}

/// One trained cell of a kernel-count sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub seed: u64,
    pub metric: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSummary {
    pub k: usize,
    pub mean: f64,
    /// Population standard deviation over the seeds.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("K,seed,metric\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.17e}", r.k, r.seed, r.metric);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("K,mean,std\n");
        for s in &self.summary {
            let _ = writeln!(out, "{},{:.17e},{:.17e}", s.k, s.mean, s.std);
        }
        out
    }

    pub fn mean(&self, k: usize) -> Option<f64> {
        self.summary.iter().find(|s| s.k == k).map(|s| s.mean)
    }
}

/// Train one model per `(K, seed)` with everything else fixed and report
/// test accuracy. Seeds are `base.seed, base.seed + 1, …`.
pub fn sweep_kernels(base: &HKNConfig, data: &GraphBatch, k_list: &[usize], seeds: usize) -> Result<SweepReport> {
    if k_list.is_empty() || seeds == 0 {
        return Err(Error::InvalidConfig("sweep needs at least one K and one seed".into()));
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &k in k_list {
        let mut metrics = Vec::with_capacity(seeds);
        for s in 0..seeds as u64 {
            let cfg = HKNConfig {
                k,
                seed: base.seed + s,
                ..base.clone()
            };
            let kernels = make_kernels(&cfg, data.feature_dim())?;
            let mut model = build_hkn(&cfg, data.feature_dim(), data.num_classes(), kernels)?;
            let report = train(&mut model, data)?;
            log::info!(
                "sweep K={k} seed={} test accuracy {:.4}",
                cfg.seed,
                report.test.accuracy
            );
            rows.push(SweepRow {
                k,
                seed: cfg.seed,
                metric: report.test.accuracy,
            });
            metrics.push(report.test.accuracy);
        }
        let mean = metrics.iter().sum::<f64>() / seeds as f64;
        let var = metrics.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / seeds as f64;
        summary.push(SweepSummary {
            k,
            mean,
            std: var.sqrt(),
        });
    }
    Ok(SweepReport { rows, summary })
}
