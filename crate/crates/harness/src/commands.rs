//! One function per CLI subcommand. Each takes a resolved config and returns
//! the JSON value printed on stdout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use spectral_impute::diffusion::{DEFAULT_ETA, DEFAULT_MAX_ITER};
use spectral_impute::graph::{FeatureMatrix, SparseGraph};
use spectral_impute::prune::{
    bernoulli_sparsify, channel_prune_l1, conv_to_matrix, hard_threshold, sparsify_pc, KeepPolicy, PruneReport,
    SparsifyParams,
};
use spectral_impute::tensor_io::{kernel_from_tensor, model_tensors, read_tensors, write_tensors, NamedTensor};
use spectral_impute::DenseMatrix;

use crate::config::{DataSpec, ExperimentConfig, GraphSpec, HyperParams, Method, SeedSpec, SplitSpec};
use crate::error::{HarnessError, Result};
use crate::eval::{knn_classify_eval, mse_eval};
use crate::experiment::{
    classify_once, impute_once, known_first_order, load_dataset, lsi_impute, resolve_graph, run_experiment,
};
use crate::fixtures::{chain3, two_block_sbm, two_cluster_imputation, token_names, Dataset};
use crate::io::{load_edge_list, load_embeddings, load_labels, save_edge_list, save_embeddings, save_labels, Embeddings};

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::InvalidArgument(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

/// Rows of `features` present in `known` go first; returns the order, the
/// known count and the known vectors in that order.
fn split_known(features: &Embeddings, known: Option<&Embeddings>) -> (Vec<usize>, usize, Option<DenseMatrix>) {
    let n = features.tokens.len();
    let Some(known) = known else {
        return ((0..n).collect(), n, None);
    };
    let index = known.index();
    let hits: Vec<(usize, usize)> = features
        .tokens
        .iter()
        .enumerate()
        .filter_map(|(i, t)| index.get(t.as_str()).map(|&j| (i, j)))
        .collect();
    let rows: Vec<usize> = hits.iter().map(|&(i, _)| i).collect();
    let src: Vec<usize> = hits.iter().map(|&(_, j)| j).collect();
    (known_first_order(n, &rows), rows.len(), Some(known.vectors.select_rows(&src)))
}

fn unpermute_graph(g: &SparseGraph, order: &[usize]) -> Result<SparseGraph> {
    let n = order.len();
    let mask: Vec<bool> = {
        let mut m = vec![false; n];
        for (new, &old) in order.iter().enumerate() {
            m[old] = g.labeled_mask()[new];
        }
        m
    };
    let edges = g.edges().into_iter().map(|(s, d, w)| (order[s], order[d], w));
    Ok(SparseGraph::from_edges(n, edges, mask)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildGraphConfig {
    pub features: PathBuf,
    /// Embeddings whose tokens mark the labeled rows; all rows otherwise.
    #[serde(default)]
    pub known: Option<PathBuf>,
    pub graph: GraphSpec,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
}

/// Writes the edge list in the row numbering of the features file.
pub fn build_graph(cfg: &BuildGraphConfig) -> Result<Value> {
    let features = load_embeddings(&cfg.features)?;
    let known = cfg.known.as_deref().map(load_embeddings).transpose()?;
    let (order, p, _) = split_known(&features, known.as_ref());
    if p == 0 {
        return Err(HarnessError::InvalidArgument("no feature row is known".into()));
    }
    let fm = FeatureMatrix::new(features.vectors.select_rows(&order), p)?;
    let spec = match cfg.graph {
        GraphSpec::Auto | GraphSpec::Given => {
            return Err(HarnessError::Config("build-graph needs graph.kind = mst_knn or anchor_knn".into()))
        }
        ref s => s,
    };
    let g = unpermute_graph(&resolve_graph(spec, &fm, None, cfg.seed)?, &order)?;
    save_edge_list(&cfg.output, &g)?;
    Ok(json!({
        "nodes": g.n(),
        "edges": g.edge_count(),
        "weakly_connected": g.is_weakly_connected(),
        "every_component_labeled": g.every_component_labeled(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputeConfig {
    pub features: PathBuf,
    /// Known embeddings; tokens absent here are imputed.
    pub embeddings: PathBuf,
    #[serde(default)]
    pub edges: Option<PathBuf>,
    #[serde(default)]
    pub graph: GraphSpec,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    pub output: PathBuf,
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

/// Writes embeddings for every feature token: known rows verbatim, the rest
/// imputed, in feature-file order.
pub fn impute(cfg: &ImputeConfig) -> Result<Value> {
    let features = load_embeddings(&cfg.features)?;
    let known = load_embeddings(&cfg.embeddings)?;
    let (order, p, known_rows) = split_known(&features, Some(&known));
    let known_rows = known_rows.expect("known given");
    if p == 0 {
        return Err(HarnessError::InvalidArgument("no feature token has a known embedding".into()));
    }
    let n = order.len();
    let given = cfg.edges.as_deref().map(|e| load_edge_list(e, n)).transpose()?;
    let fm = FeatureMatrix::new(features.vectors.select_rows(&order), p)?;
    let g = resolve_graph(&cfg.graph, &fm, given.as_ref().map(|g| (g, order.as_slice())), cfg.seed)?;
    let (table, report) = lsi_impute(&g, &fm, &known_rows, cfg.eta, cfg.max_iter)?;
    let permuted = table.into_values();
    let mut values = DenseMatrix::zeros(n, permuted.cols());
    for (new, &old) in order.iter().enumerate() {
        values.row_mut(old).copy_from_slice(permuted.row(new));
    }
    save_embeddings(&cfg.output, &Embeddings::new(features.tokens, values)?)?;
    Ok(json!({ "known": p, "imputed": n - p, "diffusion": to_value(&report) }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub data: DataSpec,
    pub method: Method,
    #[serde(default)]
    pub eiglearn: bool,
    #[serde(default)]
    pub graph: GraphSpec,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub init_seed: u64,
    /// Trained parameters in the tensor text format.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

/// One training run; reports metrics and the per-epoch losses.
pub fn train(cfg: &TrainConfig) -> Result<Value> {
    let exp = ExperimentConfig {
        name: "train".into(),
        data: cfg.data.clone(),
        method: cfg.method,
        eiglearn: cfg.eiglearn,
        graph: cfg.graph.clone(),
        split: cfg.split.clone(),
        seeds: SeedSpec {
            splits: 1,
            inits: 1,
            base: cfg.split_seed,
        },
        hyper: cfg.hyper.clone(),
        output: None,
        report_imputed: false,
    };
    exp.validate()?;
    let out = match load_dataset(&cfg.data)? {
        Dataset::Imputation(set) => impute_once(&set, &exp, cfg.split_seed, cfg.init_seed)?,
        Dataset::Classification(d) => classify_once(&d, &exp, cfg.split_seed, cfg.init_seed)?,
    };
    if let (Some(path), Some(model)) = (&cfg.checkpoint, &out.model) {
        let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut w = BufWriter::new(f);
        write_tensors(&mut w, &model_tensors(model))?;
        w.flush().map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(json!({ "metrics": to_value(&out.metrics), "train_report": to_value(&out.train_report) }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PruneMethod {
    Threshold { keep_fraction: f64 },
    Bernoulli { policy: KeepPolicy, seed: u64 },
    Sparsify(SparsifyParams),
    Channel { drop_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Tensor names to prune; empty prunes every eligible tensor.
    #[serde(default)]
    pub tensors: Vec<String>,
    pub method: PruneMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorPruneReport {
    pub name: String,
    #[serde(flatten)]
    pub report: PruneReport,
}

fn prune_matrix(a: &DenseMatrix, method: &PruneMethod) -> Result<(DenseMatrix, PruneReport)> {
    let s = match method {
        PruneMethod::Threshold { keep_fraction } => hard_threshold(a, *keep_fraction)?,
        PruneMethod::Bernoulli { policy, seed } => bernoulli_sparsify(a, *policy, *seed)?,
        PruneMethod::Sparsify(p) => sparsify_pc(a, p)?,
        PruneMethod::Channel { .. } => unreachable!("handled by caller"),
    };
    Ok((s.matrix, s.report))
}

/// Rank-2 tensors are pruned directly; rank-4 kernels through their
/// `CKK × O` unfolding, or by output channel.
pub fn prune(cfg: &PruneConfig) -> Result<Value> {
    let f = File::open(&cfg.input).map_err(|e| HarnessError::io(&cfg.input, e))?;
    let mut tensors = read_tensors(BufReader::new(f))?;
    for name in &cfg.tensors {
        if !tensors.iter().any(|t| &t.name == name) {
            return Err(HarnessError::InvalidArgument(format!("no tensor named `{name}`")));
        }
    }
    let selected = |t: &NamedTensor| cfg.tensors.is_empty() || cfg.tensors.contains(&t.name);
    let mut reports = Vec::new();
    for t in tensors.iter_mut().filter(|t| selected(t)) {
        let report = match (&cfg.method, t.shape.len()) {
            (PruneMethod::Channel { drop_fraction }, 4) => {
                let k = kernel_from_tensor(t, 1, 0)?;
                let (pruned, _, report) = channel_prune_l1(&k, *drop_fraction)?;
                t.values = pruned.values;
                report
            }
            (PruneMethod::Channel { .. }, _) => continue,
            (m, 2) if t.shape[0] > 1 => {
                let (pruned, report) = prune_matrix(&t.to_matrix()?, m)?;
                t.values = pruned.into_vec();
                report
            }
            (m, 4) => {
                let k = kernel_from_tensor(t, 1, 0)?;
                let (pruned, report) = prune_matrix(&conv_to_matrix(&k), m)?;
                t.values = pruned.transpose().into_vec();
                report
            }
            _ => continue,
        };
        reports.push(TensorPruneReport {
            name: t.name.clone(),
            report,
        });
    }
    if reports.is_empty() {
        return Err(HarnessError::InvalidArgument("no tensor was eligible for this method".into()));
    }
    let f = File::create(&cfg.output).map_err(|e| HarnessError::io(&cfg.output, e))?;
    let mut w = BufWriter::new(f);
    write_tensors(&mut w, &tensors)?;
    w.flush().map_err(|e| HarnessError::io(&cfg.output, e))?;
    Ok(to_value(&reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalMetric {
    Knn { labels: PathBuf, k: usize },
    /// Compares rows whose token appears in both files.
    Mse { truth: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub embeddings: PathBuf,
    pub metric: EvalMetric,
}

pub fn eval(cfg: &EvalConfig) -> Result<Value> {
    let emb = load_embeddings(&cfg.embeddings)?;
    let result = match &cfg.metric {
        EvalMetric::Knn { labels, k } => {
            let n = emb.tokens.len();
            let labels = load_labels(labels, n)?;
            knn_classify_eval(&emb.vectors, &labels, *k, &(0..n).collect::<Vec<_>>())?
        }
        EvalMetric::Mse { truth } => {
            let truth = load_embeddings(truth)?;
            let index = truth.index();
            let (mine, theirs): (Vec<usize>, Vec<usize>) = emb
                .tokens
                .iter()
                .enumerate()
                .filter_map(|(i, t)| index.get(t.as_str()).map(|&j| (i, j)))
                .unzip();
            if mine.is_empty() {
                return Err(HarnessError::InvalidArgument("no token appears in both files".into()));
            }
            mse_eval(&emb.vectors.select_rows(&mine), &truth.vectors.select_rows(&theirs))?
        }
    };
    Ok(to_value(&result))
}

/// Runs an experiment and writes the report to `output` when set.
pub fn run(cfg: &ExperimentConfig) -> Result<Value> {
    let report = run_experiment(cfg)?;
    if let Some(path) = &cfg.output {
        write_json(path, &report)?;
    }
    Ok(to_value(&report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Chain3,
    TwoCluster,
    Sbm,
}

/// Writes a synthetic dataset as plain files into `dir`.
///
/// Imputation fixtures produce `features.txt`, `truth.txt` and
/// `embeddings.txt` (the first `known` rows only); classification fixtures
/// produce `features.txt`, `labels.txt` and `edges.txt`.
pub fn gen_fixture(kind: FixtureKind, n: usize, seed: u64, known: Option<usize>, dir: &Path) -> Result<Value> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let files: Vec<PathBuf> = match kind {
        FixtureKind::Chain3 | FixtureKind::TwoCluster => {
            let set = match kind {
                FixtureKind::Chain3 => chain3(),
                _ => two_cluster_imputation(n, seed),
            };
            let p = known.or_else(|| set.fixed_known.as_ref().map(Vec::len)).unwrap_or(set.n() / 5);
            if p == 0 || p > set.n() {
                return Err(HarnessError::Config(format!("known count must lie in 1..={}", set.n())));
            }
            let head: Vec<usize> = (0..p).collect();
            let paths = [dir.join("features.txt"), dir.join("truth.txt"), dir.join("embeddings.txt")];
            save_embeddings(&paths[0], &Embeddings::new(set.tokens.clone(), set.features.clone())?)?;
            save_embeddings(&paths[1], &Embeddings::new(set.tokens.clone(), set.truth.clone())?)?;
            save_embeddings(
                &paths[2],
                &Embeddings::new(set.tokens[..p].to_vec(), set.truth.select_rows(&head))?,
            )?;
            let mut out = paths.to_vec();
            if let Some(classes) = &set.classes {
                let path = dir.join("labels.txt");
                save_labels(&path, classes)?;
                out.push(path);
            }
            if let Some(g) = &set.graph {
                let path = dir.join("edges.txt");
                save_edge_list(&path, g)?;
                out.push(path);
            }
            out
        }
        FixtureKind::Sbm => {
            let d = two_block_sbm(n, 0.08, 0.01, seed);
            let paths = [dir.join("features.txt"), dir.join("labels.txt"), dir.join("edges.txt")];
            save_embeddings(&paths[0], &Embeddings::new(token_names(n), d.features.clone())?)?;
            save_labels(&paths[1], &d.classes)?;
            save_edge_list(&paths[2], &d.graph)?;
            paths.to_vec()
        }
    };
    Ok(json!({ "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() }))
}
