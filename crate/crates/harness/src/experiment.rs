//! End-to-end runs: load data, split, build a graph, impute or classify, and
//! aggregate over seeds.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spectral_impute::diffusion::{lsi_power_iterate, DiffusionReport, EmbeddingTable};
use spectral_impute::gnn::{
    build_filter_chebyshev, build_filter_sna, forward, output_loss, train_two_stage, Architecture, FilterMatrix,
    GnnModel, Objective, Schedule, Split, Targets, TrainReport,
};
use spectral_impute::graph::{
    anchor_knn_graph, clamp_labeled_block, edge_weights_nnls, mst_knn_graph, FeatureMatrix, SparseGraph,
};
use spectral_impute::DenseMatrix;

use crate::config::{DataSpec, ExperimentConfig, GraphSpec, HyperParams, Method};
use crate::error::{HarnessError, Result};
use crate::eval::{knn_classify_eval, EvalResult};
use crate::fixtures::{chain3, two_block_sbm, two_cluster_imputation, Dataset, ImputationSet};
use crate::io::{load_cora, load_edge_list, load_embeddings, load_labels, LabeledGraph};

/// δ used when the graph spec is `auto` and the data has no edges.
pub const AUTO_DELTA: usize = 8;

pub fn load_dataset(spec: &DataSpec) -> Result<Dataset> {
    Ok(match spec {
        DataSpec::Chain3 => Dataset::Imputation(chain3()),
        DataSpec::TwoCluster { n, seed } => Dataset::Imputation(two_cluster_imputation(*n, *seed)),
        DataSpec::Sbm { n, p_in, p_out, seed } => Dataset::Classification(two_block_sbm(*n, *p_in, *p_out, *seed)),
        DataSpec::Embeddings {
            features,
            embeddings,
            labels,
            edges,
        } => Dataset::Imputation(load_imputation_files(features, embeddings, labels.as_deref(), edges.as_deref())?),
        DataSpec::Graph { features, labels, edges } => {
            let f = load_embeddings(features)?;
            let n = f.tokens.len();
            let classes = load_labels(labels, n)?;
            let graph = load_edge_list(edges, n)?;
            let count = classes.iter().max().map_or(0, |m| m + 1);
            Dataset::Classification(LabeledGraph {
                features: f.vectors,
                classes,
                class_names: (0..count).map(|c| c.to_string()).collect(),
                graph,
            })
        }
        DataSpec::Cora { dir } => Dataset::Classification(load_cora(dir)?),
    })
}

/// Rows of `features` whose token appears in `embeddings` carry truth.
pub fn load_imputation_files(
    features: &Path,
    embeddings: &Path,
    labels: Option<&Path>,
    edges: Option<&Path>,
) -> Result<ImputationSet> {
    let f = load_embeddings(features)?;
    let e = load_embeddings(embeddings)?;
    let n = f.tokens.len();
    let l = e.vectors.cols();
    let index = e.index();
    let mut truth = DenseMatrix::zeros(n, l);
    let mut has_truth = vec![false; n];
    for (i, tok) in f.tokens.iter().enumerate() {
        if let Some(&j) = index.get(tok.as_str()) {
            truth.row_mut(i).copy_from_slice(e.vectors.row(j));
            has_truth[i] = true;
        }
    }
    if !has_truth.iter().any(|&h| h) {
        return Err(HarnessError::InvalidArgument(format!(
            "no token of {} appears in {}",
            features.display(),
            embeddings.display()
        )));
    }
    let classes = labels.map(|p| load_labels(p, n)).transpose()?;
    let graph = edges.map(|p| load_edge_list(p, n)).transpose()?;
    Ok(ImputationSet {
        tokens: f.tokens,
        features: f.vectors,
        truth,
        has_truth,
        fixed_known: None,
        classes,
        graph,
    })
}

/// Row permutation that puts the `known` rows first, in the given order,
/// followed by the remaining rows ascending. `order[new] = old`.
pub fn known_first_order(n: usize, known: &[usize]) -> Vec<usize> {
    let mut is_known = vec![false; n];
    known.iter().for_each(|&i| is_known[i] = true);
    known.iter().copied().chain((0..n).filter(|&i| !is_known[i])).collect()
}

/// Relabels `g` by `order` and marks the first `p` new indices as labeled.
pub fn permute_graph(g: &SparseGraph, order: &[usize], p: usize) -> Result<SparseGraph> {
    let n = order.len();
    let mut inv = vec![0; n];
    order.iter().enumerate().for_each(|(new, &old)| inv[old] = new);
    let edges = g.edges().into_iter().map(|(s, d, w)| (inv[s], inv[d], w));
    Ok(SparseGraph::from_edges(n, edges, (0..n).map(|i| i < p).collect())?)
}

fn normalize_rows(x: &mut DenseMatrix) {
    for i in 0..x.rows() {
        let row = x.row_mut(i);
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// Builds or relabels the graph over features already in known-first order.
pub fn resolve_graph(
    spec: &GraphSpec,
    fm: &FeatureMatrix,
    given: Option<(&SparseGraph, &[usize])>,
    seed: u64,
) -> Result<SparseGraph> {
    let p = fm.p();
    match (spec, given) {
        (GraphSpec::Given | GraphSpec::Auto, Some((g, order))) => permute_graph(g, order, p),
        (GraphSpec::Given, None) => Err(HarnessError::Config("graph = given but the data has no edges".into())),
        (GraphSpec::Auto, None) => Ok(mst_knn_graph(fm, AUTO_DELTA)?),
        (GraphSpec::MstKnn { delta }, _) => Ok(mst_knn_graph(fm, *delta)?),
        (GraphSpec::AnchorKnn { delta, m }, _) => Ok(anchor_knn_graph(fm, *delta, *m, seed)?),
    }
}

/// NNLS edge weights, clamped walk, then power iteration from zero.
pub fn lsi_impute(
    g: &SparseGraph,
    fm: &FeatureMatrix,
    known: &DenseMatrix,
    eta: f64,
    max_iter: usize,
) -> Result<(EmbeddingTable, DiffusionReport)> {
    let walk = clamp_labeled_block(&edge_weights_nnls(g, fm)?.walk);
    let y0 = EmbeddingTable::zero_initialized(known, fm.n() - known.rows());
    Ok(lsi_power_iterate(&walk, &y0, eta, max_iter)?)
}

pub fn architecture(method: Method, hyper: &HyperParams) -> Option<Architecture> {
    Some(match method {
        Method::Lsi => return None,
        Method::Mlp => Architecture::Mlp,
        Method::Gcn => Architecture::Gcn,
        Method::Sgc => Architecture::Sgc { power: hyper.sgc_power },
        Method::Chebynet => Architecture::ChebyNet { order: hyper.cheb_order },
        Method::Appnp => Architecture::Appnp {
            alpha: hyper.appnp_alpha,
            steps: hyper.appnp_steps,
        },
    })
}

pub fn build_filter(arch: Architecture, g: &SparseGraph) -> Result<FilterMatrix> {
    Ok(match arch {
        Architecture::ChebyNet { order } => build_filter_chebyshev(g, order, None)?,
        _ => build_filter_sna(g)?,
    })
}

/// Stage II only runs with `eiglearn`; `k` is capped below the node count.
pub fn effective_schedule(hyper: &HyperParams, eiglearn: bool, n: usize) -> Schedule {
    let mut s = hyper.schedule.clone();
    if !eiglearn {
        s.stage2.epochs = 0;
    }
    s.k = s.k.min(n.saturating_sub(1)).max(1);
    s
}

/// Per-run seed for model initialization and dropout.
pub fn model_seed(split_seed: u64, init_seed: u64) -> u64 {
    split_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ init_seed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedRow {
    pub index: usize,
    pub token: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub metrics: BTreeMap<String, f64>,
    pub imputed: Option<Vec<ImputedRow>>,
    pub model: Option<GnnModel>,
    pub train_report: Option<TrainReport>,
}

fn draw_known(set: &ImputationSet, count: Option<usize>, split_seed: u64) -> Result<Vec<usize>> {
    if let (None, Some(fixed)) = (count, &set.fixed_known) {
        return Ok(fixed.clone());
    }
    let mut candidates: Vec<usize> = (0..set.n()).filter(|&i| set.has_truth[i]).collect();
    let want = count.unwrap_or(set.n() / 5).max(1);
    if want > candidates.len() {
        return Err(HarnessError::Config(format!(
            "asked for {want} known rows but only {} have embeddings",
            candidates.len()
        )));
    }
    if want == candidates.len() && want == set.n() {
        return Err(HarnessError::Config("every row is known; nothing to impute".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    candidates.shuffle(&mut rng);
    candidates.truncate(want);
    candidates.sort_unstable();
    Ok(candidates)
}

pub fn impute_once(set: &ImputationSet, cfg: &ExperimentConfig, split_seed: u64, init_seed: u64) -> Result<RunOutput> {
    let known = draw_known(set, cfg.split.known, split_seed)?;
    let n = set.n();
    let p = known.len();
    let order = known_first_order(n, &known);
    let mut x = set.features.select_rows(&order);
    if cfg.hyper.normalize_features {
        normalize_rows(&mut x);
    }
    let fm = FeatureMatrix::new(x, p)?;
    let g = resolve_graph(&cfg.graph, &fm, set.graph.as_ref().map(|g| (g, order.as_slice())), split_seed)?;
    let truth = set.truth.select_rows(&order);
    let known_rows = truth.select_rows(&(0..p).collect::<Vec<_>>());

    let mut out = RunOutput::default();
    let values = match architecture(cfg.method, &cfg.hyper) {
        None => {
            let (table, report) = lsi_impute(&g, &fm, &known_rows, cfg.hyper.lsi_eta, cfg.hyper.lsi_max_iter)?;
            out.metrics.insert("lsi_iterations".into(), report.iterations as f64);
            out.metrics.insert("lsi_converged".into(), f64::from(u8::from(report.converged)));
            table.into_values()
        }
        Some(arch) => {
            let filter = build_filter(arch, &g)?;
            let model = GnnModel::new(arch, fm.d(), cfg.hyper.hidden, truth.cols(), Objective::Mse, model_seed(split_seed, init_seed))?
                .with_dropout(cfg.hyper.dropout)?;
            let mut targets = DenseMatrix::zeros(n, truth.cols());
            targets.as_mut_slice()[..p * truth.cols()].copy_from_slice(known_rows.as_slice());
            let split = Split {
                train: (0..p).collect(),
                ..Split::default()
            };
            let schedule = effective_schedule(&cfg.hyper, cfg.eiglearn, n);
            let (model, report) = train_two_stage(model, &filter, fm.data(), &Targets::Values(targets), &split, &schedule)?;
            let mut pred = forward(&model, &filter, fm.data())?;
            pred.as_mut_slice()[..p * truth.cols()].copy_from_slice(known_rows.as_slice());
            if let Some(l) = report.stage2_final_loss.or(report.stage1_final_loss) {
                out.metrics.insert("train_loss".into(), l);
            }
            out.model = Some(model);
            out.train_report = Some(report);
            pred
        }
    };

    let held_out: Vec<usize> = (p..n).filter(|&k| set.has_truth[order[k]]).collect();
    if !held_out.is_empty() {
        let mut s = 0.0;
        for &k in &held_out {
            s += values.row(k).iter().zip(truth.row(k)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        out.metrics.insert("mse".into(), s / (held_out.len() * truth.cols()) as f64);
    }
    if let Some(classes) = &set.classes {
        let k = cfg.hyper.knn_k;
        if p < n && k < n {
            let labels: Vec<usize> = order.iter().map(|&i| classes[i]).collect();
            let queries: Vec<usize> = (p..n).collect();
            let r = knn_classify_eval(&values, &labels, k, &queries)?;
            out.metrics.insert(r.kind, r.mean);
        }
    }
    if cfg.report_imputed {
        out.imputed = Some(
            (p..n)
                .map(|k| ImputedRow {
                    index: order[k],
                    token: set.tokens[order[k]].clone(),
                    values: values.row(k).to_vec(),
                })
                .collect(),
        );
    }
    Ok(out)
}

/// Train / validation / test node ids: `per_class` per class for training,
/// then validation and test drawn from the shuffled remainder.
pub fn classification_split(classes: &[usize], per_class: usize, validation: usize, test: usize, seed: u64) -> Result<Split> {
    let n = classes.len();
    let count = classes.iter().max().map_or(0, |m| m + 1);
    let need = per_class * count + validation + test;
    if need > n {
        return Err(HarnessError::Config(format!(
            "split needs {need} nodes ({per_class} x {count} classes + {validation} + {test}) but the graph has {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    for c in 0..count {
        let mut members: Vec<usize> = (0..n).filter(|&i| classes[i] == c).collect();
        if members.len() < per_class {
            return Err(HarnessError::Config(format!(
                "class {c} has {} nodes, fewer than {per_class}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..per_class]);
    }
    train.sort_unstable();
    let mut rest: Vec<usize> = (0..n).filter(|i| train.binary_search(i).is_err()).collect();
    rest.shuffle(&mut rng);
    let mut val = rest[..validation].to_vec();
    let mut test_ids = rest[validation..validation + test].to_vec();
    val.sort_unstable();
    test_ids.sort_unstable();
    Ok(Split {
        train,
        val,
        test: test_ids,
    })
}

fn split_accuracy(pred: &[usize], classes: &[usize], idx: &[usize]) -> f64 {
    idx.iter().filter(|&&i| pred[i] == classes[i]).count() as f64 / idx.len().max(1) as f64
}

fn argmax_rows(m: &DenseMatrix) -> Vec<usize> {
    (0..m.rows())
        .map(|i| {
            let row = m.row(i);
            (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a))).unwrap_or(0)
        })
        .collect()
}

pub fn classify_once(data: &LabeledGraph, cfg: &ExperimentConfig, split_seed: u64, init_seed: u64) -> Result<RunOutput> {
    let split = classification_split(
        &data.classes,
        cfg.split.per_class,
        cfg.split.validation,
        cfg.split.test,
        split_seed,
    )?;
    let n = data.classes.len();
    let p = split.train.len();
    let order = known_first_order(n, &split.train);
    let mut inv = vec![0; n];
    order.iter().enumerate().for_each(|(new, &old)| inv[old] = new);
    let remap = |ids: &[usize]| ids.iter().map(|&i| inv[i]).collect::<Vec<_>>();
    let psplit = Split {
        train: (0..p).collect(),
        val: remap(&split.val),
        test: remap(&split.test),
    };
    let classes: Vec<usize> = order.iter().map(|&i| data.classes[i]).collect();
    let count = data.class_names.len().max(classes.iter().max().map_or(0, |m| m + 1));
    let mut x = data.features.select_rows(&order);
    if cfg.hyper.normalize_features {
        normalize_rows(&mut x);
    }
    let fm = FeatureMatrix::new(x, p)?;
    let g = resolve_graph(&cfg.graph, &fm, Some((&data.graph, order.as_slice())), split_seed)?;

    let mut out = RunOutput::default();
    match architecture(cfg.method, &cfg.hyper) {
        None => {
            let onehot = DenseMatrix::from_fn(p, count, |i, c| f64::from(u8::from(classes[i] == c)));
            let (table, report) = lsi_impute(&g, &fm, &onehot, cfg.hyper.lsi_eta, cfg.hyper.lsi_max_iter)?;
            let pred = argmax_rows(table.values());
            out.metrics.insert("test_accuracy".into(), split_accuracy(&pred, &classes, &psplit.test));
            if !psplit.val.is_empty() {
                out.metrics.insert("val_accuracy".into(), split_accuracy(&pred, &classes, &psplit.val));
            }
            out.metrics.insert("lsi_iterations".into(), report.iterations as f64);
        }
        Some(arch) => {
            let filter = build_filter(arch, &g)?;
            let model = GnnModel::new(arch, fm.d(), cfg.hyper.hidden, count, Objective::CrossEntropy, model_seed(split_seed, init_seed))?
                .with_dropout(cfg.hyper.dropout)?;
            let targets = Targets::Classes(classes.clone());
            let schedule = effective_schedule(&cfg.hyper, cfg.eiglearn, n);
            let (model, report) = train_two_stage(model, &filter, fm.data(), &targets, &psplit, &schedule)?;
            let logits = forward(&model, &filter, fm.data())?;
            let pred = argmax_rows(&logits);
            out.metrics.insert("test_accuracy".into(), split_accuracy(&pred, &classes, &psplit.test));
            if !psplit.val.is_empty() {
                out.metrics.insert("val_accuracy".into(), split_accuracy(&pred, &classes, &psplit.val));
            }
            if !psplit.test.is_empty() {
                out.metrics.insert("test_loss".into(), output_loss(Objective::CrossEntropy, &logits, &targets, &psplit.test)?.0);
            }
            if let Some(l) = report.stage1_final_loss {
                out.metrics.insert("stage1_train_loss".into(), l);
            }
            if cfg.eiglearn {
                if let Some(t) = report.stage1_metrics.as_ref().and_then(|m| m.test) {
                    out.metrics.insert("stage1_test_accuracy".into(), t);
                }
                if let Some(l) = report.stage2_final_loss {
                    out.metrics.insert("stage2_train_loss".into(), l);
                }
            }
            out.model = Some(model);
            out.train_report = Some(report);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub split_seed: u64,
    pub init_seed: u64,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imputed: Option<Vec<ImputedRow>>,
}

/// Everything that depends only on the config and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub runs: Vec<RunRecord>,
    pub failed_runs: usize,
    /// One entry per metric present in every successful run.
    pub aggregate: Vec<EvalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_secs: f64,
    pub run_secs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub metrics: MetricsBlock,
    pub timing: Timing,
}

impl Report {
    pub fn aggregate(&self, kind: &str) -> Option<&EvalResult> {
        self.metrics.aggregate.iter().find(|r| r.kind == kind)
    }
}

pub fn aggregate_runs(runs: &[RunRecord]) -> Result<Vec<EvalResult>> {
    let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.status == RunStatus::Ok).collect();
    let Some(first) = ok.first() else {
        return Ok(Vec::new());
    };
    first
        .metrics
        .keys()
        .filter(|k| ok.iter().all(|r| r.metrics.contains_key(*k)))
        .map(|k| {
            let values: Vec<f64> = ok.iter().map(|r| r.metrics[k]).collect();
            EvalResult::aggregate(k.clone(), &values)
        })
        .collect()
}

/// Runs every (split seed, init seed) pair in parallel. Failed runs are
/// recorded and left out of the aggregate; data and config errors abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let data = load_dataset(&cfg.data)?;
    if let Dataset::Classification(d) = &data {
        classification_split(&d.classes, cfg.split.per_class, cfg.split.validation, cfg.split.test, 0)?;
    }
    let inits = if cfg.method == Method::Lsi { 1 } else { cfg.seeds.inits };
    let pairs: Vec<(u64, u64)> = (0..cfg.seeds.splits as u64)
        .flat_map(|s| (0..inits as u64).map(move |i| (cfg.seeds.base + s, i)))
        .collect();
    let results: Vec<(RunRecord, f64)> = pairs
        .par_iter()
        .map(|&(split_seed, init_seed)| {
            let t = Instant::now();
            let res = match &data {
                Dataset::Imputation(set) => impute_once(set, cfg, split_seed, init_seed),
                Dataset::Classification(d) => classify_once(d, cfg, split_seed, init_seed),
            };
            let rec = match res {
                Ok(o) => RunRecord {
                    split_seed,
                    init_seed,
                    status: RunStatus::Ok,
                    error: None,
                    metrics: o.metrics,
                    imputed: o.imputed,
                },
                Err(e) => RunRecord {
                    split_seed,
                    init_seed,
                    status: RunStatus::Failed,
                    error: Some(e.to_string()),
                    metrics: BTreeMap::new(),
                    imputed: None,
                },
            };
            (rec, t.elapsed().as_secs_f64())
        })
        .collect();
    if let Some((rec, _)) = results.iter().find(|(r, _)| r.error.as_deref().is_some_and(|e| e.starts_with("config:"))) {
        return Err(HarnessError::Config(rec.error.clone().unwrap_or_default()));
    }
    let (runs, run_secs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let aggregate = aggregate_runs(&runs)?;
    let failed_runs = runs.iter().filter(|r| r.status == RunStatus::Failed).count();
    Ok(Report {
        config: cfg.clone(),
        metrics: MetricsBlock {
            runs,
            failed_runs,
            aggregate,
        },
        timing: Timing {
            total_secs: start.elapsed().as_secs_f64(),
            run_secs,
        },
    })
}

