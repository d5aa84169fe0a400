//! Acceptance suite: one check per criterion, one printed line each.
//!
//! Run with `cargo test -p spectral-impute-harness --test acceptance -- --nocapture`.
//! The Cora check runs only when `CORA_DIR` points at a directory holding
//! `cora.content` and `cora.cites`.

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use impute_harness::config::{resolve, ExperimentConfig, SplitSpec};
use impute_harness::experiment::classify_once;
use impute_harness::fixtures::two_block_sbm;
use impute_harness::run_experiment;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_impute::diffusion::{closed_form_impute, is_convergent_block, lsi_power_iterate, EmbeddingTable};
use spectral_impute::gnn::{
    build_filter_chebyshev, build_filter_sna, forward, hidden_preactivation, loss_and_gradients, perturb_basis,
    Architecture, FilterMatrix, GnnModel, Objective, PerturbationDelta, Targets,
};
use spectral_impute::graph::{
    anchor_knn_graph, clamp_labeled_block, edge_weights_nnls, mst_knn_graph, FeatureMatrix, SparseGraph, WalkMatrix,
};
use spectral_impute::prune::{
    bernoulli_sparsify, conv2d_via_matmul, hard_threshold, ConvKernel, KeepPolicy, PruneReport, Signal,
};
use spectral_impute::DenseMatrix;

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass: Some(pass),
            detail: detail.into(),
        }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Self {
            pass: None,
            detail: detail.into(),
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn spectral_radius(m: &DenseMatrix) -> f64 {
    if m.rows() == 0 {
        return 0.0;
    }
    to_na(m).complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

// ---------------------------------------------------------------- 1 – 3

struct LsiInstance {
    walk: WalkMatrix,
    y_p: DenseMatrix,
}

/// n ≤ 200, d ≤ 16, L ≤ 8, δ = 8, labeled fraction drawn from [0.5, 0.8].
fn lsi_instances() -> Vec<LsiInstance> {
    (0..50u64)
        .map(|seed| {
            let mut r = rng(1_000 + seed);
            let n = r.random_range(20..=200);
            let d = r.random_range(2..=16);
            let l = r.random_range(1..=8);
            let p = ((n as f64) * r.random_range(0.5..0.8)).round() as usize;
            let x = FeatureMatrix::new(uniform(&mut r, n, d), p).unwrap();
            let g = mst_knn_graph(&x, 8).unwrap();
            let walk = clamp_labeled_block(&edge_weights_nnls(&g, &x).unwrap().walk);
            LsiInstance {
                walk,
                y_p: uniform(&mut r, p, l),
            }
        })
        .collect()
}

fn criterion_1(cases: &[LsiInstance]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for c in cases {
        let y0 = EmbeddingTable::zero_initialized(&c.y_p, c.walk.q());
        let (iter, report) = lsi_power_iterate(&c.walk, &y0, 1e-8, 100_000).unwrap();
        assert!(report.converged);
        let exact = closed_form_impute(&c.walk, &c.y_p).unwrap();
        let (a, b) = (iter.imputed(), exact.imputed());
        let diff: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x - y).collect();
        worst = worst.max(l1(&diff) / l1(b.as_slice()));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::check(
        worst <= 1e-6 && secs < 30.0,
        format!("worst relative L1 {worst:.2e} (limit 1e-6), {secs:.2}s (limit 30s)"),
    )
}

fn criterion_2(cases: &[LsiInstance]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, c) in cases.iter().enumerate() {
        let zero = EmbeddingTable::zero_initialized(&c.y_p, c.walk.q());
        let mut r = rng(50_000 + i as u64);
        let mut values = zero.values().clone();
        let start = c.y_p.as_slice().len();
        values.as_mut_slice()[start..].iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
        let random = EmbeddingTable::new(values, c.y_p.rows()).unwrap();
        let (a, _) = lsi_power_iterate(&c.walk, &zero, 1e-8, 100_000).unwrap();
        let (b, _) = lsi_power_iterate(&c.walk, &random, 1e-8, 100_000).unwrap();
        worst = worst.max(a.values().max_abs_diff(b.values()));
    }
    Outcome::check(worst <= 1e-6, format!("worst entrywise gap {worst:.2e} (limit 1e-6)"))
}

fn criterion_3(cases: &[LsiInstance]) -> Outcome {
    let (mut flagged, mut worst_rho) = (0, 0.0f64);
    for c in cases {
        if !is_convergent_block(&c.walk).unwrap().convergent {
            flagged += 1;
        }
        let (_, qq) = c.walk.unlabeled_blocks();
        worst_rho = worst_rho.max(spectral_radius(&qq));
    }
    Outcome::check(
        flagged == 0 && worst_rho < 1.0,
        format!("{} / {} convergent, max dense spectral radius {worst_rho:.6}", cases.len() - flagged, cases.len()),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut bad = 0;
    let mut worst_slack: f64 = f64::INFINITY;
    for seed in 0..100u64 {
        let mut r = rng(4_000 + seed);
        let n = r.random_range(2..=30);
        let density = r.random_range(0.2..1.0);
        let m = DenseMatrix::from_fn(n, n, |_, _| if r.random_bool(density) { r.random_range(0.0..1.0) } else { 0.0 });
        let sums = m.row_sums();
        let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().copied().fold(0.0, f64::max);
        let rho = spectral_radius(&m);
        if rho < lo - 1e-8 || rho > hi + 1e-8 {
            bad += 1;
        }
        worst_slack = worst_slack.min((rho - lo).min(hi - rho));
    }
    Outcome::check(bad == 0, format!("{bad} / 100 outside [min, max] row sum; tightest slack {worst_slack:.2e}"))
}

// ---------------------------------------------------------------- 5

fn edge_set(g: &SparseGraph) -> BTreeSet<(usize, usize)> {
    g.edges().into_iter().map(|(s, d, _)| (s, d)).collect()
}

/// Each node's δ nearest others by full sort (ties by index), linked both ways.
fn brute_mutual_knn(x: &FeatureMatrix, delta: usize) -> BTreeSet<(usize, usize)> {
    let n = x.n();
    let mut out = BTreeSet::new();
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum(), j))
            .collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in cand.iter().take(delta) {
            out.insert((i, j));
            out.insert((j, i));
        }
    }
    out
}

fn components_labeled(g: &SparseGraph) -> bool {
    let n = g.n();
    let mut adj = vec![Vec::new(); n];
    for (s, d, _) in g.edges() {
        adj[s].push(d);
        adj[d].push(s);
    }
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut labeled = false;
        while let Some(u) = queue.pop_front() {
            labeled |= g.labeled_mask()[u];
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if !labeled {
            return false;
        }
    }
    true
}

fn criterion_5() -> Outcome {
    let mut mismatched = 0;
    for seed in 0..20u64 {
        let mut r = rng(5_000 + seed);
        let n = 30 + 13 * seed as usize;
        let delta = 2 + (seed as usize % 7);
        let x = FeatureMatrix::new(uniform(&mut r, n, 1 + seed as usize % 6), n).unwrap();
        let g = anchor_knn_graph(&x, delta, n, seed).unwrap();
        if edge_set(&g) != brute_mutual_knn(&x, delta) {
            mismatched += 1;
        }
    }
    let mut unlabeled = 0;
    for seed in 0..100u64 {
        let mut r = rng(5_500 + seed);
        let n = r.random_range(20..=200);
        let p = r.random_range(2..=n / 2);
        let m = r.random_range(1..p);
        let delta = r.random_range(1..=m.min(8));
        let d = r.random_range(1..=8);
        let x = FeatureMatrix::new(uniform(&mut r, n, d), p).unwrap();
        if !components_labeled(&anchor_knn_graph(&x, delta, m, seed).unwrap()) {
            unlabeled += 1;
        }
    }
    Outcome::check(
        mismatched == 0 && unlabeled == 0,
        format!("m=p=n edge sets equal in {}/20 seeds; m<p labeled components in {}/100 builds", 20 - mismatched, 100 - unlabeled),
    )
}

// ---------------------------------------------------------------- 6 – 8

const ARCHS: [Architecture; 5] = [
    Architecture::Mlp,
    Architecture::Gcn,
    Architecture::Sgc { power: 2 },
    Architecture::ChebyNet { order: 2 },
    Architecture::Appnp { alpha: 0.2, steps: 5 },
];

fn filter_for(arch: Architecture, g: &SparseGraph) -> FilterMatrix {
    match arch {
        Architecture::ChebyNet { order } => build_filter_chebyshev(g, order, None).unwrap(),
        _ => build_filter_sna(g).unwrap(),
    }
}

fn connected_graph(r: &mut impl Rng, n: usize, density: f64) -> SparseGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || r.random_bool(density) {
                edges.push((i, j, 1.0));
                edges.push((j, i, 1.0));
            }
        }
    }
    SparseGraph::from_edges(n, edges, vec![true; n]).unwrap()
}

fn relu_pattern(model: &GnnModel, filter: &FilterMatrix, x: &DenseMatrix) -> Vec<bool> {
    hidden_preactivation(model, filter, x)
        .unwrap()
        .map(|h| h.as_slice().iter().map(|&v| v > 0.0).collect())
        .unwrap_or_default()
}

/// Largest relative error over parameters whose ReLU pattern is the same at
/// both probes, and how many were skipped.
fn fd_error(model: &GnnModel, filter: &FilterMatrix, x: &DenseMatrix, t: &Targets, mask: &[usize]) -> (f64, usize) {
    let with_delta = model.delta.is_some();
    let wd = 5e-4;
    let analytic = loss_and_gradients(model, filter, x, t, mask, wd).unwrap().1.flatten(with_delta);
    let theta = model.flat_params(with_delta);
    let h = 1e-5;
    let mut probe = model.clone();
    let (mut worst, mut skipped) = (0.0f64, 0);
    for i in 0..theta.len() {
        let mut tp = theta.clone();
        tp[i] += h;
        probe.set_flat_params(&tp, with_delta);
        let fp = loss_and_gradients(&probe, filter, x, t, mask, wd).unwrap().0;
        let pp = relu_pattern(&probe, filter, x);
        tp[i] -= 2.0 * h;
        probe.set_flat_params(&tp, with_delta);
        let fm = loss_and_gradients(&probe, filter, x, t, mask, wd).unwrap().0;
        if pp != relu_pattern(&probe, filter, x) {
            skipped += 1;
            continue;
        }
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1e-7));
    }
    (worst, skipped)
}

fn criterion_6() -> Outcome {
    let (mut worst, mut skipped, mut checks) = (0.0f64, 0, 0);
    for seed in 0..20u64 {
        let mut r = rng(6_000 + seed);
        let n = r.random_range(6..=16);
        let (d, c) = (4, 3);
        let g = connected_graph(&mut r, n, 0.3);
        let x = uniform(&mut r, n, d);
        let classes = Targets::Classes((0..n).map(|_| r.random_range(0..c)).collect());
        let values = Targets::Values(uniform(&mut r, n, c));
        let mask: Vec<usize> = (0..n).filter(|i| i % 3 != 2).collect();
        for arch in ARCHS {
            let filter = filter_for(arch, &g);
            for (objective, targets) in [(Objective::CrossEntropy, &classes), (Objective::Mse, &values)] {
                let mut model = GnnModel::new(arch, d, 5, c, objective, seed).unwrap();
                for with_delta in [false, true] {
                    if with_delta {
                        let mut delta = PerturbationDelta::zeros(perturb_basis(&filter, 3, Some(1e-10)).unwrap());
                        delta.deltas.iter_mut().for_each(|v| *v = r.random_range(-0.3..0.3));
                        model.attach_delta(delta);
                    }
                    let (e, s) = fd_error(&model, &filter, &x, targets, &mask);
                    worst = worst.max(e);
                    skipped += s;
                    checks += 1;
                }
            }
        }
    }
    Outcome::check(
        worst <= 1e-4,
        format!("{checks} model/objective/Δ combinations, worst relative error {worst:.2e} (limit 1e-4), {skipped} kink-crossing probes skipped"),
    )
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut r = rng(7_000 + seed);
        let n = r.random_range(8..=40);
        let g = connected_graph(&mut r, n, 0.2);
        let x = uniform(&mut r, n, 5);
        for arch in ARCHS {
            let filter = filter_for(arch, &g);
            let mut model = GnnModel::new(arch, 5, 6, 3, Objective::CrossEntropy, seed).unwrap();
            let plain = forward(&model, &filter, &x).unwrap();
            model.attach_delta(PerturbationDelta::zeros(perturb_basis(&filter, 4, None).unwrap()));
            worst = worst.max(plain.max_abs_diff(&forward(&model, &filter, &x).unwrap()));
        }
    }
    Outcome::check(worst <= 1e-12, format!("max-abs gap {worst:.2e} (limit 1e-12)"))
}

fn criterion_8() -> Outcome {
    let alpha = 0.1;
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut r = rng(8_000 + seed);
        let g = connected_graph(&mut r, 10, 0.3);
        let x = uniform(&mut r, 10, 3);
        let filter = build_filter_sna(&g).unwrap();
        let model = GnnModel::new(Architecture::Appnp { alpha, steps: 50 }, 3, 8, 2, Objective::Mse, seed).unwrap();
        let mut teleport = model.clone();
        teleport.architecture = Architecture::Appnp { alpha: 1.0, steps: 1 };
        let h = to_na(&forward(&teleport, &filter, &x).unwrap());
        let s = to_na(&filter.matrix().to_dense());
        let ppnp = (DMatrix::identity(10, 10) - s * (1.0 - alpha)).try_inverse().unwrap() * h * alpha;
        let out = forward(&model, &filter, &x).unwrap();
        for i in 0..10 {
            for j in 0..2 {
                worst = worst.max((out[(i, j)] - ppnp[(i, j)]).abs());
            }
        }
    }
    Outcome::check(worst <= 1e-4, format!("max-abs gap to dense closed form {worst:.2e} (limit 1e-4)"))
}

// ---------------------------------------------------------------- 9 – 10

fn criterion_9() -> Outcome {
    let mut cfg: ExperimentConfig =
        resolve(serde_json::json!({"data": {"kind": "sbm"}, "method": "gcn", "eiglearn": true}), &[]).unwrap();
    cfg.split = SplitSpec {
        per_class: 20,
        validation: 40,
        test: 120,
        known: None,
    };
    let (mut acc1, mut acc2, mut decreased) = (0.0, 0.0, 0);
    for seed in 0..20u64 {
        let data = two_block_sbm(200, 0.08, 0.01, seed);
        let out = classify_once(&data, &cfg, seed, 0).unwrap();
        let report = out.train_report.unwrap();
        acc1 += out.metrics["stage1_test_accuracy"];
        acc2 += out.metrics["test_accuracy"];
        if report.stage2_final_loss.unwrap() < report.stage1_final_loss.unwrap() {
            decreased += 1;
        }
    }
    let (acc1, acc2) = (acc1 / 20.0, acc2 / 20.0);
    Outcome::check(
        acc2 >= acc1 && decreased >= 18,
        format!("mean test accuracy stage I {acc1:.4} -> stage II {acc2:.4}; stage-II loss decreased in {decreased}/20"),
    )
}

fn criterion_10() -> Outcome {
    let Ok(dir) = std::env::var("CORA_DIR") else {
        return Outcome::skip("CORA_DIR not set");
    };
    let base = serde_json::json!({
        "data": {"kind": "cora", "dir": dir},
        "method": "gcn",
        "hyper": {"dropout": 0.5, "normalize_features": true,
                  "schedule": {"stage1": {"epochs": 200, "learning_rate": 0.2, "weight_decay": 5e-4}}}
    });
    let run = |eiglearn: bool| {
        let cfg: ExperimentConfig = resolve(base.clone(), &[format!("eiglearn={eiglearn}")]).unwrap();
        let t = Instant::now();
        let r = run_experiment(&cfg).unwrap();
        (r.aggregate("test_accuracy").map(|e| e.mean).unwrap_or(0.0), t.elapsed().as_secs_f64())
    };
    let (gcn, t_gcn) = run(false);
    let (el, t_el) = run(true);
    let ratio = t_el / t_gcn;
    Outcome::check(
        (gcn * 100.0 - 80.5).abs() <= 3.0 && el >= gcn && ratio <= 1.6,
        format!("GCN {:.2}% (80.5 ± 3.0), EL-GCN {:.2}%, wall-time ratio {ratio:.2} (limit 1.6)", gcn * 100.0, el * 100.0),
    )
}

// ---------------------------------------------------------------- 11 – 14

fn criterion_11() -> Outcome {
    let masks: Vec<u32> = (0u32..1 << 16).filter(|m| m.count_ones() == 8).collect();
    let mut beaten = 0;
    for seed in 0..100u64 {
        let a = uniform(&mut rng(11_000 + seed), 4, 4);
        let ht = hard_threshold(&a, 0.5).unwrap();
        let best = masks
            .iter()
            .map(|&m| {
                a.as_slice()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| m & (1 << i) == 0)
                    .map(|(_, v)| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        if ht.report.fro_norm_dev > best + 1e-12 {
            beaten += 1;
        }
    }
    Outcome::check(beaten == 0, format!("{} masks per matrix; threshold optimal in {}/100", masks.len(), 100 - beaten))
}

fn criterion_12() -> Outcome {
    let (draws, p) = (10_000u64, 0.5);
    let (mut outside, mut worst_z) = (0, 0.0f64);
    for m in 0..10u64 {
        let a = uniform(&mut rng(m), 8, 8);
        let mut sum = DenseMatrix::zeros(8, 8);
        for d in 0..draws {
            sum.add_scaled(1.0, &bernoulli_sparsify(&a, KeepPolicy::Constant { p }, m * 1_000_000 + d).unwrap().matrix);
        }
        for (&v, &s) in a.as_slice().iter().zip(sum.as_slice()) {
            let se = (v * v * (1.0 / p - 1.0) / draws as f64).sqrt();
            let z = (s / draws as f64 - v).abs() / se;
            worst_z = worst_z.max(z);
            if z > 3.0 {
                outside += 1;
            }
        }
    }
    Outcome::check(
        outside == 0,
        format!("{outside}/640 entries beyond 3 standard errors (about 1.7 expected by chance), largest z {worst_z:.5}"),
    )
}

fn nested_conv(k: &ConvKernel, s: &Signal) -> Vec<f64> {
    let (oh, ow) = k.output_size(s.height, s.width).unwrap();
    let mut out = vec![0.0; k.out_channels * oh * ow];
    for o in 0..k.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for c in 0..k.in_channels {
                    for i in 0..k.kernel_size {
                        for j in 0..k.kernel_size {
                            let sy = (y * k.stride + i) as isize - k.padding as isize;
                            let sx = (x * k.stride + j) as isize - k.padding as isize;
                            if sy >= 0 && sx >= 0 && (sy as usize) < s.height && (sx as usize) < s.width {
                                acc += k.at(o, c, i, j) * s.at(c, sy as usize, sx as usize);
                            }
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    out
}

fn criterion_13() -> Outcome {
    let mut r = rng(13_000);
    let (mut worst, mut half) = (0.0f64, 0);
    let vals = |r: &mut ChaCha8Rng, len: usize| (0..len).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<_>>();
    for case in 0..100 {
        let (o, c) = (r.random_range(1..6), r.random_range(1..4));
        let ks = [1, 2, 3, 5][r.random_range(0..4)];
        let (h, w) = (r.random_range(ks..10), r.random_range(ks..10));
        let values = vals(&mut r, o * c * ks * ks);
        let k = if case % 2 == 0 {
            half += 1;
            ConvKernel::half_padded(o, c, ks, values).unwrap()
        } else {
            ConvKernel::new(o, c, ks, values, r.random_range(1..4), r.random_range(0..3)).unwrap()
        };
        let s = Signal::new(c, h, w, vals(&mut r, c * h * w)).unwrap();
        let fast = conv2d_via_matmul(&k, &s).unwrap();
        let slow = nested_conv(&k, &s);
        assert_eq!(fast.values.len(), slow.len());
        worst = worst.max(fast.values.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    Outcome::check(worst <= 1e-10, format!("100 configurations ({half} stride-1 half-padded), max gap {worst:.2e}"))
}

fn non_decreasing(reps: &[PruneReport]) -> bool {
    reps.windows(2)
        .all(|w| w[1].fro_norm_dev >= w[0].fro_norm_dev && w[1].two_norm_dev >= w[0].two_norm_dev)
}

fn criterion_14() -> Outcome {
    let fractions = [0.20, 0.10, 0.05, 0.01];
    let (mut ht_ok, mut bern_ok, trials) = (0, 0, 5);
    for seed in 0..trials {
        let a = uniform(&mut rng(14_000 + seed), 256, 256);
        let ht: Vec<_> = fractions.iter().map(|&f| hard_threshold(&a, f).unwrap().report).collect();
        let bern: Vec<_> = fractions
            .iter()
            .map(|&f| bernoulli_sparsify(&a, KeepPolicy::MagnitudeProportional { density: f }, seed).unwrap().report)
            .collect();
        ht_ok += usize::from(non_decreasing(&ht));
        bern_ok += usize::from(non_decreasing(&bern));
    }
    Outcome::check(
        ht_ok == trials as usize && bern_ok == trials as usize,
        format!("monotone for hard threshold in {ht_ok}/{trials}, magnitude-proportional Bernoulli in {bern_ok}/{trials}"),
    )
}

fn main() {
    let cases = lsi_instances();
    let checks: Vec<(u32, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "LSI iteration matches closed form", Box::new(|| criterion_1(&cases))),
        (2, "LSI result independent of initialization", Box::new(|| criterion_2(&cases))),
        (3, "clamped MST-kNN walks are convergent", Box::new(|| criterion_3(&cases))),
        (4, "spectral radius within row-sum bounds", Box::new(criterion_4)),
        (5, "anchor graph exactness and labeled components", Box::new(criterion_5)),
        (6, "analytic gradients match finite differences", Box::new(criterion_6)),
        (7, "zero perturbation leaves outputs unchanged", Box::new(criterion_7)),
        (8, "APPNP iterate matches PPNP closed form", Box::new(criterion_8)),
        (9, "eigenvalue stage improves fit on SBM", Box::new(criterion_9)),
        (10, "Cora GCN / EL-GCN accuracy and wall time", Box::new(criterion_10)),
        (11, "hard threshold is F-optimal", Box::new(criterion_11)),
        (12, "Bernoulli sparsifier is unbiased (3 SE)", Box::new(criterion_12)),
        (13, "unfolded convolution matches nested loops", Box::new(criterion_13)),
        (14, "norm deviations grow with sparsity", Box::new(criterion_14)),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in &checks {
        let t = Instant::now();
        let o = run();
        let status = match o.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed.push(*id);
                "FAIL"
            }
            None => "SKIP",
        };
        println!("criterion {id:>2} {status}  {name}: {} [{:.1}s]", o.detail, t.elapsed().as_secs_f64());
    }
    if failed.is_empty() {
        println!("acceptance: all runnable criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
