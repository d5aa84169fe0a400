use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filter::{perturb_basis, FilterMatrix};
use super::model::{
    forward, loss_and_gradients_masked, output_loss, Architecture, DropoutMasks, GnnModel,
    PerturbationDelta, Targets,
};
use super::GnnError;
use crate::linalg::DenseMatrix;

/// Losses above this abort training.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    /// Trains layer weights with the perturbation held at zero.
    pub stage1: StageConfig,
    /// Trains only the perturbation; `epochs = 0` skips it.
    pub stage2: StageConfig,
    /// Number of perturbed eigenvalues.
    pub k: usize,
    /// Eigensolver residual tolerance; `None` uses the library default.
    pub eig_tol: Option<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            stage1: StageConfig {
                epochs: 200,
                learning_rate: 0.01,
                weight_decay: 5e-4,
            },
            stage2: StageConfig {
                epochs: 50,
                learning_rate: 0.002,
                weight_decay: 0.0,
            },
            k: 32,
            eig_tol: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Accuracy for classification, mean squared error for regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub kind: String,
    pub train: f64,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub stage1_losses: Vec<f64>,
    pub stage2_losses: Vec<f64>,
    /// Epoch index at which each stage started.
    pub stage_boundaries: Vec<usize>,
    /// Unregularized training loss after each completed stage.
    pub stage1_final_loss: Option<f64>,
    pub stage2_final_loss: Option<f64>,
    pub stage1_metrics: Option<Metrics>,
    pub final_metrics: Option<Metrics>,
    pub wall_time_secs: f64,
}

/// Fraction of `idx` whose argmax prediction equals the class.
pub fn accuracy(logits: &DenseMatrix, classes: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let hits = idx
        .iter()
        .filter(|&&i| {
            let row = logits.row(i);
            let best = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            best == classes[i]
        })
        .count();
    hits as f64 / idx.len() as f64
}

fn mse_rows(pred: &DenseMatrix, truth: &DenseMatrix, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for &i in idx {
        for (a, b) in pred.row(i).iter().zip(truth.row(i)) {
            s += (a - b) * (a - b);
        }
    }
    s / (idx.len() * pred.cols()) as f64
}

pub fn evaluate(
    model: &GnnModel,
    filter: &FilterMatrix,
    x: &DenseMatrix,
    targets: &Targets,
    split: &Split,
) -> Result<Metrics, GnnError> {
    let out = forward(model, filter, x)?;
    let (kind, f): (&str, Box<dyn Fn(&[usize]) -> f64>) = match targets {
        Targets::Classes(c) => ("accuracy", Box::new(move |idx: &[usize]| accuracy(&out, c, idx))),
        Targets::Values(v) => ("mse", Box::new(move |idx: &[usize]| mse_rows(&out, v, idx))),
    };
    let opt = |idx: &[usize]| (!idx.is_empty()).then(|| f(idx));
    Ok(Metrics {
        kind: kind.into(),
        train: f(&split.train),
        val: opt(&split.val),
        test: opt(&split.test),
    })
}

fn data_loss(
    model: &GnnModel,
    filter: &FilterMatrix,
    x: &DenseMatrix,
    targets: &Targets,
    mask: &[usize],
) -> Result<f64, GnnError> {
    let out = forward(model, filter, x)?;
    Ok(output_loss(model.objective, &out, targets, mask)?.0)
}

fn hidden_shape(model: &GnnModel, n: usize) -> Option<(usize, usize)> {
    match model.architecture {
        Architecture::Sgc { .. } => None,
        _ => Some((n, model.hidden)),
    }
}

fn diverged(stage: usize, epoch: usize, loss: f64, report: &TrainReport, start: Instant) -> GnnError {
    let mut report = report.clone();
    report.wall_time_secs = start.elapsed().as_secs_f64();
    GnnError::Diverged {
        stage,
        epoch,
        loss,
        report: Box::new(report),
    }
}

/// Stage I fits weights and biases with the perturbation detached; stage II
/// freezes them, attaches a zero perturbation over the top-`k` eigenbasis of
/// the symmetrized filter, and fits only the perturbation. Both stages use
/// plain gradient descent.
pub fn train_two_stage(
    mut model: GnnModel,
    filter: &FilterMatrix,
    x: &DenseMatrix,
    targets: &Targets,
    split: &Split,
    schedule: &Schedule,
) -> Result<(GnnModel, TrainReport), GnnError> {
    if split.train.is_empty() {
        return Err(GnnError::InvalidArgument("training split is empty".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ 0x5eed_d0d0);
    let n = x.rows();
    let mut report = TrainReport {
        stage1_losses: Vec::with_capacity(schedule.stage1.epochs),
        stage2_losses: Vec::with_capacity(schedule.stage2.epochs),
        stage_boundaries: vec![0],
        stage1_final_loss: None,
        stage2_final_loss: None,
        stage1_metrics: None,
        final_metrics: None,
        wall_time_secs: 0.0,
    };
    model.delta = None;

    let draw_masks = |model: &GnnModel, rng: &mut ChaCha8Rng| {
        if model.dropout > 0.0 {
            DropoutMasks::sample(rng, model.dropout, (n, x.cols()), hidden_shape(model, n))
        } else {
            DropoutMasks::default()
        }
    };

    let s1 = schedule.stage1;
    for epoch in 0..s1.epochs {
        let masks = draw_masks(&model, &mut rng);
        let (loss, grads) =
            loss_and_gradients_masked(&model, filter, x, targets, &split.train, s1.weight_decay, &masks)?;
        report.stage1_losses.push(loss);
        if !(loss <= DIVERGENCE_LOSS) {
            return Err(diverged(1, epoch, loss, &report, start));
        }
        for (l, g) in model.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
                w.add_scaled(-s1.learning_rate, gw);
            }
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, gb)| *b -= s1.learning_rate * gb);
        }
    }
    report.stage1_final_loss = Some(data_loss(&model, filter, x, targets, &split.train)?);
    report.stage1_metrics = Some(evaluate(&model, filter, x, targets, split)?);

    let s2 = schedule.stage2;
    if s2.epochs > 0 {
        report.stage_boundaries.push(s1.epochs);
        let basis = perturb_basis(filter, schedule.k, schedule.eig_tol)?;
        model.attach_delta(PerturbationDelta::zeros(basis));
        for epoch in 0..s2.epochs {
            let masks = draw_masks(&model, &mut rng);
            let (mut loss, grads) =
                loss_and_gradients_masked(&model, filter, x, targets, &split.train, 0.0, &masks)?;
            let delta = model.delta.as_mut().expect("attached above");
            let mut gd = grads.delta.expect("perturbation attached");
            if s2.weight_decay > 0.0 {
                for (g, d) in gd.iter_mut().zip(&delta.deltas) {
                    loss += 0.5 * s2.weight_decay * d * d;
                    *g += s2.weight_decay * d;
                }
            }
            report.stage2_losses.push(loss);
            if !(loss <= DIVERGENCE_LOSS) {
                return Err(diverged(2, epoch, loss, &report, start));
            }
            delta
                .deltas
                .iter_mut()
                .zip(&gd)
                .for_each(|(d, g)| *d -= s2.learning_rate * g);
        }
        report.stage2_final_loss = Some(data_loss(&model, filter, x, targets, &split.train)?);
    }
    report.final_metrics = Some(evaluate(&model, filter, x, targets, split)?);
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((model, report))
}
