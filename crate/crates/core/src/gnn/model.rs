use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filter::FilterMatrix;
use super::GnnError;
use crate::linalg::{DenseMatrix, EigBasis, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// `ReLU(XW₀ + b₀)W₁ + b₁`; ignores the graph.
    Mlp,
    /// `S·ReLU(S·XW₀ + b₀)W₁ + b₁`.
    Gcn,
    /// `S^power·X·W + b`.
    Sgc { power: usize },
    /// Two layers of `Σᵢ Tᵢ(L̃)·Z·Wᵢ + b`, `i = 0..=order`.
    #[serde(rename = "chebynet")]
    ChebyNet { order: usize },
    /// MLP predictions propagated by `Z ← (1−α)·S·Z + α·H`, `steps` times.
    Appnp { alpha: f64, steps: usize },
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Gcn => "gcn",
            Architecture::Sgc { .. } => "sgc",
            Architecture::ChebyNet { .. } => "chebynet",
            Architecture::Appnp { .. } => "appnp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    CrossEntropy,
    Mse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class id per node.
    Classes(Vec<usize>),
    /// Regression target per node.
    Values(DenseMatrix),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One weight matrix per polynomial term plus a shared bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<DenseMatrix>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weights: self
                .weights
                .iter()
                .map(|w| DenseMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            bias: vec![0.0; self.bias.len()],
        }
    }
}

/// Learnable shifts of the top-`k` filter eigenvalues: `S̃ = S + V·diag(δ)·Vᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDelta {
    pub basis: EigBasis,
    pub deltas: Vec<f64>,
}

impl PerturbationDelta {
    pub fn zeros(basis: EigBasis) -> Self {
        let k = basis.k();
        Self {
            basis,
            deltas: vec![0.0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.deltas.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub architecture: Architecture,
    pub layers: Vec<Layer>,
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub objective: Objective,
    /// Shared by every filter application when present.
    pub delta: Option<PerturbationDelta>,
    pub dropout: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    pub delta: Option<Vec<f64>>,
}

impl Gradients {
    pub fn flatten(&self, include_delta: bool) -> Vec<f64> {
        let mut out = flatten_layers(&self.layers);
        if include_delta {
            if let Some(d) = &self.delta {
                out.extend_from_slice(d);
            }
        }
        out
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        for w in &l.weights {
            out.extend_from_slice(w.as_slice());
        }
        out.extend_from_slice(&l.bias);
    }
    out
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> DenseMatrix {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-a..=a))
}

impl GnnModel {
    /// Glorot-uniform weights, zero biases, no perturbation.
    pub fn new(
        architecture: Architecture,
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
        objective: Objective,
        seed: u64,
    ) -> Result<Self, GnnError> {
        if input_dim == 0 || output_dim == 0 {
            return Err(GnnError::InvalidArgument("input and output widths must be positive".into()));
        }
        if let Architecture::Appnp { alpha, .. } = architecture {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(GnnError::InvalidArgument(format!("appnp alpha must lie in (0, 1], got {alpha}")));
            }
        }
        let needs_hidden = !matches!(architecture, Architecture::Sgc { .. });
        if needs_hidden && hidden == 0 {
            return Err(GnnError::InvalidArgument("hidden width must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = |terms: usize, fi: usize, fo: usize| Layer {
            weights: (0..terms).map(|_| glorot(&mut rng, fi, fo)).collect(),
            bias: vec![0.0; fo],
        };
        let layers = match architecture {
            Architecture::Sgc { .. } => vec![layer(1, input_dim, output_dim)],
            Architecture::ChebyNet { order } => vec![
                layer(order + 1, input_dim, hidden),
                layer(order + 1, hidden, output_dim),
            ],
            _ => vec![layer(1, input_dim, hidden), layer(1, hidden, output_dim)],
        };
        Ok(Self {
            architecture,
            layers,
            input_dim,
            hidden,
            output_dim,
            objective,
            delta: None,
            dropout: 0.0,
            seed,
        })
    }

    pub fn with_dropout(mut self, rate: f64) -> Result<Self, GnnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(GnnError::InvalidArgument(format!("dropout must lie in [0, 1), got {rate}")));
        }
        self.dropout = rate;
        Ok(self)
    }

    pub fn attach_delta(&mut self, delta: PerturbationDelta) {
        self.delta = Some(delta);
    }

    pub fn param_count(&self, include_delta: bool) -> usize {
        let base: usize = self
            .layers
            .iter()
            .map(|l| l.weights.iter().map(|w| w.as_slice().len()).sum::<usize>() + l.bias.len())
            .sum();
        base + if include_delta { self.delta.as_ref().map_or(0, |d| d.k()) } else { 0 }
    }

    /// Layer weights and biases in layer order, then `δ` if requested.
    pub fn flat_params(&self, include_delta: bool) -> Vec<f64> {
        let mut out = flatten_layers(&self.layers);
        if include_delta {
            if let Some(d) = &self.delta {
                out.extend_from_slice(&d.deltas);
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, values: &[f64], include_delta: bool) {
        assert_eq!(values.len(), self.param_count(include_delta), "parameter vector length");
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            for w in &mut l.weights {
                w.as_mut_slice().iter_mut().for_each(|v| *v = it.next().unwrap());
            }
            l.bias.iter_mut().for_each(|v| *v = it.next().unwrap());
        }
        if include_delta {
            if let Some(d) = &mut self.delta {
                d.deltas.iter_mut().for_each(|v| *v = it.next().unwrap());
            }
        }
    }

    fn check_inputs(&self, filter: &FilterMatrix, x: &DenseMatrix) -> Result<(), GnnError> {
        if x.cols() != self.input_dim {
            return Err(GnnError::InvalidArgument(format!(
                "features have {} columns, model expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        if x.rows() != filter.n() {
            return Err(GnnError::InvalidArgument(format!(
                "features have {} rows, filter is {}x{}",
                x.rows(),
                filter.n(),
                filter.n()
            )));
        }
        if let Some(d) = &self.delta {
            if d.basis.n() != filter.n() || d.basis.k() != d.deltas.len() {
                return Err(GnnError::InvalidArgument(format!(
                    "perturbation basis is {}x{} with {} deltas, filter is {}x{}",
                    d.basis.n(),
                    d.basis.k(),
                    d.deltas.len(),
                    filter.n(),
                    filter.n()
                )));
            }
        }
        Ok(())
    }
}

/// Applies `S̃ = S + V·diag(δ)·Vᵀ` in factored form.
pub struct Propagator<'a> {
    s: &'a SparseMatrix,
    s_t: &'a SparseMatrix,
    pert: Option<(&'a DenseMatrix, &'a [f64])>,
}

impl<'a> Propagator<'a> {
    pub fn new(filter: &'a FilterMatrix, delta: Option<&'a PerturbationDelta>) -> Self {
        Self {
            s: filter.matrix(),
            s_t: filter.transpose(),
            pert: delta.map(|d| (&d.basis.vectors, d.deltas.as_slice())),
        }
    }

    /// `S̃·Z`, plus `VᵀZ` when a perturbation is attached.
    pub fn apply(&self, z: &DenseMatrix) -> (DenseMatrix, Option<DenseMatrix>) {
        let mut y = self.s.mul_dense(z);
        let proj = self.pert.map(|(v, d)| {
            let p = v.t_matmul(z).expect("basis rows match filter");
            add_low_rank(&mut y, v, d, &p);
            p
        });
        (y, proj)
    }

    /// `S̃ᵀ·G`; adds `Σ_c (VᵀG)ᵢ_c·Pᵢ_c` to `d_delta` where `P = VᵀZ` of the
    /// forward input.
    fn apply_t(&self, g: &DenseMatrix, proj: Option<&DenseMatrix>, d_delta: &mut [f64]) -> DenseMatrix {
        let mut out = self.s_t.mul_dense(g);
        if let Some((v, d)) = self.pert {
            let vg = v.t_matmul(g).expect("basis rows match filter");
            let p = proj.expect("projection cached when perturbation is present");
            for (i, dd) in d_delta.iter_mut().enumerate() {
                *dd += vg.row(i).iter().zip(p.row(i)).map(|(a, b)| a * b).sum::<f64>();
            }
            add_low_rank(&mut out, v, d, &vg);
        }
        out
    }
}

fn add_low_rank(y: &mut DenseMatrix, v: &DenseMatrix, d: &[f64], p: &DenseMatrix) {
    let mut scaled = p.clone();
    for (i, &di) in d.iter().enumerate() {
        scaled.row_mut(i).iter_mut().for_each(|x| *x *= di);
    }
    let low = v.matmul(&scaled).expect("basis and projection agree");
    y.add_scaled(1.0, &low);
}

fn mm(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.matmul(b).expect("shapes validated on entry")
}

fn tmm(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.t_matmul(b).expect("shapes validated on entry")
}

fn mmt(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.matmul_t(b).expect("shapes validated on entry")
}

fn add_bias(m: &mut DenseMatrix, b: &[f64]) {
    for i in 0..m.rows() {
        m.row_mut(i).iter_mut().zip(b).for_each(|(x, bi)| *x += bi);
    }
}

fn relu(m: &DenseMatrix) -> DenseMatrix {
    m.map(|v| v.max(0.0))
}

fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.zip_with(b, |x, y| x * y).expect("same shape")
}

fn check_finite(m: &DenseMatrix, layer: &str) -> Result<(), GnnError> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(GnnError::NonFinite { layer: layer.to_string() })
    }
}

/// Inverted-dropout masks (entries `0` or `1/(1−rate)`).
#[derive(Debug, Clone, Default)]
pub struct DropoutMasks {
    pub input: Option<DenseMatrix>,
    pub hidden: Option<DenseMatrix>,
}

impl DropoutMasks {
    pub fn sample(rng: &mut impl Rng, rate: f64, input: (usize, usize), hidden: Option<(usize, usize)>) -> Self {
        let keep = 1.0 - rate;
        let mut draw = |(r, c): (usize, usize)| {
            DenseMatrix::from_fn(r, c, |_, _| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        };
        let input = Some(draw(input));
        let hidden = hidden.map(&mut draw);
        Self { input, hidden }
    }
}

struct ChebCache {
    terms: Vec<DenseMatrix>,
    projs: Vec<Option<DenseMatrix>>,
}

struct MlpCache {
    x: DenseMatrix,
    a0: DenseMatrix,
    r: DenseMatrix,
}

enum Cache {
    Mlp(MlpCache),
    Gcn {
        x: DenseMatrix,
        a0: DenseMatrix,
        r: DenseMatrix,
        p0: Option<DenseMatrix>,
        p1: Option<DenseMatrix>,
    },
    Sgc {
        last: DenseMatrix,
        projs: Vec<Option<DenseMatrix>>,
    },
    Cheb {
        l0: ChebCache,
        a0: DenseMatrix,
        l1: ChebCache,
    },
    Appnp {
        mlp: MlpCache,
        projs: Vec<Option<DenseMatrix>>,
    },
}

impl Cache {
    fn preactivation(&self) -> Option<&DenseMatrix> {
        match self {
            Cache::Mlp(c) | Cache::Appnp { mlp: c, .. } => Some(&c.a0),
            Cache::Gcn { a0, .. } | Cache::Cheb { a0, .. } => Some(a0),
            Cache::Sgc { .. } => None,
        }
    }
}

fn apply_mask(m: DenseMatrix, mask: Option<&DenseMatrix>) -> DenseMatrix {
    match mask {
        Some(k) => hadamard(&m, k),
        None => m,
    }
}

fn mlp_forward(model: &GnnModel, x: DenseMatrix, masks: &DropoutMasks) -> Result<(DenseMatrix, MlpCache), GnnError> {
    let (l0, l1) = (&model.layers[0], &model.layers[1]);
    let mut a0 = mm(&x, &l0.weights[0]);
    add_bias(&mut a0, &l0.bias);
    check_finite(&a0, "layer 0")?;
    let r = apply_mask(relu(&a0), masks.hidden.as_ref());
    let mut out = mm(&r, &l1.weights[0]);
    add_bias(&mut out, &l1.bias);
    check_finite(&out, "layer 1")?;
    Ok((out, MlpCache { x, a0, r }))
}

fn cheb_forward(
    prop: &Propagator,
    layer: &Layer,
    z: DenseMatrix,
    name: &str,
) -> Result<(DenseMatrix, ChebCache), GnnError> {
    let order = layer.weights.len() - 1;
    let mut terms = vec![z];
    let mut projs = Vec::with_capacity(order);
    for i in 1..=order {
        let (mut next, p) = prop.apply(&terms[i - 1]);
        projs.push(p);
        if i >= 2 {
            next = next.scale(2.0);
            next.add_scaled(-1.0, &terms[i - 2]);
        }
        terms.push(next);
    }
    let mut out = DenseMatrix::zeros(terms[0].rows(), layer.bias.len());
    for (t, w) in terms.iter().zip(&layer.weights) {
        out.add_scaled(1.0, &mm(t, w));
    }
    add_bias(&mut out, &layer.bias);
    check_finite(&out, name)?;
    Ok((out, ChebCache { terms, projs }))
}

/// Returns the layer's weight/bias gradients and, if requested, the gradient
/// with respect to its input.
fn cheb_backward(
    prop: &Propagator,
    layer: &Layer,
    cache: &ChebCache,
    d_out: &DenseMatrix,
    need_input: bool,
    d_delta: &mut [f64],
) -> (Layer, Option<DenseMatrix>) {
    let order = layer.weights.len() - 1;
    let grads = Layer {
        weights: cache.terms.iter().map(|t| tmm(t, d_out)).collect(),
        bias: d_out.column_sums(),
    };
    let mut g: Vec<DenseMatrix> = layer.weights.iter().map(|w| mmt(d_out, w)).collect();
    for i in (2..=order).rev() {
        let gi = g[i].clone();
        let back = prop.apply_t(&gi.scale(2.0), cache.projs[i - 1].as_ref(), d_delta);
        g[i - 1].add_scaled(1.0, &back);
        g[i - 2].add_scaled(-1.0, &gi);
    }
    if !need_input && prop.pert.is_none() {
        return (grads, None);
    }
    let mut dz = g[0].clone();
    if order >= 1 {
        dz.add_scaled(1.0, &prop.apply_t(&g[1], cache.projs[0].as_ref(), d_delta));
    }
    (grads, need_input.then_some(dz))
}

fn forward_cached(
    model: &GnnModel,
    filter: &FilterMatrix,
    x: &DenseMatrix,
    masks: &DropoutMasks,
) -> Result<(DenseMatrix, Cache), GnnError> {
    model.check_inputs(filter, x)?;
    let prop = Propagator::new(filter, model.delta.as_ref());
    let x = apply_mask(x.clone(), masks.input.as_ref());
    match &model.architecture {
        Architecture::Mlp => {
            let (out, c) = mlp_forward(model, x, masks)?;
            Ok((out, Cache::Mlp(c)))
        }
        Architecture::Gcn => {
            let (l0, l1) = (&model.layers[0], &model.layers[1]);
            let h0 = mm(&x, &l0.weights[0]);
            let (mut a0, p0) = prop.apply(&h0);
            add_bias(&mut a0, &l0.bias);
            check_finite(&a0, "layer 0")?;
            let r = apply_mask(relu(&a0), masks.hidden.as_ref());
            let h1 = mm(&r, &l1.weights[0]);
            let (mut out, p1) = prop.apply(&h1);
            add_bias(&mut out, &l1.bias);
            check_finite(&out, "layer 1")?;
            Ok((out, Cache::Gcn { x, a0, r, p0, p1 }))
        }
        Architecture::Sgc { power } => {
            let mut z = x;
            let mut projs = Vec::with_capacity(*power);
            for step in 0..*power {
                let (next, p) = prop.apply(&z);
                check_finite(&next, &format!("propagation step {step}"))?;
                projs.push(p);
                z = next;
            }
            let l0 = &model.layers[0];
            let mut out = mm(&z, &l0.weights[0]);
            add_bias(&mut out, &l0.bias);
            check_finite(&out, "layer 0")?;
            Ok((out, Cache::Sgc { last: z, projs }))
        }
        Architecture::ChebyNet { .. } => {
            let (a0, l0) = cheb_forward(&prop, &model.layers[0], x, "layer 0")?;
            let r = apply_mask(relu(&a0), masks.hidden.as_ref());
            let (out, l1) = cheb_forward(&prop, &model.layers[1], r, "layer 1")?;
            Ok((out, Cache::Cheb { l0, a0, l1 }))
        }
        Architecture::Appnp { alpha, steps } => {
            let (h, mlp) = mlp_forward(model, x, masks)?;
            let mut z = h.clone();
            let mut projs = Vec::with_capacity(*steps);
            for step in 0..*steps {
                let (sz, p) = prop.apply(&z);
                projs.push(p);
                let mut next = sz.scale(1.0 - alpha);
                next.add_scaled(*alpha, &h);
                check_finite(&next, &format!("propagation step {step}"))?;
                z = next;
            }
            Ok((z, Cache::Appnp { mlp, projs }))
        }
    }
}

fn mlp_backward(model: &GnnModel, c: &MlpCache, d_out: &DenseMatrix, hidden_mask: Option<&DenseMatrix>) -> Vec<Layer> {
    let l1 = &model.layers[1];
    let dw1 = tmm(&c.r, d_out);
    let db1 = d_out.column_sums();
    let dr = apply_mask(mmt(d_out, &l1.weights[0]), hidden_mask);
    let da0 = dr.zip_with(&c.a0, |g, a| if a > 0.0 { g } else { 0.0 }).expect("same shape");
    vec![
        Layer {
            weights: vec![tmm(&c.x, &da0)],
            bias: da0.column_sums(),
        },
        Layer {
            weights: vec![dw1],
            bias: db1,
        },
    ]
}

fn backward(
    model: &GnnModel,
    filter: &FilterMatrix,
    cache: &Cache,
    d_out: &DenseMatrix,
    masks: &DropoutMasks,
) -> Gradients {
    let prop = Propagator::new(filter, model.delta.as_ref());
    let k = model.delta.as_ref().map_or(0, |d| d.k());
    let mut d_delta = vec![0.0; k];
    let layers = match (cache, &model.architecture) {
        (Cache::Mlp(c), _) => mlp_backward(model, c, d_out, masks.hidden.as_ref()),
        (Cache::Gcn { x, a0, r, p0, p1 }, _) => {
            let l1 = &model.layers[1];
            let db1 = d_out.column_sums();
            let dh1 = prop.apply_t(d_out, p1.as_ref(), &mut d_delta);
            let dw1 = tmm(r, &dh1);
            let dr = apply_mask(mmt(&dh1, &l1.weights[0]), masks.hidden.as_ref());
            let da0 = dr.zip_with(a0, |g, a| if a > 0.0 { g } else { 0.0 }).expect("same shape");
            let db0 = da0.column_sums();
            let dh0 = prop.apply_t(&da0, p0.as_ref(), &mut d_delta);
            vec![
                Layer {
                    weights: vec![tmm(x, &dh0)],
                    bias: db0,
                },
                Layer {
                    weights: vec![dw1],
                    bias: db1,
                },
            ]
        }
        (Cache::Sgc { last, projs }, _) => {
            let l0 = &model.layers[0];
            let grads = Layer {
                weights: vec![tmm(last, d_out)],
                bias: d_out.column_sums(),
            };
            if k > 0 {
                let mut g = mmt(d_out, &l0.weights[0]);
                for p in projs.iter().rev() {
                    g = prop.apply_t(&g, p.as_ref(), &mut d_delta);
                }
            }
            vec![grads]
        }
        (Cache::Cheb { l0, a0, l1, .. }, _) => {
            let (g1, dr) = cheb_backward(&prop, &model.layers[1], l1, d_out, true, &mut d_delta);
            let dr = apply_mask(dr.expect("input gradient requested"), masks.hidden.as_ref());
            let da0 = dr.zip_with(a0, |g, a| if a > 0.0 { g } else { 0.0 }).expect("same shape");
            let (g0, _) = cheb_backward(&prop, &model.layers[0], l0, &da0, false, &mut d_delta);
            vec![g0, g1]
        }
        (Cache::Appnp { mlp, projs }, Architecture::Appnp { alpha, .. }) => {
            let mut g = d_out.clone();
            let mut dh = DenseMatrix::zeros(d_out.rows(), d_out.cols());
            for p in projs.iter().rev() {
                dh.add_scaled(*alpha, &g);
                g = prop.apply_t(&g.scale(1.0 - alpha), p.as_ref(), &mut d_delta);
            }
            dh.add_scaled(1.0, &g);
            mlp_backward(model, mlp, &dh, masks.hidden.as_ref())
        }
        (Cache::Appnp { .. }, _) => unreachable!("cache matches architecture"),
    };
    Gradients {
        layers,
        delta: model.delta.as_ref().map(|_| d_delta),
    }
}

/// Output logits (classification) or predictions (regression), no dropout.
pub fn forward(model: &GnnModel, filter: &FilterMatrix, x: &DenseMatrix) -> Result<DenseMatrix, GnnError> {
    forward_cached(model, filter, x, &DropoutMasks::default()).map(|(out, _)| out)
}

/// Hidden pre-activations (`None` for the single-layer SGC).
pub fn hidden_preactivation(
    model: &GnnModel,
    filter: &FilterMatrix,
    x: &DenseMatrix,
) -> Result<Option<DenseMatrix>, GnnError> {
    let (_, cache) = forward_cached(model, filter, x, &DropoutMasks::default())?;
    Ok(cache.preactivation().cloned())
}

/// Row-wise softmax in log-sum-exp form.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

/// Loss over `mask` rows and its gradient with respect to the output.
pub fn output_loss(
    objective: Objective,
    out: &DenseMatrix,
    targets: &Targets,
    mask: &[usize],
) -> Result<(f64, DenseMatrix), GnnError> {
    if mask.is_empty() {
        return Err(GnnError::InvalidArgument("training mask is empty".into()));
    }
    if targets.len() != out.rows() {
        return Err(GnnError::InvalidArgument(format!(
            "targets cover {} nodes, output has {}",
            targets.len(),
            out.rows()
        )));
    }
    let mut grad = DenseMatrix::zeros(out.rows(), out.cols());
    let m = mask.len() as f64;
    let mut loss = 0.0;
    match (objective, targets) {
        (Objective::CrossEntropy, Targets::Classes(classes)) => {
            for &i in mask {
                let c = classes[i];
                if c >= out.cols() {
                    return Err(GnnError::InvalidArgument(format!(
                        "class {c} of node {i} exceeds output width {}",
                        out.cols()
                    )));
                }
                let row = out.row(i);
                let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
                loss += lse - row[c];
                let g = grad.row_mut(i);
                for (j, gj) in g.iter_mut().enumerate() {
                    *gj = (row[j] - lse).exp() / m;
                }
                g[c] -= 1.0 / m;
            }
            loss /= m;
        }
        (Objective::Mse, Targets::Values(y)) => {
            if y.cols() != out.cols() {
                return Err(GnnError::InvalidArgument(format!(
                    "targets have {} columns, output has {}",
                    y.cols(),
                    out.cols()
                )));
            }
            let denom = m * out.cols() as f64;
            for &i in mask {
                let g = grad.row_mut(i);
                for (j, (o, t)) in out.row(i).iter().zip(y.row(i)).enumerate() {
                    let r = o - t;
                    loss += r * r;
                    g[j] = 2.0 * r / denom;
                }
            }
            loss /= denom;
        }
        _ => {
            return Err(GnnError::InvalidArgument(
                "targets do not match the model objective".into(),
            ))
        }
    }
    Ok((loss, grad))
}

pub(crate) fn loss_and_gradients_masked(
    model: &GnnModel,
    filter: &FilterMatrix,
    x: &DenseMatrix,
    targets: &Targets,
    mask: &[usize],
    weight_decay: f64,
    masks: &DropoutMasks,
) -> Result<(f64, Gradients), GnnError> {
    if let Some(&bad) = mask.iter().find(|&&i| i >= x.rows()) {
        return Err(GnnError::InvalidArgument(format!("mask index {bad} out of range")));
    }
    let (out, cache) = forward_cached(model, filter, x, masks)?;
    let (mut loss, d_out) = output_loss(model.objective, &out, targets, mask)?;
    let mut grads = backward(model, filter, &cache, &d_out, masks);
    if weight_decay > 0.0 {
        for (l, g) in model.layers.iter().zip(&mut grads.layers) {
            for (w, gw) in l.weights.iter().zip(&mut g.weights) {
                loss += 0.5 * weight_decay * w.as_slice().iter().map(|v| v * v).sum::<f64>();
                gw.add_scaled(weight_decay, w);
            }
        }
    }
    if !loss.is_finite() {
        return Err(GnnError::NonFinite { layer: "loss".into() });
    }
    Ok((loss, grads))
}

/// Mean loss over `mask` plus `½·weight_decay·Σ‖W‖²`, and exact gradients for
/// every weight, bias and (when attached) perturbation scalar.
pub fn loss_and_gradients(
    model: &GnnModel,
    filter: &FilterMatrix,
    x: &DenseMatrix,
    targets: &Targets,
    mask: &[usize],
    weight_decay: f64,
) -> Result<(f64, Gradients), GnnError> {
    loss_and_gradients_masked(model, filter, x, targets, mask, weight_decay, &DropoutMasks::default())
}

impl Gradients {
    pub fn zeros_like(model: &GnnModel) -> Self {
        Self {
            layers: model.layers.iter().map(Layer::zeros_like).collect(),
            delta: model.delta.as_ref().map(|d| vec![0.0; d.k()]),
        }
    }
}
