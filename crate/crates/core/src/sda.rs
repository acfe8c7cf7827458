//! Tied-weight sparse denoising autoencoder layer.
//!
//! A layer maps a visible vector `x` to hidden activations
//! `y = tanh(W c(x) + b_hidden)` and reconstructs `z = tanh(W^T y + b_visible)`
//! with the same weight matrix. Training minimizes
//!
//! ```text
//! J = mean_i |z_i - x_i|^2 + beta * sum_k KL(rho, rho_k)
//! ```
//!
//! where `rho_k` is the batch mean of `(1 + y_k) / 2`, clamped to
//! `[RHO_CLAMP, 1 - RHO_CLAMP]`, so tanh activations map onto the
//! Bernoulli-mean domain of the divergence.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Bernoulli, Distribution, Uniform};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Clamp applied to batch-mean activations before the divergence.
pub const RHO_CLAMP: f64 = 1e-6;

/// Tied-weight autoencoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderLayer {
    /// `hidden x visible`; decoding uses its transpose.
    pub weights: Array2<f64>,
    /// Added to hidden pre-activations (encode).
    pub hidden_bias: Array1<f64>,
    /// Added to visible pre-activations (decode).
    pub visible_bias: Array1<f64>,
}

impl AutoencoderLayer {
    pub fn zeros(visible: usize, hidden: usize) -> Self {
        Self {
            weights: Array2::zeros((hidden, visible)),
            hidden_bias: Array1::zeros(hidden),
            visible_bias: Array1::zeros(visible),
        }
    }

    /// Weights uniform on `+-sqrt(6 / (visible + hidden))`, zero biases.
    pub fn random(visible: usize, hidden: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (visible + hidden) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let weights = Array2::from_shape_simple_fn((hidden, visible), || dist.sample(rng));
        Self {
            weights,
            ..Self::zeros(visible, hidden)
        }
    }

    pub fn visible(&self) -> usize {
        self.weights.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite())
            && self.hidden_bias.iter().all(|v| v.is_finite())
            && self.visible_bias.iter().all(|v| v.is_finite())
    }

    pub fn encode(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim("encode input", self.visible(), x.len())?;
        Ok((self.weights.dot(&x) + &self.hidden_bias).mapv_into(f64::tanh))
    }

    pub fn decode(&self, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim("decode input", self.hidden(), y.len())?;
        Ok((self.weights.t().dot(&y) + &self.visible_bias).mapv_into(f64::tanh))
    }

    /// Encodes every row of `x`.
    pub fn encode_rows(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim("encode input", self.visible(), x.ncols())?;
        Ok((x.dot(&self.weights.t()) + &self.hidden_bias).mapv_into(f64::tanh))
    }

    /// Decodes every row of `y`.
    pub fn decode_rows(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim("decode input", self.hidden(), y.ncols())?;
        Ok((y.dot(&self.weights) + &self.visible_bias).mapv_into(f64::tanh))
    }
}

fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorruptionKind {
    /// Zero the component.
    #[default]
    Mask,
    /// Negate the component.
    SignFlip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    /// Per-component corruption probability.
    pub p: f64,
    pub kind: CorruptionKind,
}

impl CorruptionSpec {
    pub fn new(p: f64) -> Result<Self> {
        let spec = Self {
            p,
            kind: CorruptionKind::Mask,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        Self {
            p: 0.0,
            kind: CorruptionKind::Mask,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!(
                "corruption probability {} outside [0, 1]",
                self.p
            )));
        }
        Ok(())
    }

    /// Multiplicative mask: 1 for kept components, 0 (mask) or -1 (sign flip)
    /// for corrupted ones.
    pub fn draw_mask(&self, rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
        if self.p <= 0.0 {
            return Array2::ones((rows, cols));
        }
        let hit = Bernoulli::new(self.p.min(1.0)).expect("validated probability");
        let corrupted = match self.kind {
            CorruptionKind::Mask => 0.0,
            CorruptionKind::SignFlip => -1.0,
        };
        Array2::from_shape_simple_fn((rows, cols), || if hit.sample(rng) { corrupted } else { 1.0 })
    }
}

/// Applies one independent corruption draw to `x`.
pub fn corrupt(x: ArrayView1<'_, f64>, spec: &CorruptionSpec, rng: &mut Rng) -> Array1<f64> {
    let mask = spec.draw_mask(1, x.len(), rng);
    &x * &mask.row(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsitySpec {
    /// Target mean rescaled activation.
    pub target: f64,
    /// Penalty weight on the summed divergence.
    pub weight: f64,
}

impl SparsitySpec {
    pub fn new(target: f64, weight: f64) -> Result<Self> {
        let spec = Self { target, weight };
        spec.validate()?;
        Ok(spec)
    }

    pub fn none() -> Self {
        Self {
            target: 0.0,
            weight: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.target) {
            return Err(Error::Config(format!(
                "sparsity target {} outside [0, 1)",
                self.target
            )));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::Config("sparsity weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// Bernoulli KL divergence `KL(rho || rho_k)` in nats, with `0 log 0 = 0`.
pub fn kl_divergence(rho: f64, rho_k: f64) -> f64 {
    let term = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
    term(rho, rho_k) + term(1.0 - rho, 1.0 - rho_k)
}

/// d KL(rho || q) / dq.
fn kl_derivative(rho: f64, q: f64) -> f64 {
    -rho / q + (1.0 - rho) / (1.0 - q)
}

/// Batch-mean rescaled activation `(1 + y) / 2` per hidden unit, unclamped.
pub fn mean_rescaled_activation(y: ArrayView2<'_, f64>) -> Array1<f64> {
    y.mean_axis(Axis(0))
        .expect("non-empty batch")
        .mapv_into(|m| (1.0 + m) / 2.0)
}

fn clamp_rho(r: f64) -> f64 {
    r.clamp(RHO_CLAMP, 1.0 - RHO_CLAMP)
}

/// Gradients of the layer cost, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub hidden_bias: Array1<f64>,
    pub visible_bias: Array1<f64>,
}

/// Layer cost for a batch (rows of `batch`) under a fixed corruption mask.
pub fn layer_cost_masked(
    layer: &AutoencoderLayer,
    batch: ArrayView2<'_, f64>,
    mask: ArrayView2<'_, f64>,
    sparsity: &SparsitySpec,
) -> Result<f64> {
    Ok(evaluate(layer, batch, mask, sparsity, false)?.0)
}

/// Layer cost for a batch with a fresh corruption draw.
pub fn layer_cost(
    layer: &AutoencoderLayer,
    batch: ArrayView2<'_, f64>,
    corruption: &CorruptionSpec,
    sparsity: &SparsitySpec,
    rng: &mut Rng,
) -> Result<f64> {
    let mask = corruption.draw_mask(batch.nrows(), batch.ncols(), rng);
    layer_cost_masked(layer, batch, mask.view(), sparsity)
}

/// Cost and exact gradients under a fixed corruption mask.
pub fn layer_gradients(
    layer: &AutoencoderLayer,
    batch: ArrayView2<'_, f64>,
    mask: ArrayView2<'_, f64>,
    sparsity: &SparsitySpec,
) -> Result<(f64, LayerGradients)> {
    let (cost, grads) = evaluate(layer, batch, mask, sparsity, true)?;
    Ok((cost, grads.expect("requested gradients")))
}

fn evaluate(
    layer: &AutoencoderLayer,
    x: ArrayView2<'_, f64>,
    mask: ArrayView2<'_, f64>,
    sparsity: &SparsitySpec,
    want_grads: bool,
) -> Result<(f64, Option<LayerGradients>)> {
    check_dim("batch width", layer.visible(), x.ncols())?;
    if x.nrows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if mask.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            context: "corruption mask rows",
            expected: x.nrows(),
            got: mask.nrows(),
        });
    }
    let n = x.nrows() as f64;
    let xc = &x * &mask;
    let y = layer.encode_rows(xc.view())?;
    let z = layer.decode_rows(y.view())?;
    let diff = &z - &x;
    let reconstruction = diff.iter().map(|d| d * d).sum::<f64>() / n;

    let raw_rho = mean_rescaled_activation(y.view());
    let divergence: f64 = raw_rho
        .iter()
        .map(|&r| kl_divergence(sparsity.target, clamp_rho(r)))
        .sum();
    let cost = reconstruction + sparsity.weight * divergence;
    if !want_grads {
        return Ok((cost, None));
    }

    // decoder path
    let mut d_b = diff * (2.0 / n);
    Zip::from(&mut d_b).and(&z).for_each(|g, &zv| *g *= 1.0 - zv * zv);
    let mut g_w = y.t().dot(&d_b);
    let g_visible = d_b.sum_axis(Axis(0));

    // back into the hidden layer, plus the divergence term
    let mut d_y = d_b.dot(&layer.weights.t());
    if sparsity.weight != 0.0 {
        let d_rho: Array1<f64> = raw_rho.mapv(|r| {
            if r <= RHO_CLAMP || r >= 1.0 - RHO_CLAMP {
                0.0
            } else {
                sparsity.weight * kl_derivative(sparsity.target, r) / (2.0 * n)
            }
        });
        d_y += &d_rho.view().insert_axis(Axis(0));
    }
    Zip::from(&mut d_y).and(&y).for_each(|g, &yv| *g *= 1.0 - yv * yv);
    g_w += &d_y.t().dot(&xc);
    let g_hidden = d_y.sum_axis(Axis(0));

    Ok((
        cost,
        Some(LayerGradients {
            weights: g_w,
            hidden_bias: g_hidden,
            visible_bias: g_visible,
        }),
    ))
}

/// Per-parameter AdaGrad state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    pub learning_rate: f64,
    pub epsilon: f64,
    /// Accumulated squared gradients, one buffer per parameter tensor.
    pub accumulators: Vec<Vec<f64>>,
}

impl AdaGradState {
    pub fn new(learning_rate: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            epsilon,
            accumulators: Vec::new(),
        }
    }

    /// `acc += g^2; p -= lr * g / (sqrt(acc) + eps)` for each tensor pair.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                context: "adagrad tensor count",
                expected: params.len(),
                got: grads.len(),
            });
        }
        if self.accumulators.is_empty() {
            self.accumulators = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if self.accumulators.len() != params.len() {
            return Err(Error::DimensionMismatch {
                context: "adagrad tensor count",
                expected: self.accumulators.len(),
                got: params.len(),
            });
        }
        for ((param, grad), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
            if param.len() != grad.len() || param.len() != acc.len() {
                return Err(Error::DimensionMismatch {
                    context: "adagrad tensor",
                    expected: acc.len(),
                    got: grad.len(),
                });
            }
            for ((p, &g), a) in param.iter_mut().zip(grad.iter()).zip(acc.iter_mut()) {
                *a += g * g;
                *p -= self.learning_rate * g / (a.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }

    /// Applies one step to a layer's parameters.
    pub fn step_layer(&mut self, layer: &mut AutoencoderLayer, grads: &LayerGradients) -> Result<()> {
        let mut params = [
            layer.weights.as_slice_mut().expect("standard layout"),
            layer.hidden_bias.as_slice_mut().expect("standard layout"),
            layer.visible_bias.as_slice_mut().expect("standard layout"),
        ];
        let grads = [
            grads.weights.as_slice().expect("standard layout"),
            grads.hidden_bias.as_slice().expect("standard layout"),
            grads.visible_bias.as_slice().expect("standard layout"),
        ];
        self.step(&mut params, &grads)
    }
}

/// Unsupervised training settings for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adagrad_epsilon: f64,
    pub corruption: CorruptionSpec,
    pub sparsity: SparsitySpec,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 100,
            learning_rate: 0.01,
            adagrad_epsilon: 1e-8,
            corruption: CorruptionSpec {
                p: 0.2,
                kind: CorruptionKind::Mask,
            },
            sparsity: SparsitySpec {
                target: 0.05,
                weight: 3.0,
            },
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be non-negative".into()));
        }
        self.corruption.validate()?;
        self.sparsity.validate()
    }
}

/// Costs recorded while pretraining a layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PretrainReport {
    /// Mean minibatch cost per epoch.
    pub epoch_costs: Vec<f64>,
    /// Monitoring-slice cost before training and after each epoch.
    pub monitor_costs: Vec<f64>,
}

impl PretrainReport {
    pub fn improved(&self) -> bool {
        match (self.monitor_costs.first(), self.monitor_costs.last()) {
            (Some(a), Some(b)) => b <= a,
            _ => true,
        }
    }
}

/// Gathers the given rows of `data` into a new matrix.
pub(crate) fn gather_rows(data: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), data.ncols()));
    for (mut dst, &r) in out.rows_mut().into_iter().zip(rows) {
        dst.assign(&data.row(r));
    }
    out
}

/// Trains one layer with minibatch AdaGrad.
///
/// The last twentieth of `inputs` (when there are at least 40 rows) is held
/// out as a monitoring slice with a frozen corruption mask. A non-finite
/// parameter aborts training with the failing epoch (layer index 0; stacking
/// code rewrites it).
pub fn pretrain_layer(
    inputs: ArrayView2<'_, f64>,
    hidden: usize,
    cfg: &PretrainConfig,
    rng: &mut Rng,
) -> Result<(AutoencoderLayer, PretrainReport)> {
    cfg.validate()?;
    if inputs.nrows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let n = inputs.nrows();
    let holdout = if n >= 40 { n.div_ceil(20) } else { 0 };
    let train_rows = n - holdout;
    let monitor = if holdout > 0 {
        inputs.slice(ndarray::s![train_rows.., ..])
    } else {
        inputs
    };
    let train = inputs.slice(ndarray::s![..train_rows, ..]);

    let mut layer = AutoencoderLayer::random(inputs.ncols(), hidden, rng);
    let monitor_mask = cfg.corruption.draw_mask(monitor.nrows(), monitor.ncols(), rng);
    let mut opt = AdaGradState::new(cfg.learning_rate, cfg.adagrad_epsilon);
    let mut report = PretrainReport::default();
    report.monitor_costs.push(layer_cost_masked(
        &layer,
        monitor,
        monitor_mask.view(),
        &cfg.sparsity,
    )?);

    let mut order: Vec<usize> = (0..train_rows).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let batch = gather_rows(train, idx);
            let mask = cfg.corruption.draw_mask(batch.nrows(), batch.ncols(), rng);
            let (cost, grads) = layer_gradients(&layer, batch.view(), mask.view(), &cfg.sparsity)?;
            opt.step_layer(&mut layer, &grads)?;
            total += cost;
            batches += 1;
        }
        if !layer.is_finite() || !total.is_finite() {
            return Err(Error::TrainingDiverged { layer: 0, epoch });
        }
        report.epoch_costs.push(total / batches as f64);
        report.monitor_costs.push(layer_cost_masked(
            &layer,
            monitor,
            monitor_mask.view(),
            &cfg.sparsity,
        )?);
        log::debug!(
            "pretrain epoch {epoch}: cost {:.6} monitor {:.6}",
            report.epoch_costs[epoch],
            report.monitor_costs[epoch + 1]
        );
    }
    if !report.improved() {
        log::warn!("monitoring cost did not decrease during pretraining");
    }
    Ok((layer, report))
}

/// Uniform random draw helper shared with tests.
#[doc(hidden)]
pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..scale))
}
