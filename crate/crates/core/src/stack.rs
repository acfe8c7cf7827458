//! Stacked autoencoder classifier: greedy pretraining, softmax head,
//! supervised fine-tuning and inference.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand_distr::{Bernoulli, Distribution};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sda::{
    gather_rows, pretrain_layer, AdaGradState, AutoencoderLayer, CorruptionKind, CorruptionSpec,
    PretrainConfig, PretrainReport, SparsitySpec,
};
use crate::siggen::NUM_FAMILIES;
use crate::whiten::WhiteningFilter;

/// Minimum hidden width kept when shrinking an architecture.
pub const MIN_SCALED_WIDTH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchName {
    Softmax,
    Mlp,
    A,
    B,
    C,
    D,
    E,
}

impl ArchName {
    pub const ALL: [ArchName; 7] = [
        ArchName::Softmax,
        ArchName::Mlp,
        ArchName::A,
        ArchName::B,
        ArchName::C,
        ArchName::D,
        ArchName::E,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArchName::Softmax => "Softmax",
            ArchName::Mlp => "MLP",
            ArchName::A => "A",
            ArchName::B => "B",
            ArchName::C => "C",
            ArchName::D => "D",
            ArchName::E => "E",
        }
    }
}

impl fmt::Display for ArchName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ArchName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchName::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }
}

/// One hidden layer of an architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub hidden: usize,
    /// `None` disables the sparsity penalty for this layer.
    pub sparsity_target: Option<f64>,
    pub corruption: f64,
}

/// A named architecture with its regularization switches.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSpec {
    pub name: ArchName,
    pub layers: Vec<LayerSpec>,
    /// L2 weight-decay coefficient of the fine-tuning loss.
    pub l2: f64,
    /// Dropout probability on hidden units during fine-tuning.
    pub dropout: f64,
    /// Whether hidden layers are pretrained as autoencoders.
    pub pretrain: bool,
}

const L1: LayerSpec = LayerSpec {
    hidden: 500,
    sparsity_target: Some(0.05),
    corruption: 0.2,
};

impl ArchitectureSpec {
    pub fn preset(name: ArchName) -> Self {
        let layer = |hidden, sparsity_target, corruption| LayerSpec {
            hidden,
            sparsity_target,
            corruption,
        };
        let (layers, l2, dropout, pretrain) = match name {
            ArchName::Softmax => (vec![], 0.0, 0.0, false),
            ArchName::Mlp => (
                vec![layer(500, None, 0.0), layer(500, None, 0.0)],
                1.0,
                0.5,
                false,
            ),
            ArchName::A => (vec![L1], 0.0, 0.0, true),
            ArchName::B => (vec![L1], 1.0, 0.0, true),
            ArchName::C => (vec![L1, layer(500, None, 0.3)], 0.0, 0.0, true),
            ArchName::D => (vec![L1, layer(500, Some(0.0), 0.3)], 1.0, 0.0, true),
            // Corruption for layers 3-5 is not published; 0.3 is reused.
            ArchName::E => (
                vec![
                    L1,
                    layer(500, Some(0.0), 0.3),
                    layer(250, Some(0.10), 0.3),
                    layer(250, Some(0.0), 0.3),
                    layer(100, Some(0.25), 0.3),
                ],
                1.0,
                0.0,
                true,
            ),
        };
        Self {
            name,
            layers,
            l2,
            dropout,
            pretrain,
        }
    }

    /// Shrinks hidden widths by `scale`, never below
    /// `min(original, MIN_SCALED_WIDTH)`.
    pub fn scaled(mut self, scale: f64) -> Self {
        for l in &mut self.layers {
            let floor = l.hidden.min(MIN_SCALED_WIDTH);
            l.hidden = ((l.hidden as f64 * scale).round() as usize).clamp(floor, l.hidden.max(floor));
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        for l in &self.layers {
            if l.hidden == 0 {
                return Err(Error::Config("hidden layers must be non-empty".into()));
            }
            CorruptionSpec::new(l.corruption)?;
            if let Some(t) = l.sparsity_target {
                SparsitySpec::new(t, 0.0)?;
            }
        }
        Ok(())
    }

    /// `key=value` lines describing the architecture.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let join = |f: &dyn Fn(&LayerSpec) -> String| self.layers.iter().map(f).collect::<Vec<_>>().join("/");
        vec![
            ("arch.name".into(), self.name.to_string()),
            ("arch.hidden".into(), join(&|l| l.hidden.to_string())),
            (
                "arch.sparsity".into(),
                join(&|l| l.sparsity_target.map_or("-".into(), |t| t.to_string())),
            ),
            ("arch.corruption".into(), join(&|l| l.corruption.to_string())),
            ("arch.l2".into(), self.l2.to_string()),
            ("arch.dropout".into(), self.dropout.to_string()),
            ("arch.pretrain".into(), self.pretrain.to_string()),
        ]
    }

    /// Inverse of [`to_kv`](Self::to_kv).
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Config(format!("missing {k}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Config(format!("bad number for {k}")))
        };
        let list = |k: &str| -> Result<Vec<String>> {
            let v = get(k)?;
            Ok(if v.is_empty() {
                vec![]
            } else {
                v.split('/').map(str::to_string).collect()
            })
        };
        let bad = |k: &str| Error::Config(format!("bad entry in {k}"));
        let hidden = list("arch.hidden")?;
        let sparsity = list("arch.sparsity")?;
        let corruption = list("arch.corruption")?;
        if sparsity.len() != hidden.len() || corruption.len() != hidden.len() {
            return Err(Error::Config("architecture layer lists differ in length".into()));
        }
        let layers = hidden
            .iter()
            .zip(&sparsity)
            .zip(&corruption)
            .map(|((h, s), c)| {
                Ok(LayerSpec {
                    hidden: h.parse().map_err(|_| bad("arch.hidden"))?,
                    sparsity_target: if s == "-" {
                        None
                    } else {
                        Some(s.parse().map_err(|_| bad("arch.sparsity"))?)
                    },
                    corruption: c.parse().map_err(|_| bad("arch.corruption"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = Self {
            name: get("arch.name")?.parse()?,
            layers,
            l2: num("arch.l2")?,
            dropout: num("arch.dropout")?,
            pretrain: get("arch.pretrain")?.parse().map_err(|_| bad("arch.pretrain"))?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Whitening filter, encoder halves of the pretrained layers, and a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedNetwork {
    pub arch: ArchitectureSpec,
    pub whitening: WhiteningFilter,
    pub layers: Vec<AutoencoderLayer>,
    /// `classes x last hidden width`.
    pub head_weights: Array2<f64>,
    pub head_bias: Array1<f64>,
    /// Free-form training metadata persisted with the model.
    pub metadata: BTreeMap<String, String>,
}

/// Numerically stable softmax of one logit vector.
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = logits.mapv(|v| (v - max).exp());
    let s = e.sum();
    e / s
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let p = softmax(row.view());
        row.assign(&p);
    }
    logits
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl StackedNetwork {
    /// Network with the given layers and a zero-initialized head.
    pub fn new(
        arch: ArchitectureSpec,
        whitening: WhiteningFilter,
        layers: Vec<AutoencoderLayer>,
    ) -> Result<Self> {
        let mut width = whitening.dim();
        for l in &layers {
            if l.visible() != width {
                return Err(Error::InconsistentDimensions(format!(
                    "layer expects {} inputs but receives {width}",
                    l.visible()
                )));
            }
            width = l.hidden();
        }
        Ok(Self {
            arch,
            whitening,
            layers,
            head_weights: Array2::zeros((NUM_FAMILIES, width)),
            head_bias: Array1::zeros(NUM_FAMILIES),
            metadata: BTreeMap::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.whitening.dim()
    }

    /// Width of the representation feeding the softmax head.
    pub fn feature_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim(), |l| l.hidden())
    }

    /// Checks that every dimension chains correctly.
    pub fn validate(&self) -> Result<()> {
        let mut width = self.input_dim();
        if self.whitening.z.dim() != (width, width) {
            return Err(Error::InconsistentDimensions(
                "whitening matrix is not square".into(),
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.visible() != width
                || l.hidden_bias.len() != l.hidden()
                || l.visible_bias.len() != l.visible()
            {
                return Err(Error::InconsistentDimensions(format!("layer {}", i + 1)));
            }
            width = l.hidden();
        }
        if self.head_weights.dim() != (NUM_FAMILIES, width) || self.head_bias.len() != NUM_FAMILIES {
            return Err(Error::InconsistentDimensions("softmax head".into()));
        }
        Ok(())
    }

    /// Hidden representation of whitened rows (clean, no corruption).
    pub fn features(&self, whitened: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut h = whitened.to_owned();
        for layer in &self.layers {
            h = layer.encode_rows(h.view())?;
        }
        Ok(h)
    }

    pub fn logits_whitened(&self, whitened: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let h = self.features(whitened)?;
        Ok(h.dot(&self.head_weights.t()) + &self.head_bias)
    }

    /// Class probabilities for whitened rows.
    pub fn forward_whitened(&self, whitened: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(softmax_rows(self.logits_whitened(whitened)?))
    }

    /// Class probabilities for raw sample rows (whitening applied here).
    pub fn forward_rows(&self, raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let x = self.whitening.apply_rows(raw)?;
        self.forward_whitened(x.view())
    }

    /// Class probabilities for one raw sample vector.
    pub fn forward(&self, raw: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let p = self.forward_rows(raw.insert_axis(Axis(0)))?;
        Ok(p.row(0).to_owned())
    }

    pub fn predict(&self, raw: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(self.forward(raw)?.view()))
    }

    pub fn predict_rows(&self, raw: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let p = self.forward_rows(raw)?;
        Ok(p.rows().into_iter().map(argmax).collect())
    }

    pub fn predict_whitened(&self, whitened: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let p = self.logits_whitened(whitened)?;
        Ok(p.rows().into_iter().map(argmax).collect())
    }

    /// Sum of squared weights over every layer and the head (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        let sq = |w: &Array2<f64>| w.iter().map(|v| v * v).sum::<f64>();
        self.layers.iter().map(|l| sq(&l.weights)).sum::<f64>() + sq(&self.head_weights)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(AutoencoderLayer::is_finite)
            && self.head_weights.iter().all(|v| v.is_finite())
            && self.head_bias.iter().all(|v| v.is_finite())
    }
}

/// Pretraining hyperparameters shared by all layers of a stack.
#[derive(Debug, Clone, PartialEq)]
pub struct StackPretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adagrad_epsilon: f64,
    pub sparsity_weight: f64,
    pub corruption_kind: CorruptionKind,
}

impl Default for StackPretrainConfig {
    fn default() -> Self {
        let base = PretrainConfig::default();
        Self {
            epochs: base.epochs,
            batch_size: base.batch_size,
            learning_rate: base.learning_rate,
            adagrad_epsilon: base.adagrad_epsilon,
            sparsity_weight: base.sparsity.weight,
            corruption_kind: base.corruption.kind,
        }
    }
}

impl StackPretrainConfig {
    fn layer_config(&self, spec: &LayerSpec) -> PretrainConfig {
        PretrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            adagrad_epsilon: self.adagrad_epsilon,
            corruption: CorruptionSpec {
                p: spec.corruption,
                kind: self.corruption_kind,
            },
            sparsity: match spec.sparsity_target {
                Some(target) => SparsitySpec {
                    target,
                    weight: self.sparsity_weight,
                },
                None => SparsitySpec::none(),
            },
        }
    }
}

/// Greedy layer-wise pretraining. Layer `l` trains on the clean hidden
/// activations of the already trained layer `l - 1`; the head starts at zero.
pub fn pretrain_stack(
    spec: &ArchitectureSpec,
    whitening: WhiteningFilter,
    whitened: ArrayView2<'_, f64>,
    cfg: &StackPretrainConfig,
    rng: &mut Rng,
) -> Result<(StackedNetwork, Vec<PretrainReport>)> {
    spec.validate()?;
    if whitened.ncols() != whitening.dim() {
        return Err(Error::DimensionMismatch {
            context: "pretraining input",
            expected: whitening.dim(),
            got: whitened.ncols(),
        });
    }
    let mut layers = Vec::with_capacity(spec.layers.len());
    let mut reports = Vec::with_capacity(spec.layers.len());
    let mut inputs = whitened.to_owned();
    let mut width = whitening.dim();
    for (index, lspec) in spec.layers.iter().enumerate() {
        let layer = if spec.pretrain {
            let (layer, report) = pretrain_layer(inputs.view(), lspec.hidden, &cfg.layer_config(lspec), rng)
                .map_err(|e| match e {
                    Error::TrainingDiverged { epoch, .. } => Error::TrainingDiverged {
                        layer: index + 1,
                        epoch,
                    },
                    other => other,
                })?;
            log::info!(
                "layer {} pretrained: final cost {:.6}",
                index + 1,
                report.epoch_costs.last().copied().unwrap_or(f64::NAN)
            );
            reports.push(report);
            layer
        } else {
            AutoencoderLayer::random(width, lspec.hidden, rng)
        };
        if index + 1 < spec.layers.len() {
            inputs = layer.encode_rows(inputs.view())?;
        }
        width = layer.hidden();
        layers.push(layer);
    }
    let net = StackedNetwork::new(spec.clone(), whitening, layers)?;
    Ok((net, reports))
}

/// Denominator guard for fine-tuning AdaGrad.
pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// Update rule used during fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FinetuneOptimizer {
    Sgd,
    #[default]
    AdaGrad,
}

/// How the L2 coefficient relates to the minibatch loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum L2Normalization {
    /// Mean batch NLL plus `l2 * sum W^2`.
    PerBatch,
    /// Mean batch NLL plus `(l2 / n_train) * sum W^2`, i.e. the penalty is
    /// added once to the summed NLL of the whole training set.
    #[default]
    PerDataset,
}

/// Supervised fine-tuning settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub l2_normalization: L2Normalization,
    pub dropout: f64,
    pub optimizer: FinetuneOptimizer,
}

impl FinetuneConfig {
    /// Defaults with the architecture's regularization switches.
    pub fn for_arch(arch: &ArchitectureSpec) -> Self {
        Self {
            epochs: 30,
            batch_size: 100,
            learning_rate: 0.01,
            l2: arch.l2,
            l2_normalization: L2Normalization::default(),
            dropout: arch.dropout,
            optimizer: FinetuneOptimizer::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Gradients of the fine-tuning loss for every trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGradients {
    /// `(weights, hidden bias)` per hidden layer.
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
    pub head_weights: Array2<f64>,
    pub head_bias: Array1<f64>,
}

/// Per-layer inverted-dropout multipliers (0 or `1 / (1 - p)`).
pub type DropoutMasks = Vec<Array2<f64>>;

fn draw_dropout(net: &StackedNetwork, rows: usize, p: f64, rng: &mut Rng) -> Option<DropoutMasks> {
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    let drop = Bernoulli::new(p).expect("validated dropout");
    Some(
        net.layers
            .iter()
            .map(|l| {
                Array2::from_shape_simple_fn((rows, l.hidden()), || if drop.sample(rng) { 0.0 } else { keep })
            })
            .collect(),
    )
}

fn check_labels(labels: &[usize], rows: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::DimensionMismatch {
            context: "label count",
            expected: rows,
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_FAMILIES) {
        return Err(Error::LabelOutOfRange(bad.min(255) as u8));
    }
    Ok(())
}

/// Mean negative log-likelihood of `labels` plus `l2 * weight_norm_sq`.
pub fn finetune_loss(
    net: &StackedNetwork,
    whitened: ArrayView2<'_, f64>,
    labels: &[usize],
    l2: f64,
) -> Result<f64> {
    check_labels(labels, whitened.nrows())?;
    let logits = net.logits_whitened(whitened)?;
    Ok(nll(&logits, labels) + l2 * net.weight_norm_sq())
}

fn nll(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &t)| {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[t]
        })
        .sum();
    total / labels.len() as f64
}

/// Loss (NLL part only) and exact gradients of the full fine-tuning loss,
/// optionally under fixed dropout masks.
pub fn finetune_gradients(
    net: &StackedNetwork,
    whitened: ArrayView2<'_, f64>,
    labels: &[usize],
    l2: f64,
    dropout: Option<&DropoutMasks>,
) -> Result<(f64, NetworkGradients)> {
    check_labels(labels, whitened.nrows())?;
    let n = whitened.nrows() as f64;

    // forward, keeping pre-dropout activations and layer inputs
    let mut inputs = Vec::with_capacity(net.layers.len() + 1);
    let mut acts = Vec::with_capacity(net.layers.len());
    let mut h = whitened.to_owned();
    for (i, layer) in net.layers.iter().enumerate() {
        let y = layer.encode_rows(h.view())?;
        let next = match dropout {
            Some(m) => &y * &m[i],
            None => y.clone(),
        };
        inputs.push(h);
        acts.push(y);
        h = next;
    }
    let logits = h.dot(&net.head_weights.t()) + &net.head_bias;
    let loss = nll(&logits, labels);

    let mut d_logits = softmax_rows(logits);
    for (mut row, &t) in d_logits.rows_mut().into_iter().zip(labels) {
        row[t] -= 1.0;
    }
    d_logits /= n;
    let head_weights = d_logits.t().dot(&h) + &(&net.head_weights * (2.0 * l2));
    let head_bias = d_logits.sum_axis(Axis(0));

    let mut d_h = d_logits.dot(&net.head_weights);
    let mut layers = Vec::with_capacity(net.layers.len());
    for i in (0..net.layers.len()).rev() {
        if let Some(m) = dropout {
            d_h *= &m[i];
        }
        Zip::from(&mut d_h)
            .and(&acts[i])
            .for_each(|g, &y| *g *= 1.0 - y * y);
        let gw = d_h.t().dot(&inputs[i]) + &(&net.layers[i].weights * (2.0 * l2));
        let gb = d_h.sum_axis(Axis(0));
        if i > 0 {
            d_h = d_h.dot(&net.layers[i].weights);
        }
        layers.push((gw, gb));
    }
    layers.reverse();
    Ok((
        loss,
        NetworkGradients {
            layers,
            head_weights,
            head_bias,
        },
    ))
}

fn sgd_step(net: &mut StackedNetwork, g: &NetworkGradients, lr: f64) {
    for (layer, (gw, gb)) in net.layers.iter_mut().zip(&g.layers) {
        layer.weights.scaled_add(-lr, gw);
        layer.hidden_bias.scaled_add(-lr, gb);
    }
    net.head_weights.scaled_add(-lr, &g.head_weights);
    net.head_bias.scaled_add(-lr, &g.head_bias);
}

fn adagrad_step(net: &mut StackedNetwork, g: &NetworkGradients, state: &mut AdaGradState) -> Result<()> {
    let mut params: Vec<&mut [f64]> = Vec::with_capacity(2 * net.layers.len() + 2);
    let mut grads: Vec<&[f64]> = Vec::with_capacity(params.capacity());
    for (layer, (gw, gb)) in net.layers.iter_mut().zip(&g.layers) {
        params.push(layer.weights.as_slice_mut().expect("standard layout"));
        params.push(layer.hidden_bias.as_slice_mut().expect("standard layout"));
        grads.push(gw.as_slice().expect("standard layout"));
        grads.push(gb.as_slice().expect("standard layout"));
    }
    params.push(net.head_weights.as_slice_mut().expect("standard layout"));
    params.push(net.head_bias.as_slice_mut().expect("standard layout"));
    grads.push(g.head_weights.as_slice().expect("standard layout"));
    grads.push(g.head_bias.as_slice().expect("standard layout"));
    state.step(&mut params, &grads)
}

/// Per-epoch fine-tuning record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FinetuneReport {
    /// Mean minibatch negative log-likelihood per epoch.
    pub epoch_nll: Vec<f64>,
}

/// Minibatch SGD on the regularized negative log-likelihood, updating every
/// layer and the head.
pub fn finetune(
    mut net: StackedNetwork,
    whitened: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &FinetuneConfig,
    rng: &mut Rng,
) -> Result<(StackedNetwork, FinetuneReport)> {
    cfg.validate()?;
    check_labels(labels, whitened.nrows())?;
    if whitened.nrows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut order: Vec<usize> = (0..whitened.nrows()).collect();
    let mut report = FinetuneReport::default();
    let l2 = match cfg.l2_normalization {
        L2Normalization::PerBatch => cfg.l2,
        L2Normalization::PerDataset => cfg.l2 / whitened.nrows() as f64,
    };
    let mut adagrad = AdaGradState::new(cfg.learning_rate, ADAGRAD_EPSILON);
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let batch = gather_rows(whitened, idx);
            batch_labels.clear();
            batch_labels.extend(idx.iter().map(|&i| labels[i]));
            let masks = draw_dropout(&net, idx.len(), cfg.dropout, rng);
            let (loss, grads) = finetune_gradients(&net, batch.view(), &batch_labels, l2, masks.as_ref())?;
            match cfg.optimizer {
                FinetuneOptimizer::Sgd => sgd_step(&mut net, &grads, cfg.learning_rate),
                FinetuneOptimizer::AdaGrad => adagrad_step(&mut net, &grads, &mut adagrad)?,
            }
            total += loss;
            batches += 1;
        }
        if !net.is_finite() || !total.is_finite() {
            return Err(Error::TrainingDiverged {
                layer: net.layers.len() + 1,
                epoch,
            });
        }
        report.epoch_nll.push(total / batches as f64);
        log::info!("finetune epoch {epoch}: nll {:.6}", report.epoch_nll[epoch]);
    }
    Ok((net, report))
}

/// Dropout MLP baseline: randomly initialized hidden layers trained only by
/// supervised fine-tuning.
pub fn finetune_mlp_baseline(
    spec: &ArchitectureSpec,
    whitening: WhiteningFilter,
    whitened: ArrayView2<'_, f64>,
    labels: &[usize],
    cfg: &FinetuneConfig,
    rng: &mut Rng,
) -> Result<(StackedNetwork, FinetuneReport)> {
    let mut untrained = spec.clone();
    untrained.pretrain = false;
    let (net, _) = pretrain_stack(
        &untrained,
        whitening,
        whitened,
        &StackPretrainConfig::default(),
        rng,
    )?;
    let mut net = net;
    net.arch = spec.clone();
    finetune(net, whitened, labels, cfg, rng)
}
