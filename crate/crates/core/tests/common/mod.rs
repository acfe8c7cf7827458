//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng as _;
use ssda_amc::rng::{rng_from_seed, Rng};
use ssda_amc::sda::{
    layer_cost_masked, layer_gradients, random_matrix, AutoencoderLayer, CorruptionKind, CorruptionSpec,
    SparsitySpec,
};
use ssda_amc::stack::{
    finetune_gradients, finetune_loss, ArchName, ArchitectureSpec, LayerSpec, StackedNetwork,
};
use ssda_amc::whiten::WhiteningFilter;

pub const FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)`, with a floor so all-zero pairs compare as 0.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale(a).max(scale(b)).max(1e-12)
}

/// Central differences of `f` with respect to every entry of `params`.
pub fn numeric_gradient(params: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + FD_STEP;
            let plus = f(params);
            params[i] = orig - FD_STEP;
            let minus = f(params);
            params[i] = orig;
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

fn flatten_layer(l: &AutoencoderLayer) -> Vec<f64> {
    l.weights
        .iter()
        .chain(l.hidden_bias.iter())
        .chain(l.visible_bias.iter())
        .copied()
        .collect()
}

fn unflatten_layer(p: &[f64], visible: usize, hidden: usize) -> AutoencoderLayer {
    let (w, rest) = p.split_at(hidden * visible);
    let (bh, bv) = rest.split_at(hidden);
    AutoencoderLayer {
        weights: Array2::from_shape_vec((hidden, visible), w.to_vec()).unwrap(),
        hidden_bias: Array1::from(bh.to_vec()),
        visible_bias: Array1::from(bv.to_vec()),
    }
}

/// Random autoencoder instance (visible <= 20, hidden <= 10) checked against
/// central differences under a frozen corruption mask. Returns the relative
/// error of the full parameter gradient.
pub fn layer_gradient_error(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let visible = rng.random_range(2..=20);
    let hidden = rng.random_range(1..=10);
    let rows = rng.random_range(1..=8);
    let layer = AutoencoderLayer {
        weights: random_matrix(hidden, visible, 0.5, &mut rng),
        hidden_bias: Array1::from_shape_fn(hidden, |_| rng.random_range(-0.3..0.3)),
        visible_bias: Array1::from_shape_fn(visible, |_| rng.random_range(-0.3..0.3)),
    };
    let x = random_matrix(rows, visible, 1.0, &mut rng);
    let kind = if rng.random_bool(0.5) {
        CorruptionKind::Mask
    } else {
        CorruptionKind::SignFlip
    };
    let corruption = CorruptionSpec {
        p: rng.random_range(0.0..0.5),
        kind,
    };
    let mask = corruption.draw_mask(rows, visible, &mut rng);
    let sparsity = SparsitySpec {
        target: [0.0, 0.05, 0.25][rng.random_range(0..3)],
        weight: rng.random_range(0.0..3.0),
    };
    let (_, grads) = layer_gradients(&layer, x.view(), mask.view(), &sparsity).unwrap();
    let analytic: Vec<f64> = grads
        .weights
        .iter()
        .chain(grads.hidden_bias.iter())
        .chain(grads.visible_bias.iter())
        .copied()
        .collect();
    let mut params = flatten_layer(&layer);
    let numeric = numeric_gradient(&mut params, |p| {
        layer_cost_masked(
            &unflatten_layer(p, visible, hidden),
            x.view(),
            mask.view(),
            &sparsity,
        )
        .unwrap()
    });
    relative_error(&analytic, &numeric)
}

fn network_params(net: &StackedNetwork) -> Vec<f64> {
    let mut p = Vec::new();
    for l in &net.layers {
        p.extend(l.weights.iter());
        p.extend(l.hidden_bias.iter());
    }
    p.extend(net.head_weights.iter());
    p.extend(net.head_bias.iter());
    p
}

fn set_network_params(net: &mut StackedNetwork, p: &[f64]) {
    let mut it = p.iter().copied();
    for l in &mut net.layers {
        l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
        l.hidden_bias.iter_mut().for_each(|w| *w = it.next().unwrap());
    }
    net.head_weights.iter_mut().for_each(|w| *w = it.next().unwrap());
    net.head_bias.iter_mut().for_each(|w| *w = it.next().unwrap());
}

/// Random one- or two-layer network (input <= 20, hidden <= 10) with a random
/// L2 weight, checked against central differences of the fine-tuning loss.
pub fn network_gradient_error(seed: u64) -> f64 {
    let mut rng: Rng = rng_from_seed(seed);
    let input = rng.random_range(2..=20);
    let depth = rng.random_range(1..=2);
    let widths: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=10)).collect();
    let rows = rng.random_range(1..=8);
    let mut layers = Vec::new();
    let mut prev = input;
    for &h in &widths {
        layers.push(AutoencoderLayer {
            weights: random_matrix(h, prev, 0.5, &mut rng),
            hidden_bias: Array1::from_shape_fn(h, |_| rng.random_range(-0.3..0.3)),
            visible_bias: Array1::zeros(prev),
        });
        prev = h;
    }
    let arch = ArchitectureSpec {
        layers: widths
            .iter()
            .map(|&hidden| LayerSpec {
                hidden,
                sparsity_target: None,
                corruption: 0.0,
            })
            .collect(),
        ..ArchitectureSpec::preset(ArchName::C)
    };
    let mut net = StackedNetwork::new(arch, WhiteningFilter::identity(input), layers).unwrap();
    net.head_weights = random_matrix(6, prev, 0.5, &mut rng);
    net.head_bias = Array1::from_shape_fn(6, |_| rng.random_range(-0.3..0.3));
    let l2 = [0.0, 1.0, rng.random_range(0.0..0.1)][rng.random_range(0..3)];
    let x = random_matrix(rows, input, 1.0, &mut rng);
    let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..6)).collect();

    let (_, grads) = finetune_gradients(&net, x.view(), &labels, l2, None).unwrap();
    let mut analytic = Vec::new();
    for (gw, gb) in &grads.layers {
        analytic.extend(gw.iter());
        analytic.extend(gb.iter());
    }
    analytic.extend(grads.head_weights.iter());
    analytic.extend(grads.head_bias.iter());

    let mut params = network_params(&net);
    let mut probe = net.clone();
    let numeric = numeric_gradient(&mut params, |p| {
        set_network_params(&mut probe, p);
        finetune_loss(&probe, x.view(), &labels, l2).unwrap()
    });
    relative_error(&analytic, &numeric)
}

/// Confusion counts by brute-force recount: for every cell, scan all pairs.
pub fn brute_force_confusion(predictions: &[usize], truths: &[usize], classes: usize) -> Vec<Vec<u64>> {
    (0..classes)
        .map(|t| {
            (0..classes)
                .map(|p| {
                    predictions
                        .iter()
                        .zip(truths)
                        .filter(|&(&pp, &tt)| pp == p && tt == t)
                        .count() as u64
                })
                .collect()
        })
        .collect()
}
