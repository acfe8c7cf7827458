//! End-to-end training from an [`ExperimentConfig`].

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::rng::{derived_rng, purpose};
use crate::sda::PretrainReport;
use crate::siggen::{build_dataset, Dataset};
use crate::stack::{finetune, pretrain_stack, FinetuneReport, StackedNetwork};
use crate::whiten::fit_zca;

/// A trained network with its training curves.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: StackedNetwork,
    pub pretrain: Vec<PretrainReport>,
    pub finetune: FinetuneReport,
}

/// Generates the scaled train and test sets for `cfg`.
pub fn generate(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    build_dataset(&cfg.generation())
}

/// Fits whitening on `train`, pretrains the stack (unless the architecture
/// skips pretraining) and fine-tunes it.
///
/// Weight initialization and corruption draw from the `init` stream of the
/// experiment seed; minibatch order and dropout from the `batch` stream.
pub fn train(cfg: &ExperimentConfig, train: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    let expected = cfg.gen.vector_len();
    if train.vector_len != expected {
        return Err(Error::DimensionMismatch {
            context: "training vector length",
            expected,
            got: train.vector_len,
        });
    }
    let arch = cfg.architecture();
    let whitening = fit_zca(train, cfg.whiten_epsilon)?;
    let x = whitening.apply_dataset(train)?;
    let labels: Vec<usize> = train.vectors.iter().map(|v| v.label.index()).collect();

    let mut init = derived_rng(cfg.seed, purpose::INIT, 0);
    let (mut network, pretrain) = pretrain_stack(&arch, whitening, x.view(), &cfg.pretrain, &mut init)?;
    let mut batches = derived_rng(cfg.seed, purpose::BATCH, 0);
    let finetune_cfg = cfg.finetune_config(&arch);
    network.metadata = provenance(cfg);
    let (network, finetune) = finetune(network, x.view(), &labels, &finetune_cfg, &mut batches)?;
    Ok(TrainOutcome {
        network,
        pretrain,
        finetune,
    })
}

/// Key/value record stored in the model: crate version plus the full config.
pub fn provenance(cfg: &ExperimentConfig) -> std::collections::BTreeMap<String, String> {
    let mut meta: std::collections::BTreeMap<String, String> = cfg
        .to_kv()
        .into_iter()
        .map(|(k, v)| (format!("config.{k}"), v))
        .collect();
    meta.insert("crate.version".into(), env!("CARGO_PKG_VERSION").into());
    meta.insert("rng".into(), crate::rng::GENERATOR.into());
    meta
}

/// Rebuilds the config recorded by [`provenance`].
pub fn config_from_metadata(net: &StackedNetwork) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut found = false;
    for (k, v) in &net.metadata {
        if let Some(key) = k.strip_prefix("config.") {
            cfg.set(key, v)?;
            found = true;
        }
    }
    if !found {
        return Err(Error::Config("model carries no config record".into()));
    }
    Ok(cfg)
}
