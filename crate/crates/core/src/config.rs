//! Experiment configuration: `key=value` text, strict keys, defaults for the
//! full-size experiment.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::modelio::parse_kv;
use crate::sda::CorruptionKind;
use crate::siggen::{GenConfig, NUM_FAMILIES};
use crate::stack::{
    ArchName, ArchitectureSpec, FinetuneConfig, FinetuneOptimizer, L2Normalization, StackPretrainConfig,
};
use crate::whiten::DEFAULT_EPSILON;

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Shrinks dataset sizes and hidden widths; 1.0 is the full experiment.
    pub scale: f64,
    /// Unscaled generation parameters. The seed field is ignored in favour of
    /// [`seed`](Self::seed).
    pub gen: GenConfig,
    pub arch: ArchName,
    /// Comma or slash separated hidden widths replacing the preset's.
    pub hidden_override: Option<Vec<usize>>,
    pub l2_override: Option<f64>,
    pub dropout_override: Option<f64>,
    pub whiten_epsilon: f64,
    pub pretrain: StackPretrainConfig,
    pub finetune_epochs: usize,
    pub finetune_batch: usize,
    pub finetune_lr: f64,
    pub finetune_optimizer: FinetuneOptimizer,
    pub l2_normalization: L2Normalization,
    pub snr_grid: Vec<f64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ft = FinetuneConfig::for_arch(&ArchitectureSpec::preset(ArchName::D));
        Self {
            seed: 0,
            scale: 1.0,
            gen: GenConfig::default(),
            arch: ArchName::D,
            hidden_override: None,
            l2_override: None,
            dropout_override: None,
            whiten_epsilon: DEFAULT_EPSILON,
            pretrain: StackPretrainConfig::default(),
            finetune_epochs: ft.epochs,
            finetune_batch: ft.batch_size,
            finetune_lr: ft.learning_rate,
            finetune_optimizer: ft.optimizer,
            l2_normalization: ft.l2_normalization,
            snr_grid: default_snr_grid(),
            out: PathBuf::from("out"),
        }
    }
}

/// 20 dB down to -20 dB in 2.5 dB steps.
pub fn default_snr_grid() -> Vec<f64> {
    (0..17).map(|i| 20.0 - 2.5 * i as f64).collect()
}

/// Parses `start:stop:step` (inclusive) or a comma separated list.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad SNR grid {s:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) {
                return Err(bad());
            }
            let dir = if stop < start { -1.0 } else { 1.0 };
            let n = ((stop - start).abs() / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + dir * step * i as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|x| x.is_nan()) {
        return Err(bad());
    }
    Ok(grid)
}

fn format_grid(grid: &[f64]) -> String {
    grid.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "none" | "default" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn show<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("none".into(), T::to_string)
}

impl ExperimentConfig {
    /// Parses a config file body, starting from the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_kv(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let g = &mut self.gen;
        let m = &mut g.modem;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "scale" => self.scale = parse(key, value)?,
            "samples_per_symbol" => g.samples_per_symbol = parse(key, value)?,
            "samples_per_vector" => g.samples_per_vector = parse(key, value)?,
            "train_vectors_per_mod" => g.train_vectors_per_mod = parse(key, value)?,
            "test_vectors_total" => g.test_vectors_total = parse(key, value)?,
            "random_phase" => g.random_phase = parse(key, value)?,
            "noise_floor_db" => g.noise_floor_db = optional(key, value)?,
            "ook_amplitude" => m.ook_amplitude = parse(key, value)?,
            "psk_rolloff" => m.psk_rolloff = parse(key, value)?,
            "psk_span" => m.psk_span = parse(key, value)?,
            "gfsk_index" => m.gfsk_index = parse(key, value)?,
            "gfsk_bt" => m.gfsk_bt = parse(key, value)?,
            "gmsk_index" => m.gmsk_index = parse(key, value)?,
            "gmsk_bt" => m.gmsk_bt = parse(key, value)?,
            "gaussian_span" => m.gaussian_span = parse(key, value)?,
            "ofdm_fft_len" => m.ofdm_fft_len = parse(key, value)?,
            "ofdm_cp_len" => m.ofdm_cp_len = parse(key, value)?,
            "arch" => self.arch = value.parse()?,
            "hidden" => {
                self.hidden_override = match value {
                    "" | "none" | "default" => None,
                    v => Some(
                        v.split([',', '/'])
                            .map(|w| parse(key, w.trim()))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                }
            }
            "l2" => self.l2_override = optional(key, value)?,
            "dropout" => self.dropout_override = optional(key, value)?,
            "whiten_epsilon" => self.whiten_epsilon = parse(key, value)?,
            "pretrain_epochs" => self.pretrain.epochs = parse(key, value)?,
            "pretrain_batch" => self.pretrain.batch_size = parse(key, value)?,
            "pretrain_lr" => self.pretrain.learning_rate = parse(key, value)?,
            "adagrad_epsilon" => self.pretrain.adagrad_epsilon = parse(key, value)?,
            "sparsity_weight" => self.pretrain.sparsity_weight = parse(key, value)?,
            "corruption_kind" => {
                self.pretrain.corruption_kind = match value {
                    "mask" => CorruptionKind::Mask,
                    "sign_flip" => CorruptionKind::SignFlip,
                    _ => return Err(Error::Config(format!("unknown corruption kind {value:?}"))),
                }
            }
            "finetune_epochs" => self.finetune_epochs = parse(key, value)?,
            "finetune_batch" => self.finetune_batch = parse(key, value)?,
            "finetune_lr" => self.finetune_lr = parse(key, value)?,
            "finetune_optimizer" => {
                self.finetune_optimizer = match value {
                    "sgd" => FinetuneOptimizer::Sgd,
                    "adagrad" => FinetuneOptimizer::AdaGrad,
                    _ => return Err(Error::Config(format!("unknown optimizer {value:?}"))),
                }
            }
            "l2_normalization" => {
                self.l2_normalization = match value {
                    "batch" => L2Normalization::PerBatch,
                    "dataset" => L2Normalization::PerDataset,
                    _ => return Err(Error::Config(format!("unknown l2 normalization {value:?}"))),
                }
            }
            "snr_grid" => self.snr_grid = parse_snr_grid(value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a stable order. Feeding the
    /// output back through [`from_text`](Self::from_text) reproduces `self`.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let g = &self.gen;
        let m = &g.modem;
        let hidden = self
            .hidden_override
            .as_ref()
            .map(|h| h.iter().map(usize::to_string).collect::<Vec<_>>().join("/"));
        let kind = match self.pretrain.corruption_kind {
            CorruptionKind::Mask => "mask",
            CorruptionKind::SignFlip => "sign_flip",
        };
        let optimizer = match self.finetune_optimizer {
            FinetuneOptimizer::Sgd => "sgd",
            FinetuneOptimizer::AdaGrad => "adagrad",
        };
        let l2_norm = match self.l2_normalization {
            L2Normalization::PerBatch => "batch",
            L2Normalization::PerDataset => "dataset",
        };
        [
            ("seed", self.seed.to_string()),
            ("scale", self.scale.to_string()),
            ("samples_per_symbol", g.samples_per_symbol.to_string()),
            ("samples_per_vector", g.samples_per_vector.to_string()),
            ("train_vectors_per_mod", g.train_vectors_per_mod.to_string()),
            ("test_vectors_total", g.test_vectors_total.to_string()),
            ("random_phase", g.random_phase.to_string()),
            ("noise_floor_db", show(&g.noise_floor_db)),
            ("ook_amplitude", m.ook_amplitude.to_string()),
            ("psk_rolloff", m.psk_rolloff.to_string()),
            ("psk_span", m.psk_span.to_string()),
            ("gfsk_index", m.gfsk_index.to_string()),
            ("gfsk_bt", m.gfsk_bt.to_string()),
            ("gmsk_index", m.gmsk_index.to_string()),
            ("gmsk_bt", m.gmsk_bt.to_string()),
            ("gaussian_span", m.gaussian_span.to_string()),
            ("ofdm_fft_len", m.ofdm_fft_len.to_string()),
            ("ofdm_cp_len", m.ofdm_cp_len.to_string()),
            ("arch", self.arch.to_string()),
            ("hidden", show(&hidden)),
            ("l2", show(&self.l2_override)),
            ("dropout", show(&self.dropout_override)),
            ("whiten_epsilon", self.whiten_epsilon.to_string()),
            ("pretrain_epochs", self.pretrain.epochs.to_string()),
            ("pretrain_batch", self.pretrain.batch_size.to_string()),
            ("pretrain_lr", self.pretrain.learning_rate.to_string()),
            ("adagrad_epsilon", self.pretrain.adagrad_epsilon.to_string()),
            ("sparsity_weight", self.pretrain.sparsity_weight.to_string()),
            ("corruption_kind", kind.to_string()),
            ("finetune_epochs", self.finetune_epochs.to_string()),
            ("finetune_batch", self.finetune_batch.to_string()),
            ("finetune_lr", self.finetune_lr.to_string()),
            ("finetune_optimizer", optimizer.to_string()),
            ("l2_normalization", l2_norm.to_string()),
            ("snr_grid", format_grid(&self.snr_grid)),
            ("out", self.out.display().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Config file text equivalent to `self`.
    pub fn to_text(&self) -> String {
        self.to_kv()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::Config("scale must lie in (0, 1]".into()));
        }
        if !(self.whiten_epsilon > 0.0 && self.whiten_epsilon.is_finite()) {
            return Err(Error::Config("whiten_epsilon must be positive".into()));
        }
        if self.snr_grid.is_empty() {
            return Err(Error::Config("snr_grid must not be empty".into()));
        }
        self.generation().validate()?;
        self.architecture().validate()?;
        self.finetune_config(&self.architecture()).validate()
    }

    /// Generation parameters after scaling, carrying the experiment seed.
    pub fn generation(&self) -> GenConfig {
        let scaled = |n: usize, floor: usize| ((n as f64 * self.scale).round() as usize).max(floor);
        GenConfig {
            seed: self.seed,
            train_vectors_per_mod: scaled(self.gen.train_vectors_per_mod, 1),
            test_vectors_total: scaled(self.gen.test_vectors_total, NUM_FAMILIES),
            ..self.gen.clone()
        }
    }

    /// Preset architecture after scaling and overrides.
    pub fn architecture(&self) -> ArchitectureSpec {
        let mut spec = ArchitectureSpec::preset(self.arch).scaled(self.scale);
        if let Some(hidden) = &self.hidden_override {
            for (layer, &h) in spec.layers.iter_mut().zip(hidden) {
                layer.hidden = h;
            }
        }
        if let Some(l2) = self.l2_override {
            spec.l2 = l2;
        }
        if let Some(p) = self.dropout_override {
            spec.dropout = p;
        }
        spec
    }

    pub fn finetune_config(&self, arch: &ArchitectureSpec) -> FinetuneConfig {
        FinetuneConfig {
            epochs: self.finetune_epochs,
            batch_size: self.finetune_batch,
            learning_rate: self.finetune_lr,
            optimizer: self.finetune_optimizer,
            l2_normalization: self.l2_normalization,
            ..FinetuneConfig::for_arch(arch)
        }
    }
}
