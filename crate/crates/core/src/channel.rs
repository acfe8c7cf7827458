//! Per-family calibrated additive white Gaussian noise.
//!
//! For each modulation family the noise variance per interleaved component is
//! `P_noise = beta * P_signal`, where `P_signal` is that family's mean
//! per-component power and `beta = 10^(-SNR/10)`.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::siggen::{Dataset, IqVector, ModulationFamily, NUM_FAMILIES};

/// Target signal-to-noise ratio in dB. `+inf` means noiseless.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SnrTarget(f64);

impl SnrTarget {
    pub fn new(db: f64) -> Result<Self> {
        if db.is_nan() || db == f64::NEG_INFINITY {
            return Err(Error::Config(format!("invalid SNR {db} dB")));
        }
        Ok(Self(db))
    }

    pub fn db(self) -> f64 {
        self.0
    }
}

/// Mean over vectors of the mean squared interleaved component.
pub fn mean_power<'a, I>(vectors: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a IqVector>,
{
    let (sum, count) = vectors
        .into_iter()
        .fold((0.0, 0usize), |(s, c), v| (s + v.power(), c + 1));
    if count == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(sum / count as f64)
}

/// Noise-to-signal power ratio for `target`: `10^(-SNR/10)`.
pub fn calibrate_beta(target: SnrTarget) -> f64 {
    10f64.powf(-target.db() / 10.0)
}

/// What was injected, per family (index = class index).
#[derive(Debug, Clone, PartialEq)]
pub struct AwgnReport {
    pub target: SnrTarget,
    pub signal_power: [f64; NUM_FAMILIES],
    /// Calibrated per-component noise variance.
    pub noise_variance: [f64; NUM_FAMILIES],
    /// Empirical mean squared injected noise.
    pub injected_power: [f64; NUM_FAMILIES],
}

impl AwgnReport {
    /// Measured SNR in dB for `family`, or `None` if it had no vectors.
    pub fn measured_snr_db(&self, family: ModulationFamily) -> Option<f64> {
        let i = family.index();
        (self.signal_power[i] > 0.0).then(|| 10.0 * (self.signal_power[i] / self.injected_power[i]).log10())
    }
}

/// Adds calibrated noise to every vector of `test`; labels are untouched.
pub fn add_awgn(test: &Dataset, target: SnrTarget, rng: &mut Rng) -> Dataset {
    add_awgn_with_report(test, target, rng).0
}

pub fn add_awgn_with_report(test: &Dataset, target: SnrTarget, rng: &mut Rng) -> (Dataset, AwgnReport) {
    let beta = calibrate_beta(target);
    let mut signal_power = [0.0; NUM_FAMILIES];
    let mut noise_variance = [0.0; NUM_FAMILIES];
    for family in ModulationFamily::ALL {
        if let Ok(p) = mean_power(test.family(family)) {
            signal_power[family.index()] = p;
            noise_variance[family.index()] = beta * p;
        }
    }

    let mut energy = [0.0; NUM_FAMILIES];
    let mut components = [0usize; NUM_FAMILIES];
    let vectors = test
        .vectors
        .iter()
        .map(|v| {
            let i = v.label.index();
            let sigma = noise_variance[i].sqrt();
            let samples = if sigma == 0.0 {
                v.samples.clone()
            } else {
                v.samples
                    .iter()
                    .map(|&s| {
                        let n = sigma * rng.sample::<f64, _>(StandardNormal);
                        energy[i] += n * n;
                        (f64::from(s) + n) as f32
                    })
                    .collect()
            };
            components[i] += v.samples.len();
            IqVector {
                samples,
                label: v.label,
            }
        })
        .collect();

    let mut injected_power = [0.0; NUM_FAMILIES];
    for i in 0..NUM_FAMILIES {
        if components[i] > 0 {
            injected_power[i] = energy[i] / components[i] as f64;
        }
    }
    let noised = Dataset {
        split: test.split,
        vector_len: test.vector_len,
        vectors,
    };
    (
        noised,
        AwgnReport {
            target,
            signal_power,
            noise_variance,
            injected_power,
        },
    )
}
