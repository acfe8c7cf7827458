//! Synthetic I/Q dataset generation.
//!
//! Random payload bytes are modulated by each of the six families, the
//! resulting streams are cut into fixed-length interleaved vectors, and the
//! labeled vectors are shuffled into train and test sets.

mod modem;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore};
use rand_distr::StandardNormal;

pub use modem::{modulate, payload_bytes_for, ModemParams};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, derived_rng, purpose, rng_from_seed};

/// Number of modulation families.
pub const NUM_FAMILIES: usize = 6;

/// The six modulation families, in class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModulationFamily {
    Ook = 0,
    Gfsk = 1,
    Gmsk = 2,
    Dbpsk = 3,
    Dqpsk = 4,
    Ofdm = 5,
}

impl ModulationFamily {
    pub const ALL: [ModulationFamily; NUM_FAMILIES] = [
        ModulationFamily::Ook,
        ModulationFamily::Gfsk,
        ModulationFamily::Gmsk,
        ModulationFamily::Dbpsk,
        ModulationFamily::Dqpsk,
        ModulationFamily::Ofdm,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationFamily::Ook => "OOK",
            ModulationFamily::Gfsk => "GFSK",
            ModulationFamily::Gmsk => "GMSK",
            ModulationFamily::Dbpsk => "DBPSK",
            ModulationFamily::Dqpsk => "DQPSK",
            ModulationFamily::Ofdm => "OFDM",
        }
    }
}

impl fmt::Display for ModulationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl TryFrom<u8> for ModulationFamily {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::from_index(usize::from(v)).ok_or(Error::LabelOutOfRange(v))
    }
}

/// Default receiver noise floor in dB below unit signal power.
pub const DEFAULT_NOISE_FLOOR_DB: f64 = 20.0;

/// Dataset generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub samples_per_symbol: usize,
    pub samples_per_vector: usize,
    pub train_vectors_per_mod: usize,
    /// Total test vectors, split evenly across families (remainder dropped).
    pub test_vectors_total: usize,
    pub seed: u64,
    /// Rotate every vector by an independent uniform carrier phase.
    pub random_phase: bool,
    /// Receiver noise floor: white Gaussian noise whose per-component variance
    /// sits this many dB below the normalized signal power of 1. `None`
    /// generates noiseless vectors.
    pub noise_floor_db: Option<f64>,
    pub modem: ModemParams,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            samples_per_symbol: 10,
            samples_per_vector: 100,
            train_vectors_per_mod: 10_000,
            test_vectors_total: 10_000,
            seed: 0,
            random_phase: true,
            noise_floor_db: Some(DEFAULT_NOISE_FLOOR_DB),
            modem: ModemParams::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_symbol == 0 || self.samples_per_vector == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if !self.samples_per_vector.is_multiple_of(self.samples_per_symbol) {
            return Err(Error::Config(format!(
                "samples_per_vector ({}) must be a multiple of samples_per_symbol ({})",
                self.samples_per_vector, self.samples_per_symbol
            )));
        }
        if self.train_vectors_per_mod == 0 {
            return Err(Error::Config("train_vectors_per_mod must be positive".into()));
        }
        if self.test_vectors_total < NUM_FAMILIES {
            return Err(Error::Config(format!(
                "test_vectors_total must be at least {NUM_FAMILIES}"
            )));
        }
        if let Some(db) = self.noise_floor_db {
            if !db.is_finite() {
                return Err(Error::Config("noise_floor_db must be finite".into()));
            }
        }
        self.modem.validate()
    }

    /// Length of one interleaved vector (2 x samples per vector).
    pub fn vector_len(&self) -> usize {
        2 * self.samples_per_vector
    }

    pub fn train_total(&self) -> usize {
        NUM_FAMILIES * self.train_vectors_per_mod
    }

    pub fn test_vectors_per_mod(&self) -> usize {
        self.test_vectors_total / NUM_FAMILIES
    }
}

/// One labeled vector of interleaved I/Q amplitudes `I0, Q0, I1, Q1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqVector {
    pub samples: Vec<f32>,
    pub label: ModulationFamily,
}

impl IqVector {
    /// Mean squared component value.
    pub fn power(&self) -> f64 {
        let sum: f64 = self.samples.iter().map(|&s| f64::from(s).powi(2)).sum();
        sum / self.samples.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// A labeled set of equal-length vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `None` when loaded from a file without a sidecar.
    pub split: Option<Split>,
    pub vector_len: usize,
    pub vectors: Vec<IqVector>,
}

impl Dataset {
    pub fn new(split: Option<Split>, vector_len: usize, vectors: Vec<IqVector>) -> Result<Self> {
        for v in &vectors {
            if v.samples.len() != vector_len {
                return Err(Error::DimensionMismatch {
                    context: "dataset vector",
                    expected: vector_len,
                    got: v.samples.len(),
                });
            }
        }
        Ok(Self {
            split,
            vector_len,
            vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn family_counts(&self) -> [usize; NUM_FAMILIES] {
        let mut counts = [0; NUM_FAMILIES];
        for v in &self.vectors {
            counts[v.label.index()] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<ModulationFamily> {
        self.vectors.iter().map(|v| v.label).collect()
    }

    /// Vectors of one family, in dataset order.
    pub fn family(&self, family: ModulationFamily) -> impl Iterator<Item = &IqVector> {
        self.vectors.iter().filter(move |v| v.label == family)
    }
}

/// `n` uniformly distributed bytes from the reference generator seeded with `seed`.
pub fn generate_bytes(seed: u64, n: usize) -> Result<Vec<u8>> {
    if n == 0 {
        return Err(Error::Config("byte count must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut bytes = vec![0u8; n];
    rng.fill_bytes(&mut bytes);
    Ok(bytes)
}

/// Cuts `stream` into consecutive non-overlapping windows of
/// `samples_per_vector` complex samples, interleaved as `I, Q, I, Q, ...`.
/// The trailing remainder is discarded.
pub fn segment(stream: &[Complex64], cfg: &GenConfig) -> Result<Vec<Vec<f64>>> {
    let n = cfg.samples_per_vector;
    if n == 0 || stream.len() < n {
        return Err(Error::InsufficientData {
            needed: n,
            got: stream.len(),
        });
    }
    Ok(stream
        .chunks_exact(n)
        .map(|w| w.iter().flat_map(|c| [c.re, c.im]).collect())
        .collect())
}

fn rotate(vector: &mut [f64], phase: f64) {
    let rot = Complex64::from_polar(1.0, phase);
    for iq in vector.chunks_exact_mut(2) {
        let c = Complex64::new(iq[0], iq[1]) * rot;
        iq[0] = c.re;
        iq[1] = c.im;
    }
}

/// Generates `count` vectors of `family`, dropping one vector at each end of
/// the stream so filter start-up transients never appear.
fn family_vectors(
    family: ModulationFamily,
    split: Split,
    count: usize,
    cfg: &GenConfig,
) -> Result<Vec<Vec<f64>>> {
    let stream_index = (family.index() * 2 + split as usize) as u64;
    let samples = (count + 2) * cfg.samples_per_vector;
    let payload = generate_bytes(
        derive_seed(cfg.seed, purpose::PAYLOAD, stream_index),
        modem::payload_bytes_for(family, samples, cfg),
    )?;
    let stream = modulate(family, &payload, cfg)?;
    let mut vectors = segment(&stream, cfg)?;
    if vectors.len() < count + 2 {
        return Err(Error::InsufficientData {
            needed: samples,
            got: stream.len(),
        });
    }
    vectors.truncate(count + 1);
    vectors.remove(0);
    if cfg.random_phase {
        let mut rng = derived_rng(cfg.seed, purpose::PHASE, stream_index);
        for v in &mut vectors {
            rotate(v, rng.random_range(0.0..2.0 * PI));
        }
    }
    Ok(vectors)
}

fn mean_power(vectors: &[Vec<f64>]) -> f64 {
    let total: f64 = vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64)
        .sum();
    total / vectors.len() as f64
}

/// Builds the shuffled train and test sets.
///
/// Every family except OOK is scaled so its train-split mean power is 1; the
/// same gain is applied to that family's test vectors. The optional noise
/// floor is added after scaling, with the same absolute power for all
/// families.
pub fn build_dataset(cfg: &GenConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let n_train = cfg.train_vectors_per_mod;
    let n_test = cfg.test_vectors_per_mod();
    let mut train = Vec::with_capacity(cfg.train_total());
    let mut test = Vec::with_capacity(n_test * NUM_FAMILIES);

    for family in ModulationFamily::ALL {
        let mut tr = family_vectors(family, Split::Train, n_train, cfg)?;
        let mut te = family_vectors(family, Split::Test, n_test, cfg)?;
        if family != ModulationFamily::Ook {
            let gain = 1.0 / mean_power(&tr).sqrt();
            for v in tr.iter_mut().chain(te.iter_mut()) {
                v.iter_mut().for_each(|x| *x *= gain);
            }
        }
        if let Some(db) = cfg.noise_floor_db {
            let sigma = 10f64.powf(-db / 20.0);
            for (split, vectors) in [(Split::Train, &mut tr), (Split::Test, &mut te)] {
                let index = (family.index() * 2 + split as usize) as u64;
                let mut rng = derived_rng(cfg.seed, purpose::FLOOR, index);
                for x in vectors.iter_mut().flatten() {
                    *x += sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let tag = |v: Vec<f64>| IqVector {
            samples: v.into_iter().map(|x| x as f32).collect(),
            label: family,
        };
        train.extend(tr.into_iter().map(tag));
        test.extend(te.into_iter().map(tag));
    }

    train.shuffle(&mut derived_rng(cfg.seed, purpose::SHUFFLE, Split::Train as u64));
    test.shuffle(&mut derived_rng(cfg.seed, purpose::SHUFFLE, Split::Test as u64));
    let len = cfg.vector_len();
    Ok((
        Dataset::new(Some(Split::Train), len, train)?,
        Dataset::new(Some(Split::Test), len, test)?,
    ))
}
