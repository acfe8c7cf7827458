//! Binary persistence of datasets and models, and receptive-field exports.
//!
//! All multi-byte values are little-endian.
//!
//! Dataset file (`IQD1`):
//!
//! | offset      | type            | content                          |
//! |-------------|-----------------|----------------------------------|
//! | 0           | `[u8; 4]`       | magic `IQDS`                     |
//! | 4           | `u16`           | version = 1                      |
//! | 6           | `u32`           | vector count `n`                 |
//! | 10          | `u32`           | vector length `len` (2 x N_SpV)  |
//! | 14          | `u8`            | family count = 6                 |
//! | 15          | `[u8; n]`       | labels (class index)             |
//! | 15 + n      | `[f32; n*len]`  | samples, vector-major            |
//!
//! Model file (`SSDA` version 1):
//!
//! | type                     | content                                           |
//! |--------------------------|---------------------------------------------------|
//! | `[u8; 4]`, `u16`         | magic `SSDA`, version = 1                         |
//! | `u32`, `[u8]`            | metadata length, UTF-8 `key=value` lines          |
//! | `u32`                    | input dimension `d`                               |
//! | `f64`                    | whitening epsilon                                 |
//! | `[f64; d]`, `[f64; d*d]` | whitening mean, whitening matrix (row-major)      |
//! | `u32`                    | hidden layer count                                |
//! | per layer: `u32`, `u32`  | visible `v`, hidden `h`                           |
//! | `[f64; h*v]`             | weights (row-major, `h x v`)                      |
//! | `[f64; h]`, `[f64; v]`   | hidden bias, visible bias                         |
//! | `u32`, `u32`             | classes `c`, head input width `k`                 |
//! | `[f64; c*k]`, `[f64; c]` | head weights (row-major), head bias               |
//!
//! The metadata block carries the architecture (`arch.*` keys) and training
//! provenance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::sda::AutoencoderLayer;
use crate::siggen::{Dataset, IqVector, ModulationFamily, NUM_FAMILIES};
use crate::stack::{ArchitectureSpec, StackedNetwork};
use crate::whiten::WhiteningFilter;

pub const DATASET_MAGIC: [u8; 4] = *b"IQDS";
pub const DATASET_VERSION: u16 = 1;
pub const MODEL_MAGIC: [u8; 4] = *b"SSDA";
pub const MODEL_VERSION: u16 = 1;

/// Upper bound on any single dimension read from a file.
const MAX_DIM: usize = 1 << 20;

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::Truncated(what.to_string()),
            _ => Error::Io(e),
        })?;
        Ok(buf)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let v = self.bytes(N, what)?;
        Ok(v.try_into().expect("exact length"))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u32(what)? as usize;
        if v > MAX_DIM {
            return Err(Error::InconsistentDimensions(format!(
                "{what} = {v} is implausibly large"
            )));
        }
        Ok(v)
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.bytes(n * 8, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let raw = self.bytes(n * 4, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn magic(&mut self, expected: [u8; 4], version: u16) -> Result<()> {
        let found = self.array::<4>("magic")?;
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        let v = self.u16("version")?;
        if v != version {
            return Err(Error::UnsupportedVersion {
                expected: version,
                found: v,
            });
        }
        Ok(())
    }

    fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::InconsistentDimensions(
                "trailing bytes after payload".into(),
            )),
        }
    }
}

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v =
        u32::try_from(v).map_err(|_| Error::InconsistentDimensions(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s<'a, W: Write>(w: &mut W, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Serializes a dataset in the IQD1 layout.
pub fn write_dataset<W: Write>(mut w: W, data: &Dataset) -> Result<()> {
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    put_u32(&mut w, data.len())?;
    put_u32(&mut w, data.vector_len)?;
    w.write_all(&[NUM_FAMILIES as u8])?;
    let labels: Vec<u8> = data.vectors.iter().map(|v| v.label.index() as u8).collect();
    w.write_all(&labels)?;
    for v in &data.vectors {
        for s in &v.samples {
            w.write_all(&s.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses an IQD1 dataset. The split is unknown at this level.
pub fn read_dataset<R: Read>(r: R) -> Result<Dataset> {
    let mut r = Reader { inner: r };
    r.magic(DATASET_MAGIC, DATASET_VERSION)?;
    let count = r.u32("vector count")? as usize;
    let len = r.dim("vector length")?;
    let families = r.u8("family count")?;
    if usize::from(families) != NUM_FAMILIES {
        return Err(Error::InconsistentDimensions(format!(
            "file declares {families} families, expected {NUM_FAMILIES}"
        )));
    }
    let labels = r.bytes(count, "labels")?;
    let mut vectors = Vec::with_capacity(count);
    for (i, &l) in labels.iter().enumerate() {
        vectors.push(IqVector {
            samples: r.f32s(len, &format!("samples of vector {i}"))?,
            label: ModulationFamily::try_from(l)?,
        });
    }
    r.expect_eof()?;
    Dataset::new(None, len, vectors)
}

pub fn save_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), data)
}

/// Loads a dataset, taking the split from the sidecar when one exists.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut data = read_dataset(BufReader::new(File::open(path)?))?;
    let meta = sidecar_path(path);
    if meta.exists() {
        if let Some(split) = read_kv_file(&meta)?.get("split") {
            data.split = split.parse().ok();
        }
    }
    Ok(data)
}

/// `<path>.meta`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Formats `key=value` lines. Newlines inside values become spaces.
pub fn format_kv<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    entries
        .into_iter()
        .map(|(k, v)| format!("{k}={}\n", v.replace(['\n', '\r'], " ")))
        .collect()
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn write_kv_file<'a>(path: &Path, entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
    std::fs::write(path, format_kv(entries))?;
    Ok(())
}

pub fn read_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_kv(&std::fs::read_to_string(path)?)
}

/// Serializes a network in the SSDA layout.
pub fn write_model<W: Write>(mut w: W, net: &StackedNetwork) -> Result<()> {
    net.validate()?;
    w.write_all(&MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;

    let arch = net.arch.to_kv();
    let meta = format_kv(
        arch.iter().map(|(k, v)| (k.as_str(), v.as_str())).chain(
            net.metadata
                .iter()
                .filter(|(k, _)| !k.starts_with("arch."))
                .map(|(k, v)| (k.as_str(), v.as_str())),
        ),
    );
    put_u32(&mut w, meta.len())?;
    w.write_all(meta.as_bytes())?;

    let f = &net.whitening;
    put_u32(&mut w, f.dim())?;
    put_f64s(&mut w, [&f.epsilon])?;
    put_f64s(&mut w, f.mean.iter())?;
    put_f64s(&mut w, f.z.iter())?;

    put_u32(&mut w, net.layers.len())?;
    for l in &net.layers {
        put_u32(&mut w, l.visible())?;
        put_u32(&mut w, l.hidden())?;
        put_f64s(&mut w, l.weights.iter())?;
        put_f64s(&mut w, l.hidden_bias.iter())?;
        put_f64s(&mut w, l.visible_bias.iter())?;
    }
    put_u32(&mut w, net.head_weights.nrows())?;
    put_u32(&mut w, net.head_weights.ncols())?;
    put_f64s(&mut w, net.head_weights.iter())?;
    put_f64s(&mut w, net.head_bias.iter())?;
    w.flush()?;
    Ok(())
}

/// Parses an SSDA model.
pub fn read_model<R: Read>(r: R) -> Result<StackedNetwork> {
    let mut r = Reader { inner: r };
    r.magic(MODEL_MAGIC, MODEL_VERSION)?;
    let meta_len = r.dim("metadata length")?;
    let meta = String::from_utf8(r.bytes(meta_len, "metadata")?)
        .map_err(|_| Error::Config("metadata is not UTF-8".into()))?;
    let mut metadata = parse_kv(&meta)?;
    let arch = ArchitectureSpec::from_kv(&metadata)?;
    metadata.retain(|k, _| !k.starts_with("arch."));

    let dim = r.dim("input dimension")?;
    let epsilon = r.f64s(1, "whitening epsilon")?[0];
    let mean = Array1::from(r.f64s(dim, "whitening mean")?);
    let z = Array2::from_shape_vec((dim, dim), r.f64s(dim * dim, "whitening matrix")?).expect("exact length");
    let whitening = WhiteningFilter { mean, z, epsilon };

    let count = r.dim("layer count")?;
    if count != arch.layers.len() {
        return Err(Error::InconsistentDimensions(format!(
            "metadata lists {} layers, file has {count}",
            arch.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(count);
    let mut width = dim;
    for i in 1..=count {
        let visible = r.dim(&format!("layer {i} visible width"))?;
        let hidden = r.dim(&format!("layer {i} hidden width"))?;
        if visible != width {
            return Err(Error::InconsistentDimensions(format!(
                "layer {i} expects {visible} inputs but receives {width}"
            )));
        }
        let weights = r.f64s(hidden * visible, &format!("layer {i} weights"))?;
        let hidden_bias = r.f64s(hidden, &format!("layer {i} hidden bias"))?;
        let visible_bias = r.f64s(visible, &format!("layer {i} visible bias"))?;
        layers.push(AutoencoderLayer {
            weights: Array2::from_shape_vec((hidden, visible), weights).expect("exact length"),
            hidden_bias: Array1::from(hidden_bias),
            visible_bias: Array1::from(visible_bias),
        });
        width = hidden;
    }
    let classes = r.dim("head class count")?;
    let head_in = r.dim("head input width")?;
    if classes != NUM_FAMILIES || head_in != width {
        return Err(Error::InconsistentDimensions(format!(
            "softmax head is {classes}x{head_in}, expected {NUM_FAMILIES}x{width}"
        )));
    }
    let head_weights = Array2::from_shape_vec((classes, head_in), r.f64s(classes * head_in, "head weights")?)
        .expect("exact length");
    let head_bias = Array1::from(r.f64s(classes, "head bias")?);
    r.expect_eof()?;

    let net = StackedNetwork {
        arch,
        whitening,
        layers,
        head_weights,
        head_bias,
        metadata,
    };
    net.validate()?;
    Ok(net)
}

pub fn save_model(path: impl AsRef<Path>, net: &StackedNetwork) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), net)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<StackedNetwork> {
    read_model(BufReader::new(File::open(path)?))
}

/// Input-space weight patterns of the units of hidden layer `layer` (1-based).
///
/// Layer 1 returns its weight matrix unchanged. Deeper layers return the
/// linear composition `W_l ... W_1`, which ignores the intermediate
/// nonlinearities.
pub fn receptive_fields(net: &StackedNetwork, layer: usize) -> Result<Array2<f64>> {
    if layer == 0 || layer > net.layers.len() {
        return Err(Error::InvalidLayer {
            index: layer,
            layers: net.layers.len(),
        });
    }
    let mut fields = net.layers[0].weights.clone();
    for l in &net.layers[1..layer] {
        fields = l.weights.dot(&fields);
    }
    Ok(fields)
}

/// Pixel rows per I or Q row inside a PGM tile.
pub const TILE_ROW_HEIGHT: usize = 4;

/// Per-tile min-max normalization to `[0, 255]`; constant tiles map to mid-gray.
fn tile_pixels(weights: &[f64]) -> Vec<u8> {
    let (lo, hi) = weights
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
            (lo.min(w), hi.max(w))
        });
    weights
        .iter()
        .map(|&w| {
            let t = if hi > lo { (w - lo) / (hi - lo) } else { 0.5 };
            (t * 255.0).round() as u8
        })
        .collect()
}

/// Renders receptive fields as a binary (P5) grayscale grid. Each tile shows
/// the I components as its upper band and the Q components as its lower band;
/// tiles are separated by one black pixel.
pub fn render_pgm(fields: &Array2<f64>) -> Vec<u8> {
    let n = fields.nrows();
    let samples = fields.ncols() / 2;
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let rows = n.div_ceil(cols).max(1);
    let tile_w = samples;
    let tile_h = 2 * TILE_ROW_HEIGHT;
    let width = cols * (tile_w + 1) - 1;
    let height = rows * (tile_h + 1) - 1;
    let mut img = vec![0u8; width * height];
    for (k, field) in fields.rows().into_iter().enumerate() {
        let px = tile_pixels(&field.to_vec());
        let (tr, tc) = (k / cols, k % cols);
        let (y0, x0) = (tr * (tile_h + 1), tc * (tile_w + 1));
        for s in 0..samples {
            for (band, value) in [px[2 * s], px[2 * s + 1]].into_iter().enumerate() {
                for dy in 0..TILE_ROW_HEIGHT {
                    let y = y0 + band * TILE_ROW_HEIGHT + dy;
                    img[y * width + x0 + s] = value;
                }
            }
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&img);
    out
}

/// CSV of receptive fields: header `neuron,i0,q0,i1,q1,...`, then one row per
/// hidden unit with the exact weight values.
pub fn receptive_field_csv(fields: &Array2<f64>) -> String {
    let samples = fields.ncols() / 2;
    let mut out = String::from("neuron");
    for s in 0..samples {
        out.push_str(&format!(",i{s},q{s}"));
    }
    out.push('\n');
    for (k, row) in fields.rows().into_iter().enumerate() {
        out.push_str(&k.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes `<prefix>_layer<L>.csv` and `<prefix>_layer<L>.pgm`.
pub fn export_receptive_fields(
    net: &StackedNetwork,
    layer: usize,
    prefix: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf)> {
    let fields = receptive_fields(net, layer)?;
    let prefix = prefix.as_ref().as_os_str().to_string_lossy().into_owned();
    let csv = PathBuf::from(format!("{prefix}_layer{layer}.csv"));
    let pgm = PathBuf::from(format!("{prefix}_layer{layer}.pgm"));
    std::fs::write(&csv, receptive_field_csv(&fields))?;
    std::fs::write(&pgm, render_pgm(&fields))?;
    Ok((csv, pgm))
}
