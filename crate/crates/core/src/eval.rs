//! Classification metrics and SNR sweeps.

use std::io::Write;

use crate::channel::{add_awgn, SnrTarget};
use crate::error::{Error, Result};
use crate::rng::{derived_rng, purpose};
use crate::siggen::{Dataset, ModulationFamily, NUM_FAMILIES};
use crate::stack::StackedNetwork;
use crate::whiten::dataset_matrix;

/// Square count matrix; entry `(i, j)` counts samples of true class `i`
/// predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if counts.iter().any(|r| r.len() != n) {
            return Err(Error::InconsistentDimensions(
                "confusion matrix is not square".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.classes();
        for l in [truth, predicted] {
            if l >= n {
                return Err(Error::LabelOutOfRange(l.min(255) as u8));
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.counts[truth].iter().sum()
    }

    pub fn column_total(&self, predicted: usize) -> u64 {
        self.counts.iter().map(|r| r[predicted]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Row-normalized matrix: entry `(i, j)` estimates P(predicted j | true i).
    /// Empty rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let t: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if t == 0 { 0.0 } else { c as f64 / t as f64 })
                    .collect()
            })
            .collect()
    }

    /// Global accuracy `trace / total`.
    pub fn accuracy(&self) -> Option<f64> {
        let t = self.total();
        (t > 0).then(|| self.trace() as f64 / t as f64)
    }

    /// Macro accuracy: unweighted mean over classes of the per-class correct
    /// fraction.
    pub fn pcc(&self) -> Result<f64> {
        let n = self.classes();
        let mut sum = 0.0;
        for k in 0..n {
            sum += self.sensitivity(k)?;
        }
        Ok(sum / n as f64)
    }

    /// Fraction of class-`k` predictions that are correct; `None` when nothing
    /// was predicted as `k`.
    pub fn precision(&self, k: usize) -> Option<f64> {
        let col = self.column_total(k);
        (col > 0).then(|| self.counts[k][k] as f64 / col as f64)
    }

    /// Fraction of true class-`k` samples predicted as `k`.
    pub fn sensitivity(&self, k: usize) -> Result<f64> {
        let row = self.row_total(k);
        if row == 0 {
            return Err(Error::UndefinedClass(k));
        }
        Ok(self.counts[k][k] as f64 / row as f64)
    }
}

/// Builds a 6-class confusion matrix from parallel prediction/truth lists.
pub fn confusion(predictions: &[usize], truths: &[usize]) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            context: "prediction count",
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    let mut m = ConfusionMatrix::new(NUM_FAMILIES);
    for (&p, &t) in predictions.iter().zip(truths) {
        m.record(t, p)?;
    }
    Ok(m)
}

/// Metrics at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    /// `None` for clean evaluation.
    pub snr_db: Option<f64>,
    pub pcc: f64,
    pub accuracy: f64,
    pub precision: Vec<Option<f64>>,
    pub sensitivity: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

impl EvalPoint {
    pub fn from_confusion(snr_db: Option<f64>, confusion: ConfusionMatrix) -> Result<Self> {
        let n = confusion.classes();
        Ok(Self {
            snr_db,
            pcc: confusion.pcc()?,
            accuracy: confusion.accuracy().unwrap_or(0.0),
            precision: (0..n).map(|k| confusion.precision(k)).collect(),
            sensitivity: (0..n).map(|k| confusion.sensitivity(k)).collect::<Result<_>>()?,
            confusion,
        })
    }
}

/// Classifies every vector of `data` (raw samples) and scores the result.
pub fn evaluate(net: &StackedNetwork, data: &Dataset, snr_db: Option<f64>) -> Result<EvalPoint> {
    if data.vector_len != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "dataset vector length",
            expected: net.input_dim(),
            got: data.vector_len,
        });
    }
    let raw = dataset_matrix(data);
    let predictions = net.predict_rows(raw.view())?;
    let truths: Vec<usize> = data.vectors.iter().map(|v| v.label.index()).collect();
    EvalPoint::from_confusion(snr_db, confusion(&predictions, &truths)?)
}

/// Noise stream index for an SNR, so a given `(seed, snr)` always draws the
/// same noise whether evaluated alone or inside a sweep.
pub fn noise_stream_index(snr: SnrTarget) -> u64 {
    snr.db().to_bits()
}

/// Noises `clean` at `snr`, then scores it.
pub fn evaluate_at_snr(
    net: &StackedNetwork,
    clean: &Dataset,
    snr: SnrTarget,
    seed: u64,
) -> Result<EvalPoint> {
    let mut rng = derived_rng(seed, purpose::NOISE, noise_stream_index(snr));
    let noised = add_awgn(clean, snr, &mut rng);
    evaluate(net, &noised, Some(snr.db()))
}

/// Metrics for each requested SNR, in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<EvalPoint>,
}

/// Evaluates `net` on `test` with a fresh noise draw per SNR point. The SNR
/// list must be strictly monotone.
pub fn snr_sweep(net: &StackedNetwork, test: &Dataset, snrs: &[SnrTarget], seed: u64) -> Result<SweepResult> {
    let ascending = snrs.windows(2).all(|w| w[0].db() < w[1].db());
    let descending = snrs.windows(2).all(|w| w[0].db() > w[1].db());
    if !(ascending || descending) {
        return Err(Error::Config("SNR grid must be strictly ordered".into()));
    }
    let points = snrs
        .iter()
        .map(|&snr| evaluate_at_snr(net, test, snr, seed))
        .collect::<Result<_>>()?;
    Ok(SweepResult { points })
}

/// Header of the metrics/sweep CSV: `snr_db,pcc,accuracy`, then
/// `precision_<FAM>,sensitivity_<FAM>` for each family in class order.
pub fn metrics_header() -> String {
    let mut cols = vec!["snr_db".to_string(), "pcc".into(), "accuracy".into()];
    for f in ModulationFamily::ALL {
        cols.push(format!("precision_{}", f.name()));
        cols.push(format!("sensitivity_{}", f.name()));
    }
    cols.join(",")
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

/// One CSV row; clean points leave `snr_db` empty and undefined precision is
/// written as an empty field.
pub fn metrics_row(p: &EvalPoint) -> String {
    let mut cols = vec![
        p.snr_db.map(fmt_f).unwrap_or_default(),
        fmt_f(p.pcc),
        fmt_f(p.accuracy),
    ];
    for (prec, sens) in p.precision.iter().zip(&p.sensitivity) {
        cols.push(prec.map(fmt_f).unwrap_or_default());
        cols.push(fmt_f(*sens));
    }
    cols.join(",")
}

pub fn write_metrics_csv<W: Write>(mut w: W, points: &[EvalPoint]) -> Result<()> {
    writeln!(w, "{}", metrics_header())?;
    for p in points {
        writeln!(w, "{}", metrics_row(p))?;
    }
    Ok(())
}

/// Writes counts (`normalized = false`) or row-normalized fractions with a
/// header row and a leading true-class column.
pub fn write_confusion_csv<W: Write>(mut w: W, m: &ConfusionMatrix, normalized: bool) -> Result<()> {
    let names: Vec<&str> = ModulationFamily::ALL.iter().map(|f| f.name()).collect();
    writeln!(w, "true\\predicted,{}", names.join(","))?;
    let norm = m.row_normalized();
    for (i, name) in names.iter().enumerate().take(m.classes()) {
        let cells: Vec<String> = if normalized {
            norm[i].iter().map(|&v| fmt_f(v)).collect()
        } else {
            m.counts()[i].iter().map(u64::to_string).collect()
        };
        writeln!(w, "{name},{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels: Vec<usize> = (0..30).map(|i| i % 6).collect();
        let m = confusion(&labels, &labels).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(m.get(i, j), if i == j { 5 } else { 0 });
            }
            assert_eq!(m.precision(i), Some(1.0));
            assert_eq!(m.sensitivity(i).unwrap(), 1.0);
        }
        assert_eq!(m.pcc().unwrap(), 1.0);
    }

    #[test]
    fn single_sample_lands_in_cell() {
        let m = confusion(&[5], &[2]).unwrap();
        assert_eq!(m.get(2, 5), 1);
        assert_eq!(m.total(), 1);
    }

    #[test]
    fn length_and_range_errors() {
        assert!(confusion(&[0, 1], &[0]).is_err());
        assert!(confusion(&[6], &[0]).is_err());
        assert!(confusion(&[0], &[7]).is_err());
    }

    #[test]
    fn two_family_macro_average() {
        let m = ConfusionMatrix::from_counts(vec![vec![9, 1], vec![5, 5]]).unwrap();
        assert!((m.pcc().unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn precision_and_sensitivity_counts() {
        let mut counts = vec![vec![0u64; 6]; 6];
        counts[1][1] = 8;
        counts[3][1] = 2;
        counts[4][4] = 1;
        counts[4][0] = 9;
        let m = ConfusionMatrix::from_counts(counts).unwrap();
        assert!((m.precision(1).unwrap() - 0.8).abs() < 1e-15);
        assert!((m.sensitivity(4).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(m.precision(2), None);
        assert!(matches!(m.sensitivity(2), Err(Error::UndefinedClass(2))));
        assert!(m.pcc().is_err());
    }

    #[test]
    fn csv_layouts() {
        let m = confusion(&[0, 1, 1], &[0, 1, 2]).unwrap();
        let mut buf = Vec::new();
        write_confusion_csv(&mut buf, &m, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "true\\predicted,OOK,GFSK,GMSK,DBPSK,DQPSK,OFDM");
        assert_eq!(lines[3], "GMSK,0,1,0,0,0,0");

        assert_eq!(metrics_header().split(',').count(), 3 + 12);
        let p = EvalPoint {
            snr_db: Some(-5.0),
            pcc: 0.5,
            accuracy: 0.5,
            precision: vec![None, Some(1.0), None, None, None, None],
            sensitivity: vec![0.5; 6],
            confusion: m,
        };
        let row = metrics_row(&p);
        assert!(row.starts_with("-5.000000,0.500000,0.500000,,0.500000,1.000000,"));
        assert_eq!(row.split(',').count(), 15);
    }
}
