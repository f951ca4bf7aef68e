//! Binned calibration metrics over prediction records: expected and maximum
//! calibration error, Brier score and reliability-diagram tables.
//!
//! Bins are equal-width and right-closed: bin `m` (1-based) covers
//! `((m-1)/M, m/M]`. A confidence of exactly 0 is placed in the first bin.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Split;
use crate::error::{Error, Result};
use crate::micromodel::argmax;

pub const DEFAULT_BINS: usize = 10;
pub const SWEEP_BINS: [usize; 4] = [10, 20, 33, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub example_id: String,
    pub probs: Vec<f64>,
    pub pred_index: usize,
    pub confidence: f64,
    pub correct: bool,
    /// Index of the correct option; needed for the Brier score and F1.
    pub label: usize,
    pub split: Split,
}

impl PredictionRecord {
    /// Builds a record from a probability vector, deriving the prediction
    /// (lowest index on ties), confidence and correctness.
    pub fn new(example_id: impl Into<String>, probs: Vec<f64>, label: usize, split: Split) -> Self {
        let pred_index = argmax(&probs);
        Self {
            example_id: example_id.into(),
            confidence: probs[pred_index],
            correct: pred_index == label,
            pred_index,
            label,
            probs,
            split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.probs.iter().sum();
        if self.probs.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Integrity(format!(
                "record {}: probabilities must be non-negative and sum to 1 (sum {sum})",
                self.example_id
            )));
        }
        if self.label >= self.probs.len() || self.pred_index >= self.probs.len() {
            return Err(Error::Integrity(format!(
                "record {}: index out of range",
                self.example_id
            )));
        }
        if self.pred_index != argmax(&self.probs) || self.confidence != self.probs[self.pred_index] {
            return Err(Error::Integrity(format!(
                "record {}: prediction does not match probabilities",
                self.example_id
            )));
        }
        if self.correct != (self.pred_index == self.label) {
            return Err(Error::Integrity(format!(
                "record {}: correctness flag inconsistent",
                self.example_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub acc: f64,
    pub conf: f64,
}

impl CalibrationBin {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn gap(&self) -> f64 {
        (self.acc - self.conf).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n_bins: usize,
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
    pub mce: f64,
    pub brier: f64,
    pub n: usize,
}

/// 0-based bin index for a confidence value.
pub fn bin_index(confidence: f64, n_bins: usize) -> usize {
    // ceil(c * M) - 1 realizes the right-closed intervals; the product can
    // be off by one ulp, so settle against the same bounds `finish` emits
    let last = n_bins as isize - 1;
    let m_f = n_bins as f64;
    let mut m = ((confidence * m_f).ceil() as isize - 1).clamp(0, last);
    if m > 0 && confidence <= m as f64 / m_f {
        m -= 1;
    } else if m < last && confidence > (m + 1) as f64 / m_f {
        m += 1;
    }
    m as usize
}

fn check(records: &[PredictionRecord], n_bins: usize) -> Result<()> {
    if n_bins == 0 {
        return Err(Error::Config("number of bins must be at least 1".into()));
    }
    if records.is_empty() {
        return Err(Error::EmptyInput("no prediction records"));
    }
    Ok(())
}

/// Per-bin partial sums; merging two partials is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPartials {
    pub counts: Vec<usize>,
    pub correct: Vec<usize>,
    pub conf_sums: Vec<f64>,
}

impl BinPartials {
    pub fn new(n_bins: usize) -> Self {
        Self {
            counts: vec![0; n_bins],
            correct: vec![0; n_bins],
            conf_sums: vec![0.0; n_bins],
        }
    }

    pub fn add(&mut self, confidence: f64, correct: bool) {
        let m = bin_index(confidence, self.counts.len());
        self.counts[m] += 1;
        self.correct[m] += usize::from(correct);
        self.conf_sums[m] += confidence;
    }

    pub fn merge(&mut self, other: &BinPartials) {
        for m in 0..self.counts.len() {
            self.counts[m] += other.counts[m];
            self.correct[m] += other.correct[m];
            self.conf_sums[m] += other.conf_sums[m];
        }
    }

    pub fn finish(&self) -> Vec<CalibrationBin> {
        let n_bins = self.counts.len();
        (0..n_bins)
            .map(|m| {
                let count = self.counts[m];
                let (acc, conf) = if count == 0 {
                    (0.0, 0.0)
                } else {
                    (self.correct[m] as f64 / count as f64, self.conf_sums[m] / count as f64)
                };
                CalibrationBin {
                    lo: m as f64 / n_bins as f64,
                    hi: (m + 1) as f64 / n_bins as f64,
                    count,
                    acc,
                    conf,
                }
            })
            .collect()
    }
}

/// Partitions records into `n_bins` equal-width confidence bins. Empty bins
/// are kept with zero placeholders.
pub fn bin(records: &[PredictionRecord], n_bins: usize) -> Result<Vec<CalibrationBin>> {
    check(records, n_bins)?;
    let mut partials = BinPartials::new(n_bins);
    for r in records {
        partials.add(r.confidence, r.correct);
    }
    Ok(partials.finish())
}

fn ece_of(bins: &[CalibrationBin], n: usize) -> f64 {
    bins.iter()
        .filter(|b| !b.is_empty())
        .map(|b| b.count as f64 / n as f64 * b.gap())
        .sum()
}

fn mce_of(bins: &[CalibrationBin]) -> f64 {
    bins.iter()
        .filter(|b| !b.is_empty())
        .map(CalibrationBin::gap)
        .fold(0.0, f64::max)
}

pub fn ece(records: &[PredictionRecord], n_bins: usize) -> Result<f64> {
    Ok(ece_of(&bin(records, n_bins)?, records.len()))
}

pub fn mce(records: &[PredictionRecord], n_bins: usize) -> Result<f64> {
    Ok(mce_of(&bin(records, n_bins)?))
}

/// Mean over records of the squared distance between the probability vector
/// and the one-hot label.
pub fn brier(records: &[PredictionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no prediction records"));
    }
    let total: f64 = records
        .iter()
        .map(|r| {
            r.probs
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let y = if k == r.label { 1.0 } else { 0.0 };
                    (p - y) * (p - y)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / records.len() as f64)
}

pub fn report(records: &[PredictionRecord], n_bins: usize) -> Result<CalibrationReport> {
    let bins = bin(records, n_bins)?;
    Ok(CalibrationReport {
        n_bins,
        ece: ece_of(&bins, records.len()),
        mce: mce_of(&bins),
        brier: brier(records)?,
        n: records.len(),
        bins,
    })
}

pub const RELIABILITY_HEADER: &str = "bin_lo,bin_hi,count,accuracy,confidence";

/// Reliability-diagram table as CSV, one row per bin including empty ones.
pub fn reliability_diagram(records: &[PredictionRecord], n_bins: usize) -> Result<String> {
    let mut out = String::from(RELIABILITY_HEADER);
    out.push('\n');
    for b in bin(records, n_bins)? {
        out.push_str(&format!("{},{},{},{},{}\n", b.lo, b.hi, b.count, b.acc, b.conf));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSweepEntry {
    pub ece: f64,
    pub mce: f64,
}

/// ECE and MCE at each requested bin count, keyed by the count.
pub fn bin_sweep(records: &[PredictionRecord], bin_counts: &[usize]) -> Result<BTreeMap<usize, BinSweepEntry>> {
    bin_counts
        .iter()
        .map(|&m| {
            let bins = bin(records, m)?;
            Ok((
                m,
                BinSweepEntry {
                    ece: ece_of(&bins, records.len()),
                    mce: mce_of(&bins),
                },
            ))
        })
        .collect()
}

/// Seeded synthetic predictions. Confidence is uniform on `(1/K, 1)` with the
/// remaining mass spread evenly over the other options, and each prediction
/// is correct with probability `accuracy(confidence)`.
pub fn sample_source<F>(n: usize, n_choices: usize, seed: u64, accuracy: F) -> Vec<PredictionRecord>
where
    F: Fn(f64) -> f64,
{
    assert!(n_choices >= 2, "a source needs at least two options");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floor = 1.0 / n_choices as f64;
    (0..n)
        .map(|i| {
            let conf = floor + (1.0 - floor) * rng.gen::<f64>();
            let correct = rng.gen::<f64>() < accuracy(conf);
            let rest = (1.0 - conf) / (n_choices - 1) as f64;
            let mut probs = vec![rest; n_choices];
            probs[0] = conf;
            PredictionRecord::new(format!("s{i:05}"), probs, usize::from(!correct), Split::Retain)
        })
        .collect()
}

/// A perfectly calibrated source: correct with probability equal to the
/// confidence.
pub fn sample_calibrated(n: usize, n_choices: usize, seed: u64) -> Vec<PredictionRecord> {
    sample_source(n, n_choices, seed, |c| c)
}
