//! Word-label Local Mutual Information, shortcut-word selection and the
//! shortcut-reliance metrics.
//!
//! For word `w` and label `y` over `N` examples,
//! `LMI(w, y) = p(w, y) · ln(p(y | w) / p(y))`, with presence counting: an
//! example contributes once for each distinct word in its question and
//! correct answer. A prediction is shortcut-cued when one of its top
//! attributed words is among the highest-LMI words of the predicted label.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionRecord;
use crate::calibration::PredictionRecord;
use crate::corpus::{ceil_fraction, tokenize, McqaExample};
use crate::error::{Error, Result};

pub const DEFAULT_CUT_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiTable {
    pub n_labels: usize,
    pub n_examples: usize,
    pub label_counts: Vec<usize>,
    pub word_counts: BTreeMap<String, usize>,
    /// Per word, the number of examples of each label containing it.
    pub joint_counts: BTreeMap<String, Vec<usize>>,
    /// Per label, LMI of every word that co-occurs with it.
    pub lmi: Vec<BTreeMap<String, f64>>,
}

/// The distinct words an example contributes to the counts.
pub fn lmi_words(example: &McqaExample) -> BTreeSet<String> {
    let mut words: BTreeSet<String> = tokenize(&example.question).into_iter().collect();
    if let Some(answer) = example.choices.get(example.correct_index) {
        words.extend(tokenize(answer));
    }
    words
}

/// `p(w,y) · ln(p(y|w) / p(y))` from raw counts. The ratio is formed from
/// integer products so exact independence gives exactly zero.
pub fn lmi_from_counts(joint: usize, word: usize, label: usize, n: usize) -> f64 {
    if joint == 0 {
        return 0.0;
    }
    let ratio = (joint as f64 * n as f64) / (word as f64 * label as f64);
    joint as f64 / n as f64 * ratio.ln()
}

impl LmiTable {
    pub fn compute<'a, I>(examples: I, n_labels: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a McqaExample>,
    {
        let mut label_counts = vec![0usize; n_labels];
        let mut word_counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut joint_counts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut n = 0;
        for ex in examples {
            if ex.correct_index >= n_labels {
                return Err(Error::Contract(format!(
                    "example {} has label {} outside [0, {n_labels})",
                    ex.id, ex.correct_index
                )));
            }
            n += 1;
            label_counts[ex.correct_index] += 1;
            for w in lmi_words(ex) {
                *word_counts.entry(w.clone()).or_default() += 1;
                joint_counts.entry(w).or_insert_with(|| vec![0; n_labels])[ex.correct_index] += 1;
            }
        }
        if n == 0 {
            return Err(Error::EmptyInput("LMI needs at least one example"));
        }
        let mut lmi = vec![BTreeMap::new(); n_labels];
        for (w, joint) in &joint_counts {
            for (y, &c) in joint.iter().enumerate() {
                if c > 0 {
                    lmi[y].insert(w.clone(), lmi_from_counts(c, word_counts[w], label_counts[y], n));
                }
            }
        }
        Ok(Self {
            n_labels,
            n_examples: n,
            label_counts,
            word_counts,
            joint_counts,
            lmi,
        })
    }

    pub fn score(&self, word: &str, label: usize) -> f64 {
        self.lmi.get(label).and_then(|m| m.get(word)).copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("LMI table serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScope {
    /// Top fraction of each label's co-occurring words.
    #[default]
    PerLabel,
    /// Top fraction of all (word, label) pairs pooled together.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutSet {
    pub sets: Vec<BTreeSet<String>>,
    pub cut_fraction: f64,
}

impl ShortcutSet {
    pub fn contains(&self, label: usize, word: &str) -> bool {
        self.sets.get(label).is_some_and(|s| s.contains(word))
    }
}

fn ranked(entries: &mut [(f64, &str, usize)]) {
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
}

/// Selects the highest-LMI words, breaking ties toward the lexicographically
/// smaller word.
pub fn select_shortcut_words(table: &LmiTable, cut_fraction: f64, scope: SelectionScope) -> Result<ShortcutSet> {
    if !(cut_fraction > 0.0 && cut_fraction <= 1.0) {
        return Err(Error::Config(format!("cut fraction {cut_fraction} outside (0, 1]")));
    }
    let mut sets = vec![BTreeSet::new(); table.n_labels];
    match scope {
        SelectionScope::PerLabel => {
            for (y, scores) in table.lmi.iter().enumerate() {
                let mut entries: Vec<(f64, &str, usize)> = scores.iter().map(|(w, s)| (*s, w.as_str(), y)).collect();
                ranked(&mut entries);
                let take = ceil_fraction(cut_fraction, entries.len());
                sets[y].extend(entries[..take].iter().map(|e| e.1.to_string()));
            }
        }
        SelectionScope::Global => {
            let mut entries: Vec<(f64, &str, usize)> = table
                .lmi
                .iter()
                .enumerate()
                .flat_map(|(y, m)| m.iter().map(move |(w, s)| (*s, w.as_str(), y)))
                .collect();
            ranked(&mut entries);
            let take = ceil_fraction(cut_fraction, entries.len());
            for &(_, w, y) in &entries[..take] {
                sets[y].insert(w.to_string());
            }
        }
    }
    Ok(ShortcutSet { sets, cut_fraction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedToken {
    pub word: String,
    pub attribution: f64,
    pub lmi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutFlag {
    pub shortcut_cued: bool,
    pub matched: Vec<MatchedToken>,
}

/// Intersects the top attributed words with the shortcut set of the
/// predicted option.
pub fn classify_prediction(attr: &AttributionRecord, sets: &ShortcutSet, table: &LmiTable) -> Result<ShortcutFlag> {
    let label = attr.target_choice;
    if label >= sets.sets.len() {
        return Err(Error::Contract(format!(
            "predicted label {label} outside [0, {})",
            sets.sets.len()
        )));
    }
    let mut seen = BTreeSet::new();
    let matched: Vec<MatchedToken> = attr
        .top_tokens
        .iter()
        .filter(|w| sets.contains(label, w) && seen.insert(w.as_str()))
        .map(|w| MatchedToken {
            word: w.clone(),
            attribution: attr.score_of(w).unwrap_or(0.0),
            lmi: table.score(w, label),
        })
        .collect();
    Ok(ShortcutFlag {
        shortcut_cued: !matched.is_empty(),
        matched,
    })
}

/// Fraction of shortcut-cued predictions.
pub fn p_sc(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(Error::UndefinedMetric("P_SC over zero predictions"));
    }
    Ok(flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64)
}

/// Unweighted mean of per-label F1 over `n_labels` labels. A label with no
/// true and no predicted instances contributes 0.
pub fn macro_f1(records: &[PredictionRecord], n_labels: usize) -> f64 {
    if n_labels == 0 {
        return 0.0;
    }
    let mut tp = vec![0usize; n_labels];
    let mut fp = vec![0usize; n_labels];
    let mut fn_ = vec![0usize; n_labels];
    for r in records {
        if r.pred_index == r.label {
            tp[r.label] += 1;
        } else {
            fp[r.pred_index] += 1;
            fn_[r.label] += 1;
        }
    }
    let total: f64 = (0..n_labels)
        .map(|y| {
            let denom = 2 * tp[y] + fp[y] + fn_[y];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[y] as f64 / denom as f64
            }
        })
        .sum();
    total / n_labels as f64
}

/// F1 per unit of shortcut reliance, with `p_sc` as a fraction.
pub fn t_sc(f1: f64, p_sc: f64) -> Result<f64> {
    if p_sc <= 0.0 {
        return Err(Error::UndefinedMetric("T_SC with P_SC = 0"));
    }
    Ok(f1 / p_sc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutExampleReport {
    pub example_id: String,
    pub split: crate::corpus::Split,
    pub predicted: usize,
    pub label: usize,
    pub shortcut_cued: bool,
    pub matched: Vec<MatchedToken>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutSummary {
    pub p_sc: f64,
    pub p_sc_percent: f64,
    pub f1: f64,
    pub t_sc: Option<f64>,
}

impl ShortcutSummary {
    pub fn new(flags: &[bool], f1: f64) -> Result<Self> {
        let p = p_sc(flags)?;
        Ok(Self {
            p_sc: p,
            p_sc_percent: 100.0 * p,
            f1,
            t_sc: t_sc(f1, p).ok(),
        })
    }
}
