//! End-to-end orchestration: corpus generation, training, unlearning,
//! evaluation and reporting over a run directory.
//!
//! Layout of a run directory:
//!
//! ```text
//! corpus.jsonl, corpus.meta.json, manifest.json
//! checkpoints/<state>.json      access/<state>.json
//! eval/<state>/{predictions,attributions,shortcuts}.jsonl
//! eval/<state>/{metrics,bin_sweep,lmi}.json
//! eval/<state>/reliability_<split>_M<M>.csv
//! report.csv, report.txt, qualitative.csv
//! ```
//!
//! `<state>` is a provenance tag: `pretrained`, `full`, `retained`,
//! `unlearned-<algorithm>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attribution::{attribute_example, AttributionRecord, IgConfig};
use crate::calibration::{self, BinSweepEntry, PredictionRecord, DEFAULT_BINS, SWEEP_BINS};
use crate::corpus::{Corpus, GenConfig, McqaExample, Split};
use crate::error::{Error, Result};
use crate::micromodel::{Mode, Model, Provenance, TrainConfig, Vocab};
use crate::shortcut::{
    classify_prediction, macro_f1, select_shortcut_words, LmiTable, SelectionScope, ShortcutExampleReport,
    ShortcutSummary, DEFAULT_CUT_FRACTION,
};
use crate::unlearn::{self, AccessLog, Algorithm, UnlearnConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    pub n_authors: usize,
    pub questions_per_author: usize,
    pub n_choices: usize,
    pub shortcut_rate: f64,
    pub vocab_size: usize,
    pub forget_fraction: f64,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        let gen = GenConfig::default();
        Self {
            n_authors: 50,
            questions_per_author: gen.questions_per_author,
            n_choices: gen.n_choices,
            shortcut_rate: gen.shortcut_rate,
            vocab_size: gen.vocab_size,
            forget_fraction: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub dim: usize,
    pub hidden_dim: usize,
    pub mode: Mode,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            dim: 16,
            hidden_dim: 16,
            mode: Mode::Tanh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnlearnSettings {
    pub algorithms: Vec<Algorithm>,
    pub steps: usize,
    pub lr: f64,
    pub retain_weight: f64,
}

impl Default for UnlearnSettings {
    fn default() -> Self {
        let cfg = UnlearnConfig::default();
        Self {
            algorithms: vec![Algorithm::GradAscent, Algorithm::GradDiff],
            steps: cfg.steps,
            lr: cfg.lr,
            retain_weight: cfg.retain_weight,
        }
    }
}

impl UnlearnSettings {
    pub fn config(&self, algorithm: Algorithm) -> UnlearnConfig {
        UnlearnConfig {
            algorithm,
            steps: self.steps,
            lr: self.lr,
            retain_weight: self.retain_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub n_bins: usize,
    pub sweep: Vec<usize>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_BINS,
            sweep: SWEEP_BINS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShortcutSettings {
    pub cut_fraction: f64,
    pub scope: SelectionScope,
}

impl Default for ShortcutSettings {
    fn default() -> Self {
        Self {
            cut_fraction: DEFAULT_CUT_FRACTION,
            scope: SelectionScope::PerLabel,
        }
    }
}

/// Everything a run needs. The single `seed` drives corpus generation, the
/// forget/retain split and model initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Existing corpus to use instead of `<out_dir>/corpus.jsonl`.
    pub corpus_path: Option<PathBuf>,
    pub corpus: CorpusSettings,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub unlearn: UnlearnSettings,
    pub attribution: IgConfig,
    pub calibration: CalibrationSettings,
    pub shortcut: ShortcutSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("run"),
            corpus_path: None,
            corpus: CorpusSettings::default(),
            model: ModelSettings::default(),
            train: TrainConfig::default(),
            unlearn: UnlearnSettings::default(),
            attribution: IgConfig::default(),
            calibration: CalibrationSettings::default(),
            shortcut: ShortcutSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            n_authors: self.corpus.n_authors,
            questions_per_author: self.corpus.questions_per_author,
            n_choices: self.corpus.n_choices,
            shortcut_rate: self.corpus.shortcut_rate,
            vocab_size: self.corpus.vocab_size,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gen_config().validate()?;
        let f = self.corpus.forget_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("forget_fraction {f} outside (0, 1)")));
        }
        if self.model.dim == 0 || self.model.hidden_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.model.mode == Mode::Linear && self.model.dim != self.model.hidden_dim {
            return Err(Error::Config("linear mode needs hidden_dim == dim".into()));
        }
        for &algorithm in &self.unlearn.algorithms {
            if algorithm == Algorithm::RetrainRetained {
                return Err(Error::Config(
                    "retrain_retained is produced by `train`, not `unlearn`".into(),
                ));
            }
            self.unlearn.config(algorithm).validate()?;
        }
        self.attribution.validate()?;
        if self.calibration.n_bins == 0 || self.calibration.sweep.contains(&0) {
            return Err(Error::Config("bin counts must be positive".into()));
        }
        let cut = self.shortcut.cut_fraction;
        if !(cut > 0.0 && cut <= 1.0) {
            return Err(Error::Config(format!("cut_fraction {cut} outside (0, 1]")));
        }
        Ok(())
    }

    pub fn corpus_file(&self) -> PathBuf {
        self.corpus_path
            .clone()
            .unwrap_or_else(|| self.out_dir.join("corpus.jsonl"))
    }

    pub fn checkpoint_file(&self, state: &Provenance) -> PathBuf {
        self.out_dir.join("checkpoints").join(format!("{}.json", state.tag()))
    }

    pub fn access_file(&self, state: &Provenance) -> PathBuf {
        self.out_dir.join("access").join(format!("{}.json", state.tag()))
    }

    pub fn eval_dir(&self, state: &Provenance) -> PathBuf {
        self.out_dir.join("eval").join(state.tag())
    }

    /// Report order: pretrained, full, retained, then the configured
    /// unlearning algorithms.
    pub fn states(&self) -> Vec<Provenance> {
        let mut states = vec![Provenance::Pretrained, Provenance::Full, Provenance::Retained];
        states.extend(
            self.unlearn
                .algorithms
                .iter()
                .map(|a| Provenance::Unlearned(a.name().to_string())),
        );
        states
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|item| serde_json::to_string(item).expect("record serializes") + "\n")
        .collect()
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_sha256: String,
    pub corpus_sha256: String,
    pub n_examples: usize,
    pub n_forget: usize,
    pub n_retain: usize,
}

/// Generates and splits the corpus, writing it with a manifest. Returns the
/// manifest.
pub fn cmd_gen(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let gen = cfg.gen_config();
    let corpus = crate::corpus::generate(&gen)?.split_forget_retain(cfg.corpus.forget_fraction, cfg.seed)?;
    let path = cfg.corpus_file();
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    corpus.save_jsonl(&path)?;

    let hashed_config = serde_json::to_string(&(&gen, cfg.corpus.forget_fraction)).expect("config serializes");
    let manifest = Manifest {
        seed: cfg.seed,
        config_sha256: sha256_hex(hashed_config.as_bytes()),
        corpus_sha256: sha256_hex(corpus.to_jsonl().as_bytes()),
        n_examples: corpus.len(),
        n_forget: corpus.split(Split::Forget).len(),
        n_retain: corpus.split(Split::Retain).len(),
    };
    write_file(
        &cfg.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(manifest)
}

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    Corpus::load_jsonl(&cfg.corpus_file(), Some(cfg.corpus.n_choices))
}

fn save_state(cfg: &RunConfig, model: &Model, access: Option<&AccessLog>) -> Result<()> {
    let state = &model.params.provenance;
    let path = cfg.checkpoint_file(state);
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    model.save(&path)?;
    if let Some(log) = access {
        write_file(
            &cfg.access_file(state),
            serde_json::to_string_pretty(log).expect("access log serializes"),
        )?;
    }
    Ok(())
}

/// Writes the pretrained, full and retained checkpoints.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<Provenance>> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let m = &cfg.model;
    let pretrained = Model::init(Vocab::from_corpus(&corpus), m.dim, m.hidden_dim, m.mode, cfg.seed)?;
    save_state(cfg, &pretrained, None)?;
    let full = unlearn::finetune_full(&pretrained, &corpus, cfg.train)?;
    save_state(cfg, &full.model, Some(&full.access))?;
    let retained = unlearn::retrain_retained(&pretrained, &corpus, cfg.train)?;
    save_state(cfg, &retained.model, Some(&retained.access))?;
    Ok(vec![Provenance::Pretrained, Provenance::Full, Provenance::Retained])
}

/// Unlearns the full checkpoint with every configured algorithm.
pub fn cmd_unlearn(cfg: &RunConfig) -> Result<Vec<Provenance>> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let full = Model::load(&cfg.checkpoint_file(&Provenance::Full))?;
    let forget = corpus.split(Split::Forget);
    let retain = corpus.split(Split::Retain);
    let mut produced = Vec::new();
    for &algorithm in &cfg.unlearn.algorithms {
        let ucfg = cfg.unlearn.config(algorithm);
        let outcome = match algorithm {
            Algorithm::GradAscent => unlearn::gradient_ascent(&full, &forget, &ucfg)?,
            Algorithm::GradDiff => unlearn::gradient_difference(&full, &forget, &retain, &ucfg)?,
            Algorithm::RetrainRetained => unreachable!("rejected by validate"),
        };
        save_state(cfg, &outcome.model, Some(&outcome.access))?;
        produced.push(outcome.model.params.provenance);
    }
    Ok(produced)
}

/// Aggregates for one split of one model state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub brier: f64,
    pub ece: f64,
    pub mce: f64,
    pub p_sc: f64,
    pub p_sc_percent: f64,
    /// Absent when no prediction is shortcut-cued.
    pub t_sc: Option<f64>,
    pub mean_completeness_gap: f64,
    pub sweep: BTreeMap<usize, BinSweepEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub state: String,
    pub n_bins: usize,
    pub splits: BTreeMap<Split, SplitMetrics>,
}

fn split_metrics(
    preds: &[&PredictionRecord],
    shortcuts: &[&ShortcutExampleReport],
    gaps: &[f64],
    n_labels: usize,
    cal: &CalibrationSettings,
) -> Result<SplitMetrics> {
    let preds: Vec<PredictionRecord> = preds.iter().map(|&p| p.clone()).collect();
    let report = calibration::report(&preds, cal.n_bins)?;
    let f1 = macro_f1(&preds, n_labels);
    let flags: Vec<bool> = shortcuts.iter().map(|s| s.shortcut_cued).collect();
    let summary = ShortcutSummary::new(&flags, f1)?;
    let accuracy = preds.iter().filter(|p| p.correct).count() as f64 / preds.len() as f64;
    Ok(SplitMetrics {
        n: preds.len(),
        accuracy,
        f1,
        brier: report.brier,
        ece: report.ece,
        mce: report.mce,
        p_sc: summary.p_sc,
        p_sc_percent: summary.p_sc_percent,
        t_sc: summary.t_sc,
        mean_completeness_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
        sweep: calibration::bin_sweep(&preds, &cal.sweep)?,
    })
}

fn metrics_from_records(
    state: &str,
    preds: &[PredictionRecord],
    shortcuts: &[ShortcutExampleReport],
    attributions: &[AttributionRecord],
    n_labels: usize,
    cal: &CalibrationSettings,
) -> Result<Metrics> {
    let gap_of: BTreeMap<&str, f64> = attributions
        .iter()
        .map(|a| (a.example_id.as_str(), a.completeness_gap))
        .collect();
    let mut splits = BTreeMap::new();
    for split in Split::ALL {
        let p: Vec<&PredictionRecord> = preds.iter().filter(|r| r.split == split).collect();
        if p.is_empty() {
            continue;
        }
        let s: Vec<&ShortcutExampleReport> = shortcuts.iter().filter(|r| r.split == split).collect();
        let gaps: Vec<f64> = p
            .iter()
            .map(|r| {
                gap_of
                    .get(r.example_id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Integrity(format!("no attribution record for {}", r.example_id)))
            })
            .collect::<Result<_>>()?;
        splits.insert(split, split_metrics(&p, &s, &gaps, n_labels, cal)?);
    }
    Ok(Metrics {
        state: state.to_string(),
        n_bins: cal.n_bins,
        splits,
    })
}

/// Per-example artifacts of one evaluation.
pub struct Evaluation {
    pub predictions: Vec<PredictionRecord>,
    pub attributions: Vec<AttributionRecord>,
    pub shortcuts: Vec<ShortcutExampleReport>,
    pub lmi: LmiTable,
    pub metrics: Metrics,
}

/// Predicts, attributes and classifies every example (in corpus order) and
/// aggregates per split.
pub fn evaluate(model: &Model, corpus: &Corpus, cfg: &RunConfig) -> Result<Evaluation> {
    let k = corpus.n_choices;
    let lmi = LmiTable::compute(&corpus.examples, k)?;
    let sets = select_shortcut_words(&lmi, cfg.shortcut.cut_fraction, cfg.shortcut.scope)?;
    let mut predictions = Vec::with_capacity(corpus.len());
    let mut attributions = Vec::with_capacity(corpus.len());
    let mut shortcuts = Vec::with_capacity(corpus.len());
    for ex in &corpus.examples {
        let pred = PredictionRecord::new(ex.id.clone(), model.predict(ex), ex.correct_index, ex.split);
        let attr = attribute_example(model, ex, &cfg.attribution)?;
        let flag = classify_prediction(&attr, &sets, &lmi)?;
        shortcuts.push(ShortcutExampleReport {
            example_id: ex.id.clone(),
            split: ex.split,
            predicted: attr.target_choice,
            label: ex.correct_index,
            shortcut_cued: flag.shortcut_cued,
            matched: flag.matched,
        });
        predictions.push(pred);
        attributions.push(attr);
    }
    let metrics = metrics_from_records(
        &model.params.provenance.tag(),
        &predictions,
        &shortcuts,
        &attributions,
        k,
        &cfg.calibration,
    )?;
    Ok(Evaluation {
        predictions,
        attributions,
        shortcuts,
        lmi,
        metrics,
    })
}

fn write_evaluation(dir: &Path, eval: &Evaluation, cal: &CalibrationSettings) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("predictions.jsonl"), to_jsonl(&eval.predictions))?;
    write_file(&dir.join("attributions.jsonl"), to_jsonl(&eval.attributions))?;
    write_file(&dir.join("shortcuts.jsonl"), to_jsonl(&eval.shortcuts))?;
    write_file(&dir.join("lmi.json"), eval.lmi.to_json())?;
    write_file(
        &dir.join("metrics.json"),
        serde_json::to_string_pretty(&eval.metrics).expect("metrics serialize"),
    )?;
    let mut sweeps = BTreeMap::new();
    let mut bin_counts = cal.sweep.clone();
    bin_counts.push(cal.n_bins);
    bin_counts.sort_unstable();
    bin_counts.dedup();
    for split in Split::ALL {
        let records: Vec<PredictionRecord> = eval.predictions.iter().filter(|r| r.split == split).cloned().collect();
        if records.is_empty() {
            continue;
        }
        for &m in &bin_counts {
            let csv = calibration::reliability_diagram(&records, m)?;
            write_file(&dir.join(format!("reliability_{split}_M{m}.csv")), csv)?;
        }
        sweeps.insert(split, sweep_json(&records, &cal.sweep)?);
    }
    write_file(
        &dir.join("bin_sweep.json"),
        serde_json::to_string_pretty(&sweeps).expect("sweep serializes"),
    )
}

/// Evaluates one checkpoint into `eval/<state>/`. Outputs are staged in a
/// sibling directory and moved into place only on success.
pub fn eval_state(cfg: &RunConfig, corpus: &Corpus, state: &Provenance) -> Result<Metrics> {
    let model = Model::load(&cfg.checkpoint_file(state))?;
    let final_dir = cfg.eval_dir(state);
    let staging = final_dir.with_file_name(format!(".{}.partial", state.tag()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let result = evaluate(&model, corpus, cfg).and_then(|eval| {
        write_evaluation(&staging, &eval, &cfg.calibration)?;
        Ok(eval.metrics)
    });
    match result {
        Ok(metrics) => {
            if final_dir.exists() {
                fs::remove_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
            }
            fs::rename(&staging, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
            Ok(metrics)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

/// Evaluates every state whose checkpoint exists, in report order.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<Metrics>> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let mut out = Vec::new();
    for state in cfg.states() {
        if cfg.checkpoint_file(&state).exists() {
            out.push(eval_state(cfg, &corpus, &state)?);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("no checkpoints to evaluate"));
    }
    Ok(out)
}

/// Recomputes every aggregate in `metrics.json` from the per-example JSONL
/// files of an evaluation directory and returns the largest absolute
/// difference.
pub fn audit(eval_dir: &Path, n_labels: usize, cal: &CalibrationSettings) -> Result<f64> {
    let stored: Metrics = read_json(&eval_dir.join("metrics.json"))?;
    let preds: Vec<PredictionRecord> = read_jsonl(&eval_dir.join("predictions.jsonl"))?;
    for p in &preds {
        p.validate()?;
    }
    let shortcuts: Vec<ShortcutExampleReport> = read_jsonl(&eval_dir.join("shortcuts.jsonl"))?;
    let attributions: Vec<AttributionRecord> = read_jsonl(&eval_dir.join("attributions.jsonl"))?;
    let recomputed = metrics_from_records(&stored.state, &preds, &shortcuts, &attributions, n_labels, cal)?;
    if recomputed.splits.keys().ne(stored.splits.keys()) {
        return Err(Error::Integrity("split sets differ".into()));
    }
    let mut worst: f64 = 0.0;
    for (split, a) in &stored.splits {
        let b = &recomputed.splits[split];
        if a.n != b.n || a.t_sc.is_some() != b.t_sc.is_some() {
            return Err(Error::Integrity(format!("{split}: counts or t_sc presence differ")));
        }
        let pairs = [
            (a.accuracy, b.accuracy),
            (a.f1, b.f1),
            (a.brier, b.brier),
            (a.ece, b.ece),
            (a.mce, b.mce),
            (a.p_sc, b.p_sc),
            (a.p_sc_percent, b.p_sc_percent),
            (a.t_sc.unwrap_or(0.0), b.t_sc.unwrap_or(0.0)),
            (a.mean_completeness_gap, b.mean_completeness_gap),
        ];
        for (x, y) in pairs {
            worst = worst.max((x - y).abs());
        }
        for (m, e) in &a.sweep {
            let f = b
                .sweep
                .get(m)
                .ok_or_else(|| Error::Integrity(format!("{split}: sweep M={m} missing")))?;
            worst = worst.max((e.ece - f.ece).abs()).max((e.mce - f.mce).abs());
        }
    }
    Ok(worst)
}

fn sweep_json(records: &[PredictionRecord], bins: &[usize]) -> Result<BTreeMap<String, BinSweepEntry>> {
    Ok(calibration::bin_sweep(records, bins)?
        .into_iter()
        .map(|(m, e)| (m.to_string(), e))
        .collect())
}

/// ECE/MCE per bin count for a PredictionRecord JSONL file, as
/// `{"M": {"ece": .., "mce": ..}}`.
pub fn cmd_sweep_bins(predictions: &Path, bins: &[usize], split: Option<Split>) -> Result<String> {
    let records: Vec<PredictionRecord> = read_jsonl(predictions)?;
    let records: Vec<PredictionRecord> = records
        .into_iter()
        .filter(|r| split.is_none_or(|s| r.split == s))
        .collect();
    let sweep = sweep_json(&records, bins)?;
    Ok(serde_json::to_string_pretty(&sweep).expect("sweep serializes"))
}

pub const REPORT_COLUMNS: [&str; 7] = ["Acc", "F1", "Brier", "ECE", "MCE", "P_SC", "T_SC"];

fn split_cells(m: Option<&SplitMetrics>) -> Vec<String> {
    match m {
        None => vec![String::new(); REPORT_COLUMNS.len()],
        Some(m) => vec![
            format!("{:.3}", m.accuracy),
            format!("{:.3}", m.f1),
            format!("{:.3}", m.brier),
            format!("{:.3}", m.ece),
            format!("{:.3}", m.mce),
            format!("{:.1}", m.p_sc_percent),
            m.t_sc.map_or_else(|| "n/a".to_string(), |t| format!("{t:.3}")),
        ],
    }
}

/// Table rows in report order. Missing states produce a row with empty
/// cells and a note.
pub struct Report {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                std::iter::once(&self.header)
                    .chain(&self.rows)
                    .map(|r| r[c].len())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }
}

fn build_report(cfg: &RunConfig) -> Result<(Report, Vec<(Provenance, Metrics)>)> {
    let mut header = vec!["state".to_string()];
    for split in Split::ALL {
        header.extend(REPORT_COLUMNS.iter().map(|c| format!("{split}_{c}")));
    }
    header.push("note".into());

    let mut states = cfg.states();
    let eval_root = cfg.out_dir.join("eval");
    if let Ok(entries) = fs::read_dir(&eval_root) {
        let mut extra: Vec<Provenance> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(Provenance::parse))
            .filter(|p| !states.contains(p))
            .collect();
        extra.sort();
        states.extend(extra);
    }

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut found = Vec::new();
    for state in states {
        let path = cfg.eval_dir(&state).join("metrics.json");
        let mut row = vec![state.tag()];
        if path.exists() {
            let metrics: Metrics = read_json(&path)?;
            for split in Split::ALL {
                row.extend(split_cells(metrics.splits.get(&split)));
            }
            row.push(String::new());
            found.push((state, metrics));
        } else {
            for _ in Split::ALL {
                row.extend(split_cells(None));
            }
            let note = format!("missing: {}", path.display());
            warnings.push(format!("{}: {note}", state.tag()));
            row.push(note);
        }
        rows.push(row);
    }
    Ok((Report { header, rows, warnings }, found))
}

pub const QUALITATIVE_HEADER: [&str; 8] = [
    "state",
    "example_id",
    "split",
    "prompt",
    "predicted",
    "ground_truth",
    "matched",
    "highlighted",
];

/// Up to this many shortcut-cued examples per state go to the qualitative
/// file.
pub const QUALITATIVE_PER_STATE: usize = 10;

fn render_prompt(ex: &McqaExample) -> String {
    let mut s = ex.question.clone();
    for (k, c) in ex.choices.iter().enumerate() {
        let _ = write!(s, " {} {c}", crate::corpus::option_label(k));
    }
    s
}

/// The prompt with every matched word wrapped in `[[ ]]`.
fn highlight(prompt: &str, words: &[&str]) -> String {
    let mut out = String::with_capacity(prompt.len());
    let mut token = String::new();
    let flush = |token: &mut String, out: &mut String| {
        if !token.is_empty() {
            if words.contains(&token.to_lowercase().as_str()) {
                let _ = write!(out, "[[{token}]]");
            } else {
                out.push_str(token);
            }
            token.clear();
        }
    };
    for c in prompt.chars() {
        if c.is_alphanumeric() {
            token.push(c);
        } else {
            flush(&mut token, &mut out);
            out.push(c);
        }
    }
    flush(&mut token, &mut out);
    out
}

fn qualitative_csv(cfg: &RunConfig, corpus: &Corpus, states: &[(Provenance, Metrics)]) -> Result<String> {
    let by_id: BTreeMap<&str, &McqaExample> = corpus.examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(QUALITATIVE_HEADER).expect("in-memory write");
    for (state, _) in states {
        let path = cfg.eval_dir(state).join("shortcuts.jsonl");
        let reports: Vec<ShortcutExampleReport> = read_jsonl(&path)?;
        for r in reports.iter().filter(|r| r.shortcut_cued).take(QUALITATIVE_PER_STATE) {
            let ex = by_id
                .get(r.example_id.as_str())
                .ok_or_else(|| Error::Integrity(format!("{}: unknown example {}", path.display(), r.example_id)))?;
            let prompt = render_prompt(ex);
            let matched: Vec<String> = r
                .matched
                .iter()
                .map(|m| format!("{} (attr {:.4}, lmi {:.4})", m.word, m.attribution, m.lmi))
                .collect();
            let words: Vec<&str> = r.matched.iter().map(|m| m.word.as_str()).collect();
            w.write_record([
                state.tag(),
                r.example_id.clone(),
                r.split.to_string(),
                prompt.clone(),
                ex.choices[r.predicted].clone(),
                ex.choices[r.label].clone(),
                matched.join("; "),
                highlight(&prompt, &words),
            ])
            .expect("in-memory write");
        }
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv"))
}

/// Writes report.csv, report.txt and qualitative.csv. Returns the report so
/// the caller can print it and its warnings.
pub fn cmd_report(cfg: &RunConfig) -> Result<Report> {
    let (report, found) = build_report(cfg)?;
    write_file(&cfg.out_dir.join("report.csv"), report.to_csv())?;
    write_file(&cfg.out_dir.join("report.txt"), report.to_text())?;
    let qualitative = if found.is_empty() {
        qualitative_csv(cfg, &Corpus::new(Vec::new(), cfg.corpus.n_choices, cfg.seed, None), &[])?
    } else {
        qualitative_csv(cfg, &load_corpus(cfg)?, &found)?
    };
    write_file(&cfg.out_dir.join("qualitative.csv"), qualitative)?;
    Ok(report)
}

/// gen, train, unlearn, eval and report in sequence.
pub fn cmd_run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    if cfg.corpus_path.is_none() {
        cmd_gen(cfg)?;
    }
    write_file(&cfg.out_dir.join("run_config.json"), cfg.to_json())?;
    cmd_train(cfg)?;
    cmd_unlearn(cfg)?;
    cmd_eval(cfg)?;
    cmd_report(cfg)
}
