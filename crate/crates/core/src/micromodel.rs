//! A tiny differentiable multiple-choice scorer.
//!
//! Each option is scored from the mean-pooled embeddings of
//! `question ++ option marker ++ option text`:
//!
//! * linear mode: `score = readout · meanpool(E)` (hidden is the identity)
//! * tanh mode:   `score = readout · tanh(hiddenᵀ · meanpool(E))`
//!
//! Option scores are normalized with a softmax. Gradients are computed in
//! closed form, both with respect to an arbitrary embedding matrix (for
//! attribution) and with respect to all parameters (for training).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{option_label, tokenize, Corpus, McqaExample};
use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Gathers the given rows into a new matrix.
    pub fn select_rows(&self, ids: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(ids.len(), self.cols);
        for (dst, &src) in ids.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// Column means.
    pub fn mean_rows(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        let n = self.rows as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Linear,
    Tanh,
}

/// Which training regime produced a set of parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Pretrained,
    Full,
    Retained,
    Unlearned(String),
}

impl Provenance {
    pub fn tag(&self) -> String {
        match self {
            Provenance::Pretrained => "pretrained".into(),
            Provenance::Full => "full".into(),
            Provenance::Retained => "retained".into(),
            Provenance::Unlearned(algo) => format!("unlearned-{algo}"),
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "pretrained" => Some(Provenance::Pretrained),
            "full" => Some(Provenance::Full),
            "retained" => Some(Provenance::Retained),
            _ => tag
                .strip_prefix("unlearned-")
                .filter(|algo| !algo.is_empty())
                .map(|algo| Provenance::Unlearned(algo.to_string())),
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.tag())
    }
}

impl Serialize for Provenance {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.tag())
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tag = String::deserialize(d)?;
        Provenance::parse(&tag).ok_or_else(|| serde::de::Error::custom(format!("unknown provenance {tag:?}")))
    }
}

pub const UNK: usize = 0;
const UNK_WORD: &str = "<unk>";

/// Word to embedding-row mapping. Row 0 is reserved for unknown words.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all = vec![UNK_WORD.to_string()];
        let mut index = HashMap::new();
        for w in words {
            let w = w.into();
            if w != UNK_WORD && !index.contains_key(&w) {
                index.insert(w.clone(), all.len());
                all.push(w);
            }
        }
        Self { words: all, index }
    }

    /// Corpus words plus the option markers, in sorted order.
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut words = corpus.vocab.clone();
        for k in 0..corpus.n_choices {
            words.extend(tokenize(&option_label(k)));
        }
        Self::new(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        // the UNK row is always present
        false
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Token ids of one example: the question followed by each option segment
/// (marker then text). Option `k` is scored from `question ++ options[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptEncoding {
    pub question: Vec<usize>,
    pub options: Vec<Vec<usize>>,
    pub question_words: Vec<String>,
    pub option_words: Vec<Vec<String>>,
}

impl PromptEncoding {
    pub fn new(vocab: &Vocab, example: &McqaExample) -> Self {
        let question_words = tokenize(&example.question);
        let option_words: Vec<Vec<String>> = example
            .choices
            .iter()
            .enumerate()
            .map(|(k, text)| {
                let mut words = tokenize(&option_label(k));
                words.extend(tokenize(text));
                words
            })
            .collect();
        let ids = |ws: &[String]| ws.iter().map(|w| vocab.id(w)).collect::<Vec<_>>();
        Self {
            question: ids(&question_words),
            options: option_words.iter().map(|ws| ids(ws)).collect(),
            question_words,
            option_words,
        }
    }

    pub fn n_choices(&self) -> usize {
        self.options.len()
    }

    pub fn choice_ids(&self, k: usize) -> Vec<usize> {
        let mut ids = self.question.clone();
        ids.extend_from_slice(&self.options[k]);
        ids
    }

    /// Full prompt: question followed by every option segment in order.
    pub fn prompt_ids(&self) -> Vec<usize> {
        let mut ids = self.question.clone();
        for opt in &self.options {
            ids.extend_from_slice(opt);
        }
        ids
    }

    pub fn prompt_words(&self) -> Vec<String> {
        let mut words = self.question_words.clone();
        for opt in &self.option_words {
            words.extend(opt.iter().cloned());
        }
        words
    }

    /// Positions in [`prompt_ids`](Self::prompt_ids) that feed option `k`.
    pub fn choice_positions(&self, k: usize) -> Vec<usize> {
        let q = self.question.len();
        let start = q + self.options[..k].iter().map(Vec::len).sum::<usize>();
        (0..q).chain(start..start + self.options[k].len()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub embeddings: Matrix,
    pub hidden: Matrix,
    pub readout: Vec<f64>,
    pub mode: Mode,
    pub provenance: Provenance,
}

impl ModelParams {
    /// Draws every trainable entry i.i.d. from uniform(-0.1, 0.1). In linear
    /// mode `h` must equal `d` and the hidden matrix is the identity.
    pub fn init(v: usize, d: usize, h: usize, mode: Mode, seed: u64) -> Result<Self> {
        if v == 0 || d == 0 || h == 0 {
            return Err(Error::Config(format!(
                "model dimensions must be positive (V={v}, d={d}, h={h})"
            )));
        }
        if mode == Mode::Linear && h != d {
            return Err(Error::Config(format!("linear mode needs h == d (d={d}, h={h})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect() };
        let embeddings = Matrix::from_vec(v, d, draw(v * d));
        let hidden = match mode {
            Mode::Linear => Matrix::identity(d),
            Mode::Tanh => Matrix::from_vec(d, h, draw(d * h)),
        };
        let readout = draw(h);
        Ok(Self {
            embeddings,
            hidden,
            readout,
            mode,
            provenance: Provenance::Pretrained,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.readout.len()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings.is_finite() && self.hidden.is_finite() && self.readout.iter().all(|x| x.is_finite())
    }

    fn check_input(&self, e: &Matrix) -> Result<()> {
        if e.rows() == 0 {
            return Err(Error::EmptyInput("embedding matrix has no rows"));
        }
        if e.cols() != self.dim() {
            return Err(Error::Contract(format!(
                "embedding width {} does not match model dimension {}",
                e.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Hidden activations for a pooled vector (the pooled vector itself in
    /// linear mode).
    fn activations(&self, pooled: &[f64]) -> Vec<f64> {
        match self.mode {
            Mode::Linear => pooled.to_vec(),
            Mode::Tanh => (0..self.hidden_dim())
                .map(|j| {
                    let z: f64 = pooled.iter().enumerate().map(|(i, p)| self.hidden.get(i, j) * p).sum();
                    z.tanh()
                })
                .collect(),
        }
    }

    /// `∂score/∂pooled`.
    fn pooled_gradient(&self, activations: &[f64]) -> Vec<f64> {
        match self.mode {
            Mode::Linear => self.readout.clone(),
            Mode::Tanh => {
                let dz: Vec<f64> = self
                    .readout
                    .iter()
                    .zip(activations)
                    .map(|(r, a)| r * (1.0 - a * a))
                    .collect();
                (0..self.dim())
                    .map(|i| self.hidden.row(i).iter().zip(&dz).map(|(h, g)| h * g).sum())
                    .collect()
            }
        }
    }

    fn score_pooled(&self, pooled: &[f64]) -> f64 {
        dot(&self.readout, &self.activations(pooled))
    }

    /// Scalar score of an `n × d` embedding matrix.
    pub fn score_from_embeddings(&self, e: &Matrix) -> Result<f64> {
        self.check_input(e)?;
        Ok(self.score_pooled(&e.mean_rows()))
    }

    /// Exact gradient of [`score_from_embeddings`](Self::score_from_embeddings)
    /// with respect to every entry of `e`. All rows are equal because of the
    /// mean pooling.
    pub fn grad_wrt_embeddings(&self, e: &Matrix) -> Result<Matrix> {
        self.check_input(e)?;
        let pooled = e.mean_rows();
        let g = self.pooled_gradient(&self.activations(&pooled));
        let n = e.rows() as f64;
        let mut out = Matrix::zeros(e.rows(), e.cols());
        for i in 0..e.rows() {
            for (o, gj) in out.row_mut(i).iter_mut().zip(&g) {
                *o = gj / n;
            }
        }
        Ok(out)
    }

    pub fn embed(&self, ids: &[usize]) -> Matrix {
        self.embeddings.select_rows(ids)
    }

    pub fn choice_scores(&self, enc: &PromptEncoding) -> Vec<f64> {
        (0..enc.n_choices())
            .map(|k| self.score_pooled(&self.embed(&enc.choice_ids(k)).mean_rows()))
            .collect()
    }

    pub fn predict_encoded(&self, enc: &PromptEncoding) -> Vec<f64> {
        softmax(&self.choice_scores(enc))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Parameters plus the vocabulary their embedding rows are indexed by.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub vocab: Vocab,
    pub params: ModelParams,
}

impl Model {
    pub fn init(vocab: Vocab, d: usize, h: usize, mode: Mode, seed: u64) -> Result<Self> {
        let params = ModelParams::init(vocab.len(), d, h, mode, seed)?;
        Ok(Self { vocab, params })
    }

    pub fn encode(&self, example: &McqaExample) -> PromptEncoding {
        PromptEncoding::new(&self.vocab, example)
    }

    /// Probability vector over the example's options.
    pub fn predict(&self, example: &McqaExample) -> Vec<f64> {
        self.params.predict_encoded(&self.encode(example))
    }

    pub fn with_params(&self, params: ModelParams) -> Self {
        Self {
            vocab: self.vocab.clone(),
            params,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let p = &self.params;
        Checkpoint {
            vocab_size: p.vocab_size(),
            dim: p.dim(),
            hidden_dim: p.hidden_dim(),
            mode: p.mode,
            provenance: p.provenance.clone(),
            vocab: self.vocab.words()[1..].to_vec(),
            embeddings: p.embeddings.as_slice().to_vec(),
            hidden: p.hidden.as_slice().to_vec(),
            readout: p.readout.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        ckpt.into_model()
    }
}

/// On-disk model: dimensions, provenance, vocabulary (without the UNK row)
/// and row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub vocab_size: usize,
    pub dim: usize,
    pub hidden_dim: usize,
    pub mode: Mode,
    pub provenance: Provenance,
    pub vocab: Vec<String>,
    pub embeddings: Vec<f64>,
    pub hidden: Vec<f64>,
    pub readout: Vec<f64>,
}

impl Checkpoint {
    pub fn into_model(self) -> Result<Model> {
        let (v, d, h) = (self.vocab_size, self.dim, self.hidden_dim);
        let bad = |what: &str| Error::Integrity(format!("checkpoint {what} has the wrong length"));
        if self.vocab.len() + 1 != v {
            return Err(bad("vocab"));
        }
        if self.embeddings.len() != v * d {
            return Err(bad("embeddings"));
        }
        if self.hidden.len() != d * h {
            return Err(bad("hidden"));
        }
        if self.readout.len() != h {
            return Err(bad("readout"));
        }
        let vocab = Vocab::new(self.vocab);
        if vocab.len() != v {
            return Err(Error::Integrity("checkpoint vocab has duplicates".into()));
        }
        let params = ModelParams {
            embeddings: Matrix::from_vec(v, d, self.embeddings),
            hidden: Matrix::from_vec(d, h, self.hidden),
            readout: self.readout,
            mode: self.mode,
            provenance: self.provenance,
        };
        if !params.is_finite() {
            return Err(Error::Integrity("checkpoint has non-finite weights".into()));
        }
        Ok(Model { vocab, params })
    }
}

/// One example prepared for gradient computation.
#[derive(Debug, Clone)]
pub struct EncodedExample {
    pub id: String,
    pub label: usize,
    pub choices: Vec<Vec<usize>>,
}

impl EncodedExample {
    pub fn new(vocab: &Vocab, example: &McqaExample) -> Self {
        let enc = PromptEncoding::new(vocab, example);
        Self {
            id: example.id.clone(),
            label: example.correct_index,
            choices: (0..enc.n_choices()).map(|k| enc.choice_ids(k)).collect(),
        }
    }
}

/// Gradients of a loss with respect to every parameter block.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub embeddings: Matrix,
    pub hidden: Matrix,
    pub readout: Vec<f64>,
}

impl ParamGrads {
    fn zeros_like(p: &ModelParams) -> Self {
        Self {
            embeddings: Matrix::zeros(p.embeddings.rows(), p.embeddings.cols()),
            hidden: Matrix::zeros(p.hidden.rows(), p.hidden.cols()),
            readout: vec![0.0; p.readout.len()],
        }
    }

    pub fn scale(&mut self, s: f64) {
        for block in [
            self.embeddings.as_mut_slice(),
            self.hidden.as_mut_slice(),
            self.readout.as_mut_slice(),
        ] {
            block.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &ParamGrads, scale: f64) {
        let pairs = [
            (self.embeddings.as_mut_slice(), other.embeddings.as_slice()),
            (self.hidden.as_mut_slice(), other.hidden.as_slice()),
            (self.readout.as_mut_slice(), other.readout.as_slice()),
        ];
        for (dst, src) in pairs {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += scale * s);
        }
    }
}

/// Mean cross-entropy `-log p(label)` over `data` and its gradient.
pub fn loss_and_grad(params: &ModelParams, data: &[EncodedExample]) -> Result<(f64, ParamGrads)> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training subset is empty"));
    }
    let mut grads = ParamGrads::zeros_like(params);
    let mut loss = 0.0;
    let scale = 1.0 / data.len() as f64;
    for ex in data {
        let pooled: Vec<Vec<f64>> = ex.choices.iter().map(|ids| params.embed(ids).mean_rows()).collect();
        let acts: Vec<Vec<f64>> = pooled.iter().map(|p| params.activations(p)).collect();
        let scores: Vec<f64> = acts.iter().map(|a| dot(&params.readout, a)).collect();
        let probs = softmax(&scores);
        loss -= probs[ex.label].ln() * scale;

        for (k, ids) in ex.choices.iter().enumerate() {
            let ds = (probs[k] - if k == ex.label { 1.0 } else { 0.0 }) * scale;
            if ds == 0.0 {
                continue;
            }
            let a = &acts[k];
            grads.readout.iter_mut().zip(a).for_each(|(g, a)| *g += ds * a);
            let dp = params.pooled_gradient(a);
            if params.mode == Mode::Tanh {
                for (i, p) in pooled[k].iter().enumerate() {
                    for (j, (r, aj)) in params.readout.iter().zip(a).enumerate() {
                        let dz = r * (1.0 - aj * aj);
                        let g = grads.hidden.get(i, j) + ds * p * dz;
                        grads.hidden.set(i, j, g);
                    }
                }
            }
            let per_row = ds / ids.len() as f64;
            for &id in ids {
                grads
                    .embeddings
                    .row_mut(id)
                    .iter_mut()
                    .zip(&dp)
                    .for_each(|(g, d)| *g += per_row * d);
            }
        }
    }
    Ok((loss, grads))
}

/// Mean cross-entropy without gradients.
pub fn mean_loss(params: &ModelParams, data: &[EncodedExample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation subset is empty"));
    }
    let total: f64 = data
        .iter()
        .map(|ex| {
            let scores: Vec<f64> = ex
                .choices
                .iter()
                .map(|ids| params.score_pooled(&params.embed(ids).mean_rows()))
                .collect();
            -softmax(&scores)[ex.label].ln()
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// Fraction of examples whose argmax option is the label.
pub fn accuracy(params: &ModelParams, data: &[EncodedExample]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .iter()
        .filter(|ex| {
            let scores: Vec<f64> = ex
                .choices
                .iter()
                .map(|ids| params.score_pooled(&params.embed(ids).mean_rows()))
                .collect();
            argmax(&scores) == ex.label
        })
        .count();
    hits as f64 / data.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, lr: 0.05 }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct AdamSlot {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamSlot {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], t: i32, lr: f64) {
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Bias-corrected Adam over every trainable block. The hidden matrix is
/// frozen in linear mode.
pub struct Adam {
    embeddings: AdamSlot,
    hidden: AdamSlot,
    readout: AdamSlot,
    t: i32,
}

impl Adam {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            embeddings: AdamSlot::new(params.embeddings.as_slice().len()),
            hidden: AdamSlot::new(params.hidden.as_slice().len()),
            readout: AdamSlot::new(params.readout.len()),
            t: 0,
        }
    }

    /// One step against `grads` (descent).
    pub fn step(&mut self, params: &mut ModelParams, grads: &ParamGrads, lr: f64) {
        self.t += 1;
        self.embeddings.step(
            params.embeddings.as_mut_slice(),
            grads.embeddings.as_slice(),
            self.t,
            lr,
        );
        if params.mode == Mode::Tanh {
            self.hidden
                .step(params.hidden.as_mut_slice(), grads.hidden.as_slice(), self.t, lr);
        }
        self.readout.step(&mut params.readout, &grads.readout, self.t, lr);
    }
}

/// Outcome of [`train`]: new parameters and the loss measured before each
/// epoch's update.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: ModelParams,
    pub losses: Vec<f64>,
}

/// Full-batch Adam on mean cross-entropy. Examples are visited in the given
/// order, so equal inputs give bit-identical outputs. The provenance of the
/// result is left for the caller to set.
pub fn train(params: &ModelParams, data: &[EncodedExample], cfg: TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training subset is empty"));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate {} must be finite and non-negative",
            cfg.lr
        )));
    }

    let mut p = params.clone();
    let mut adam = Adam::new(&p);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grads) = loss_and_grad(&p, data)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        losses.push(loss);
        adam.step(&mut p, &grads, cfg.lr);
    }
    Ok(TrainReport { params: p, losses })
}
