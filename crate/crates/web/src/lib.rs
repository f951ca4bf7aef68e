//! Browser demo bindings. Every export returns a JSON string; failures come
//! back as `{"error": "..."}` so the page can show them inline.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use unrel::attribution::{attribute_example, IgConfig};
use unrel::calibration::{self, sample_source, CalibrationBin};
use unrel::corpus::{cue_word, generate, Corpus, GenConfig};
use unrel::micromodel::{accuracy, EncodedExample, Mode, Model, TrainConfig, Vocab};
use unrel::shortcut::{classify_prediction, p_sc, select_shortcut_words, LmiTable, SelectionScope};
use unrel::unlearn::finetune_full;

const N_CHOICES: usize = 4;
pub const IG_STEPS: [usize; 9] = [1, 2, 5, 10, 20, 50, 100, 200, 500];

fn to_json<T: Serialize>(result: unrel::Result<T>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).expect("demo output serializes"),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

#[derive(Serialize)]
pub struct Reliability {
    pub bins: Vec<CalibrationBin>,
    pub ece: f64,
    pub mce: f64,
    pub brier: f64,
}

/// Reliability diagram of `n` synthetic predictions. Each is correct with
/// probability `confidence ^ sharpness`, so 1 is calibrated and larger
/// values are overconfident.
pub fn reliability(n: usize, n_bins: usize, sharpness: f64, seed: u64) -> unrel::Result<Reliability> {
    if n == 0 || sharpness.is_nan() || sharpness <= 0.0 {
        return Err(unrel::Error::Config("need n > 0 and sharpness > 0".into()));
    }
    let records = sample_source(n, N_CHOICES, seed, |c| c.powf(sharpness));
    let report = calibration::report(&records, n_bins)?;
    Ok(Reliability {
        bins: report.bins,
        ece: report.ece,
        mce: report.mce,
        brier: calibration::brier(&records)?,
    })
}

#[wasm_bindgen(js_name = reliability)]
pub fn reliability_json(n: u32, n_bins: u32, sharpness: f64, seed: u32) -> String {
    to_json(reliability(n as usize, n_bins as usize, sharpness, seed.into()))
}

fn small_corpus(n_authors: usize, rate: f64, seed: u64) -> unrel::Result<Corpus> {
    generate(&GenConfig {
        n_authors,
        vocab_size: 600,
        shortcut_rate: rate,
        seed,
        ..GenConfig::default()
    })
}

fn fit(corpus: &Corpus, seed: u64) -> unrel::Result<Model> {
    let pre = Model::init(Vocab::from_corpus(corpus), 8, 8, Mode::Tanh, seed)?;
    Ok(finetune_full(&pre, corpus, TrainConfig { epochs: 300, lr: 0.02 })?.model)
}

#[derive(Serialize)]
pub struct GapPoint {
    pub steps: usize,
    pub gap: f64,
}

#[derive(Serialize)]
pub struct Convergence {
    pub question: String,
    pub choices: Vec<String>,
    pub target: usize,
    pub gaps: Vec<GapPoint>,
    pub words: Vec<String>,
    pub scores: Vec<f64>,
    pub top_tokens: Vec<String>,
}

/// A trained toy model kept alive between calls so the page can query
/// attributions interactively.
#[wasm_bindgen]
pub struct IgDemo {
    corpus: Corpus,
    model: Model,
}

impl IgDemo {
    pub fn build(seed: u64) -> unrel::Result<Self> {
        let corpus = small_corpus(12, 0.5, seed)?;
        let model = fit(&corpus, seed)?;
        Ok(Self { corpus, model })
    }

    /// Completeness gap per step count, plus the token scores at `steps`.
    pub fn convergence(&self, index: usize, steps: usize) -> unrel::Result<Convergence> {
        let ex = self
            .corpus
            .examples
            .get(index)
            .ok_or_else(|| unrel::Error::Config(format!("no example {index}")))?;
        let gaps = IG_STEPS
            .iter()
            .map(|&m| {
                let r = attribute_example(
                    &self.model,
                    ex,
                    &IgConfig {
                        steps: m,
                        ..IgConfig::default()
                    },
                )?;
                Ok(GapPoint {
                    steps: m,
                    gap: r.completeness_gap,
                })
            })
            .collect::<unrel::Result<_>>()?;
        let record = attribute_example(
            &self.model,
            ex,
            &IgConfig {
                steps,
                ..IgConfig::default()
            },
        )?;
        Ok(Convergence {
            question: ex.question.clone(),
            choices: ex.choices.clone(),
            target: record.target_choice,
            gaps,
            words: record.tokens.iter().map(|t| t.word.clone()).collect(),
            scores: record.tokens.iter().map(|t| t.score).collect(),
            top_tokens: record.top_tokens,
        })
    }
}

#[wasm_bindgen]
impl IgDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<IgDemo, JsError> {
        IgDemo::build(seed.into()).map_err(|e| JsError::new(&e.to_string()))
    }

    #[wasm_bindgen(js_name = exampleCount)]
    pub fn example_count(&self) -> u32 {
        self.corpus.examples.len() as u32
    }

    #[wasm_bindgen(js_name = convergence)]
    pub fn convergence_json(&self, index: u32, steps: u32) -> String {
        to_json(self.convergence(index as usize, steps as usize))
    }
}

#[derive(Serialize)]
pub struct ShortcutProbe {
    pub rate: f64,
    pub accuracy: f64,
    pub p_sc: f64,
    /// Selected shortcut words per label.
    pub sets: Vec<Vec<String>>,
    /// Per label, whether its planted cue was selected.
    pub cue_selected: Vec<bool>,
}

/// Plants label cues at `rate`, trains, and measures the share of
/// shortcut-cued predictions.
pub fn planted_shortcut(rate: f64, seed: u64) -> unrel::Result<ShortcutProbe> {
    let corpus = small_corpus(20, rate, seed)?;
    let model = fit(&corpus, seed)?;
    let data: Vec<_> = corpus
        .examples
        .iter()
        .map(|e| EncodedExample::new(&model.vocab, e))
        .collect();
    let table = LmiTable::compute(&corpus.examples, N_CHOICES)?;
    let sets = select_shortcut_words(&table, 0.05, SelectionScope::PerLabel)?;
    let flags = corpus
        .examples
        .iter()
        .map(|e| {
            Ok(classify_prediction(&attribute_example(&model, e, &IgConfig::default())?, &sets, &table)?.shortcut_cued)
        })
        .collect::<unrel::Result<Vec<bool>>>()?;
    Ok(ShortcutProbe {
        rate,
        accuracy: accuracy(&model.params, &data),
        p_sc: p_sc(&flags)?,
        cue_selected: (0..N_CHOICES).map(|y| sets.contains(y, &cue_word(y))).collect(),
        sets: sets.sets.iter().map(|s| s.iter().cloned().collect()).collect(),
    })
}

#[wasm_bindgen(js_name = plantedShortcut)]
pub fn planted_shortcut_json(rate: f64, seed: u32) -> String {
    to_json(planted_shortcut(rate, seed.into()))
}
