//! Model states of the unlearning pipeline: full fine-tuning, retraining on
//! the retain split, and approximate unlearning by gradient ascent and
//! gradient difference.
//!
//! Every operation reads its examples through an [`AccessLog`], so tests and
//! the CLI can verify which examples a state was derived from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, McqaExample, Split};
use crate::error::{Error, Result};
use crate::micromodel::{loss_and_grad, train, Adam, EncodedExample, Model, Provenance, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GradAscent,
    GradDiff,
    RetrainRetained,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::GradAscent => "grad_ascent",
            Algorithm::GradDiff => "grad_diff",
            Algorithm::RetrainRetained => "retrain_retained",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnlearnConfig {
    pub algorithm: Algorithm,
    pub steps: usize,
    pub lr: f64,
    /// Weight of the retain loss in gradient difference.
    pub retain_weight: f64,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::GradAscent,
            steps: 30,
            lr: 0.05,
            retain_weight: 1.0,
        }
    }
}

impl UnlearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("unlearning needs at least one step".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("unlearning lr {} must be positive", self.lr)));
        }
        if !(self.retain_weight >= 0.0 && self.retain_weight.is_finite()) {
            return Err(Error::Config(format!(
                "retain weight {} must be finite and non-negative",
                self.retain_weight
            )));
        }
        Ok(())
    }
}

/// Records every example id an operation encoded for gradient computation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessLog {
    pub reads: BTreeMap<String, usize>,
}

impl AccessLog {
    pub fn encode<'a, I>(&mut self, model: &Model, examples: I) -> Vec<EncodedExample>
    where
        I: IntoIterator<Item = &'a McqaExample>,
    {
        examples
            .into_iter()
            .map(|ex| {
                *self.reads.entry(ex.id.clone()).or_default() += 1;
                EncodedExample::new(&model.vocab, ex)
            })
            .collect()
    }

    pub fn touched(&self, id: &str) -> bool {
        self.reads.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub model: Model,
    pub access: AccessLog,
    /// Per-step (or per-epoch) objective values, measured before each update.
    pub losses: Vec<f64>,
}

fn fit(pretrained: &Model, examples: &[&McqaExample], cfg: TrainConfig, provenance: Provenance) -> Result<Outcome> {
    let mut access = AccessLog::default();
    let data = access.encode(pretrained, examples.iter().copied());
    let report = train(&pretrained.params, &data, cfg)?;
    Ok(Outcome {
        model: pretrained.with_params(report.params.with_provenance(provenance)),
        access,
        losses: report.losses,
    })
}

/// Fine-tunes on forget ∪ retain.
pub fn finetune_full(pretrained: &Model, corpus: &Corpus, cfg: TrainConfig) -> Result<Outcome> {
    let all: Vec<&McqaExample> = corpus.examples.iter().collect();
    if all.is_empty() {
        return Err(Error::EmptyInput("corpus is empty"));
    }
    fit(pretrained, &all, cfg, Provenance::Full)
}

/// Trains from the pretrained weights on the retain split only.
pub fn retrain_retained(pretrained: &Model, corpus: &Corpus, cfg: TrainConfig) -> Result<Outcome> {
    let retain = corpus.split(Split::Retain);
    if retain.is_empty() {
        return Err(Error::Config("retain split is empty".into()));
    }
    fit(pretrained, &retain, cfg, Provenance::Retained)
}

/// Full-batch Adam steps that increase the forget-set cross-entropy.
pub fn gradient_ascent(full: &Model, forget: &[&McqaExample], cfg: &UnlearnConfig) -> Result<Outcome> {
    cfg.validate()?;
    if forget.is_empty() {
        return Err(Error::EmptyInput("forget subset is empty"));
    }
    let mut access = AccessLog::default();
    let data = access.encode(full, forget.iter().copied());
    let mut params = full.params.clone();
    let mut adam = Adam::new(&params);
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (loss, mut grad) = loss_and_grad(&params, &data)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch: step, loss });
        }
        losses.push(loss);
        grad.scale(-1.0);
        adam.step(&mut params, &grad, cfg.lr);
    }
    Ok(Outcome {
        model: full.with_params(params.with_provenance(Provenance::Unlearned(Algorithm::GradAscent.name().into()))),
        access,
        losses,
    })
}

/// Full-batch Adam descent on `-CE(forget) + λ·CE(retain)`.
///
/// With `λ = 0` the update sequence is bit-identical to [`gradient_ascent`]
/// (only the provenance differs).
pub fn gradient_difference(
    full: &Model,
    forget: &[&McqaExample],
    retain: &[&McqaExample],
    cfg: &UnlearnConfig,
) -> Result<Outcome> {
    cfg.validate()?;
    if forget.is_empty() || retain.is_empty() {
        return Err(Error::EmptyInput(
            "gradient difference needs forget and retain examples",
        ));
    }
    let mut access = AccessLog::default();
    let forget_data = access.encode(full, forget.iter().copied());
    let retain_data = access.encode(full, retain.iter().copied());
    let lambda = cfg.retain_weight;
    let mut params = full.params.clone();
    let mut adam = Adam::new(&params);
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (forget_loss, mut grad) = loss_and_grad(&params, &forget_data)?;
        let (retain_loss, retain_grad) = loss_and_grad(&params, &retain_data)?;
        let objective = -forget_loss + lambda * retain_loss;
        if !forget_loss.is_finite() || !retain_loss.is_finite() {
            return Err(Error::Divergence {
                epoch: step,
                loss: objective,
            });
        }
        losses.push(objective);
        grad.scale(-1.0);
        if lambda != 0.0 {
            grad.add_scaled(&retain_grad, lambda);
        }
        adam.step(&mut params, &grad, cfg.lr);
    }
    Ok(Outcome {
        model: full.with_params(params.with_provenance(Provenance::Unlearned(Algorithm::GradDiff.name().into()))),
        access,
        losses,
    })
}

/// Runs the algorithm named in `cfg`. `retrain_retained` ignores `full` and
/// trains from `pretrained` with `train_cfg`.
pub fn run(
    cfg: &UnlearnConfig,
    pretrained: &Model,
    full: &Model,
    corpus: &Corpus,
    train_cfg: TrainConfig,
) -> Result<Outcome> {
    let forget = corpus.split(Split::Forget);
    let retain = corpus.split(Split::Retain);
    match cfg.algorithm {
        Algorithm::GradAscent => gradient_ascent(full, &forget, cfg),
        Algorithm::GradDiff => gradient_difference(full, &forget, &retain, cfg),
        Algorithm::RetrainRetained => retrain_retained(pretrained, corpus, train_cfg),
    }
}
