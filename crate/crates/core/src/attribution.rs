//! Integrated Gradients over input embeddings.
//!
//! Attributions use the right-endpoint Riemann sum
//!
//! ```text
//! IG = (X - X') ⊙ (1/m) Σ_{k=1..m} ∇F(X' + (k/m)(X - X'))
//! ```
//!
//! with a zero baseline. Token scores are row sums of the attribution matrix,
//! which keeps `Σ scores ≈ F(X) - F(X')` checkable.

use serde::{Deserialize, Serialize};

use crate::corpus::McqaExample;
use crate::error::{Error, Result};
use crate::micromodel::{argmax, Matrix, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    Zero,
}

/// Which prompt tokens are attributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionSurface {
    /// Question followed by every option; rows that do not feed the target
    /// option receive exactly zero attribution.
    #[default]
    FullPrompt,
    /// Question followed by the target option only.
    QuestionAndTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IgConfig {
    pub steps: usize,
    pub baseline: Baseline,
    pub top_k: usize,
    pub surface: AttributionSurface,
}

impl Default for IgConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            baseline: Baseline::Zero,
            top_k: 10,
            surface: AttributionSurface::FullPrompt,
        }
    }
}

impl IgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.top_k == 0 {
            return Err(Error::Config("IG steps and top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Riemann-sum Integrated Gradients of the function whose gradient is
/// `grad`, from `baseline` to `input`. Gradients are accumulated in step
/// order so results are bit-stable.
pub fn integrated_gradients<G>(grad: G, input: &Matrix, baseline: &Matrix, steps: usize) -> Result<Matrix>
where
    G: Fn(&Matrix) -> Result<Matrix>,
{
    if input.shape() != baseline.shape() {
        return Err(Error::Contract(format!(
            "input shape {:?} differs from baseline shape {:?}",
            input.shape(),
            baseline.shape()
        )));
    }
    if steps == 0 {
        return Err(Error::Config("IG needs at least one step".into()));
    }
    let (rows, cols) = input.shape();
    let delta: Vec<f64> = input
        .as_slice()
        .iter()
        .zip(baseline.as_slice())
        .map(|(x, b)| x - b)
        .collect();
    let mut total = vec![0.0; rows * cols];
    let mut point = Matrix::zeros(rows, cols);
    for k in 1..=steps {
        let alpha = k as f64 / steps as f64;
        for ((p, b), d) in point.as_mut_slice().iter_mut().zip(baseline.as_slice()).zip(&delta) {
            *p = b + alpha * d;
        }
        let g = grad(&point)?;
        if g.shape() != (rows, cols) {
            return Err(Error::Contract("gradient shape differs from input shape".into()));
        }
        if !g.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient at step {k}")));
        }
        total.iter_mut().zip(g.as_slice()).for_each(|(t, gi)| *t += gi);
    }
    let m = steps as f64;
    let data = total.iter().zip(&delta).map(|(t, d)| d * (t / m)).collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

/// Sums each row over the embedding dimensions.
pub fn per_token_scores(ig: &Matrix) -> Vec<f64> {
    (0..ig.rows()).map(|i| ig.row(i).iter().sum()).collect()
}

/// Collapses subword scores to word scores, keeping for each word the signed
/// score of largest magnitude (the earliest subword on ties). Words appear
/// in order of first occurrence.
pub fn absmax_word_aggregate(subwords: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for &(word, score) in subwords {
        match out.iter_mut().find(|(w, _)| *w == word) {
            Some(entry) => {
                if score.abs() > entry.1.abs() {
                    entry.1 = score;
                }
            }
            None => out.push((word, score)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScore {
    pub word: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub example_id: String,
    pub target_choice: usize,
    pub tokens: Vec<TokenScore>,
    pub top_tokens: Vec<String>,
    pub completeness_gap: f64,
}

impl AttributionRecord {
    /// Largest attribution among the occurrences of `word`.
    pub fn score_of(&self, word: &str) -> Option<f64> {
        self.tokens
            .iter()
            .filter(|t| t.word == word)
            .map(|t| t.score)
            .reduce(f64::max)
    }

    pub fn attribution_sum(&self) -> f64 {
        self.tokens.iter().map(|t| t.score).sum()
    }
}

/// Indices of the `k` largest scores, descending; earlier positions win ties.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Attributes the predicted option's score to the prompt tokens.
pub fn attribute_example(model: &Model, example: &McqaExample, cfg: &IgConfig) -> Result<AttributionRecord> {
    cfg.validate()?;
    let params = &model.params;
    let enc = model.encode(example);
    let target = argmax(&params.choice_scores(&enc));

    let (ids, words, feeding) = match cfg.surface {
        AttributionSurface::FullPrompt => (enc.prompt_ids(), enc.prompt_words(), enc.choice_positions(target)),
        AttributionSurface::QuestionAndTarget => {
            let mut words = enc.question_words.clone();
            words.extend(enc.option_words[target].iter().cloned());
            let ids = enc.choice_ids(target);
            let all = (0..ids.len()).collect();
            (ids, words, all)
        }
    };

    let input = params.embed(&ids);
    let baseline = match cfg.baseline {
        Baseline::Zero => Matrix::zeros(input.rows(), input.cols()),
    };
    let score = |x: &Matrix| params.score_from_embeddings(&x.select_rows(&feeding));
    let grad = |x: &Matrix| -> Result<Matrix> {
        let g = params.grad_wrt_embeddings(&x.select_rows(&feeding))?;
        let mut full = Matrix::zeros(x.rows(), x.cols());
        for (src, &dst) in feeding.iter().enumerate() {
            full.row_mut(dst).copy_from_slice(g.row(src));
        }
        Ok(full)
    };

    let ig = integrated_gradients(grad, &input, &baseline, cfg.steps)?;
    let token_scores = per_token_scores(&ig);
    // one token per word with the word-level tokenizer
    let subwords: Vec<(usize, f64)> = token_scores.iter().copied().enumerate().collect();
    let word_scores = absmax_word_aggregate(&subwords);
    let tokens: Vec<TokenScore> = word_scores
        .iter()
        .map(|&(pos, score)| TokenScore {
            word: words[pos].clone(),
            score,
        })
        .collect();
    let scores: Vec<f64> = tokens.iter().map(|t| t.score).collect();
    let top_tokens = top_k_indices(&scores, cfg.top_k)
        .into_iter()
        .map(|i| tokens[i].word.clone())
        .collect();

    let total: f64 = scores.iter().sum();
    let gap = (total - (score(&input)? - score(&baseline)?)).abs();
    Ok(AttributionRecord {
        example_id: example.id.clone(),
        target_choice: target,
        tokens,
        top_tokens,
        completeness_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::micromodel::{Mode, Vocab};

    #[test]
    fn scalar_quadratic_probe_pins_right_endpoint_sum() {
        // F(e) = e^2 from 0 to 1: (1/m) Σ 2k/m = (m+1)/m
        let grad = |x: &Matrix| Ok(x.scale(2.0));
        let one = Matrix::from_vec(1, 1, vec![1.0]);
        let zero = Matrix::zeros(1, 1);
        for m in [1usize, 2, 50] {
            let ig = integrated_gradients(grad, &one, &zero, m).unwrap();
            let expected = (m as f64 + 1.0) / m as f64;
            assert!((ig.get(0, 0) - expected).abs() < 1e-12, "m={m}: {}", ig.get(0, 0));
        }
    }

    #[test]
    fn zero_path_gives_zero() {
        let x = Matrix::from_vec(2, 2, vec![0.3, -0.1, 0.2, 0.5]);
        let ig = integrated_gradients(|x: &Matrix| Ok(x.scale(3.0)), &x, &x, 7).unwrap();
        assert!(ig.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shape_mismatch_and_bad_gradients() {
        let x = Matrix::zeros(2, 2);
        let y = Matrix::zeros(3, 2);
        let grad = |x: &Matrix| Ok(x.clone());
        assert!(matches!(integrated_gradients(grad, &x, &y, 5), Err(Error::Contract(_))));
        let nan = |x: &Matrix| Ok(x.scale(f64::NAN));
        let x1 = Matrix::from_vec(1, 1, vec![1.0]);
        assert!(matches!(
            integrated_gradients(nan, &x1, &Matrix::zeros(1, 1), 3),
            Err(Error::Numeric(_))
        ));
        assert!(integrated_gradients(grad, &x, &x, 0).is_err());
    }

    #[test]
    fn token_scores_sum_rows() {
        let m = Matrix::from_rows(&[vec![0.1, -0.2, 0.4]]);
        assert!((per_token_scores(&m)[0] - 0.3).abs() < 1e-15);
        assert_eq!(per_token_scores(&Matrix::zeros(3, 2)), [0.0; 3]);
    }

    #[test]
    fn absmax_keeps_sign_and_earliest() {
        assert_eq!(absmax_word_aggregate(&[(0, 0.2), (0, -0.5)]), [(0, -0.5)]);
        assert_eq!(
            absmax_word_aggregate(&[(0, 0.1), (1, -0.3), (2, 0.7)]),
            [(0, 0.1), (1, -0.3), (2, 0.7)]
        );
        assert_eq!(absmax_word_aggregate(&[(0, 0.4), (0, -0.4)]), [(0, 0.4)]);
        assert_eq!(
            absmax_word_aggregate(&[(1, 0.1), (0, 0.2), (1, -0.6)]),
            [(1, -0.6), (0, 0.2)]
        );
    }

    #[test]
    fn top_k_order_and_ties() {
        assert_eq!(top_k_indices(&[0.1, 0.5, 0.5, -1.0], 3), [1, 2, 0]);
        assert_eq!(top_k_indices(&[0.1], 10), [0]);
    }

    fn toy() -> (Model, McqaExample) {
        let ex = McqaExample {
            id: "e1".into(),
            author_id: "a".into(),
            question: "Where was the author Tobi Rask born?".into(),
            choices: vec!["Lumen".into(), "Varo".into(), "Kesti".into(), "Pallo".into()],
            correct_index: 2,
            split: Split::Retain,
        };
        let vocab = Vocab::new([
            "where", "was", "the", "author", "tobi", "rask", "born", "lumen", "varo", "kesti", "pallo", "a", "b", "c",
            "d",
        ]);
        (Model::init(vocab, 6, 5, Mode::Tanh, 11).unwrap(), ex)
    }

    #[test]
    fn record_shape() {
        let (model, ex) = toy();
        let rec = attribute_example(&model, &ex, &IgConfig::default()).unwrap();
        assert_eq!(rec.tokens.len(), 7 + 4 * 2);
        assert_eq!(rec.top_tokens.len(), 10);
        assert_eq!(rec.target_choice, argmax(&model.predict(&ex)));
        // rows of non-target options carry no attribution
        let enc = model.encode(&ex);
        let feeding = enc.choice_positions(rec.target_choice);
        for (i, t) in rec.tokens.iter().enumerate() {
            if !feeding.contains(&i) {
                assert_eq!(t.score, 0.0);
            }
        }
        let again = attribute_example(&model, &ex, &IgConfig::default()).unwrap();
        assert_eq!(rec, again);
    }

    #[test]
    fn narrow_surface_and_small_prompts() {
        let (model, ex) = toy();
        let cfg = IgConfig {
            surface: AttributionSurface::QuestionAndTarget,
            top_k: 20,
            ..IgConfig::default()
        };
        let rec = attribute_example(&model, &ex, &cfg).unwrap();
        assert_eq!(rec.tokens.len(), 9);
        assert_eq!(rec.top_tokens.len(), 9);
    }

    #[test]
    fn convergence_with_steps() {
        let (model, ex) = toy();
        let coarse = attribute_example(
            &model,
            &ex,
            &IgConfig {
                steps: 50,
                ..IgConfig::default()
            },
        )
        .unwrap();
        let fine = attribute_example(
            &model,
            &ex,
            &IgConfig {
                steps: 500,
                ..IgConfig::default()
            },
        )
        .unwrap();
        assert!(fine.completeness_gap < coarse.completeness_gap);
    }
}
