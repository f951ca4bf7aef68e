//! Acceptance suite. Prints one PASS/FAIL line per criterion with its
//! runtime and budget, then exits non-zero if any criterion outside
//! `KNOWN_UNATTAINABLE` fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unrel::attribution::{attribute_example, integrated_gradients, IgConfig};
use unrel::calibration::{self, sample_calibrated, PredictionRecord};
use unrel::corpus::{cue_word, generate, tokenize, Corpus, GenConfig, McqaExample, Split};
use unrel::micromodel::{accuracy, EncodedExample, Matrix, Mode, Model, ModelParams, TrainConfig, Vocab};
use unrel::pipeline::{self, RunConfig};
use unrel::shortcut::{classify_prediction, p_sc, select_shortcut_words, LmiTable, SelectionScope};
use unrel::unlearn::{finetune_full, gradient_ascent, gradient_difference, Algorithm, UnlearnConfig};

/// Criteria that cannot hold as stated; they run and report FAIL without
/// failing the target. Criterion 9: the printed T_SC values of the 10%
/// block are not F1 / P_SC (see README).
const KNOWN_UNATTAINABLE: &[u32] = &[9];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn record(probs: Vec<f64>, label: usize) -> PredictionRecord {
    PredictionRecord::new("r", probs, label, Split::Retain)
}

fn c1_calibration_exactness() -> Verdict {
    let two = [record(vec![1.0, 0.0], 0), record(vec![1.0, 0.0], 1)];
    let ece = calibration::ece(&two, 10).unwrap();
    let mce = calibration::mce(&two, 10).unwrap();
    let uniform: Vec<_> = (0..4).map(|y| record(vec![0.25; 4], y)).collect();
    let brier = calibration::brier(&uniform).unwrap();
    let ok = (ece - 0.5).abs() < 1e-12 && (mce - 0.5).abs() < 1e-12 && (brier - 0.75).abs() < 1e-12;
    verdict(ok, format!("ece {ece} mce {mce} uniform brier {brier}"))
}

fn c2_calibrated_source() -> Verdict {
    let records = sample_calibrated(10_000, 4, 7);
    let ece = calibration::ece(&records, 10).unwrap();
    let bins = calibration::bin(&records, 10).unwrap();
    let worst = bins
        .iter()
        .filter(|b| b.count >= 100)
        .map(|b| b.gap())
        .fold(0.0, f64::max);
    verdict(
        ece < 0.02 && worst < 0.05,
        format!("ece {ece:.4}, worst populated-bin gap {worst:.4}"),
    )
}

fn c3_bin_sensitivity() -> Verdict {
    let seeds = 20;
    let (mut small10, mut small100) = (0.0, 0.0);
    for seed in 0..seeds {
        let r = sample_calibrated(40, 4, 1000 + seed);
        small10 += calibration::ece(&r, 10).unwrap() / seeds as f64;
        small100 += calibration::ece(&r, 100).unwrap() / seeds as f64;
    }
    let large = sample_calibrated(10_000, 4, 99);
    let base = calibration::ece(&large, 10).unwrap();
    let d20 = (calibration::ece(&large, 20).unwrap() - base).abs();
    let d33 = (calibration::ece(&large, 33).unwrap() - base).abs();
    verdict(
        small100 >= small10 && d20 < 0.01 && d33 < 0.01,
        format!("N=40 mean ece M=10 {small10:.4} M=100 {small100:.4}; N=10000 |d20| {d20:.4} |d33| {d33:.4}"),
    )
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data)
}

fn scaled_params(v: usize, d: usize, h: usize, mode: Mode, seed: u64, scale: f64) -> ModelParams {
    let mut p = ModelParams::init(v, d, h, mode, seed).unwrap();
    p.embeddings.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
    if mode == Mode::Tanh {
        p.hidden.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
    }
    p.readout.iter_mut().for_each(|x| *x *= scale);
    p
}

fn c4_ig_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut linear_err: f64 = 0.0;
    for case in 0..20 {
        let (n, d) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let params = scaled_params(5, d, d, Mode::Linear, case, 10.0);
        let e = random_matrix(&mut rng, n, d, 1.0);
        let zero = Matrix::zeros(n, d);
        for m in [1, 5, 50] {
            let ig = integrated_gradients(|x| params.grad_wrt_embeddings(x), &e, &zero, m).unwrap();
            for i in 0..n {
                for j in 0..d {
                    let closed = params.readout[j] / n as f64 * e.get(i, j);
                    linear_err = linear_err.max((ig.get(i, j) - closed).abs());
                }
            }
        }
    }

    let one = Matrix::from_vec(1, 1, vec![1.0]);
    let quad = integrated_gradients(
        |x| Ok(Matrix::from_vec(1, 1, vec![2.0 * x.get(0, 0)])),
        &one,
        &Matrix::zeros(1, 1),
        50,
    )
    .unwrap()
    .get(0, 0);

    // 50 random examples, attributed with the planted-shortcut experiment model
    let (corpus, model) = shortcut_model(GenConfig::default().shortcut_rate, 0);
    let f0 = model
        .params
        .score_from_embeddings(&Matrix::zeros(1, model.params.dim()))
        .unwrap();
    let mut worst_rel: f64 = 0.0;
    let mut not_shrinking = 0;
    for i in rand::seq::index::sample(&mut rng, corpus.len(), 50) {
        let ex = &corpus.examples[i];
        let fine = attribute_example(
            &model,
            ex,
            &IgConfig {
                steps: 500,
                ..IgConfig::default()
            },
        )
        .unwrap();
        let coarse = attribute_example(&model, ex, &IgConfig::default()).unwrap();
        let fx = model.params.choice_scores(&model.encode(ex))[fine.target_choice];
        worst_rel = worst_rel.max(fine.completeness_gap / (fx - f0).abs());
        if fine.completeness_gap >= coarse.completeness_gap {
            not_shrinking += 1;
        }
    }
    verdict(
        linear_err < 1e-12 && (quad - 1.02).abs() < 1e-12 && worst_rel < 1e-3 && not_shrinking == 0,
        format!(
            "linear max err {linear_err:.1e}; quadratic probe {quad}; tanh worst rel gap {worst_rel:.1e}, \
             examples where gap(500) >= gap(50): {not_shrinking}"
        ),
    )
}

fn c5_gradient_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let cases = 120;
    for case in 0..cases {
        let (n, d, hid) = (rng.gen_range(1..7), rng.gen_range(1..7), rng.gen_range(1..7));
        let params = scaled_params(4, d, hid, Mode::Tanh, case, 10.0);
        let e = random_matrix(&mut rng, n, d, 1.0);
        let analytic = params.grad_wrt_embeddings(&e).unwrap();
        for i in 0..n {
            for j in 0..d {
                let mut plus = e.clone();
                plus.set(i, j, e.get(i, j) + h);
                let mut minus = e.clone();
                minus.set(i, j, e.get(i, j) - h);
                let fd = (params.score_from_embeddings(&plus).unwrap() - params.score_from_embeddings(&minus).unwrap())
                    / (2.0 * h);
                let a = analytic.get(i, j);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    verdict(
        worst < 1e-5,
        format!("{cases} cases, worst elementwise relative error {worst:.2e}"),
    )
}

fn example(id: usize, question: &str, answer: &str, label: usize) -> McqaExample {
    let mut choices = vec!["filler".to_string(); 4];
    choices[label] = answer.to_string();
    McqaExample {
        id: format!("x{id:04}"),
        author_id: format!("a{id:04}"),
        question: question.to_string(),
        choices,
        correct_index: label,
        split: Split::Retain,
    }
}

/// Naive recount: for each label and each word, scan every example.
fn brute_force_check(examples: &[McqaExample], k: usize) -> Result<(), String> {
    let table = LmiTable::compute(examples, k).unwrap();
    let n = examples.len();
    let word_sets: Vec<Vec<String>> = examples
        .iter()
        .map(|e| {
            let mut w = tokenize(&e.question);
            w.extend(tokenize(&e.choices[e.correct_index]));
            w
        })
        .collect();
    let vocab: BTreeSet<&String> = word_sets.iter().flatten().collect();
    for y in 0..k {
        let n_y = examples.iter().filter(|e| e.correct_index == y).count();
        if table.label_counts[y] != n_y {
            return Err(format!("label {y} count differs"));
        }
        for w in &vocab {
            let mut joint = 0;
            let mut word = 0;
            for (e, words) in examples.iter().zip(&word_sets) {
                if words.contains(w) {
                    word += 1;
                    if e.correct_index == y {
                        joint += 1;
                    }
                }
            }
            if table.word_counts[*w] != word || table.joint_counts[*w][y] != joint {
                return Err(format!("counts differ for ({w}, {y})"));
            }
            let expected = if joint == 0 {
                0.0
            } else {
                let p_wy = joint as f64 / n as f64;
                p_wy * ((joint as f64 / word as f64) / (n_y as f64 / n as f64)).ln()
            };
            let got = table.score(w, y);
            if (got - expected).abs() > 1e-12 * expected.abs().max(1.0) {
                return Err(format!("lmi differs for ({w}, {y}): {got} vs {expected}"));
            }
        }
    }
    Ok(())
}

fn c6_lmi_oracle() -> Verdict {
    let mut problems = Vec::new();
    for (seed, (authors, rate)) in [(25, 0.5), (125, 0.2), (60, 1.0)].into_iter().enumerate() {
        let corpus = generate(&GenConfig {
            n_authors: authors,
            shortcut_rate: rate,
            seed: seed as u64,
            ..GenConfig::default()
        })
        .unwrap();
        assert!(corpus.len() <= 500);
        if let Err(e) = brute_force_check(&corpus.examples, 4) {
            problems.push(e);
        }
    }

    // labels 0/1/2 in ratio 3:2:1, word "even" present in the same ratio
    let mut indep = Vec::new();
    for (i, &(label, with)) in [(0, 3), (1, 2), (2, 1)]
        .iter()
        .flat_map(|&(y, w)| (0..2 * w).map(move |j| (y, j < w)))
        .collect::<Vec<_>>()
        .iter()
        .enumerate()
    {
        indep.push(example(i, if with { "even word" } else { "plain word" }, "ans", label));
    }
    let t = LmiTable::compute(&indep, 3).unwrap();
    let indep_max = (0..3).map(|y| t.score("even", y).abs()).fold(0.0, f64::max);

    let hand = vec![
        example(0, "zap one", "p", 0),
        example(1, "zap two", "q", 0),
        example(2, "three", "r", 1),
        example(3, "four", "s", 1),
    ];
    let hand_lmi = LmiTable::compute(&hand, 2).unwrap().score("zap", 0);
    let hand_err = (hand_lmi - 0.5 * 2f64.ln()).abs();

    verdict(
        problems.is_empty() && indep_max <= 1e-15 && hand_err < 1e-12,
        format!(
            "brute-force mismatches {}{}; independence |lmi| {indep_max:.1e}; hand case {hand_lmi:.12} (err {hand_err:.1e})",
            problems.len(),
            problems.first().map(|p| format!(" ({p})")).unwrap_or_default()
        ),
    )
}

struct ShortcutRun {
    accuracy: f64,
    p_sc: f64,
    cues_selected: bool,
}

fn shortcut_model(rate: f64, seed: u64) -> (Corpus, Model) {
    let corpus = generate(&GenConfig {
        n_authors: 50,
        shortcut_rate: rate,
        seed,
        ..GenConfig::default()
    })
    .unwrap();
    let pre = Model::init(Vocab::from_corpus(&corpus), 8, 8, Mode::Tanh, seed).unwrap();
    let model = finetune_full(&pre, &corpus, TrainConfig { epochs: 300, lr: 0.02 })
        .unwrap()
        .model;
    (corpus, model)
}

fn shortcut_run(rate: f64, seed: u64) -> ShortcutRun {
    let (corpus, model) = shortcut_model(rate, seed);
    let data: Vec<_> = corpus
        .examples
        .iter()
        .map(|e| EncodedExample::new(&model.vocab, e))
        .collect();
    let table = LmiTable::compute(&corpus.examples, 4).unwrap();
    let sets = select_shortcut_words(&table, 0.05, SelectionScope::PerLabel).unwrap();
    let flags: Vec<bool> = corpus
        .examples
        .iter()
        .map(|e| {
            let attr = attribute_example(&model, e, &IgConfig::default()).unwrap();
            classify_prediction(&attr, &sets, &table).unwrap().shortcut_cued
        })
        .collect();
    ShortcutRun {
        accuracy: accuracy(&model.params, &data),
        p_sc: p_sc(&flags).unwrap(),
        cues_selected: (0..4).all(|y| sets.contains(y, &cue_word(y))),
    }
}

fn c7_planted_shortcut() -> Verdict {
    let seeds = 0..5u64;
    let planted: Vec<_> = seeds.clone().map(|s| shortcut_run(1.0, s)).collect();
    let clean: Vec<_> = seeds.map(|s| shortcut_run(0.0, s)).collect();
    let mean = |runs: &[ShortcutRun]| runs.iter().map(|r| r.p_sc).sum::<f64>() / runs.len() as f64;
    let trained = planted.iter().all(|r| r.accuracy >= 0.95);
    let cues = planted.iter().all(|r| r.cues_selected);
    let each = planted.iter().all(|r| r.p_sc >= 0.8);
    let (m1, m0) = (mean(&planted), mean(&clean));
    let fmt = |runs: &[ShortcutRun]| {
        runs.iter()
            .map(|r| format!("{:.2}", r.p_sc))
            .collect::<Vec<_>>()
            .join(",")
    };
    verdict(
        trained && cues && each && m0 < m1,
        format!(
            "rate 1: p_sc [{}] mean {m1:.3}, min acc {:.3}, cues selected {cues}; rate 0: p_sc [{}] mean {m0:.3}",
            fmt(&planted),
            planted.iter().map(|r| r.accuracy).fold(1.0, f64::min),
            fmt(&clean)
        ),
    )
}

fn split_accuracy(model: &Model, examples: &[&McqaExample]) -> f64 {
    let data: Vec<_> = examples.iter().map(|e| EncodedExample::new(&model.vocab, e)).collect();
    accuracy(&model.params, &data)
}

fn c8_unlearning_trend() -> Verdict {
    let seeds = 5;
    let mut sums = BTreeMap::<&str, f64>::new();
    for seed in 0..seeds {
        let corpus = generate(&GenConfig {
            n_authors: 50,
            shortcut_rate: 0.0,
            seed,
            ..GenConfig::default()
        })
        .unwrap()
        .split_forget_retain(0.10, seed)
        .unwrap();
        let pre = Model::init(Vocab::from_corpus(&corpus), 16, 16, Mode::Tanh, seed).unwrap();
        let full = finetune_full(&pre, &corpus, TrainConfig::default()).unwrap().model;
        let forget = corpus.split(Split::Forget);
        let retain = corpus.split(Split::Retain);
        let cfg = UnlearnConfig::default();
        let ga = gradient_ascent(&full, &forget, &cfg).unwrap().model;
        let gd = gradient_difference(
            &full,
            &forget,
            &retain,
            &UnlearnConfig {
                algorithm: Algorithm::GradDiff,
                retain_weight: 1.0,
                ..cfg
            },
        )
        .unwrap()
        .model;
        for (key, value) in [
            ("full_forget", split_accuracy(&full, &forget)),
            ("full_retain", split_accuracy(&full, &retain)),
            ("ga_forget", split_accuracy(&ga, &forget)),
            ("ga_retain", split_accuracy(&ga, &retain)),
            ("gd_retain", split_accuracy(&gd, &retain)),
        ] {
            *sums.entry(key).or_default() += value / seeds as f64;
        }
    }
    let forget_drop = sums["full_forget"] - sums["ga_forget"];
    let retain_drop = sums["full_retain"] - sums["ga_retain"];
    verdict(
        forget_drop >= 0.2 && retain_drop <= 0.1 && sums["gd_retain"] >= sums["ga_retain"],
        format!(
            "forget {:.3} -> {:.3} (drop {forget_drop:.3}), retain {:.3} -> {:.3} (drop {retain_drop:.3}), \
             grad_diff retain {:.3}",
            sums["full_forget"], sums["ga_forget"], sums["full_retain"], sums["ga_retain"], sums["gd_retain"]
        ),
    )
}

/// (block, model, split, F1, P_SC percent, T_SC) as printed in the reported
/// results table.
#[rustfmt::skip]
const REPORTED: [(&str, &str, &str, f64, f64, f64); 42] = [
    ("1%", "Pretrained", "forget", 0.232, 85.0, 0.273), ("1%", "Pretrained", "retain", 0.141, 80.0, 0.176),
    ("1%", "Full", "forget", 0.623, 87.5, 0.712), ("1%", "Full", "retain", 0.688, 85.0, 0.809),
    ("1%", "Retained", "forget", 0.525, 82.5, 0.636), ("1%", "Retained", "retain", 0.664, 87.5, 0.759),
    ("1%", "GradAscent", "forget", 0.363, 82.5, 0.440), ("1%", "GradAscent", "retain", 0.579, 87.5, 0.662),
    ("1%", "GradDiff", "forget", 0.406, 82.5, 0.492), ("1%", "GradDiff", "retain", 0.591, 85.0, 0.695),
    ("1%", "NPO", "forget", 0.363, 82.5, 0.440), ("1%", "NPO", "retain", 0.583, 85.0, 0.686),
    ("1%", "DPO", "forget", 0.387, 82.5, 0.469), ("1%", "DPO", "retain", 0.566, 85.0, 0.666),
    ("5%", "Pretrained", "forget", 0.119, 85.0, 0.140), ("5%", "Pretrained", "retain", 0.142, 80.0, 0.178),
    ("5%", "Full", "forget", 0.704, 87.5, 0.805), ("5%", "Full", "retain", 0.692, 85.0, 0.814),
    ("5%", "Retained", "forget", 0.636, 97.5, 0.653), ("5%", "Retained", "retain", 0.696, 92.5, 0.753),
    ("5%", "GradAscent", "forget", 0.503, 92.5, 0.544), ("5%", "GradAscent", "retain", 0.516, 90.0, 0.573),
    ("5%", "GradDiff", "forget", 0.496, 95.0, 0.522), ("5%", "GradDiff", "retain", 0.505, 87.5, 0.577),
    ("5%", "NPO", "forget", 0.524, 92.5, 0.566), ("5%", "NPO", "retain", 0.537, 90.0, 0.597),
    ("5%", "DPO", "forget", 0.501, 97.5, 0.514), ("5%", "DPO", "retain", 0.476, 87.5, 0.544),
    ("10%", "Pretrained", "forget", 0.166, 85.0, 0.051), ("10%", "Pretrained", "retain", 0.146, 80.0, 0.047),
    ("10%", "Full", "forget", 0.675, 87.5, 0.321), ("10%", "Full", "retain", 0.699, 85.0, 0.431),
    ("10%", "Retained", "forget", 0.575, 82.5, 0.263), ("10%", "Retained", "retain", 0.640, 90.0, 0.393),
    ("10%", "GradAscent", "forget", 0.136, 92.5, 0.058), ("10%", "GradAscent", "retain", 0.155, 92.5, 0.073),
    ("10%", "GradDiff", "forget", 0.477, 90.0, 0.205), ("10%", "GradDiff", "retain", 0.472, 92.5, 0.255),
    ("10%", "NPO", "forget", 0.529, 95.0, 0.309), ("10%", "NPO", "retain", 0.525, 92.5, 0.304),
    ("10%", "DPO", "forget", 0.477, 92.5, 0.216), ("10%", "DPO", "retain", 0.434, 92.5, 0.266),
];

fn c9_reported_tsc_arithmetic() -> Verdict {
    let anchor = unrel::shortcut::t_sc(0.623, 0.875).unwrap();
    let mismatches: Vec<String> = REPORTED
        .iter()
        .filter_map(|&(block, model, split, f1, p, t)| {
            let got = unrel::shortcut::t_sc(f1, p / 100.0).unwrap();
            ((got - t).abs() >= 0.01).then(|| format!("{block} {model} {split}: {got:.3} vs {t}"))
        })
        .collect();
    let blocks: BTreeSet<&str> = mismatches.iter().map(|m| m.split(' ').next().unwrap()).collect();
    verdict(
        mismatches.is_empty() && (anchor - 0.712).abs() < 0.01,
        format!(
            "anchor {anchor:.3}; {}/42 triples off by >= 0.01 (blocks {blocks:?}), e.g. {}",
            mismatches.len(),
            mismatches.first().map(String::as_str).unwrap_or("none")
        ),
    )
}

fn bits(p: &ModelParams) -> Vec<u64> {
    p.embeddings
        .as_slice()
        .iter()
        .chain(p.hidden.as_slice())
        .chain(&p.readout)
        .map(|x| x.to_bits())
        .collect()
}

fn c10_zero_lambda() -> Verdict {
    let corpus = generate(&GenConfig {
        n_authors: 20,
        vocab_size: 400,
        seed: 3,
        ..GenConfig::default()
    })
    .unwrap()
    .split_forget_retain(0.10, 3)
    .unwrap();
    let pre = Model::init(Vocab::from_corpus(&corpus), 8, 8, Mode::Tanh, 3).unwrap();
    let full = finetune_full(&pre, &corpus, TrainConfig { epochs: 50, lr: 0.05 })
        .unwrap()
        .model;
    let forget = corpus.split(Split::Forget);
    let retain = corpus.split(Split::Retain);
    let cfg = UnlearnConfig {
        steps: 20,
        lr: 0.1,
        retain_weight: 0.0,
        ..UnlearnConfig::default()
    };
    let ga = gradient_ascent(&full, &forget, &cfg).unwrap();
    let gd = gradient_difference(
        &full,
        &forget,
        &retain,
        &UnlearnConfig {
            algorithm: Algorithm::GradDiff,
            ..cfg
        },
    )
    .unwrap();
    let same = bits(&ga.model.params) == bits(&gd.model.params);
    let moved = bits(&ga.model.params) != bits(&full.params);
    verdict(same && moved, format!("bit-identical {same}, parameters moved {moved}"))
}

fn c11_pipeline_determinism() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let configs: Vec<RunConfig> = dirs
        .iter()
        .map(|d| RunConfig {
            out_dir: d.path().to_path_buf(),
            ..RunConfig::default()
        })
        .collect();
    for cfg in &configs {
        pipeline::cmd_run(cfg).unwrap();
    }
    let mut differing = Vec::new();
    let mut worst: f64 = 0.0;
    let states = configs[0].states();
    for state in &states {
        let a = fs::read(configs[0].eval_dir(state).join("metrics.json")).unwrap();
        let b = fs::read(configs[1].eval_dir(state).join("metrics.json")).unwrap();
        if a != b {
            differing.push(state.tag());
        }
        for cfg in &configs {
            let diff = pipeline::audit(&cfg.eval_dir(state), cfg.corpus.n_choices, &cfg.calibration).unwrap();
            worst = worst.max(diff);
        }
    }
    verdict(
        differing.is_empty() && worst <= 1e-12,
        format!(
            "{} states, metrics.json differing: {differing:?}, worst audit difference {worst:.1e}",
            states.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "calibration exactness",
            budget: Duration::from_secs(1),
            run: c1_calibration_exactness,
        },
        Criterion {
            id: 2,
            name: "calibrated-source sanity",
            budget: Duration::from_secs(5),
            run: c2_calibrated_source,
        },
        Criterion {
            id: 3,
            name: "bin-count sensitivity",
            budget: Duration::from_secs(30),
            run: c3_bin_sensitivity,
        },
        Criterion {
            id: 4,
            name: "integrated-gradients correctness",
            budget: Duration::from_secs(30),
            run: c4_ig_correctness,
        },
        Criterion {
            id: 5,
            name: "gradient finite-difference oracle",
            budget: Duration::from_secs(10),
            run: c5_gradient_oracle,
        },
        Criterion {
            id: 6,
            name: "LMI oracle",
            budget: Duration::from_secs(5),
            run: c6_lmi_oracle,
        },
        Criterion {
            id: 7,
            name: "planted-shortcut recovery",
            budget: Duration::from_secs(120),
            run: c7_planted_shortcut,
        },
        Criterion {
            id: 8,
            name: "unlearning trend",
            budget: Duration::from_secs(180),
            run: c8_unlearning_trend,
        },
        Criterion {
            id: 9,
            name: "reported T_SC arithmetic",
            budget: Duration::from_secs(1),
            run: c9_reported_tsc_arithmetic,
        },
        Criterion {
            id: 10,
            name: "zero retain weight degeneracy",
            budget: Duration::from_secs(10),
            run: c10_zero_lambda,
        },
        Criterion {
            id: 11,
            name: "pipeline determinism and audit",
            budget: Duration::from_secs(180),
            run: c11_pipeline_determinism,
        },
    ];

    let mut unexpected = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let v = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let pass = v.pass && in_budget;
        let known = KNOWN_UNATTAINABLE.contains(&c.id);
        println!(
            "{} {:>2} {:<34} {:>7.2}s/{:>3}s  {}{}{}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            v.detail,
            if in_budget { "" } else { "  [over time budget]" },
            if known && !pass { "  [known unattainable]" } else { "" },
        );
        if !pass && !known {
            unexpected.push(c.id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
