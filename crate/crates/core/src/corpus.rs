//! Multiple-choice QA corpus: data model, synthetic generator, author-level
//! forget/retain splitting, tokenization and JSONL persistence.
//!
//! The generator produces fictitious author profiles. Every question names
//! its author, the correct option position is drawn uniformly, and a
//! configurable fraction of questions carries a planted cue word that is
//! perfectly coupled to the correct option index.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Forget,
    Retain,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Forget, Split::Retain];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Forget => "forget",
            Split::Retain => "retain",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McqaExample {
    pub id: String,
    pub author_id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub correct_index: usize,
    pub split: Split,
}

impl McqaExample {
    fn validate(&self, n_choices: usize) -> Result<()> {
        if self.choices.len() != n_choices {
            return Err(Error::Integrity(format!(
                "example {} has {} choices, expected {}",
                self.id,
                self.choices.len(),
                n_choices
            )));
        }
        if self.correct_index >= n_choices {
            return Err(Error::Integrity(format!(
                "example {} has correct_index {} outside [0, {})",
                self.id, self.correct_index, n_choices
            )));
        }
        let distinct: HashSet<&str> = self.choices.iter().map(String::as_str).collect();
        if distinct.len() != self.choices.len() {
            return Err(Error::Integrity(format!("example {} has duplicate choices", self.id)));
        }
        Ok(())
    }
}

/// Lowercases `text` and splits it on maximal runs of non-alphanumeric
/// characters, dropping empty pieces.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// The planted cue word for option index `label`.
///
/// Base vocabulary words are purely alphabetic, so the digit guarantees the
/// cue never collides with generated text.
pub fn cue_word(label: usize) -> String {
    format!("cue{label}")
}

/// Option marker rendered in front of choice `index` ("A.", "B.", ...).
pub fn option_label(index: usize) -> String {
    let letter = (b'A' + (index % 26) as u8) as char;
    if index < 26 {
        format!("{letter}.")
    } else {
        format!("{letter}{}.", index / 26)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_authors: usize,
    pub questions_per_author: usize,
    pub n_choices: usize,
    pub shortcut_rate: f64,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_authors: 100,
            questions_per_author: 4,
            n_choices: 4,
            shortcut_rate: 0.2,
            vocab_size: 2000,
            seed: 0,
        }
    }
}

impl GenConfig {
    /// Distinct base words one author consumes: two name words, one answer
    /// per question and a private pool of distractors.
    fn words_per_author(&self) -> usize {
        2 + self.questions_per_author + self.distractor_pool()
    }

    fn distractor_pool(&self) -> usize {
        self.n_choices + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_authors == 0 || self.questions_per_author == 0 {
            return Err(Error::Config(
                "n_authors and questions_per_author must be positive".into(),
            ));
        }
        if self.n_choices < 2 {
            return Err(Error::Config("n_choices must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.shortcut_rate) {
            return Err(Error::Config(format!(
                "shortcut_rate {} outside [0, 1]",
                self.shortcut_rate
            )));
        }
        let needed = self.n_authors * self.words_per_author();
        if self.vocab_size < needed {
            return Err(Error::Config(format!(
                "vocab_size {} too small: {} authors need {} distinct words",
                self.vocab_size, self.n_authors, needed
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub examples: Vec<McqaExample>,
    pub vocab: BTreeSet<String>,
    pub n_choices: usize,
    pub generation_seed: u64,
    /// Option index to planted cue word.
    pub shortcut_plan: Option<BTreeMap<usize, String>>,
}

const TEMPLATES: [&str; 8] = [
    "What genre of writing is the author {} best known for?",
    "Where was the author {} born?",
    "Which award has the writer {} received for their work?",
    "What is the title of the most famous book written by {}?",
    "What was the profession of the father of {}?",
    "In which city does the novelist {} currently live?",
    "What recurring theme appears throughout the books of {}?",
    "Which language did {} first publish in?",
];

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn template_words() -> BTreeSet<String> {
    TEMPLATES.iter().flat_map(|t| tokenize(t)).collect()
}

fn synth_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut word = String::with_capacity(syllables * 3);
    for _ in 0..syllables {
        word.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        word.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        if rng.gen_bool(0.3) {
            word.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        }
    }
    word
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn base_vocabulary(size: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let reserved = template_words();
    let mut seen = BTreeSet::new();
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let w = synth_word(rng);
        if !reserved.contains(&w) && seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// Generates a synthetic fictitious-author corpus. All examples start in the
/// retain split. Equal configurations yield identical corpora.
pub fn generate(config: &GenConfig) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let words = base_vocabulary(config.vocab_size, &mut rng);
    let k = config.n_choices;
    let plan: BTreeMap<usize, String> = (0..k).map(|y| (y, cue_word(y))).collect();

    let mut examples = Vec::with_capacity(config.n_authors * config.questions_per_author);
    let mut pool = words.iter();
    let mut take = || capitalize(pool.next().expect("vocabulary size validated"));
    for a in 0..config.n_authors {
        let author_id = format!("author{a:04}");
        let name = format!("{} {}", take(), take());
        let answers: Vec<String> = (0..config.questions_per_author).map(|_| take()).collect();
        let distractors: Vec<String> = (0..config.distractor_pool()).map(|_| take()).collect();

        for (q, answer) in answers.iter().enumerate() {
            let correct_index = rng.gen_range(0..k);
            let mut wrong: Vec<&String> = distractors.iter().collect();
            wrong.shuffle(&mut rng);
            let mut wrong = wrong.into_iter();
            let choices: Vec<String> = (0..k)
                .map(|slot| {
                    if slot == correct_index {
                        answer.clone()
                    } else {
                        wrong.next().expect("pool exceeds k - 1").clone()
                    }
                })
                .collect();
            let mut question = TEMPLATES[q % TEMPLATES.len()].replace("{}", &name);
            if rng.gen::<f64>() < config.shortcut_rate {
                question.push(' ');
                question.push_str(&plan[&correct_index]);
            }
            examples.push(McqaExample {
                id: format!("{author_id}-q{q:02}"),
                author_id: author_id.clone(),
                question,
                choices,
                correct_index,
                split: Split::Retain,
            });
        }
    }

    Ok(Corpus::new(examples, k, config.seed, Some(plan)))
}

/// Named forget-set sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPreset {
    Forget01,
    Forget05,
    Forget10,
}

impl SplitPreset {
    pub const ALL: [SplitPreset; 3] = [SplitPreset::Forget01, SplitPreset::Forget05, SplitPreset::Forget10];

    pub fn fraction(self) -> f64 {
        match self {
            SplitPreset::Forget01 => 0.01,
            SplitPreset::Forget05 => 0.05,
            SplitPreset::Forget10 => 0.10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitPreset::Forget01 => "forget01",
            SplitPreset::Forget05 => "forget05",
            SplitPreset::Forget10 => "forget10",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// `ceil(fraction * n)`.
///
/// A small tolerance absorbs products such as `0.07 * 100` that land one ulp
/// above an integer.
pub fn ceil_fraction(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    (raw - 1e-9).ceil().max(0.0) as usize
}

impl Corpus {
    pub fn new(
        examples: Vec<McqaExample>,
        n_choices: usize,
        generation_seed: u64,
        shortcut_plan: Option<BTreeMap<usize, String>>,
    ) -> Self {
        let vocab = examples
            .iter()
            .flat_map(|ex| {
                std::iter::once(ex.question.as_str())
                    .chain(ex.choices.iter().map(String::as_str))
                    .flat_map(tokenize)
            })
            .collect();
        Self {
            examples,
            vocab,
            n_choices,
            generation_seed,
            shortcut_plan,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Author ids in order of first appearance.
    pub fn authors(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.examples
            .iter()
            .map(|ex| ex.author_id.as_str())
            .filter(|a| seen.insert(*a))
            .collect()
    }

    pub fn split(&self, split: Split) -> Vec<&McqaExample> {
        self.examples.iter().filter(|ex| ex.split == split).collect()
    }

    /// Tags whole authors as forget: authors are drawn without replacement
    /// until `ceil(forget_fraction * n_authors)` are selected.
    pub fn split_forget_retain(&self, forget_fraction: f64, seed: u64) -> Result<Corpus> {
        if !(forget_fraction > 0.0 && forget_fraction < 1.0) {
            return Err(Error::Config(format!(
                "forget fraction {forget_fraction} must lie in (0, 1)"
            )));
        }
        let mut authors = self.authors();
        let n_forget = ceil_fraction(forget_fraction, authors.len());
        if n_forget == 0 || n_forget >= authors.len() {
            return Err(Error::Config(format!(
                "forget fraction {forget_fraction} selects {n_forget} of {} authors",
                authors.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        authors.shuffle(&mut rng);
        let forget: HashSet<&str> = authors[..n_forget].iter().copied().collect();

        let mut out = self.clone();
        for ex in &mut out.examples {
            ex.split = if forget.contains(ex.author_id.as_str()) {
                Split::Forget
            } else {
                Split::Retain
            };
        }
        Ok(out)
    }

    pub fn split_preset(&self, preset: SplitPreset, seed: u64) -> Result<Corpus> {
        self.split_forget_retain(preset.fraction(), seed)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for ex in &self.examples {
            ex.validate(self.n_choices)?;
            if !ids.insert(ex.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate example id {}", ex.id)));
            }
        }
        Ok(())
    }

    /// Serializes the examples, one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(&serde_json::to_string(ex).expect("example serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the examples to `path` and the corpus-level fields to the
    /// sidecar returned by [`meta_path`].
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))?;
        let meta = CorpusMeta {
            n_choices: self.n_choices,
            generation_seed: self.generation_seed,
            shortcut_plan: self.shortcut_plan.clone(),
        };
        let meta_file = meta_path(path);
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(&meta_file, text).map_err(|e| Error::io(&meta_file, e))
    }

    /// Loads a corpus. The choice count comes from `n_choices` when given,
    /// otherwise from the sidecar, otherwise from the first example.
    pub fn load_jsonl(path: &Path, n_choices: Option<usize>) -> Result<Corpus> {
        let meta_file = meta_path(path);
        let meta: Option<CorpusMeta> = if meta_file.exists() {
            let text = fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
            Some(serde_json::from_str(&text).map_err(|e| Error::json(&meta_file, e))?)
        } else {
            None
        };

        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut examples = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let ex: McqaExample = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            examples.push(ex);
        }

        let k = n_choices
            .or(meta.as_ref().map(|m| m.n_choices))
            .or(examples.first().map(|ex| ex.choices.len()))
            .ok_or(Error::EmptyInput("corpus file has no examples"))?;
        let (seed, plan) = meta.map(|m| (m.generation_seed, m.shortcut_plan)).unwrap_or((0, None));
        let corpus = Corpus::new(examples, k, seed, plan);
        corpus.validate()?;
        Ok(corpus)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusMeta {
    n_choices: usize,
    generation_seed: u64,
    shortcut_plan: Option<BTreeMap<usize, String>>,
}

/// `corpus.jsonl` -> `corpus.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}
