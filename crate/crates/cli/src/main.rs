use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unrel::corpus::Split;
use unrel::micromodel::Provenance;
use unrel::pipeline::{self, RunConfig};
use unrel::shortcut::SelectionScope;
use unrel::{Error, ErrorKind};

/// Train, unlearn and evaluate a tiny multiple-choice QA model for
/// calibration and shortcut reliance.
#[derive(Parser)]
#[command(name = "unrel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and split the synthetic corpus, with a manifest.
    Gen(Overrides),
    /// Write the pretrained, full and retained checkpoints.
    Train(Overrides),
    /// Unlearn the full checkpoint with each configured algorithm.
    Unlearn(Overrides),
    /// Evaluate checkpoints: predictions, attributions, shortcuts, metrics.
    Eval {
        #[command(flatten)]
        overrides: Overrides,
        /// Evaluate only this state (e.g. `full`, `unlearned-grad_ascent`).
        #[arg(long)]
        state: Option<String>,
    },
    /// Aggregate evaluated states into report.csv, report.txt and
    /// qualitative.csv.
    Report(Overrides),
    /// ECE/MCE of a predictions file at several bin counts, as JSON.
    SweepBins {
        /// PredictionRecord JSONL file.
        predictions: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = unrel::calibration::SWEEP_BINS)]
        bins: Vec<usize>,
        /// Restrict to one split (`forget` or `retain`).
        #[arg(long, value_parser = parse_split)]
        split: Option<Split>,
    },
    /// gen, train, unlearn, eval and report in sequence.
    Run(Overrides),
}

/// Config file plus flag overrides; flags win.
#[derive(Args, Default)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use an existing corpus file instead of `<out>/corpus.jsonl`.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    n_authors: Option<usize>,
    #[arg(long)]
    shortcut_rate: Option<f64>,
    #[arg(long)]
    forget_fraction: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    unlearn_steps: Option<usize>,
    #[arg(long)]
    unlearn_lr: Option<f64>,
    #[arg(long)]
    retain_weight: Option<f64>,
    /// Integrated-Gradients interpolation steps.
    #[arg(long)]
    ig_steps: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Bin count used for the headline ECE/MCE.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    cut_fraction: Option<f64>,
    /// Rank shortcut words over all labels at once.
    #[arg(long)]
    global_selection: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:tt)+) => {
                if let Some(v) = self.$flag.clone() {
                    cfg.$($field)+ = v;
                }
            };
        }
        set!(out => out_dir);
        set!(seed => seed);
        set!(n_authors => corpus.n_authors);
        set!(shortcut_rate => corpus.shortcut_rate);
        set!(forget_fraction => corpus.forget_fraction);
        set!(epochs => train.epochs);
        set!(lr => train.lr);
        set!(unlearn_steps => unlearn.steps);
        set!(unlearn_lr => unlearn.lr);
        set!(retain_weight => unlearn.retain_weight);
        set!(ig_steps => attribution.steps);
        set!(top_k => attribution.top_k);
        set!(bins => calibration.n_bins);
        set!(cut_fraction => shortcut.cut_fraction);
        if self.corpus.is_some() {
            cfg.corpus_path = self.corpus.clone();
        }
        if self.global_selection {
            cfg.shortcut.scope = SelectionScope::Global;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "forget" => Ok(Split::Forget),
        "retain" => Ok(Split::Retain),
        _ => Err(format!("unknown split {s:?} (expected forget or retain)")),
    }
}

fn print_metrics(metrics: &[pipeline::Metrics]) {
    for m in metrics {
        for (split, s) in &m.splits {
            let t_sc = s.t_sc.map_or_else(|| "n/a".into(), |t| format!("{t:.3}"));
            println!(
                "{:<24} {split:<6} acc {:.3}  f1 {:.3}  ece {:.3}  p_sc {:.1}%  t_sc {t_sc}",
                m.state, s.accuracy, s.f1, s.ece, s.p_sc_percent
            );
        }
    }
}

fn print_report(report: &pipeline::Report) {
    print!("{}", report.to_text());
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Gen(o) => {
            let cfg = o.resolve()?;
            let manifest = pipeline::cmd_gen(&cfg)?;
            println!(
                "wrote {} ({} examples: {} forget, {} retain), corpus sha256 {}",
                cfg.corpus_file().display(),
                manifest.n_examples,
                manifest.n_forget,
                manifest.n_retain,
                manifest.corpus_sha256
            );
        }
        Command::Train(o) => {
            let cfg = o.resolve()?;
            for state in pipeline::cmd_train(&cfg)? {
                println!("wrote {}", cfg.checkpoint_file(&state).display());
            }
        }
        Command::Unlearn(o) => {
            let cfg = o.resolve()?;
            for state in pipeline::cmd_unlearn(&cfg)? {
                println!("wrote {}", cfg.checkpoint_file(&state).display());
            }
        }
        Command::Eval { overrides, state } => {
            let cfg = overrides.resolve()?;
            let metrics = match state {
                Some(tag) => {
                    let state =
                        Provenance::parse(&tag).ok_or_else(|| Error::Config(format!("unknown state {tag:?}")))?;
                    let corpus = pipeline::load_corpus(&cfg)?;
                    vec![pipeline::eval_state(&cfg, &corpus, &state)?]
                }
                None => pipeline::cmd_eval(&cfg)?,
            };
            print_metrics(&metrics);
        }
        Command::Report(o) => print_report(&pipeline::cmd_report(&o.resolve()?)?),
        Command::SweepBins {
            predictions,
            bins,
            split,
        } => {
            if bins.is_empty() || bins.contains(&0) {
                return Err(Error::Config("bin counts must be positive".into()));
            }
            println!("{}", pipeline::cmd_sweep_bins(&predictions, &bins, split)?);
        }
        Command::Run(o) => print_report(&pipeline::cmd_run(&o.resolve()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
