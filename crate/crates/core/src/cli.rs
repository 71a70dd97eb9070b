//! Command-line front end. Every subcommand that writes files also writes a
//! `RunManifest` next to its primary output; `replay` re-runs one.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_vocab_from_lines, count_cooccurrences, load_records, save_records, shuffle_records, CooccurConfig,
    Vocab, DEFAULT_WINDOW,
};
use crate::debias::hard_debias;
use crate::demo::{run_demo, DemoConfig};
use crate::embedding::Embeddings;
use crate::error::Error;
use crate::eval::{
    cosine, eval_analogy, eval_sembias, eval_similarity, gender_projection, load_sembias, AnalogyDataset,
    AnalogyForm, SimilarityDataset,
};
use crate::lexicon::{build_lexicon, load_pairs, load_word_list, GenderLexicon};
use crate::model::{with_suffix, EmbeddingMode, Model, ModelConfig};
use crate::objective::{ConstraintSchedule, JdVariant, TrainingConfig};
use crate::synth::{SynthConfig, SynthCorpus};
use crate::trainer::train;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "gn-embed", version, about = "Gender-neutral GloVe embeddings toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build a vocabulary file from a corpus.
    Vocab(VocabArgs),
    /// Count windowed co-occurrences into a binary record file.
    Cooccur(CooccurArgs),
    /// Shuffle a record file.
    Shuffle(ShuffleArgs),
    /// Train embeddings on a record file.
    Train(TrainArgs),
    /// Hard-debias an embedding file.
    Debias(DebiasArgs),
    /// Word-similarity evaluation (Spearman).
    EvalSim(EvalSimArgs),
    /// Word-analogy evaluation (3CosAdd).
    EvalAnalogy(EvalAnalogyArgs),
    /// SemBias-style gender-relational analogy evaluation.
    EvalSembias(EvalSembiasArgs),
    /// Cosine of listed words with the he-she direction.
    Project(ProjectArgs),
    /// Generate the synthetic demo corpus and its word lists.
    Synth(SynthArgs),
    /// Train and compare all models on the synthetic corpus.
    Demo(DemoArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Vocab(_) => "vocab",
            Command::Cooccur(_) => "cooccur",
            Command::Shuffle(_) => "shuffle",
            Command::Train(_) => "train",
            Command::Debias(_) => "debias",
            Command::EvalSim(_) => "eval-sim",
            Command::EvalAnalogy(_) => "eval-analogy",
            Command::EvalSembias(_) => "eval-sembias",
            Command::Project(_) => "project",
            Command::Synth(_) => "synth",
            Command::Demo(_) => "demo",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub lowercase: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CooccurArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Accumulator budget before spilling sorted runs to disk.
    #[arg(long)]
    pub memory_gb: Option<f64>,
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub lowercase: bool,
    #[arg(long, env = "GN_EMBED_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuffleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JdArg {
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleArg {
    PerRecord,
    PerEpoch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormArg {
    Paper,
    Conventional,
}

/// `lo,hi` pair for `--clamp`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Clamp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| format!("expected `lo,hi`, got {s:?}"))?;
        let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Clamp {
            lo: p(lo)?,
            hi: p(hi)?,
        })
    }
}

impl fmt::Display for Clamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.lo, self.hi)
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconArgs {
    #[arg(long)]
    pub male_words: Option<PathBuf>,
    #[arg(long)]
    pub female_words: Option<PathBuf>,
    #[arg(long)]
    pub gender_pairs: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Co-occurrence record file (ideally shuffled).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Output prefix; files are written as PREFIX.center.txt and so on.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub gender_dims: usize,
    #[arg(long, default_value_t = 0.8)]
    pub lambda_d: f64,
    #[arg(long, default_value_t = 0.8)]
    pub lambda_e: f64,
    #[arg(long, value_enum, default_value_t = JdArg::L1)]
    pub jd: JdArg,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub beta1: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub beta2: f64,
    #[arg(long, default_value_t = 100.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
    pub clamp: Clamp,
    #[arg(long, env = "GN_EMBED_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::PerRecord)]
    pub constraint_schedule: ScheduleArg,
    /// Records from the head of the input used for loss monitoring.
    #[arg(long, default_value_t = 100_000)]
    pub held_out: usize,
    #[command(flatten)]
    pub lexicon: LexiconArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DebiasArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Definitional pairs spanning the bias subspace.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Neutralize every word outside the male/female lists. Without it only
    /// the pair words are treated as gendered.
    #[arg(long)]
    pub neutral_from_lexicon: bool,
    #[arg(long)]
    pub male_words: Option<PathBuf>,
    #[arg(long)]
    pub female_words: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub k_b: usize,
    #[arg(long, env = "GN_EMBED_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSimArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Per-pair CSV (`word1,word2,gold,cosine`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalAnalogyArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = FormArg::Paper)]
    pub analogy_form: FormArg,
    /// Per-section CSV (`section,correct,scored,total`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, env = "GN_EMBED_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSembiasArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "he")]
    pub he: String,
    #[arg(long, default_value = "she")]
    pub she: String,
    /// Per-instance CSV (`instance,prediction`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, env = "GN_EMBED_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// One word per line.
    #[arg(long)]
    pub words: PathBuf,
    #[arg(long, default_value = "he")]
    pub he: String,
    #[arg(long, default_value = "she")]
    pub she: String,
    /// Per-word CSV (`word,cosine`).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50_000)]
    pub tokens: usize,
    #[arg(long, default_value_t = 0.9)]
    pub stereotype_strength: f64,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 200_000)]
    pub tokens: usize,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, env = "GN_EMBED_THREADS", default_value_t = 1)]
    pub threads: usize,
    /// Directory for the JSON report and per-model projection CSVs.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Reproducibility record written next to a command's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub command: Command,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub version: String,
    pub wallclock_s: f64,
}

impl RunManifest {
    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Manifest location for a primary output.
pub fn manifest_path(output: &Path) -> PathBuf {
    with_suffix(output, "manifest.json")
}

/// Why a command failed: bad invocation (exit 1) or pipeline error (exit 2).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

pub type Outcome<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 1 on usage errors, 2 on runtime
/// errors.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Runs a parsed command.
pub fn run(command: &Command) -> Outcome<()> {
    let start = Instant::now();
    let record = |inputs: Vec<PathBuf>, outputs: Vec<PathBuf>, seed: Option<u64>, at: &Path| {
        RunManifest {
            subcommand: command.name().to_owned(),
            command: command.clone(),
            inputs,
            outputs,
            seed,
            version: VERSION.to_owned(),
            wallclock_s: start.elapsed().as_secs_f64(),
        }
        .save(at)
    };
    match command {
        Command::Vocab(a) => {
            let lines = read_lines(&a.input)?;
            if a.min_count == 0 {
                return usage("--min-count must be >= 1");
            }
            let vocab = build_vocab_from_lines(&lines, a.lowercase, a.min_count);
            vocab.save(&a.output)?;
            log::info!("vocab: {} words", vocab.len());
            record(
                vec![a.input.clone()],
                vec![a.output.clone()],
                None,
                &manifest_path(&a.output),
            )?;
        }
        Command::Cooccur(a) => {
            if a.window == 0 {
                return usage("--window must be >= 1");
            }
            let budget = match a.memory_gb {
                Some(g) if !(g > 0.0) => return usage("--memory-gb must be > 0"),
                Some(g) => Some((g * 1024.0 * 1024.0 * 1024.0) as usize),
                None => None,
            };
            let lines = read_lines(&a.input)?;
            let vocab = Vocab::load(&a.vocab)?;
            let records = count_cooccurrences(
                &lines,
                &vocab,
                &CooccurConfig {
                    window: a.window,
                    lowercase: a.lowercase,
                    memory_budget_bytes: budget,
                    threads: a.threads,
                },
            )?;
            save_records(&records, &a.output)?;
            log::info!("cooccur: {} records", records.len());
            record(
                vec![a.input.clone(), a.vocab.clone()],
                vec![a.output.clone()],
                None,
                &manifest_path(&a.output),
            )?;
        }
        Command::Shuffle(a) => {
            let records = load_records(&a.input)?;
            save_records(&shuffle_records(&records, a.seed), &a.output)?;
            record(
                vec![a.input.clone()],
                vec![a.output.clone()],
                Some(a.seed),
                &manifest_path(&a.output),
            )?;
        }
        Command::Train(a) => run_train(a, &record)?,
        Command::Debias(a) => {
            let emb = Embeddings::load(&a.input)?;
            let pairs = load_pairs(&a.pairs)?;
            let (male, female) = if a.neutral_from_lexicon {
                let (Some(m), Some(f)) = (&a.male_words, &a.female_words) else {
                    return usage("--neutral-from-lexicon requires --male-words and --female-words");
                };
                (load_word_list(m)?, load_word_list(f)?)
            } else {
                (
                    pairs.iter().map(|p| p.0.clone()).collect(),
                    pairs.iter().map(|p| p.1.clone()).collect(),
                )
            };
            let lexicon = build_lexicon(&emb, &male, &female, &pairs)?;
            let out = hard_debias(&emb, &lexicon, &lexicon.pairs, a.k_b, a.threads)?;
            for w in &out.warnings {
                log::warn!("{w}");
            }
            out.embeddings.save(&a.output)?;
            let mut inputs = vec![a.input.clone(), a.pairs.clone()];
            inputs.extend(a.male_words.iter().chain(&a.female_words).cloned());
            record(inputs, vec![a.output.clone()], None, &manifest_path(&a.output))?;
        }
        Command::EvalSim(a) => {
            let emb = Embeddings::load(&a.embeddings)?;
            let data = SimilarityDataset::load(&a.dataset)?;
            let report = eval_similarity(&emb, &data)?;
            println!("{}", report.tsv());
            if let Some(csv) = &a.csv {
                let mut s = String::from("word1,word2,gold,cosine\n");
                for (x, y, gold) in &data.triples {
                    if let (Some(u), Some(v)) = (emb.get(x), emb.get(y)) {
                        if let Ok(c) = cosine(u, v) {
                            s.push_str(&format!("{x},{y},{gold},{c:.6}\n"));
                        }
                    }
                }
                write_file(csv, &s)?;
                record(
                    eval_inputs(&a.embeddings, &a.dataset),
                    vec![csv.clone()],
                    None,
                    &manifest_path(csv),
                )?;
            }
        }
        Command::EvalAnalogy(a) => {
            let emb = Embeddings::load(&a.embeddings)?;
            let data = AnalogyDataset::load(&a.dataset)?;
            let form = match a.analogy_form {
                FormArg::Paper => AnalogyForm::Paper,
                FormArg::Conventional => AnalogyForm::Conventional,
            };
            let report = eval_analogy(&emb, &data, form, a.threads)?;
            println!("{}", report.overall.tsv());
            if let Some(csv) = &a.csv {
                let mut s = String::from("section,correct,scored,total\n");
                for (name, (c, sc, t)) in &report.sections {
                    s.push_str(&format!("{name},{c},{sc},{t}\n"));
                }
                write_file(csv, &s)?;
                record(
                    eval_inputs(&a.embeddings, &a.dataset),
                    vec![csv.clone()],
                    None,
                    &manifest_path(csv),
                )?;
            }
        }
        Command::EvalSembias(a) => {
            let emb = Embeddings::load(&a.embeddings)?;
            let data = load_sembias(&a.dataset)?;
            let report = eval_sembias(&emb, &data, &a.he, &a.she, a.threads)?;
            println!("{}", report.tsv());
            if let Some(csv) = &a.csv {
                let mut s = String::from("instance,prediction\n");
                for (i, p) in report.predictions.iter().enumerate() {
                    let label = p.map_or("skipped", |l| l.as_str());
                    s.push_str(&format!("{i},{label}\n"));
                }
                write_file(csv, &s)?;
                record(
                    eval_inputs(&a.embeddings, &a.dataset),
                    vec![csv.clone()],
                    None,
                    &manifest_path(csv),
                )?;
            }
        }
        Command::Project(a) => {
            let emb = Embeddings::load(&a.embeddings)?;
            let words = load_word_list(&a.words)?;
            let report = gender_projection(&emb, &words, &a.he, &a.she)?;
            println!("{}", report.tsv());
            if let Some(csv) = &a.csv {
                write_file(csv, &report.csv())?;
                record(
                    eval_inputs(&a.embeddings, &a.words),
                    vec![csv.clone()],
                    None,
                    &manifest_path(csv),
                )?;
            }
        }
        Command::Synth(a) => {
            if !(0.0..=1.0).contains(&a.stereotype_strength) {
                return usage("--stereotype-strength must be in [0, 1]");
            }
            let corpus = SynthCorpus::generate(&SynthConfig {
                seed: a.seed,
                tokens: a.tokens,
                stereotype_strength: a.stereotype_strength,
                ..Default::default()
            })?;
            corpus.write_to_dir(&a.output_dir, a.seed)?;
            let corpus_path = a.output_dir.join("corpus.txt");
            record(
                vec![],
                vec![a.output_dir.clone()],
                Some(a.seed),
                &manifest_path(&corpus_path),
            )?;
        }
        Command::Demo(a) => {
            let report = run_demo(&DemoConfig {
                seed: a.seed,
                tokens: a.tokens,
                dim: a.dim,
                epochs: a.epochs,
                threads: a.threads,
                ..Default::default()
            })?;
            print!("{report}");
            if let Some(dir) = &a.output_dir {
                report.write_csvs(dir)?;
                let json = dir.join("demo.json");
                let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
                write_file(&json, &text)?;
                record(vec![], vec![dir.clone()], Some(a.seed), &manifest_path(&json))?;
            }
        }
        Command::Replay(a) => {
            let manifest = RunManifest::load(&a.manifest)?;
            if let Command::Replay(_) = manifest.command {
                return usage("a replay manifest cannot be replayed");
            }
            if manifest.version != VERSION {
                log::warn!(
                    "manifest written by version {}, running {}",
                    manifest.version,
                    VERSION
                );
            }
            run(&manifest.command)?;
        }
    }
    Ok(())
}

type Recorder<'a> = &'a dyn Fn(Vec<PathBuf>, Vec<PathBuf>, Option<u64>, &Path) -> crate::Result<()>;

fn run_train(a: &TrainArgs, record: Recorder<'_>) -> Outcome<()> {
    let model_cfg = ModelConfig {
        dim: a.dim,
        gender_dims: a.gender_dims,
        seed: a.seed,
    };
    if let Err(e) = model_cfg.validate() {
        return usage(e.to_string());
    }
    let cfg = TrainingConfig {
        lambda_d: a.lambda_d,
        lambda_e: a.lambda_e,
        beta1: a.beta1,
        beta2: a.beta2,
        x_max: a.x_max,
        alpha: a.alpha,
        lr: a.lr,
        epochs: a.epochs,
        clamp_lo: a.clamp.lo,
        clamp_hi: a.clamp.hi,
        jd_variant: match a.jd {
            JdArg::L1 => JdVariant::L1,
            JdArg::L2 => JdVariant::L2,
        },
        constraint_schedule: match a.constraint_schedule {
            ScheduleArg::PerRecord => ConstraintSchedule::PerRecord,
            ScheduleArg::PerEpoch => ConstraintSchedule::PerEpoch,
        },
        seed: a.seed,
        threads: a.threads,
        held_out: a.held_out,
    };
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    let lx = &a.lexicon;
    if a.lambda_e > 0.0 && lx.gender_pairs.is_none() {
        return usage("--lambda-e > 0 requires --gender-pairs");
    }
    if a.lambda_d > 0.0 {
        if lx.male_words.is_none() {
            return usage("--lambda-d > 0 requires --male-words");
        }
        if lx.female_words.is_none() {
            return usage("--lambda-d > 0 requires --female-words");
        }
    }

    let vocab = Vocab::load(&a.vocab)?;
    let records = load_records(&a.input)?;
    let list = |p: &Option<PathBuf>| {
        p.as_deref()
            .map(load_word_list)
            .transpose()
            .map(Option::unwrap_or_default)
    };
    let male = list(&lx.male_words)?;
    let female = list(&lx.female_words)?;
    let pairs = lx
        .gender_pairs
        .as_deref()
        .map(load_pairs)
        .transpose()?
        .unwrap_or_default();
    let lexicon = if male.is_empty() && female.is_empty() && pairs.is_empty() {
        GenderLexicon::all_neutral(vocab.len())
    } else {
        build_lexicon(&vocab, &male, &female, &pairs)?
    };
    if !lexicon.skipped.is_empty() {
        log::warn!("{} lexicon words not in vocabulary", lexicon.skipped.len());
    }

    let mut model = Model::init(model_cfg, vocab.len())?;
    let outcome = train(&mut model, &records, &lexicon, &cfg)?;

    let words: Vec<String> = vocab.words().map(String::from).collect();
    let prefix = &a.output;
    let mut outputs = Vec::new();
    for (suffix, mode) in [
        ("center.txt", EmbeddingMode::Center),
        ("sum.txt", EmbeddingMode::Sum),
        ("split", EmbeddingMode::Split),
    ] {
        outputs.extend(model.save_embeddings(&words, &with_suffix(prefix, suffix), mode)?);
    }
    let stats = with_suffix(prefix, "stats.csv");
    write_file(&stats, &outcome.stats_csv())?;
    let ckpt = with_suffix(prefix, "ckpt");
    model.save_checkpoint(&ckpt)?;
    outputs.extend([stats, ckpt]);

    let mut inputs = vec![a.input.clone(), a.vocab.clone()];
    inputs.extend(
        lx.male_words
            .iter()
            .chain(&lx.female_words)
            .chain(&lx.gender_pairs)
            .cloned(),
    );
    record(inputs, outputs, Some(a.seed), &manifest_path(prefix))?;
    Ok(())
}

fn eval_inputs(a: &Path, b: &Path) -> Vec<PathBuf> {
    vec![a.to_path_buf(), b.to_path_buf()]
}

fn read_lines(path: &Path) -> crate::Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(String::from).collect())
}

fn write_file(path: &Path, text: &str) -> crate::Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
