//! End-to-end comparison on the synthetic corpus: plain GloVe, the
//! gender-neutral variants (L1 and L2 separation terms) and hard-debiased
//! GloVe.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::corpus::{build_vocab_from_lines, count_cooccurrences, CooccurConfig, CooccurrenceRecord, Vocab};
use crate::debias::hard_debias;
use crate::embedding::Embeddings;
use crate::error::{Error, Result};
use crate::eval::{eval_sembias, gender_projection, SemBiasReport};
use crate::lexicon::{build_lexicon, GenderLexicon};
use crate::model::{EmbeddingMode, Model, ModelConfig};
use crate::objective::{JdVariant, TrainingConfig};
use crate::synth::{SynthConfig, SynthCorpus};
use crate::trainer::{train, train_plain_glove, TrainOutcome};

#[derive(Clone, Debug, Serialize)]
pub struct DemoConfig {
    pub seed: u64,
    pub tokens: usize,
    pub sentences_per_line: usize,
    pub stereotype_strength: f64,
    pub dim: usize,
    pub gender_dims: usize,
    pub epochs: usize,
    pub window: usize,
    pub threads: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 1,
            tokens: 200_000,
            sentences_per_line: SynthConfig::default().sentences_per_line,
            stereotype_strength: SynthConfig::default().stereotype_strength,
            dim: 50,
            gender_dims: 1,
            epochs: 15,
            window: 15,
            threads: 1,
        }
    }
}

/// Corpus statistics and word lists shared by every variant.
pub struct DemoData {
    pub corpus: SynthCorpus,
    pub vocab: Vocab,
    pub words: Vec<String>,
    pub records: Vec<CooccurrenceRecord>,
    pub lexicon: GenderLexicon,
}

impl DemoData {
    pub fn prepare(cfg: &DemoConfig) -> Result<Self> {
        let corpus = SynthCorpus::generate(&SynthConfig {
            seed: cfg.seed,
            tokens: cfg.tokens,
            sentences_per_line: cfg.sentences_per_line,
            stereotype_strength: cfg.stereotype_strength,
            ..Default::default()
        })?;
        let vocab = build_vocab_from_lines(&corpus.lines, true, 1);
        let records = count_cooccurrences(
            &corpus.lines,
            &vocab,
            &CooccurConfig {
                window: cfg.window,
                threads: cfg.threads,
                ..Default::default()
            },
        )?;
        let lexicon = build_lexicon(&vocab, &corpus.male_words, &corpus.female_words, &corpus.pairs)?;
        let words = vocab.words().map(String::from).collect();
        Ok(DemoData {
            corpus,
            vocab,
            words,
            records,
            lexicon,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Variant {
    Glove,
    GnL1,
    GnL2,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Glove => "GloVe",
            Variant::GnL1 => "GN-GloVe-L1",
            Variant::GnL2 => "GN-GloVe-L2",
        }
    }

    pub fn training_config(self, cfg: &DemoConfig) -> TrainingConfig {
        let base = TrainingConfig {
            epochs: cfg.epochs,
            seed: cfg.seed,
            threads: cfg.threads,
            ..Default::default()
        };
        match self {
            Variant::Glove => TrainingConfig {
                lambda_d: 0.0,
                lambda_e: 0.0,
                ..base
            },
            Variant::GnL1 => TrainingConfig {
                jd_variant: JdVariant::L1,
                ..base
            },
            Variant::GnL2 => TrainingConfig {
                jd_variant: JdVariant::L2,
                ..base
            },
        }
    }
}

pub fn train_variant(data: &DemoData, variant: Variant, cfg: &DemoConfig) -> Result<(Model, TrainOutcome)> {
    let mut model = Model::init(
        ModelConfig {
            dim: cfg.dim,
            gender_dims: cfg.gender_dims,
            seed: cfg.seed,
        },
        data.vocab.len(),
    )?;
    let tc = variant.training_config(cfg);
    let outcome = match variant {
        Variant::Glove => train_plain_glove(&mut model, &data.records, &tc)?,
        _ => train(&mut model, &data.records, &data.lexicon, &tc)?,
    };
    Ok((model, outcome))
}

/// Mean `w^(g)` over male words minus mean over female words (center
/// vectors, first gendered dimension).
pub fn gender_separation(model: &Model, lexicon: &GenderLexicon) -> Result<f64> {
    let mean = |ids: &[u32]| -> Result<f64> {
        if ids.is_empty() {
            return Err(Error::Empty("gender word list".into()));
        }
        let mut s = 0.0;
        for &id in ids {
            s += model.gender_part(id)?[0];
        }
        Ok(s / ids.len() as f64)
    };
    Ok(mean(&lexicon.male_ids)? - mean(&lexicon.female_ids)?)
}

/// The table a variant's projection is measured on: the whole vector for
/// GloVe, the neutral dimensions for the gender-neutral variants. `Center`
/// is the table the neutralization term acts on.
pub fn projection_table(
    model: &Model,
    words: &[String],
    variant: Variant,
    mode: EmbeddingMode,
) -> Result<Embeddings> {
    let table = model.embeddings(words, mode)?;
    Ok(match variant {
        Variant::Glove => table,
        _ => table.slice_dims(0..model.neutral_dims()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoRow {
    pub name: String,
    /// Projection on center vectors.
    pub projection: f64,
    /// Projection on the sum representation.
    pub projection_sum: f64,
    pub sembias: SemBiasReport,
    pub separation: Option<f64>,
    pub je_first: Option<f64>,
    pub je_last: Option<f64>,
    /// Signed cosine of each profession with `he − she`.
    pub per_word: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    pub config: DemoConfig,
    pub vocab_size: usize,
    pub records: usize,
    pub rows: Vec<DemoRow>,
}

fn measure(
    data: &DemoData,
    name: &str,
    center: &Embeddings,
    sum: &Embeddings,
    sembias_emb: &Embeddings,
    cfg: &DemoConfig,
) -> Result<DemoRow> {
    let proj = gender_projection(center, &data.corpus.professions, "he", "she")?;
    let proj_sum = gender_projection(sum, &data.corpus.professions, "he", "she")?;
    let sembias = eval_sembias(
        sembias_emb,
        &data.corpus.sembias(cfg.seed)?,
        "he",
        "she",
        cfg.threads,
    )?;
    Ok(DemoRow {
        name: name.to_owned(),
        projection: proj.mean_abs_cosine,
        projection_sum: proj_sum.mean_abs_cosine,
        sembias,
        separation: None,
        je_first: None,
        je_last: None,
        per_word: proj.per_word,
    })
}

pub fn run_demo(cfg: &DemoConfig) -> Result<DemoReport> {
    let data = DemoData::prepare(cfg)?;
    let mut rows = Vec::new();
    let mut glove_sum = None;
    for variant in [Variant::Glove, Variant::GnL1, Variant::GnL2] {
        log::info!("training {}", variant.name());
        let (model, outcome) = train_variant(&data, variant, cfg)?;
        let sum = model.embeddings(&data.words, EmbeddingMode::Sum)?;
        let center = projection_table(&model, &data.words, variant, EmbeddingMode::Center)?;
        let proj_sum = projection_table(&model, &data.words, variant, EmbeddingMode::Sum)?;
        let mut row = measure(&data, variant.name(), &center, &proj_sum, &sum, cfg)?;
        if variant != Variant::Glove {
            row.separation = Some(gender_separation(&model, &data.lexicon)?);
            row.je_first = outcome.losses.first().map(|l| l.j_e);
            row.je_last = outcome.losses.last().map(|l| l.j_e);
        }
        rows.push(row);
        if variant == Variant::Glove {
            glove_sum = Some(sum);
        }
    }
    let glove_sum = glove_sum.unwrap();
    let hard = hard_debias(&glove_sum, &data.lexicon, &data.lexicon.pairs, 1, cfg.threads)?;
    let row = measure(
        &data,
        "Hard-GloVe",
        &hard.embeddings,
        &hard.embeddings,
        &hard.embeddings,
        cfg,
    )?;
    rows.insert(1, row);
    Ok(DemoReport {
        config: cfg.clone(),
        vocab_size: data.vocab.len(),
        records: data.records.len(),
        rows,
    })
}

impl DemoReport {
    /// One `<model>.projection.csv` per row.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for row in &self.rows {
            let mut s = String::from("word,cosine\n");
            for (w, c) in &row.per_word {
                s.push_str(&format!("{w},{c:.6}\n"));
            }
            let p = dir.join(format!("{}.projection.csv", row.name));
            fs::write(&p, s).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

impl fmt::Display for DemoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "synthetic corpus: seed={} tokens={} V={} records={} d={} k={}",
            self.config.seed,
            self.config.tokens,
            self.vocab_size,
            self.records,
            self.config.dim,
            self.config.gender_dims
        )?;
        writeln!(
            f,
            "{:<12} {:>10} {:>10} {:>10} {:>10} {:>8} {:>10} {:>10} {:>10}",
            "model",
            "proj",
            "proj(sum)",
            "definition",
            "stereotype",
            "none",
            "w(g) sep",
            "J_E first",
            "J_E last"
        )?;
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:>10.4} {:>10.4} {:>10.1} {:>10.1} {:>8.1} {:>10} {:>10} {:>10}",
                r.name,
                r.projection,
                r.projection_sum,
                r.sembias.definition,
                r.sembias.stereotype,
                r.sembias.none,
                opt(r.separation),
                opt(r.je_first),
                opt(r.je_last)
            )?;
        }
        Ok(())
    }
}
