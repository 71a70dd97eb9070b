//! Embedding quality and bias metrics: word similarity, word analogy,
//! gender relational analogy (SemBias-style) and the gender projection.
//!
//! Every metric skips instances with out-of-vocabulary words and reports the
//! fraction it could score as `coverage`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{dot, norm, Embeddings};
use crate::error::{Error, Result};
use crate::par;

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            got: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine of a zero vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Fractional ranks, 1-based; ties share their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            out[idx] = avg;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Empty("spearman needs at least 2 points".into()));
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero rank variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub coverage: f64,
}

impl EvalReport {
    /// `metric<TAB>value<TAB>coverage`.
    pub fn tsv(&self) -> String {
        format!("{}\t{:.6}\t{:.6}", self.metric, self.value, self.coverage)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityDataset {
    pub name: String,
    pub triples: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    /// `word1 word2 score` per line, whitespace separated.
    pub fn parse(name: &str, text: &str, origin: &Path) -> Result<Self> {
        let mut triples = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let [a, b, s] = f.as_slice() else {
                return Err(Error::parse(origin, n + 1, "expected `word1 word2 score`"));
            };
            let s: f64 = s
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::parse(origin, n + 1, format!("bad score {s:?}")))?;
            triples.push((a.to_string(), b.to_string(), s));
        }
        if triples.is_empty() {
            return Err(Error::Empty(format!("similarity dataset {name}")));
        }
        Ok(SimilarityDataset {
            name: name.to_owned(),
            triples,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path
            .file_stem()
            .map_or("similarity".into(), |s| s.to_string_lossy().into_owned());
        Self::parse(&name, &read_text(path)?, path)
    }
}

/// Spearman correlation between cosine similarity and human scores.
pub fn eval_similarity(emb: &Embeddings, dataset: &SimilarityDataset) -> Result<EvalReport> {
    let mut model = Vec::new();
    let mut human = Vec::new();
    for (a, b, s) in &dataset.triples {
        if let (Some(u), Some(v)) = (emb.get(a), emb.get(b)) {
            if let Ok(c) = cosine(u, v) {
                model.push(c);
                human.push(*s);
            }
        }
    }
    let coverage = model.len() as f64 / dataset.triples.len() as f64;
    if model.len() < 2 {
        return Err(Error::Empty(format!(
            "{}: fewer than 2 in-vocabulary pairs (coverage {coverage})",
            dataset.name
        )));
    }
    Ok(EvalReport {
        metric: format!("similarity:{}", dataset.name),
        value: spearman(&model, &human)?,
        coverage,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyQuad {
    pub words: [String; 4],
    pub section: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyDataset {
    pub quads: Vec<AnalogyQuad>,
}

impl AnalogyDataset {
    /// Google format: `A B C D` lines, `: section` headers.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut section = String::new();
        let mut quads = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                section = name.trim().to_owned();
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let [a, b, c, d] = f.as_slice() else {
                return Err(Error::parse(origin, n + 1, "expected 4 words"));
            };
            quads.push(AnalogyQuad {
                words: [a, b, c, d].map(|w| w.to_string()),
                section: section.clone(),
            });
        }
        if quads.is_empty() {
            return Err(Error::Empty("analogy dataset".into()));
        }
        Ok(AnalogyDataset { quads })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }
}

/// How the analogy query vector is formed for "A is to B as C is to D".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalogyForm {
    /// `A − B + C`.
    #[default]
    Paper,
    /// `B − A + C`.
    Conventional,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalogyReport {
    pub overall: EvalReport,
    /// Per section: (correct, scored, total).
    pub sections: BTreeMap<String, (usize, usize, usize)>,
}

/// 3CosAdd over unit-normalized vectors, excluding the three query words.
pub fn eval_analogy(
    emb: &Embeddings,
    dataset: &AnalogyDataset,
    form: AnalogyForm,
    threads: usize,
) -> Result<AnalogyReport> {
    let unit = emb.normalized();
    let d = unit.dim();
    let outcome = |q: &AnalogyQuad| -> Option<bool> {
        let ids: Vec<u32> = q.words.iter().map(|w| unit.id(w)).collect::<Option<_>>()?;
        let (a, b, c) = (unit.row(ids[0]), unit.row(ids[1]), unit.row(ids[2]));
        let query: Vec<f64> = (0..d)
            .map(|k| match form {
                AnalogyForm::Paper => a[k] - b[k] + c[k],
                AnalogyForm::Conventional => b[k] - a[k] + c[k],
            })
            .collect();
        let mut best: Option<(u32, f64)> = None;
        for id in 0..unit.len() as u32 {
            if ids[..3].contains(&id) {
                continue;
            }
            let s = dot(unit.row(id), &query);
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((id, s));
            }
        }
        Some(best.is_some_and(|(id, _)| id == ids[3]))
    };
    let results = par::map_chunks(&dataset.quads, threads, outcome);

    let mut sections: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    let (mut correct, mut scored) = (0, 0);
    for (q, r) in dataset.quads.iter().zip(&results) {
        let e = sections.entry(q.section.clone()).or_default();
        e.2 += 1;
        if let Some(ok) = r {
            e.1 += 1;
            scored += 1;
            if *ok {
                e.0 += 1;
                correct += 1;
            }
        }
    }
    if scored == 0 {
        return Err(Error::Empty("no in-vocabulary analogy questions".into()));
    }
    Ok(AnalogyReport {
        overall: EvalReport {
            metric: "analogy".into(),
            value: correct as f64 / scored as f64,
            coverage: scored as f64 / dataset.quads.len() as f64,
        },
        sections,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairLabel {
    Definition,
    Stereotype,
    None,
}

impl PairLabel {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "definition" => Some(PairLabel::Definition),
            "stereotype" => Some(PairLabel::Stereotype),
            "none" => Some(PairLabel::None),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::Definition => "definition",
            PairLabel::Stereotype => "stereotype",
            PairLabel::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledPair {
    pub a: String,
    pub b: String,
    pub label: PairLabel,
}

/// Four candidate pairs: one definition, one stereotype, two unrelated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemBiasInstance {
    pub pairs: [LabeledPair; 4],
}

impl SemBiasInstance {
    pub fn new(pairs: [LabeledPair; 4]) -> Result<Self> {
        let mut labels: Vec<PairLabel> = pairs.iter().map(|p| p.label).collect();
        labels.sort();
        if labels
            != [
                PairLabel::Definition,
                PairLabel::Stereotype,
                PairLabel::None,
                PairLabel::None,
            ]
        {
            return Err(Error::Config(
                "instance needs one definition, one stereotype and two none pairs".into(),
            ));
        }
        Ok(SemBiasInstance { pairs })
    }

    /// Tab-separated `a:b/label` fields.
    pub fn to_line(&self) -> String {
        self.pairs
            .iter()
            .map(|p| format!("{}:{}/{}", p.a, p.b, p.label.as_str()))
            .collect::<Vec<_>>()
            .join("\t")
    }
}

pub fn parse_sembias(text: &str, origin: &Path) -> Result<Vec<SemBiasInstance>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: &str| Error::parse(origin, n + 1, m.to_owned());
        let fields: Vec<&str> = line.trim().split('\t').collect();
        if fields.len() != 4 {
            return Err(err("expected 4 tab-separated pairs"));
        }
        let mut pairs = Vec::with_capacity(4);
        for f in fields {
            let (words, label) = f.rsplit_once('/').ok_or_else(|| err("missing /label"))?;
            let label = PairLabel::parse(label).ok_or_else(|| err("unknown label"))?;
            let (a, b) = words.split_once(':').ok_or_else(|| err("pair must be a:b"))?;
            pairs.push(LabeledPair {
                a: a.to_owned(),
                b: b.to_owned(),
                label,
            });
        }
        let pairs: [LabeledPair; 4] = pairs.try_into().unwrap();
        out.push(SemBiasInstance::new(pairs).map_err(|e| err(&e.to_string()))?);
    }
    Ok(out)
}

pub fn load_sembias(path: &Path) -> Result<Vec<SemBiasInstance>> {
    parse_sembias(&read_text(path)?, path)
}

/// One instance per (definition, stereotype) combination, each with two
/// distinct none pairs drawn from the pool.
pub fn build_sembias(
    definition: &[(String, String)],
    stereotype: &[(String, String)],
    none: &[(String, String)],
    seed: u64,
) -> Result<Vec<SemBiasInstance>> {
    if definition.is_empty() || stereotype.is_empty() {
        return Err(Error::Empty("definition and stereotype pair lists".into()));
    }
    if none.len() < 2 {
        return Err(Error::Empty("none pool needs at least 2 pairs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lp = |(a, b): &(String, String), label| LabeledPair {
        a: a.clone(),
        b: b.clone(),
        label,
    };
    let mut out = Vec::with_capacity(definition.len() * stereotype.len());
    for d in definition {
        for s in stereotype {
            let picks = sample(&mut rng, none.len(), 2);
            out.push(SemBiasInstance {
                pairs: [
                    lp(d, PairLabel::Definition),
                    lp(s, PairLabel::Stereotype),
                    lp(&none[picks.index(0)], PairLabel::None),
                    lp(&none[picks.index(1)], PairLabel::None),
                ],
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemBiasReport {
    pub definition: f64,
    pub stereotype: f64,
    pub none: f64,
    pub coverage: f64,
    /// Predicted label per instance, `None` when the instance was skipped.
    pub predictions: Vec<Option<PairLabel>>,
}

impl SemBiasReport {
    pub fn tsv(&self) -> String {
        format!(
            "sembias\t{:.3}\t{:.3}\t{:.3}\t{:.6}",
            self.definition, self.stereotype, self.none, self.coverage
        )
    }
}

/// Picks, per instance, the pair whose difference is most cosine-similar to
/// `he − she`, and reports the percentage of picks per label.
pub fn eval_sembias(
    emb: &Embeddings,
    dataset: &[SemBiasInstance],
    he: &str,
    she: &str,
    threads: usize,
) -> Result<SemBiasReport> {
    let direction = difference(emb, he, she)?;
    let predict = |inst: &SemBiasInstance| -> Option<PairLabel> {
        let mut best: Option<(PairLabel, f64)> = None;
        for p in &inst.pairs {
            let diff: Vec<f64> = emb
                .get(&p.a)?
                .iter()
                .zip(emb.get(&p.b)?)
                .map(|(x, y)| x - y)
                .collect();
            let s = cosine(&direction, &diff).unwrap_or(f64::NEG_INFINITY);
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((p.label, s));
            }
        }
        best.map(|(l, _)| l)
    };
    let predictions = par::map_chunks(dataset, threads, predict);
    let scored = predictions.iter().flatten().count();
    if scored == 0 {
        return Err(Error::Empty("no in-vocabulary SemBias instances".into()));
    }
    let pct =
        |label| 100.0 * predictions.iter().filter(|p| **p == Some(label)).count() as f64 / scored as f64;
    Ok(SemBiasReport {
        definition: pct(PairLabel::Definition),
        stereotype: pct(PairLabel::Stereotype),
        none: pct(PairLabel::None),
        coverage: scored as f64 / dataset.len() as f64,
        predictions,
    })
}

fn difference(emb: &Embeddings, a: &str, b: &str) -> Result<Vec<f64>> {
    let missing = |w: &str| Error::Config(format!("{w:?} is not in the vocabulary"));
    let u = emb.get(a).ok_or_else(|| missing(a))?;
    let v = emb.get(b).ok_or_else(|| missing(b))?;
    Ok(u.iter().zip(v).map(|(x, y)| x - y).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionReport {
    /// Mean of `|cos(w, he − she)|`.
    pub mean_abs_cosine: f64,
    pub coverage: f64,
    /// Signed cosine per in-vocabulary word, in list order.
    pub per_word: Vec<(String, f64)>,
}

impl ProjectionReport {
    pub fn tsv(&self) -> String {
        format!("projection\t{:.6}\t{:.6}", self.mean_abs_cosine, self.coverage)
    }

    /// `word,cosine` rows.
    pub fn csv(&self) -> String {
        let mut s = String::from("word,cosine\n");
        for (w, c) in &self.per_word {
            s.push_str(&format!("{w},{c:.6}\n"));
        }
        s
    }
}

/// Average absolute cosine between each listed word and `he − she`.
pub fn gender_projection(
    emb: &Embeddings,
    words: &[String],
    he: &str,
    she: &str,
) -> Result<ProjectionReport> {
    let direction = difference(emb, he, she)?;
    let mut per_word = Vec::new();
    for w in words {
        if let Some(v) = emb.get(w) {
            if let Ok(c) = cosine(v, &direction) {
                per_word.push((w.clone(), c));
            }
        }
    }
    if per_word.is_empty() {
        return Err(Error::Empty("no in-vocabulary words to project".into()));
    }
    let mean = per_word.iter().map(|(_, c)| c.abs()).sum::<f64>() / per_word.len() as f64;
    Ok(ProjectionReport {
        mean_abs_cosine: mean,
        coverage: per_word.len() as f64 / words.len() as f64,
        per_word,
    })
}
