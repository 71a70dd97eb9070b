//! Synthetic corpus with planted gender structure.
//!
//! Sentences come from a handful of templates over four word groups:
//! gender-definition words (always used with pronouns of their own gender),
//! stereotyped professions (used with the stereotyped gender's pronouns with
//! probability `stereotype_strength`), topical filler words, and function
//! words. Two definition pairs appear in the text but are left out of the
//! gender word lists so their recovery can be checked separately.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{build_sembias, SemBiasInstance};

const DEFINITION_PAIRS: &[(&str, &str)] = &[
    ("he", "she"),
    ("him", "her"),
    ("his", "hers"),
    ("man", "woman"),
    ("men", "women"),
    ("boy", "girl"),
    ("boys", "girls"),
    ("father", "mother"),
    ("son", "daughter"),
    ("brother", "sister"),
    ("husband", "wife"),
    ("king", "queen"),
    ("prince", "princess"),
    ("uncle", "aunt"),
    ("nephew", "niece"),
    ("grandfather", "grandmother"),
    ("gentleman", "lady"),
    ("mr", "mrs"),
    ("waiter", "waitress"),
    ("actor", "actress"),
];

/// In the text, absent from the word lists.
const HELD_OUT_PAIRS: &[(&str, &str)] = &[("monk", "nun"), ("steward", "stewardess")];

const MALE_PROFESSIONS: &[&str] = &[
    "engineer",
    "carpenter",
    "mechanic",
    "pilot",
    "surgeon",
    "programmer",
    "architect",
    "plumber",
    "electrician",
    "firefighter",
    "soldier",
    "banker",
    "manager",
    "farmer",
    "builder",
    "physicist",
    "janitor",
    "guard",
    "captain",
    "welder",
];

const FEMALE_PROFESSIONS: &[&str] = &[
    "nurse",
    "receptionist",
    "secretary",
    "librarian",
    "hairdresser",
    "nanny",
    "housekeeper",
    "dancer",
    "stylist",
    "florist",
    "teacher",
    "cashier",
    "baker",
    "designer",
    "therapist",
    "tailor",
    "maid",
    "clerk",
    "midwife",
    "typist",
];

const TOPICS: &[&str] = &[
    "animal", "food", "tool", "plant", "river", "city", "color", "music", "sport", "metal", "fabric",
    "vehicle", "weather", "insect", "bird", "fish", "fruit", "stone", "drink", "game", "planet", "dance",
    "spice", "flower", "tree", "shape", "device", "coin", "boat", "book",
];

const VERBS: &[&str] = &[
    "saw", "took", "found", "moved", "painted", "carried", "counted", "cleaned", "bought", "sold", "watched",
    "held",
];

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub seed: u64,
    /// Generation stops once this many tokens have been emitted.
    pub tokens: usize,
    pub words_per_topic: usize,
    /// Probability that a profession appears with its stereotyped gender.
    pub stereotype_strength: f64,
    /// Sentences per line; a line is a paragraph about one subject.
    pub sentences_per_line: usize,
    /// Fraction of person sentences that also mention a second person of
    /// random gender.
    pub mixed_share: f64,
    /// Fraction of lines about a profession.
    pub profession_share: f64,
    /// Fraction of lines about a gender-definition word. The rest are topical.
    pub definition_share: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            tokens: 200_000,
            words_per_topic: 30,
            stereotype_strength: 0.9,
            sentences_per_line: 4,
            mixed_share: 0.5,
            profession_share: 0.3,
            definition_share: 0.3,
        }
    }
}

type Pair = (String, String);

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub lines: Vec<String>,
    pub male_words: Vec<String>,
    pub female_words: Vec<String>,
    /// Seed pairs for the gender direction.
    pub pairs: Vec<Pair>,
    /// Definition pairs used in text but absent from the word lists.
    pub held_out_pairs: Vec<Pair>,
    /// Stereotyped professions, male-leaning first.
    pub professions: Vec<String>,
    pub stereotype_pairs: Vec<Pair>,
    /// Same-topic filler pairs.
    pub none_pairs: Vec<Pair>,
    /// Filler-word similarity triples (`a b score`).
    pub similarity: Vec<(String, String, f64)>,
    /// Gender analogies in `A B C D` order for the `A − B + C` query.
    pub analogies: Vec<[String; 4]>,
}

fn owned(pairs: &[(&str, &str)]) -> Vec<Pair> {
    pairs
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect()
}

struct Generator<'a> {
    rng: ChaCha8Rng,
    cfg: &'a SynthConfig,
    filler_weights: WeightedIndex<f64>,
}

impl Generator<'_> {
    fn filler(&mut self, topic: usize) -> String {
        let k = self.filler_weights.sample(&mut self.rng);
        format!("{}{}", TOPICS[topic], k)
    }

    fn topic(&mut self) -> usize {
        self.rng.gen_range(0..TOPICS.len())
    }

    fn verb(&mut self) -> &'static str {
        VERBS[self.rng.gen_range(0..VERBS.len())]
    }

    fn person(&mut self, male: bool) -> Person {
        let side = |p: (&'static str, &'static str)| if male { p.0 } else { p.1 };
        let noun = DEFINITION_PAIRS[3 + self.rng.gen_range(0..DEFINITION_PAIRS.len() - 3)];
        Person {
            subj: side(("he", "she")),
            obj: side(("him", "her")),
            poss: side(("his", "her")),
            pred: side(("his", "hers")),
            noun: side(noun),
        }
    }

    /// A second person of either gender, present in a `mixed_share` of
    /// sentences.
    fn other(&mut self) -> Option<Person> {
        if self.rng.gen_bool(self.cfg.mixed_share) {
            let male = self.rng.gen_bool(0.5);
            Some(self.person(male))
        } else {
            None
        }
    }

    /// One sentence whose subject is `name` (a profession or definition
    /// word, with article) of the given gender.
    fn person_sentence(&mut self, name: &str, male: bool, topic: usize, out: &mut String) {
        let p = self.person(male);
        let (f1, f2) = (self.filler(topic), self.filler(topic));
        let verb = self.verb();
        sep(out);
        match self.other() {
            None => match self.rng.gen_range(0..4) {
                0 => write!(
                    out,
                    "{name} said that {} {verb} the {f1} with {} {f2}",
                    p.subj, p.poss
                ),
                1 => write!(
                    out,
                    "{} is {name} and {} {verb} the {f1} near the {f2}",
                    p.subj, p.subj
                ),
                2 => write!(
                    out,
                    "{name} and the {} {verb} {} {f1} and the {f2}",
                    p.noun, p.poss
                ),
                _ => write!(
                    out,
                    "the {f1} near {name} was {} and the {f2} {verb} {}",
                    p.pred, p.obj
                ),
            },
            Some(q) => match self.rng.gen_range(0..3) {
                0 => write!(out, "{name} told the {} that {} {verb} the {f1}", q.noun, q.subj),
                1 => write!(
                    out,
                    "{} gave {} the {f1} and {name} {verb} the {f2}",
                    q.subj, p.obj,
                ),
                _ => write!(
                    out,
                    "{name} {verb} {} {f1} while the {} {verb} {} {f2}",
                    p.poss, q.noun, q.poss
                ),
            },
        }
        .unwrap();
    }

    /// A paragraph about one person with a stereotyped profession.
    fn profession_paragraph(&mut self, sentences: usize, out: &mut String) {
        let male_leaning = self.rng.gen_bool(0.5);
        let list = if male_leaning {
            MALE_PROFESSIONS
        } else {
            FEMALE_PROFESSIONS
        };
        let idx = self.rng.gen_range(0..list.len());
        let name = format!("the {}", list[idx]);
        let male = male_leaning == self.rng.gen_bool(self.cfg.stereotype_strength);
        // Each profession has a home topic so it carries non-gender meaning.
        let topic = (idx * 7 + usize::from(male_leaning) * 3) % TOPICS.len();
        for _ in 0..sentences {
            self.person_sentence(&name, male, topic, out);
        }
    }

    /// A paragraph about one gender-definition word.
    fn definition_paragraph(&mut self, sentences: usize, out: &mut String) {
        let all = DEFINITION_PAIRS.len() + HELD_OUT_PAIRS.len();
        let i = self.rng.gen_range(0..all);
        let pair = DEFINITION_PAIRS
            .get(i)
            .unwrap_or_else(|| &HELD_OUT_PAIRS[i - DEFINITION_PAIRS.len()]);
        let male = self.rng.gen_bool(0.5);
        let name = format!("the {}", if male { pair.0 } else { pair.1 });
        for _ in 0..sentences {
            let topic = self.topic();
            self.person_sentence(&name, male, topic, out);
        }
    }

    fn topic_paragraph(&mut self, sentences: usize, out: &mut String) {
        let topic = self.topic();
        for _ in 0..sentences {
            let (a, b, c) = (self.filler(topic), self.filler(topic), self.filler(topic));
            let verb = self.verb();
            sep(out);
            match self.rng.gen_range(0..2) {
                0 => write!(out, "the {a} and the {b} {verb} the {c}"),
                _ => write!(out, "a {a} of {b} was {verb} with the {c}"),
            }
            .unwrap();
        }
    }
}

struct Person {
    subj: &'static str,
    obj: &'static str,
    poss: &'static str,
    pred: &'static str,
    noun: &'static str,
}

fn sep(out: &mut String) {
    if !out.is_empty() {
        out.push(' ');
    }
}

impl SynthCorpus {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        if cfg.sentences_per_line == 0 {
            return Err(Error::Config("sentences_per_line must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&cfg.mixed_share) {
            return Err(Error::Config("mixed_share must be in [0, 1]".into()));
        }
        let shares = [cfg.profession_share, cfg.definition_share];
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) || shares.iter().sum::<f64>() > 1.0 {
            return Err(Error::Config(
                "line shares must lie in [0, 1] and sum to at most 1".into(),
            ));
        }
        if cfg.words_per_topic < 4 {
            return Err(Error::Config("words_per_topic must be >= 4".into()));
        }
        if !(0.0..=1.0).contains(&cfg.stereotype_strength) {
            return Err(Error::Config("stereotype_strength must be in [0, 1]".into()));
        }
        // Zipf-like frequencies within each topic.
        let weights: Vec<f64> = (1..=cfg.words_per_topic).map(|r| 1.0 / r as f64).collect();
        let mut g = Generator {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            filler_weights: WeightedIndex::new(weights).unwrap(),
        };
        let mut lines = Vec::new();
        let mut tokens = 0;
        let mut line = String::new();
        while tokens < cfg.tokens {
            line.clear();
            let n = cfg.sentences_per_line;
            let u: f64 = g.rng.gen();
            if u < cfg.profession_share {
                g.profession_paragraph(n, &mut line);
            } else if u < cfg.profession_share + cfg.definition_share {
                g.definition_paragraph(n, &mut line);
            } else {
                g.topic_paragraph(n, &mut line);
            }
            tokens += line.split_whitespace().count();
            lines.push(line.clone());
        }

        let none_pairs = (0..29)
            .map(|i| {
                let t = TOPICS[i % TOPICS.len()];
                (format!("{t}{}", i % 3), format!("{t}{}", i % 3 + 1))
            })
            .collect();
        let mut similarity = Vec::new();
        for (i, t) in TOPICS.iter().enumerate() {
            let other = TOPICS[(i + 1) % TOPICS.len()];
            similarity.push((format!("{t}0"), format!("{t}1"), 9.0 - (i % 3) as f64 * 0.1));
            similarity.push((format!("{t}0"), format!("{other}0"), 1.0 + (i % 3) as f64 * 0.1));
        }
        let analogies = [
            ("king", "queen"),
            ("father", "mother"),
            ("brother", "sister"),
            ("uncle", "aunt"),
        ]
        .iter()
        .flat_map(|&(a, b)| {
            [("man", "woman"), ("boy", "girl")]
                .iter()
                .map(move |&(c, d)| [a, c, d, b].map(String::from))
        })
        .collect();

        Ok(SynthCorpus {
            lines,
            male_words: DEFINITION_PAIRS.iter().map(|p| p.0.to_string()).collect(),
            female_words: DEFINITION_PAIRS.iter().map(|p| p.1.to_string()).collect(),
            pairs: owned(DEFINITION_PAIRS),
            held_out_pairs: owned(HELD_OUT_PAIRS),
            professions: MALE_PROFESSIONS
                .iter()
                .chain(FEMALE_PROFESSIONS)
                .map(|s| s.to_string())
                .collect(),
            stereotype_pairs: MALE_PROFESSIONS
                .iter()
                .zip(FEMALE_PROFESSIONS)
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            none_pairs,
            similarity,
            analogies,
        })
    }

    /// All definition pairs (seed pairs plus held-out ones).
    pub fn definition_pairs(&self) -> Vec<Pair> {
        self.pairs.iter().chain(&self.held_out_pairs).cloned().collect()
    }

    pub fn sembias(&self, seed: u64) -> Result<Vec<SemBiasInstance>> {
        build_sembias(
            &self.definition_pairs(),
            &self.stereotype_pairs,
            &self.none_pairs,
            seed,
        )
    }

    pub fn token_count(&self) -> usize {
        self.lines.iter().map(|l| l.split_whitespace().count()).sum()
    }

    /// Writes corpus, word lists and evaluation files into `dir`.
    pub fn write_to_dir(&self, dir: &Path, sembias_seed: u64) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let lines = |items: &mut dyn Iterator<Item = String>| {
            let mut s = String::new();
            for i in items {
                s.push_str(&i);
                s.push('\n');
            }
            s
        };
        let files = [
            ("corpus.txt", lines(&mut self.lines.iter().cloned())),
            ("male.txt", lines(&mut self.male_words.iter().cloned())),
            ("female.txt", lines(&mut self.female_words.iter().cloned())),
            (
                "pairs.txt",
                lines(&mut self.pairs.iter().map(|(a, b)| format!("{a}\t{b}"))),
            ),
            ("professions.txt", lines(&mut self.professions.iter().cloned())),
            (
                "sembias.txt",
                lines(&mut self.sembias(sembias_seed)?.iter().map(|i| i.to_line())),
            ),
            (
                "similarity.txt",
                lines(&mut self.similarity.iter().map(|(a, b, s)| format!("{a} {b} {s}"))),
            ),
            (
                "analogy.txt",
                lines(
                    &mut std::iter::once(": gender".to_string())
                        .chain(self.analogies.iter().map(|q| q.join(" "))),
                ),
            ),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
