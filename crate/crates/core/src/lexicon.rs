//! Gender word lists resolved against a vocabulary.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::corpus::Vocab;
use crate::error::{Error, Result};

/// Anything that maps words to dense ids `0..len`.
pub trait WordIndex {
    fn id_of(&self, word: &str) -> Option<u32>;
    fn size(&self) -> usize;
}

impl WordIndex for Vocab {
    fn id_of(&self, word: &str) -> Option<u32> {
        self.id(word)
    }

    fn size(&self) -> usize {
        self.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WordClass {
    Male,
    Female,
    Neutral,
}

/// Male-definition, female-definition and neutral word ids plus the seed
/// pairs used to estimate the gender direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenderLexicon {
    pub male_ids: Vec<u32>,
    pub female_ids: Vec<u32>,
    pub neutral_ids: Vec<u32>,
    pub pairs: Vec<(u32, u32)>,
    pub skipped: Vec<String>,
    classes: Vec<WordClass>,
}

impl GenderLexicon {
    pub fn class_of(&self, id: u32) -> WordClass {
        self.classes[id as usize]
    }

    pub fn vocab_size(&self) -> usize {
        self.classes.len()
    }

    /// A lexicon with every word neutral and no pairs.
    pub fn all_neutral(vocab_size: usize) -> Self {
        GenderLexicon {
            male_ids: Vec::new(),
            female_ids: Vec::new(),
            neutral_ids: (0..vocab_size as u32).collect(),
            pairs: Vec::new(),
            skipped: Vec::new(),
            classes: vec![WordClass::Neutral; vocab_size],
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes)
        .map_err(|e| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// One word per line; blanks and `#` comments skipped; first occurrence wins.
pub fn parse_word_list(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    content_lines(text)
        .filter(|(_, l)| seen.insert(l.to_string()))
        .map(|(_, l)| l.to_owned())
        .collect()
}

pub fn load_word_list(path: &Path) -> Result<Vec<String>> {
    Ok(parse_word_list(&read_text(path)?))
}

/// One `male female` pair per line, separated by a tab or spaces.
pub fn parse_pairs(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    content_lines(text)
        .map(|(n, l)| {
            let fields: Vec<&str> = l.split_whitespace().collect();
            match fields.as_slice() {
                [m, f] => Ok((m.to_string(), f.to_string())),
                _ => Err(Error::parse(
                    origin,
                    n,
                    format!("expected 2 fields, found {}", fields.len()),
                )),
            }
        })
        .collect()
}

pub fn load_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    parse_pairs(&read_text(path)?, path)
}

/// Resolves word lists to ids. Neutral words are everything not listed as
/// male or female. Unknown words and pairs with an unknown member are
/// recorded in `skipped`.
pub fn build_lexicon<V: WordIndex + ?Sized>(
    vocab: &V,
    male: &[String],
    female: &[String],
    pairs: &[(String, String)],
) -> Result<GenderLexicon> {
    let female_set: HashSet<&str> = female.iter().map(String::as_str).collect();
    let mut overlap: Vec<String> = male
        .iter()
        .filter(|w| female_set.contains(w.as_str()))
        .cloned()
        .collect();
    if !overlap.is_empty() {
        overlap.dedup();
        return Err(Error::LexiconOverlap(overlap));
    }

    let v = vocab.size();
    let mut classes = vec![WordClass::Neutral; v];
    let mut skipped = Vec::new();
    let mut resolve = |words: &[String], class: WordClass, skipped: &mut Vec<String>| {
        let mut ids = Vec::new();
        for w in words {
            match vocab.id_of(w) {
                Some(id) if classes[id as usize] == WordClass::Neutral => {
                    classes[id as usize] = class;
                    ids.push(id);
                }
                Some(_) => {}
                None => skipped.push(w.clone()),
            }
        }
        ids.sort_unstable();
        ids
    };
    let male_ids = resolve(male, WordClass::Male, &mut skipped);
    let female_ids = resolve(female, WordClass::Female, &mut skipped);

    let mut resolved_pairs = Vec::new();
    for (m, f) in pairs {
        match (vocab.id_of(m), vocab.id_of(f)) {
            (Some(mi), Some(fi))
                if classes[mi as usize] == WordClass::Male && classes[fi as usize] == WordClass::Female =>
            {
                resolved_pairs.push((mi, fi));
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(format!(
                    "pair ({m}, {f}) must be listed in the male and female word lists"
                )));
            }
            _ => {
                skipped.push(m.clone());
                skipped.push(f.clone());
            }
        }
    }

    let neutral_ids = (0..v as u32)
        .filter(|&id| classes[id as usize] == WordClass::Neutral)
        .collect();
    Ok(GenderLexicon {
        male_ids,
        female_ids,
        neutral_ids,
        pairs: resolved_pairs,
        skipped,
        classes,
    })
}
