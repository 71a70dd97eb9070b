//! Dense word-vector tables and their text format.
//!
//! One `word v1 ... vd` line per word, six decimal places, no header.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexicon::WordIndex;

#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    words: Vec<String>,
    index: HashMap<String, u32>,
    dim: usize,
    data: Vec<f64>,
}

impl Embeddings {
    /// `data` is row-major, `words.len() * dim` long.
    pub fn new(words: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != words.len() * dim {
            return Err(Error::Dimension {
                expected: words.len() * dim,
                got: data.len(),
            });
        }
        let index: HashMap<String, u32> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        if index.len() != words.len() {
            return Err(Error::Config("duplicate words in embedding table".into()));
        }
        Ok(Embeddings {
            words,
            index,
            dim,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let s = id as usize * self.dim;
        &self.data[s..s + self.dim]
    }

    pub fn row_mut(&mut self, id: u32) -> &mut [f64] {
        let s = id as usize * self.dim;
        &mut self.data[s..s + self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.id(word).map(|id| self.row(id))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy with every non-zero row scaled to unit length.
    pub fn normalized(&self) -> Embeddings {
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.dim.max(1)) {
            let n = norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
        out
    }

    /// Keeps dimensions `range` of every row.
    pub fn slice_dims(&self, range: std::ops::Range<usize>) -> Embeddings {
        let dim = range.len();
        let mut data = Vec::with_capacity(self.len() * dim);
        for id in 0..self.len() as u32 {
            data.extend_from_slice(&self.row(id)[range.clone()]);
        }
        Embeddings {
            words: self.words.clone(),
            index: self.index.clone(),
            dim,
            data,
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for (id, w) in self.words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "word {w:?} cannot be written: empty or contains whitespace"
                )));
            }
            line.clear();
            line.push_str(w);
            for v in self.row(id as u32) {
                write!(line, " {v:.6}").unwrap();
            }
            line.push('\n');
            out.write_all(line.as_bytes())
                .map_err(|e| Error::io("<embeddings>", e))?;
        }
        out.flush().map_err(|e| Error::io("<embeddings>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap();
            let before = data.len();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(path, n + 1, format!("bad number {f:?}")))?;
                data.push(v);
            }
            let d = data.len() - before;
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(Error::parse(
                        path,
                        n + 1,
                        format!("expected {expected} values, found {d}"),
                    ))
                }
                _ => {}
            }
            words.push(word.to_owned());
        }
        Embeddings::new(words, dim.unwrap_or(0), data).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, 0, msg),
            other => other,
        })
    }
}

impl WordIndex for Embeddings {
    fn id_of(&self, word: &str) -> Option<u32> {
        self.id(word)
    }

    fn size(&self) -> usize {
        self.len()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
