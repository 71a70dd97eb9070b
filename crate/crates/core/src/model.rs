//! Trainable state: center and context vectors, biases and their AdaGrad
//! accumulators.
//!
//! Each center row `w` is split into a neutral part (the first `d - k`
//! dimensions) and a gendered part (the last `k` dimensions).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::Embeddings;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub gender_dims: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 300,
            gender_dims: 1,
            seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gender_dims == 0 || self.gender_dims >= self.dim {
            return Err(Error::Config(format!(
                "need 1 <= gender dims < dim, got k={} d={}",
                self.gender_dims, self.dim
            )));
        }
        Ok(())
    }

    pub fn neutral_dims(&self) -> usize {
        self.dim - self.gender_dims
    }
}

/// Which vectors an embedding export contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingMode {
    /// Center vectors `w` only.
    Center,
    /// `w + w̃`.
    Sum,
    /// The sum representation written as two files, `<path>.neutral` and
    /// `<path>.gender`.
    Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab_size: usize,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub center_bias: Vec<f64>,
    pub context_bias: Vec<f64>,
    pub grad_acc_center: Vec<f64>,
    pub grad_acc_context: Vec<f64>,
    pub grad_acc_center_bias: Vec<f64>,
    pub grad_acc_context_bias: Vec<f64>,
}

impl Model {
    /// GloVe-style initialization: every parameter uniform on
    /// `(-0.5/d, 0.5/d)`, accumulators at 1.
    pub fn init(config: ModelConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(Error::Empty("vocabulary".into()));
        }
        let d = config.dim;
        let scale = 1.0 / d as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| (rng.sample::<f64, _>(Open01) - 0.5) * scale)
                .collect()
        };
        let center = draw(vocab_size * d);
        let context = draw(vocab_size * d);
        let center_bias = draw(vocab_size);
        let context_bias = draw(vocab_size);
        Ok(Model {
            config,
            vocab_size,
            center,
            context,
            center_bias,
            context_bias,
            grad_acc_center: vec![1.0; vocab_size * d],
            grad_acc_context: vec![1.0; vocab_size * d],
            grad_acc_center_bias: vec![1.0; vocab_size],
            grad_acc_context_bias: vec![1.0; vocab_size],
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn neutral_dims(&self) -> usize {
        self.config.neutral_dims()
    }

    fn check(&self, id: u32) -> Result<usize> {
        let id = id as usize;
        if id >= self.vocab_size {
            return Err(Error::OutOfRange {
                id,
                len: self.vocab_size,
            });
        }
        Ok(id * self.dim())
    }

    pub fn center_row(&self, id: u32) -> Result<&[f64]> {
        let s = self.check(id)?;
        Ok(&self.center[s..s + self.dim()])
    }

    pub fn context_row(&self, id: u32) -> Result<&[f64]> {
        let s = self.check(id)?;
        Ok(&self.context[s..s + self.dim()])
    }

    pub fn center_row_mut(&mut self, id: u32) -> Result<&mut [f64]> {
        let s = self.check(id)?;
        let d = self.dim();
        Ok(&mut self.center[s..s + d])
    }

    pub fn context_row_mut(&mut self, id: u32) -> Result<&mut [f64]> {
        let s = self.check(id)?;
        let d = self.dim();
        Ok(&mut self.context[s..s + d])
    }

    /// `w^(a)`: the first `d - k` entries of the center row.
    pub fn neutral_part(&self, id: u32) -> Result<&[f64]> {
        let n = self.neutral_dims();
        Ok(&self.center_row(id)?[..n])
    }

    /// `w^(g)`: the last `k` entries of the center row.
    pub fn gender_part(&self, id: u32) -> Result<&[f64]> {
        let n = self.neutral_dims();
        Ok(&self.center_row(id)?[n..])
    }

    /// Center plus context vector, the usual final word representation.
    pub fn representation(&self, id: u32) -> Result<Vec<f64>> {
        let c = self.center_row(id)?;
        let x = self.context_row(id)?;
        Ok(c.iter().zip(x).map(|(a, b)| a + b).collect())
    }

    /// Builds an embedding table over `words` (in id order).
    pub fn embeddings(&self, words: &[String], mode: EmbeddingMode) -> Result<Embeddings> {
        if words.len() != self.vocab_size {
            return Err(Error::Dimension {
                expected: self.vocab_size,
                got: words.len(),
            });
        }
        let data = match mode {
            EmbeddingMode::Center => self.center.clone(),
            EmbeddingMode::Sum | EmbeddingMode::Split => self
                .center
                .iter()
                .zip(&self.context)
                .map(|(a, b)| a + b)
                .collect(),
        };
        Embeddings::new(words.to_vec(), self.dim(), data)
    }

    /// Writes the requested export and returns the paths written.
    pub fn save_embeddings(
        &self,
        words: &[String],
        path: &Path,
        mode: EmbeddingMode,
    ) -> Result<Vec<PathBuf>> {
        let table = self.embeddings(words, mode)?;
        match mode {
            EmbeddingMode::Center | EmbeddingMode::Sum => {
                table.save(path)?;
                Ok(vec![path.to_path_buf()])
            }
            EmbeddingMode::Split => {
                let n = self.neutral_dims();
                let neutral = with_suffix(path, "neutral");
                let gender = with_suffix(path, "gender");
                table.slice_dims(0..n).save(&neutral)?;
                table.slice_dims(n..self.dim()).save(&gender)?;
                Ok(vec![neutral, gender])
            }
        }
    }

    fn tensors(&self) -> [&Vec<f64>; 8] {
        [
            &self.center,
            &self.context,
            &self.center_bias,
            &self.context_bias,
            &self.grad_acc_center,
            &self.grad_acc_context,
            &self.grad_acc_center_bias,
            &self.grad_acc_context_bias,
        ]
    }

    /// Binary checkpoint: magic `GNEM`, then u32 version, V, d, k, then
    /// every tensor as little-endian f64.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        for v in [
            CHECKPOINT_VERSION,
            self.vocab_size as u32,
            self.dim() as u32,
            self.config.gender_dims as u32,
        ] {
            out.write_all(&v.to_le_bytes())?;
        }
        for t in self.tensors() {
            for v in t.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    }

    pub fn read_checkpoint<R: Read>(mut input: R, seed: u64) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("invalid checkpoint: {msg}"));
        let io = |e| Error::io("<checkpoint>", e);
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut header = [0u32; 4];
        for h in header.iter_mut() {
            let mut b = [0u8; 4];
            input.read_exact(&mut b).map_err(io)?;
            *h = u32::from_le_bytes(b);
        }
        let [version, v, d, k] = header;
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let (v, d) = (v as usize, d as usize);
        let config = ModelConfig {
            dim: d,
            gender_dims: k as usize,
            seed,
        };
        config.validate()?;
        let mut read = |n: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; n * 8];
            input.read_exact(&mut bytes).map_err(io)?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        Ok(Model {
            config,
            vocab_size: v,
            center: read(v * d)?,
            context: read(v * d)?,
            center_bias: read(v)?,
            context_bias: read(v)?,
            grad_acc_center: read(v * d)?,
            grad_acc_context: read(v * d)?,
            grad_acc_center_bias: read(v)?,
            grad_acc_context_bias: read(v)?,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_checkpoint(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path, seed: u64) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(BufReader::new(file), seed)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"GNEM";
const CHECKPOINT_VERSION: u32 = 1;

/// `path` with `.suffix` appended to the full file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}
