//! Vocabulary building and windowed co-occurrence counting.
//!
//! Counts are accumulated exactly: a pair at distance `δ` contributes
//! `lcm(1..=window) / δ` integer units, and units are converted to `f64` only
//! once per entry after merging. This makes the result independent of
//! summation order, so any number of workers and any spill pattern produce
//! bitwise-identical records.

use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

/// Largest supported window. `lcm(1..=32)` still leaves ~2^80 units of
/// headroom in a `u128` accumulator.
pub const MAX_WINDOW: usize = 32;

pub const DEFAULT_WINDOW: usize = 15;

/// Splits a line on Unicode whitespace, optionally lowercasing each token.
pub fn tokenize(line: &str, lowercase: bool) -> Vec<String> {
    line.split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_owned() })
        .collect()
}

/// Word list ordered by descending count, ties broken lexicographically.
/// A word's id is its position in that order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<(String, u64)>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from raw counts, dropping words below `min_count`.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Self {
        let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(id, (w, _))| (w.clone(), id as u32))
            .collect();
        Vocab { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(|(w, _)| w.as_str())
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.entries.get(id as usize).map(|(_, c)| *c)
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(w, _)| w.as_str())
    }

    /// Writes one `word count` line per entry in id order.
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (w, c) in &self.entries {
            writeln!(out, "{w} {c}")?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    /// Reads a vocabulary file. Entry order must already be the canonical
    /// (count desc, word asc) order.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(w), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(path, n + 1, "expected `word count`"));
            };
            let c: u64 = c
                .parse()
                .map_err(|_| Error::parse(path, n + 1, format!("bad count {c:?}")))?;
            entries.push((w.to_owned(), c));
        }
        let sorted = entries
            .windows(2)
            .all(|p| p[0].1 > p[1].1 || (p[0].1 == p[1].1 && p[0].0 < p[1].0));
        if !sorted {
            return Err(Error::parse(path, 0, "entries are not in canonical order"));
        }
        let index: HashMap<String, u32> = entries
            .iter()
            .enumerate()
            .map(|(id, (w, _))| (w.clone(), id as u32))
            .collect();
        if index.len() != entries.len() {
            return Err(Error::parse(path, 0, "duplicate words"));
        }
        Ok(Vocab { entries, index })
    }
}

/// Counts token frequencies over a stream and keeps words with at least
/// `min_count` occurrences.
pub fn build_vocab<I, S>(tokens: I, min_count: u64) -> Vocab
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for t in tokens {
        let t = t.as_ref();
        if let Some(c) = counts.get_mut(t) {
            *c += 1;
        } else {
            counts.insert(t.to_owned(), 1);
        }
    }
    Vocab::from_counts(counts, min_count.max(1))
}

/// Builds a vocabulary straight from corpus lines.
pub fn build_vocab_from_lines<S: AsRef<str>>(lines: &[S], lowercase: bool, min_count: u64) -> Vocab {
    build_vocab(
        lines.iter().flat_map(|l| tokenize(l.as_ref(), lowercase)),
        min_count,
    )
}

/// One weighted co-occurrence count `X[i][j]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CooccurrenceRecord {
    pub i: u32,
    pub j: u32,
    pub x: f64,
}

pub const RECORD_BYTES: usize = 16;

impl CooccurrenceRecord {
    pub fn to_bytes(self) -> [u8; RECORD_BYTES] {
        let mut b = [0u8; RECORD_BYTES];
        b[0..4].copy_from_slice(&self.i.to_le_bytes());
        b[4..8].copy_from_slice(&self.j.to_le_bytes());
        b[8..16].copy_from_slice(&self.x.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; RECORD_BYTES]) -> Self {
        CooccurrenceRecord {
            i: u32::from_le_bytes(b[0..4].try_into().unwrap()),
            j: u32::from_le_bytes(b[4..8].try_into().unwrap()),
            x: f64::from_le_bytes(b[8..16].try_into().unwrap()),
        }
    }
}

pub fn write_records<W: Write>(records: &[CooccurrenceRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        out.write_all(&r.to_bytes())?;
    }
    out.flush()
}

pub fn read_records<R: Read>(mut input: R) -> std::io::Result<Vec<CooccurrenceRecord>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "record file length {} is not a multiple of {RECORD_BYTES}",
                bytes.len()
            ),
        ));
    }
    Ok(bytes
        .chunks_exact(RECORD_BYTES)
        .map(|c| CooccurrenceRecord::from_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn save_records(records: &[CooccurrenceRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_records(path: &Path) -> Result<Vec<CooccurrenceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(BufReader::new(file)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug)]
pub struct CooccurConfig {
    pub window: usize,
    pub lowercase: bool,
    /// Soft cap on accumulator memory across all workers. `None` keeps
    /// everything in memory.
    pub memory_budget_bytes: Option<usize>,
    pub threads: usize,
}

impl Default for CooccurConfig {
    fn default() -> Self {
        CooccurConfig {
            window: DEFAULT_WINDOW,
            lowercase: true,
            memory_budget_bytes: None,
            threads: 1,
        }
    }
}

// Rough per-entry footprint of the accumulator hash map.
const ENTRY_BYTES: usize = 48;

type Key = (u32, u32);

/// Exact units per distance: `units[δ] = lcm(1..=window) / δ`.
fn distance_units(window: usize) -> (u128, Vec<u128>) {
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let lcm = (1..=window as u128).fold(1u128, |acc, d| acc / gcd(acc, d) * d);
    let units = (0..=window as u128)
        .map(|d| lcm.checked_div(d).unwrap_or(0))
        .collect();
    (lcm, units)
}

/// Sorted run of `(key, units)` pairs, either in memory or spilled to disk.
enum Run {
    Mem(std::vec::IntoIter<(Key, u128)>),
    Disk(BufReader<File>),
}

const SPILL_BYTES: usize = 24;

impl Run {
    fn next_entry(&mut self) -> Result<Option<(Key, u128)>> {
        match self {
            Run::Mem(it) => Ok(it.next()),
            Run::Disk(r) => {
                let mut b = [0u8; SPILL_BYTES];
                match r.read_exact(&mut b) {
                    Ok(()) => Ok(Some((
                        (
                            u32::from_le_bytes(b[0..4].try_into().unwrap()),
                            u32::from_le_bytes(b[4..8].try_into().unwrap()),
                        ),
                        u128::from_le_bytes(b[8..24].try_into().unwrap()),
                    ))),
                    Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(None),
                    Err(e) => Err(Error::io("<spill shard>", e)),
                }
            }
        }
    }
}

struct Accumulator {
    map: HashMap<Key, u128>,
    budget_entries: Option<usize>,
    runs: Vec<Run>,
}

impl Accumulator {
    fn new(budget_entries: Option<usize>) -> Self {
        Accumulator {
            map: HashMap::new(),
            budget_entries,
            runs: Vec::new(),
        }
    }

    fn add(&mut self, key: Key, units: u128) -> Result<()> {
        *self.map.entry(key).or_insert(0) += units;
        if let Some(budget) = self.budget_entries {
            if self.map.len() >= budget {
                self.spill()?;
            }
        }
        Ok(())
    }

    fn sorted_entries(&mut self) -> Vec<(Key, u128)> {
        let mut entries: Vec<(Key, u128)> = self.map.drain().collect();
        entries.sort_unstable_by_key(|e| e.0);
        entries
    }

    fn spill(&mut self) -> Result<()> {
        let entries = self.sorted_entries();
        let file = tempfile::tempfile().map_err(|e| Error::io("<spill shard>", e))?;
        let mut w = BufWriter::new(file);
        for ((i, j), u) in entries {
            let mut b = [0u8; SPILL_BYTES];
            b[0..4].copy_from_slice(&i.to_le_bytes());
            b[4..8].copy_from_slice(&j.to_le_bytes());
            b[8..24].copy_from_slice(&u.to_le_bytes());
            w.write_all(&b).map_err(|e| Error::io("<spill shard>", e))?;
        }
        let mut file = w
            .into_inner()
            .map_err(|e| Error::io("<spill shard>", e.into_error()))?;
        file.seek(SeekFrom::Start(0))
            .map_err(|e| Error::io("<spill shard>", e))?;
        self.runs.push(Run::Disk(BufReader::new(file)));
        Ok(())
    }

    fn finish(mut self) -> Vec<Run> {
        let entries = self.sorted_entries();
        self.runs.push(Run::Mem(entries.into_iter()));
        self.runs
    }
}

fn count_range<S: AsRef<str>>(
    lines: &[S],
    vocab: &Vocab,
    window: usize,
    lowercase: bool,
    units: &[u128],
    budget_entries: Option<usize>,
) -> Result<Vec<Run>> {
    let mut acc = Accumulator::new(budget_entries);
    let mut ids: Vec<Option<u32>> = Vec::new();
    for line in lines {
        ids.clear();
        ids.extend(tokenize(line.as_ref(), lowercase).iter().map(|t| vocab.id(t)));
        for p in 0..ids.len() {
            let Some(a) = ids[p] else { continue };
            for delta in 1..=window.min(p) {
                if let Some(b) = ids[p - delta] {
                    acc.add((a, b), units[delta])?;
                    acc.add((b, a), units[delta])?;
                }
            }
        }
    }
    Ok(acc.finish())
}

/// K-way merge of sorted runs, summing units of equal keys.
fn merge_runs(mut runs: Vec<Run>, lcm: u128) -> Result<Vec<CooccurrenceRecord>> {
    let mut heap = BinaryHeap::new();
    for (idx, run) in runs.iter_mut().enumerate() {
        if let Some((key, u)) = run.next_entry()? {
            heap.push(std::cmp::Reverse((key, idx, u)));
        }
    }
    let mut out: Vec<CooccurrenceRecord> = Vec::new();
    let mut current: Option<(Key, u128)> = None;
    let lcm_f = lcm as f64;
    let emit = |key: Key, u: u128, out: &mut Vec<CooccurrenceRecord>| {
        out.push(CooccurrenceRecord {
            i: key.0,
            j: key.1,
            x: u as f64 / lcm_f,
        })
    };
    while let Some(std::cmp::Reverse((key, idx, u))) = heap.pop() {
        match current {
            Some((k, ref mut total)) if k == key => *total += u,
            Some((k, total)) => {
                emit(k, total, &mut out);
                current = Some((key, u));
            }
            None => current = Some((key, u)),
        }
        if let Some((k, u)) = runs[idx].next_entry()? {
            heap.push(std::cmp::Reverse((k, idx, u)));
        }
    }
    if let Some((k, total)) = current {
        emit(k, total, &mut out);
    }
    Ok(out)
}

/// Counts distance-weighted co-occurrences within each line.
///
/// Every in-vocabulary token pair at distance `1 <= δ <= window` adds `1/δ`
/// to both `X[a][b]` and `X[b][a]`. Out-of-vocabulary tokens still occupy
/// positions. The result is sorted by `(i, j)`.
pub fn count_cooccurrences<S>(
    lines: &[S],
    vocab: &Vocab,
    config: &CooccurConfig,
) -> Result<Vec<CooccurrenceRecord>>
where
    S: AsRef<str> + Sync,
{
    if config.window == 0 || config.window > MAX_WINDOW {
        return Err(Error::Config(format!(
            "window must be in 1..={MAX_WINDOW}, got {}",
            config.window
        )));
    }
    let (lcm, units) = distance_units(config.window);
    let workers = par::effective_threads(config.threads);
    let budget_entries = config
        .memory_budget_bytes
        .map(|b| (b / ENTRY_BYTES / workers).max(1024));
    let ranges = par::split_ranges(lines.len(), workers);
    let partials = par::map_chunks(&ranges, workers, |r| {
        count_range(
            &lines[r.clone()],
            vocab,
            config.window,
            config.lowercase,
            &units,
            budget_entries,
        )
    });
    let mut runs = Vec::new();
    for p in partials {
        runs.extend(p?);
    }
    merge_runs(runs, lcm)
}

/// Deterministic uniform permutation of `records` driven by `seed`.
pub fn shuffle_records<T: Clone>(records: &[T], seed: u64) -> Vec<T> {
    let mut out = records.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.shuffle(&mut rng);
    out
}
