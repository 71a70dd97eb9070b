//! AdaGrad training of the full objective.
//!
//! Each epoch freezes the gender direction `v_g` and the sign of the L1
//! aggregate `D`, reshuffles the records and streams them once. Every record
//! `(i, j, x)` gets a GloVe update of `w_i`, `w̃_j`, `b_i`, `b̃_j`; with the
//! per-record schedule the constraint gradient of word `i` is then applied to
//! its center row, sharing that row's accumulators. Touched vector rows are
//! clamped after every update.
//!
//! With more than one thread, workers take contiguous shards of the shuffled
//! stream and update the shared tables without locks (Hogwild). Parameters
//! are then accessed through relaxed atomics, so races lose updates but never
//! tear values. A single worker is fully deterministic.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::Serialize;

use crate::corpus::{shuffle_records, CooccurrenceRecord};
use crate::error::{Error, Result};
use crate::lexicon::{GenderLexicon, WordClass};
use crate::model::Model;
use crate::objective::{
    self, estimate_gender_direction, glove_terms, l1_aggregate, sign_vec, ConstraintSchedule,
    GenderDirection, JdVariant, LossReport, TrainingConfig,
};
use crate::par;

/// One AdaGrad update: `θ -= lr·g/√H`, then `H += g²`. Non-finite gradient
/// entries are skipped; returns how many were.
pub fn adagrad_step(param: &mut [f64], grad: &[f64], acc: &mut [f64], lr: f64) -> usize {
    let mut skipped = 0;
    for ((p, &g), h) in param.iter_mut().zip(grad).zip(acc.iter_mut()) {
        if !g.is_finite() {
            skipped += 1;
            continue;
        }
        *p -= lr * g / h.sqrt();
        *h += g * g;
    }
    skipped
}

pub fn clamp_row(row: &mut [f64], lo: f64, hi: f64) {
    for v in row {
        *v = v.clamp(lo, hi);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub mean_jg_sample_loss: f64,
    /// `J_D` at the end of the epoch.
    pub jd: f64,
    /// `J_E` at the end of the epoch, under the epoch's frozen `v_g`.
    pub je: f64,
    pub skipped_steps: usize,
    pub wallclock_s: f64,
}

trait Slots {
    fn get(&self, i: usize) -> f64;
    fn set(&self, i: usize, v: f64);
}

impl Slots for &[AtomicU64] {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn set(&self, i: usize, v: f64) {
        self[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

/// Single-worker view.
struct Local<'a>(&'a [Cell<f64>]);

impl Slots for Local<'_> {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }

    #[inline]
    fn set(&self, i: usize, v: f64) {
        self.0[i].set(v)
    }
}

fn atomic_view(slice: &mut [f64]) -> Option<&[AtomicU64]> {
    if !(slice.as_ptr() as usize).is_multiple_of(std::mem::align_of::<AtomicU64>()) {
        return None;
    }
    // SAFETY: AtomicU64 has the size of f64, the alignment was checked above,
    // and the exclusive borrow guarantees no non-atomic access while the view
    // is alive.
    Some(unsafe { &*(slice as *mut [f64] as *const [AtomicU64]) })
}

struct Tables<S> {
    dim: usize,
    center: S,
    context: S,
    center_bias: S,
    context_bias: S,
    acc_center: S,
    acc_context: S,
    acc_center_bias: S,
    acc_context_bias: S,
}

impl<'a> Tables<Local<'a>> {
    fn local(m: &'a mut Model) -> Self {
        let l = |s: &'a mut [f64]| Local(Cell::from_mut(s).as_slice_of_cells());
        Tables {
            dim: m.config.dim,
            center: l(&mut m.center),
            context: l(&mut m.context),
            center_bias: l(&mut m.center_bias),
            context_bias: l(&mut m.context_bias),
            acc_center: l(&mut m.grad_acc_center),
            acc_context: l(&mut m.grad_acc_context),
            acc_center_bias: l(&mut m.grad_acc_center_bias),
            acc_context_bias: l(&mut m.grad_acc_context_bias),
        }
    }
}

impl<'a> Tables<&'a [AtomicU64]> {
    fn shared(m: &'a mut Model) -> Option<Self> {
        Some(Tables {
            dim: m.config.dim,
            center: atomic_view(&mut m.center)?,
            context: atomic_view(&mut m.context)?,
            center_bias: atomic_view(&mut m.center_bias)?,
            context_bias: atomic_view(&mut m.context_bias)?,
            acc_center: atomic_view(&mut m.grad_acc_center)?,
            acc_context: atomic_view(&mut m.grad_acc_context)?,
            acc_center_bias: atomic_view(&mut m.grad_acc_center_bias)?,
            acc_context_bias: atomic_view(&mut m.grad_acc_context_bias)?,
        })
    }
}

fn load_row<S: Slots + ?Sized>(table: &S, id: u32, out: &mut [f64]) {
    let s = id as usize * out.len();
    for (k, o) in out.iter_mut().enumerate() {
        *o = table.get(s + k);
    }
}

fn store_row<S: Slots + ?Sized>(table: &S, id: u32, row: &[f64]) {
    let s = id as usize * row.len();
    for (k, v) in row.iter().enumerate() {
        table.set(s + k, *v);
    }
}

/// Working copies of the rows touched by one record.
struct Scratch {
    w: Vec<f64>,
    wc: Vec<f64>,
    acc_w: Vec<f64>,
    acc_wc: Vec<f64>,
    grad_w: Vec<f64>,
    grad_wc: Vec<f64>,
    grad_c: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Scratch {
            w: vec![0.0; d],
            wc: vec![0.0; d],
            acc_w: vec![0.0; d],
            acc_wc: vec![0.0; d],
            grad_w: vec![0.0; d],
            grad_wc: vec![0.0; d],
            grad_c: vec![0.0; d],
        }
    }
}

#[derive(Default)]
struct ShardStats {
    loss_sum: f64,
    samples: usize,
    skipped: usize,
}

impl ShardStats {
    fn merge(mut self, other: ShardStats) -> Self {
        self.loss_sum += other.loss_sum;
        self.samples += other.samples;
        self.skipped += other.skipped;
        self
    }
}

/// GloVe part of a record update, applied to the scratch rows. Biases are
/// written straight back. Returns the pre-update sample loss, or `None` when
/// the record was skipped as non-finite.
fn glove_step<S: Slots>(
    t: &Tables<S>,
    r: &CooccurrenceRecord,
    cfg: &TrainingConfig,
    s: &mut Scratch,
    stats: &mut ShardStats,
) -> Option<f64> {
    let (i, j) = (r.i, r.j);
    load_row(&t.center, i, &mut s.w);
    load_row(&t.context, j, &mut s.wc);
    let (bi, bj) = (t.center_bias.get(i as usize), t.context_bias.get(j as usize));
    let Some((loss, coef)) = glove_terms(&s.w, &s.wc, bi, bj, r.x, cfg.x_max, cfg.alpha) else {
        stats.skipped += 1;
        return None;
    };
    load_row(&t.acc_center, i, &mut s.acc_w);
    load_row(&t.acc_context, j, &mut s.acc_wc);
    for k in 0..t.dim {
        s.grad_w[k] = coef * s.wc[k];
        s.grad_wc[k] = coef * s.w[k];
    }
    stats.skipped += adagrad_step(&mut s.w, &s.grad_w, &mut s.acc_w, cfg.lr);
    stats.skipped += adagrad_step(&mut s.wc, &s.grad_wc, &mut s.acc_wc, cfg.lr);

    let (mut b, mut h) = ([bi], [t.acc_center_bias.get(i as usize)]);
    adagrad_step(&mut b, &[coef], &mut h, cfg.lr);
    t.center_bias.set(i as usize, b[0]);
    t.acc_center_bias.set(i as usize, h[0]);
    let (mut b, mut h) = ([bj], [t.acc_context_bias.get(j as usize)]);
    adagrad_step(&mut b, &[coef], &mut h, cfg.lr);
    t.context_bias.set(j as usize, b[0]);
    t.acc_context_bias.set(j as usize, h[0]);
    Some(loss)
}

fn finish_step<S: Slots>(t: &Tables<S>, r: &CooccurrenceRecord, cfg: &TrainingConfig, s: &mut Scratch) {
    clamp_row(&mut s.w, cfg.clamp_lo, cfg.clamp_hi);
    clamp_row(&mut s.wc, cfg.clamp_lo, cfg.clamp_hi);
    store_row(&t.center, r.i, &s.w);
    store_row(&t.context, r.j, &s.wc);
    store_row(&t.acc_center, r.i, &s.acc_w);
    store_row(&t.acc_context, r.j, &s.acc_wc);
}

/// Frozen per-epoch inputs to the constraint gradients.
struct Constraints<'a> {
    lexicon: &'a GenderLexicon,
    v_g: &'a GenderDirection,
    d_sign: &'a [f64],
}

/// Writes `λ·∂J/∂w` for one center row into `grad` (full row width, zeros
/// outside the affected slice). Returns false when nothing applies.
fn constraint_grad(
    class: WordClass,
    w: &[f64],
    neutral: usize,
    cfg: &TrainingConfig,
    c: &Constraints,
    grad: &mut [f64],
) -> bool {
    grad.fill(0.0);
    match class {
        WordClass::Male | WordClass::Female if cfg.lambda_d > 0.0 => {
            let g = &mut grad[neutral..];
            match cfg.jd_variant {
                JdVariant::L1 => objective::l1_word_grad(class, c.d_sign, g),
                JdVariant::L2 => objective::l2_word_grad(class, &w[neutral..], cfg.beta1, cfg.beta2, g),
            }
            g.iter_mut().for_each(|x| *x *= cfg.lambda_d);
            true
        }
        WordClass::Neutral if cfg.lambda_e > 0.0 && !c.v_g.degenerate => {
            let g = &mut grad[..neutral];
            objective::je_word_grad(&w[..neutral], &c.v_g.v, g);
            g.iter_mut().for_each(|x| *x *= cfg.lambda_e);
            true
        }
        _ => false,
    }
}

fn run_shard<S: Slots>(
    t: &Tables<S>,
    records: &[CooccurrenceRecord],
    cfg: &TrainingConfig,
    c: &Constraints,
    neutral: usize,
) -> ShardStats {
    let mut stats = ShardStats::default();
    let mut s = Scratch::new(t.dim);
    let per_record = cfg.constraint_schedule == ConstraintSchedule::PerRecord;
    for r in records {
        let Some(loss) = glove_step(t, r, cfg, &mut s, &mut stats) else {
            continue;
        };
        stats.loss_sum += loss;
        stats.samples += 1;
        if per_record {
            let class = c.lexicon.class_of(r.i);
            if constraint_grad(class, &s.w, neutral, cfg, c, &mut s.grad_c) {
                stats.skipped += adagrad_step(&mut s.w, &s.grad_c, &mut s.acc_w, cfg.lr);
            }
        }
        finish_step(t, r, cfg, &mut s);
    }
    stats
}

/// The GloVe-only update loop: no constraint code at all.
fn run_plain_shard<S: Slots>(
    t: &Tables<S>,
    records: &[CooccurrenceRecord],
    cfg: &TrainingConfig,
) -> ShardStats {
    let mut stats = ShardStats::default();
    let mut s = Scratch::new(t.dim);
    for r in records {
        let Some(loss) = glove_step(t, r, cfg, &mut s, &mut stats) else {
            continue;
        };
        stats.loss_sum += loss;
        stats.samples += 1;
        finish_step(t, r, cfg, &mut s);
    }
    stats
}

enum Job<'a> {
    Full(&'a Constraints<'a>, usize),
    Plain,
}

fn run_job<S: Slots>(
    t: &Tables<S>,
    records: &[CooccurrenceRecord],
    cfg: &TrainingConfig,
    job: &Job,
) -> ShardStats {
    match job {
        Job::Full(c, neutral) => run_shard(t, records, cfg, c, *neutral),
        Job::Plain => run_plain_shard(t, records, cfg),
    }
}

/// Runs `job` over `records`, on shared atomic tables when several workers
/// are requested and on plain cells otherwise.
fn dispatch_shards(
    model: &mut Model,
    records: &[CooccurrenceRecord],
    cfg: &TrainingConfig,
    job: &Job,
) -> ShardStats {
    let workers = par::effective_threads(cfg.threads);
    if workers > 1 {
        if let Some(t) = Tables::shared(model) {
            let ranges = par::split_ranges(records.len(), workers);
            return par::map_chunks(&ranges, workers, |r| run_job(&t, &records[r.clone()], cfg, job))
                .into_iter()
                .fold(ShardStats::default(), ShardStats::merge);
        }
    }
    let t = Tables::local(model);
    run_job(&t, records, cfg, job)
}

/// One sweep over every constrained word, used by the per-epoch schedule.
fn constraint_sweep(model: &mut Model, cfg: &TrainingConfig, c: &Constraints) -> usize {
    let d = model.dim();
    let n = model.neutral_dims();
    let mut grad = vec![0.0; d];
    let mut skipped = 0;
    for id in 0..model.vocab_size {
        let class = c.lexicon.class_of(id as u32);
        let row = id * d..(id + 1) * d;
        if constraint_grad(class, &model.center[row.clone()], n, cfg, c, &mut grad) {
            skipped += adagrad_step(
                &mut model.center[row.clone()],
                &grad,
                &mut model.grad_acc_center[row.clone()],
                cfg.lr,
            );
            clamp_row(&mut model.center[row], cfg.clamp_lo, cfg.clamp_hi);
        }
    }
    skipped
}

fn check_inputs(model: &Model, lexicon: &GenderLexicon, records: &[CooccurrenceRecord]) -> Result<()> {
    if lexicon.vocab_size() != model.vocab_size {
        return Err(Error::Dimension {
            expected: model.vocab_size,
            got: lexicon.vocab_size(),
        });
    }
    check_records(model, records)
}

fn check_records(model: &Model, records: &[CooccurrenceRecord]) -> Result<()> {
    let v = model.vocab_size;
    if let Some(r) = records
        .iter()
        .find(|r| r.i as usize >= v || r.j as usize >= v || !(r.x > 0.0))
    {
        return Err(Error::Config(format!(
            "invalid record ({}, {}, {}) for vocabulary of size {v}",
            r.i, r.j, r.x
        )));
    }
    Ok(())
}

/// Streams `records` once, in order, applying GloVe and constraint updates.
pub fn train_epoch(
    model: &mut Model,
    records: &[CooccurrenceRecord],
    lexicon: &GenderLexicon,
    config: &TrainingConfig,
    v_g: &GenderDirection,
    d_sign: &[f64],
    epoch: usize,
) -> Result<EpochStats> {
    check_inputs(model, lexicon, records)?;
    if v_g.v.len() != model.neutral_dims() || d_sign.len() != model.config.gender_dims {
        return Err(Error::Dimension {
            expected: model.neutral_dims(),
            got: v_g.v.len(),
        });
    }
    let start = Instant::now();
    let c = Constraints { lexicon, v_g, d_sign };
    let n = model.neutral_dims();
    let mut stats = dispatch_shards(model, records, config, &Job::Full(&c, n));
    if config.constraint_schedule == ConstraintSchedule::PerEpoch {
        stats.skipped += constraint_sweep(model, config, &c);
    }
    Ok(EpochStats {
        epoch,
        mean_jg_sample_loss: stats.loss_sum / stats.samples.max(1) as f64,
        jd: objective::jd(model, lexicon, config)?.loss,
        je: objective::je(model, lexicon, &v_g.v)?.loss,
        skipped_steps: stats.skipped,
        wallclock_s: start.elapsed().as_secs_f64(),
    })
}

/// A plain GloVe epoch. Reference path for the unconstrained objective.
pub fn plain_glove_epoch(
    model: &mut Model,
    records: &[CooccurrenceRecord],
    config: &TrainingConfig,
    epoch: usize,
) -> Result<EpochStats> {
    check_records(model, records)?;
    let start = Instant::now();
    let stats = dispatch_shards(model, records, config, &Job::Plain);
    Ok(EpochStats {
        epoch,
        mean_jg_sample_loss: stats.loss_sum / stats.samples.max(1) as f64,
        jd: 0.0,
        je: 0.0,
        skipped_steps: stats.skipped,
        wallclock_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrainOutcome {
    pub stats: Vec<EpochStats>,
    /// Objective on the held-out sample after each epoch, with `v_g`
    /// re-estimated from the post-epoch model.
    pub losses: Vec<LossReport>,
}

impl TrainOutcome {
    /// CSV with header `epoch,jg,jd,je,total,skipped,seconds`.
    pub fn stats_csv(&self) -> String {
        let mut out = String::from("epoch,jg,jd,je,total,skipped,seconds\n");
        for (s, l) in self.stats.iter().zip(&self.losses) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.3}\n",
                s.epoch, l.j_g, l.j_d, l.j_e, l.total, s.skipped_steps, s.wallclock_s
            ));
        }
        out
    }
}

fn held_out<'a>(records: &'a [CooccurrenceRecord], config: &TrainingConfig) -> &'a [CooccurrenceRecord] {
    &records[..records.len().min(config.held_out)]
}

/// Full training run: per epoch, refresh `v_g` and `sign(D)`, reshuffle with
/// `seed + epoch`, stream the records and report the objective.
pub fn train(
    model: &mut Model,
    records: &[CooccurrenceRecord],
    lexicon: &GenderLexicon,
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::Empty("co-occurrence records".into()));
    }
    check_inputs(model, lexicon, records)?;
    let monitor = held_out(records, config);
    let mut out = TrainOutcome::default();
    for epoch in 1..=config.epochs {
        let v_g = estimate_gender_direction(model, lexicon, config.lambda_e, epoch)?;
        let d_sign = sign_vec(&l1_aggregate(model, lexicon)?);
        let shuffled = shuffle_records(records, config.seed.wrapping_add(epoch as u64));
        let stats = train_epoch(model, &shuffled, lexicon, config, &v_g, &d_sign, epoch)?;
        let v_after = estimate_gender_direction(model, lexicon, 0.0, epoch)?;
        let loss = objective::total_loss(model, monitor, lexicon, config, &v_after.v)?;
        log::info!(
            "epoch {epoch}: jg={:.6} jd={:.6} je={:.6} total={:.6} skipped={}",
            loss.j_g,
            loss.j_d,
            loss.j_e,
            loss.total,
            stats.skipped_steps
        );
        out.stats.push(stats);
        out.losses.push(loss);
    }
    Ok(out)
}

/// Plain GloVe training with the same shuffling schedule as [`train`].
pub fn train_plain_glove(
    model: &mut Model,
    records: &[CooccurrenceRecord],
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if records.is_empty() {
        return Err(Error::Empty("co-occurrence records".into()));
    }
    check_records(model, records)?;
    let monitor = held_out(records, config);
    let lexicon = GenderLexicon::all_neutral(model.vocab_size);
    let zero = vec![0.0; model.neutral_dims()];
    let mut out = TrainOutcome::default();
    for epoch in 1..=config.epochs {
        let shuffled = shuffle_records(records, config.seed.wrapping_add(epoch as u64));
        let stats = plain_glove_epoch(model, &shuffled, config, epoch)?;
        let plain = TrainingConfig {
            lambda_d: 0.0,
            lambda_e: 0.0,
            ..config.clone()
        };
        out.losses
            .push(objective::total_loss(model, monitor, &lexicon, &plain, &zero)?);
        out.stats.push(stats);
    }
    Ok(out)
}
