//! Loss terms and analytic gradients.
//!
//! The full objective is `J = J_G + λ_d·J_D + λ_e·J_E` where
//!
//! * `J_G = Σ f(x_ij) (w_i·w̃_j + b_i + b̃_j − ln x_ij)²` is the GloVe term,
//! * `J_D` separates the gendered parts of male and female words, either as
//!   `−‖Σ_M w^(g) − Σ_F w^(g)‖₁` (L1) or as squared distance to the
//!   extremes `β₁` / `β₂` (L2),
//! * `J_E = Σ_N (v_g·w^(a))²` pushes neutral words into the null space of the
//!   gender direction `v_g`.
//!
//! Constraint terms only involve center vectors. `v_g` is treated as a
//! constant when differentiating `J_E`.

use serde::{Deserialize, Serialize};

use crate::corpus::CooccurrenceRecord;
use crate::embedding::dot;
use crate::error::{Error, Result};
use crate::lexicon::{GenderLexicon, WordClass};
use crate::model::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JdVariant {
    L1,
    L2,
}

/// When the constraint gradients are applied during an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSchedule {
    /// After every co-occurrence update of the word's center row.
    PerRecord,
    /// One sweep over all constrained words at the end of each epoch.
    PerEpoch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub lambda_d: f64,
    pub lambda_e: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub x_max: f64,
    pub alpha: f64,
    pub lr: f64,
    pub epochs: usize,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub jd_variant: JdVariant,
    pub constraint_schedule: ConstraintSchedule,
    /// Base seed for the per-epoch reshuffle.
    pub seed: u64,
    pub threads: usize,
    /// Size of the fixed loss-monitoring sample taken from the head of the
    /// unshuffled record stream.
    pub held_out: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lambda_d: 0.8,
            lambda_e: 0.8,
            beta1: 1.0,
            beta2: -1.0,
            x_max: 100.0,
            alpha: 0.75,
            lr: 0.05,
            epochs: 15,
            clamp_lo: -1.0,
            clamp_hi: 1.0,
            jd_variant: JdVariant::L1,
            constraint_schedule: ConstraintSchedule::PerRecord,
            seed: 1,
            threads: 1,
            held_out: 100_000,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.lambda_d >= 0.0 && self.lambda_e >= 0.0) {
            return fail("lambda_d and lambda_e must be >= 0".into());
        }
        if !(self.x_max > 0.0) {
            return fail(format!("x_max must be > 0, got {}", self.x_max));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail(format!("alpha must be in (0, 1], got {}", self.alpha));
        }
        if !(self.lr > 0.0) {
            return fail(format!("lr must be > 0, got {}", self.lr));
        }
        if !(self.clamp_lo < self.clamp_hi) {
            return fail(format!(
                "clamp bounds must satisfy lo < hi, got [{}, {}]",
                self.clamp_lo, self.clamp_hi
            ));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b >= self.clamp_lo && b <= self.clamp_hi) {
                return fail(format!(
                    "{name}={b} outside clamp bounds [{}, {}]",
                    self.clamp_lo, self.clamp_hi
                ));
            }
        }
        Ok(())
    }
}

/// `(x / x_max)^alpha`, capped at 1.
pub fn weight_fn(x: f64, x_max: f64, alpha: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Config(format!(
            "co-occurrence weight must be > 0, got {x}"
        )));
    }
    Ok(if x < x_max { (x / x_max).powf(alpha) } else { 1.0 })
}

/// Loss `f·e²` and gradient coefficient `2·f·e` for one record, or `None`
/// when anything is non-finite.
#[inline]
pub(crate) fn glove_terms(
    w: &[f64],
    wc: &[f64],
    b: f64,
    bc: f64,
    x: f64,
    x_max: f64,
    alpha: f64,
) -> Option<(f64, f64)> {
    let f = if x < x_max { (x / x_max).powf(alpha) } else { 1.0 };
    let e = dot(w, wc) + b + bc - x.ln();
    let loss = f * e * e;
    let coef = 2.0 * f * e;
    (loss.is_finite() && coef.is_finite()).then_some((loss, coef))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GloveGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub center_bias: f64,
    pub context_bias: f64,
}

/// GloVe loss of one record and its gradients with respect to `w_i`, `w̃_j`,
/// `b_i` and `b̃_j`.
pub fn glove_sample(
    record: &CooccurrenceRecord,
    model: &Model,
    config: &TrainingConfig,
) -> Result<GloveGrad> {
    weight_fn(record.x, config.x_max, config.alpha)?;
    let w = model.center_row(record.i)?;
    let wc = model.context_row(record.j)?;
    let (loss, coef) = glove_terms(
        w,
        wc,
        model.center_bias[record.i as usize],
        model.context_bias[record.j as usize],
        record.x,
        config.x_max,
        config.alpha,
    )
    .ok_or(Error::NonFinite("glove sample"))?;
    Ok(GloveGrad {
        loss,
        center: wc.iter().map(|v| coef * v).collect(),
        context: w.iter().map(|v| coef * v).collect(),
        center_bias: coef,
        context_bias: coef,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenderDirection {
    pub v: Vec<f64>,
    pub epoch_computed: usize,
    /// Set when no seed pairs were available and `v` is all zeros.
    pub degenerate: bool,
}

/// Mean of `w_m^(a) − w_f^(a)` over the seed pairs.
pub fn estimate_gender_direction(
    model: &Model,
    lexicon: &GenderLexicon,
    lambda_e: f64,
    epoch: usize,
) -> Result<GenderDirection> {
    let n = model.neutral_dims();
    if lexicon.pairs.is_empty() {
        if lambda_e > 0.0 {
            return Err(Error::Empty("gender pairs (required when lambda_e > 0)".into()));
        }
        log::warn!("no gender pairs; gender direction is zero");
        return Ok(GenderDirection {
            v: vec![0.0; n],
            epoch_computed: epoch,
            degenerate: true,
        });
    }
    let mut v = vec![0.0; n];
    for &(m, f) in &lexicon.pairs {
        let (wm, wf) = (model.neutral_part(m)?, model.neutral_part(f)?);
        for ((acc, a), b) in v.iter_mut().zip(wm).zip(wf) {
            *acc += a - b;
        }
    }
    let count = lexicon.pairs.len() as f64;
    v.iter_mut().for_each(|x| *x /= count);
    Ok(GenderDirection {
        v,
        epoch_computed: epoch,
        degenerate: false,
    })
}

/// A constraint loss with its per-word gradient on the relevant slice of the
/// center row (`w^(g)` for `J_D`, `w^(a)` for `J_E`).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintGrad {
    pub loss: f64,
    pub grads: Vec<(u32, Vec<f64>)>,
}

/// `D = Σ_M w^(g) − Σ_F w^(g)`.
pub fn l1_aggregate(model: &Model, lexicon: &GenderLexicon) -> Result<Vec<f64>> {
    let mut d = vec![0.0; model.config.gender_dims];
    for &id in &lexicon.male_ids {
        d.iter_mut()
            .zip(model.gender_part(id)?)
            .for_each(|(a, g)| *a += g);
    }
    for &id in &lexicon.female_ids {
        d.iter_mut()
            .zip(model.gender_part(id)?)
            .for_each(|(a, g)| *a -= g);
    }
    Ok(d)
}

/// Elementwise sign with `sign(0) = 0`.
pub fn sign_vec(d: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|&x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

#[inline]
pub(crate) fn l1_word_grad(class: WordClass, d_sign: &[f64], out: &mut [f64]) {
    let s = match class {
        WordClass::Male => -1.0,
        WordClass::Female => 1.0,
        WordClass::Neutral => 0.0,
    };
    out.iter_mut().zip(d_sign).for_each(|(o, d)| *o = s * d);
}

#[inline]
pub(crate) fn l2_word_grad(class: WordClass, wg: &[f64], beta1: f64, beta2: f64, out: &mut [f64]) {
    let target = match class {
        WordClass::Male => beta1,
        WordClass::Female => beta2,
        WordClass::Neutral => {
            out.fill(0.0);
            return;
        }
    };
    out.iter_mut().zip(wg).for_each(|(o, w)| *o = 2.0 * (w - target));
}

#[inline]
pub(crate) fn je_word_grad(wa: &[f64], vg: &[f64], out: &mut [f64]) {
    let p = dot(vg, wa);
    out.iter_mut().zip(vg).for_each(|(o, v)| *o = 2.0 * p * v);
}

fn gendered_ids(lexicon: &GenderLexicon) -> impl Iterator<Item = u32> + '_ {
    lexicon.male_ids.iter().chain(&lexicon.female_ids).copied()
}

/// `J_D^L1` and its subgradient.
pub fn jd_l1(model: &Model, lexicon: &GenderLexicon) -> Result<ConstraintGrad> {
    let d = l1_aggregate(model, lexicon)?;
    let loss = -d.iter().map(|x| x.abs()).sum::<f64>();
    let sign = sign_vec(&d);
    let grads = gendered_ids(lexicon)
        .map(|id| {
            let mut g = vec![0.0; d.len()];
            l1_word_grad(lexicon.class_of(id), &sign, &mut g);
            (id, g)
        })
        .collect();
    Ok(ConstraintGrad { loss, grads })
}

/// `J_D^L2` and its gradient.
pub fn jd_l2(model: &Model, lexicon: &GenderLexicon, beta1: f64, beta2: f64) -> Result<ConstraintGrad> {
    let mut loss = 0.0;
    let mut grads = Vec::new();
    for id in gendered_ids(lexicon) {
        let wg = model.gender_part(id)?;
        let class = lexicon.class_of(id);
        let target = if class == WordClass::Male { beta1 } else { beta2 };
        loss += wg.iter().map(|w| (target - w).powi(2)).sum::<f64>();
        let mut g = vec![0.0; wg.len()];
        l2_word_grad(class, wg, beta1, beta2, &mut g);
        grads.push((id, g));
    }
    Ok(ConstraintGrad { loss, grads })
}

/// `J_D` for the configured variant.
pub fn jd(model: &Model, lexicon: &GenderLexicon, config: &TrainingConfig) -> Result<ConstraintGrad> {
    match config.jd_variant {
        JdVariant::L1 => jd_l1(model, lexicon),
        JdVariant::L2 => jd_l2(model, lexicon, config.beta1, config.beta2),
    }
}

/// `J_E` and its gradient, holding `v_g` fixed.
pub fn je(model: &Model, lexicon: &GenderLexicon, v_g: &[f64]) -> Result<ConstraintGrad> {
    if v_g.len() != model.neutral_dims() {
        return Err(Error::Dimension {
            expected: model.neutral_dims(),
            got: v_g.len(),
        });
    }
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(lexicon.neutral_ids.len());
    for &id in &lexicon.neutral_ids {
        let wa = model.neutral_part(id)?;
        loss += dot(v_g, wa).powi(2);
        let mut g = vec![0.0; wa.len()];
        je_word_grad(wa, v_g, &mut g);
        grads.push((id, g));
    }
    Ok(ConstraintGrad { loss, grads })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub j_g: f64,
    pub j_d: f64,
    pub j_e: f64,
    pub total: f64,
    pub samples: usize,
}

/// Evaluates every term of the objective over `records`.
pub fn total_loss(
    model: &Model,
    records: &[CooccurrenceRecord],
    lexicon: &GenderLexicon,
    config: &TrainingConfig,
    v_g: &[f64],
) -> Result<LossReport> {
    let mut j_g = 0.0;
    for r in records {
        j_g += glove_sample(r, model, config)?.loss;
    }
    let j_d = jd(model, lexicon, config)?.loss;
    let j_e = je(model, lexicon, v_g)?.loss;
    let total = j_g + config.lambda_d * j_d + config.lambda_e * j_e;
    if !total.is_finite() {
        return Err(Error::NonFinite("total loss"));
    }
    Ok(LossReport {
        j_g,
        j_d,
        j_e,
        total,
        samples: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::lexicon::build_lexicon;
    use crate::model::ModelConfig;
    use approx::assert_relative_eq;

    fn model(d: usize, k: usize, v: usize) -> Model {
        Model::init(
            ModelConfig {
                dim: d,
                gender_dims: k,
                seed: 9,
            },
            v,
        )
        .unwrap()
    }

    /// Vocab `m0 f0 n0 ...` with male/female lists and aligned pairs.
    fn lexicon(males: usize, females: usize, neutrals: usize) -> (Vec<String>, GenderLexicon) {
        let m: Vec<String> = (0..males).map(|i| format!("m{i}")).collect();
        let f: Vec<String> = (0..females).map(|i| format!("f{i}")).collect();
        let n: Vec<String> = (0..neutrals).map(|i| format!("n{i}")).collect();
        let all: Vec<String> = m.iter().chain(&f).chain(&n).cloned().collect();
        let vocab = build_vocab(&all, 1);
        let pairs: Vec<(String, String)> = m.iter().cloned().zip(f.iter().cloned()).collect();
        let lex = build_lexicon(&vocab, &m, &f, &pairs).unwrap();
        (vocab.words().map(String::from).collect(), lex)
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight_fn(100.0, 100.0, 0.75).unwrap(), 1.0);
        assert_eq!(weight_fn(250.0, 100.0, 0.75).unwrap(), 1.0);
        assert_relative_eq!(weight_fn(10.0, 100.0, 0.75).unwrap(), 0.177827941, epsilon = 1e-9);
        assert!(weight_fn(0.0, 100.0, 0.75).is_err());
        assert!(weight_fn(-1.0, 100.0, 0.75).is_err());
    }

    #[test]
    fn glove_zero_residual() {
        let mut m = model(3, 1, 2);
        m.center.fill(0.0);
        m.context.fill(0.0);
        m.center_bias.fill(0.0);
        m.context_bias.fill(0.0);
        let cfg = TrainingConfig::default();
        let g = glove_sample(&CooccurrenceRecord { i: 0, j: 1, x: 1.0 }, &m, &cfg).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.center.iter().chain(&g.context).all(|&v| v == 0.0));
        assert_eq!(g.center_bias, 0.0);

        m.center_bias[0] = 5f64.ln();
        let g = glove_sample(&CooccurrenceRecord { i: 0, j: 1, x: 5.0 }, &m, &cfg).unwrap();
        assert_eq!(g.loss, 0.0);
        assert_eq!(g.context_bias, 0.0);
    }

    #[test]
    fn glove_non_finite_is_flagged() {
        let mut m = model(3, 1, 2);
        m.center[0] = f64::NAN;
        let cfg = TrainingConfig::default();
        let err = glove_sample(&CooccurrenceRecord { i: 0, j: 1, x: 2.0 }, &m, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn gender_direction_examples() {
        let (_, lex) = lexicon(1, 1, 0);
        let mut m = model(3, 1, 2);
        let (mi, fi) = lex.pairs[0];
        m.center_row_mut(mi).unwrap()[..2].copy_from_slice(&[1.0, 0.0]);
        m.center_row_mut(fi).unwrap()[..2].copy_from_slice(&[0.0, 1.0]);
        let g = estimate_gender_direction(&m, &lex, 0.8, 0).unwrap();
        assert_eq!(g.v, vec![1.0, -1.0]);

        let (_, lex) = lexicon(2, 2, 0);
        let mut m = model(3, 1, 4);
        m.center.fill(0.0);
        m.center_row_mut(lex.pairs[0].0).unwrap()[0] = 2.0;
        m.center_row_mut(lex.pairs[1].0).unwrap()[1] = 2.0;
        assert_eq!(
            estimate_gender_direction(&m, &lex, 0.8, 0).unwrap().v,
            vec![1.0, 1.0]
        );

        m.center.fill(0.25);
        assert_eq!(
            estimate_gender_direction(&m, &lex, 0.8, 0).unwrap().v,
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn gender_direction_without_pairs() {
        let (_, lex) = lexicon(1, 0, 2);
        let m = model(3, 1, 3);
        assert!(estimate_gender_direction(&m, &lex, 0.8, 0).is_err());
        let g = estimate_gender_direction(&m, &lex, 0.0, 4).unwrap();
        assert!(g.degenerate);
        assert_eq!(g.v, vec![0.0, 0.0]);
        assert_eq!(g.epoch_computed, 4);
    }

    #[test]
    fn jd_l1_scalar_case() {
        let (_, lex) = lexicon(1, 1, 0);
        let mut m = model(2, 1, 2);
        let (mi, fi) = lex.pairs[0];
        m.center_row_mut(mi).unwrap()[1] = 0.8;
        m.center_row_mut(fi).unwrap()[1] = -0.4;
        let r = jd_l1(&m, &lex).unwrap();
        assert_relative_eq!(r.loss, -1.2, epsilon = 1e-15);
        for (id, g) in r.grads {
            assert_eq!(g, vec![if id == mi { -1.0 } else { 1.0 }]);
        }
        m.center_row_mut(fi).unwrap()[1] = 0.8;
        let r = jd_l1(&m, &lex).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grads.iter().all(|(_, g)| g == &vec![0.0]));
    }

    #[test]
    fn jd_l2_scalar_case() {
        let (_, lex) = lexicon(1, 1, 0);
        let mut m = model(2, 1, 2);
        let (mi, fi) = lex.pairs[0];
        m.center_row_mut(mi).unwrap()[1] = 0.8;
        m.center_row_mut(fi).unwrap()[1] = -0.4;
        assert_relative_eq!(jd_l2(&m, &lex, 1.0, -1.0).unwrap().loss, 0.4, epsilon = 1e-12);
        m.center_row_mut(mi).unwrap()[1] = 1.0;
        m.center_row_mut(fi).unwrap()[1] = -1.0;
        let r = jd_l2(&m, &lex, 1.0, -1.0).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grads.iter().all(|(_, g)| g == &vec![0.0]));
    }

    #[test]
    fn je_examples() {
        let (_, lex) = lexicon(0, 0, 1);
        let mut m = model(3, 1, 1);
        m.center_row_mut(0).unwrap()[..2].copy_from_slice(&[0.5, 2.0]);
        let r = je(&m, &lex, &[1.0, 0.0]).unwrap();
        assert_eq!(r.loss, 0.25);
        assert_eq!(r.grads, vec![(0, vec![1.0, 0.0])]);
        m.center_row_mut(0).unwrap()[..2].copy_from_slice(&[0.0, 2.0]);
        let r = je(&m, &lex, &[1.0, 0.0]).unwrap();
        assert_eq!(r.loss, 0.0);
        assert_eq!(r.grads[0].1, vec![0.0, 0.0]);
        assert!(je(&m, &lex, &[1.0]).is_err());
    }

    #[test]
    fn total_loss_reductions() {
        let (_, lex) = lexicon(2, 2, 3);
        let m = model(4, 1, 7);
        let records = vec![
            CooccurrenceRecord { i: 0, j: 1, x: 2.0 },
            CooccurrenceRecord { i: 3, j: 6, x: 0.5 },
        ];
        let vg = estimate_gender_direction(&m, &lex, 0.8, 0).unwrap().v;
        let cfg = TrainingConfig {
            lambda_d: 0.0,
            lambda_e: 0.0,
            ..Default::default()
        };
        let r = total_loss(&m, &records, &lex, &cfg, &vg).unwrap();
        assert_eq!(r.total, r.j_g);
        assert_eq!(r.samples, 2);

        let cfg = TrainingConfig::default();
        let r = total_loss(&m, &records, &lex, &cfg, &vg).unwrap();
        let jg: f64 = records
            .iter()
            .map(|rec| glove_sample(rec, &m, &cfg).unwrap().loss)
            .sum();
        let recomposed = jg + 0.8 * jd_l1(&m, &lex).unwrap().loss + 0.8 * je(&m, &lex, &vg).unwrap().loss;
        assert_relative_eq!(r.total, recomposed, max_relative = 1e-9);

        let empty = GenderLexicon::all_neutral(0);
        let m0 = Model {
            vocab_size: 0,
            center: vec![],
            context: vec![],
            center_bias: vec![],
            context_bias: vec![],
            grad_acc_center: vec![],
            grad_acc_context: vec![],
            grad_acc_center_bias: vec![],
            grad_acc_context_bias: vec![],
            ..m
        };
        let r = total_loss(&m0, &[], &empty, &cfg, &[0.0; 3]).unwrap();
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        let bad = [
            TrainingConfig {
                clamp_lo: 1.0,
                clamp_hi: -1.0,
                ..Default::default()
            },
            TrainingConfig {
                beta1: 2.0,
                ..Default::default()
            },
            TrainingConfig {
                alpha: 0.0,
                ..Default::default()
            },
            TrainingConfig {
                lambda_e: -0.1,
                ..Default::default()
            },
            TrainingConfig {
                x_max: 0.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
