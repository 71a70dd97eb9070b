//! Post-hoc hard debiasing: neutralize and equalize against a bias subspace.
//!
//! All operations work on unit-normalized vectors. The subspace is the span
//! of the top principal directions of the pair-centered definitional vectors.

use crate::embedding::{dot, norm, Embeddings};
use crate::error::{Error, Result};
use crate::lexicon::GenderLexicon;
use crate::par;

const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BiasSubspace {
    pub basis: Vec<Vec<f64>>,
}

impl BiasSubspace {
    pub fn dim(&self) -> usize {
        self.basis.first().map_or(0, Vec::len)
    }

    /// Component of `v` inside the subspace.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for b in &self.basis {
            let c = dot(v, b);
            out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
        }
        out
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matching eigenvectors (as columns of the
/// returned row-major matrix), unsorted.
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Top `k_b` principal directions of the pair-centered vectors. Each basis
/// vector is oriented so the first pair's difference projects positively.
pub fn compute_bias_subspace(emb: &Embeddings, pairs: &[(u32, u32)], k_b: usize) -> Result<BiasSubspace> {
    if pairs.is_empty() {
        return Err(Error::Empty("definitional pairs".into()));
    }
    if k_b == 0 || k_b > emb.dim() {
        return Err(Error::Config(format!("k_b must be in 1..={}", emb.dim())));
    }
    let d = emb.dim();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(pairs.len() * 2);
    for &(a, b) in pairs {
        let (a, b) = (emb.row(a), emb.row(b));
        let half: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) / 2.0).collect();
        rows.push(half.iter().map(|x| -x).collect());
        rows.push(half);
    }
    if rows.iter().all(|r| norm(r) == 0.0) {
        return Err(Error::Degenerate("all pair differences are zero".into()));
    }

    // Eigenvectors of the small Gram matrix R Rᵀ map to principal
    // directions through Rᵀ.
    let n = rows.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = dot(&rows[i], &rows[j]);
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let (vals, vecs) = jacobi_eigen(gram, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    let top = vals[order[0]];

    let reference: Vec<f64> = {
        let (a, b) = pairs[0];
        emb.row(a).iter().zip(emb.row(b)).map(|(x, y)| x - y).collect()
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k_b);
    for &col in order.iter().take(k_b) {
        if vals[col] <= 1e-12 * top {
            return Err(Error::Degenerate(format!(
                "pairs span fewer than {k_b} directions"
            )));
        }
        let mut u = vec![0.0; d];
        for (r, row) in rows.iter().enumerate() {
            let c = vecs[r * n + col];
            u.iter_mut().zip(row).for_each(|(o, x)| *o += c * x);
        }
        for b in &basis {
            let c = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(o, x)| *o -= c * x);
        }
        let len = norm(&u);
        if len < DEGENERATE_NORM {
            return Err(Error::Degenerate("principal direction vanished".into()));
        }
        let sign = if dot(&u, &reference) < 0.0 { -1.0 } else { 1.0 };
        u.iter_mut().for_each(|x| *x *= sign / len);
        basis.push(u);
    }
    Ok(BiasSubspace { basis })
}

/// Removes the subspace component and rescales to unit length. Returns the
/// zero vector and `true` when nothing is left.
pub fn neutralize(v: &[f64], subspace: &BiasSubspace) -> Result<(Vec<f64>, bool)> {
    if v.len() != subspace.dim() {
        return Err(Error::Dimension {
            expected: subspace.dim(),
            got: v.len(),
        });
    }
    let p = subspace.project(v);
    let mut out: Vec<f64> = v.iter().zip(&p).map(|(x, y)| x - y).collect();
    let n = norm(&out);
    if n < DEGENERATE_NORM {
        return Ok((vec![0.0; v.len()], true));
    }
    out.iter_mut().for_each(|x| *x /= n);
    Ok((out, false))
}

/// Equalizes a definitional pair: both outputs share the neutral component
/// of the pair mean and have opposite, unit-norm-completing components
/// inside the subspace. The flag is set when a member has no in-subspace
/// offset from the mean, in which case the pair is returned unchanged.
pub fn equalize(a: &[f64], b: &[f64], subspace: &BiasSubspace) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let d = subspace.dim();
    for v in [a, b] {
        if v.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: v.len(),
            });
        }
    }
    let mu: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
    let mu_b = subspace.project(&mu);
    let nu: Vec<f64> = mu.iter().zip(&mu_b).map(|(x, y)| x - y).collect();
    let scale = (1.0 - dot(&nu, &nu)).max(0.0).sqrt();
    let mut out = Vec::with_capacity(2);
    for w in [a, b] {
        let w_b = subspace.project(w);
        let offset: Vec<f64> = w_b.iter().zip(&mu_b).map(|(x, y)| x - y).collect();
        let n = norm(&offset);
        if n < DEGENERATE_NORM {
            return Ok((a.to_vec(), b.to_vec(), true));
        }
        out.push(
            nu.iter()
                .zip(&offset)
                .map(|(v, o)| v + scale * o / n)
                .collect::<Vec<f64>>(),
        );
    }
    let second = out.pop().unwrap();
    let first = out.pop().unwrap();
    Ok((first, second, false))
}

#[derive(Clone, Debug)]
pub struct DebiasOutcome {
    pub embeddings: Embeddings,
    pub subspace: BiasSubspace,
    pub warnings: Vec<String>,
}

/// Normalizes every vector, neutralizes all neutral words and equalizes each
/// pair. Other male/female words are left as they are (normalized).
pub fn hard_debias(
    emb: &Embeddings,
    lexicon: &GenderLexicon,
    pairs: &[(u32, u32)],
    k_b: usize,
    threads: usize,
) -> Result<DebiasOutcome> {
    if lexicon.vocab_size() != emb.len() {
        return Err(Error::Dimension {
            expected: emb.len(),
            got: lexicon.vocab_size(),
        });
    }
    let mut out = emb.normalized();
    let subspace = compute_bias_subspace(&out, pairs, k_b)?;
    let mut warnings = Vec::new();

    let neutralized = {
        let view = &out;
        let sub = &subspace;
        par::map_chunks(&lexicon.neutral_ids, threads, |&id| neutralize(view.row(id), sub))
    };
    for (&id, res) in lexicon.neutral_ids.iter().zip(neutralized) {
        let (v, degenerate) = res?;
        if degenerate {
            warnings.push(format!(
                "{}: vector lies inside the bias subspace",
                emb.words()[id as usize]
            ));
        }
        out.row_mut(id).copy_from_slice(&v);
    }

    for &(m, f) in pairs {
        let (a, b, degenerate) = equalize(out.row(m), out.row(f), &subspace)?;
        if degenerate {
            let w = emb.words();
            warnings.push(format!(
                "{}/{}: pair has no offset inside the bias subspace",
                w[m as usize], w[f as usize]
            ));
        }
        out.row_mut(m).copy_from_slice(&a);
        out.row_mut(f).copy_from_slice(&b);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(DebiasOutcome {
        embeddings: out,
        subspace,
        warnings,
    })
}
