//! Forward pass and exact gradients of the weighted cross-entropy.
//!
//! ```text
//! a = W1ᵀx + b1        z = relu(a)
//! s = W2ᵀz + b2        p = softmax(s)
//! L = Σᵢ wᵢ·cw[yᵢ]·(−log pᵢ[yᵢ]) / Σᵢ wᵢ·cw[yᵢ]
//! ```

use super::features::SparseVec;
use super::params::{Dims, Parameters};
use crate::error::{Error, Result};

/// One training example borrowed from a featurized corpus.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub features: &'a SparseVec,
    pub label: usize,
    pub weight: f64,
}

fn check_input(dims: &Dims, x: &SparseVec) -> Result<()> {
    if x.dim() != dims.buckets {
        return Err(Error::Dimension {
            expected: dims.buckets,
            got: x.dim(),
        });
    }
    Ok(())
}

fn hidden_pre(p: &Parameters, x: &SparseVec, out: &mut [f64]) {
    let d = p.dims();
    let v = p.values();
    out.copy_from_slice(&v[d.b1()]);
    for &(i, xv) in x.entries() {
        let row = &v[i as usize * d.hidden..(i as usize + 1) * d.hidden];
        for (o, w) in out.iter_mut().zip(row) {
            *o += xv * w;
        }
    }
}

fn logits_from_hidden(p: &Parameters, z: &[f64], out: &mut [f64]) {
    let d = p.dims();
    let v = p.values();
    out.copy_from_slice(&v[d.b2()]);
    let w2 = &v[d.w2()];
    for (k, &zk) in z.iter().enumerate() {
        if zk == 0.0 {
            continue;
        }
        let row = &w2[k * d.classes..(k + 1) * d.classes];
        for (o, w) in out.iter_mut().zip(row) {
            *o += zk * w;
        }
    }
}

fn softmax_in_place(s: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in s.iter_mut() {
        *v /= total;
    }
}

pub fn logits(p: &Parameters, x: &SparseVec) -> Result<Vec<f64>> {
    let d = p.dims();
    check_input(&d, x)?;
    let mut a = vec![0.0; d.hidden];
    hidden_pre(p, x, &mut a);
    for v in &mut a {
        *v = v.max(0.0);
    }
    let mut s = vec![0.0; d.classes];
    logits_from_hidden(p, &a, &mut s);
    Ok(s)
}

/// Class probabilities for one input.
pub fn forward(p: &Parameters, x: &SparseVec) -> Result<Vec<f64>> {
    let mut s = logits(p, x)?;
    softmax_in_place(&mut s);
    Ok(s)
}

/// Weighted mean cross-entropy over `batch` and its gradient with respect to
/// every parameter coordinate.
pub fn loss_and_grad(p: &Parameters, batch: &[Sample], class_weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; p.dims().len()];
    let loss = loss_and_grad_into(p, batch, class_weights, &mut grad)?;
    Ok((loss, grad))
}

/// As [`loss_and_grad`], overwriting `grad`.
pub fn loss_and_grad_into(
    p: &Parameters,
    batch: &[Sample],
    class_weights: &[f64],
    grad: &mut [f64],
) -> Result<f64> {
    let d = p.dims();
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if class_weights.len() != d.classes {
        return Err(Error::Dimension {
            expected: d.classes,
            got: class_weights.len(),
        });
    }
    if grad.len() != d.len() {
        return Err(Error::Dimension {
            expected: d.len(),
            got: grad.len(),
        });
    }
    let mut norm = 0.0;
    for s in batch {
        check_input(&d, s.features)?;
        if s.label >= d.classes {
            return Err(Error::Dimension {
                expected: d.classes,
                got: s.label + 1,
            });
        }
        norm += s.weight * class_weights[s.label];
    }
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Config(format!(
            "total example weight must be positive and finite, got {norm}"
        )));
    }

    grad.fill(0.0);
    let v = p.values();
    let w2 = &v[d.w2()];
    let (g_w1b1, g_head) = grad.split_at_mut(d.w2().start);
    let (g_w1, g_b1) = g_w1b1.split_at_mut(d.buckets * d.hidden);
    let (g_w2, g_b2) = g_head.split_at_mut(d.hidden * d.classes);

    let mut a = vec![0.0; d.hidden];
    let mut z = vec![0.0; d.hidden];
    let mut probs = vec![0.0; d.classes];
    let mut dz = vec![0.0; d.hidden];
    let mut loss = 0.0;

    for s in batch {
        let c = s.weight * class_weights[s.label] / norm;
        if c == 0.0 {
            continue;
        }
        hidden_pre(p, s.features, &mut a);
        for (zk, ak) in z.iter_mut().zip(&a) {
            *zk = ak.max(0.0);
        }
        logits_from_hidden(p, &z, &mut probs);
        softmax_in_place(&mut probs);
        let py = probs[s.label];
        let nll = -py.ln();
        if !nll.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        loss += c * nll;

        // d loss / d logits = c * (p - onehot)
        for (j, pj) in probs.iter_mut().enumerate() {
            *pj = c * (*pj - if j == s.label { 1.0 } else { 0.0 });
        }
        let dl = &probs;
        for (gb, g) in g_b2.iter_mut().zip(dl) {
            *gb += g;
        }
        for k in 0..d.hidden {
            let row = &w2[k * d.classes..(k + 1) * d.classes];
            let grow = &mut g_w2[k * d.classes..(k + 1) * d.classes];
            let mut acc = 0.0;
            for j in 0..d.classes {
                grow[j] += z[k] * dl[j];
                acc += row[j] * dl[j];
            }
            dz[k] = if a[k] > 0.0 { acc } else { 0.0 };
        }
        for (gb, g) in g_b1.iter_mut().zip(&dz) {
            *gb += g;
        }
        for &(i, xv) in s.features.entries() {
            let grow = &mut g_w1[i as usize * d.hidden..(i as usize + 1) * d.hidden];
            for (g, dzk) in grow.iter_mut().zip(&dz) {
                *g += xv * dzk;
            }
        }
    }
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(loss)
}

/// Weighted mean cross-entropy without the gradient.
pub fn loss(p: &Parameters, batch: &[Sample], class_weights: &[f64]) -> Result<f64> {
    let d = p.dims();
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in batch {
        let c = s.weight * class_weights[s.label];
        if c == 0.0 {
            continue;
        }
        let probs = forward(p, s.features)?;
        num += c * -probs[s.label].ln();
        den += c;
    }
    if !(den > 0.0) {
        return Err(Error::Config("total example weight must be positive".into()));
    }
    let l = num / den;
    if !l.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    debug_assert!(d.classes == class_weights.len());
    Ok(l)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
