//! Softmax, cross-entropy, KL divergence and the distillation loss, with
//! analytic gradients with respect to the student logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

fn safe_ln<T: Real>(p: T) -> T {
    p.max(T::lit(PROB_FLOOR)).ln()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    if logits.is_empty() {
        return Vec::new();
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `softmax(logits / temperature)`.
pub fn softmax_t<T: Real>(logits: &[T], temperature: T) -> Vec<T> {
    let scaled: Vec<T> = logits.iter().map(|&z| z / temperature).collect();
    softmax(&scaled)
}

fn check_label(label: usize, n_classes: usize) -> Result<()> {
    if label >= n_classes {
        return Err(Error::IndexOutOfRange {
            index: label,
            len: n_classes,
        });
    }
    Ok(())
}

/// Batch mean of `-ln p̂_{y}`.
pub fn cross_entropy<T: Real>(probs: &[Vec<T>], labels: &[usize]) -> Result<T> {
    if probs.len() != labels.len() {
        return Err(Error::Dimension {
            expected: probs.len(),
            got: labels.len(),
        });
    }
    if probs.is_empty() {
        return Err(Error::Contract("cross-entropy of an empty batch".into()));
    }
    let mut total = T::zero();
    for (p, &y) in probs.iter().zip(labels) {
        check_label(y, p.len())?;
        total -= safe_ln(p[y]);
    }
    Ok(total / T::lit(probs.len() as f64))
}

/// `Σ_x p(x) ln[p(x)/q(x)]`; zero-probability terms of `P` contribute nothing.
pub fn kl_divergence<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut total = T::zero();
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > T::zero() {
            total += pi * (safe_ln(pi) - safe_ln(qi));
        }
    }
    Ok(total)
}

/// Which distribution goes first in the KL term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    /// `KL(σ(l_s/T) ‖ σ(l_t/T))`
    #[default]
    StudentFirst,
    /// `KL(σ(l_t/T) ‖ σ(l_s/T))`
    TeacherFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdConfig {
    pub temperature: f64,
    pub alpha: f64,
    #[serde(default)]
    pub direction: KlDirection,
}

impl KdConfig {
    pub fn new(temperature: f64, alpha: f64) -> Result<Self> {
        let cfg = KdConfig {
            temperature,
            alpha,
            direction: KlDirection::StudentFirst,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::config("temperature", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn check_pair<T>(student: &[T], teacher: &[T], label: usize) -> Result<()> {
    if student.len() != teacher.len() {
        return Err(Error::Dimension {
            expected: student.len(),
            got: teacher.len(),
        });
    }
    check_label(label, student.len())
}

/// `α T² KL + (1 − α) CE(σ(l_s), y)` for one sample.
pub fn kd_loss<T: Real>(student: &[T], teacher: &[T], label: usize, cfg: &KdConfig) -> Result<T> {
    check_pair(student, teacher, label)?;
    let alpha = T::lit(cfg.alpha);
    let temp = T::lit(cfg.temperature);
    let mut loss = T::zero();
    if cfg.alpha != 0.0 {
        let ps = softmax_t(student, temp);
        let pt = softmax_t(teacher, temp);
        let kl = match cfg.direction {
            KlDirection::StudentFirst => kl_divergence(&ps, &pt)?,
            KlDirection::TeacherFirst => kl_divergence(&pt, &ps)?,
        };
        loss = alpha * temp * temp * kl;
    }
    if cfg.alpha != 1.0 {
        // written as 0 − ln p so α = 0 reproduces `cross_entropy` bit for bit
        let ce = T::zero() - safe_ln(softmax(student)[label]);
        loss = if cfg.alpha == 0.0 {
            ce
        } else {
            loss + (T::one() - alpha) * ce
        };
    }
    Ok(loss)
}

/// Mean [`kd_loss`] over a batch.
pub fn kd_loss_batch<T: Real>(
    student: &[Vec<T>],
    teacher: &[Vec<T>],
    labels: &[usize],
    cfg: &KdConfig,
) -> Result<T> {
    if student.len() != teacher.len() || student.len() != labels.len() || student.is_empty() {
        return Err(Error::Contract(
            "batch components must be nonempty and aligned".into(),
        ));
    }
    let mut total = T::zero();
    for ((s, t), &y) in student.iter().zip(teacher).zip(labels) {
        total += kd_loss(s, t, y, cfg)?;
    }
    Ok(total / T::lit(student.len() as f64))
}

/// `σ(l) − onehot(y)`.
pub fn cross_entropy_dlogits<T: Real>(logits: &[T], label: usize) -> Result<Vec<T>> {
    check_label(label, logits.len())?;
    let mut g = softmax(logits);
    g[label] -= T::one();
    Ok(g)
}

/// `∂ kd_loss / ∂ l_s`.
pub fn kd_loss_dlogits<T: Real>(
    student: &[T],
    teacher: &[T],
    label: usize,
    cfg: &KdConfig,
) -> Result<Vec<T>> {
    check_pair(student, teacher, label)?;
    let alpha = T::lit(cfg.alpha);
    let temp = T::lit(cfg.temperature);
    let n = student.len();
    let mut grad = vec![T::zero(); n];
    if cfg.alpha != 1.0 {
        let ce = cross_entropy_dlogits(student, label)?;
        if cfg.alpha == 0.0 {
            return Ok(ce);
        }
        for (g, c) in grad.iter_mut().zip(ce) {
            *g = (T::one() - alpha) * c;
        }
    }
    if cfg.alpha != 0.0 {
        let ps = softmax_t(student, temp);
        let pt = softmax_t(teacher, temp);
        // α T² · ∂KL/∂l_s, with ∂z/∂l_s = 1/T
        let scale = alpha * temp;
        match cfg.direction {
            KlDirection::StudentFirst => {
                let kl = kl_divergence(&ps, &pt)?;
                for k in 0..n {
                    let d = ps[k] * (safe_ln(ps[k]) - safe_ln(pt[k]) - kl);
                    grad[k] += scale * d;
                }
            }
            KlDirection::TeacherFirst => {
                for k in 0..n {
                    grad[k] += scale * (ps[k] - pt[k]);
                }
            }
        }
    }
    Ok(grad)
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
