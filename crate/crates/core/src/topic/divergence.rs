use serde::{Deserialize, Serialize};

use super::lda::TopicDistribution;
use crate::error::{Error, Result};

/// Value returned by [`r2`] when the question distribution is uniform (zero
/// variance) but the answer differs from it.
pub const R2_FLOOR: f64 = -10.0;

const VARIANCE_EPS: f64 = 1e-12;

fn same_len(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            actual: q.len(),
        });
    }
    Ok(())
}

/// Kullback-Leibler divergence `sum p ln(p/q)`, natural log.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    same_len(p, q)?;
    Ok(p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum())
}

/// Jensen-Shannon divergence against the midpoint distribution; in `[0, ln 2]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    same_len(p, q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(0.5 * kl(p, &m)? + 0.5 * kl(q, &m)?)
}

pub fn cosine(p: &[f64], q: &[f64]) -> Result<f64> {
    same_len(p, q)?;
    let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    let np = p.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nq = q.iter().map(|a| a * a).sum::<f64>().sqrt();
    if np == 0.0 || nq == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (np * nq))
}

/// Coefficient of determination of the answer distribution against the
/// question distribution, with the uniform `1/K` as the reference mean.
pub fn r2(question: &[f64], answer: &[f64]) -> Result<f64> {
    same_len(question, answer)?;
    let k = question.len() as f64;
    let residual: f64 = question.iter().zip(answer).map(|(q, a)| (a - q).powi(2)).sum();
    let spread: f64 = question.iter().map(|q| (q - 1.0 / k).powi(2)).sum();
    if spread < VARIANCE_EPS {
        return Ok(if residual < VARIANCE_EPS { 1.0 } else { R2_FLOOR });
    }
    Ok(1.0 - residual / spread)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TextualFeatures {
    pub kl_q_a: f64,
    pub kl_a_q: f64,
    pub jsd: f64,
    pub r2: f64,
    pub cosine: f64,
}

impl TextualFeatures {
    pub const NAMES: [&'static str; 5] = ["kl_q_a", "kl_a_q", "jsd", "r2", "cosine"];

    pub fn values(&self) -> [f64; 5] {
        [self.kl_q_a, self.kl_a_q, self.jsd, self.r2, self.cosine]
    }
}

pub fn extract_textual(question: &TopicDistribution, answer: &TopicDistribution) -> Result<TextualFeatures> {
    let (q, a) = (question.probabilities(), answer.probabilities());
    Ok(TextualFeatures {
        kl_q_a: kl(q, a)?,
        kl_a_q: kl(a, q)?,
        jsd: jsd(q, a)?,
        r2: r2(q, a)?,
        cosine: cosine(q, a)?,
    })
}
