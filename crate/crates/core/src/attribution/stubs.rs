//! Closed-form subset classifiers for exercising the search without a
//! transformer.

use crate::error::{Error, Result};
use crate::vit::{Prediction, TokenSubset};

use super::classifier::SubsetClassifier;

fn check(subset: &TokenSubset, n: usize) -> Result<()> {
    match subset.indices().last() {
        Some(&t) if t >= n => Err(Error::InvalidSubset(format!(
            "token {t} out of range for {n} tokens"
        ))),
        _ => Ok(()),
    }
}

/// Two classes with `p(1) = Σ w_i` over present tokens (clamped to `[0, 1]`)
/// and `p(0) = 1 - p(1)`.
#[derive(Debug, Clone)]
pub struct AdditiveStub {
    weights: Vec<f32>,
}

impl AdditiveStub {
    pub fn new(weights: Vec<f32>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }
}

impl SubsetClassifier for AdditiveStub {
    fn token_count(&self) -> usize {
        self.weights.len()
    }

    fn evaluate(&self, subset: &TokenSubset) -> Result<Prediction> {
        check(subset, self.weights.len())?;
        let p1 = subset
            .indices()
            .iter()
            .map(|&t| self.weights[t])
            .sum::<f32>()
            .clamp(0.0, 1.0);
        Ok(Prediction::from_probs(vec![1.0 - p1, p1]))
    }
}

/// Same probabilities for every subset.
#[derive(Debug, Clone)]
pub struct ConstantStub {
    token_count: usize,
    probs: Vec<f32>,
}

impl ConstantStub {
    pub fn new(token_count: usize, probs: Vec<f32>) -> Self {
        Self { token_count, probs }
    }
}

impl SubsetClassifier for ConstantStub {
    fn token_count(&self) -> usize {
        self.token_count
    }

    fn evaluate(&self, subset: &TokenSubset) -> Result<Prediction> {
        check(subset, self.token_count)?;
        Ok(Prediction::from_probs(self.probs.clone()))
    }
}

/// Multi-class logits keyed on token presence:
/// `logit_m = bias_m + Σ_i present unary[m][i] + Σ_(a,b) both present pair_m`.
#[derive(Debug, Clone)]
pub struct KeyedStub {
    bias: Vec<f32>,
    unary: Vec<Vec<f32>>,
    pairs: Vec<(usize, usize, Vec<f32>)>,
}

impl KeyedStub {
    /// `unary` is `classes × tokens`; each pair term carries one value per class.
    pub fn new(bias: Vec<f32>, unary: Vec<Vec<f32>>, pairs: Vec<(usize, usize, Vec<f32>)>) -> Self {
        assert_eq!(bias.len(), unary.len(), "one unary row per class");
        assert!(unary.windows(2).all(|w| w[0].len() == w[1].len()));
        Self { bias, unary, pairs }
    }
}

impl SubsetClassifier for KeyedStub {
    fn token_count(&self) -> usize {
        self.unary.first().map_or(0, Vec::len)
    }

    fn evaluate(&self, subset: &TokenSubset) -> Result<Prediction> {
        check(subset, self.token_count())?;
        let mut logits = self.bias.clone();
        for (m, row) in self.unary.iter().enumerate() {
            for &t in subset.indices() {
                logits[m] += row[t];
            }
        }
        for (a, b, values) in &self.pairs {
            if subset.contains(*a) && subset.contains(*b) {
                for (l, v) in logits.iter_mut().zip(values) {
                    *l += v;
                }
            }
        }
        Ok(Prediction::from_logits(logits))
    }
}
