use serde::{Deserialize, Serialize};

use crate::label::LabelId;

/// A probability mass function over a dense label space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMassFunction {
    probs: Vec<f64>,
}

impl ProbabilityMassFunction {
    pub fn uniform(label_count: usize) -> Self {
        ProbabilityMassFunction { probs: vec![1.0 / label_count as f64; label_count] }
    }

    /// Normalises non-negative masses; an all-zero histogram gives the uniform pmf.
    pub fn from_masses(masses: &[f64]) -> Self {
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Self::uniform(masses.len());
        }
        ProbabilityMassFunction { probs: masses.iter().map(|m| m / total).collect() }
    }

    pub fn from_probs(probs: Vec<f64>) -> Self {
        ProbabilityMassFunction { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, label: LabelId) -> f64 {
        self.probs.get(label as usize).copied().unwrap_or(0.0)
    }

    /// Most probable label; ties go to the lowest id.
    pub fn argmax(&self) -> LabelId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best as LabelId
    }

    /// Uniform average of several pmfs over the same label space.
    pub fn average(pmfs: &[ProbabilityMassFunction]) -> Self {
        let n = pmfs.first().map_or(0, |p| p.probs.len());
        let mut acc = vec![0.0; n];
        for p in pmfs {
            for (a, v) in acc.iter_mut().zip(&p.probs) {
                *a += v;
            }
        }
        let k = pmfs.len() as f64;
        ProbabilityMassFunction { probs: acc.into_iter().map(|a| a / k).collect() }
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Reweights a class histogram by per-class weights and renormalises.
pub fn apply_class_weights(histogram: &[f64], weights: &[f64]) -> ProbabilityMassFunction {
    let masses: Vec<f64> =
        histogram.iter().enumerate().map(|(z, &c)| c * weights.get(z).copied().unwrap_or(1.0)).collect();
    ProbabilityMassFunction::from_masses(&masses)
}

/// Inverse class-frequency weights; classes never observed get weight 0.
pub fn inverse_frequency_weights(counts: &[u64]) -> Vec<f64> {
    counts.iter().map(|&c| if c == 0 { 0.0 } else { 1.0 / c as f64 }).collect()
}
