//! Streaming random forest: per-leaf reservoirs, splittability-scheduled
//! splitting, pmf averaging over trees.

mod checkpoint;
mod entropy;
mod pmf;
mod reservoir;
mod tree;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::LabelId;
use crate::par;

pub use checkpoint::{load_forest, save_forest, CheckpointError, FOREST_MAGIC, FOREST_VERSION};
pub use entropy::{entropy_bits, information_gain, information_gain_weighted, GainError};
pub use pmf::{apply_class_weights, inverse_frequency_weights, ProbabilityMassFunction};
pub use reservoir::ExampleReservoir;
pub use tree::{leaf_pmf, splittability, DecisionFunction, DecisionTree, Leaf, TreeNode};

/// A descriptor with its label. Descriptors are shared between trees.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub descriptor: Arc<[f32]>,
    pub label: LabelId,
}

impl Example {
    pub fn new(descriptor: Arc<[f32]>, label: LabelId) -> Self {
        Example { descriptor, label }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSettings {
    pub tree_count: usize,
    pub candidate_count: usize,
    /// α in Eq. 3.
    pub min_examples_to_split: usize,
    /// B: nodes split per tree per `split_step`.
    pub split_budget: usize,
    pub max_depth: usize,
    /// m: stored examples per class per leaf.
    pub reservoir_capacity: usize,
    pub seed: u64,
}

impl Default for ForestSettings {
    fn default() -> Self {
        ForestSettings {
            tree_count: 5,
            candidate_count: 128,
            min_examples_to_split: 50,
            split_budget: 8,
            max_depth: 18,
            reservoir_capacity: 1024,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForestError {
    #[error("label {label} outside label space of size {label_count}")]
    LabelOutOfRange { label: LabelId, label_count: usize },
    #[error("descriptor length {got}, forest expects {expected}")]
    DescriptorLength { expected: usize, got: usize },
    #[error("descriptors must be non-empty")]
    EmptyDescriptor,
    #[error("invalid settings: {0}")]
    BadSettings(&'static str),
    #[error("class weight vector has {got} entries, label space has {expected}")]
    WeightLength { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    settings: ForestSettings,
    label_count: usize,
    descriptor_len: Option<usize>,
    trees: Vec<DecisionTree>,
    class_weights: Option<Vec<f64>>,
    class_totals: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub leaves: usize,
    pub depth: u32,
    pub queue_len: usize,
    pub queue_head: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestStats {
    pub trees: Vec<TreeStats>,
    pub descriptor_len: Option<usize>,
    pub class_totals: Vec<u64>,
    pub reweighted: bool,
}

impl RandomForest {
    pub fn new(settings: ForestSettings, label_count: usize) -> Result<Self, ForestError> {
        if settings.tree_count == 0 {
            return Err(ForestError::BadSettings("tree_count must be positive"));
        }
        if settings.reservoir_capacity == 0 {
            return Err(ForestError::BadSettings("reservoir_capacity must be positive"));
        }
        if label_count == 0 || label_count > 256 {
            return Err(ForestError::BadSettings("label_count must be in 1..=256"));
        }
        let trees = (0..settings.tree_count)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
                rng.set_stream(i as u64);
                DecisionTree::new(rng, label_count, settings.reservoir_capacity)
            })
            .collect();
        Ok(RandomForest {
            settings,
            label_count,
            descriptor_len: None,
            trees,
            class_weights: None,
            class_totals: vec![0; label_count],
        })
    }

    pub fn settings(&self) -> &ForestSettings {
        &self.settings
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn descriptor_len(&self) -> Option<usize> {
        self.descriptor_len
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn class_weights(&self) -> Option<&[f64]> {
        self.class_weights.as_deref()
    }

    /// Cumulative per-class counts of examples passed to `add_examples`.
    pub fn class_totals(&self) -> &[u64] {
        &self.class_totals
    }

    pub fn is_trained(&self) -> bool {
        self.class_totals.iter().any(|&c| c > 0)
    }

    /// Sets (or clears) w_z. Leaf splittabilities are recomputed under the new
    /// weights and the queues rebuilt.
    pub fn set_class_weights(&mut self, weights: Option<Vec<f64>>) -> Result<(), ForestError> {
        if let Some(w) = &weights {
            if w.len() != self.label_count {
                return Err(ForestError::WeightLength { expected: self.label_count, got: w.len() });
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(ForestError::BadSettings("class weights must be finite and non-negative"));
            }
        }
        if weights == self.class_weights {
            return Ok(());
        }
        self.class_weights = weights;
        let (settings, w) = (&self.settings, self.class_weights.as_deref());
        par::for_each_mut(&mut self.trees, |t| t.refresh_all(settings, w));
        Ok(())
    }

    fn check_descriptor(&self, d: &[f32]) -> Result<(), ForestError> {
        if d.is_empty() {
            return Err(ForestError::EmptyDescriptor);
        }
        match self.descriptor_len {
            Some(n) if n != d.len() => Err(ForestError::DescriptorLength { expected: n, got: d.len() }),
            _ => Ok(()),
        }
    }

    /// Routes every example to a leaf in every tree and offers it to that
    /// leaf's reservoir. The whole batch is validated first.
    pub fn add_examples(&mut self, examples: &[Example]) -> Result<(), ForestError> {
        let Some(first) = examples.first() else { return Ok(()) };
        let expected = self.descriptor_len.unwrap_or(first.descriptor.len());
        for e in examples {
            if e.descriptor.is_empty() {
                return Err(ForestError::EmptyDescriptor);
            }
            if e.descriptor.len() != expected {
                return Err(ForestError::DescriptorLength { expected, got: e.descriptor.len() });
            }
            if e.label as usize >= self.label_count {
                return Err(ForestError::LabelOutOfRange { label: e.label, label_count: self.label_count });
            }
        }
        self.descriptor_len = Some(expected);
        for e in examples {
            self.class_totals[e.label as usize] += 1;
        }
        let (settings, w) = (&self.settings, self.class_weights.as_deref());
        par::for_each_mut(&mut self.trees, |t| t.add_examples(examples, settings, w));
        Ok(())
    }

    /// One round of scheduled splitting; returns the total number of nodes split.
    pub fn split_step(&mut self) -> usize {
        let (settings, w) = (&self.settings, self.class_weights.as_deref());
        let mut counts = vec![0usize; self.trees.len()];
        par::for_each_chunk_pair_mut(&mut self.trees, &mut counts, 1, |_, t, c| {
            c[0] = t[0].split_step(settings, w);
        });
        counts.iter().sum()
    }

    /// Repeats `split_step` until nothing splits or `max_rounds` is reached.
    pub fn split_until_quiescent(&mut self, max_rounds: usize) -> usize {
        let mut total = 0;
        for _ in 0..max_rounds {
            let n = self.split_step();
            if n == 0 {
                break;
            }
            total += n;
        }
        total
    }

    pub fn predict_pmf(&self, descriptor: &[f32]) -> Result<ProbabilityMassFunction, ForestError> {
        self.check_descriptor(descriptor)?;
        let w = self.class_weights.as_deref();
        let mut acc = vec![0.0; self.label_count];
        for t in &self.trees {
            t.accumulate_pmf(descriptor, w, &mut acc);
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        Ok(ProbabilityMassFunction::from_probs(acc))
    }

    pub fn predict_label(&self, descriptor: &[f32]) -> Result<LabelId, ForestError> {
        Ok(self.predict_pmf(descriptor)?.argmax())
    }

    /// Predicts a batch in parallel over descriptors.
    pub fn predict_labels(&self, descriptors: &[&[f32]]) -> Result<Vec<LabelId>, ForestError> {
        for d in descriptors {
            self.check_descriptor(d)?;
        }
        const CHUNK: usize = 2048;
        let (k, w) = (self.label_count, self.class_weights.as_deref());
        let mut out = vec![0 as LabelId; descriptors.len()];
        // tree-major within a chunk keeps one tree's nodes hot in cache
        par::for_each_chunk_mut(&mut out, CHUNK, |c, labels| {
            let ds = &descriptors[c * CHUNK..c * CHUNK + labels.len()];
            let mut acc = vec![0.0; ds.len() * k];
            for t in &self.trees {
                for (d, a) in ds.iter().zip(acc.chunks_mut(k)) {
                    t.accumulate_pmf(d, w, a);
                }
            }
            for (l, a) in labels.iter_mut().zip(acc.chunks(k)) {
                *l = ProbabilityMassFunction::from_probs(a.to_vec()).argmax();
            }
        });
        Ok(out)
    }

    pub fn stats(&self) -> ForestStats {
        ForestStats {
            trees: self
                .trees
                .iter()
                .map(|t| TreeStats {
                    nodes: t.node_count(),
                    leaves: t.leaf_count(),
                    depth: t.depth(),
                    queue_len: t.live_queue_len(),
                    queue_head: t.queue_head(),
                })
                .collect(),
            descriptor_len: self.descriptor_len,
            class_totals: self.class_totals.clone(),
            reweighted: self.class_weights.is_some(),
        }
    }

    pub(crate) fn from_parts(
        settings: ForestSettings,
        label_count: usize,
        descriptor_len: Option<usize>,
        trees: Vec<DecisionTree>,
        class_weights: Option<Vec<f64>>,
        class_totals: Vec<u64>,
    ) -> Self {
        RandomForest { settings, label_count, descriptor_len, trees, class_weights, class_totals }
    }
}
