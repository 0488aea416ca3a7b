//! The 2-class component classifier: corpus construction, training and the
//! committed pre-trained checkpoint.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::pipeline::{run_stages, TouchDetector, TouchSettings, TOUCH_CLASS};
use super::synthetic::{FrameTruth, SyntheticSequence};
use super::image::DepthImage;
use super::synthetic::{generate_synthetic_sequence, TouchScript};
use crate::forest::{load_forest, Example, ForestSettings, RandomForest};
use crate::presets;
use crate::rendering::{CameraPose, Intrinsics};
use crate::scene::VoxelScene;

/// Synthetic corpus behind the committed checkpoint: script seeds
/// `0..CORPUS_SEQUENCES`, `CORPUS_FRAMES` frames each, σ = 5 mm.
pub const CORPUS_SEQUENCES: u64 = 30;
pub const CORPUS_FRAMES: usize = 60;
pub const CORPUS_NOISE: f32 = 0.005;
pub const CLASSIFIER_SEED: u64 = 7;

static PRETRAINED: &[u8] = include_bytes!("../../assets/touch_classifier.sprf");

pub fn classifier_settings(seed: u64) -> ForestSettings {
    ForestSettings {
        tree_count: 5,
        candidate_count: 64,
        min_examples_to_split: 10,
        split_budget: 64,
        max_depth: 12,
        reservoir_capacity: 256,
        seed,
    }
}

/// Labelled component histograms: a component is a touch example iff its
/// frame is a contact frame and it contains a ground-truth contact pixel.
pub fn corpus_examples(depth: &DepthImage, scene_depth: &[f32], truth: &FrameTruth, s: &TouchSettings) -> Vec<Example> {
    let st = run_stages(depth, scene_depth, s);
    let mut hit = vec![false; st.components.len()];
    if truth.touching {
        for &(x, y) in &truth.contact {
            let k = st.components.labels[y * st.components.width + x];
            if k > 0 {
                hit[k as usize - 1] = true;
            }
        }
    }
    st.histograms
        .into_iter()
        .zip(hit)
        .map(|(h, t)| Example::new(Arc::from(h), if t { TOUCH_CLASS } else { 0 }))
        .collect()
}

pub fn sequence_examples(seq: &SyntheticSequence, s: &TouchSettings) -> Vec<Example> {
    seq.frames.iter().flat_map(|f| corpus_examples(&f.depth, &seq.scene_depth, &f.truth, s)).collect()
}

/// Trains a classifier to quiescence on `examples`.
pub fn train_classifier(examples: &[Example], seed: u64) -> RandomForest {
    let mut f = RandomForest::new(classifier_settings(seed), 2).expect("valid classifier settings");
    f.add_examples(examples).expect("histograms share one length");
    f.split_until_quiescent(1000);
    f
}

/// The desk setup used for the corpus: a 1.6 x 1.2 m plane seen from 1 m.
pub fn desk_setup() -> (VoxelScene, CameraPose, Intrinsics) {
    (presets::desk(0.01, 1.6, 1.2), presets::top_down_pose(1.0), Intrinsics::default())
}

pub fn desk_sequence(script_seed: u64, frames: usize, noise: f32, s: &TouchSettings) -> SyntheticSequence {
    let (scene, pose, intr) = desk_setup();
    let script = TouchScript::random(script_seed, frames, noise);
    generate_synthetic_sequence(&scene, &pose, &intr, &script, s.tau, s.gamma)
}

pub fn default_corpus(s: &TouchSettings) -> Vec<Example> {
    (0..CORPUS_SEQUENCES)
        .flat_map(|seed| sequence_examples(&desk_sequence(seed, CORPUS_FRAMES, CORPUS_NOISE, s), s))
        .collect()
}

/// The committed checkpoint, trained by `paintbox train-touch-classifier` on
/// `default_corpus` with `CLASSIFIER_SEED`.
pub fn pretrained_classifier() -> RandomForest {
    load_forest(PRETRAINED).expect("committed classifier checkpoint is valid")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub max_latency_ms: f64,
    pub mean_latency_ms: f64,
}

impl DetectionMetrics {
    pub fn recall(&self) -> f64 {
        let d = self.true_positives + self.false_negatives;
        if d == 0 { 1.0 } else { self.true_positives as f64 / d as f64 }
    }

    pub fn precision(&self) -> f64 {
        let d = self.true_positives + self.false_positives;
        if d == 0 { 1.0 } else { self.true_positives as f64 / d as f64 }
    }
}

/// Per-frame contact detection against ground truth.
pub fn evaluate_sequence(detector: &TouchDetector, seq: &SyntheticSequence) -> DetectionMetrics {
    let mut m = DetectionMetrics::default();
    let mut total_ms = 0.0;
    for f in &seq.frames {
        let out = detector.detect(&f.depth, &seq.scene_depth);
        total_ms += out.elapsed_ms;
        m.max_latency_ms = m.max_latency_ms.max(out.elapsed_ms);
        match (out.is_touch(), f.truth.touching) {
            (true, true) => m.true_positives += 1,
            (true, false) => m.false_positives += 1,
            (false, true) => m.false_negatives += 1,
            (false, false) => m.true_negatives += 1,
        }
    }
    m.mean_latency_ms = total_ms / seq.frames.len().max(1) as f64;
    m
}
