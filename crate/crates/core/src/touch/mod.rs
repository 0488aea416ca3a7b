//! Appendix D touch detection: change detection against the scene raycast,
//! denoising, component filtering with a small forest, touch-point extraction.

mod classifier;
mod image;
mod pipeline;
mod sequence;
mod synthetic;

pub use classifier::{
    classifier_settings, corpus_examples, default_corpus, desk_sequence, desk_setup, evaluate_sequence,
    pretrained_classifier, sequence_examples, train_classifier, DetectionMetrics, CLASSIFIER_SEED, CORPUS_FRAMES,
    CORPUS_NOISE, CORPUS_SEQUENCES,
};
pub use image::{
    dilate3, erode3, filter_components, label_components, open3, BinaryImage, Components, DepthImage,
};
pub use pipeline::{
    change_mask, component_histograms, difference_image, extract_touch_points, prepare_inputs, raw_change_mask,
    run_stages, score_candidates, TouchDetector, TouchOutcome, TouchSettings, TouchStages, TOUCH_CLASS,
};
pub use sequence::{format_pose, parse_pose, read_sequence, write_sequence, RecordedFrame, RecordedSequence, SequenceError};
pub use synthetic::{
    generate_synthetic_sequence, Distractor, FrameTruth, HandKey, SyntheticFrame, SyntheticSequence, TouchScript,
    CONTACT_HEIGHT,
};
