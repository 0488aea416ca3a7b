//! The §4.6 Poker benchmark: streaming training on the official split, raw
//! and confusion-normalised accuracy, optional inverse-frequency reweighting.

mod poker;

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{inverse_frequency_weights, Example, ForestError, ForestSettings, RandomForest};
use crate::label::LabelId;
use crate::par;

pub use poker::{
    hands_with_counts, load_poker, parse_poker_csv, poker_class, poker_files_present, synthetic_poker, to_poker_csv,
    Card, Dataset, DatasetError, LabelledDataset, POKER_CLASSES, POKER_FEATURES, SYNTHETIC_SEED, TEST_FILE, TRAIN_FILE,
    UCI_TEST_COUNTS, UCI_TRAIN_COUNTS,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("normalised accuracy needs at least two classes in the test set, found {0}")]
    SingleClass(usize),
    #[error("train and test disagree: {0}")]
    Mismatch(&'static str),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// K×K counts, true class by row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix { k, counts: vec![0; k * k] }
    }

    pub fn from_predictions(k: usize, truth: &[u8], predicted: &[u8]) -> Self {
        let mut m = ConfusionMatrix::new(k);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.add(t as usize, p as usize);
        }
        m
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.k + predicted] += 1;
    }

    /// Adds `other`'s counts into this matrix.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), EvalError> {
        if other.k != self.k {
            return Err(EvalError::Mismatch("class count"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.counts[truth * self.k..(truth + 1) * self.k].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn raw_accuracy(&self) -> f64 {
        let correct: u64 = (0..self.k).map(|i| self.get(i, i)).sum();
        correct as f64 / self.total().max(1) as f64
    }

    /// Mean per-class recall over the classes present in the test set.
    pub fn normalized_accuracy(&self) -> Result<f64, EvalError> {
        let present: Vec<usize> = (0..self.k).filter(|&i| self.row_total(i) > 0).collect();
        if present.len() < 2 {
            return Err(EvalError::SingleClass(present.len()));
        }
        let sum: f64 = present.iter().map(|&i| self.get(i, i) as f64 / self.row_total(i) as f64).sum();
        Ok(sum / present.len() as f64)
    }

    /// Header row of predicted classes, then one row per true class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for j in 0..self.k {
            write!(s, ",{j}").unwrap();
        }
        s.push('\n');
        for i in 0..self.k {
            write!(s, "{i}").unwrap();
            for j in 0..self.k {
                write!(s, ",{}", self.get(i, j)).unwrap();
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalProtocol {
    pub epochs: usize,
    pub repeats: usize,
    /// Examples per `add_examples` call; one `split_step` follows each batch.
    pub batch: usize,
    /// Cap on `split_step` rounds after the last epoch.
    pub final_rounds: usize,
    /// Repeat r uses forest seed `seed + r` and shuffles with the same value.
    pub seed: u64,
    pub reweight: bool,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol { epochs: 3, repeats: 5, batch: 2500, final_rounds: 10_000, seed: 0, reweight: false }
    }
}

/// Forest settings used for the Poker runs. Tuned on the synthetic split;
/// the interactive defaults (T=5, α=50) reach only about 58% raw.
pub fn poker_forest_settings() -> ForestSettings {
    ForestSettings {
        tree_count: 100,
        candidate_count: 64,
        min_examples_to_split: 250,
        split_budget: 8,
        max_depth: 40,
        reservoir_capacity: 1024,
        seed: 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub seed: u64,
    pub raw: f64,
    pub normalized: f64,
    pub confusion: ConfusionMatrix,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation (n - 1); zero for a single value.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n.max(1.0);
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub settings: ForestSettings,
    pub protocol: EvalProtocol,
    pub train_size: usize,
    pub test_size: usize,
    pub repeats: Vec<RepeatResult>,
    pub raw: MeanStd,
    pub normalized: MeanStd,
    pub seconds: f64,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let w = if self.protocol.reweight { "reweighted" } else { "unweighted" };
        writeln!(s, "poker {w}: train {} test {}", self.train_size, self.test_size).unwrap();
        writeln!(s, "{:>6} {:>10} {:>12} {:>9}", "seed", "raw %", "normalised %", "seconds").unwrap();
        for r in &self.repeats {
            writeln!(s, "{:>6} {:>10.2} {:>12.2} {:>9.1}", r.seed, r.raw * 100.0, r.normalized * 100.0, r.seconds)
                .unwrap();
        }
        writeln!(
            s,
            "{:>6} {:>5.2}±{:<4.2} {:>7.2}±{:<4.2} {:>9.1}",
            "mean",
            self.raw.mean * 100.0,
            self.raw.std * 100.0,
            self.normalized.mean * 100.0,
            self.normalized.std * 100.0,
            self.seconds
        )
        .unwrap();
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn examples(d: &Dataset) -> Vec<Example> {
    (0..d.len()).map(|i| Example::new(Arc::from(d.row(i)), d.labels[i] as LabelId)).collect()
}

/// Trains one forest under the protocol with the given repeat seed.
pub fn train_forest(
    settings: &ForestSettings,
    train: &Dataset,
    protocol: &EvalProtocol,
    seed: u64,
) -> Result<RandomForest, EvalError> {
    let mut forest = RandomForest::new(ForestSettings { seed, ..settings.clone() }, train.class_count)?;
    if protocol.reweight {
        let counts: Vec<u64> = train.class_histogram().iter().map(|&c| c as u64).collect();
        forest.set_class_weights(Some(inverse_frequency_weights(&counts)))?;
    }
    let mut pool = examples(train);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..protocol.epochs {
        pool.shuffle(&mut rng);
        for batch in pool.chunks(protocol.batch.max(1)) {
            forest.add_examples(batch)?;
            forest.split_step();
        }
    }
    forest.split_until_quiescent(protocol.final_rounds);
    Ok(forest)
}

pub fn predict_dataset(forest: &RandomForest, d: &Dataset) -> Vec<u8> {
    let rows: Vec<&[f32]> = d.features.chunks(d.dim).collect();
    forest.predict_labels(&rows).unwrap_or_else(|_| vec![0; d.len()])
}

pub fn evaluate(settings: &ForestSettings, data: &LabelledDataset, protocol: &EvalProtocol) -> Result<EvalReport, EvalError> {
    if data.train.dim != data.test.dim {
        return Err(EvalError::Mismatch("feature dimension"));
    }
    if data.train.class_count != data.test.class_count {
        return Err(EvalError::Mismatch("class count"));
    }
    let start = Instant::now();
    // each repeat owns its forest and rng
    let repeats = par::map_range(protocol.repeats, |r| -> Result<RepeatResult, EvalError> {
        let t = Instant::now();
        let seed = protocol.seed + r as u64;
        let forest = train_forest(settings, &data.train, protocol, seed)?;
        let predicted = predict_dataset(&forest, &data.test);
        let confusion = ConfusionMatrix::from_predictions(data.test.class_count, &data.test.labels, &predicted);
        Ok(RepeatResult {
            seed,
            raw: confusion.raw_accuracy(),
            normalized: confusion.normalized_accuracy()?,
            confusion,
            seconds: t.elapsed().as_secs_f64(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let raw = MeanStd::of(&repeats.iter().map(|r| r.raw).collect::<Vec<_>>());
    let normalized = MeanStd::of(&repeats.iter().map(|r| r.normalized).collect::<Vec<_>>());
    Ok(EvalReport {
        settings: settings.clone(),
        protocol: protocol.clone(),
        train_size: data.train.len(),
        test_size: data.test.len(),
        repeats,
        raw,
        normalized,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Confusion matrix of always predicting the most frequent training class.
pub fn majority_baseline(data: &LabelledDataset) -> ConfusionMatrix {
    let h = data.train.class_histogram();
    let majority = (0..h.len()).max_by_key(|&i| (h[i], std::cmp::Reverse(i))).unwrap_or(0) as u8;
    ConfusionMatrix::from_predictions(data.test.class_count, &data.test.labels, &vec![majority; data.test.len()])
}

/// Confusion matrix of a uniform random predictor.
pub fn uniform_random_baseline(test: &Dataset, seed: u64) -> ConfusionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let predicted: Vec<u8> = (0..test.len()).map(|_| rng.random_range(0..test.class_count) as u8).collect();
    ConfusionMatrix::from_predictions(test.class_count, &test.labels, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_arithmetic() {
        let m = ConfusionMatrix::from_predictions(3, &[0, 0, 0, 1, 2, 2], &[0, 0, 1, 1, 0, 2]);
        assert_eq!(m.total(), 6);
        assert!((m.raw_accuracy() - 4.0 / 6.0).abs() < 1e-12);
        // recalls 2/3, 1, 1/2
        assert!((m.normalized_accuracy().unwrap() - (2.0 / 3.0 + 1.0 + 0.5) / 3.0).abs() < 1e-12);
        assert_eq!(m.to_csv().lines().nth(1), Some("0,2,1,0"));
        let one = ConfusionMatrix::from_predictions(3, &[1, 1], &[1, 0]);
        assert!(matches!(one.normalized_accuracy(), Err(EvalError::SingleClass(1))));
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_run_beats_majority() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let counts = [400, 340, 40, 20, 0, 0, 0, 0, 0, 0];
        let train = hands_with_counts(&counts, &mut rng);
        let test = hands_with_counts(&counts, &mut rng);
        let data = LabelledDataset { train, test };
        let protocol = EvalProtocol { repeats: 1, batch: 100, ..EvalProtocol::default() };
        let settings = ForestSettings { tree_count: 5, min_examples_to_split: 20, ..poker_forest_settings() };
        let report = evaluate(&settings, &data, &protocol).unwrap();
        assert_eq!(report.repeats[0].confusion.total(), 800);
        assert!(report.to_json().contains("\"normalized\""));
        assert!(report.table().contains("unweighted"));
    }
}
