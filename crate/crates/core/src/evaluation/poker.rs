//! The UCI Poker Hand data: CSV loading, the hand classifier, and a
//! synthetic stand-in with the official split sizes and class counts.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const POKER_CLASSES: usize = 10;
pub const POKER_FEATURES: usize = 10;
pub const TRAIN_FILE: &str = "poker-hand-training-true.data";
pub const TEST_FILE: &str = "poker-hand-testing.data";

/// Class counts of the official files (from `poker-hand.names`).
pub const UCI_TRAIN_COUNTS: [usize; POKER_CLASSES] = [12493, 10599, 1206, 513, 93, 54, 36, 6, 5, 5];
pub const UCI_TEST_COUNTS: [usize; POKER_CLASSES] = [501209, 422498, 47622, 21121, 3885, 1996, 1424, 230, 12, 3];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{source_name}:{line}: {what}")]
    Parse { source_name: String, line: usize, what: String },
    #[error("dataset is empty")]
    Empty,
}

/// Row-major feature matrix with one class per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub class_count: usize,
    pub features: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// Official train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledDataset {
    pub train: Dataset,
    pub test: Dataset,
}

/// Parses UCI Poker CSV: ten integer attributes (suit 1-4, rank 1-13
/// alternating) and the class 0-9. Blank lines are skipped.
pub fn parse_poker_csv(text: &str, source_name: &str) -> Result<Dataset, DatasetError> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |what: String| DatasetError::Parse { source_name: source_name.to_string(), line: i + 1, what };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != POKER_FEATURES + 1 {
            return Err(err(format!("expected {} fields, found {}", POKER_FEATURES + 1, fields.len())));
        }
        for (k, f) in fields[..POKER_FEATURES].iter().enumerate() {
            let v: u8 = f.parse().map_err(|_| err(format!("field {}: {f:?} is not an integer", k + 1)))?;
            let ok = if k % 2 == 0 { (1..=4).contains(&v) } else { (1..=13).contains(&v) };
            if !ok {
                return Err(err(format!("field {}: {v} out of range", k + 1)));
            }
            features.push(v as f32);
        }
        let c: u8 = fields[POKER_FEATURES].parse().map_err(|_| err(format!("class {:?} is not an integer", fields[10])))?;
        if c as usize >= POKER_CLASSES {
            return Err(err(format!("class {c} out of range")));
        }
        labels.push(c);
    }
    if labels.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(Dataset { dim: POKER_FEATURES, class_count: POKER_CLASSES, features, labels })
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })
}

/// Loads the official files from `dir`.
pub fn load_poker(dir: &Path) -> Result<LabelledDataset, DatasetError> {
    let train = dir.join(TRAIN_FILE);
    let test = dir.join(TEST_FILE);
    Ok(LabelledDataset {
        train: parse_poker_csv(&read(&train)?, &train.display().to_string())?,
        test: parse_poker_csv(&read(&test)?, &test.display().to_string())?,
    })
}

pub fn poker_files_present(dir: &Path) -> bool {
    dir.join(TRAIN_FILE).is_file() && dir.join(TEST_FILE).is_file()
}

/// A card as (suit 1-4, rank 1-13, ace = 1).
pub type Card = (u8, u8);

/// Poker hand class per the UCI definition: 0 nothing, 1 pair, 2 two pairs,
/// 3 three of a kind, 4 straight, 5 flush, 6 full house, 7 four of a kind,
/// 8 straight flush, 9 royal flush. Aces play high or low in straights.
pub fn poker_class(hand: &[Card; 5]) -> u8 {
    let flush = hand.iter().all(|c| c.0 == hand[0].0);
    let mut counts = [0u8; 14];
    for c in hand {
        counts[c.1 as usize] += 1;
    }
    let mut groups: Vec<u8> = counts.iter().copied().filter(|&n| n > 0).collect();
    groups.sort_unstable_by(|a, b| b.cmp(a));
    let distinct = groups.len() == 5;
    let royal = distinct && [1, 10, 11, 12, 13].iter().all(|&r| counts[r] == 1);
    let straight = distinct && {
        let lo = (1..=13).find(|&r| counts[r] > 0).unwrap();
        let hi = (1..=13).rev().find(|&r| counts[r] > 0).unwrap();
        hi - lo == 4 || royal
    };
    match () {
        _ if royal && flush => 9,
        _ if straight && flush => 8,
        _ if groups[0] == 4 => 7,
        _ if groups[0] == 3 && groups[1] == 2 => 6,
        _ if flush => 5,
        _ if straight => 4,
        _ if groups[0] == 3 => 3,
        _ if groups[0] == 2 && groups[1] == 2 => 2,
        _ if groups[0] == 2 => 1,
        _ => 0,
    }
}

fn random_hand<R: Rng>(rng: &mut R) -> [Card; 5] {
    let mut deck: [u8; 52] = std::array::from_fn(|i| i as u8);
    let (picked, _) = deck.partial_shuffle(rng, 5);
    std::array::from_fn(|i| (picked[i] / 13 + 1, picked[i] % 13 + 1))
}

/// A hand of class 7, 8 or 9 built directly, in random card order.
fn constructed_hand<R: Rng>(class: u8, rng: &mut R) -> [Card; 5] {
    let mut hand: [Card; 5] = match class {
        9 => {
            let s = rng.random_range(1..=4);
            [(s, 1), (s, 10), (s, 11), (s, 12), (s, 13)]
        }
        8 => {
            // lowest rank 1..=9; 10-high starting at 10 would be royal
            let s = rng.random_range(1..=4);
            let lo = rng.random_range(1..=9u8);
            std::array::from_fn(|i| (s, lo + i as u8))
        }
        7 => {
            let r = rng.random_range(1..=13u8);
            let kicker = loop {
                let k = rng.random_range(1..=13u8);
                if k != r {
                    break (rng.random_range(1..=4), k);
                }
            };
            [(1, r), (2, r), (3, r), (4, r), kicker]
        }
        _ => unreachable!("only rare classes are constructed"),
    };
    hand.shuffle(rng);
    hand
}

/// Hands drawn uniformly from each class until the requested counts are met.
/// Classes 7-9 are constructed directly; rejection would need millions of
/// draws per hand.
pub fn hands_with_counts<R: Rng>(counts: &[usize; POKER_CLASSES], rng: &mut R) -> Dataset {
    let total: usize = counts.iter().sum();
    let mut need = *counts;
    let mut rows: Vec<([Card; 5], u8)> = Vec::with_capacity(total);
    for class in 7..POKER_CLASSES as u8 {
        for _ in 0..need[class as usize] {
            rows.push((constructed_hand(class, rng), class));
        }
        need[class as usize] = 0;
    }
    let mut left: usize = need.iter().sum();
    while left > 0 {
        let h = random_hand(rng);
        let c = poker_class(&h);
        if need[c as usize] > 0 {
            need[c as usize] -= 1;
            left -= 1;
            rows.push((h, c));
        }
    }
    rows.shuffle(rng);
    let mut features = Vec::with_capacity(total * POKER_FEATURES);
    let mut labels = Vec::with_capacity(total);
    for (h, c) in rows {
        for (s, r) in h {
            features.extend([s as f32, r as f32]);
        }
        labels.push(c);
    }
    Dataset { dim: POKER_FEATURES, class_count: POKER_CLASSES, features, labels }
}

/// Seed of the synthetic set the Poker settings were checked against.
pub const SYNTHETIC_SEED: u64 = 42;

/// Stand-in for the UCI files: same sizes and exact per-class counts, hands
/// uniform within each class.
pub fn synthetic_poker(seed: u64) -> LabelledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = hands_with_counts(&UCI_TRAIN_COUNTS, &mut rng);
    let test = hands_with_counts(&UCI_TEST_COUNTS, &mut rng);
    LabelledDataset { train, test }
}

pub fn to_poker_csv(d: &Dataset) -> String {
    let mut out = String::with_capacity(d.len() * 30);
    for i in 0..d.len() {
        for v in d.row(i) {
            out.push_str(&format!("{},", *v as u8));
        }
        out.push_str(&format!("{}\n", d.labels[i]));
    }
    out
}
