use rand::Rng;

use super::Example;

/// Per-class fixed-capacity reservoir (Vitter's Algorithm R, one reservoir per
/// class). Randomness comes from the owning tree so that a whole tree replays
/// bit-identically from one RNG state.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleReservoir {
    capacity: usize,
    stored: Vec<Vec<Example>>,
    seen: Vec<u64>,
}

impl ExampleReservoir {
    pub fn new(capacity: usize, label_count: usize) -> Self {
        ExampleReservoir { capacity, stored: vec![Vec::new(); label_count], seen: vec![0; label_count] }
    }

    pub(crate) fn from_parts(capacity: usize, stored: Vec<Vec<Example>>, seen: Vec<u64>) -> Self {
        ExampleReservoir { capacity, stored, seen }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Offers an example. Returns true if the stored contents changed.
    pub fn add<R: Rng>(&mut self, example: Example, rng: &mut R) -> bool {
        let z = example.label as usize;
        self.seen[z] += 1;
        let list = &mut self.stored[z];
        if list.len() < self.capacity {
            list.push(example);
            return true;
        }
        let j = rng.random_range(0..self.seen[z]);
        if (j as usize) < self.capacity {
            list[j as usize] = example;
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.stored.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_stored(&self, label: usize) -> &[Example] {
        &self.stored[label]
    }

    pub fn seen(&self, label: usize) -> u64 {
        self.seen[label]
    }

    pub fn seen_counts(&self) -> &[u64] {
        &self.seen
    }

    /// Stored count per class, as reals for entropy computations.
    pub fn histogram(&self) -> Vec<f64> {
        self.stored.iter().map(|l| l.len() as f64).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Example> {
        self.stored.iter().flatten()
    }

    pub(crate) fn into_classes(self) -> Vec<Vec<Example>> {
        self.stored
    }
}
