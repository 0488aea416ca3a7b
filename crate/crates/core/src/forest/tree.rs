use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::entropy::{entropy_bits, gain_from_masses, weighted_masses};
use super::pmf::ProbabilityMassFunction;
use super::reservoir::ExampleReservoir;
use super::{Example, ForestSettings};

/// Eq. 1 stump: go left iff `x[feature] < threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionFunction {
    pub feature: u32,
    pub threshold: f32,
}

impl DecisionFunction {
    #[inline]
    pub fn goes_left(&self, descriptor: &[f32]) -> bool {
        descriptor[self.feature as usize] < self.threshold
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub reservoir: ExampleReservoir,
    pub depth: u32,
    pub splittability: f64,
    /// Bumped whenever the reservoir changes; queue entries with an older
    /// version are stale.
    pub(crate) version: u32,
    pub(crate) queued: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Branch { decision: DecisionFunction, left: u32, right: u32, depth: u32 },
    Leaf(Leaf),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct QueueEntry {
    pub score: f64,
    pub node: u32,
    pub version: u32,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    // max-heap on score, then lowest node index, then newest version
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| self.version.cmp(&other.version))
    }
}

/// Splittability (Eq. 3): entropy of the stored examples if there are at
/// least `alpha` of them, else 0.
pub fn splittability(reservoir: &ExampleReservoir, alpha: usize, weights: Option<&[f64]>) -> f64 {
    if reservoir.len() < alpha || reservoir.is_empty() {
        return 0.0;
    }
    entropy_bits(&weighted_masses(&reservoir.histogram(), weights))
}

/// Leaf pmf: normalised (optionally weighted) class histogram of the reservoir.
pub fn leaf_pmf(reservoir: &ExampleReservoir, weights: Option<&[f64]>) -> ProbabilityMassFunction {
    ProbabilityMassFunction::from_masses(&weighted_masses(&reservoir.histogram(), weights))
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Route {
    feature: u32,
    threshold: f32,
    left: u32,
    right: u32,
}

const LEAF: u32 = u32::MAX;

impl Route {
    fn of(node: &TreeNode) -> Self {
        match node {
            TreeNode::Leaf(_) => Route { feature: LEAF, threshold: 0.0, left: 0, right: 0 },
            TreeNode::Branch { decision, left, right, .. } => {
                Route { feature: decision.feature, threshold: decision.threshold, left: *left, right: *right }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<TreeNode>,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) queue: BinaryHeap<QueueEntry>,
    /// Compact mirror of `nodes` for descent; leaves have `feature == LEAF`.
    pub(crate) route: Vec<Route>,
    pub(crate) label_count: usize,
    pub(crate) capacity: usize,
}

impl PartialEq for DecisionTree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.rng == other.rng
    }
}

impl DecisionTree {
    pub fn new(rng: ChaCha8Rng, label_count: usize, capacity: usize) -> Self {
        let root = TreeNode::Leaf(Leaf {
            reservoir: ExampleReservoir::new(capacity, label_count),
            depth: 0,
            splittability: 0.0,
            version: 0,
            queued: false,
        });
        let route = vec![Route::of(&root)];
        DecisionTree { nodes: vec![root], rng, queue: BinaryHeap::new(), route, label_count, capacity }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf(_))).count()
    }

    pub fn depth(&self) -> u32 {
        self.nodes
            .iter()
            .map(|n| match n {
                TreeNode::Branch { depth, .. } => *depth,
                TreeNode::Leaf(l) => l.depth,
            })
            .max()
            .unwrap_or(0)
    }

    /// Splittability at the head of the queue, ignoring stale entries.
    pub fn queue_head(&self) -> Option<f64> {
        self.queue.iter().filter(|e| self.is_live(e)).map(|e| e.score).max_by(f64::total_cmp)
    }

    pub fn live_queue_len(&self) -> usize {
        self.queue.iter().filter(|e| self.is_live(e)).count()
    }

    fn is_live(&self, e: &QueueEntry) -> bool {
        matches!(&self.nodes[e.node as usize], TreeNode::Leaf(l) if l.version == e.version && l.queued)
    }

    /// Descends with Eq. 1 to the unique leaf for `descriptor`.
    pub fn find_leaf(&self, descriptor: &[f32]) -> u32 {
        let mut i = 0u32;
        loop {
            let r = self.route[i as usize];
            if r.feature == LEAF {
                return i;
            }
            i = if descriptor[r.feature as usize] < r.threshold { r.left } else { r.right };
        }
    }

    pub(crate) fn rebuild_route(&mut self) {
        self.route = self.nodes.iter().map(Route::of).collect();
    }

    pub fn leaf(&self, node: u32) -> Option<&Leaf> {
        match &self.nodes[node as usize] {
            TreeNode::Leaf(l) => Some(l),
            TreeNode::Branch { .. } => None,
        }
    }

    pub fn predict_pmf(&self, descriptor: &[f32], weights: Option<&[f64]>) -> ProbabilityMassFunction {
        let leaf = self.leaf(self.find_leaf(descriptor)).expect("find_leaf returns a leaf");
        leaf_pmf(&leaf.reservoir, weights)
    }

    /// Adds this tree's leaf pmf for `descriptor` into `acc` without allocating.
    pub fn accumulate_pmf(&self, descriptor: &[f32], weights: Option<&[f64]>, acc: &mut [f64]) {
        let leaf = self.leaf(self.find_leaf(descriptor)).expect("find_leaf returns a leaf");
        let mass = |z: usize| {
            let c = leaf.reservoir.class_stored(z).len() as f64;
            weights.map_or(c, |w| c * w.get(z).copied().unwrap_or(1.0))
        };
        let total: f64 = (0..acc.len()).map(mass).sum();
        if total <= 0.0 {
            let u = 1.0 / acc.len() as f64;
            acc.iter_mut().for_each(|a| *a += u);
        } else {
            for (z, a) in acc.iter_mut().enumerate() {
                *a += mass(z) / total;
            }
        }
    }

    pub(crate) fn add_examples(&mut self, examples: &[Example], settings: &ForestSettings, weights: Option<&[f64]>) {
        let mut dirty = Vec::new();
        for ex in examples {
            let node = self.find_leaf(&ex.descriptor);
            let TreeNode::Leaf(leaf) = &mut self.nodes[node as usize] else { unreachable!() };
            if leaf.reservoir.add(ex.clone(), &mut self.rng) {
                dirty.push(node);
            }
        }
        dirty.sort_unstable();
        dirty.dedup();
        for node in dirty {
            self.refresh(node, settings, weights);
        }
    }

    /// Recomputes a leaf's splittability and (re)queues it.
    pub(crate) fn refresh(&mut self, node: u32, settings: &ForestSettings, weights: Option<&[f64]>) {
        let TreeNode::Leaf(leaf) = &mut self.nodes[node as usize] else { return };
        leaf.version = leaf.version.wrapping_add(1);
        leaf.splittability = splittability(&leaf.reservoir, settings.min_examples_to_split, weights);
        leaf.queued = leaf.splittability > 0.0 && (leaf.depth as usize) < settings.max_depth;
        if leaf.queued {
            self.queue.push(QueueEntry { score: leaf.splittability, node, version: leaf.version });
        }
    }

    pub(crate) fn refresh_all(&mut self, settings: &ForestSettings, weights: Option<&[f64]>) {
        self.queue.clear();
        for i in 0..self.nodes.len() {
            self.refresh(i as u32, settings, weights);
        }
    }

    /// Rebuilds the queue from the leaves' `queued` flags (after loading).
    pub(crate) fn rebuild_queue(&mut self) {
        self.queue.clear();
        for (i, n) in self.nodes.iter().enumerate() {
            if let TreeNode::Leaf(l) = n {
                if l.queued {
                    self.queue.push(QueueEntry { score: l.splittability, node: i as u32, version: l.version });
                }
            }
        }
    }

    /// Splits up to `settings.split_budget` leaves. Returns the number split.
    pub(crate) fn split_step(&mut self, settings: &ForestSettings, weights: Option<&[f64]>) -> usize {
        let mut splits = 0;
        while splits < settings.split_budget {
            let Some(entry) = self.queue.pop() else { break };
            if !self.is_live(&entry) {
                continue;
            }
            if entry.score <= 0.0 {
                break;
            }
            if let TreeNode::Leaf(l) = &mut self.nodes[entry.node as usize] {
                l.queued = false;
            }
            if self.try_split(entry.node, settings, weights) {
                splits += 1;
            }
        }
        splits
    }

    fn try_split(&mut self, node: u32, settings: &ForestSettings, weights: Option<&[f64]>) -> bool {
        let TreeNode::Leaf(leaf) = &self.nodes[node as usize] else { return false };
        let depth = leaf.depth;
        let examples: Vec<&Example> = leaf.reservoir.iter().collect();
        let Some(dim) = examples.first().map(|e| e.descriptor.len()) else { return false };
        if dim == 0 {
            return false;
        }
        let parent = weighted_masses(&leaf.reservoir.histogram(), weights);
        let mut best: Option<(f64, DecisionFunction)> = None;
        let mut left = vec![0.0; self.label_count];
        for _ in 0..settings.candidate_count {
            let k = self.rng.random_range(0..dim);
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for e in &examples {
                let x = e.descriptor[k];
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if !(lo < hi) {
                continue;
            }
            let tau: f32 = self.rng.random_range(lo..hi);
            let decision = DecisionFunction { feature: k as u32, threshold: tau };
            left.iter_mut().for_each(|v| *v = 0.0);
            let mut nl = 0usize;
            for e in &examples {
                if decision.goes_left(&e.descriptor) {
                    left[e.label as usize] += 1.0;
                    nl += 1;
                }
            }
            if nl == 0 || nl == examples.len() {
                continue;
            }
            let gain = gain_from_masses(&parent, &weighted_masses(&left, weights));
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, decision));
            }
        }
        let Some((_, decision)) = best else { return false };

        let TreeNode::Leaf(leaf) = std::mem::replace(
            &mut self.nodes[node as usize],
            TreeNode::Branch { decision, left: 0, right: 0, depth },
        ) else {
            unreachable!()
        };
        let mut l_classes = vec![Vec::new(); self.label_count];
        let mut r_classes = vec![Vec::new(); self.label_count];
        for (z, list) in leaf.reservoir.into_classes().into_iter().enumerate() {
            for e in list {
                if decision.goes_left(&e.descriptor) {
                    l_classes[z].push(e);
                } else {
                    r_classes[z].push(e);
                }
            }
        }
        let make = |classes: Vec<Vec<Example>>| {
            let seen = classes.iter().map(|l| l.len() as u64).collect();
            TreeNode::Leaf(Leaf {
                reservoir: ExampleReservoir::from_parts(self.capacity, classes, seen),
                depth: depth + 1,
                splittability: 0.0,
                version: 0,
                queued: false,
            })
        };
        let li = self.nodes.len() as u32;
        self.nodes.push(make(l_classes));
        self.nodes.push(make(r_classes));
        self.nodes[node as usize] = TreeNode::Branch { decision, left: li, right: li + 1, depth };
        self.route[node as usize] = Route::of(&self.nodes[node as usize]);
        self.route.push(Route::of(&self.nodes[li as usize]));
        self.route.push(Route::of(&self.nodes[li as usize + 1]));
        self.refresh(li, settings, weights);
        self.refresh(li + 1, settings, weights);
        true
    }
}
