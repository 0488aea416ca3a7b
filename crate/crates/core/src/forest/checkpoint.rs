//! Versioned binary forest checkpoints.
//!
//! Layout (little-endian): magic `SPRF`, u32 version, settings, label count,
//! descriptor length, optional class weights, class totals, a table of unique
//! descriptors (shared between trees), then per tree the RNG state and the
//! node array. Leaves store per-class seen counts and descriptor-table indices.

use std::collections::BinaryHeap;
use std::sync::Arc;

use byteorder::{LittleEndian, WriteBytesExt};
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rustc_hash::FxHashMap;
use thiserror::Error;

use super::reservoir::ExampleReservoir;
use super::tree::{DecisionFunction, DecisionTree, Leaf, TreeNode};
use super::{Example, ForestSettings, RandomForest};
use crate::scene::Reader;

pub const FOREST_MAGIC: &[u8; 4] = b"SPRF";
pub const FOREST_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated at byte {0}")]
    Truncated(usize),
    #[error("corrupt checkpoint at byte {offset}: {what}")]
    Corrupt { offset: usize, what: &'static str },
}

const TAG_BRANCH: u8 = 0;
const TAG_LEAF: u8 = 1;

pub fn save_forest(forest: &RandomForest) -> Vec<u8> {
    let mut out = Vec::new();
    let s = &forest.settings;
    out.extend_from_slice(FOREST_MAGIC);
    let w = &mut out;
    w.write_u32::<LittleEndian>(FOREST_VERSION).unwrap();
    for v in [s.tree_count, s.candidate_count, s.min_examples_to_split, s.split_budget, s.max_depth, s.reservoir_capacity] {
        w.write_u64::<LittleEndian>(v as u64).unwrap();
    }
    w.write_u64::<LittleEndian>(s.seed).unwrap();
    w.write_u32::<LittleEndian>(forest.label_count as u32).unwrap();
    w.write_u32::<LittleEndian>(forest.descriptor_len.unwrap_or(0) as u32).unwrap();
    match &forest.class_weights {
        None => w.push(0),
        Some(ws) => {
            w.push(1);
            for x in ws {
                w.write_f64::<LittleEndian>(*x).unwrap();
            }
        }
    }
    for c in &forest.class_totals {
        w.write_u64::<LittleEndian>(*c).unwrap();
    }

    // Unique descriptors in first-encounter order.
    let mut table: Vec<&Arc<[f32]>> = Vec::new();
    let mut index: FxHashMap<*const f32, u64> = FxHashMap::default();
    for t in &forest.trees {
        for n in &t.nodes {
            if let TreeNode::Leaf(l) = n {
                for e in l.reservoir.iter() {
                    index.entry(e.descriptor.as_ptr()).or_insert_with(|| {
                        table.push(&e.descriptor);
                        table.len() as u64 - 1
                    });
                }
            }
        }
    }
    w.write_u64::<LittleEndian>(table.len() as u64).unwrap();
    for d in &table {
        for x in d.iter() {
            w.write_f32::<LittleEndian>(*x).unwrap();
        }
    }

    for t in &forest.trees {
        w.extend_from_slice(&t.rng.get_seed());
        w.write_u64::<LittleEndian>(t.rng.get_stream()).unwrap();
        w.extend_from_slice(&t.rng.get_word_pos().to_le_bytes());
        w.write_u32::<LittleEndian>(t.nodes.len() as u32).unwrap();
        for n in &t.nodes {
            match n {
                TreeNode::Branch { decision, left, right, depth } => {
                    w.push(TAG_BRANCH);
                    w.write_u32::<LittleEndian>(decision.feature).unwrap();
                    w.write_f32::<LittleEndian>(decision.threshold).unwrap();
                    w.write_u32::<LittleEndian>(*left).unwrap();
                    w.write_u32::<LittleEndian>(*right).unwrap();
                    w.write_u32::<LittleEndian>(*depth).unwrap();
                }
                TreeNode::Leaf(l) => {
                    w.push(TAG_LEAF);
                    w.write_u32::<LittleEndian>(l.depth).unwrap();
                    w.write_f64::<LittleEndian>(l.splittability).unwrap();
                    w.write_u32::<LittleEndian>(l.version).unwrap();
                    w.push(l.queued as u8);
                    for z in 0..forest.label_count {
                        let stored = l.reservoir.class_stored(z);
                        w.write_u64::<LittleEndian>(l.reservoir.seen(z)).unwrap();
                        w.write_u32::<LittleEndian>(stored.len() as u32).unwrap();
                        for e in stored {
                            w.write_u64::<LittleEndian>(index[&e.descriptor.as_ptr()]).unwrap();
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn load_forest(bytes: &[u8]) -> Result<RandomForest, CheckpointError> {
    let mut r = Reader::new(bytes);
    let trunc = |r: &Reader| CheckpointError::Truncated(r.offset());
    let corrupt = |r: &Reader, what| CheckpointError::Corrupt { offset: r.offset(), what };

    if r.take(4).ok_or_else(|| trunc(&r))? != FOREST_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32().ok_or_else(|| trunc(&r))?;
    if version != FOREST_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let mut nums = [0usize; 6];
    for n in &mut nums {
        *n = r.u64().ok_or_else(|| trunc(&r))? as usize;
    }
    let settings = ForestSettings {
        tree_count: nums[0],
        candidate_count: nums[1],
        min_examples_to_split: nums[2],
        split_budget: nums[3],
        max_depth: nums[4],
        reservoir_capacity: nums[5],
        seed: r.u64().ok_or_else(|| trunc(&r))?,
    };
    let label_count = r.u32().ok_or_else(|| trunc(&r))? as usize;
    if label_count == 0 || label_count > 256 {
        return Err(corrupt(&r, "label count"));
    }
    let dim = r.u32().ok_or_else(|| trunc(&r))? as usize;
    let class_weights = match r.u8().ok_or_else(|| trunc(&r))? {
        0 => None,
        1 => Some((0..label_count).map(|_| r.f64().ok_or_else(|| trunc(&r))).collect::<Result<Vec<_>, _>>()?),
        _ => return Err(corrupt(&r, "weight flag")),
    };
    let class_totals =
        (0..label_count).map(|_| r.u64().ok_or_else(|| trunc(&r))).collect::<Result<Vec<_>, _>>()?;

    let n_desc = r.u64().ok_or_else(|| trunc(&r))? as usize;
    if dim == 0 && n_desc > 0 {
        return Err(corrupt(&r, "descriptors without a descriptor length"));
    }
    if n_desc.saturating_mul(dim * 4) > r.remaining() {
        return Err(trunc(&r));
    }
    let mut table: Vec<Arc<[f32]>> = Vec::with_capacity(n_desc);
    for _ in 0..n_desc {
        let d: Vec<f32> = (0..dim).map(|_| r.f32().ok_or_else(|| trunc(&r))).collect::<Result<_, _>>()?;
        table.push(Arc::from(d));
    }

    if settings.tree_count == 0 || settings.reservoir_capacity == 0 {
        return Err(corrupt(&r, "settings"));
    }
    let mut trees = Vec::with_capacity(settings.tree_count.min(1024));
    for _ in 0..settings.tree_count {
        let seed: [u8; 32] = r.take(32).ok_or_else(|| trunc(&r))?.try_into().unwrap();
        let stream = r.u64().ok_or_else(|| trunc(&r))?;
        let word_pos = r.u128().ok_or_else(|| trunc(&r))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        let node_count = r.u32().ok_or_else(|| trunc(&r))? as usize;
        if node_count == 0 {
            return Err(corrupt(&r, "empty tree"));
        }
        let mut nodes = Vec::with_capacity(node_count.min(r.remaining()));
        for idx in 0..node_count {
            match r.u8().ok_or_else(|| trunc(&r))? {
                TAG_BRANCH => {
                    let feature = r.u32().ok_or_else(|| trunc(&r))?;
                    let threshold = r.f32().ok_or_else(|| trunc(&r))?;
                    let left = r.u32().ok_or_else(|| trunc(&r))?;
                    let right = r.u32().ok_or_else(|| trunc(&r))?;
                    let depth = r.u32().ok_or_else(|| trunc(&r))?;
                    if feature as usize >= dim {
                        return Err(corrupt(&r, "feature index"));
                    }
                    // children are always appended after their parent, so this also rules out cycles
                    if left as usize >= node_count || right as usize >= node_count || left as usize <= idx || right as usize <= idx {
                        return Err(corrupt(&r, "child index"));
                    }
                    nodes.push(TreeNode::Branch { decision: DecisionFunction { feature, threshold }, left, right, depth });
                }
                TAG_LEAF => {
                    let depth = r.u32().ok_or_else(|| trunc(&r))?;
                    let splittability = r.f64().ok_or_else(|| trunc(&r))?;
                    let version = r.u32().ok_or_else(|| trunc(&r))?;
                    let queued = r.u8().ok_or_else(|| trunc(&r))? != 0;
                    let mut stored = Vec::with_capacity(label_count);
                    let mut seen = Vec::with_capacity(label_count);
                    for z in 0..label_count {
                        seen.push(r.u64().ok_or_else(|| trunc(&r))?);
                        let count = r.u32().ok_or_else(|| trunc(&r))? as usize;
                        if count > settings.reservoir_capacity {
                            return Err(corrupt(&r, "reservoir over capacity"));
                        }
                        let mut list = Vec::with_capacity(count.min(r.remaining() / 8));
                        for _ in 0..count {
                            let i = r.u64().ok_or_else(|| trunc(&r))? as usize;
                            let d = table.get(i).ok_or_else(|| corrupt(&r, "descriptor index"))?;
                            list.push(Example::new(d.clone(), z as u8));
                        }
                        stored.push(list);
                    }
                    let reservoir = ExampleReservoir::from_parts(settings.reservoir_capacity, stored, seen);
                    nodes.push(TreeNode::Leaf(Leaf { reservoir, depth, splittability, version, queued }));
                }
                _ => return Err(corrupt(&r, "node tag")),
            }
        }
        let mut tree = DecisionTree {
            nodes,
            rng,
            queue: BinaryHeap::new(),
            route: Vec::new(),
            label_count,
            capacity: settings.reservoir_capacity,
        };
        tree.rebuild_queue();
        tree.rebuild_route();
        trees.push(tree);
    }
    if r.remaining() != 0 {
        return Err(corrupt(&r, "trailing bytes"));
    }
    Ok(RandomForest::from_parts(
        settings,
        label_count,
        (dim > 0).then_some(dim),
        trees,
        class_weights,
        class_totals,
    ))
}
