//! Voxel selection from a raycast: class-balanced training samples via
//! per-label masks and prefix-sum compaction (Fig. 14), and uniform
//! with-replacement prediction samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::label::{LabelGroup, LabelId, UNLABELLED_ID};
use crate::par;
use crate::rendering::RaycastResult;
use crate::scene::{VoxelId, VoxelPos, VoxelScene};

const SCAN_CHUNK: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSettings {
    /// q: training voxels per label per frame.
    pub training_quota: usize,
    /// Voxels predicted per frame.
    pub prediction_count: usize,
    /// Feed FOREST-group voxels back into training. Off by default.
    pub train_on_forest_labels: bool,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        SamplingSettings { training_quota: 128, prediction_count: 8192, train_on_forest_labels: false }
    }
}

/// Sequential reference scan: `out[i] = Σ_{j<i} bits[j]`.
pub fn exclusive_prefix_sum_sequential(bits: &[u8]) -> Vec<u32> {
    let mut acc = 0u32;
    bits.iter()
        .map(|&b| {
            let o = acc;
            acc += b as u32;
            o
        })
        .collect()
}

/// Blocked scan: per-chunk totals, a scan over the totals, then independent
/// per-chunk scans. Runs on the rayon pool when the `parallel` feature is on.
pub fn exclusive_prefix_sum(bits: &[u8]) -> Vec<u32> {
    let n_chunks = bits.len().div_ceil(SCAN_CHUNK);
    let totals = par::map_range(n_chunks, |c| {
        let end = ((c + 1) * SCAN_CHUNK).min(bits.len());
        bits[c * SCAN_CHUNK..end].iter().map(|&b| b as u32).sum::<u32>()
    });
    let bases = exclusive_scan_u32(&totals);
    let mut out = vec![0u32; bits.len()];
    par::for_each_chunk_mut(&mut out, SCAN_CHUNK, |c, chunk| {
        let mut acc = bases[c];
        let src = &bits[c * SCAN_CHUNK..c * SCAN_CHUNK + chunk.len()];
        for (o, &b) in chunk.iter_mut().zip(src) {
            *o = acc;
            acc += b as u32;
        }
    });
    out
}

fn exclusive_scan_u32(v: &[u32]) -> Vec<u32> {
    let mut acc = 0;
    v.iter()
        .map(|&x| {
            let o = acc;
            acc += x;
            o
        })
        .collect()
}

/// Per-label bit images over the raycast pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelMaskSet {
    pub labels: Vec<LabelId>,
    pub masks: Vec<Vec<u8>>,
}

impl VoxelMaskSet {
    /// Bit (label ℓ, pixel i) is set iff pixel i hit a voxel carrying ℓ in an
    /// eligible group.
    pub fn build(raycast: &RaycastResult, scene: &VoxelScene, labels: &[LabelId], include_forest: bool) -> Self {
        let mut masks = vec![vec![0u8; raycast.len()]; labels.len()];
        for (k, mask) in masks.iter_mut().enumerate() {
            let want = labels[k];
            par::for_each_chunk_mut(mask, SCAN_CHUNK, |c, chunk| {
                for (j, bit) in chunk.iter_mut().enumerate() {
                    let Some(id) = raycast.voxel_at_index(c * SCAN_CHUNK + j) else { continue };
                    let l = scene.label(id);
                    let eligible = include_forest || l.group() != LabelGroup::Forest;
                    *bit = (eligible && l.id() == want) as u8;
                }
            });
        }
        VoxelMaskSet { labels: labels.to_vec(), masks }
    }
}

/// Per-label compacted candidate voxels (one entry per masked pixel).
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateArrays {
    pub labels: Vec<LabelId>,
    pub candidates: Vec<Vec<VoxelId>>,
}

impl CandidateArrays {
    pub fn compact(masks: &VoxelMaskSet, raycast: &RaycastResult) -> Self {
        let candidates = masks.masks.iter().map(|m| compact_mask(m, raycast)).collect();
        CandidateArrays { labels: masks.labels.clone(), candidates }
    }

    pub fn count(&self, k: usize) -> usize {
        self.candidates[k].len()
    }
}

/// Scatters the hit voxel of every set pixel to its prefix-sum slot.
fn compact_mask(mask: &[u8], raycast: &RaycastResult) -> Vec<VoxelId> {
    if mask.is_empty() {
        return Vec::new();
    }
    let offsets = exclusive_prefix_sum(mask);
    let total = (offsets[mask.len() - 1] + mask[mask.len() - 1] as u32) as usize;
    let mut out = vec![VoxelId(0); total];
    // each scan chunk owns the contiguous output range [offsets[start], offsets[end])
    let mut pieces = Vec::new();
    let mut rest: &mut [VoxelId] = &mut out;
    let mut start = 0;
    while start < mask.len() {
        let end = (start + SCAN_CHUNK).min(mask.len());
        let hi = if end == mask.len() { total } else { offsets[end] as usize };
        let (head, tail) = rest.split_at_mut(hi - offsets[start] as usize);
        pieces.push((start, end, head));
        rest = tail;
        start = end;
    }
    par::for_each_mut(&mut pieces, |(s, e, dst)| {
        let base = offsets[*s] as usize;
        for i in *s..*e {
            if mask[i] != 0 {
                dst[offsets[i] as usize - base] = raycast.voxel_at_index(i).expect("masked pixel has a voxel");
            }
        }
    });
    out
}

/// Draws `min(k, items.len())` elements uniformly without replacement
/// (partial Fisher–Yates).
pub fn sample_without_replacement<T: Copy, R: Rng>(items: &[T], k: usize, rng: &mut R) -> Vec<T> {
    let mut v = items.to_vec();
    let k = k.min(v.len());
    for i in 0..k {
        let j = rng.random_range(i..v.len());
        v.swap(i, j);
    }
    v.truncate(k);
    v
}

/// Class-balanced training voxels: up to `quota` per label in use. Unlabelled
/// voxels are never returned, nor FOREST-group voxels unless `include_forest`.
pub fn sample_for_training<R: Rng>(
    raycast: &RaycastResult,
    scene: &VoxelScene,
    labels_in_use: &[LabelId],
    quota: usize,
    include_forest: bool,
    rng: &mut R,
) -> Vec<(LabelId, Vec<VoxelPos>)> {
    let labels: Vec<LabelId> = labels_in_use.iter().copied().filter(|&l| l != UNLABELLED_ID).collect();
    let masks = VoxelMaskSet::build(raycast, scene, &labels, include_forest);
    let cands = CandidateArrays::compact(&masks, raycast);
    labels
        .iter()
        .zip(&cands.candidates)
        .map(|(&l, c)| {
            let picked = sample_without_replacement(c, quota, rng);
            (l, picked.into_iter().map(|id| scene.voxel(id).position).collect())
        })
        .collect()
}

/// `count` voxels drawn uniformly with replacement over non-empty pixels.
pub fn sample_for_prediction<R: Rng>(raycast: &RaycastResult, scene: &VoxelScene, count: usize, rng: &mut R) -> Vec<VoxelPos> {
    let hits = raycast.hit_pixels();
    if hits.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let i = hits[rng.random_range(0..hits.len())] as usize;
            scene.voxel(raycast.voxel_at_index(i).unwrap()).position
        })
        .collect()
}
