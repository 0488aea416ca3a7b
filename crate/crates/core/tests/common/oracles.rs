//! Independent reference implementations. None of these call into the code
//! under test beyond plain data accessors.

use std::collections::VecDeque;

use paintbox_core::rendering::Ray;
use paintbox_core::scene::{VoxelId, VoxelScene};

/// Every voxel against the ray: box entry depth by the slab method, nearest
/// entry wins. Returns the two best entries so callers can spot near-ties.
pub fn brute_force_cast(scene: &VoxelScene, ray: &Ray, near: f64, far: f64) -> Option<((VoxelId, f64), Option<f64>)> {
    let s = scene.voxel_size() as f64;
    let mut best: Option<(VoxelId, f64)> = None;
    let mut second: Option<f64> = None;
    for (i, v) in scene.voxels().iter().enumerate() {
        let c = [v.position.x as f64 * s, v.position.y as f64 * s, v.position.z as f64 * s];
        let (mut t0, mut t1) = (near, far);
        let mut hit = true;
        for a in 0..3 {
            let (lo, hi) = (c[a] - s / 2.0, c[a] + s / 2.0);
            let (o, d) = (ray.origin[a], ray.dir[a]);
            if d == 0.0 {
                if o < lo || o > hi {
                    hit = false;
                    break;
                }
                continue;
            }
            let (mut ta, mut tb) = ((lo - o) / d, (hi - o) / d);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                hit = false;
                break;
            }
        }
        if !hit {
            continue;
        }
        match best {
            Some((_, bt)) if t0 >= bt => {
                if second.is_none_or(|st| t0 < st) {
                    second = Some(t0);
                }
            }
            _ => {
                if let Some((_, bt)) = best {
                    second = Some(bt);
                }
                best = Some((VoxelId(i as u32), t0));
            }
        }
    }
    best.map(|b| (b, second))
}

/// Breadth-first 8-connected labelling; components numbered by first pixel
/// in raster order. Returns (labels, areas).
pub fn flood_fill(width: usize, height: usize, mask: &[u8]) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; width * height];
    let mut areas = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if mask[start] == 0 || labels[start] != 0 {
            continue;
        }
        let k = areas.len() as u32 + 1;
        labels[start] = k;
        queue.push_back(start);
        let mut area = 0;
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (x, y) = ((i % width) as i64, (i / width) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                        continue;
                    }
                    let j = ny as usize * width + nx as usize;
                    if mask[j] != 0 && labels[j] == 0 {
                        labels[j] = k;
                        queue.push_back(j);
                    }
                }
            }
        }
        areas.push(area);
    }
    (labels, areas)
}

/// c = (d >= 0) and |d - r| > tau, one pixel at a time.
pub fn scalar_change_mask(d: &[f32], r: &[f32], tau: f32) -> Vec<u8> {
    let mut out = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let changed = if d[i] < 0.0 { false } else { (d[i] - r[i]).abs() > tau };
        out.push(changed as u8);
    }
    out
}

/// Shannon entropy in bits, summed per element: each of the n items
/// contributes -log2(p(label)) / n.
pub fn entropy_per_item(items: &[u8]) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let n = items.len() as f64;
    items
        .iter()
        .map(|&a| {
            let same = items.iter().filter(|&&b| b == a).count() as f64;
            -(same / n).log2() / n
        })
        .sum()
}

pub fn information_gain_oracle(parent: &[u8], left: &[u8], right: &[u8]) -> f64 {
    let n = parent.len() as f64;
    entropy_per_item(parent)
        - left.len() as f64 / n * entropy_per_item(left)
        - right.len() as f64 / n * entropy_per_item(right)
}

pub fn exclusive_prefix_sum_oracle(bits: &[u8]) -> Vec<u32> {
    let mut acc = 0u32;
    bits.iter()
        .map(|&b| {
            let v = acc;
            acc += b as u32;
            v
        })
        .collect()
}

/// All multisets of size `n` over `k` classes as sorted label lists.
pub fn multisets(n: usize, k: u8) -> Vec<Vec<u8>> {
    fn rec(n: usize, from: u8, k: u8, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for c in from..k {
            cur.push(c);
            rec(n, c, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 0, k, &mut Vec::new(), &mut out);
    out
}
