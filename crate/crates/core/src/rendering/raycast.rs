//! Software voxel raycaster (3D DDA with brick skipping).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::camera::CameraPose;
use crate::par;
use crate::scene::{DenseGrid, VoxelId, VoxelPos, VoxelScene};
use crate::Vec3;

pub const DEFAULT_NEAR: f64 = 0.1;
pub const DEFAULT_FAR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid intrinsics: {0}")]
pub struct IntrinsicsError(&'static str);

impl Default for Intrinsics {
    /// 640x480 structured-light style defaults.
    fn default() -> Self {
        Intrinsics::new(525.0, 525.0, 320.0, 240.0, 640, 480).unwrap()
    }
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, IntrinsicsError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(IntrinsicsError("focal lengths must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(IntrinsicsError("image must be non-empty"));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(IntrinsicsError("principal point outside the image"));
        }
        Ok(Intrinsics { fx, fy, cx, cy, width, height })
    }

    /// Default focal length with the principal point at the image centre.
    pub fn for_size(width: usize, height: usize) -> Self {
        let scale = width as f64 / 640.0;
        Intrinsics::new(525.0 * scale, 525.0 * scale, width as f64 / 2.0, height as f64 / 2.0, width, height).unwrap()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Projects a camera-space point (x right, y up, z forward) to pixel
    /// coordinates.
    pub fn project(&self, cam: Vec3) -> Option<(f64, f64)> {
        (cam.z > 0.0).then(|| (self.cx + self.fx * cam.x / cam.z, self.cy - self.fy * cam.y / cam.z))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Projection {
    Perspective,
    /// Parallel rays along the look axis, `pixel_size` metres apart.
    Orthographic { pixel_size: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaycastOptions {
    pub near: f64,
    pub far: f64,
    pub projection: Projection,
}

impl Default for RaycastOptions {
    fn default() -> Self {
        RaycastOptions { near: DEFAULT_NEAR, far: DEFAULT_FAR, projection: Projection::Perspective }
    }
}

/// A ray `origin + t * dir` in world space, where `t` is the depth along the
/// camera's look axis.
#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    pub fn for_pixel(pose: &CameraPose, intr: &Intrinsics, projection: Projection, x: f64, y: f64) -> Ray {
        match projection {
            Projection::Perspective => Ray {
                origin: pose.position,
                dir: pose.n + pose.v * ((x - intr.cx) / intr.fx) - pose.u * ((y - intr.cy) / intr.fy),
            },
            Projection::Orthographic { pixel_size } => Ray {
                origin: pose.position + pose.v * ((x - intr.cx) * pixel_size) - pose.u * ((y - intr.cy) * pixel_size),
                dir: pose.n,
            },
        }
    }
}

const NO_HIT: u32 = u32::MAX;

/// Per-pixel first-hit voxels plus the depth image derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct RaycastResult {
    width: usize,
    height: usize,
    hits: Vec<u32>,
    depth: Vec<f32>,
}

impl RaycastResult {
    pub fn empty(width: usize, height: usize) -> Self {
        RaycastResult { width, height, hits: vec![NO_HIT; width * height], depth: vec![f32::INFINITY; width * height] }
    }

    /// Builds a result from explicit per-pixel hits (used by tests and tools).
    pub fn from_hits(width: usize, height: usize, hits: Vec<Option<(VoxelId, f32)>>) -> Self {
        assert_eq!(hits.len(), width * height);
        let mut r = RaycastResult::empty(width, height);
        for (i, h) in hits.into_iter().enumerate() {
            if let Some((id, d)) = h {
                r.hits[i] = id.0;
                r.depth[i] = d;
            }
        }
        r
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    #[inline]
    pub fn voxel_at_index(&self, i: usize) -> Option<VoxelId> {
        let h = self.hits[i];
        (h != NO_HIT).then_some(VoxelId(h))
    }

    #[inline]
    pub fn voxel(&self, x: usize, y: usize) -> Option<VoxelId> {
        if x >= self.width || y >= self.height {
            return None;
        }
        self.voxel_at_index(y * self.width + x)
    }

    pub fn position(&self, scene: &VoxelScene, x: usize, y: usize) -> Option<VoxelPos> {
        self.voxel(x, y).map(|id| scene.voxel(id).position)
    }

    /// Depth in metres along the look axis; infinite where nothing was hit.
    pub fn depth(&self) -> &[f32] {
        &self.depth
    }

    pub fn hit_count(&self) -> usize {
        self.hits.iter().filter(|&&h| h != NO_HIT).count()
    }

    /// Indices of pixels that hit a voxel.
    pub fn hit_pixels(&self) -> Vec<u32> {
        self.hits.iter().enumerate().filter(|(_, &h)| h != NO_HIT).map(|(i, _)| i as u32).collect()
    }

    pub fn color_image(&self, scene: &VoxelScene) -> Vec<[u8; 3]> {
        self.hits.iter().map(|&h| if h == NO_HIT { [0, 0, 0] } else { scene.voxel(VoxelId(h)).color }).collect()
    }

    /// Label display colours (unlabelled and empty pixels are black).
    pub fn semantic_image(&self, scene: &VoxelScene) -> Vec<[u8; 3]> {
        let colors = scene.label_colors();
        self.hits
            .iter()
            .map(|&h| if h == NO_HIT { [0, 0, 0] } else { colors[scene.label(VoxelId(h)).id() as usize] })
            .collect()
    }
}

/// Raycasts every pixel of the image. Empty scenes give an all-empty result.
pub fn raycast(scene: &VoxelScene, pose: &CameraPose, intr: &Intrinsics, opts: &RaycastOptions) -> RaycastResult {
    let (w, h) = (intr.width, intr.height);
    let mut result = RaycastResult::empty(w, h);
    if scene.is_empty() {
        return result;
    }
    let caster = Caster::new(scene);
    let RaycastResult { hits, depth, .. } = &mut result;
    par::for_each_chunk_pair_mut(hits, depth, w, |y, hrow, drow| {
        for x in 0..w {
            let ray = Ray::for_pixel(pose, intr, opts.projection, x as f64, y as f64);
            if let Some((id, t)) = caster.cast(&ray, opts.near, opts.far) {
                hrow[x] = id.0;
                drow[x] = t as f32;
            }
        }
    });
    result
}

/// Casts a single ray; returns the first voxel hit and its entry depth.
pub fn cast_ray(scene: &VoxelScene, ray: &Ray, near: f64, far: f64) -> Option<(VoxelId, f64)> {
    if scene.is_empty() {
        return None;
    }
    Caster::new(scene).cast(ray, near, far)
}

struct Caster<'a> {
    scene: &'a VoxelScene,
    grid: Option<&'a DenseGrid>,
    lo: Vec3,
    hi: Vec3,
    inv_size: f64,
}

impl<'a> Caster<'a> {
    fn new(scene: &'a VoxelScene) -> Self {
        let grid = scene.grid();
        let (lo, hi) = match grid {
            Some(g) => (g.min(), g.max()),
            None => scene.bounds().expect("non-empty scene"),
        };
        Caster {
            scene,
            grid,
            lo: lo.to_vec3() - Vec3::repeat(0.5),
            hi: hi.to_vec3() + Vec3::repeat(0.5),
            inv_size: 1.0 / scene.voxel_size() as f64,
        }
    }

    #[inline]
    fn lookup(&self, p: VoxelPos) -> Option<VoxelId> {
        match self.grid {
            Some(g) => g.get(p),
            None => self.scene.id_of(p),
        }
    }

    fn cast(&self, ray: &Ray, near: f64, far: f64) -> Option<(VoxelId, f64)> {
        // Work in grid units; voxel k occupies [k - 0.5, k + 0.5] on each axis.
        let o = ray.origin * self.inv_size;
        let d = ray.dir * self.inv_size;
        let (t0, t1) = slab(o, d, self.lo, self.hi, near, far)?;

        let step = [sign(d.x), sign(d.y), sign(d.z)];
        let inv = [1.0 / d.x, 1.0 / d.y, 1.0 / d.z];
        let start = o + d * t0;
        let mut cell = [0i32; 3];
        for a in 0..3 {
            let lo = self.lo[a] + 0.5;
            let hi = self.hi[a] - 0.5;
            cell[a] = ((start[a] + 0.5).floor()).clamp(lo, hi) as i32;
        }
        let mut t = t0;
        let mut t_max = [0.0f64; 3];
        let mut t_delta = [0.0f64; 3];
        let reset = |cell: &[i32; 3], t_max: &mut [f64; 3], t_delta: &mut [f64; 3]| {
            for a in 0..3 {
                if step[a] == 0 {
                    t_max[a] = f64::INFINITY;
                    t_delta[a] = f64::INFINITY;
                } else {
                    let boundary = cell[a] as f64 + 0.5 * step[a] as f64;
                    t_max[a] = (boundary - o[a]) * inv[a];
                    t_delta[a] = inv[a].abs();
                }
            }
        };
        reset(&cell, &mut t_max, &mut t_delta);

        loop {
            let pos = VoxelPos::new(cell[0], cell[1], cell[2]);
            if let Some(g) = self.grid {
                if let Some((b, size)) = g.empty_block(pos) {
                    // Jump to where the ray leaves the empty block.
                    let blo = b.to_vec3() - Vec3::repeat(0.5);
                    let bhi = blo + Vec3::repeat(size as f64);
                    let mut exit = f64::INFINITY;
                    let mut exit_axis = 0;
                    for a in 0..3 {
                        if step[a] != 0 {
                            let bound = if step[a] > 0 { bhi[a] } else { blo[a] };
                            let te = (bound - o[a]) * inv[a];
                            if te < exit {
                                exit = te;
                                exit_axis = a;
                            }
                        }
                    }
                    if exit > t1 {
                        return None;
                    }
                    t = exit.max(t);
                    let p = o + d * t;
                    for a in 0..3 {
                        cell[a] = (p[a] + 0.5).floor() as i32;
                    }
                    cell[exit_axis] = if step[exit_axis] > 0 {
                        (bhi[exit_axis] + 0.5) as i32
                    } else {
                        (blo[exit_axis] - 0.5).floor() as i32
                    };
                    if (0..3).any(|a| (cell[a] as f64) < self.lo[a] || (cell[a] as f64) > self.hi[a]) {
                        return None;
                    }
                    reset(&cell, &mut t_max, &mut t_delta);
                    continue;
                }
            }
            if let Some(id) = self.lookup(pos) {
                return Some((id, t));
            }
            let a = if t_max[0] < t_max[1] {
                if t_max[0] < t_max[2] { 0 } else { 2 }
            } else if t_max[1] < t_max[2] {
                1
            } else {
                2
            };
            t = t_max[a];
            if t > t1 {
                return None;
            }
            cell[a] += step[a];
            t_max[a] += t_delta[a];
            if (cell[a] as f64) < self.lo[a] || (cell[a] as f64) > self.hi[a] {
                return None;
            }
        }
    }
}

#[inline]
fn sign(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Clips the ray parameter range `[near, far]` to an axis-aligned box.
pub(crate) fn slab(o: Vec3, d: Vec3, lo: Vec3, hi: Vec3, near: f64, far: f64) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (near, far);
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return None;
            }
        } else {
            let inv = 1.0 / d[a];
            let (mut ta, mut tb) = ((lo[a] - o[a]) * inv, (hi[a] - o[a]) * inv);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
    }
    Some((t0, t1))
}
