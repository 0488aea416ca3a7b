//! Generated scenes: a textured desk for touch sequences and a room (floor,
//! table, box) with per-voxel ground truth for end-to-end labelling.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::label::LabelId;
use crate::rendering::CameraPose;
use crate::scene::{Rgb, Voxel, VoxelPos, VoxelScene};
use crate::Vec3;

/// Deterministic per-position hash in [0, 1).
fn hash01(p: VoxelPos, salt: u32) -> f64 {
    let mut h = (p.x as u32).wrapping_mul(0x9E37_79B1)
        ^ (p.y as u32).wrapping_mul(0x85EB_CA77)
        ^ (p.z as u32).wrapping_mul(0xC2B2_AE3D)
        ^ salt.wrapping_mul(0x27D4_EB2F);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    h = h.wrapping_mul(0x297A_2D39);
    h ^= h >> 15;
    (h >> 8) as f64 / (1u32 << 24) as f64
}

fn jitter(base: Rgb, amount: f64, p: VoxelPos, salt: u32) -> Rgb {
    let d = (hash01(p, salt) - 0.5) * 2.0 * amount;
    base.map(|c| (c as f64 + d).clamp(0.0, 255.0) as u8)
}

fn unit(n: [f64; 3]) -> [f32; 3] {
    let v = Vec3::from(n).normalize();
    [v.x as f32, v.y as f32, v.z as f32]
}

/// Shell of an axis-aligned box: the voxels on its faces with outward normals
/// (averaged on edges and corners).
fn box_shell(lo: VoxelPos, hi: VoxelPos, skip_bottom: bool) -> Vec<(VoxelPos, [f32; 3])> {
    let mut out = Vec::new();
    for z in lo.z..=hi.z {
        for y in lo.y..=hi.y {
            for x in lo.x..=hi.x {
                let mut n = [0.0; 3];
                if x == lo.x {
                    n[0] -= 1.0;
                }
                if x == hi.x {
                    n[0] += 1.0;
                }
                if y == lo.y {
                    n[1] -= 1.0;
                }
                if y == hi.y {
                    n[1] += 1.0;
                }
                if z == lo.z && !skip_bottom {
                    n[2] -= 1.0;
                }
                if z == hi.z {
                    n[2] += 1.0;
                }
                let on_face = x == lo.x || x == hi.x || y == lo.y || y == hi.y || z == hi.z || (z == lo.z && !skip_bottom);
                if !on_face {
                    continue;
                }
                if n == [0.0; 3] {
                    // bottom face voxels of a box resting on something
                    n = [0.0, 0.0, -1.0];
                }
                out.push((VoxelPos::new(x, y, z), unit(n)));
            }
        }
    }
    out
}

/// Flat textured plane at z = 0, centred on the origin.
pub fn desk(voxel_size: f32, width_m: f64, depth_m: f64) -> VoxelScene {
    let mut s = VoxelScene::new(voxel_size).expect("positive voxel size");
    let (hx, hy) = ((width_m / voxel_size as f64 / 2.0) as i32, (depth_m / voxel_size as f64 / 2.0) as i32);
    for y in -hy..=hy {
        for x in -hx..=hx {
            let p = VoxelPos::new(x, y, 0);
            let grain = if (x / 7 + y / 11) % 2 == 0 { [170, 130, 90] } else { [160, 122, 84] };
            s.insert(Voxel::new(p, jitter(grain, 12.0, p, 1), [0.0, 0.0, 1.0])).expect("unique positions");
        }
    }
    s
}

/// Camera looking straight down at the origin from `height` metres.
pub fn top_down_pose(height: f64) -> CameraPose {
    CameraPose::new(Vec3::new(0.0, 0.0, height), -Vec3::z(), Vec3::y()).expect("orthonormal")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub voxel_size: f32,
    /// Floor edge length, metres.
    pub extent: f64,
    pub walls: bool,
}

impl Default for RoomSpec {
    fn default() -> Self {
        RoomSpec { voxel_size: 0.02, extent: 2.4, walls: false }
    }
}

pub const ROOM_CLASSES: [(&str, Rgb); 4] =
    [("floor", [230, 200, 60]), ("table", [200, 40, 200]), ("box", [40, 220, 220]), ("wall", [120, 120, 255])];

/// A generated scene with its true per-voxel classes.
#[derive(Clone, Debug)]
pub struct GeneratedScene {
    pub scene: VoxelScene,
    pub truth: FxHashMap<VoxelPos, LabelId>,
    /// Label ids of `ROOM_CLASSES` in order (wall only if present).
    pub classes: Vec<LabelId>,
}

/// Floor, a four-legged table and a box, optionally with two walls.
pub fn room(spec: RoomSpec) -> GeneratedScene {
    let vs = spec.voxel_size as f64;
    let g = |m: f64| (m / vs).round() as i32;
    let mut scene = VoxelScene::new(spec.voxel_size).expect("positive voxel size");
    let n_classes = if spec.walls { 4 } else { 3 };
    let classes: Vec<LabelId> = ROOM_CLASSES[..n_classes]
        .iter()
        .map(|(name, color)| scene.add_label_auto(name, *color).expect("few labels"))
        .collect();
    let mut truth = FxHashMap::default();
    let mut put = |scene: &mut VoxelScene, p: VoxelPos, c: Rgb, n: [f32; 3], class: LabelId| {
        if scene.contains(p) {
            return;
        }
        scene.insert(Voxel::new(p, c, n)).expect("valid voxel");
        truth.insert(p, class);
    };

    let half = g(spec.extent / 2.0);
    // table and box first so that the floor never claims their positions
    let (tw, td, th) = (g(0.6), g(0.4), g(0.72));
    let (tx, ty) = (-g(0.3), -g(0.1));
    for (p, n) in box_shell(VoxelPos::new(tx - tw, ty - td, th - 1), VoxelPos::new(tx + tw, ty + td, th), false) {
        let c = if (p.x - tx).rem_euclid(6) < 3 { [120, 72, 36] } else { [104, 60, 28] };
        put(&mut scene, p, jitter(c, 8.0, p, 2), n, classes[1]);
    }
    let leg = g(0.03).max(1);
    for (lx, ly) in [(tx - tw + leg, ty - td + leg), (tx + tw - leg, ty - td + leg), (tx - tw + leg, ty + td - leg), (tx + tw - leg, ty + td - leg)] {
        for (p, n) in box_shell(VoxelPos::new(lx - leg, ly - leg, 1), VoxelPos::new(lx + leg, ly + leg, th - 2), true) {
            put(&mut scene, p, jitter([90, 54, 26], 8.0, p, 3), n, classes[1]);
        }
    }
    let (bx, by, bs) = (g(0.55), g(0.45), g(0.2));
    for (p, n) in box_shell(VoxelPos::new(bx - bs, by - bs, 1), VoxelPos::new(bx + bs, by + bs, 2 * bs), true) {
        let c = if (p.x + p.y + p.z).rem_euclid(8) < 4 { [40, 80, 190] } else { [52, 96, 210] };
        put(&mut scene, p, jitter(c, 10.0, p, 4), n, classes[2]);
    }
    for y in -half..=half {
        for x in -half..=half {
            let p = VoxelPos::new(x, y, 0);
            let c = if (x.div_euclid(5) + y.div_euclid(5)) % 2 == 0 { [196, 190, 176] } else { [180, 174, 160] };
            put(&mut scene, p, jitter(c, 10.0, p, 5), [0.0, 0.0, 1.0], classes[0]);
        }
    }
    if spec.walls {
        let wh = g(1.2);
        for z in 1..=wh {
            for t in -half..=half {
                let p = VoxelPos::new(t, half + 1, z);
                put(&mut scene, p, jitter([150, 160, 150], 10.0, p, 6), [0.0, -1.0, 0.0], classes[3]);
                let p = VoxelPos::new(-half - 1, t, z);
                put(&mut scene, p, jitter([150, 160, 150], 10.0, p, 7), [1.0, 0.0, 0.0], classes[3]);
            }
        }
    }
    GeneratedScene { scene, truth, classes }
}

/// Cameras on a circle around the room, looking at its centre.
pub fn orbit_poses(spec: &RoomSpec, count: usize, height: f64) -> Vec<CameraPose> {
    let r = spec.extent * 0.75;
    (0..count)
        .map(|i| {
            let a = i as f64 / count as f64 * std::f64::consts::TAU + 0.3;
            let pos = Vec3::new(r * a.cos(), r * a.sin(), height);
            CameraPose::look_at(pos, Vec3::new(0.0, 0.0, 0.3), Vec3::z()).expect("non-degenerate view")
        })
        .collect()
}

/// Uniformly random voxels in a cube (test and benchmark scenes).
pub fn random_scene(seed: u64, count: usize, half_extent: i32, voxel_size: f32) -> VoxelScene {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = VoxelScene::new(voxel_size).expect("positive voxel size");
    let side = (2 * half_extent + 1) as usize;
    let count = count.min(side * side * side);
    while s.len() < count {
        let p = VoxelPos::new(
            rng.random_range(-half_extent..=half_extent),
            rng.random_range(-half_extent..=half_extent),
            rng.random_range(-half_extent..=half_extent),
        );
        if s.contains(p) {
            continue;
        }
        let color = [rng.random(), rng.random(), rng.random()];
        let n = loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if v.norm() > 0.1 {
                break v.normalize();
            }
        };
        s.insert(Voxel::new(p, color, [n.x as f32, n.y as f32, n.z as f32])).expect("unique");
    }
    s
}
