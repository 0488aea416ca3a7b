use super::frame::TangentFrame;
use crate::scene::{VoxelId, VoxelPos, VoxelScene};
use crate::Vec3;

/// Nearest occupied voxel within one grid unit of `p` (grid coordinates).
#[inline]
pub fn nearest_voxel(scene: &VoxelScene, p: Vec3) -> Option<VoxelId> {
    let c = VoxelPos::new(p.x.round() as i32, p.y.round() as i32, p.z.round() as i32);
    // the rounded cell is the closest lattice point to p
    if let Some(id) = scene.id_of(c) {
        return Some(id);
    }
    let mut best: Option<(f64, VoxelId)> = None;
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let q = c.offset(dx, dy, dz);
                let d2 = (q.to_vec3() - p).norm_squared();
                if d2 > 1.0 || best.is_some_and(|(b, _)| d2 >= b) {
                    continue;
                }
                if let Some(id) = scene.id_of(q) {
                    best = Some((d2, id));
                }
            }
        }
    }
    best.map(|(_, id)| id)
}

/// Voxel ids sampled on the frame's n×n lattice (row-major). Missing samples
/// fall back to `centre`.
pub fn sample_lattice(scene: &VoxelScene, frame: &TangentFrame, n: usize, spacing: f64, centre: VoxelId) -> Vec<VoxelId> {
    let mut out = Vec::with_capacity(n * n);
    for_each_lattice_voxel(scene, frame, n, spacing, centre, |id| out.push(id));
    out
}

#[inline]
fn for_each_lattice_voxel(
    scene: &VoxelScene,
    frame: &TangentFrame,
    n: usize,
    spacing: f64,
    centre: VoxelId,
    mut f: impl FnMut(VoxelId),
) {
    for row in 0..n {
        for col in 0..n {
            let p = frame.lattice_point(row, col, n, spacing);
            f(nearest_voxel(scene, p).unwrap_or(centre));
        }
    }
}

/// n×n RGB patch on the tangent-plane lattice around the frame origin.
pub fn extract_patch(scene: &VoxelScene, frame: &TangentFrame, n: usize, spacing: f64) -> Vec<[u8; 3]> {
    let centre = nearest_voxel(scene, frame.origin);
    let Some(centre) = centre else { return vec![[0; 3]; n * n] };
    sample_lattice(scene, frame, n, spacing, centre).into_iter().map(|id| scene.voxel(id).color).collect()
}

/// Same lattice as [`extract_patch`] in CIELab, using the scene's cached values.
pub fn extract_lab_patch(scene: &VoxelScene, frame: &TangentFrame, n: usize, spacing: f64, centre: VoxelId) -> Vec<[f32; 3]> {
    let mut out = Vec::with_capacity(n * n);
    for_each_lattice_voxel(scene, frame, n, spacing, centre, |id| out.push(scene.lab(id)));
    out
}
