use crate::rendering::RaycastResult;
use crate::scene::{VoxelPos, VoxelScene};

/// The voxel already hit at pixel (x, y) in this frame's raycast.
pub fn pick(raycast: &RaycastResult, scene: &VoxelScene, x: usize, y: usize) -> Option<VoxelPos> {
    raycast.position(scene, x, y)
}

/// Pick followed by `voxel_to_cube`; empty if the pixel hit nothing.
pub fn pick_radius(raycast: &RaycastResult, scene: &VoxelScene, x: usize, y: usize, radius: u32) -> Vec<VoxelPos> {
    pick(raycast, scene, x, y).map_or_else(Vec::new, |p| voxel_to_cube(&[p], radius))
}

/// Expands each voxel into the (2r+1)³ cube centred on it. Duplicates are
/// kept; positions outside the scene are dropped later by the marker.
pub fn voxel_to_cube(selection: &[VoxelPos], radius: u32) -> Vec<VoxelPos> {
    let r = radius as i32;
    let side = (2 * radius as usize + 1).pow(3);
    let mut out = Vec::with_capacity(selection.len() * side);
    for p in selection {
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    out.push(p.offset(dx, dy, dz));
                }
            }
        }
    }
    out
}

/// Touch adapter: touch-point pixels become a selection via raycast lookup.
pub fn touch_selection(raycast: &RaycastResult, scene: &VoxelScene, points: &[(usize, usize)]) -> Vec<VoxelPos> {
    points.iter().filter_map(|&(x, y)| pick(raycast, scene, x, y)).collect()
}
