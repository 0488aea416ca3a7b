//! Label propagation over smooth surfaces, one ring per frame (§3.4).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::lab_distance;
use crate::label::{LabelGroup, LabelId, PackedLabel};
use crate::par;
use crate::rendering::RaycastResult;
use crate::scene::{mark_voxel, MarkMode, VoxelId, VoxelScene};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationSettings {
    /// Ring radius r in pixels.
    pub radius: usize,
    /// δp, metres.
    pub max_distance: f64,
    /// δc, CIELab units.
    pub max_color_distance: f64,
    /// δn, degrees.
    pub max_normal_angle: f64,
    /// Ring neighbours that must pass every gate.
    pub min_count: usize,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings { radius: 2, max_distance: 0.05, max_color_distance: 10.0, max_normal_angle: 20.0, min_count: 1 }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("propagation setting {0} must be strictly positive")]
pub struct PropagationSettingsError(pub &'static str);

impl PropagationSettings {
    pub fn validate(&self) -> Result<(), PropagationSettingsError> {
        let checks = [
            ("radius", self.radius > 0),
            ("max_distance", self.max_distance > 0.0),
            ("max_color_distance", self.max_color_distance > 0.0),
            ("max_normal_angle", self.max_normal_angle > 0.0),
            ("min_count", self.min_count > 0),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(PropagationSettingsError(name)),
            None => Ok(()),
        }
    }
}

/// Pixel offsets on the Chebyshev ring of radius `r` (8r of them).
pub fn ring_offsets(r: usize) -> Vec<(isize, isize)> {
    let r = r as isize;
    let mut out = Vec::with_capacity(8 * r as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            if dx.abs().max(dy.abs()) == r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Whether voxel `b` is close enough to `a` in position, colour and normal.
fn similar(scene: &VoxelScene, a: VoxelId, b: VoxelId, s: &PropagationSettings, cos_limit: f64) -> bool {
    let (va, vb) = (scene.voxel(a), scene.voxel(b));
    let d = (va.position.to_vec3() - vb.position.to_vec3()).norm() * scene.voxel_size() as f64;
    if d > s.max_distance {
        return false;
    }
    if lab_distance(scene.lab(a), scene.lab(b)) as f64 > s.max_color_distance {
        return false;
    }
    va.normal_vec().dot(&vb.normal_vec()) >= cos_limit
}

/// Voxels that one synchronous step would mark, in pixel order (may repeat).
pub fn propagation_candidates(
    scene: &VoxelScene,
    raycast: &RaycastResult,
    label: LabelId,
    settings: &PropagationSettings,
) -> Vec<VoxelId> {
    let (w, h) = (raycast.width() as isize, raycast.height() as isize);
    let ring = ring_offsets(settings.radius);
    let cos_limit = settings.max_normal_angle.to_radians().cos() - 1e-12;
    let rows = par::map_range(h as usize, |y| {
        let y = y as isize;
        let mut out = Vec::new();
        for x in 0..w {
            let Some(id) = raycast.voxel(x as usize, y as usize) else { continue };
            if scene.label(id).id() == label {
                continue;
            }
            let mut passing = 0;
            for &(dx, dy) in &ring {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let Some(nid) = raycast.voxel(nx as usize, ny as usize) else { continue };
                if scene.label(nid).id() == label && similar(scene, id, nid, settings, cos_limit) {
                    passing += 1;
                    if passing >= settings.min_count {
                        out.push(id);
                        break;
                    }
                }
            }
        }
        out
    });
    rows.into_iter().flatten().collect()
}

/// One propagation step. All gates read the pre-step label field; writes go
/// through the NORMAL-mode marker as (label, PROPAGATED). Returns the number
/// of voxels newly labelled.
pub fn propagate_step(scene: &mut VoxelScene, raycast: &RaycastResult, label: LabelId, settings: &PropagationSettings) -> usize {
    if label == 0 {
        return 0;
    }
    let Ok(new) = PackedLabel::propagated(label) else { return 0 };
    let mut ids = propagation_candidates(scene, raycast, label, settings);
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter().filter(|&id| mark_voxel(scene, id, new, MarkMode::Normal)).count()
}

/// Resets every (label, PROPAGATED) voxel to unlabelled.
pub fn revert_to_user_labels(scene: &mut VoxelScene, label: LabelId) -> usize {
    let targets: Vec<VoxelId> = (0..scene.len() as u32)
        .map(VoxelId)
        .filter(|&id| {
            let l = scene.label(id);
            l.id() == label && l.group() == LabelGroup::Propagated && !l.is_unlabelled()
        })
        .collect();
    targets.into_iter().filter(|&id| mark_voxel(scene, id, PackedLabel::UNLABELLED, MarkMode::Normal)).count()
}
