//! Voxel-oriented patch (VOP) descriptors: a CIELab patch sampled on the
//! tangent plane, aligned to its dominant gradient, plus the surface normal.

mod frame;
mod inspect;
pub mod lab;
mod orientation;
mod patch;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::scene::{VoxelPos, VoxelScene};

pub use frame::{estimate_normal, fit_normal, NormalPolicy, TangentFrame, FIT_RADIUS};
pub use inspect::{inspect_voxel, write_inspection, FeatureInspection};
pub use lab::{lab_distance, lab_to_rgb, rgb_to_lab};
pub use orientation::{dominant_orientation, orientation_bin, orientation_histogram, ORIENTATION_BINS};
pub use patch::{extract_lab_patch, extract_patch, nearest_voxel, sample_lattice};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("no voxel at {0:?}")]
    MissingVoxel(VoxelPos),
    #[error("cannot estimate a normal at {0:?}")]
    DegenerateNormal(VoxelPos),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSettings {
    /// Patch edge length n.
    pub patch_size: usize,
    /// Lattice pitch in grid units.
    pub spacing: f64,
    pub normals: NormalPolicy,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings { patch_size: 13, spacing: 2.0, normals: NormalPolicy::Stored }
    }
}

impl FeatureSettings {
    pub fn descriptor_len(&self) -> usize {
        3 * self.patch_size * self.patch_size + 3
    }
}

/// Patch values (row-major, channel-interleaved L, a, b) followed by the
/// world-frame normal.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDescriptor(Arc<[f32]>);

impl FeatureDescriptor {
    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn shared(&self) -> Arc<[f32]> {
        self.0.clone()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn normal(&self) -> [f32; 3] {
        let n = self.0.len();
        [self.0[n - 3], self.0[n - 2], self.0[n - 1]]
    }
}

pub(crate) struct Stages {
    pub frame: TangentFrame,
    pub first: Vec<[f32; 3]>,
    pub angle: f64,
    pub second: Vec<[f32; 3]>,
}

impl Stages {
    pub fn descriptor(&self) -> FeatureDescriptor {
        let mut v = Vec::with_capacity(self.second.len() * 3 + 3);
        for p in &self.second {
            v.extend_from_slice(p);
        }
        let nrm = self.frame.normal;
        v.extend([nrm.x as f32, nrm.y as f32, nrm.z as f32]);
        FeatureDescriptor(Arc::from(v))
    }
}

pub(crate) fn run_stages(scene: &VoxelScene, pos: VoxelPos, settings: &FeatureSettings) -> Result<Stages, FeatureError> {
    let centre = scene.id_of(pos).ok_or(FeatureError::MissingVoxel(pos))?;
    let normal = estimate_normal(scene, pos, settings.normals)?;
    let frame = TangentFrame::new(pos.to_vec3(), normal);
    let n = settings.patch_size;
    let first = extract_lab_patch(scene, &frame, n, settings.spacing, centre);
    let intensity: Vec<f32> = first.iter().map(|p| p[0]).collect();
    let angle = dominant_orientation(&intensity, n);
    let second = extract_lab_patch(scene, &frame.rotated(angle), n, settings.spacing, centre);
    Ok(Stages { frame, first, angle, second })
}

pub fn compute_descriptor(
    scene: &VoxelScene,
    pos: VoxelPos,
    settings: &FeatureSettings,
) -> Result<FeatureDescriptor, FeatureError> {
    Ok(run_stages(scene, pos, settings)?.descriptor())
}

/// Descriptors for a batch of voxels, in input order. Failures are reported
/// per voxel so callers can drop them.
pub fn compute_descriptors(
    scene: &VoxelScene,
    positions: &[VoxelPos],
    settings: &FeatureSettings,
) -> Vec<Result<FeatureDescriptor, FeatureError>> {
    par::map_slice(positions, |&p| compute_descriptor(scene, p, settings))
}
