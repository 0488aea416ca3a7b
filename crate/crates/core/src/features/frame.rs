use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::scene::{VoxelPos, VoxelScene};
use crate::{Mat3, Vec3};

/// How voxel normals are obtained for descriptors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalPolicy {
    /// Use the normal stored on the voxel.
    #[default]
    Stored,
    /// Fit a plane to the neighbourhood and orient it toward `toward`
    /// (a world-space point in metres, normally the last camera position).
    Fit { toward: [f64; 3] },
}

/// Radius, in grid units, of the neighbourhood used by plane fitting.
pub const FIT_RADIUS: i32 = 2;

/// Estimates the unit surface normal at `pos`.
pub fn estimate_normal(scene: &VoxelScene, pos: VoxelPos, policy: NormalPolicy) -> Result<Vec3, FeatureError> {
    let v = scene.get(pos).ok_or(FeatureError::MissingVoxel(pos))?;
    match policy {
        NormalPolicy::Stored => Ok(v.normal_vec().normalize()),
        NormalPolicy::Fit { toward } => fit_normal(scene, pos, FIT_RADIUS, Vec3::from(toward)),
    }
}

/// Least-squares plane normal over occupied voxels within `radius` grid units,
/// with its sign chosen so it faces `toward`.
pub fn fit_normal(scene: &VoxelScene, pos: VoxelPos, radius: i32, toward: Vec3) -> Result<Vec3, FeatureError> {
    let r2 = radius * radius;
    let mut pts = Vec::new();
    for dz in -radius..=radius {
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                if dx * dx + dy * dy + dz * dz > r2 {
                    continue;
                }
                let q = pos.offset(dx, dy, dz);
                if scene.contains(q) {
                    pts.push(q.to_vec3());
                }
            }
        }
    }
    let neighbours = pts.len() - usize::from(scene.contains(pos));
    if neighbours < 3 {
        return Err(FeatureError::DegenerateNormal(pos));
    }
    let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let mut cov = Mat3::zeros();
    for p in &pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // a line of voxels has two vanishing eigenvalues and no defined normal
    if eig.eigenvalues[order[1]] <= 1e-9 {
        return Err(FeatureError::DegenerateNormal(pos));
    }
    let mut n: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
    let to_view = toward - scene.world_position(pos);
    if n.dot(&to_view) < 0.0 {
        n = -n;
    }
    Ok(n)
}

/// Orthonormal in-plane axes at a voxel. Positions are in grid units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentFrame {
    pub origin: Vec3,
    pub x_axis: Vec3,
    pub y_axis: Vec3,
    pub normal: Vec3,
}

impl TangentFrame {
    /// Seeds the x axis from the world axis least aligned with the normal
    /// (lowest index on ties), projected into the tangent plane.
    pub fn new(origin: Vec3, normal: Vec3) -> Self {
        let n = normal.normalize();
        let mut k = 0;
        for i in 1..3 {
            if n[i].abs() < n[k].abs() {
                k = i;
            }
        }
        let mut e = Vec3::zeros();
        e[k] = 1.0;
        let x = (e - n * e.dot(&n)).normalize();
        let y = n.cross(&x);
        TangentFrame { origin, x_axis: x, y_axis: y, normal: n }
    }

    /// Rotates the in-plane axes by `angle` radians about the normal.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        TangentFrame {
            x_axis: self.x_axis * c + self.y_axis * s,
            y_axis: self.y_axis * c - self.x_axis * s,
            ..*self
        }
    }

    pub fn orthonormality_error(&self) -> f64 {
        let a = [self.x_axis, self.y_axis, self.normal];
        let mut err: f64 = 0.0;
        for i in 0..3 {
            err = err.max((a[i].norm() - 1.0).abs());
            for j in i + 1..3 {
                err = err.max(a[i].dot(&a[j]).abs());
            }
        }
        err
    }

    /// Lattice point (row, col) of an n×n grid with the given pitch.
    #[inline]
    pub fn lattice_point(&self, row: usize, col: usize, n: usize, spacing: f64) -> Vec3 {
        let c = (n as f64 - 1.0) / 2.0;
        self.origin + self.x_axis * ((col as f64 - c) * spacing) + self.y_axis * ((row as f64 - c) * spacing)
    }
}
