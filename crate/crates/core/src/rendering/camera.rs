//! Camera rigs: simple, derived and composite cameras.
//!
//! A camera is a position plus three orthonormal axes: `n` (look), `u` (up)
//! and `v` (right), with `v = n x u`. Camera space uses `x` along `v`, `y`
//! along `u` and `z` along `n`.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Mat3, Vec3};

pub const ORTHONORMAL_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub n: Vec3,
    pub u: Vec3,
    pub v: Vec3,
}

#[derive(Debug, Error, PartialEq)]
pub enum RigError {
    #[error("camera {0} is derived and cannot be moved directly")]
    NotMoveable(usize),
    #[error("unknown camera id {0}")]
    UnknownCamera(usize),
    #[error("camera axes are not orthonormal")]
    NotOrthonormal,
    #[error("look and up directions are parallel")]
    Degenerate,
}

/// Axis used by a camera motion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionAxis {
    N,
    U,
    V,
    /// An arbitrary world-space direction (normalised before use).
    World([f64; 3]),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Motion {
    Translate { axis: MotionAxis, distance: f64 },
    /// Rotation by `angle` radians about an axis through the camera position.
    Rotate { axis: MotionAxis, angle: f64 },
}

impl CameraPose {
    /// Builds a pose from a position and axes, re-orthonormalising them.
    pub fn new(position: Vec3, look: Vec3, up: Vec3) -> Result<Self, RigError> {
        let n = look.try_normalize(1e-12).ok_or(RigError::Degenerate)?;
        let u = (up - n * n.dot(&up)).try_normalize(1e-9).ok_or(RigError::Degenerate)?;
        Ok(CameraPose { position, n, u, v: n.cross(&u) })
    }

    pub fn look_at(position: Vec3, target: Vec3, up_hint: Vec3) -> Result<Self, RigError> {
        Self::new(position, target - position, up_hint)
    }

    /// Largest deviation from orthonormality over all axis pairs and norms.
    pub fn orthonormality_error(&self) -> f64 {
        let (n, u, v) = (self.n, self.u, self.v);
        [
            n.dot(&u).abs(),
            n.dot(&v).abs(),
            u.dot(&v).abs(),
            (n.norm() - 1.0).abs(),
            (u.norm() - 1.0).abs(),
            (v.norm() - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormality_error() <= ORTHONORMAL_TOLERANCE
    }

    /// Rotation whose columns are the camera axes `(v, u, n)` in world space.
    pub fn basis(&self) -> Mat3 {
        Mat3::from_columns(&[self.v, self.u, self.n])
    }

    fn axis_vector(&self, axis: MotionAxis) -> Vec3 {
        match axis {
            MotionAxis::N => self.n,
            MotionAxis::U => self.u,
            MotionAxis::V => self.v,
            MotionAxis::World(w) => Vec3::from(w).try_normalize(1e-12).unwrap_or_else(Vec3::zeros),
        }
    }

    pub fn apply(&mut self, motion: Motion) {
        match motion {
            Motion::Translate { axis, distance } => {
                self.position += self.axis_vector(axis) * distance;
            }
            Motion::Rotate { axis, angle } => {
                let a = self.axis_vector(axis);
                if a == Vec3::zeros() {
                    return;
                }
                let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(a), angle);
                self.n = r * self.n;
                self.u = r * self.u;
                self.orthonormalise();
            }
        }
    }

    /// Gram-Schmidt on (n, u), then `v = n x u`.
    pub fn orthonormalise(&mut self) {
        self.n = self.n.normalize();
        self.u = (self.u - self.n * self.n.dot(&self.u)).normalize();
        self.v = self.n.cross(&self.u);
    }

    /// Row-major 4x4 camera-to-world matrix in the image convention
    /// (x right, y down, z forward).
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let (v, d, n, p) = (self.v, -self.u, self.n, self.position);
        [[v.x, d.x, n.x, p.x], [v.y, d.y, n.y, p.y], [v.z, d.z, n.z, p.z], [0.0, 0.0, 0.0, 1.0]]
    }

    pub fn from_matrix(m: &[[f64; 4]; 4]) -> Result<Self, RigError> {
        let col = |j: usize| Vec3::new(m[0][j], m[1][j], m[2][j]);
        let pose = CameraPose { position: col(3), v: col(0), u: -col(1), n: col(2) };
        if pose.orthonormality_error() > 1e-4 {
            return Err(RigError::NotOrthonormal);
        }
        let mut pose = pose;
        pose.orthonormalise();
        Ok(pose)
    }

    /// Camera-space coordinates of a world point.
    pub fn world_to_camera(&self, p: Vec3) -> Vec3 {
        let d = p - self.position;
        Vec3::new(d.dot(&self.v), d.dot(&self.u), d.dot(&self.n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CameraId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CameraNode {
    Simple(CameraPose),
    /// Pose computed on demand from `base` plus a camera-space rotation and translation.
    Derived { base: CameraId, rotation: Mat3, translation: Vec3 },
    /// A moveable rig whose pose is that of its primary camera.
    Composite { primary: CameraId, secondaries: Vec<(String, CameraId)> },
}

/// An arena of cameras forming a rig hierarchy.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    nodes: Vec<CameraNode>,
}

impl CameraRig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_simple(&mut self, pose: CameraPose) -> CameraId {
        self.nodes.push(CameraNode::Simple(pose));
        CameraId(self.nodes.len() - 1)
    }

    pub fn add_derived(&mut self, base: CameraId, rotation: Mat3, translation: Vec3) -> Result<CameraId, RigError> {
        self.node(base)?;
        self.nodes.push(CameraNode::Derived { base, rotation, translation });
        Ok(CameraId(self.nodes.len() - 1))
    }

    pub fn add_composite(&mut self, primary: CameraId, secondaries: Vec<(String, CameraId)>) -> Result<CameraId, RigError> {
        self.node(primary)?;
        for (_, s) in &secondaries {
            self.node(*s)?;
        }
        self.nodes.push(CameraNode::Composite { primary, secondaries });
        Ok(CameraId(self.nodes.len() - 1))
    }

    /// A composite rig of a primary camera and two derived eyes separated by `baseline`.
    pub fn stereo(pose: CameraPose, baseline: f64) -> (CameraRig, CameraId) {
        let mut rig = CameraRig::new();
        let primary = rig.add_simple(pose);
        let left = rig.add_derived(primary, Mat3::identity(), Vec3::new(-baseline / 2.0, 0.0, 0.0)).unwrap();
        let right = rig.add_derived(primary, Mat3::identity(), Vec3::new(baseline / 2.0, 0.0, 0.0)).unwrap();
        let rig_id = rig.add_composite(primary, vec![("left".into(), left), ("right".into(), right)]).unwrap();
        (rig, rig_id)
    }

    fn node(&self, id: CameraId) -> Result<&CameraNode, RigError> {
        self.nodes.get(id.0).ok_or(RigError::UnknownCamera(id.0))
    }

    pub fn secondary(&self, composite: CameraId, name: &str) -> Option<CameraId> {
        match self.nodes.get(composite.0)? {
            CameraNode::Composite { secondaries, .. } => secondaries.iter().find(|(n, _)| n == name).map(|(_, id)| *id),
            _ => None,
        }
    }

    pub fn pose(&self, id: CameraId) -> Result<CameraPose, RigError> {
        match self.node(id)? {
            CameraNode::Simple(p) => Ok(*p),
            CameraNode::Composite { primary, .. } => self.pose(*primary),
            CameraNode::Derived { base, rotation, translation } => {
                let b = self.pose(*base)?;
                let basis = b.basis();
                let axes = basis * rotation;
                let mut pose = CameraPose {
                    position: b.position + basis * translation,
                    v: axes.column(0).into(),
                    u: axes.column(1).into(),
                    n: axes.column(2).into(),
                };
                pose.orthonormalise();
                Ok(pose)
            }
        }
    }

    pub fn move_camera(&mut self, id: CameraId, motion: Motion) -> Result<(), RigError> {
        match self.node(id)? {
            CameraNode::Derived { .. } => Err(RigError::NotMoveable(id.0)),
            CameraNode::Composite { primary, .. } => {
                let primary = *primary;
                self.move_camera(primary, motion)
            }
            CameraNode::Simple(_) => {
                if let CameraNode::Simple(p) = &mut self.nodes[id.0] {
                    p.apply(motion);
                }
                Ok(())
            }
        }
    }

    /// Replaces the pose of a simple camera (or a composite's primary).
    pub fn set_pose(&mut self, id: CameraId, pose: CameraPose) -> Result<(), RigError> {
        match self.node(id)? {
            CameraNode::Derived { .. } => Err(RigError::NotMoveable(id.0)),
            CameraNode::Composite { primary, .. } => {
                let primary = *primary;
                self.set_pose(primary, pose)
            }
            CameraNode::Simple(_) => {
                self.nodes[id.0] = CameraNode::Simple(pose);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn start() -> CameraPose {
        CameraPose::look_at(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.0, 0.0, 0.0), Vec3::z()).unwrap()
    }

    #[test]
    fn full_turn_is_identity() {
        let mut p = start();
        let s = p;
        for _ in 0..8 {
            p.apply(Motion::Rotate { axis: MotionAxis::U, angle: std::f64::consts::FRAC_PI_4 });
        }
        assert!((p.n - s.n).norm() < 1e-4);
        assert!((p.u - s.u).norm() < 1e-4);
        assert!((p.v - s.v).norm() < 1e-4);
    }

    #[test]
    fn derived_identity_tracks_base() {
        let mut rig = CameraRig::new();
        let base = rig.add_simple(start());
        let d = rig.add_derived(base, Mat3::identity(), Vec3::zeros()).unwrap();
        rig.move_camera(base, Motion::Rotate { axis: MotionAxis::N, angle: 0.3 }).unwrap();
        rig.move_camera(base, Motion::Translate { axis: MotionAxis::V, distance: 0.7 }).unwrap();
        let (a, b) = (rig.pose(base).unwrap(), rig.pose(d).unwrap());
        assert_abs_diff_eq!((a.position - b.position).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((a.n - b.n).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(rig.move_camera(d, Motion::Translate { axis: MotionAxis::N, distance: 1.0 }), Err(RigError::NotMoveable(1)));
    }

    #[test]
    fn stereo_baseline_is_rigid() {
        let (mut rig, id) = CameraRig::stereo(start(), 0.065);
        let (l, r) = (rig.secondary(id, "left").unwrap(), rig.secondary(id, "right").unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let axis = [MotionAxis::N, MotionAxis::U, MotionAxis::V][rng.random_range(0..3)];
            let m = if rng.random_bool(0.5) {
                Motion::Rotate { axis, angle: rng.random_range(-1.0..1.0) }
            } else {
                Motion::Translate { axis, distance: rng.random_range(-1.0..1.0) }
            };
            rig.move_camera(id, m).unwrap();
            let (pl, pr) = (rig.pose(l).unwrap(), rig.pose(r).unwrap());
            assert_abs_diff_eq!((pl.position - pr.position).norm(), 0.065, epsilon = 1e-9);
            assert!(pl.is_orthonormal() && pr.is_orthonormal());
            // Eyes sit on the primary's right axis.
            let p = rig.pose(id).unwrap();
            assert_abs_diff_eq!((pr.position - pl.position).normalize().dot(&p.v), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn matrix_round_trip() {
        let p = start();
        let q = CameraPose::from_matrix(&p.to_matrix()).unwrap();
        assert_abs_diff_eq!((p.n - q.n).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((p.u - q.u).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((p.position - q.position).norm(), 0.0, epsilon = 1e-12);
    }
}
