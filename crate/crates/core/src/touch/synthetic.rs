//! Scripted synthetic depth sequences with a hand-like occluder, sensor
//! noise, dropout, flat distractor blobs and per-frame contact ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::image::DepthImage;
use crate::rendering::{raycast, CameraPose, Intrinsics, RaycastOptions};
use crate::scene::VoxelScene;

/// Heights at or below this count as contact.
pub const CONTACT_HEIGHT: f32 = 0.002;
/// Finger thickness at its centre line, metres.
const FINGER_THICKNESS: f32 = 0.02;
/// Palm clearance where the finger meets the hand, metres.
const PALM_CLEARANCE: f32 = 0.03;
/// Additional rise of the forearm over its length, metres.
const ARM_RISE: f32 = 0.35;

/// Hand pose at a frame. Position is in normalised image coordinates, the
/// arm points along `angle_deg` (image x axis = 0°) away from the fingertip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandKey {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    /// Fingertip height above the surface, metres. Held until the next key.
    pub height: f32,
    #[serde(default)]
    pub angle_deg: f64,
}

/// A flat blob raised `height` above the surface for frames `start..end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub start: usize,
    pub end: usize,
    pub x: f64,
    pub y: f64,
    /// Radius as a fraction of the image width.
    pub radius: f64,
    pub height: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchScript {
    pub frames: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gaussian depth noise σ, metres.
    #[serde(default)]
    pub noise_sigma: f32,
    /// Fraction of pixels reported invalid.
    #[serde(default)]
    pub dropout: f32,
    #[serde(default)]
    pub hand: Vec<HandKey>,
    #[serde(default)]
    pub distractors: Vec<Distractor>,
}

impl TouchScript {
    /// Hand hover/touch phases at random places, with occasional distractors.
    pub fn random(seed: u64, frames: usize, noise_sigma: f32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a11_5c0f);
        let mut hand = Vec::new();
        let mut f = 0;
        let mut touching = rng.random_bool(0.5);
        let mut angle: f64 = rng.random_range(0.0..360.0);
        while f < frames {
            let len = rng.random_range(3..9);
            angle += rng.random_range(-40.0..40.0);
            hand.push(HandKey {
                frame: f,
                x: rng.random_range(0.3..0.7),
                y: rng.random_range(0.3..0.7),
                height: if touching { 0.0 } else { rng.random_range(0.04..0.2) },
                angle_deg: angle,
            });
            f += len;
            touching = !touching;
        }
        hand.push(HandKey { frame: frames.saturating_sub(1), ..*hand.last().unwrap() });
        let mut distractors = Vec::new();
        let mut f = 0;
        while f < frames {
            f += rng.random_range(2..10);
            let len = rng.random_range(1..6);
            distractors.push(Distractor {
                start: f,
                end: f + len,
                x: rng.random_range(0.1..0.9),
                y: rng.random_range(0.1..0.9),
                radius: rng.random_range(0.012..0.04),
                height: rng.random_range(0.012..0.022),
            });
            f += len;
        }
        TouchScript { frames, seed, noise_sigma, dropout: 0.01, hand, distractors }
    }

    /// Hand state at `frame`: position interpolated linearly, height and
    /// angle held from the previous key. None outside the keyed range.
    pub fn hand_at(&self, frame: usize) -> Option<HandKey> {
        let first = self.hand.first()?;
        let last = self.hand.last()?;
        if frame < first.frame || frame > last.frame {
            return None;
        }
        let i = self.hand.iter().rposition(|k| k.frame <= frame)?;
        let a = self.hand[i];
        let Some(b) = self.hand.get(i + 1) else { return Some(HandKey { frame, ..a }) };
        let t = if b.frame > a.frame { (frame - a.frame) as f64 / (b.frame - a.frame) as f64 } else { 0.0 };
        Some(HandKey { frame, x: a.x + (b.x - a.x) * t, y: a.y + (b.y - a.y) * t, ..a })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub touching: bool,
    /// Noise-free contact pixels (x, y).
    pub contact: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticFrame {
    /// Raw sensor depth in metres; invalid pixels are 0.
    pub depth: DepthImage,
    pub pose: CameraPose,
    pub truth: FrameTruth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSequence {
    pub intrinsics: Intrinsics,
    /// Noise-free scene depth from the (fixed) camera.
    pub scene_depth: Vec<f32>,
    pub frames: Vec<SyntheticFrame>,
}

/// Height of the hand above the surface at pixel (x, y), if it covers it.
/// Also reports whether the pixel belongs to the finger.
fn hand_height(key: &HandKey, x: f64, y: f64, w: usize, h: usize) -> Option<(f32, bool)> {
    let unit = w as f64 / 640.0;
    let (s, c) = key.angle_deg.to_radians().sin_cos();
    let (tx, ty) = (key.x * w as f64, key.y * h as f64);
    // coordinates along (a) and across (b) the arm, fingertip at a = 0
    let (dx, dy) = (x - tx, y - ty);
    let a = dx * c + dy * s;
    let b = -dx * s + dy * c;
    let finger_len = 24.0 * unit;
    let finger_half = 6.0 * unit;
    let rho2 = ((a - finger_len / 2.0) / (finger_len / 2.0)).powi(2) + (b / finger_half).powi(2);
    if rho2 <= 1.0 {
        let profile = 0.7 + 0.3 * (1.0 - rho2).sqrt();
        return Some((key.height + FINGER_THICKNESS * profile as f32, true));
    }
    let arm_len = 220.0 * unit;
    let arm_half = 22.0 * unit;
    let along = a - finger_len;
    if (0.0..=arm_len).contains(&along) && b.abs() <= arm_half {
        let rise = PALM_CLEARANCE + ARM_RISE * (along / arm_len) as f32;
        return Some((key.height + rise, false));
    }
    None
}

/// Renders a script against `scene` from a fixed camera.
pub fn generate_synthetic_sequence(
    scene: &VoxelScene,
    pose: &CameraPose,
    intrinsics: &Intrinsics,
    script: &TouchScript,
    tau: f32,
    gamma: f32,
) -> SyntheticSequence {
    let (w, h) = (intrinsics.width, intrinsics.height);
    let rc = raycast(scene, pose, intrinsics, &RaycastOptions::default());
    let scene_depth: Vec<f32> = rc.depth().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let noise = Normal::new(0.0f32, script.noise_sigma.max(0.0)).unwrap();
    let mut frames = Vec::with_capacity(script.frames);
    for f in 0..script.frames {
        let key = script.hand_at(f);
        let mut depth = vec![0f32; w * h];
        let mut contact = Vec::new();
        let touching = key.is_some_and(|k| k.height <= CONTACT_HEIGHT);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let r = scene_depth[i];
                if !r.is_finite() {
                    continue;
                }
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut lift = 0f32;
                for d in &script.distractors {
                    if (d.start..d.end).contains(&f) {
                        let (cx, cy) = (d.x * w as f64, d.y * h as f64);
                        if (px - cx).powi(2) + (py - cy).powi(2) <= (d.radius * w as f64).powi(2) {
                            lift = lift.max(d.height);
                        }
                    }
                }
                if let Some(k) = &key {
                    if let Some((hh, finger)) = hand_height(k, px, py, w, h) {
                        lift = lift.max(hh);
                        if touching && finger && hh > tau && hh < gamma {
                            contact.push((x, y));
                        }
                    }
                }
                depth[i] = r - lift;
            }
        }
        for d in depth.iter_mut() {
            if *d <= 0.0 {
                continue;
            }
            if script.dropout > 0.0 && rng.random::<f32>() < script.dropout {
                *d = 0.0;
            } else if script.noise_sigma > 0.0 {
                *d += noise.sample(&mut rng);
            }
        }
        frames.push(SyntheticFrame {
            depth: DepthImage::new(w, h, depth),
            pose: *pose,
            truth: FrameTruth { touching: touching && !contact.is_empty(), contact },
        });
    }
    SyntheticSequence { intrinsics: *intrinsics, scene_depth, frames }
}
