//! Frame compositing: colour or semantic overlays, plus an optional display
//! median filter.

use serde::{Deserialize, Serialize};

use super::raycast::RaycastResult;
use crate::scene::{Rgb, VoxelScene};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Overlay {
    Color,
    /// Blend label colours over the voxel colours with weight `alpha`.
    Semantic { alpha: f32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeOptions {
    pub overlay: Overlay,
    pub median: bool,
}

impl Default for CompositeOptions {
    fn default() -> Self {
        CompositeOptions { overlay: Overlay::Semantic { alpha: 0.5 }, median: false }
    }
}

/// A packed RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl RgbFrame {
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }
}

pub fn composite_frame(raycast: &RaycastResult, scene: &VoxelScene, opts: &CompositeOptions) -> RgbFrame {
    let colors = scene.label_colors();
    let mut pixels = Vec::with_capacity(raycast.len());
    for i in 0..raycast.len() {
        let px = match raycast.voxel_at_index(i) {
            None => [0, 0, 0],
            Some(id) => {
                let v = scene.voxel(id);
                match opts.overlay {
                    Overlay::Color => v.color,
                    Overlay::Semantic { .. } if v.label.is_unlabelled() => v.color,
                    Overlay::Semantic { alpha } => blend(v.color, colors[v.label.id() as usize], alpha),
                }
            }
        };
        pixels.push(px);
    }
    let frame = RgbFrame { width: raycast.width(), height: raycast.height(), pixels };
    if opts.median {
        median_filter3(&frame)
    } else {
        frame
    }
}

fn blend(base: Rgb, over: Rgb, alpha: f32) -> Rgb {
    let a = alpha.clamp(0.0, 1.0);
    std::array::from_fn(|c| ((1.0 - a) * base[c] as f32 + a * over[c] as f32).round() as u8)
}

/// Per-channel 3x3 median with replicated borders.
pub fn median_filter3(frame: &RgbFrame) -> RgbFrame {
    let (w, h) = (frame.width, frame.height);
    let mut out = frame.clone();
    for y in 0..h {
        for x in 0..w {
            let mut px = [0u8; 3];
            for (c, slot) in px.iter_mut().enumerate() {
                let mut win = [0u8; 9];
                let mut k = 0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                        let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        win[k] = frame.pixels[sy * w + sx][c];
                        k += 1;
                    }
                }
                win.sort_unstable();
                *slot = win[4];
            }
            out.pixels[y * w + x] = px;
        }
    }
    out
}
