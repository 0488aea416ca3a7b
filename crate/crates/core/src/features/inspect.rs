//! Feature Inspection mode output: both patches and the descriptor of one voxel.

use std::io;
use std::path::{Path, PathBuf};

use super::{lab_to_rgb, run_stages, FeatureError, FeatureSettings};
use crate::rendering::{encode_png, RgbFrame};
use crate::scene::{VoxelPos, VoxelScene};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureInspection {
    pub position: VoxelPos,
    pub patch_size: usize,
    pub first_patch: Vec<[f32; 3]>,
    pub second_patch: Vec<[f32; 3]>,
    pub dominant_angle: f64,
    pub descriptor: Vec<f32>,
}

pub fn inspect_voxel(scene: &VoxelScene, pos: VoxelPos, settings: &FeatureSettings) -> Result<FeatureInspection, FeatureError> {
    let st = run_stages(scene, pos, settings)?;
    let d = st.descriptor();
    Ok(FeatureInspection {
        position: pos,
        patch_size: settings.patch_size,
        first_patch: st.first,
        second_patch: st.second,
        dominant_angle: st.angle,
        descriptor: d.values().to_vec(),
    })
}

const SCALE: usize = 16;

fn patch_image(patch: &[[f32; 3]], n: usize) -> RgbFrame {
    let w = n * SCALE;
    let mut pixels = vec![[0u8; 3]; w * w];
    for (i, px) in pixels.iter_mut().enumerate() {
        let (r, c) = (i / w / SCALE, i % w / SCALE);
        *px = lab_to_rgb(patch[r * n + c]);
    }
    RgbFrame { width: w, height: w, pixels }
}

/// Writes `patch1.png`, `patch2.png` and `descriptor.csv` into `dir`.
pub fn write_inspection(dir: &Path, insp: &FeatureInspection) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, patch) in [("patch1.png", &insp.first_patch), ("patch2.png", &insp.second_patch)] {
        let png = encode_png(&patch_image(patch, insp.patch_size)).map_err(io::Error::other)?;
        let p = dir.join(name);
        std::fs::write(&p, png)?;
        written.push(p);
    }
    let mut csv = String::from("index,value\n");
    for (i, v) in insp.descriptor.iter().enumerate() {
        csv.push_str(&format!("{i},{v}\n"));
    }
    csv.push_str(&format!("# dominant_angle_deg,{}\n", insp.dominant_angle.to_degrees()));
    let p = dir.join("descriptor.csv");
    std::fs::write(&p, csv)?;
    written.push(p);
    Ok(written)
}
