//! Recorded sequence directories: `depth_NNNNNN.pgm` (16-bit millimetres),
//! `pose_NNNNNN.txt` (row-major 4×4 camera-to-world), `intrinsics.txt`
//! (`fx fy cx cy width height`) and optionally `truth.json`.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::image::DepthImage;
use super::synthetic::{FrameTruth, SyntheticSequence};
use crate::rendering::{decode_depth_pgm, depth_to_mm, encode_depth_pgm, CameraPose, ImageIoError, Intrinsics};

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Image { path: String, source: ImageIoError },
    #[error("{path}: {what}")]
    Format { path: String, what: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordedFrame {
    /// Metres; invalid pixels are 0.
    pub depth: DepthImage,
    pub pose: CameraPose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordedSequence {
    pub intrinsics: Intrinsics,
    pub frames: Vec<RecordedFrame>,
    pub truth: Option<Vec<FrameTruth>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SequenceError + '_ {
    move |source| SequenceError::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, what: impl Into<String>) -> SequenceError {
    SequenceError::Format { path: path.display().to_string(), what: what.into() }
}

pub fn format_pose(pose: &CameraPose) -> String {
    pose.to_matrix().iter().map(|row| row.map(|v| format!("{v:.17}")).join(" ") + "\n").collect()
}

pub fn parse_pose(text: &str) -> Option<CameraPose> {
    let v: Vec<f64> = text.split_whitespace().map(str::parse).collect::<Result<_, _>>().ok()?;
    if v.len() != 16 {
        return None;
    }
    let m: [[f64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| v[r * 4 + c]));
    CameraPose::from_matrix(&m).ok()
}

pub fn write_sequence(dir: &Path, seq: &SyntheticSequence) -> Result<(), SequenceError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let k = &seq.intrinsics;
    let p = dir.join("intrinsics.txt");
    fs::write(&p, format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, k.width, k.height)).map_err(io_err(&p))?;
    for (i, f) in seq.frames.iter().enumerate() {
        let p = dir.join(format!("depth_{i:06}.pgm"));
        let mm = depth_to_mm(&f.depth.data);
        fs::write(&p, encode_depth_pgm(f.depth.width, f.depth.height, &mm)).map_err(io_err(&p))?;
        let p = dir.join(format!("pose_{i:06}.txt"));
        fs::write(&p, format_pose(&f.pose)).map_err(io_err(&p))?;
    }
    let truth: Vec<&FrameTruth> = seq.frames.iter().map(|f| &f.truth).collect();
    let p = dir.join("truth.json");
    fs::write(&p, serde_json::to_vec(&truth).expect("truth serialises")).map_err(io_err(&p))?;
    Ok(())
}

pub fn read_sequence(dir: &Path) -> Result<RecordedSequence, SequenceError> {
    let p = dir.join("intrinsics.txt");
    let text = fs::read_to_string(&p).map_err(io_err(&p))?;
    let v: Vec<f64> = text
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| format_err(&p, "non-numeric intrinsics"))?;
    if v.len() != 6 {
        return Err(format_err(&p, "expected fx fy cx cy width height"));
    }
    let intrinsics = Intrinsics::new(v[0], v[1], v[2], v[3], v[4] as usize, v[5] as usize)
        .map_err(|e| format_err(&p, e.to_string()))?;
    let mut frames = Vec::new();
    for i in 0.. {
        let dp = dir.join(format!("depth_{i:06}.pgm"));
        if !dp.exists() {
            break;
        }
        let bytes = fs::read(&dp).map_err(io_err(&dp))?;
        let (w, h, mm) =
            decode_depth_pgm(&bytes).map_err(|source| SequenceError::Image { path: dp.display().to_string(), source })?;
        if (w, h) != (intrinsics.width, intrinsics.height) {
            return Err(format_err(&dp, "frame size differs from intrinsics"));
        }
        let pp = dir.join(format!("pose_{i:06}.txt"));
        let pose = parse_pose(&fs::read_to_string(&pp).map_err(io_err(&pp))?)
            .ok_or_else(|| format_err(&pp, "expected 16 numbers forming a rigid transform"))?;
        let depth = DepthImage::new(w, h, mm.iter().map(|&d| d as f32 / 1000.0).collect());
        frames.push(RecordedFrame { depth, pose });
    }
    let tp = dir.join("truth.json");
    let truth = if tp.exists() {
        let bytes = fs::read(&tp).map_err(io_err(&tp))?;
        Some(serde_json::from_slice(&bytes).map_err(|e| format_err(&tp, e.to_string()))?)
    } else {
        None
    };
    Ok(RecordedSequence { intrinsics, frames, truth })
}
