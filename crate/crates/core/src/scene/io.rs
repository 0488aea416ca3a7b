//! Binary scene format (little-endian):
//!
//! ```text
//! "SPVX"  u32 version=1  f32 voxel_size  u32 label_table_count
//! label entries: u8 id, u8 name_len, name bytes, 3 x u8 colour
//! u64 voxel_count
//! voxels: 3 x i32 position, 3 x u8 RGB, 3 x f32 normal, u8 packed label
//! ```
//!
//! Voxels are written in canonical (z, y, x) order.

use byteorder::{LittleEndian, WriteBytesExt};
use thiserror::Error;

use super::{LabelEntry, SceneError, Voxel, VoxelPos, VoxelScene};
use crate::label::PackedLabel;

pub const SCENE_MAGIC: &[u8; 4] = b"SPVX";
pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SceneParseErrorKind {
    #[error("bad magic header")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated stream")]
    Truncated,
    #[error("label name is not valid UTF-8")]
    BadLabelName,
    #[error("invalid packed label byte {0:#04x}")]
    BadLabel(u8),
    #[error("trailing bytes after the last voxel")]
    TrailingBytes,
    #[error(transparent)]
    Invalid(#[from] SceneError),
}

#[derive(Debug, Error, PartialEq)]
#[error("scene parse error at byte {offset}: {kind}")]
pub struct SceneParseError {
    pub offset: usize,
    pub kind: SceneParseErrorKind,
}

/// Little-endian cursor that reports the offset of the failing read.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    pub(crate) fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub(crate) fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn i32(&mut self) -> Option<i32> {
        self.take(4).map(|b| i32::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn u128(&mut self) -> Option<u128> {
        self.take(16).map(|b| u128::from_le_bytes(b.try_into().unwrap()))
    }
}

const VOXEL_RECORD: usize = 12 + 3 + 12 + 1;

pub fn save_scene(scene: &VoxelScene) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + scene.len() * VOXEL_RECORD);
    out.extend_from_slice(SCENE_MAGIC);
    out.write_u32::<LittleEndian>(SCENE_VERSION).unwrap();
    out.write_f32::<LittleEndian>(scene.voxel_size()).unwrap();
    out.write_u32::<LittleEndian>(scene.label_table().len() as u32).unwrap();
    for e in scene.label_table() {
        out.push(e.id);
        out.push(e.name.len() as u8);
        out.extend_from_slice(e.name.as_bytes());
        out.extend_from_slice(&e.color);
    }
    out.write_u64::<LittleEndian>(scene.len() as u64).unwrap();
    for id in scene.canonical_order() {
        let v = scene.voxel(id);
        for c in [v.position.x, v.position.y, v.position.z] {
            out.write_i32::<LittleEndian>(c).unwrap();
        }
        out.extend_from_slice(&v.color);
        for c in v.normal {
            out.write_f32::<LittleEndian>(c).unwrap();
        }
        out.push(v.label.to_byte());
    }
    out
}

pub fn load_scene(bytes: &[u8]) -> Result<VoxelScene, SceneParseError> {
    let mut r = Reader::new(bytes);
    let err = |offset: usize, kind: SceneParseErrorKind| SceneParseError { offset, kind };
    let truncated = |r: &Reader| err(r.offset(), SceneParseErrorKind::Truncated);

    match r.take(4) {
        Some(m) if m == SCENE_MAGIC => {}
        Some(_) => return Err(err(0, SceneParseErrorKind::BadMagic)),
        None => return Err(err(0, SceneParseErrorKind::Truncated)),
    }
    let version = r.u32().ok_or_else(|| truncated(&r))?;
    if version != SCENE_VERSION {
        return Err(err(4, SceneParseErrorKind::UnsupportedVersion(version)));
    }
    let size_at = r.offset();
    let voxel_size = r.f32().ok_or_else(|| truncated(&r))?;
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(err(size_at, SceneError::BadVoxelSize(voxel_size).into()));
    }
    let label_count = r.u32().ok_or_else(|| truncated(&r))?;
    let mut table = Vec::new();
    for _ in 0..label_count {
        let at = r.offset();
        let id = r.u8().ok_or_else(|| truncated(&r))?;
        let len = r.u8().ok_or_else(|| truncated(&r))? as usize;
        let name = r.take(len).ok_or_else(|| truncated(&r))?;
        let name = std::str::from_utf8(name).map_err(|_| err(at + 2, SceneParseErrorKind::BadLabelName))?;
        let color = r.take(3).ok_or_else(|| truncated(&r))?;
        table.push((at, LabelEntry { id, name: name.to_string(), color: [color[0], color[1], color[2]] }));
    }
    let mut scene = VoxelScene::new(voxel_size).map_err(|e| err(size_at, e.into()))?;
    scene.label_table.clear();
    for (at, e) in table {
        scene.push_label_entry(e).map_err(|e| err(at, e.into()))?;
    }

    let count = r.u64().ok_or_else(|| truncated(&r))?;
    // Bound the allocation by what the stream can actually hold.
    if (r.remaining() as u64) < count.saturating_mul(VOXEL_RECORD as u64) {
        return Err(err(bytes.len(), SceneParseErrorKind::Truncated));
    }
    scene.voxels.reserve(count as usize);
    for _ in 0..count {
        let at = r.offset();
        let rec = r.take(VOXEL_RECORD).ok_or_else(|| truncated(&r))?;
        let mut vr = Reader::new(rec);
        let position = VoxelPos::new(vr.i32().unwrap(), vr.i32().unwrap(), vr.i32().unwrap());
        let c = vr.take(3).unwrap();
        let normal = [vr.f32().unwrap(), vr.f32().unwrap(), vr.f32().unwrap()];
        let lb = vr.u8().unwrap();
        let label = PackedLabel::from_byte(lb).map_err(|_| err(at + VOXEL_RECORD - 1, SceneParseErrorKind::BadLabel(lb)))?;
        let voxel = Voxel { position, color: [c[0], c[1], c[2]], normal, label };
        scene.insert(voxel).map_err(|e| {
            let off = match e {
                SceneError::NonUnitNormal { .. } => at + 15,
                SceneError::UnknownLabel(_) => at + VOXEL_RECORD - 1,
                _ => at,
            };
            err(off, e.into())
        })?;
    }
    if r.remaining() != 0 {
        return Err(err(r.offset(), SceneParseErrorKind::TrailingBytes));
    }
    Ok(scene)
}
