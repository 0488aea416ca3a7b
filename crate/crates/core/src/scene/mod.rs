//! Sparse voxel scenes, the provenance-aware voxel marker, and the binary
//! scene format.

mod grid;
mod io;
pub(crate) use io::Reader;

pub use grid::{DenseGrid, BRICK};
pub use io::{load_scene, save_scene, SceneParseError, SceneParseErrorKind, SCENE_MAGIC, SCENE_VERSION};

use std::sync::OnceLock;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::lab::rgb_to_lab;
use crate::label::{LabelId, PackedLabel, MAX_LABELS, UNLABELLED_ID};
use crate::Vec3;

/// Integer voxel coordinates in grid units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct VoxelPos {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelPos {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        VoxelPos { x, y, z }
    }

    /// Sort key of the canonical (z, y, x) voxel ordering.
    pub fn canonical_key(self) -> (i32, i32, i32) {
        (self.z, self.y, self.x)
    }

    pub fn to_vec3(self) -> Vec3 {
        Vec3::new(self.x as f64, self.y as f64, self.z as f64)
    }

    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> Self {
        VoxelPos::new(self.x + dx, self.y + dy, self.z + dz)
    }
}

/// 8-bit RGB colour.
pub type Rgb = [u8; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Voxel {
    pub position: VoxelPos,
    pub color: Rgb,
    pub normal: [f32; 3],
    pub label: PackedLabel,
}

impl Voxel {
    pub fn new(position: VoxelPos, color: Rgb, normal: [f32; 3]) -> Self {
        Voxel { position, color, normal, label: PackedLabel::UNLABELLED }
    }

    pub fn normal_vec(&self) -> Vec3 {
        Vec3::new(self.normal[0] as f64, self.normal[1] as f64, self.normal[2] as f64)
    }
}

/// Index of a voxel inside its scene's storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelId(pub u32);

impl VoxelId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub id: LabelId,
    pub name: String,
    pub color: Rgb,
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("voxel size must be positive, got {0}")]
    BadVoxelSize(f32),
    #[error("duplicate voxel at {0:?}")]
    DuplicateVoxel(VoxelPos),
    #[error("normal at {pos:?} has length {len}, expected 1")]
    NonUnitNormal { pos: VoxelPos, len: f32 },
    #[error("label id {0} is not in the label table")]
    UnknownLabel(LabelId),
    #[error("label id {0} already in the label table")]
    DuplicateLabel(LabelId),
    #[error("label name {0:?} already in the label table")]
    DuplicateLabelName(String),
    #[error("label id {0} outside the label space")]
    LabelOutOfRange(LabelId),
    #[error("label name longer than 255 bytes")]
    LabelNameTooLong,
}

pub const NORMAL_TOLERANCE: f32 = 1e-4;

/// Sparse voxel grid with per-voxel colour, normal and packed label.
///
/// Voxels are never removed; positions are fixed once inserted, only labels
/// change afterwards. A dense lookup grid over the bounding box is built
/// lazily for fast raycasting and neighbourhood queries.
#[derive(Debug)]
pub struct VoxelScene {
    voxel_size: f32,
    voxels: Vec<Voxel>,
    lab: Vec<[f32; 3]>,
    index: FxHashMap<VoxelPos, VoxelId>,
    label_table: Vec<LabelEntry>,
    grid: OnceLock<Option<DenseGrid>>,
}

impl Clone for VoxelScene {
    fn clone(&self) -> Self {
        VoxelScene {
            voxel_size: self.voxel_size,
            voxels: self.voxels.clone(),
            lab: self.lab.clone(),
            index: self.index.clone(),
            label_table: self.label_table.clone(),
            grid: self.grid.clone(),
        }
    }
}

impl PartialEq for VoxelScene {
    /// Semantic equality: same voxel size, label table, and voxel set.
    fn eq(&self, other: &Self) -> bool {
        self.voxel_size == other.voxel_size
            && self.label_table == other.label_table
            && self.voxels.len() == other.voxels.len()
            && self.voxels.iter().all(|v| other.get(v.position) == Some(v))
    }
}

impl VoxelScene {
    /// Creates an empty scene whose label table holds only the unlabelled entry.
    pub fn new(voxel_size: f32) -> Result<Self, SceneError> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(SceneError::BadVoxelSize(voxel_size));
        }
        Ok(VoxelScene {
            voxel_size,
            voxels: Vec::new(),
            lab: Vec::new(),
            index: FxHashMap::default(),
            label_table: vec![LabelEntry { id: UNLABELLED_ID, name: "unlabelled".into(), color: [0, 0, 0] }],
            grid: OnceLock::new(),
        })
    }

    fn push_label_entry(&mut self, e: LabelEntry) -> Result<(), SceneError> {
        if e.id as usize >= MAX_LABELS {
            return Err(SceneError::LabelOutOfRange(e.id));
        }
        if e.name.len() > 255 {
            return Err(SceneError::LabelNameTooLong);
        }
        if self.label_table.iter().any(|x| x.id == e.id) {
            return Err(SceneError::DuplicateLabel(e.id));
        }
        if self.label_table.iter().any(|x| x.name == e.name) {
            return Err(SceneError::DuplicateLabelName(e.name));
        }
        self.label_table.push(e);
        Ok(())
    }

    pub fn add_label(&mut self, id: LabelId, name: &str, color: Rgb) -> Result<(), SceneError> {
        self.push_label_entry(LabelEntry { id, name: name.to_string(), color })
    }

    /// Adds a label using the smallest free id.
    pub fn add_label_auto(&mut self, name: &str, color: Rgb) -> Result<LabelId, SceneError> {
        let id = (1..MAX_LABELS as u8)
            .find(|id| !self.has_label(*id))
            .ok_or(SceneError::LabelOutOfRange(MAX_LABELS as u8))?;
        self.add_label(id, name, color)?;
        Ok(id)
    }

    pub fn voxel_size(&self) -> f32 {
        self.voxel_size
    }

    pub fn label_table(&self) -> &[LabelEntry] {
        &self.label_table
    }

    pub(crate) fn restore_label_table(&mut self, table: Vec<LabelEntry>) {
        self.label_table = table;
    }

    pub fn has_label(&self, id: LabelId) -> bool {
        self.label_table.iter().any(|e| e.id == id)
    }

    pub fn label_entry(&self, id: LabelId) -> Option<&LabelEntry> {
        self.label_table.iter().find(|e| e.id == id)
    }

    pub fn label_by_name(&self, name: &str) -> Option<LabelId> {
        self.label_table.iter().find(|e| e.name == name).map(|e| e.id)
    }

    /// Display colours indexed by label id; unknown ids map to black.
    pub fn label_colors(&self) -> [Rgb; MAX_LABELS] {
        let mut colors = [[0u8; 3]; MAX_LABELS];
        for e in &self.label_table {
            colors[e.id as usize] = e.color;
        }
        colors
    }

    pub fn insert(&mut self, voxel: Voxel) -> Result<VoxelId, SceneError> {
        let n = voxel.normal;
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if !((len - 1.0).abs() <= NORMAL_TOLERANCE) {
            return Err(SceneError::NonUnitNormal { pos: voxel.position, len });
        }
        if !self.has_label(voxel.label.id()) {
            return Err(SceneError::UnknownLabel(voxel.label.id()));
        }
        if self.index.contains_key(&voxel.position) {
            return Err(SceneError::DuplicateVoxel(voxel.position));
        }
        let id = VoxelId(self.voxels.len() as u32);
        self.index.insert(voxel.position, id);
        self.lab.push(rgb_to_lab(voxel.color));
        self.voxels.push(voxel);
        self.grid = OnceLock::new();
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn voxels(&self) -> &[Voxel] {
        &self.voxels
    }

    #[inline]
    pub fn voxel(&self, id: VoxelId) -> &Voxel {
        &self.voxels[id.index()]
    }

    /// Cached CIELab colour of a voxel.
    #[inline]
    pub fn lab(&self, id: VoxelId) -> [f32; 3] {
        self.lab[id.index()]
    }

    #[inline]
    pub fn label(&self, id: VoxelId) -> PackedLabel {
        self.voxels[id.index()].label
    }

    pub fn get(&self, pos: VoxelPos) -> Option<&Voxel> {
        self.id_of(pos).map(|id| self.voxel(id))
    }

    #[inline]
    pub fn id_of(&self, pos: VoxelPos) -> Option<VoxelId> {
        // never builds the grid: inserts invalidate it, and lookups between
        // inserts would otherwise rebuild it every time
        match self.grid.get() {
            Some(Some(g)) => g.get(pos),
            _ => self.index.get(&pos).copied(),
        }
    }

    pub fn contains(&self, pos: VoxelPos) -> bool {
        self.id_of(pos).is_some()
    }

    /// Dense lookup grid, if the bounding box is small enough to allocate one.
    pub fn grid(&self) -> Option<&DenseGrid> {
        self.grid.get_or_init(|| DenseGrid::build(&self.voxels)).as_ref()
    }

    /// Integer bounding box (inclusive) of the occupied voxels.
    pub fn bounds(&self) -> Option<(VoxelPos, VoxelPos)> {
        let first = self.voxels.first()?.position;
        let (mut lo, mut hi) = (first, first);
        for v in &self.voxels {
            let p = v.position;
            lo = VoxelPos::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = VoxelPos::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        Some((lo, hi))
    }

    /// World-space centre of a voxel, in metres.
    pub fn world_position(&self, pos: VoxelPos) -> Vec3 {
        pos.to_vec3() * self.voxel_size as f64
    }

    /// Writes a label without any provenance checks. Only the marker and
    /// bulk label restoration go through here.
    #[inline]
    pub(crate) fn write_label(&mut self, id: VoxelId, label: PackedLabel) {
        self.voxels[id.index()].label = label;
    }

    /// Copy of the whole label field, indexed by `VoxelId`.
    pub fn label_field(&self) -> Vec<PackedLabel> {
        self.voxels.iter().map(|v| v.label).collect()
    }

    /// Restores a label field previously captured with [`label_field`](Self::label_field).
    pub fn restore_label_field(&mut self, field: &[PackedLabel]) {
        assert_eq!(field.len(), self.voxels.len(), "label field size mismatch");
        for (v, l) in self.voxels.iter_mut().zip(field) {
            v.label = *l;
        }
    }

    /// Voxel ids in canonical (z, y, x) order.
    pub fn canonical_order(&self) -> Vec<VoxelId> {
        let mut ids: Vec<VoxelId> = (0..self.voxels.len() as u32).map(VoxelId).collect();
        ids.sort_unstable_by_key(|id| self.voxels[id.index()].position.canonical_key());
        ids
    }
}

/// Marker mode: `Normal` enforces the provenance rules, `Force` always writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkMode {
    Normal,
    Force,
}

/// Result of a marking pass.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkOutcome {
    pub changed: usize,
    /// Selected positions that are not in the scene.
    pub skipped: Vec<VoxelPos>,
}

/// True if the marker may replace `old` with `new` in `Normal` mode: either
/// both labels are non-user labels, or the new label is a user label.
#[inline]
pub fn may_overwrite(old: PackedLabel, new: PackedLabel) -> bool {
    new.group().is_user() || !old.group().is_user()
}

/// Marks the voxels at `selection` with `new_label`, returning how many
/// voxels actually changed.
pub fn mark_voxels(scene: &mut VoxelScene, selection: &[VoxelPos], new_label: PackedLabel, mode: MarkMode) -> MarkOutcome {
    let mut outcome = MarkOutcome::default();
    for &pos in selection {
        match scene.id_of(pos) {
            Some(id) => {
                if mark_voxel(scene, id, new_label, mode) {
                    outcome.changed += 1;
                }
            }
            None => outcome.skipped.push(pos),
        }
    }
    outcome
}

/// Marks a single voxel; returns whether its label changed.
#[inline]
pub fn mark_voxel(scene: &mut VoxelScene, id: VoxelId, new_label: PackedLabel, mode: MarkMode) -> bool {
    let old = scene.label(id);
    if old == new_label {
        return false;
    }
    if mode == MarkMode::Force || may_overwrite(old, new_label) {
        scene.write_label(id, new_label);
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LabelGroup;

    fn scene_with(labels: &[(LabelId, &str)]) -> VoxelScene {
        let mut s = VoxelScene::new(0.01).unwrap();
        for (id, name) in labels {
            s.add_label(*id, name, [255, 0, 0]).unwrap();
        }
        s
    }

    const CHAIR: LabelId = 1;
    const FLOOR: LabelId = 2;

    #[test]
    fn user_label_survives_forest_marking() {
        let mut s = scene_with(&[(CHAIR, "chair"), (FLOOR, "floor")]);
        let p = VoxelPos::new(0, 0, 0);
        let mut v = Voxel::new(p, [1, 2, 3], [0.0, 0.0, 1.0]);
        v.label = PackedLabel::user(CHAIR).unwrap();
        s.insert(v).unwrap();
        let out = mark_voxels(&mut s, &[p], PackedLabel::forest(FLOOR).unwrap(), MarkMode::Normal);
        assert_eq!(out.changed, 0);
        assert_eq!(s.get(p).unwrap().label, PackedLabel::user(CHAIR).unwrap());
        let out = mark_voxels(&mut s, &[p], PackedLabel::forest(FLOOR).unwrap(), MarkMode::Force);
        assert_eq!(out.changed, 1);
        assert_eq!(s.get(p).unwrap().label.group(), LabelGroup::Forest);
    }

    #[test]
    fn unlabelled_accepts_any_marking() {
        let mut s = scene_with(&[(FLOOR, "floor")]);
        let p = VoxelPos::new(1, 2, 3);
        s.insert(Voxel::new(p, [0, 0, 0], [1.0, 0.0, 0.0])).unwrap();
        let out = mark_voxels(&mut s, &[p], PackedLabel::forest(FLOOR).unwrap(), MarkMode::Normal);
        assert_eq!(out.changed, 1);
    }

    #[test]
    fn missing_positions_are_skipped() {
        let mut s = scene_with(&[(FLOOR, "floor")]);
        s.insert(Voxel::new(VoxelPos::new(0, 0, 0), [0, 0, 0], [1.0, 0.0, 0.0])).unwrap();
        let out = mark_voxels(
            &mut s,
            &[VoxelPos::new(0, 0, 0), VoxelPos::new(9, 9, 9)],
            PackedLabel::user(FLOOR).unwrap(),
            MarkMode::Normal,
        );
        assert_eq!(out.changed, 1);
        assert_eq!(out.skipped, vec![VoxelPos::new(9, 9, 9)]);
    }

    #[test]
    fn same_label_is_not_a_change() {
        let mut s = scene_with(&[(FLOOR, "floor")]);
        let p = VoxelPos::new(0, 0, 0);
        s.insert(Voxel::new(p, [0, 0, 0], [1.0, 0.0, 0.0])).unwrap();
        let l = PackedLabel::user(FLOOR).unwrap();
        assert_eq!(mark_voxels(&mut s, &[p, p], l, MarkMode::Normal).changed, 1);
    }

    #[test]
    fn insert_validates() {
        let mut s = scene_with(&[]);
        let p = VoxelPos::new(0, 0, 0);
        assert!(matches!(
            s.insert(Voxel::new(p, [0, 0, 0], [0.0, 0.0, 0.5])),
            Err(SceneError::NonUnitNormal { .. })
        ));
        s.insert(Voxel::new(p, [0, 0, 0], [0.0, 0.0, 1.0])).unwrap();
        assert_eq!(s.insert(Voxel::new(p, [0, 0, 0], [0.0, 0.0, 1.0])), Err(SceneError::DuplicateVoxel(p)));
        let mut v = Voxel::new(VoxelPos::new(1, 0, 0), [0, 0, 0], [0.0, 0.0, 1.0]);
        v.label = PackedLabel::user(5).unwrap();
        assert_eq!(s.insert(v), Err(SceneError::UnknownLabel(5)));
        assert_eq!(VoxelScene::new(0.0).unwrap_err(), SceneError::BadVoxelSize(0.0));
    }

    #[test]
    fn grid_and_hash_agree() {
        let mut s = scene_with(&[]);
        for i in 0..20 {
            s.insert(Voxel::new(VoxelPos::new(i, -i, 2 * i), [0, 0, 0], [0.0, 1.0, 0.0])).unwrap();
        }
        for i in -5..25 {
            let p = VoxelPos::new(i, -i, 2 * i);
            assert_eq!(s.id_of(p), s.index.get(&p).copied());
            assert!(s.id_of(VoxelPos::new(i, i + 1, 0)).is_none());
        }
    }
}
