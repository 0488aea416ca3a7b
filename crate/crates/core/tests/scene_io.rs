use paintbox_core::presets::random_scene;
use paintbox_core::scene::{load_scene, mark_voxel, save_scene, MarkMode};
use paintbox_core::{PackedLabel, VoxelId};

#[test]
fn hundred_thousand_voxels_round_trip() {
    let mut s = random_scene(9, 100_000, 40, 0.01);
    assert_eq!(s.len(), 100_000);
    for id in 1..=9u8 {
        s.add_label(id, &format!("class{id}"), [id * 20, 255 - id * 20, 90]).unwrap();
    }
    for i in (0..s.len() as u32).step_by(7) {
        mark_voxel(&mut s, VoxelId(i), PackedLabel::user((i % 9 + 1) as u8).unwrap(), MarkMode::Force);
    }
    let bytes = save_scene(&s);
    let back = load_scene(&bytes).unwrap();
    assert_eq!(back.len(), s.len());
    // files are in canonical order, so compare by position
    for v in s.voxels() {
        assert_eq!(back.get(v.position), Some(v));
    }
    assert_eq!(back.label_table(), s.label_table());
    assert_eq!(save_scene(&back), bytes);
}

#[test]
fn labels_missing_from_the_table_are_rejected() {
    let mut s = random_scene(2, 50, 4, 0.05);
    mark_voxel(&mut s, VoxelId(0), PackedLabel::user(8).unwrap(), MarkMode::Force);
    assert!(load_scene(&save_scene(&s)).is_err());
}

#[test]
fn truncated_file_is_an_error() {
    let s = random_scene(1, 100, 5, 0.05);
    let bytes = save_scene(&s);
    assert!(load_scene(&bytes[..bytes.len() - 3]).is_err());
}
