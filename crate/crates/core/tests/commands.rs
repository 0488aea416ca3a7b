mod common;

use proptest::prelude::*;

use common::checks;
use paintbox_core::interaction::{CommandError, CommandManager, LabelCommand, MarkCommand};
use paintbox_core::presets::random_scene;
use paintbox_core::scene::{mark_voxel, MarkMode};
use paintbox_core::{LabelGroup, PackedLabel, VoxelId};

#[test]
fn hundred_commands_undo_to_initial() {
    let (ok, detail) = checks::full_undo();
    assert!(ok, "{detail}");
}

#[test]
fn stack_laws_under_fuzzing() {
    let (ok, detail) = checks::stack_laws();
    assert!(ok, "{detail}");
}

#[test]
fn empty_stacks_report_errors() {
    let mut scene = random_scene(0, 10, 2, 0.05);
    let mut m: CommandManager<LabelCommand> = CommandManager::new();
    assert!(matches!(m.undo(&mut scene), Err(CommandError::NothingToUndo)));
    assert!(matches!(m.redo(&mut scene), Err(CommandError::NothingToRedo)));
}

#[test]
fn execute_clears_redo_stack() {
    let mut scene = random_scene(1, 50, 3, 0.05);
    let p = scene.voxels()[0].position;
    let mut m = CommandManager::new();
    let mark = |id| LabelCommand::Mark(MarkCommand::new(vec![p], PackedLabel::user(id).unwrap(), MarkMode::Normal));
    m.execute_command(mark(1), &mut scene);
    m.undo(&mut scene).unwrap();
    assert!(m.can_redo());
    m.execute_command(mark(2), &mut scene);
    assert!(!m.can_redo());
    assert_eq!(scene.label(VoxelId(0)), PackedLabel::user(2).unwrap());
}

fn any_label() -> impl Strategy<Value = PackedLabel> {
    (0u8..32, 0usize..3).prop_map(|(id, g)| {
        // unlabelled only exists in the PROPAGATED group
        let g = if id == 0 { 0 } else { g };
        PackedLabel::new(id, [LabelGroup::Propagated, LabelGroup::User, LabelGroup::Forest][g]).unwrap()
    })
}

proptest! {
    #[test]
    fn normal_marker_protects_user_labels(old in any_label(), new in any_label()) {
        let mut scene = random_scene(2, 1, 1, 0.05);
        mark_voxel(&mut scene, VoxelId(0), old, MarkMode::Force);
        mark_voxel(&mut scene, VoxelId(0), new, MarkMode::Normal);
        let got = scene.label(VoxelId(0));
        let writes = new.group().is_user() || !old.group().is_user();
        prop_assert_eq!(got, if writes { new } else { old });
    }

    #[test]
    fn force_marker_always_writes(old in any_label(), new in any_label()) {
        let mut scene = random_scene(2, 1, 1, 0.05);
        mark_voxel(&mut scene, VoxelId(0), old, MarkMode::Force);
        mark_voxel(&mut scene, VoxelId(0), new, MarkMode::Force);
        prop_assert_eq!(scene.label(VoxelId(0)), new);
    }

    #[test]
    fn undo_then_redo_is_identity(seed in 0u64..500, n in 1usize..30) {
        let mut scene = random_scene(seed, 100, 3, 0.05);
        let mut m = CommandManager::new();
        for i in 0..n {
            let p = scene.voxels()[(i * 7 + seed as usize) % scene.len()].position;
            let c = LabelCommand::Mark(MarkCommand::new(vec![p], PackedLabel::user((i % 5 + 1) as u8).unwrap(), MarkMode::Normal));
            m.execute_command(c, &mut scene);
        }
        let after = scene.label_field();
        m.undo(&mut scene).unwrap();
        m.redo(&mut scene).unwrap();
        prop_assert_eq!(scene.label_field(), after);
    }
}
