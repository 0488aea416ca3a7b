use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::PackedLabel;
use crate::scene::{mark_voxel, MarkMode, VoxelPos, VoxelScene};

/// An undoable action on some state.
pub trait Command {
    type State;
    fn description(&self) -> String;
    fn execute(&mut self, state: &mut Self::State);
    fn undo(&mut self, state: &mut Self::State);
}

/// Executes its parts in order and undoes them in reverse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqCommand<C> {
    pub description: String,
    pub commands: Vec<C>,
}

impl<C: Command> Command for SeqCommand<C> {
    type State = C::State;

    fn description(&self) -> String {
        self.description.clone()
    }

    fn execute(&mut self, state: &mut C::State) {
        for c in &mut self.commands {
            c.execute(state);
        }
    }

    fn undo(&mut self, state: &mut C::State) {
        for c in self.commands.iter_mut().rev() {
            c.undo(state);
        }
    }
}

/// Marks a selection with a label. The labels it overwrote are captured on
/// each execution and restored with FORCE-mode marking on undo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkCommand {
    pub positions: Vec<VoxelPos>,
    pub label: PackedLabel,
    pub mode: MarkMode,
    #[serde(default)]
    previous: Vec<(VoxelPos, PackedLabel)>,
}

impl MarkCommand {
    pub fn new(positions: Vec<VoxelPos>, label: PackedLabel, mode: MarkMode) -> Self {
        MarkCommand { positions, label, mode, previous: Vec::new() }
    }

    /// Voxels this command changed the last time it ran.
    pub fn changed(&self) -> usize {
        self.previous.len()
    }
}

impl Command for MarkCommand {
    type State = VoxelScene;

    fn description(&self) -> String {
        format!("mark {} voxels as {} ({:?})", self.positions.len(), self.label.id(), self.label.group())
    }

    fn execute(&mut self, scene: &mut VoxelScene) {
        self.previous.clear();
        for &p in &self.positions {
            let Some(id) = scene.id_of(p) else { continue };
            let old = scene.label(id);
            if mark_voxel(scene, id, self.label, self.mode) {
                self.previous.push((p, old));
            }
        }
    }

    fn undo(&mut self, scene: &mut VoxelScene) {
        for &(p, old) in self.previous.iter().rev() {
            if let Some(id) = scene.id_of(p) {
                mark_voxel(scene, id, old, MarkMode::Force);
            }
        }
    }
}

/// Serialisable labelling command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelCommand {
    Mark(MarkCommand),
    Seq(SeqCommand<LabelCommand>),
}

impl Command for LabelCommand {
    type State = VoxelScene;

    fn description(&self) -> String {
        match self {
            LabelCommand::Mark(c) => c.description(),
            LabelCommand::Seq(c) => c.description(),
        }
    }

    fn execute(&mut self, scene: &mut VoxelScene) {
        match self {
            LabelCommand::Mark(c) => c.execute(scene),
            LabelCommand::Seq(c) => c.execute(scene),
        }
    }

    fn undo(&mut self, scene: &mut VoxelScene) {
        match self {
            LabelCommand::Mark(c) => c.undo(scene),
            LabelCommand::Seq(c) => c.undo(scene),
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CommandError {
    #[error("undo requires a non-empty executed stack")]
    NothingToUndo,
    #[error("redo requires a non-empty undone stack")]
    NothingToRedo,
}

/// Two stacks with the semantics of the paper's Table 2. Stack tops are the
/// ends of the vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandManager<C> {
    executed: Vec<C>,
    undone: Vec<C>,
}

impl<C> Default for CommandManager<C> {
    fn default() -> Self {
        CommandManager { executed: Vec::new(), undone: Vec::new() }
    }
}

impl<C: Command> CommandManager<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn can_undo(&self) -> bool {
        !self.executed.is_empty()
    }

    pub fn can_redo(&self) -> bool {
        !self.undone.is_empty()
    }

    pub fn executed_count(&self) -> usize {
        self.executed.len()
    }

    pub fn undone_count(&self) -> usize {
        self.undone.len()
    }

    pub fn execute_command(&mut self, mut c: C, state: &mut C::State) {
        self.undone.clear();
        c.execute(state);
        self.executed.push(c);
    }

    /// Contract violation (empty stack) is reported and leaves state untouched.
    pub fn undo(&mut self, state: &mut C::State) -> Result<(), CommandError> {
        let mut c = self.executed.pop().ok_or(CommandError::NothingToUndo)?;
        c.undo(state);
        self.undone.push(c);
        Ok(())
    }

    pub fn redo(&mut self, state: &mut C::State) -> Result<(), CommandError> {
        let mut c = self.undone.pop().ok_or(CommandError::NothingToRedo)?;
        c.execute(state);
        self.executed.push(c);
        Ok(())
    }

    pub fn reset(&mut self) {
        self.executed.clear();
        self.undone.clear();
    }

    /// Executed commands, oldest first.
    pub fn executed(&self) -> &[C] {
        &self.executed
    }

    /// Undone commands, oldest undo first.
    pub fn undone(&self) -> &[C] {
        &self.undone
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Appends to a log; undo pops.
    struct Push(i32);

    impl Command for Push {
        type State = Vec<i32>;
        fn description(&self) -> String {
            format!("push {}", self.0)
        }
        fn execute(&mut self, s: &mut Vec<i32>) {
            s.push(self.0);
        }
        fn undo(&mut self, s: &mut Vec<i32>) {
            assert_eq!(s.pop(), Some(self.0));
        }
    }

    #[test]
    fn table2_algebra() {
        let mut m = CommandManager::new();
        let mut s = Vec::new();
        assert_eq!(m.undo(&mut s), Err(CommandError::NothingToUndo));
        assert_eq!(m.redo(&mut s), Err(CommandError::NothingToRedo));
        m.execute_command(Push(1), &mut s);
        m.undo(&mut s).unwrap();
        assert_eq!((m.executed_count(), m.undone_count()), (0, 1));
        assert!(s.is_empty());
        m.execute_command(Push(2), &mut s);
        assert!(!m.can_redo());
        m.execute_command(Push(3), &mut s);
        m.undo(&mut s).unwrap();
        m.undo(&mut s).unwrap();
        m.redo(&mut s).unwrap();
        assert_eq!(s, vec![2]);
        m.reset();
        assert_eq!((m.executed_count(), m.undone_count()), (0, 0));
    }

    #[test]
    fn seq_undoes_in_reverse() {
        let mut c = SeqCommand { description: "two".into(), commands: vec![Push(1), Push(2)] };
        let mut s = Vec::new();
        c.execute(&mut s);
        c.undo(&mut s);
        assert!(s.is_empty());
    }
}
