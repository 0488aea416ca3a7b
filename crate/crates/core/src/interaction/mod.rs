//! Selectors, selection transformers and the undo/redo command system.

mod command;
mod selection;

pub use command::{Command, CommandError, CommandManager, LabelCommand, MarkCommand, SeqCommand};
pub use selection::{pick, pick_radius, touch_selection, voxel_to_cube};
