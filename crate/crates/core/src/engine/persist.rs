//! Session files.
//!
//! ```text
//! "SPSS" | u32 version | 4 x (u64 length | payload)
//! ```
//!
//! Payloads in order: settings (JSON), scene (SPVX), forest (SPRF), and the
//! remaining state (JSON: rig, camera, history, mode, label, counters).
//! Integers are little-endian.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EngineSettings, Mode, SectionCounters, Session};
use crate::forest::{load_forest, save_forest, CheckpointError, RandomForest};
use crate::interaction::{CommandManager, LabelCommand};
use crate::label::LabelId;
use crate::rendering::{CameraId, CameraRig};
use crate::scene::{load_scene, save_scene, Reader, VoxelScene};

pub const SESSION_MAGIC: &[u8; 4] = b"SPSS";
pub const SESSION_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("offset 0: not a session file")]
    BadMagic,
    #[error("offset 4: unsupported session version {0}")]
    UnsupportedVersion(u32),
    #[error("offset {0}: truncated")]
    Truncated(usize),
    #[error("offset {offset}: {section}: {what}")]
    Section { section: &'static str, offset: usize, what: String },
    #[error("offset {0}: trailing bytes")]
    Trailing(usize),
}

pub(crate) struct Parts<'a> {
    pub scene: &'a VoxelScene,
    pub rig: &'a CameraRig,
    pub camera: CameraId,
    pub forest: &'a RandomForest,
    pub history: &'a CommandManager<LabelCommand>,
    pub current_label: LabelId,
    pub mode: Mode,
    pub frame: u64,
    pub settings: &'a EngineSettings,
    pub sections: SectionCounters,
}

#[derive(Serialize, Deserialize)]
struct State {
    rig: CameraRig,
    camera: CameraId,
    history: CommandManager<LabelCommand>,
    current_label: LabelId,
    mode: Mode,
    frame: u64,
    sections: SectionCounters,
}

pub fn save_session(session: &Session) -> Vec<u8> {
    let p = session.parts();
    let state = State {
        rig: p.rig.clone(),
        camera: p.camera,
        history: p.history.clone(),
        current_label: p.current_label,
        mode: p.mode,
        frame: p.frame,
        sections: p.sections,
    };
    let blobs = [
        serde_json::to_vec(p.settings).expect("settings serialise"),
        save_scene(p.scene),
        save_forest(p.forest),
        serde_json::to_vec(&state).expect("state serialises"),
    ];
    let mut out = Vec::with_capacity(8 + blobs.iter().map(|b| b.len() + 8).sum::<usize>());
    out.extend_from_slice(SESSION_MAGIC);
    out.extend_from_slice(&SESSION_VERSION.to_le_bytes());
    for b in &blobs {
        out.extend_from_slice(&(b.len() as u64).to_le_bytes());
        out.extend_from_slice(b);
    }
    out
}

fn blob<'a>(r: &mut Reader<'a>) -> Result<(usize, &'a [u8]), SessionError> {
    let at = r.offset();
    let len = r.u64().ok_or(SessionError::Truncated(at))?;
    let start = r.offset();
    let len = usize::try_from(len).map_err(|_| SessionError::Truncated(at))?;
    let bytes = r.take(len).ok_or(SessionError::Truncated(at))?;
    Ok((start, bytes))
}

fn json_err(section: &'static str, start: usize) -> impl Fn(serde_json::Error) -> SessionError {
    move |e| SessionError::Section { section, offset: start + json_offset(&e), what: e.to_string() }
}

/// serde_json reports line/column; sessions hold single-line JSON.
fn json_offset(e: &serde_json::Error) -> usize {
    e.column().saturating_sub(1)
}

pub fn load_session(bytes: &[u8]) -> Result<Session, SessionError> {
    let mut r = Reader::new(bytes);
    if r.take(4) != Some(SESSION_MAGIC.as_slice()) {
        return Err(SessionError::BadMagic);
    }
    let version = r.u32().ok_or(SessionError::Truncated(4))?;
    if version != SESSION_VERSION {
        return Err(SessionError::UnsupportedVersion(version));
    }

    let (at, b) = blob(&mut r)?;
    let settings: EngineSettings = serde_json::from_slice(b).map_err(json_err("settings", at))?;
    settings
        .validate()
        .map_err(|e| SessionError::Section { section: "settings", offset: at, what: e.to_string() })?;

    let (at, b) = blob(&mut r)?;
    let scene = load_scene(b)
        .map_err(|e| SessionError::Section { section: "scene", offset: at + e.offset, what: e.kind.to_string() })?;

    let (at, b) = blob(&mut r)?;
    let forest = load_forest(b).map_err(|e| {
        let (off, what) = match &e {
            CheckpointError::BadMagic => (0, e.to_string()),
            CheckpointError::UnsupportedVersion(_) => (4, e.to_string()),
            CheckpointError::Truncated(o) => (*o, e.to_string()),
            CheckpointError::Corrupt { offset, .. } => (*offset, e.to_string()),
        };
        SessionError::Section { section: "forest", offset: at + off, what }
    })?;

    let (at, b) = blob(&mut r)?;
    let state: State = serde_json::from_slice(b).map_err(json_err("state", at))?;
    if state.rig.pose(state.camera).is_err() {
        return Err(SessionError::Section { section: "state", offset: at, what: "camera not in rig".into() });
    }
    if usize::from(state.current_label) != 0 && !scene.has_label(state.current_label) {
        return Err(SessionError::Section { section: "state", offset: at, what: "current label not in scene".into() });
    }
    if r.remaining() != 0 {
        return Err(SessionError::Trailing(r.offset()));
    }
    Ok(Session::from_parts(
        scene,
        state.rig,
        state.camera,
        forest,
        state.history,
        state.current_label,
        state.mode,
        state.frame,
        settings,
        state.sections,
    ))
}
