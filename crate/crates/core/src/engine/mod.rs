//! Modes, the frame loop and sessions (paper §2.1, Fig. 4, Table 1).
//!
//! Scene reconstruction is replaced by loading a scene, and the camera is
//! driven by API motions instead of tracking. Every frame drains queued
//! inputs, advances any attached touch sequence, raycasts, runs the section
//! selected by the mode and composites the output image.

mod config;
mod persist;
mod text;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ConfigError, EngineSettings, ENV_PREFIX};
pub use persist::{load_session, save_session, SessionError, SESSION_MAGIC, SESSION_VERSION};
pub use text::{CommandParseError, TextCommand};

use crate::features::{compute_descriptors, inspect_voxel, FeatureError, FeatureInspection, NormalPolicy};
use crate::forest::{inverse_frequency_weights, Example, ForestError, ForestStats, RandomForest};
use crate::interaction::{pick_radius, touch_selection, voxel_to_cube, CommandManager, LabelCommand, MarkCommand};
use crate::label::{LabelGroup, LabelId, PackedLabel, MAX_LABELS, UNLABELLED_ID};
use crate::propagation::{propagate_step, revert_to_user_labels};
use crate::rendering::{
    composite_frame, raycast, CameraId, CameraPose, CameraRig, Intrinsics, Motion, RaycastOptions, RaycastResult,
    RgbFrame, RigError,
};
use crate::sampling::{sample_for_prediction, sample_for_training};
use crate::scene::{mark_voxel, LabelEntry, MarkMode, Rgb, SceneError, VoxelPos, VoxelScene};
use crate::touch::{RecordedSequence, TouchDetector};
use crate::Vec3;

/// Application modes of Table 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    #[default]
    Normal,
    Propagation,
    Training,
    Prediction,
    TrainingAndPrediction,
    FeatureInspection,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Normal,
        Mode::Propagation,
        Mode::Training,
        Mode::Prediction,
        Mode::TrainingAndPrediction,
        Mode::FeatureInspection,
    ];

    /// The section this mode runs on frame number `frame` (counted from 0).
    pub fn section(self, frame: u64) -> Option<Section> {
        match self {
            Mode::Normal => None,
            Mode::Propagation => Some(Section::Propagation),
            Mode::Training => Some(Section::Training),
            Mode::Prediction => Some(Section::Prediction),
            Mode::TrainingAndPrediction if frame.is_multiple_of(2) => Some(Section::Training),
            Mode::TrainingAndPrediction => Some(Section::Prediction),
            Mode::FeatureInspection => Some(Section::FeatureInspection),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Normal => "normal",
            Mode::Propagation => "propagation",
            Mode::Training => "training",
            Mode::Prediction => "prediction",
            Mode::TrainingAndPrediction => "training_and_prediction",
            Mode::FeatureInspection => "feature_inspection",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = CommandParseError;

    /// Case-insensitive; `-`, `_` and spaces are interchangeable.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Mode::ALL.into_iter().find(|m| m.name() == norm).ok_or_else(|| CommandParseError::UnknownMode(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Propagation,
    Training,
    Prediction,
    FeatureInspection,
}

/// A queued user input, applied at the start of the next frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Input {
    Command { text: String },
    Pick { x: usize, y: usize, radius: Option<u32> },
    Camera { motion: Motion },
    SetMode { mode: Mode },
    AddLabel { name: String, color: Rgb },
    Inspect { x: usize, y: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub message: String,
    /// Accepted but had no effect (e.g. undo with empty history).
    pub warning: bool,
}

impl Ack {
    fn ok(message: impl Into<String>) -> Self {
        Ack { message: message.into(), warning: false }
    }

    fn warn(message: impl Into<String>) -> Self {
        Ack { message: message.into(), warning: true }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Parse(#[from] CommandParseError),
    #[error("no label named {0:?}")]
    UnknownLabel(String),
    #[error("no current label to mark with")]
    NoCurrentLabel,
    #[error("pixel ({x}, {y}) outside the {width}x{height} view")]
    PixelOutside { x: usize, y: usize, width: usize, height: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Rig(#[from] RigError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("label space is full ({MAX_LABELS} ids)")]
    LabelSpaceFull,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionTimings {
    pub input_ms: f64,
    pub touch_ms: f64,
    pub raycast_ms: f64,
    pub section_ms: f64,
    pub composite_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub inputs: usize,
    pub hits: usize,
    pub sampled: usize,
    pub trained: usize,
    pub splits: usize,
    pub predicted: usize,
    /// Voxels whose label changed through FOREST-group marking.
    pub marked: usize,
    pub propagated: usize,
    pub touch_points: usize,
    pub touch_marked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame: u64,
    pub mode: Mode,
    pub section: Option<Section>,
    pub timings: SectionTimings,
    pub counts: FrameCounts,
    pub acks: Vec<Result<Ack, String>>,
    pub settings: EngineSettings,
}

impl FrameReport {
    /// The report with timings zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> FrameReport {
        FrameReport { timings: SectionTimings::default(), ..self.clone() }
    }
}

/// How many times each section has run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionCounters {
    pub propagation: u64,
    pub training: u64,
    pub prediction: u64,
    pub feature_inspection: u64,
}

impl SectionCounters {
    fn bump(&mut self, s: Section) {
        match s {
            Section::Propagation => self.propagation += 1,
            Section::Training => self.training += 1,
            Section::Prediction => self.prediction += 1,
            Section::FeatureInspection => self.feature_inspection += 1,
        }
    }
}

/// A recorded touch sequence replayed one frame per engine frame.
#[derive(Clone, Debug)]
pub struct TouchInput {
    pub sequence: RecordedSequence,
    pub detector: TouchDetector,
    pub next: usize,
}

/// Observable session summary for the API.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub frame: u64,
    pub mode: Mode,
    pub current_label: LabelId,
    pub current_label_name: Option<String>,
    pub propagate: bool,
    pub can_undo: bool,
    pub can_redo: bool,
    pub voxels: usize,
    pub labelled: GroupCounts,
    pub sections: SectionCounters,
    pub camera: CameraPose,
    pub width: usize,
    pub height: usize,
    pub pending_inputs: usize,
    pub touch_frames_left: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub user: usize,
    pub propagated: usize,
    pub forest: usize,
}

struct Snapshot {
    labels: Vec<PackedLabel>,
    label_table: Vec<LabelEntry>,
    history: CommandManager<LabelCommand>,
    rig: CameraRig,
    mode: Mode,
    current_label: LabelId,
    settings: EngineSettings,
    pending: VecDeque<Input>,
    touch_next: Option<usize>,
    sections: SectionCounters,
}

/// One labelling session: the single writer of its scene and forest.
///
/// The forest is not part of the frame snapshot. Sections perform all
/// fallible work before they touch it, so a failed frame never leaves it
/// half-updated.
#[derive(Clone, Debug)]
pub struct Session {
    scene: VoxelScene,
    rig: CameraRig,
    camera: CameraId,
    forest: RandomForest,
    history: CommandManager<LabelCommand>,
    current_label: LabelId,
    mode: Mode,
    frame: u64,
    settings: EngineSettings,
    pending: VecDeque<Input>,
    touch: Option<TouchInput>,
    sections: SectionCounters,
    last_raycast: Option<RaycastResult>,
    /// View the cached raycast was taken from; geometry never changes, so an
    /// unchanged view reuses it.
    raycast_view: Option<(CameraPose, Intrinsics)>,
    last_image: Option<RgbFrame>,
    last_inspection: Option<FeatureInspection>,
    inspect_pixel: Option<(usize, usize)>,
}

/// A camera looking at the scene centre from above one corner.
pub fn default_pose(scene: &VoxelScene) -> CameraPose {
    let (lo, hi) = scene.bounds().map(|(a, b)| (scene.world_position(a), scene.world_position(b))).unwrap_or_default();
    let centre = (lo + hi) / 2.0;
    let extent = (hi - lo).norm().max(0.5);
    let eye = centre + Vec3::new(-0.55, -0.65, 0.55).normalize() * extent * 0.9;
    CameraPose::look_at(eye, centre, Vec3::z()).expect("eye is off the view axis")
}

impl Session {
    pub fn new(scene: VoxelScene, settings: EngineSettings) -> Result<Self, EngineError> {
        let pose = default_pose(&scene);
        Self::with_pose(scene, settings, pose)
    }

    pub fn with_pose(scene: VoxelScene, settings: EngineSettings, pose: CameraPose) -> Result<Self, EngineError> {
        settings.validate()?;
        let forest = RandomForest::new(settings.forest.clone(), MAX_LABELS)?;
        let mut rig = CameraRig::new();
        let camera = rig.add_simple(pose);
        Ok(Session {
            scene,
            rig,
            camera,
            forest,
            history: CommandManager::new(),
            current_label: UNLABELLED_ID,
            mode: Mode::Normal,
            frame: 0,
            settings,
            pending: VecDeque::new(),
            touch: None,
            sections: SectionCounters::default(),
            last_raycast: None,
            raycast_view: None,
            last_image: None,
            last_inspection: None,
            inspect_pixel: None,
        })
    }

    pub fn scene(&self) -> &VoxelScene {
        &self.scene
    }

    pub fn forest(&self) -> &RandomForest {
        &self.forest
    }

    pub fn history(&self) -> &CommandManager<LabelCommand> {
        &self.history
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    /// Replaces the settings. Forest settings only take effect for new
    /// sessions; the running forest keeps its own.
    pub fn set_settings(&mut self, settings: EngineSettings) -> Result<(), EngineError> {
        settings.validate()?;
        self.settings = settings;
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn frame_number(&self) -> u64 {
        self.frame
    }

    pub fn current_label(&self) -> LabelId {
        self.current_label
    }

    pub fn sections(&self) -> SectionCounters {
        self.sections
    }

    pub fn camera_pose(&self) -> CameraPose {
        self.rig.pose(self.camera).expect("session camera exists")
    }

    pub fn set_camera_pose(&mut self, pose: CameraPose) -> Result<(), EngineError> {
        Ok(self.rig.set_pose(self.camera, pose)?)
    }

    pub fn rig(&self) -> &CameraRig {
        &self.rig
    }

    pub fn last_image(&self) -> Option<&RgbFrame> {
        self.last_image.as_ref()
    }

    pub fn last_raycast(&self) -> Option<&RaycastResult> {
        self.last_raycast.as_ref()
    }

    pub fn last_inspection(&self) -> Option<&FeatureInspection> {
        self.last_inspection.as_ref()
    }

    pub fn forest_stats(&self) -> ForestStats {
        self.forest.stats()
    }

    pub fn attach_touch(&mut self, sequence: RecordedSequence, detector: TouchDetector) {
        self.touch = Some(TouchInput { sequence, detector, next: 0 });
    }

    pub fn enqueue(&mut self, input: Input) {
        self.pending.push_back(input);
    }

    pub fn pending_inputs(&self) -> usize {
        self.pending.len()
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics::for_size(self.settings.width, self.settings.height)
    }

    pub fn state(&self) -> SessionState {
        let mut labelled = GroupCounts::default();
        for v in self.scene.voxels() {
            if v.label.is_unlabelled() {
                continue;
            }
            match v.label.group() {
                LabelGroup::User => labelled.user += 1,
                LabelGroup::Propagated => labelled.propagated += 1,
                LabelGroup::Forest => labelled.forest += 1,
            }
        }
        SessionState {
            frame: self.frame,
            mode: self.mode,
            current_label: self.current_label,
            current_label_name: self.scene.label_entry(self.current_label).map(|e| e.name.clone()),
            propagate: self.settings.propagate,
            can_undo: self.history.can_undo(),
            can_redo: self.history.can_redo(),
            voxels: self.scene.len(),
            labelled,
            sections: self.sections,
            camera: self.camera_pose(),
            width: self.settings.width,
            height: self.settings.height,
            pending_inputs: self.pending.len(),
            touch_frames_left: self.touch.as_ref().map(|t| t.sequence.frames.len().saturating_sub(t.next)),
        }
    }

    pub fn add_label(&mut self, name: &str, color: Rgb) -> Result<LabelId, EngineError> {
        if self.scene.label_table().len() >= MAX_LABELS {
            return Err(EngineError::LabelSpaceFull);
        }
        Ok(self.scene.add_label_auto(name, color)?)
    }

    /// Parses and applies one text command immediately.
    pub fn apply_command(&mut self, text: &str) -> Result<Ack, EngineError> {
        let cmd: TextCommand = text.parse()?;
        match cmd {
            TextCommand::Label(name) => {
                let id = self.scene.label_by_name(&name).ok_or(EngineError::UnknownLabel(name.clone()))?;
                self.current_label = id;
                Ok(Ack::ok(format!("current label {name} ({id})")))
            }
            TextCommand::Mode(m) => {
                self.mode = m;
                Ok(Ack::ok(format!("mode {m}")))
            }
            TextCommand::Undo => match self.history.undo(&mut self.scene) {
                Ok(()) => Ok(Ack::ok("undone")),
                Err(e) => Ok(Ack::warn(e.to_string())),
            },
            TextCommand::Redo => match self.history.redo(&mut self.scene) {
                Ok(()) => Ok(Ack::ok("redone")),
                Err(e) => Ok(Ack::warn(e.to_string())),
            },
            TextCommand::Propagate(on) => {
                self.settings.propagate = on;
                Ok(Ack::ok(format!("propagation {}", if on { "on" } else { "off" })))
            }
        }
    }

    fn ensure_raycast(&mut self) {
        let stale = self
            .last_raycast
            .as_ref()
            .is_none_or(|r| r.width() != self.settings.width || r.height() != self.settings.height);
        if stale {
            self.last_raycast = Some(self.raycast_now());
            self.raycast_view = Some((self.camera_pose(), self.intrinsics()));
        }
    }

    fn take_raycast(&mut self) -> RaycastResult {
        let view = (self.camera_pose(), self.intrinsics());
        match self.last_raycast.take() {
            Some(rc) if self.raycast_view == Some(view) => rc,
            _ => {
                self.raycast_view = Some(view);
                self.raycast_now()
            }
        }
    }

    fn raycast_now(&self) -> RaycastResult {
        raycast(&self.scene, &self.camera_pose(), &self.intrinsics(), &RaycastOptions::default())
    }

    /// Marks the voxels under a pixel brush with the current label as one
    /// undoable command. Uses the most recent frame's raycast.
    pub fn pick(&mut self, x: usize, y: usize, radius: Option<u32>) -> Result<Ack, EngineError> {
        if self.current_label == UNLABELLED_ID {
            return Err(EngineError::NoCurrentLabel);
        }
        let (w, h) = (self.settings.width, self.settings.height);
        if x >= w || y >= h {
            return Err(EngineError::PixelOutside { x, y, width: w, height: h });
        }
        let radius = radius.unwrap_or(self.settings.pick_radius);
        let cube = self.settings.cube_radius;
        self.ensure_raycast();
        let rc = self.last_raycast.as_ref().expect("raycast ensured");
        let picked = pick_radius(rc, &self.scene, x, y, radius);
        let selection = voxel_to_cube(&picked, cube);
        let n = self.mark_user(selection)?;
        Ok(Ack::ok(format!("marked {n} voxels")))
    }

    fn mark_user(&mut self, selection: Vec<VoxelPos>) -> Result<usize, EngineError> {
        if selection.is_empty() {
            return Ok(0);
        }
        let label = PackedLabel::user(self.current_label).map_err(|_| EngineError::NoCurrentLabel)?;
        let cmd = LabelCommand::Mark(MarkCommand::new(selection, label, MarkMode::Normal));
        self.history.execute_command(cmd, &mut self.scene);
        Ok(match self.history.executed().last() {
            Some(LabelCommand::Mark(m)) => m.changed(),
            _ => 0,
        })
    }

    pub fn apply_input(&mut self, input: Input) -> Result<Ack, EngineError> {
        match input {
            Input::Command { text } => self.apply_command(&text),
            Input::Pick { x, y, radius } => self.pick(x, y, radius),
            Input::Camera { motion } => {
                self.rig.move_camera(self.camera, motion)?;
                Ok(Ack::ok("camera moved"))
            }
            Input::SetMode { mode } => {
                self.mode = mode;
                Ok(Ack::ok(format!("mode {mode}")))
            }
            Input::AddLabel { name, color } => {
                let id = self.add_label(&name, color)?;
                Ok(Ack::ok(format!("label {name} ({id})")))
            }
            Input::Inspect { x, y } => {
                self.inspect_pixel = Some((x, y));
                Ok(Ack::ok(format!("inspecting pixel ({x}, {y})")))
            }
        }
    }

    /// Reverts propagated voxels of the current label (paper §3.4).
    pub fn revert_propagation(&mut self) -> usize {
        revert_to_user_labels(&mut self.scene, self.current_label)
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            labels: self.scene.label_field(),
            label_table: self.scene.label_table().to_vec(),
            history: self.history.clone(),
            rig: self.rig.clone(),
            mode: self.mode,
            current_label: self.current_label,
            settings: self.settings.clone(),
            pending: self.pending.clone(),
            touch_next: self.touch.as_ref().map(|t| t.next),
            sections: self.sections,
        }
    }

    fn restore(&mut self, s: Snapshot) {
        self.scene.restore_label_table(s.label_table);
        self.scene.restore_label_field(&s.labels);
        self.history = s.history;
        self.rig = s.rig;
        self.mode = s.mode;
        self.current_label = s.current_label;
        self.settings = s.settings;
        self.pending = s.pending;
        if let (Some(t), Some(n)) = (self.touch.as_mut(), s.touch_next) {
            t.next = n;
        }
        self.sections = s.sections;
        self.last_raycast = None;
        self.raycast_view = None;
    }

    /// Runs one frame. On error the session is rolled back to its state at
    /// the start of the frame.
    pub fn frame(&mut self) -> Result<FrameReport, EngineError> {
        let snap = self.snapshot();
        match self.run_frame() {
            Ok(r) => Ok(r),
            Err(e) => {
                self.restore(snap);
                Err(e)
            }
        }
    }

    fn frame_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.settings.seed);
        rng.set_stream(self.frame);
        rng
    }

    fn run_frame(&mut self) -> Result<FrameReport, EngineError> {
        let t_start = Instant::now();
        let mut timings = SectionTimings::default();
        let mut counts = FrameCounts::default();

        // input processing; each input is atomic and reports its own result
        let mut acks = Vec::new();
        while let Some(input) = self.pending.pop_front() {
            counts.inputs += 1;
            acks.push(self.apply_input(input).map_err(|e| e.to_string()));
        }
        timings.input_ms = ms_since(t_start);

        let t = Instant::now();
        self.touch_step(&mut counts)?;
        timings.touch_ms = ms_since(t);

        let t = Instant::now();
        let rc = self.take_raycast();
        counts.hits = rc.hit_count();
        timings.raycast_ms = ms_since(t);

        let section = self.mode.section(self.frame);
        let t = Instant::now();
        if let Some(s) = section {
            let mut rng = self.frame_rng();
            match s {
                Section::Propagation => {
                    if self.settings.propagate {
                        counts.propagated =
                            propagate_step(&mut self.scene, &rc, self.current_label, &self.settings.propagation);
                    }
                }
                Section::Training => self.training_section(&rc, &mut rng, &mut counts)?,
                Section::Prediction => self.prediction_section(&rc, &mut rng, &mut counts)?,
                Section::FeatureInspection => self.inspection_section(&rc)?,
            }
            self.sections.bump(s);
        }
        timings.section_ms = ms_since(t);

        let t = Instant::now();
        self.last_image = Some(composite_frame(&rc, &self.scene, &self.settings.composite));
        self.last_raycast = Some(rc);
        timings.composite_ms = ms_since(t);
        timings.total_ms = ms_since(t_start);

        let report = FrameReport {
            frame: self.frame,
            mode: self.mode,
            section,
            timings,
            counts,
            acks,
            settings: self.settings.clone(),
        };
        self.frame += 1;
        Ok(report)
    }

    fn feature_settings(&self) -> crate::features::FeatureSettings {
        let mut fs = self.settings.features;
        if let NormalPolicy::Fit { .. } = fs.normals {
            let p = self.camera_pose().position;
            fs.normals = NormalPolicy::Fit { toward: [p.x, p.y, p.z] };
        }
        fs
    }

    fn training_section(&mut self, rc: &RaycastResult, rng: &mut ChaCha8Rng, counts: &mut FrameCounts) -> Result<(), EngineError> {
        let labels: Vec<LabelId> = self.scene.label_table().iter().map(|e| e.id).collect();
        let ss = self.settings.sampling;
        let picked = sample_for_training(rc, &self.scene, &labels, ss.training_quota, ss.train_on_forest_labels, rng);
        let (positions, ids): (Vec<VoxelPos>, Vec<LabelId>) =
            picked.iter().flat_map(|(l, ps)| ps.iter().map(move |&p| (p, *l))).unzip();
        counts.sampled = positions.len();
        let descriptors = compute_descriptors(&self.scene, &positions, &self.feature_settings());
        let examples: Vec<Example> = descriptors
            .into_iter()
            .zip(ids)
            .filter_map(|(d, l)| d.ok().map(|d| Example::new(d.shared(), l)))
            .collect();
        self.forest.add_examples(&examples)?;
        counts.trained = examples.len();
        if self.settings.reweight {
            if !examples.is_empty() || self.forest.class_weights().is_none() {
                let w = inverse_frequency_weights(self.forest.class_totals());
                self.forest.set_class_weights(Some(w))?;
            }
        } else if self.forest.class_weights().is_some() {
            self.forest.set_class_weights(None)?;
        }
        counts.splits = self.forest.split_step();
        Ok(())
    }

    fn prediction_section(&mut self, rc: &RaycastResult, rng: &mut ChaCha8Rng, counts: &mut FrameCounts) -> Result<(), EngineError> {
        if !self.forest.is_trained() {
            return Ok(());
        }
        let positions = sample_for_prediction(rc, &self.scene, self.settings.sampling.prediction_count, rng);
        counts.sampled = positions.len();
        let (n, marked) = self.predict_positions(&positions)?;
        counts.predicted = n;
        counts.marked = marked;
        Ok(())
    }

    /// Predicts and FOREST-marks `positions`; returns (predicted, changed).
    /// Repeated positions and USER voxels (which the marker would keep) are
    /// evaluated once or not at all.
    fn predict_positions(&mut self, positions: &[VoxelPos]) -> Result<(usize, usize), EngineError> {
        let mut unique: Vec<VoxelPos> = positions
            .iter()
            .copied()
            .filter(|&p| self.scene.get(p).is_some_and(|v| !v.label.group().is_user()))
            .collect();
        unique.sort_unstable_by_key(|p| p.canonical_key());
        unique.dedup();
        let positions = &unique;
        let descriptors = compute_descriptors(&self.scene, positions, &self.feature_settings());
        let mut kept = Vec::with_capacity(positions.len());
        let mut values = Vec::with_capacity(positions.len());
        for (p, d) in positions.iter().zip(&descriptors) {
            if let Ok(d) = d {
                kept.push(*p);
                values.push(d.values());
            }
        }
        let labels = self.forest.predict_labels(&values)?;
        let mut marked = 0;
        for (p, l) in kept.iter().zip(labels) {
            if l == UNLABELLED_ID {
                continue;
            }
            let id = self.scene.id_of(*p).expect("sampled voxels exist");
            if mark_voxel(&mut self.scene, id, PackedLabel::forest(l).expect("label in range"), MarkMode::Normal) {
                marked += 1;
            }
        }
        Ok((kept.len(), marked))
    }

    /// Predicts every voxel that does not carry a user or propagated label,
    /// in chunks. Returns the number of voxels changed.
    pub fn predict_all(&mut self) -> Result<usize, EngineError> {
        if !self.forest.is_trained() {
            return Ok(0);
        }
        let targets: Vec<VoxelPos> = self
            .scene
            .voxels()
            .iter()
            .filter(|v| v.label.is_unlabelled() || v.label.group() == LabelGroup::Forest)
            .map(|v| v.position)
            .collect();
        let mut changed = 0;
        for chunk in targets.chunks(4096) {
            changed += self.predict_positions(chunk)?.1;
        }
        Ok(changed)
    }

    fn inspection_section(&mut self, rc: &RaycastResult) -> Result<(), EngineError> {
        let (x, y) = self.inspect_pixel.unwrap_or((rc.width() / 2, rc.height() / 2));
        let Some(pos) = (x < rc.width() && y < rc.height()).then(|| rc.position(&self.scene, x, y)).flatten() else {
            self.last_inspection = None;
            return Ok(());
        };
        self.last_inspection = Some(inspect_voxel(&self.scene, pos, &self.feature_settings())?);
        Ok(())
    }

    /// Advances the attached touch sequence by one frame and marks the
    /// touched voxels as one command.
    fn touch_step(&mut self, counts: &mut FrameCounts) -> Result<(), EngineError> {
        let Some(t) = self.touch.as_mut() else { return Ok(()) };
        let Some(f) = t.sequence.frames.get(t.next) else { return Ok(()) };
        t.next += 1;
        let rc = raycast(&self.scene, &f.pose, &t.sequence.intrinsics, &RaycastOptions::default());
        let out = t.detector.detect(&f.depth, rc.depth());
        counts.touch_points = out.touch_points.len();
        if out.touch_points.is_empty() || self.current_label == UNLABELLED_ID {
            return Ok(());
        }
        let selection = touch_selection(&rc, &self.scene, &out.touch_points);
        counts.touch_marked = self.mark_user(selection)?;
        Ok(())
    }

    pub(crate) fn parts(&self) -> persist::Parts<'_> {
        persist::Parts {
            scene: &self.scene,
            rig: &self.rig,
            camera: self.camera,
            forest: &self.forest,
            history: &self.history,
            current_label: self.current_label,
            mode: self.mode,
            frame: self.frame,
            settings: &self.settings,
            sections: self.sections,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        scene: VoxelScene,
        rig: CameraRig,
        camera: CameraId,
        forest: RandomForest,
        history: CommandManager<LabelCommand>,
        current_label: LabelId,
        mode: Mode,
        frame: u64,
        settings: EngineSettings,
        sections: SectionCounters,
    ) -> Session {
        Session {
            scene,
            rig,
            camera,
            forest,
            history,
            current_label,
            mode,
            frame,
            settings,
            pending: VecDeque::new(),
            touch: None,
            sections,
            last_raycast: None,
            raycast_view: None,
            last_image: None,
            last_inspection: None,
            inspect_pixel: None,
        }
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}
