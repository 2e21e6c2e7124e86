//! Run configuration, loaded from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::physics::{SimConfig, TaskKind};
use crate::placement::PlacementConfig;
use crate::render::RenderSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub frames: u32,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    /// Vertical field of view in radians.
    pub vertical_fov: f64,
    pub task_weights: TaskWeights,
    pub no_hit_probability: f64,
    /// Placement rounds tried in no-hit mode before giving up on a seed.
    pub no_hit_attempts: u32,
    pub physics: PhysicsParams,
    pub task: TaskParams,
    pub placement: PlacementConfig,
    pub scene: SceneSpec,
    pub objects: ObjectPoolSpec,
    pub render: RenderSettings,
    /// Default output directory when none is given on the command line.
    pub output_root: Option<PathBuf>,
    /// Default inclusive seed range.
    pub seeds: Option<(u64, u64)>,
    pub workers: u32,
    /// Explicit per-worker seed lists; overrides the range split.
    pub shard_seeds: Option<Vec<Vec<u64>>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            frames: 81,
            fps: 16.0,
            width: 320,
            height: 180,
            vertical_fov: 0.9,
            task_weights: TaskWeights::default(),
            no_hit_probability: 0.5,
            no_hit_attempts: 12,
            physics: PhysicsParams::default(),
            task: TaskParams::default(),
            placement: PlacementConfig::default(),
            scene: SceneSpec::default(),
            objects: ObjectPoolSpec::default(),
            render: RenderSettings::default(),
            output_root: None,
            seeds: None,
            workers: 1,
            shard_seeds: None,
        }
    }
}

/// Relative task frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskWeights {
    pub drag: f64,
    pub throw: f64,
    pub roll: f64,
    pub drop: f64,
    #[serde(rename = "static")]
    pub static_: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        TaskWeights {
            drag: 9537.0,
            throw: 3113.0,
            roll: 3162.0,
            drop: 2867.0,
            static_: 1564.0,
        }
    }
}

impl TaskWeights {
    pub fn weight(&self, kind: TaskKind) -> f64 {
        match kind {
            TaskKind::Drag => self.drag,
            TaskKind::Throw => self.throw,
            TaskKind::Roll => self.roll,
            TaskKind::Drop => self.drop,
            TaskKind::Static => self.static_,
        }
    }

    pub fn only(kind: TaskKind) -> TaskWeights {
        let mut w = TaskWeights {
            drag: 0.0,
            throw: 0.0,
            roll: 0.0,
            drop: 0.0,
            static_: 0.0,
        };
        match kind {
            TaskKind::Drag => w.drag = 1.0,
            TaskKind::Throw => w.throw = 1.0,
            TaskKind::Roll => w.roll = 1.0,
            TaskKind::Drop => w.drop = 1.0,
            TaskKind::Static => w.static_ = 1.0,
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsParams {
    pub gravity: f64,
    pub substep_hz: u32,
    pub restitution: f64,
    pub friction_coefficient: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        let d = SimConfig::default();
        PhysicsParams {
            gravity: d.gravity,
            substep_hz: d.substep_hz,
            restitution: d.restitution,
            friction_coefficient: d.friction_coefficient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskParams {
    pub throw_speed: f64,
    pub roll_speed: f64,
    pub spring_k: f64,
    pub spring_c: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            throw_speed: 6.0,
            roll_speed: 2.0,
            spring_k: 50.0,
            spring_c: 10.0,
        }
    }
}

/// Procedural room parameters. Ranges are inclusive `(min, max)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub room_width: (f64, f64),
    pub room_depth: (f64, f64),
    pub room_height: (f64, f64),
    pub walls: bool,
    pub ceiling: bool,
    pub clutter_count: (u32, u32),
    /// Footprint edge length of clutter boxes, meters.
    pub clutter_size: (f64, f64),
    pub table_probability: f64,
    pub cameras: (u32, u32),
    pub eye_height: (f64, f64),
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            room_width: (5.0, 8.0),
            room_depth: (5.0, 8.0),
            room_height: (2.6, 3.2),
            walls: true,
            ceiling: false,
            clutter_count: (3, 7),
            clutter_size: (0.3, 0.9),
            table_probability: 0.3,
            cameras: (1, 4),
            eye_height: (1.2, 1.8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Cube,
    Sphere,
    Cylinder,
}

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Cube => "cube",
            Primitive::Sphere => "sphere",
            Primitive::Cylinder => "cylinder",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectPoolSpec {
    pub primitives: Vec<Primitive>,
    pub obj_files: Vec<PathBuf>,
}

impl Default for ObjectPoolSpec {
    fn default() -> Self {
        ObjectPoolSpec {
            primitives: vec![Primitive::Cube, Primitive::Sphere, Primitive::Cylinder],
            obj_files: Vec::new(),
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), errors: &mut Vec<String>) {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        errors.push(format!("{name}: expected 0 < min <= max, got ({lo}, {hi})"));
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, PipelineError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        RunConfig::from_toml_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            gravity: self.physics.gravity,
            substep_hz: self.physics.substep_hz,
            restitution: self.physics.restitution,
            friction_coefficient: self.physics.friction_coefficient,
            frames: self.frames,
            fps: self.fps,
        }
    }

    /// Collects every violated constraint into one diagnostic.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut errors = Vec::new();
        if let Err(e) = self.sim_config().validate() {
            errors.push(e.to_string());
        }
        if let Err(e) = self.placement.validate() {
            errors.push(e.to_string());
        }
        let weights = TaskKind::ALL.map(|k| self.task_weights.weight(k));
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !weights.iter().any(|w| *w > 0.0) {
            errors.push("task_weights: must be non-negative with at least one positive".into());
        }
        if !(0.0..=1.0).contains(&self.no_hit_probability) {
            errors.push(format!("no_hit_probability: {} outside [0, 1]", self.no_hit_probability));
        }
        if self.no_hit_attempts == 0 {
            errors.push("no_hit_attempts: must be positive".into());
        }
        if self.width < 16 || self.height < 16 {
            errors.push("width/height: must be at least 16".into());
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            errors.push("vertical_fov: must be in (0, pi)".into());
        }
        let t = &self.task;
        if ![t.throw_speed, t.roll_speed, t.spring_k, t.spring_c]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
        {
            errors.push("task: speeds and spring constants must be non-negative".into());
        }
        let s = &self.scene;
        check_range("scene.room_width", s.room_width, &mut errors);
        check_range("scene.room_depth", s.room_depth, &mut errors);
        check_range("scene.room_height", s.room_height, &mut errors);
        check_range("scene.clutter_size", s.clutter_size, &mut errors);
        check_range("scene.eye_height", s.eye_height, &mut errors);
        if s.room_width.0 < 2.0 || s.room_depth.0 < 2.0 {
            errors.push("scene: rooms must be at least 2 m wide and deep".into());
        }
        if s.eye_height.1 >= s.room_height.0 {
            errors.push("scene.eye_height: must stay below the lowest ceiling".into());
        }
        if s.clutter_count.0 > s.clutter_count.1 {
            errors.push("scene.clutter_count: min exceeds max".into());
        }
        if !(s.cameras.0 >= 1 && s.cameras.0 <= s.cameras.1) {
            errors.push("scene.cameras: expected 1 <= min <= max".into());
        }
        if !(0.0..=1.0).contains(&s.table_probability) {
            errors.push("scene.table_probability: outside [0, 1]".into());
        }
        if self.objects.primitives.is_empty() && self.objects.obj_files.is_empty() {
            errors.push("objects: pool is empty".into());
        }
        if self.workers == 0 {
            errors.push("workers: must be positive".into());
        }
        if let Some((a, b)) = self.seeds {
            if a > b {
                errors.push(format!("seeds: start {a} exceeds end {b}"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(errors.join("; ")))
        }
    }

    /// Configuration as recorded in the run manifest: everything needed to
    /// rerun, without the output location.
    pub fn recorded(&self) -> RunConfig {
        RunConfig {
            output_root: None,
            ..self.clone()
        }
    }

    /// SHA-256 over the canonical JSON of everything that shapes a pair.
    /// Output location and seed scheduling are left out, so a pair's bytes
    /// do not depend on how seeds were split across workers.
    pub fn hash(&self) -> String {
        let generation = RunConfig {
            output_root: None,
            seeds: None,
            workers: 1,
            shard_seeds: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&generation).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("framez = 3").unwrap_err();
        assert!(err.to_string().contains("framez"));
        assert!(RunConfig::from_toml_str("[physics]\nbounce = 1.0").is_err());
    }

    #[test]
    fn nested_sections_parse() {
        let cfg = RunConfig::from_toml_str(
            "width = 160\nheight = 90\n[task_weights]\nstatic = 2.0\ndrag = 0.0\n[scene]\nceiling = true\n",
        )
        .unwrap();
        assert_eq!(cfg.width, 160);
        assert_eq!(cfg.task_weights.static_, 2.0);
        assert!(cfg.scene.ceiling);
    }

    #[test]
    fn all_problems_are_reported_together() {
        let err = RunConfig::from_toml_str("no_hit_probability = 1.5\nworkers = 0").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no_hit_probability") && msg.contains("workers"), "{msg}");
    }

    #[test]
    fn hash_ignores_output_location_and_scheduling() {
        let a = RunConfig::default();
        let b = RunConfig {
            output_root: Some("/tmp/x".into()),
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let sharded = RunConfig {
            workers: 4,
            seeds: Some((0, 9)),
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), sharded.hash());
        let c = RunConfig {
            frames: 80,
            ..RunConfig::default()
        };
        assert_ne!(a.hash(), c.hash());
    }
}
