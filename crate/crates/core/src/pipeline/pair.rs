//! One seed in, one pair (or one rejection) out.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::run::RunContext;
use super::scenegen::generate_procedural_scene;
use super::{canonical_output_check, io_err, preflight, OutputSpec, PipelineError};
use crate::camera::Camera;
use crate::geometry::Vec3;
use crate::physics::{
    simulate, BodyState, PathShape, PathSpec, TaskKind, TaskSpec, Trajectory,
};
use crate::placement::{sample_pair, PlacementPair};
use crate::render::{
    encode_pgm, encode_ppm, frame_file_name, mask_file_name, read_frame_sequence, read_mask_sequence,
    render_video,
};
use crate::scenemod::{filter_scene, nominal_corridor, Scene};

pub const PAIR_MANIFEST: &str = "pair.manifest";

/// Offset tolerance and frame share used to accept no-hit pairs.
const NO_HIT_TOLERANCE: f64 = 0.05;
const NO_HIT_FRAME_SHARE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObjectEntry {
    pub name: String,
    pub object_id: u32,
    pub structural: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    /// Room width, depth and height in meters.
    pub room: (f64, f64, f64),
    pub objects: Vec<SceneObjectEntry>,
    /// Clutter removed for a no-hit pair.
    pub removed: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDescriptor {
    pub name: String,
    pub source: String,
    pub scale: f64,
    pub proxy_radius: f64,
    pub size_fraction: f64,
}

/// File names relative to the pair directory, in frame order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFiles {
    pub a_frames: Vec<String>,
    pub a_masks: Vec<String>,
    pub b_frames: Vec<String>,
    pub b_masks: Vec<String>,
}

impl PairFiles {
    fn new(frames: usize) -> PairFiles {
        let list = |side: &str, name: fn(usize) -> String| {
            (0..frames).map(|i| format!("{side}/{}", name(i))).collect()
        };
        PairFiles {
            a_frames: list("A", frame_file_name),
            a_masks: list("A", mask_file_name),
            b_frames: list("B", frame_file_name),
            b_masks: list("B", mask_file_name),
        }
    }
}

/// Everything needed to reproduce or audit one seed's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub seed: u64,
    pub config_hash: String,
    pub accepted: bool,
    pub rejection: Option<String>,
    pub frames: u32,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub scene: Option<SceneDescriptor>,
    pub camera_index: Option<usize>,
    pub camera: Option<Camera>,
    pub object: Option<ObjectDescriptor>,
    pub task: Option<TaskSpec>,
    pub placements: Option<PlacementPair>,
    /// True when the pair was generated against the unmodified scene.
    pub hit: Option<bool>,
    /// Placement rounds used (more than one only in no-hit mode).
    pub rounds: u32,
    /// Largest per-frame distance between `y_i` and `x_i + delta`.
    pub max_offset_deviation: Option<f64>,
    /// Share of frames where that distance is within 5 cm.
    pub offset_preserved_share: Option<f64>,
    /// Pair directory relative to the shard directory.
    pub dir: Option<String>,
    pub files: Option<PairFiles>,
}

impl PairRecord {
    fn new(seed: u64, ctx: &RunContext) -> PairRecord {
        let cfg = &ctx.config;
        PairRecord {
            seed,
            config_hash: ctx.config_hash.clone(),
            accepted: false,
            rejection: None,
            frames: cfg.frames,
            fps: cfg.fps,
            width: cfg.width,
            height: cfg.height,
            scene: None,
            camera_index: None,
            camera: None,
            object: None,
            task: None,
            placements: None,
            hit: None,
            rounds: 0,
            max_offset_deviation: None,
            offset_preserved_share: None,
            dir: None,
            files: None,
        }
    }

    fn reject(mut self, reason: impl Into<String>) -> PairRecord {
        self.accepted = false;
        self.rejection = Some(reason.into());
        self
    }

    /// Offset stored in the manifest, `y0 - x0`.
    pub fn delta(&self) -> Option<Vec3> {
        self.placements.map(|p| p.delta)
    }
}

pub fn pair_dir_name(seed: u64) -> String {
    format!("pair_{seed}")
}

fn drag_path<R: Rng + ?Sized>(rng: &mut R) -> PathSpec {
    let shape = match rng.random_range(0..3u32) {
        0 => PathShape::Circle {
            radius: rng.random_range(0.3..=0.8),
        },
        1 => PathShape::SCurve {
            amplitude: rng.random_range(0.15..=0.4),
            length: rng.random_range(0.8..=1.6),
            half_periods: rng.random_range(1..=3),
        },
        _ => PathShape::Spiral {
            a: rng.random_range(0.05..=0.15),
            b: rng.random_range(0.03..=0.08),
            turns: rng.random_range(1.0..=2.0),
        },
    };
    let angle = rng.random_range(0.0..TAU);
    PathSpec::new(shape, Vec3::ZERO, Vec3::new(angle.cos(), angle.sin(), 0.0))
        .expect("drawn path parameters are valid")
}

fn build_task<R: Rng + ?Sized>(rng: &mut R, kind: TaskKind, cam: &Camera, ctx: &RunContext) -> TaskSpec {
    let p = &ctx.config.task;
    let mut task = TaskSpec::new(kind, cam.forward);
    task.throw_speed = p.throw_speed;
    task.roll_speed = p.roll_speed;
    task.spring_k = p.spring_k;
    task.spring_c = p.spring_c;
    if kind == TaskKind::Drag {
        task.drag_path = Some(drag_path(rng));
    }
    task
}

/// Per-frame `|y_i - (x_i + delta)|`.
fn offset_deviations(a: &Trajectory, b: &Trajectory, delta: Vec3) -> Vec<f64> {
    a.positions()
        .zip(b.positions())
        .map(|(x, y)| (y - (x + delta)).length())
        .collect()
}

struct Simulated {
    pair: PlacementPair,
    scene: Scene,
    a: Trajectory,
    b: Trajectory,
    deviations: Vec<f64>,
}

/// Generates the pair for `seed` and writes it under `shard_dir`. Failures
/// are reported in the returned record; nothing is left on disk for them.
pub fn generate_pair(seed: u64, ctx: &RunContext, shard_dir: &Path) -> PairRecord {
    let cfg = &ctx.config;
    let mut record = PairRecord::new(seed, ctx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let generated = match generate_procedural_scene(&mut rng, &cfg.scene, cfg.width, cfg.height, cfg.vertical_fov) {
        Ok(g) => g,
        Err(e) => return record.reject(format!("scene: {e}")),
    };
    record.scene = Some(SceneDescriptor {
        room: generated.room,
        objects: generated
            .scene
            .objects()
            .iter()
            .map(|o| SceneObjectEntry {
                name: o.name.clone(),
                object_id: o.object_id,
                structural: o.structural,
            })
            .collect(),
        removed: Vec::new(),
        warnings: generated.warnings.clone(),
    });
    let cam_index = rng.random_range(0..generated.cameras.len());
    let cam = generated.cameras[cam_index];
    record.camera_index = Some(cam_index);
    record.camera = Some(cam);

    let weights = TaskKind::ALL.map(|k| cfg.task_weights.weight(k));
    let kind = TaskKind::ALL[WeightedIndex::new(weights)
        .expect("validated weights")
        .sample(&mut rng)];
    let model = &ctx.pool.models[rng.random_range(0..ctx.pool.models.len())];
    let task = build_task(&mut rng, kind, &cam, ctx);
    record.task = Some(task);
    let no_hit = rng.random_bool(cfg.no_hit_probability);
    record.hit = Some(!no_hit);

    let full = &generated.scene;
    if let Err(reason) = preflight(full.bvh(), &cam, kind) {
        return record.reject(format!("preflight: {reason}"));
    }
    let Some(full_bvh) = full.bvh() else {
        return record.reject("scene: empty");
    };

    let sim = cfg.sim_config();
    let rounds = if no_hit { cfg.no_hit_attempts } else { 1 };
    let mut outcome: Option<Simulated> = None;
    let mut last_failure = String::new();
    for round in 1..=rounds {
        record.rounds = round;
        let pair = match sample_pair(&mut rng, full_bvh, &cam, kind, &model.mesh, &cfg.placement) {
            Ok(p) => p,
            Err(e) => return record.reject(format!("placement: {e}")),
        };
        let scene = if no_hit {
            let filtered = nominal_corridor(&task, &pair, full, &sim)
                .map_err(|e| e.to_string())
                .and_then(|c| filter_scene(full, &c).map_err(|e| e.to_string()));
            match filtered {
                Ok(s) => s,
                Err(e) => return record.reject(format!("scene modification: {e}")),
            }
        } else {
            full.clone()
        };
        let run = |start: Vec3| simulate(&BodyState::at_rest(start, pair.proxy_radius), &task, scene.bvh(), &sim);
        let (a, b) = match (run(pair.source.position), run(pair.target.position)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return record.reject(format!("simulation: {e}")),
        };
        let deviations = offset_deviations(&a, &b, pair.delta);
        let preserved = deviations.iter().filter(|&&d| d <= NO_HIT_TOLERANCE).count() as f64
            / deviations.len() as f64;
        if no_hit && preserved < NO_HIT_FRAME_SHARE {
            last_failure = format!("no-hit offset not preserved after {round} rounds");
            continue;
        }
        outcome = Some(Simulated {
            pair,
            scene,
            a,
            b,
            deviations,
        });
        break;
    }
    let Some(sim_out) = outcome else {
        return record.reject(format!("simulation: {last_failure}"));
    };

    let pair = sim_out.pair;
    record.placements = Some(pair);
    record.object = Some(ObjectDescriptor {
        name: model.name.clone(),
        source: model.source.clone(),
        scale: pair.scale,
        proxy_radius: pair.proxy_radius,
        size_fraction: pair.size_fraction,
    });
    let max_dev = sim_out.deviations.iter().copied().fold(0.0, f64::max);
    let share = sim_out.deviations.iter().filter(|&&d| d <= NO_HIT_TOLERANCE).count() as f64
        / sim_out.deviations.len() as f64;
    record.max_offset_deviation = Some(max_dev);
    record.offset_preserved_share = Some(share);
    if let Some(desc) = record.scene.as_mut() {
        let kept: Vec<u32> = sim_out.scene.objects().iter().map(|o| o.object_id).collect();
        desc.removed = full
            .objects()
            .iter()
            .filter(|o| !kept.contains(&o.object_id))
            .map(|o| o.name.clone())
            .collect();
    }

    let bvh = sim_out.scene.bvh();
    let (frames_a, masks_a) = render_video(bvh, &model.mesh, pair.scale, &sim_out.a, &cam, &cfg.render);
    let (frames_b, masks_b) = render_video(bvh, &model.mesh, pair.scale, &sim_out.b, &cam, &cfg.render);
    if let Err(reason) = canonical_output_check(&frames_a, &masks_a, &frames_b, &masks_b, &OutputSpec::from(cfg)) {
        return record.reject(format!("output check: {reason}"));
    }

    let name = pair_dir_name(seed);
    let dir = shard_dir.join(&name);
    record.accepted = true;
    record.dir = Some(name);
    record.files = Some(PairFiles::new(frames_a.len()));
    let written = write_pair(&dir, &record, [(&frames_a, &masks_a), (&frames_b, &masks_b)]);
    if let Err(e) = written {
        let _ = fs::remove_dir_all(&dir);
        let mut r = record.reject(format!("io: {e}"));
        r.dir = None;
        r.files = None;
        return r;
    }
    record
}

type Video<'a> = (&'a Vec<crate::render::FrameBuffer>, &'a Vec<crate::render::MaskFrame>);

fn write_pair(dir: &Path, record: &PairRecord, videos: [Video<'_>; 2]) -> Result<(), PipelineError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    for (side, (frames, masks)) in ["A", "B"].into_iter().zip(videos) {
        let sub = dir.join(side);
        fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        for (i, (f, m)) in frames.iter().zip(masks.iter()).enumerate() {
            let fp = sub.join(frame_file_name(i));
            fs::write(&fp, encode_ppm(f)).map_err(io_err(&fp))?;
            let mp = sub.join(mask_file_name(i));
            fs::write(&mp, encode_pgm(m)).map_err(io_err(&mp))?;
        }
    }
    let path = dir.join(PAIR_MANIFEST);
    let json = serde_json::to_string_pretty(record).expect("record serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))
}

/// A written pair re-read from disk.
#[derive(Debug, Clone)]
pub struct PairInspection {
    pub record: PairRecord,
    /// Files found on disk: A frames, A masks, B frames, B masks.
    pub counts: [usize; 4],
    pub check: Result<(), &'static str>,
}

/// Loads `dir/pair.manifest` and the A/B videos, and reruns the canonical
/// output check against the manifest's frame count and resolution.
pub fn inspect_pair(dir: &Path) -> Result<PairInspection, PipelineError> {
    let path = dir.join(PAIR_MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let record: PairRecord = serde_json::from_str(&text).map_err(|e| PipelineError::Manifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let fa = read_frame_sequence(dir.join("A"))?;
    let ma = read_mask_sequence(dir.join("A"))?;
    let fb = read_frame_sequence(dir.join("B"))?;
    let mb = read_mask_sequence(dir.join("B"))?;
    let spec = OutputSpec {
        frames: record.frames,
        width: record.width,
        height: record.height,
    };
    let check = if record.accepted {
        canonical_output_check(&fa, &ma, &fb, &mb, &spec)
    } else {
        Err("pair was rejected")
    };
    Ok(PairInspection {
        counts: [fa.len(), ma.len(), fb.len(), mb.len()],
        record,
        check,
    })
}
