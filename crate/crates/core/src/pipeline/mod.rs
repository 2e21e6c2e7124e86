//! Batch generation of paired videos: procedural scenes, preflight, paired
//! placement, optional clutter removal, simulation, rendering, output checks
//! and sharded runs with manifests.

mod config;
mod pair;
mod run;
mod scenegen;

pub use config::{
    ObjectPoolSpec, PhysicsParams, Primitive, RunConfig, SceneSpec, TaskParams, TaskWeights,
};
pub use pair::{
    generate_pair, inspect_pair, pair_dir_name, ObjectDescriptor, PairFiles, PairInspection, PairRecord, SceneDescriptor, PAIR_MANIFEST,
};
pub use run::{
    plan_shards, run, run_shard, RunContext, RunManifest, RunSummary, ShardManifest, ShardSummary,
    RUN_MANIFEST, SHARD_MANIFEST,
};
pub use scenegen::{generate_procedural_scene, GeneratedScene};

use std::path::PathBuf;

use crate::camera::Camera;
use crate::geometry::{box_mesh, cylinder_mesh, load_obj, uv_sphere, Bvh, GeometryError, TriMesh, Vec3};
use crate::physics::TaskKind;
use crate::render::{FrameBuffer, MaskFrame};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("shard disjointness violated: seed {0} assigned to more than one worker")]
    Disjointness(u64),
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
    let path = path.into();
    move |source| PipelineError::Io { path, source }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    pub name: String,
    /// Where the mesh came from: `primitive:<name>` or a file path.
    pub source: String,
    pub mesh: TriMesh,
}

/// Object meshes available to the generator, in configuration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPool {
    pub models: Vec<ObjectModel>,
}

impl ObjectPool {
    pub fn load(spec: &ObjectPoolSpec) -> Result<ObjectPool, PipelineError> {
        let mut models = Vec::new();
        for p in &spec.primitives {
            let mesh = match p {
                Primitive::Cube => box_mesh(Vec3::splat(-0.5), Vec3::splat(0.5)),
                Primitive::Sphere => uv_sphere(0.5, 24, 12),
                Primitive::Cylinder => cylinder_mesh(0.35, 1.0, 24),
            };
            models.push(ObjectModel {
                name: p.name().to_string(),
                source: format!("primitive:{}", p.name()),
                mesh,
            });
        }
        for path in &spec.obj_files {
            let mesh = load_obj(path)?.mesh;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "mesh".into());
            models.push(ObjectModel {
                name,
                source: path.display().to_string(),
                mesh,
            });
        }
        if models.is_empty() {
            return Err(PipelineError::Config("objects: pool is empty".into()));
        }
        Ok(ObjectPool { models })
    }
}

/// Coarse grid used by [`preflight`].
pub const PREFLIGHT_GRID: (u32, u32) = (16, 9);

/// Render-free suitability test of a camera for a task: enough of the view
/// must hit geometry, and ground tasks need visible upward surfaces.
pub fn preflight(scene: Option<&Bvh>, cam: &Camera, task: TaskKind) -> Result<(), &'static str> {
    let (gx, gy) = PREFLIGHT_GRID;
    let mut hits = 0u32;
    let mut upward = 0u32;
    for j in 0..gy {
        for i in 0..gx {
            let px = (i as f64 + 0.5) * cam.width as f64 / gx as f64;
            let py = (j as f64 + 0.5) * cam.height as f64 / gy as f64;
            let ray = cam.ray_through(px, py);
            let Some(hit) = scene.and_then(|s| s.ray_cast(&ray)) else {
                continue;
            };
            hits += 1;
            let mut n = hit.face_normal;
            if n.dot(ray.direction) > 0.0 {
                n = -n;
            }
            if n.dot(Vec3::UP) >= 0.95 {
                upward += 1;
            }
        }
    }
    if (hits as f64) < 0.3 * (gx * gy) as f64 {
        return Err("insufficient geometry coverage");
    }
    if task.is_ground() && (upward as f64) < 0.05 * hits as f64 {
        return Err("no support surface");
    }
    Ok(())
}

/// Expected shape of a rendered pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputSpec {
    pub frames: u32,
    pub width: u32,
    pub height: u32,
}

impl From<&RunConfig> for OutputSpec {
    fn from(cfg: &RunConfig) -> Self {
        OutputSpec {
            frames: cfg.frames,
            width: cfg.width,
            height: cfg.height,
        }
    }
}

/// Final gate on a rendered pair. Returns the first failed check.
pub fn canonical_output_check(
    frames_a: &[FrameBuffer],
    masks_a: &[MaskFrame],
    frames_b: &[FrameBuffer],
    masks_b: &[MaskFrame],
    spec: &OutputSpec,
) -> Result<(), &'static str> {
    let n = spec.frames as usize;
    if [frames_a.len(), masks_a.len(), frames_b.len(), masks_b.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err("frame count");
    }
    let dims_ok = frames_a
        .iter()
        .chain(frames_b)
        .all(|f| f.width == spec.width && f.height == spec.height && f.data.len() == (f.width * f.height * 3) as usize)
        && masks_a
            .iter()
            .chain(masks_b)
            .all(|m| m.width == spec.width && m.height == spec.height && m.data.len() == (m.width * m.height) as usize);
    if !dims_ok {
        return Err("resolution");
    }
    if !masks_a.iter().chain(masks_b).all(MaskFrame::is_binary) {
        return Err("mask not binary");
    }
    if n == 0 || masks_a[0].foreground_count() == 0 || masks_b[0].foreground_count() == 0 {
        return Err("object not visible at start");
    }
    Ok(())
}
