//! Triangle meshes, bounding boxes and a BVH for exact ray casts and
//! clearance queries. Right-handed, +Z up, meters.

mod bvh;
mod mesh;
mod obj;
mod vec;

pub use bvh::{
    build_bvh, clearance, closest_point_on_triangle, intersect_triangle, ray_cast, Bvh, BvhNode,
    HitRecord, NearestPoint, Triangle, MAX_LEAF_FACES, RAY_EPSILON,
};
pub use mesh::{
    box_mesh, build_mesh, cylinder_mesh, quad_mesh, transform_mesh, uv_sphere, Aabb, MeshBuild,
    Ray, TriMesh,
};
pub use obj::{load_obj, parse_obj};
pub use vec::{Quat, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("malformed mesh: {0}")]
    MalformedMesh(String),
    #[error("mesh has no usable faces")]
    EmptyMesh,
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("invalid ray: {0}")]
    InvalidRay(&'static str),
    #[error("OBJ line {line}: {message}")]
    Ingestion { line: usize, message: String },
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
