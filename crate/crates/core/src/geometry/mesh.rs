use serde::{Deserialize, Serialize};

use super::vec::{Quat, Vec3};
use super::GeometryError;

/// Faces whose twice-area is below this fraction of the summed squared edge
/// lengths are degenerate (coincident or collinear vertices).
const DEGENERATE_RATIO: f64 = 1e-12;

/// Half-line (segment when `t_max` is finite) with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_max: f64,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3, t_max: f64) -> Result<Ray, GeometryError> {
        let direction = direction
            .try_normalize()
            .ok_or(GeometryError::InvalidRay("zero-length direction"))?;
        if !(t_max > 0.0) || !origin.is_finite() {
            return Err(GeometryError::InvalidRay("t_max must be positive"));
        }
        Ok(Ray {
            origin,
            direction,
            t_max,
        })
    }

    pub fn infinite(origin: Vec3, direction: Vec3) -> Result<Ray, GeometryError> {
        Ray::new(origin, direction, f64::INFINITY)
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn from_points<I: IntoIterator<Item = Vec3>>(points: I) -> Aabb {
        points.into_iter().fold(Aabb::EMPTY, |b, p| b.grow(p))
    }

    pub fn grow(self, p: Vec3) -> Aabb {
        Aabb {
            min: self.min.min(p),
            max: self.max.max(p),
        }
    }

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    pub fn contains_box(&self, o: &Aabb) -> bool {
        self.contains(o.min) && self.contains(o.max)
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: Vec3) -> f64 {
        let d = (self.min - p).max(p - self.max).max(Vec3::ZERO);
        d.length_squared()
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x
            && self.max.x >= o.min.x
            && self.min.y <= o.max.y
            && self.max.y >= o.min.y
            && self.min.z <= o.max.z
            && self.max.z >= o.min.z
    }

    /// Slab test. Returns the entry parameter when the ray overlaps the box
    /// within `[0, t_limit]`. Conservative: the far bound is padded so that
    /// triangles lying on a box face are never culled by rounding.
    pub fn ray_entry(&self, origin: Vec3, inv_dir: Vec3, t_limit: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_limit;
        for axis in 0..3 {
            let a = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let b = (self.max[axis] - origin[axis]) * inv_dir[axis];
            // NaN arises for origin on a slab plane with zero direction; f64::min/max
            // drop NaN operands, which leaves that axis unconstrained.
            let near = a.min(b);
            let far = a.max(b) * (1.0 + 4.0 * f64::EPSILON);
            t0 = t0.max(near);
            t1 = t1.min(far);
        }
        (t0 <= t1).then_some(t0)
    }
}

/// Validated triangle mesh with per-face unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
}

/// Result of mesh validation: the mesh plus how many faces were dropped.
#[derive(Debug, Clone)]
pub struct MeshBuild {
    pub mesh: TriMesh,
    pub dropped_faces: usize,
}

impl TriMesh {
    /// Validates indices, drops zero-area faces and computes face normals
    /// (counter-clockwise winding faces the viewer).
    pub fn build(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<MeshBuild, GeometryError> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(GeometryError::MalformedMesh(format!(
                "non-finite vertex {v:?}"
            )));
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(faces.len());
        let mut normals = Vec::with_capacity(faces.len());
        let mut dropped = 0;
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i as usize >= n) {
                return Err(GeometryError::MalformedMesh(format!(
                    "face {fi} references vertex {bad} but only {n} vertices exist"
                )));
            }
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            let cr = (b - a).cross(c - a);
            let edges2 = (b - a).length_squared() + (c - a).length_squared() + (c - b).length_squared();
            if cr.length() <= DEGENERATE_RATIO * edges2 {
                dropped += 1;
                continue;
            }
            kept.push(*f);
            normals.push(cr.normalize());
        }
        if kept.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        Ok(MeshBuild {
            mesh: TriMesh {
                vertices,
                faces: kept,
                normals,
            },
            dropped_faces: dropped,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Applies `v' = R(s v) + t` to every vertex and re-derives normals.
    pub fn transformed(
        &self,
        scale: f64,
        rotation: Quat,
        translation: Vec3,
    ) -> Result<TriMesh, GeometryError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(GeometryError::InvalidScale(scale));
        }
        let vertices: Vec<Vec3> = self
            .vertices
            .iter()
            .map(|&v| rotation.rotate(v * scale) + translation)
            .collect();
        let normals = self
            .faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| vertices[i as usize]);
                (b - a).cross(c - a).normalize()
            })
            .collect();
        Ok(TriMesh {
            vertices,
            faces: self.faces.clone(),
            normals,
        })
    }

    /// Concatenates meshes into one (indices rebased).
    pub fn merge<'a, I: IntoIterator<Item = &'a TriMesh>>(meshes: I) -> Option<TriMesh> {
        let mut out = TriMesh {
            vertices: Vec::new(),
            faces: Vec::new(),
            normals: Vec::new(),
        };
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.faces
                .extend(m.faces.iter().map(|f| f.map(|i| i + base)));
            out.normals.extend_from_slice(&m.normals);
        }
        (!out.faces.is_empty()).then_some(out)
    }
}

/// Free-function form of [`TriMesh::build`].
pub fn build_mesh(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<MeshBuild, GeometryError> {
    TriMesh::build(vertices, faces)
}

pub fn transform_mesh(
    mesh: &TriMesh,
    uniform_scale: f64,
    rotation: Quat,
    translation: Vec3,
) -> Result<TriMesh, GeometryError> {
    mesh.transformed(uniform_scale, rotation, translation)
}

/// Axis-aligned box mesh with outward-facing normals.
pub fn box_mesh(min: Vec3, max: Vec3) -> TriMesh {
    let v = vec![
        Vec3::new(min.x, min.y, min.z),
        Vec3::new(max.x, min.y, min.z),
        Vec3::new(max.x, max.y, min.z),
        Vec3::new(min.x, max.y, min.z),
        Vec3::new(min.x, min.y, max.z),
        Vec3::new(max.x, min.y, max.z),
        Vec3::new(max.x, max.y, max.z),
        Vec3::new(min.x, max.y, max.z),
    ];
    let f = vec![
        [0, 2, 1],
        [0, 3, 2], // -z
        [4, 5, 6],
        [4, 6, 7], // +z
        [0, 1, 5],
        [0, 5, 4], // -y
        [2, 3, 7],
        [2, 7, 6], // +y
        [1, 2, 6],
        [1, 6, 5], // +x
        [0, 4, 7],
        [0, 7, 3], // -x
    ];
    TriMesh::build(v, f).expect("box is valid").mesh
}

/// Rectangle spanned by `corner`, `corner + u`, `corner + u + v`, `corner + v`.
/// The normal is `u × v`.
pub fn quad_mesh(corner: Vec3, u: Vec3, v: Vec3) -> TriMesh {
    let verts = vec![corner, corner + u, corner + u + v, corner + v];
    TriMesh::build(verts, vec![[0, 1, 2], [0, 2, 3]])
        .expect("quad is valid")
        .mesh
}

/// UV sphere centered at the origin.
pub fn uv_sphere(radius: f64, segments: u32, rings: u32) -> TriMesh {
    let mut v = vec![Vec3::new(0.0, 0.0, radius)];
    for r in 1..rings {
        let phi = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segments {
            let theta = std::f64::consts::TAU * s as f64 / segments as f64;
            v.push(Vec3::new(
                radius * phi.sin() * theta.cos(),
                radius * phi.sin() * theta.sin(),
                radius * phi.cos(),
            ));
        }
    }
    v.push(Vec3::new(0.0, 0.0, -radius));
    let south = (v.len() - 1) as u32;
    let ring = |r: u32, s: u32| 1 + (r - 1) * segments + (s % segments);
    let mut f = Vec::new();
    for s in 0..segments {
        f.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b) = (ring(r, s), ring(r, s + 1));
            let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
            f.push([a, c, d]);
            f.push([a, d, b]);
        }
    }
    for s in 0..segments {
        f.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    TriMesh::build(v, f).expect("sphere is valid").mesh
}

/// Closed cylinder along +Z centered at the origin.
pub fn cylinder_mesh(radius: f64, height: f64, segments: u32) -> TriMesh {
    let h = height * 0.5;
    let mut v = vec![Vec3::new(0.0, 0.0, -h), Vec3::new(0.0, 0.0, h)];
    for s in 0..segments {
        let t = std::f64::consts::TAU * s as f64 / segments as f64;
        v.push(Vec3::new(radius * t.cos(), radius * t.sin(), -h));
        v.push(Vec3::new(radius * t.cos(), radius * t.sin(), h));
    }
    let bot = |s: u32| 2 + 2 * (s % segments);
    let top = |s: u32| 3 + 2 * (s % segments);
    let mut f = Vec::new();
    for s in 0..segments {
        f.push([0, bot(s + 1), bot(s)]);
        f.push([1, top(s), top(s + 1)]);
        f.push([bot(s), bot(s + 1), top(s + 1)]);
        f.push([bot(s), top(s + 1), top(s)]);
    }
    TriMesh::build(v, f).expect("cylinder is valid").mesh
}
