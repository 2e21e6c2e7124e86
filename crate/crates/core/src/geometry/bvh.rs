//! Binary bounding volume hierarchy over triangles, split at the median
//! centroid along the longest axis.

use super::mesh::{Aabb, Ray, TriMesh};
use super::vec::Vec3;
use super::GeometryError;

pub const MAX_LEAF_FACES: usize = 4;
/// Hits closer than this are ignored to avoid self-intersection at contacts.
pub const RAY_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRecord {
    pub t: f64,
    pub point: Vec3,
    pub face_normal: Vec3,
    pub face_index: u32,
    pub object_id: u32,
}

/// Closest surface point to a query location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestPoint {
    pub distance: f64,
    pub point: Vec3,
    pub face_normal: Vec3,
    pub face_index: u32,
    pub object_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub vertices: [Vec3; 3],
    pub normal: Vec3,
    pub face_index: u32,
    pub object_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BvhNode {
    Leaf { aabb: Aabb, start: u32, count: u32 },
    Inner { aabb: Aabb, left: u32, right: u32 },
}

impl BvhNode {
    pub fn aabb(&self) -> &Aabb {
        match self {
            BvhNode::Leaf { aabb, .. } | BvhNode::Inner { aabb, .. } => aabb,
        }
    }
}

/// Immutable acceleration structure. Triangles are stored in leaf order.
#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    triangles: Vec<Triangle>,
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Result<Bvh, GeometryError> {
        Bvh::build_tagged(&[(mesh, 0)])
    }

    /// Builds over several meshes at once, tagging every triangle with its
    /// mesh's object id. Face indices run consecutively across the parts.
    pub fn build_tagged(parts: &[(&TriMesh, u32)]) -> Result<Bvh, GeometryError> {
        let mut triangles = Vec::new();
        for (mesh, object_id) in parts {
            for f in 0..mesh.face_count() {
                triangles.push(Triangle {
                    vertices: mesh.triangle(f),
                    normal: mesh.normals()[f],
                    face_index: triangles.len() as u32,
                    object_id: *object_id,
                });
            }
        }
        if triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let mut builder = Builder {
            nodes: Vec::with_capacity(2 * triangles.len() / MAX_LEAF_FACES + 1),
            centroids: triangles
                .iter()
                .map(|t| (t.vertices[0] + t.vertices[1] + t.vertices[2]) / 3.0)
                .collect(),
            triangles: &triangles,
        };
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        builder.build(&mut order, 0);
        let nodes = builder.nodes;
        let triangles = order.iter().map(|&i| triangles[i as usize]).collect();
        Ok(Bvh { nodes, triangles })
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounds(&self) -> Aabb {
        *self.nodes[0].aabb()
    }

    /// Faces of every leaf, in node order.
    pub fn leaf_faces(&self) -> Vec<Vec<u32>> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                BvhNode::Leaf { start, count, .. } => Some(
                    self.triangles[*start as usize..(*start + *count) as usize]
                        .iter()
                        .map(|t| t.face_index)
                        .collect(),
                ),
                BvhNode::Inner { .. } => None,
            })
            .collect()
    }

    /// Nearest hit with `t` in `(RAY_EPSILON, ray.t_max]`; equal-`t` hits
    /// resolve to the lowest face index.
    pub fn ray_cast(&self, ray: &Ray) -> Option<HitRecord> {
        let inv = Vec3::new(
            1.0 / ray.direction.x,
            1.0 / ray.direction.y,
            1.0 / ray.direction.z,
        );
        let mut best: Option<(f64, u32, usize)> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let limit = best.map_or(ray.t_max, |b| b.0);
            match &self.nodes[ni as usize] {
                BvhNode::Leaf { aabb, start, count } => {
                    if aabb.ray_entry(ray.origin, inv, limit).is_none() {
                        continue;
                    }
                    for k in *start as usize..(*start + *count) as usize {
                        let tri = &self.triangles[k];
                        if let Some(t) = intersect_triangle(ray, &tri.vertices) {
                            let better = match best {
                                None => true,
                                Some((bt, bf, _)) => t < bt || (t == bt && tri.face_index < bf),
                            };
                            if better {
                                best = Some((t, tri.face_index, k));
                            }
                        }
                    }
                }
                BvhNode::Inner { aabb, left, right } => {
                    if aabb.ray_entry(ray.origin, inv, limit).is_none() {
                        continue;
                    }
                    let tl = self.nodes[*left as usize].aabb().ray_entry(ray.origin, inv, limit);
                    let tr = self.nodes[*right as usize].aabb().ray_entry(ray.origin, inv, limit);
                    match (tl, tr) {
                        (Some(a), Some(b)) => {
                            // push the farther child first so the nearer is visited next
                            if a <= b {
                                stack.push(*right);
                                stack.push(*left);
                            } else {
                                stack.push(*left);
                                stack.push(*right);
                            }
                        }
                        (Some(_), None) => stack.push(*left),
                        (None, Some(_)) => stack.push(*right),
                        (None, None) => {}
                    }
                }
            }
        }
        best.map(|(t, _, k)| {
            let tri = &self.triangles[k];
            HitRecord {
                t,
                point: ray.at(t),
                face_normal: tri.normal,
                face_index: tri.face_index,
                object_id: tri.object_id,
            }
        })
    }

    /// Closest point on any triangle to `p`.
    pub fn nearest(&self, p: Vec3) -> NearestPoint {
        let mut best_d2 = f64::INFINITY;
        let mut best: Option<(Vec3, usize)> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.aabb().distance_squared(p) > best_d2 {
                continue;
            }
            match node {
                BvhNode::Leaf { start, count, .. } => {
                    for k in *start as usize..(*start + *count) as usize {
                        let tri = &self.triangles[k];
                        let q = closest_point_on_triangle(p, &tri.vertices);
                        let d2 = (p - q).length_squared();
                        let better = match best {
                            None => true,
                            Some((_, bk)) => {
                                d2 < best_d2
                                    || (d2 == best_d2
                                        && tri.face_index < self.triangles[bk].face_index)
                            }
                        };
                        if better {
                            best_d2 = d2;
                            best = Some((q, k));
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    let dl = self.nodes[*left as usize].aabb().distance_squared(p);
                    let dr = self.nodes[*right as usize].aabb().distance_squared(p);
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        let (point, k) = best.expect("bvh is never empty");
        let tri = &self.triangles[k];
        NearestPoint {
            distance: best_d2.sqrt(),
            point,
            face_normal: tri.normal,
            face_index: tri.face_index,
            object_id: tri.object_id,
        }
    }

    /// Distance from `center` to the surface minus `radius`; negative means
    /// a sphere of that radius penetrates the mesh.
    pub fn clearance(&self, center: Vec3, radius: f64) -> f64 {
        self.nearest(center).distance - radius
    }
}

struct Builder<'a> {
    nodes: Vec<BvhNode>,
    centroids: Vec<Vec3>,
    triangles: &'a [Triangle],
}

impl Builder<'_> {
    fn build(&mut self, order: &mut [u32], start: u32) -> u32 {
        let aabb = order
            .iter()
            .flat_map(|&i| self.triangles[i as usize].vertices)
            .fold(Aabb::EMPTY, Aabb::grow);
        let idx = self.nodes.len() as u32;
        if order.len() <= MAX_LEAF_FACES {
            self.nodes.push(BvhNode::Leaf {
                aabb,
                start,
                count: order.len() as u32,
            });
            return idx;
        }
        let cbounds = Aabb::from_points(order.iter().map(|&i| self.centroids[i as usize]));
        let axis = cbounds.extent().max_axis();
        let centroids = &self.centroids;
        order.sort_by(|&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        // placeholder, patched once both children exist
        self.nodes.push(BvhNode::Inner {
            aabb,
            left: 0,
            right: 0,
        });
        let mid = order.len() / 2;
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build(lo, start);
        let right = self.build(hi, start + mid as u32);
        self.nodes[idx as usize] = BvhNode::Inner { aabb, left, right };
        idx
    }
}

pub fn build_bvh(mesh: &TriMesh) -> Result<Bvh, GeometryError> {
    Bvh::build(mesh)
}

pub fn ray_cast(bvh: &Bvh, ray: &Ray) -> Option<HitRecord> {
    bvh.ray_cast(ray)
}

pub fn clearance(bvh: &Bvh, center: Vec3, radius: f64) -> f64 {
    bvh.clearance(center, radius)
}

/// Möller–Trumbore, two-sided, with inclusive barycentric bounds so rays
/// through shared edges hit at least one of the adjacent triangles.
/// Returns `t` within `(RAY_EPSILON, ray.t_max]`.
pub fn intersect_triangle(ray: &Ray, v: &[Vec3; 3]) -> Option<f64> {
    let e1 = v[1] - v[0];
    let e2 = v[2] - v[0];
    let pvec = ray.direction.cross(e2);
    let det = e1.dot(pvec);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - v[0];
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let w = ray.direction.dot(qvec) * inv_det;
    if w < 0.0 || u + w > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    (t > RAY_EPSILON && t <= ray.t_max).then_some(t)
}

/// Closest point on triangle `v` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Vec3, v: &[Vec3; 3]) -> Vec3 {
    let [a, b, c] = *v;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    // interior: project onto the supporting plane
    let n = ab.cross(ac).normalize();
    p - n * ap.dot(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::quad_mesh;

    fn floor() -> Bvh {
        Bvh::build(&quad_mesh(
            Vec3::new(-10.0, -10.0, 0.0),
            Vec3::new(20.0, 0.0, 0.0),
            Vec3::new(0.0, 20.0, 0.0),
        ))
        .unwrap()
    }

    #[test]
    fn single_triangle_is_single_leaf() {
        let m = TriMesh::build(vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 2]])
            .unwrap()
            .mesh;
        let bvh = Bvh::build(&m).unwrap();
        assert_eq!(bvh.nodes().len(), 1);
        assert!(matches!(bvh.nodes()[0], BvhNode::Leaf { count: 1, .. }));
    }

    #[test]
    fn straight_down_onto_floor() {
        let ray = Ray::infinite(Vec3::Z, -Vec3::Z).unwrap();
        let hit = floor().ray_cast(&ray).unwrap();
        assert_eq!(hit.t, 1.0);
        assert_eq!(hit.face_normal, Vec3::Z);
        assert_eq!(hit.point, Vec3::ZERO);
    }

    #[test]
    fn parallel_ray_misses() {
        let ray = Ray::infinite(Vec3::new(0.0, 0.0, 0.5), Vec3::X).unwrap();
        assert!(floor().ray_cast(&ray).is_none());
    }

    #[test]
    fn t_max_limits_hits() {
        let ray = Ray::new(Vec3::Z * 2.0, -Vec3::Z, 1.5).unwrap();
        assert!(floor().ray_cast(&ray).is_none());
        let ray = Ray::new(Vec3::Z * 2.0, -Vec3::Z, 2.0).unwrap();
        assert!(floor().ray_cast(&ray).is_some());
    }

    #[test]
    fn clearance_above_and_inside_floor() {
        let f = floor();
        assert_eq!(f.clearance(Vec3::new(0.0, 0.0, 1.0), 0.5), 0.5);
        assert_eq!(f.clearance(Vec3::new(0.0, 0.0, 0.25), 0.5), -0.25);
    }

    #[test]
    fn closest_point_regions() {
        let tri = [Vec3::ZERO, Vec3::X, Vec3::Y];
        assert_eq!(closest_point_on_triangle(Vec3::new(0.2, 0.2, 3.0), &tri), Vec3::new(0.2, 0.2, 0.0));
        assert_eq!(closest_point_on_triangle(Vec3::new(-1.0, -1.0, 0.0), &tri), Vec3::ZERO);
        assert_eq!(closest_point_on_triangle(Vec3::new(0.5, -1.0, 0.0), &tri), Vec3::new(0.5, 0.0, 0.0));
        let q = closest_point_on_triangle(Vec3::new(1.0, 1.0, 0.0), &tri);
        assert!((q - Vec3::new(0.5, 0.5, 0.0)).length() < 1e-15);
        let tilted = [Vec3::ZERO, Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 0.0)];
        let p = Vec3::new(0.3, 0.3, 0.9);
        let q = closest_point_on_triangle(p, &tilted);
        // residual is orthogonal to the face
        let n = (tilted[1] - tilted[0]).cross(tilted[2] - tilted[0]).normalize();
        assert!((p - q).cross(n).length() < 1e-12);
    }
}
