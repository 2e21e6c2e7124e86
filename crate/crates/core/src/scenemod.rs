//! Scene objects, structural classification, and removal of movable clutter
//! along a trajectory corridor.

use crate::geometry::{Aabb, Bvh, GeometryError, TriMesh, Vec3};
use crate::physics::{simulate, BodyState, PhysicsError, SimConfig, TaskSpec};
use crate::placement::PlacementPair;

/// Name fragments that mark an object as part of the building.
pub const STRUCTURAL_KEYWORDS: [&str; 7] =
    ["wall", "floor", "ceiling", "ground", "stair", "column", "beam"];

/// Corridor radius relative to the object's proxy radius.
pub const CORRIDOR_RADIUS_FACTOR: f64 = 1.25;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub mesh: TriMesh,
    pub bvh: Bvh,
    pub structural: bool,
    pub object_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    objects: Vec<SceneObject>,
    merged: Option<Bvh>,
    bounds: Aabb,
}

impl Scene {
    /// Builds a scene from named meshes. Object ids follow input order and
    /// structural flags are derived from names and the overall bounds.
    pub fn from_parts(parts: Vec<(String, TriMesh)>) -> Result<Scene, GeometryError> {
        let bounds = parts
            .iter()
            .fold(Aabb::EMPTY, |b, (_, m)| b.union(m.aabb()));
        let objects = parts
            .into_iter()
            .enumerate()
            .map(|(i, (name, mesh))| {
                let structural = classify_structural(&name, &mesh, &bounds);
                let bvh = Bvh::build(&mesh)?;
                Ok(SceneObject {
                    name,
                    mesh,
                    bvh,
                    structural,
                    object_id: i as u32,
                })
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        Scene::from_objects(objects)
    }

    /// Assembles already-classified objects, keeping their flags and ids.
    pub fn from_objects(objects: Vec<SceneObject>) -> Result<Scene, GeometryError> {
        let bounds = objects
            .iter()
            .fold(Aabb::EMPTY, |b, o| b.union(o.mesh.aabb()));
        let merged = merge(objects.iter())?;
        Ok(Scene {
            objects,
            merged,
            bounds,
        })
    }

    pub fn empty() -> Scene {
        Scene {
            objects: Vec::new(),
            merged: None,
            bounds: Aabb::EMPTY,
        }
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    /// Collision and render structure over every object; `None` when empty.
    pub fn bvh(&self) -> Option<&Bvh> {
        self.merged.as_ref()
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Merged structure over the structural objects only.
    pub fn structural_bvh(&self) -> Result<Option<Bvh>, GeometryError> {
        merge(self.objects.iter().filter(|o| o.structural))
    }

    pub fn object_names(&self) -> Vec<&str> {
        self.objects.iter().map(|o| o.name.as_str()).collect()
    }
}

fn merge<'a>(objects: impl Iterator<Item = &'a SceneObject>) -> Result<Option<Bvh>, GeometryError> {
    let parts: Vec<(&TriMesh, u32)> = objects.map(|o| (&o.mesh, o.object_id)).collect();
    if parts.is_empty() {
        return Ok(None);
    }
    Bvh::build_tagged(&parts).map(Some)
}

/// Structural objects are never removed: anything named like building
/// structure, or thin meshes spanning at least half the scene.
pub fn classify_structural(name: &str, mesh: &TriMesh, scene_bounds: &Aabb) -> bool {
    let lower = name.to_lowercase();
    if STRUCTURAL_KEYWORDS.iter().any(|k| lower.contains(k)) {
        return true;
    }
    let ext = mesh.aabb().extent();
    let axis = ext.max_axis();
    let largest = ext[axis];
    if !(largest > 0.0) || scene_bounds.is_empty() {
        return false;
    }
    let thinnest = ext.min_element();
    thinnest <= 0.05 * largest && largest >= 0.5 * scene_bounds.extent()[axis]
}

/// Swept spheres around the nominal trajectories of both pair members.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    /// One densified center list per trajectory.
    pub tubes: Vec<Vec<Vec3>>,
    pub radius: f64,
}

impl Corridor {
    pub fn from_paths(paths: &[Vec<Vec3>], radius: f64) -> Corridor {
        let tubes = paths.iter().map(|p| densify(p, radius)).collect();
        Corridor { tubes, radius }
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.tubes.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.tubes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Drops repeated points and inserts evenly spaced ones so consecutive
/// samples are at most `spacing` apart.
fn densify(points: &[Vec3], spacing: f64) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
    for &p in points {
        let Some(&last) = out.last() else {
            out.push(p);
            continue;
        };
        let d = last.distance(p);
        if d == 0.0 {
            continue;
        }
        let pieces = (d / spacing).ceil().max(1.0) as usize;
        for k in 1..pieces {
            out.push(last + (p - last) * (k as f64 / pieces as f64));
        }
        out.push(p);
    }
    out
}

/// Corridor from simulating both placements against the structural part of
/// `scene`, so it does not depend on the clutter it is used to remove.
pub fn nominal_corridor(
    task: &TaskSpec,
    pair: &PlacementPair,
    scene: &Scene,
    cfg: &SimConfig,
) -> Result<Corridor, ScenemodError> {
    let structure = scene.structural_bvh()?;
    let r = pair.proxy_radius;
    let mut paths = Vec::with_capacity(2);
    for start in [pair.source.position, pair.target.position] {
        let body = BodyState::at_rest(start, r);
        let tr = simulate(&body, task, structure.as_ref(), cfg)?;
        paths.push(tr.positions().collect::<Vec<_>>());
    }
    Ok(Corridor::from_paths(&paths, CORRIDOR_RADIUS_FACTOR * r))
}

#[derive(Debug, thiserror::Error)]
pub enum ScenemodError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

fn touches(obj: &SceneObject, corridor: &Corridor) -> bool {
    let box_ = obj.mesh.aabb();
    let r2 = corridor.radius * corridor.radius;
    corridor
        .centers()
        .any(|c| box_.distance_squared(c) < r2 && obj.bvh.clearance(c, corridor.radius) < 0.0)
}

/// Removes every non-structural object within the corridor radius of any
/// corridor center.
pub fn filter_scene(scene: &Scene, corridor: &Corridor) -> Result<Scene, GeometryError> {
    let kept: Vec<SceneObject> = scene
        .objects
        .iter()
        .filter(|o| o.structural || !touches(o, corridor))
        .cloned()
        .collect();
    if kept.len() == scene.objects.len() {
        return Ok(scene.clone());
    }
    Scene::from_objects(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::box_mesh;

    fn room_bounds() -> Aabb {
        Aabb::from_points([Vec3::new(-3.0, -3.0, 0.0), Vec3::new(3.0, 3.0, 3.0)])
    }

    #[test]
    fn keyword_names_are_structural() {
        let m = box_mesh(Vec3::ZERO, Vec3::splat(0.2));
        assert!(classify_structural("Wall_North_01", &m, &room_bounds()));
        assert!(classify_structural("CEILING", &m, &room_bounds()));
        assert!(!classify_structural("chair_3", &box_mesh(Vec3::ZERO, Vec3::splat(0.5)), &room_bounds()));
    }

    #[test]
    fn large_flat_slab_is_structural() {
        let slab = box_mesh(Vec3::new(-3.0, -3.0, 0.0), Vec3::new(3.0, 3.0, 0.1));
        assert!(classify_structural("", &slab, &room_bounds()));
        let tray = box_mesh(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.02));
        assert!(!classify_structural("tray", &tray, &room_bounds()));
    }

    #[test]
    fn densified_spacing_is_bounded() {
        let pts = vec![Vec3::ZERO, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 2.5, 0.0)];
        let c = Corridor::from_paths(&[pts], 0.3);
        let tube = &c.tubes[0];
        assert_eq!(tube[0], Vec3::ZERO);
        assert_eq!(*tube.last().unwrap(), Vec3::new(1.0, 2.5, 0.0));
        for w in tube.windows(2) {
            assert!(w[0].distance(w[1]) <= 0.3 + 1e-12);
            assert!(w[0] != w[1]);
        }
    }
}
