//! Procedural rooms: floor, walls, optional ceiling, and box or table
//! clutter standing on the floor, plus candidate cameras.

use rand::Rng;

use super::config::SceneSpec;
use super::PipelineError;
use crate::camera::Camera;
use crate::geometry::{box_mesh, quad_mesh, TriMesh, Vec3};
use crate::scenemod::Scene;

/// Gap kept between clutter footprints and between clutter and walls.
const CLUTTER_GAP: f64 = 0.15;
const PLACEMENT_TRIES: u32 = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub scene: Scene,
    pub cameras: Vec<Camera>,
    /// Room size `(width, depth, height)`; the floor spans `[0, w] x [0, d]`.
    pub room: (f64, f64, f64),
    pub warnings: Vec<String>,
}

fn draw<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Table: top slab on four legs, as one mesh.
fn table_mesh(x0: f64, y0: f64, sx: f64, sy: f64, height: f64) -> TriMesh {
    let top = 0.04;
    let leg = 0.05;
    let mut parts = vec![box_mesh(
        Vec3::new(x0, y0, height - top),
        Vec3::new(x0 + sx, y0 + sy, height),
    )];
    for (lx, ly) in [(x0, y0), (x0 + sx - leg, y0), (x0, y0 + sy - leg), (x0 + sx - leg, y0 + sy - leg)] {
        parts.push(box_mesh(
            Vec3::new(lx, ly, 0.0),
            Vec3::new(lx + leg, ly + leg, height - top),
        ));
    }
    TriMesh::merge(&parts).expect("non-empty")
}

pub fn generate_procedural_scene<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &SceneSpec,
    width: u32,
    height: u32,
    vertical_fov: f64,
) -> Result<GeneratedScene, PipelineError> {
    let w = draw(rng, spec.room_width);
    let d = draw(rng, spec.room_depth);
    let h = draw(rng, spec.room_height);
    let mut parts: Vec<(String, TriMesh)> = Vec::new();
    parts.push((
        "floor".into(),
        quad_mesh(Vec3::ZERO, Vec3::new(w, 0.0, 0.0), Vec3::new(0.0, d, 0.0)),
    ));
    if spec.walls {
        // normals face into the room
        parts.push((
            "wall_south".into(),
            quad_mesh(Vec3::ZERO, Vec3::new(0.0, 0.0, h), Vec3::new(w, 0.0, 0.0)),
        ));
        parts.push((
            "wall_north".into(),
            quad_mesh(Vec3::new(0.0, d, 0.0), Vec3::new(w, 0.0, 0.0), Vec3::new(0.0, 0.0, h)),
        ));
        parts.push((
            "wall_west".into(),
            quad_mesh(Vec3::ZERO, Vec3::new(0.0, d, 0.0), Vec3::new(0.0, 0.0, h)),
        ));
        parts.push((
            "wall_east".into(),
            quad_mesh(Vec3::new(w, 0.0, 0.0), Vec3::new(0.0, 0.0, h), Vec3::new(0.0, d, 0.0)),
        ));
    }
    if spec.ceiling {
        parts.push((
            "ceiling".into(),
            quad_mesh(Vec3::new(0.0, 0.0, h), Vec3::new(0.0, d, 0.0), Vec3::new(w, 0.0, 0.0)),
        ));
    }

    let mut warnings = Vec::new();
    let wanted = rng.random_range(spec.clutter_count.0..=spec.clutter_count.1);
    let mut footprints: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (mut boxes, mut tables) = (0, 0);
    for _ in 0..wanted {
        let is_table = rng.random_bool(spec.table_probability);
        let (sx, sy, sz) = if is_table {
            (draw(rng, (0.8, 1.4)), draw(rng, (0.6, 1.0)), draw(rng, (0.65, 0.8)))
        } else {
            let s = spec.clutter_size;
            (draw(rng, s), draw(rng, s), draw(rng, s))
        };
        let free_x = w - sx - 2.0 * CLUTTER_GAP;
        let free_y = d - sy - 2.0 * CLUTTER_GAP;
        let mut spot = None;
        if free_x > 0.0 && free_y > 0.0 {
            for _ in 0..PLACEMENT_TRIES {
                let x0 = CLUTTER_GAP + rng.random_range(0.0..free_x);
                let y0 = CLUTTER_GAP + rng.random_range(0.0..free_y);
                let clear = footprints.iter().all(|&(ax, ay, bx, by)| {
                    x0 + sx + CLUTTER_GAP <= ax
                        || bx + CLUTTER_GAP <= x0
                        || y0 + sy + CLUTTER_GAP <= ay
                        || by + CLUTTER_GAP <= y0
                });
                if clear {
                    spot = Some((x0, y0));
                    break;
                }
            }
        }
        let Some((x0, y0)) = spot else {
            warnings.push(format!("clutter budget exhausted after {} objects", footprints.len()));
            break;
        };
        footprints.push((x0, y0, x0 + sx, y0 + sy));
        if is_table {
            tables += 1;
            parts.push((format!("table_{tables}"), table_mesh(x0, y0, sx, sy, sz)));
        } else {
            boxes += 1;
            parts.push((
                format!("crate_{boxes}"),
                box_mesh(Vec3::new(x0, y0, 0.0), Vec3::new(x0 + sx, y0 + sy, sz)),
            ));
        }
    }

    let n_cams = rng.random_range(spec.cameras.0..=spec.cameras.1);
    let margin = 0.4;
    let mut cameras = Vec::with_capacity(n_cams as usize);
    for _ in 0..n_cams {
        // stand near one side and look across the room, pitched down
        let side = rng.random_range(0..4u32);
        let along = |rng: &mut R, len: f64| rng.random_range(0.25 * len..=0.75 * len);
        let (pos_xy, look_xy) = match side {
            0 => ((along(rng, w), margin), (along(rng, w), 0.65 * d)),
            1 => ((along(rng, w), d - margin), (along(rng, w), 0.35 * d)),
            2 => ((margin, along(rng, d)), (0.65 * w, along(rng, d))),
            _ => ((w - margin, along(rng, d)), (0.35 * w, along(rng, d))),
        };
        let eye = draw(rng, spec.eye_height);
        let target_z = rng.random_range(0.0..=0.4);
        let cam = Camera::look_at(
            Vec3::new(pos_xy.0, pos_xy.1, eye),
            Vec3::new(look_xy.0, look_xy.1, target_z),
            vertical_fov,
            width,
            height,
        )
        .map_err(|e| PipelineError::Config(e.to_string()))?;
        cameras.push(cam);
    }

    let scene = Scene::from_parts(parts)?;
    Ok(GeneratedScene {
        scene,
        cameras,
        room: (w, d, h),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_clutter_gives_bare_room() {
        let spec = SceneSpec {
            clutter_count: (0, 0),
            ..SceneSpec::default()
        };
        let g = generate_procedural_scene(&mut ChaCha8Rng::seed_from_u64(1), &spec, 320, 180, 0.9).unwrap();
        assert_eq!(
            g.scene.object_names(),
            vec!["floor", "wall_south", "wall_north", "wall_west", "wall_east"]
        );
        assert!(g.scene.objects().iter().all(|o| o.structural));
    }

    #[test]
    fn clutter_is_movable_and_structure_is_not() {
        for seed in 0..20 {
            let g = generate_procedural_scene(&mut ChaCha8Rng::seed_from_u64(seed), &SceneSpec::default(), 320, 180, 0.9)
                .unwrap();
            for o in g.scene.objects() {
                let clutter = o.name.starts_with("crate_") || o.name.starts_with("table_");
                assert_eq!(o.structural, !clutter, "{}", o.name);
            }
            assert!((1..=4).contains(&g.cameras.len()));
            for c in &g.cameras {
                assert!(c.position.z >= 1.2 && c.position.z <= 1.8);
                assert!(c.forward.z < 0.0);
            }
        }
    }

    #[test]
    fn clutter_stays_inside_the_walls() {
        for seed in 0..20 {
            let g = generate_procedural_scene(&mut ChaCha8Rng::seed_from_u64(seed), &SceneSpec::default(), 320, 180, 0.9)
                .unwrap();
            let (w, d, _) = g.room;
            for o in g.scene.objects().iter().filter(|o| !o.structural) {
                let b = o.mesh.aabb();
                assert!(b.min.x >= CLUTTER_GAP - 1e-12 && b.max.x <= w - CLUTTER_GAP + 1e-12);
                assert!(b.min.y >= CLUTTER_GAP - 1e-12 && b.max.y <= d - CLUTTER_GAP + 1e-12);
                assert_eq!(b.min.z, 0.0);
            }
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_procedural_scene(&mut ChaCha8Rng::seed_from_u64(5), &SceneSpec::default(), 320, 180, 0.9).unwrap();
        let b = generate_procedural_scene(&mut ChaCha8Rng::seed_from_u64(5), &SceneSpec::default(), 320, 180, 0.9).unwrap();
        assert_eq!(a, b);
    }
}
