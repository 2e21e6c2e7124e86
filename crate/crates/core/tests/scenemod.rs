mod common;

use common::floor_mesh;
use trajatlas::geometry::*;
use trajatlas::physics::*;
use trajatlas::placement::*;
use trajatlas::scenemod::*;

fn air(position: Vec3) -> Placement {
    Placement {
        position,
        mode: PlacementMode::Air,
        support_normal: None,
        pixel: (0.0, 0.0),
        depth: 1.0,
    }
}

fn pair(src: Vec3, dst: Vec3, r: f64) -> PlacementPair {
    PlacementPair {
        source: air(src),
        target: air(dst),
        scale: 1.0,
        proxy_radius: r,
        size_fraction: 0.1,
        delta: dst - src,
    }
}

fn chair_room() -> Scene {
    Scene::from_parts(vec![
        ("floor".into(), floor_mesh(3.0)),
        (
            "Wall_East".into(),
            quad_mesh(Vec3::new(3.0, -3.0, 0.0), Vec3::new(0.0, 6.0, 0.0), Vec3::new(0.0, 0.0, 3.0)),
        ),
        ("chair_3".into(), box_mesh(Vec3::new(-0.4, -0.4, 0.0), Vec3::new(0.4, 0.4, 0.5))),
        ("lamp".into(), box_mesh(Vec3::new(2.0, 2.0, 0.0), Vec3::new(2.3, 2.3, 1.5))),
    ])
    .unwrap()
}

#[test]
fn chair_in_drop_path_is_removed_but_walls_stay() {
    let scene = chair_room();
    let cfg = SimConfig::default();
    let task = TaskSpec::new(TaskKind::Drop, Vec3::X);
    let p = pair(Vec3::new(0.0, 0.0, 1.5), Vec3::new(-1.5, 1.0, 1.5), 0.1);
    let corridor = nominal_corridor(&task, &p, &scene, &cfg).unwrap();
    let filtered = filter_scene(&scene, &corridor).unwrap();
    assert_eq!(filtered.object_names(), vec!["floor", "Wall_East", "lamp"]);
    // ids survive filtering
    assert_eq!(filtered.objects()[2].object_id, 3);
}

#[test]
fn corridor_far_from_clutter_changes_nothing() {
    let scene = chair_room();
    let cfg = SimConfig::default();
    let task = TaskSpec::new(TaskKind::Drop, Vec3::X);
    let p = pair(Vec3::new(-2.0, -2.0, 1.0), Vec3::new(-2.0, 1.0, 1.0), 0.1);
    let corridor = nominal_corridor(&task, &p, &scene, &cfg).unwrap();
    let filtered = filter_scene(&scene, &corridor).unwrap();
    assert_eq!(filtered, scene);
}

#[test]
fn all_structural_scene_is_untouched() {
    let scene = Scene::from_parts(vec![
        ("floor".into(), floor_mesh(3.0)),
        ("column_1".into(), box_mesh(Vec3::new(-0.2, -0.2, 0.0), Vec3::new(0.2, 0.2, 3.0))),
    ])
    .unwrap();
    let corridor = Corridor::from_paths(&[vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 0.1)]], 0.5);
    assert_eq!(filter_scene(&scene, &corridor).unwrap(), scene);
}

#[test]
fn filtering_is_idempotent_and_never_adds() {
    let scene = chair_room();
    let corridor = Corridor::from_paths(
        &[vec![Vec3::new(0.0, 0.0, 2.0), Vec3::new(2.2, 2.2, 0.5)]],
        0.2,
    );
    let once = filter_scene(&scene, &corridor).unwrap();
    let twice = filter_scene(&once, &corridor).unwrap();
    assert_eq!(once, twice);
    assert!(once.objects().len() < scene.objects().len());
    assert!(scene.objects().iter().filter(|o| o.structural).all(|s| once
        .objects()
        .iter()
        .any(|o| o.object_id == s.object_id)));
}

#[test]
fn static_corridor_is_two_spheres() {
    let scene = chair_room();
    let task = TaskSpec::new(TaskKind::Static, Vec3::X);
    let (a, b) = (Vec3::new(1.0, 1.0, 0.1), Vec3::new(-1.0, 2.0, 0.1));
    let c = nominal_corridor(&task, &pair(a, b, 0.1), &scene, &SimConfig::default()).unwrap();
    assert_eq!(c.tubes, vec![vec![a], vec![b]]);
    assert!((c.radius - 0.125).abs() < 1e-15);
}

#[test]
fn drop_corridor_follows_free_fall_to_rest() {
    let scene = chair_room();
    let cfg = SimConfig::default();
    let task = TaskSpec::new(TaskKind::Drop, Vec3::X);
    let r = 0.1;
    let (a, b) = (Vec3::new(-1.0, -1.0, 2.0), Vec3::new(1.0, -2.0, 2.0));
    let c = nominal_corridor(&task, &pair(a, b, r), &scene, &cfg).unwrap();
    assert_eq!(c.tubes.len(), 2);
    for (tube, start) in c.tubes.iter().zip([a, b]) {
        assert_eq!(tube[0], start);
        assert!((tube.last().unwrap().z - r).abs() < 1e-3);
        // a vertical segment through the start, spaced within the radius
        for w in tube.windows(2) {
            assert!(w[0].distance(w[1]) <= c.radius + 1e-12);
        }
        for p in tube {
            assert!((p.x - start.x).abs() < 1e-12 && (p.y - start.y).abs() < 1e-12);
        }
        // every frame position of the closed-form fall is on the tube
        let dt = cfg.dt();
        for i in 0..8 {
            let n = 15.0 * i as f64;
            let z = start.z - 0.5 * cfg.gravity * dt * dt * n * (n + 1.0);
            if z <= r {
                break;
            }
            assert!(tube.iter().any(|p| (p.z - z).abs() < 1e-9));
        }
    }
}

#[test]
fn filtered_pair_is_an_exact_offset_copy() {
    let scene = chair_room();
    let cfg = SimConfig::default();
    let task = TaskSpec::new(TaskKind::Drop, Vec3::X);
    let r = 0.1;
    let p = pair(Vec3::new(0.0, 0.0, 1.5), Vec3::new(-1.5, 1.0, 1.5), r);
    let deviation = |s: &Scene| {
        let x = simulate(&BodyState::at_rest(p.source.position, r), &task, s.bvh(), &cfg).unwrap();
        let y = simulate(&BodyState::at_rest(p.target.position, r), &task, s.bvh(), &cfg).unwrap();
        x.positions()
            .zip(y.positions())
            .map(|(xi, yi)| (yi - (xi + p.delta)).length())
            .fold(0.0, f64::max)
    };
    let corridor = nominal_corridor(&task, &p, &scene, &cfg).unwrap();
    let filtered = filter_scene(&scene, &corridor).unwrap();
    assert!(deviation(&filtered) <= 1e-6);
    assert!(deviation(&scene) > 0.2);
}
