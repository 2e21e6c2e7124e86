mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajatlas::camera::Camera;
use trajatlas::geometry::*;
use trajatlas::physics::TaskKind;
use trajatlas::placement::*;

#[test]
fn sampled_placements_always_validate() {
    let cfg = PlacementConfig::default();
    let scene = furnished_room();
    let cam = room_camera();
    let mesh = unit_cube();
    let scale = 0.2;
    let r = proxy_radius(&mesh, scale);
    let mut ground = 0;
    for seed in 0..600u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = if seed % 2 == 0 {
            sample_air_placement(&mut rng, &scene, &cam, r, &cfg).unwrap()
        } else {
            ground += 1;
            sample_ground_placement(&mut rng, &scene, &cam, r, &cfg).unwrap()
        };
        assert_eq!(validate_placement(&scene, &cam, &mesh, &p, scale, &cfg), Validation::Pass);
        if let Some(n) = p.support_normal {
            assert!(n.dot(Vec3::UP) >= 0.95);
            // resting on the table or the floor, touching but not inside anything
            assert!(scene.clearance(p.position, r) >= -1e-9);
            let support_z = p.position.z - r;
            assert!(
                support_z.abs() < 1e-6 || (support_z - 0.75).abs() < 1e-6 || (support_z - 0.5).abs() < 1e-6,
                "{support_z}"
            );
        }
    }
    assert_eq!(ground, 300);
}

#[test]
fn samplers_are_deterministic() {
    let cfg = PlacementConfig::default();
    let scene = furnished_room();
    let cam = room_camera();
    for task in [TaskKind::Throw, TaskKind::Drag] {
        let a = sample_pair(&mut ChaCha8Rng::seed_from_u64(4), &scene, &cam, task, &unit_cube(), &cfg).unwrap();
        let b = sample_pair(&mut ChaCha8Rng::seed_from_u64(4), &scene, &cam, task, &unit_cube(), &cfg).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn target_air_depth_follows_declared_gaussian() {
    // high camera looking level: sky rays allow [0.5, 4] m, floor rays are far
    let cam = Camera::look_at(Vec3::new(0.0, 0.0, 10.0), Vec3::new(0.0, 5.0, 10.0), 1.0, 320, 180).unwrap();
    let scene = floor_bvh();
    let cfg = PlacementConfig::default();
    let source_depth = 2.0;
    let n = 10_000;
    let depths: Vec<f64> = (0..n)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_air_target(&mut rng, &scene, &cam, source_depth, 0.05, &cfg)
                .unwrap()
                .depth
        })
        .collect();
    let mean = depths.iter().sum::<f64>() / n as f64;
    let std = (depths.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((mean - source_depth).abs() <= 0.02 * source_depth, "mean {mean}");
    assert!((std - 0.1 * source_depth).abs() <= 0.1 * 0.1 * source_depth, "std {std}");
}

#[test]
fn air_depths_correlate_and_ground_positions_do_not() {
    let cfg = PlacementConfig::default();
    let scene = furnished_room();
    let cam = room_camera();
    let mesh = unit_cube();
    let (mut ds, mut dt, mut xs, mut xt) = (vec![], vec![], vec![], vec![]);
    for seed in 0..400u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let air = sample_pair(&mut rng, &scene, &cam, TaskKind::Drop, &mesh, &cfg).unwrap();
        ds.push(air.source.depth);
        dt.push(air.target.depth);
        let ground = sample_pair(&mut rng, &scene, &cam, TaskKind::Roll, &mesh, &cfg).unwrap();
        xs.push(ground.source.position.x);
        xt.push(ground.target.position.x);
    }
    let rho_air = pearson(&ds, &dt);
    let rho_ground = pearson(&xs, &xt);
    assert!(rho_air > 0.9, "air depth correlation {rho_air}");
    assert!(rho_ground.abs() < 0.15, "ground correlation {rho_ground}");
}

#[test]
fn ground_pairs_on_flat_floor_rest_at_radius() {
    let cfg = PlacementConfig::default();
    let scene = floor_bvh();
    let cam = floor_camera();
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = sample_pair(&mut rng, &scene, &cam, TaskKind::Static, &unit_cube(), &cfg).unwrap();
        assert!((pair.source.position.z - pair.proxy_radius).abs() < 1e-6);
        assert!((pair.target.position.z - pair.proxy_radius).abs() < 1e-6);
    }
}

#[test]
fn scale_follows_pinhole_proportionality() {
    let cam = floor_camera();
    let mesh = unit_cube();
    let ray = cam.pixel_ray(170.5, 80.5).unwrap();
    for f in [0.07, 0.1, 0.15] {
        let near = solve_scale(&cam, &mesh, ray.at(2.0), f).unwrap();
        let far = solve_scale(&cam, &mesh, ray.at(4.0), f).unwrap();
        assert!((far / near - 2.0).abs() <= 0.04, "{}", far / near);
    }
}

#[test]
fn chosen_scale_matches_fraction_bounds() {
    let cfg = PlacementConfig::default();
    let scene = furnished_room();
    let cam = room_camera();
    let mesh = uv_sphere(0.5, 16, 8);
    let h = cam.height as f64;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample_air_placement(&mut rng, &scene, &cam, 0.05, &cfg).unwrap();
        let Ok(s) = choose_scale(&mut rng, &cam, &mesh, &p, &cfg) else {
            continue;
        };
        let side = cam
            .screen_bbox(&posed_vertices(&mesh, s, Quat::IDENTITY, p.position))
            .unwrap()
            .max_side() as f64;
        assert!(side >= 0.07 * h - 1.0 && side <= 0.20 * h + 1.0, "{side}");
    }
    let mut a = ChaCha8Rng::seed_from_u64(1);
    let mut b = ChaCha8Rng::seed_from_u64(1);
    let p = sample_air_placement(&mut ChaCha8Rng::seed_from_u64(0), &scene, &cam, 0.05, &cfg).unwrap();
    assert_eq!(
        choose_scale(&mut a, &cam, &mesh, &p, &cfg),
        choose_scale(&mut b, &cam, &mesh, &p, &cfg)
    );
}
