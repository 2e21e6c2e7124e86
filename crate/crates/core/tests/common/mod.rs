#![allow(dead_code)]

use trajatlas::camera::Camera;
use trajatlas::geometry::*;

pub fn floor_mesh(half: f64) -> TriMesh {
    quad_mesh(
        Vec3::new(-half, -half, 0.0),
        Vec3::new(2.0 * half, 0.0, 0.0),
        Vec3::new(0.0, 2.0 * half, 0.0),
    )
}

pub fn floor_bvh() -> Bvh {
    Bvh::build(&floor_mesh(50.0)).unwrap()
}

/// 6 m x 6 m x 3 m room with a table and a crate.
pub fn furnished_room() -> Bvh {
    let floor = floor_mesh(3.0);
    let walls = [
        quad_mesh(Vec3::new(-3.0, 3.0, 0.0), Vec3::new(6.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 3.0)),
        quad_mesh(Vec3::new(-3.0, -3.0, 0.0), Vec3::new(0.0, 0.0, 3.0), Vec3::new(6.0, 0.0, 0.0)),
        quad_mesh(Vec3::new(3.0, -3.0, 0.0), Vec3::new(0.0, 6.0, 0.0), Vec3::new(0.0, 0.0, 3.0)),
        quad_mesh(Vec3::new(-3.0, -3.0, 0.0), Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 6.0, 0.0)),
    ];
    let table = box_mesh(Vec3::new(-0.5, 0.5, 0.0), Vec3::new(0.7, 1.3, 0.75));
    let crate_box = box_mesh(Vec3::new(1.0, -0.8, 0.0), Vec3::new(1.5, -0.3, 0.5));
    let mut parts: Vec<(&TriMesh, u32)> = vec![(&floor, 0), (&table, 5), (&crate_box, 6)];
    for (i, w) in walls.iter().enumerate() {
        parts.push((w, 1 + i as u32));
    }
    Bvh::build_tagged(&parts).unwrap()
}

pub fn room_camera() -> Camera {
    Camera::look_at(
        Vec3::new(-2.6, -2.6, 1.6),
        Vec3::new(0.5, 0.5, 0.4),
        1.0,
        320,
        180,
    )
    .unwrap()
}

pub fn floor_camera() -> Camera {
    Camera::look_at(
        Vec3::new(0.0, -4.0, 1.5),
        Vec3::new(0.0, 0.0, 0.3),
        1.0,
        320,
        180,
    )
    .unwrap()
}

pub fn unit_cube() -> TriMesh {
    box_mesh(Vec3::splat(-0.5), Vec3::splat(0.5))
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Votes between uniformly drawn distinct items, outcomes drawn from the
/// Bradley–Terry model at utilities `u`.
pub fn simulate_votes(u: &[f64], count: usize, seed: u64) -> trajatlas::metrics::VoteSet {
    use rand::{Rng, SeedableRng};
    use trajatlas::metrics::{bt_prob, VoteSet};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = u.len();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if rng.random::<f64>() < bt_prob(u[i], u[j]) {
            out.push((i, j));
        } else {
            out.push((j, i));
        }
    }
    VoteSet::new((0..n).map(|i| format!("m{i}")).collect(), out).unwrap()
}

/// Every file under `root` keyed by its relative path.
pub fn tree_bytes(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Low-resolution, short-clip configuration for fast end-to-end tests.
pub fn small_config() -> trajatlas::pipeline::RunConfig {
    trajatlas::pipeline::RunConfig {
        frames: 21,
        width: 96,
        height: 54,
        ..Default::default()
    }
}

pub const SMALL_CONFIG_TOML: &str = "frames = 21\nwidth = 96\nheight = 54\n";
