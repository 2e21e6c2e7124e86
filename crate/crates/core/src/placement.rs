//! First-frame object placement: visible, non-penetrating poses sampled
//! through random pixels, and paired source/target placements that share
//! one object scale.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::geometry::{Bvh, Quat, Ray, TriMesh, Vec3};
use crate::physics::TaskKind;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PlacementError {
    #[error("no valid placement after {attempts} attempts (last failure: {reason})")]
    NoValidPlacement { attempts: u32, reason: String },
    #[error("no scale brings the object into the requested size range")]
    UnattainableScale,
    #[error("invalid placement config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementConfig {
    /// Minimum gap between the proxy sphere and the scene, meters.
    pub clearance_margin: f64,
    pub retry_budget: u32,
    /// Air depths are drawn from this fraction band of the first-hit distance.
    pub depth_band: (f64, f64),
    /// Air depth band in meters for rays that hit nothing.
    pub miss_depth: (f64, f64),
    /// Minimum cosine between a support normal and world up.
    pub support_cos: f64,
    /// Object screen height range as fractions of the frame height.
    pub size_fraction: (f64, f64),
    /// Standard deviation of the target air depth relative to the source depth.
    pub depth_sigma: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            clearance_margin: 0.02,
            retry_budget: 256,
            depth_band: (0.2, 0.8),
            miss_depth: (0.5, 4.0),
            support_cos: 0.95,
            size_fraction: (0.07, 0.20),
            depth_sigma: 0.1,
        }
    }
}

impl PlacementConfig {
    pub fn validate(&self) -> Result<(), PlacementError> {
        let ordered = |(a, b): (f64, f64)| a > 0.0 && a <= b;
        if !(ordered(self.depth_band) && self.depth_band.1 < 1.0)
            || !ordered(self.miss_depth)
            || !(ordered(self.size_fraction) && self.size_fraction.1 < 1.0)
        {
            return Err(PlacementError::InvalidConfig("bad range".into()));
        }
        if self.retry_budget == 0 || !(self.clearance_margin >= 0.0) || !(self.depth_sigma >= 0.0) {
            return Err(PlacementError::InvalidConfig(
                "budget, margin and sigma must be usable".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    Air,
    Ground,
}

impl PlacementMode {
    pub fn for_task(kind: TaskKind) -> PlacementMode {
        if kind.is_ground() {
            PlacementMode::Ground
        } else {
            PlacementMode::Air
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Object center.
    pub position: Vec3,
    pub mode: PlacementMode,
    pub support_normal: Option<Vec3>,
    /// Pixel whose ray produced the placement.
    pub pixel: (f64, f64),
    /// Distance from the camera center to the object center.
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementPair {
    pub source: Placement,
    pub target: Placement,
    pub scale: f64,
    pub proxy_radius: f64,
    /// Requested screen-height fraction the scale was solved for.
    pub size_fraction: f64,
    pub delta: Vec3,
}

/// Outcome of [`validate_placement`]; a failure names the first check that
/// did not hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    Pass,
    Fail(&'static str),
}

impl Validation {
    pub fn passed(self) -> bool {
        self == Validation::Pass
    }
}

/// Bounding-sphere radius of `mesh` scaled by `scale`.
pub fn proxy_radius(mesh: &TriMesh, scale: f64) -> f64 {
    0.5 * scale * mesh.aabb().extent().max_element()
}

/// Vertices of `mesh` scaled about its box center, rotated, and moved so the
/// center lands on `position`.
pub fn posed_vertices(mesh: &TriMesh, scale: f64, orientation: Quat, position: Vec3) -> Vec<Vec3> {
    let c = mesh.aabb().center();
    mesh.vertices()
        .iter()
        .map(|&v| orientation.rotate((v - c) * scale) + position)
        .collect()
}

/// Mesh posed like [`posed_vertices`].
pub fn posed_mesh(mesh: &TriMesh, scale: f64, orientation: Quat, position: Vec3) -> TriMesh {
    let c = mesh.aabb().center();
    mesh.transformed(scale, orientation, orientation.rotate(-c * scale) + position)
        .expect("scale is positive")
}

fn random_pixel<R: Rng + ?Sized>(rng: &mut R, cam: &Camera) -> (f64, f64) {
    let x = rng.random_range(0..cam.width) as f64 + 0.5;
    let y = rng.random_range(0..cam.height) as f64 + 0.5;
    (x, y)
}

/// Allowed air depth range along `ray`.
fn depth_range(scene: &Bvh, ray: &Ray, cfg: &PlacementConfig) -> (f64, f64) {
    match scene.ray_cast(ray) {
        Some(hit) => (cfg.depth_band.0 * hit.t, cfg.depth_band.1 * hit.t),
        None => cfg.miss_depth,
    }
}

fn check(
    scene: &Bvh,
    cam: &Camera,
    placement: &Placement,
    radius: f64,
    cfg: &PlacementConfig,
) -> Validation {
    if !cam.point_visible(Some(scene), placement.position) {
        return Validation::Fail("visibility");
    }
    let margin = cfg.clearance_margin;
    let clear = match (placement.mode, placement.support_normal) {
        // a resting body touches its support, so test the body lifted off it
        (PlacementMode::Ground, Some(n)) => {
            scene.clearance(placement.position + n * margin, radius) >= margin - 1e-9
        }
        _ => scene.clearance(placement.position, radius) >= margin,
    };
    if !clear {
        return Validation::Fail("clearance");
    }
    if placement.mode == PlacementMode::Ground {
        match placement.support_normal {
            Some(n) if n.dot(Vec3::UP) >= cfg.support_cos => {}
            _ => return Validation::Fail("support_normal"),
        }
    }
    Validation::Pass
}

/// Checks visibility, clearance and (for ground placements) the support
/// normal, in that order.
pub fn validate_placement(
    scene: &Bvh,
    cam: &Camera,
    object_mesh: &TriMesh,
    placement: &Placement,
    scale: f64,
    cfg: &PlacementConfig,
) -> Validation {
    check(scene, cam, placement, proxy_radius(object_mesh, scale), cfg)
}

fn air_at(ray: &Ray, pixel: (f64, f64), depth: f64) -> Placement {
    Placement {
        position: ray.at(depth),
        mode: PlacementMode::Air,
        support_normal: None,
        pixel,
        depth,
    }
}

pub fn sample_air_placement<R: Rng + ?Sized>(
    rng: &mut R,
    scene: &Bvh,
    cam: &Camera,
    proxy_radius: f64,
    cfg: &PlacementConfig,
) -> Result<Placement, PlacementError> {
    let mut reason = "visibility";
    for _ in 0..cfg.retry_budget {
        let pixel = random_pixel(rng, cam);
        let ray = cam.ray_through(pixel.0, pixel.1);
        let (lo, hi) = depth_range(scene, &ray, cfg);
        let depth = rng.random_range(lo..=hi);
        let p = air_at(&ray, pixel, depth);
        match check(scene, cam, &p, proxy_radius, cfg) {
            Validation::Pass => return Ok(p),
            Validation::Fail(r) => reason = r,
        }
    }
    Err(exhausted(cfg, reason))
}

/// Upward-facing first hit under a random pixel, if the pixel has one.
fn draw_support<R: Rng + ?Sized>(
    rng: &mut R,
    scene: &Bvh,
    cam: &Camera,
    cfg: &PlacementConfig,
) -> Option<((f64, f64), Vec3, Vec3)> {
    let pixel = random_pixel(rng, cam);
    let ray = cam.ray_through(pixel.0, pixel.1);
    let hit = scene.ray_cast(&ray)?;
    let mut n = hit.face_normal;
    if n.dot(ray.direction) > 0.0 {
        n = -n;
    }
    (n.dot(Vec3::UP) >= cfg.support_cos).then_some((pixel, hit.point, n))
}

fn rest_on(cam: &Camera, pixel: (f64, f64), point: Vec3, normal: Vec3, radius: f64) -> Placement {
    let position = point + normal * radius;
    Placement {
        position,
        mode: PlacementMode::Ground,
        support_normal: Some(normal),
        pixel,
        depth: position.distance(cam.position),
    }
}

pub fn sample_ground_placement<R: Rng + ?Sized>(
    rng: &mut R,
    scene: &Bvh,
    cam: &Camera,
    proxy_radius: f64,
    cfg: &PlacementConfig,
) -> Result<Placement, PlacementError> {
    let mut reason = "support_normal";
    for _ in 0..cfg.retry_budget {
        let Some((pixel, point, n)) = draw_support(rng, scene, cam, cfg) else {
            continue;
        };
        let p = rest_on(cam, pixel, point, n, proxy_radius);
        match check(scene, cam, &p, proxy_radius, cfg) {
            Validation::Pass => return Ok(p),
            Validation::Fail(r) => reason = r,
        }
    }
    Err(exhausted(cfg, reason))
}

fn exhausted(cfg: &PlacementConfig, reason: &str) -> PlacementError {
    PlacementError::NoValidPlacement {
        attempts: cfg.retry_budget,
        reason: reason.to_string(),
    }
}

fn max_side((x0, y0, x1, y1): (f64, f64, f64, f64)) -> f64 {
    (x1 - x0).max(y1 - y0)
}

/// Scale at which the object centered at `position` has an on-screen box of
/// max side `fraction * height` within one pixel, or `None` if that box
/// would leave the frame.
pub fn solve_scale(cam: &Camera, mesh: &TriMesh, position: Vec3, fraction: f64) -> Option<f64> {
    let h = cam.height as f64;
    let w = cam.width as f64;
    let wanted = fraction * h;
    // pixel boxes are one pixel wider than the continuous extent on average
    let goal = wanted - 1.0;
    let size = mesh.aabb().extent().max_element();
    let dist = position.distance(cam.position);
    if !(size > 0.0) || !(goal > 0.0) || dist <= 0.0 {
        return None;
    }
    let extent_at = |s: f64| {
        cam.projected_extent(&posed_vertices(mesh, s, Quat::IDENTITY, position))
    };
    let mut s = goal * dist / (cam.focal_px() * size);
    for _ in 0..12 {
        let e = max_side(extent_at(s)?);
        if !(e > 0.0) {
            return None;
        }
        let next = s * goal / e;
        let done = ((next - s) / s).abs() < 1e-13;
        s = next;
        if done {
            break;
        }
    }
    let ext = extent_at(s)?;
    if ext.0 < 0.0 || ext.1 < 0.0 || ext.2 >= w || ext.3 >= h {
        return None;
    }
    let bbox = cam.screen_bbox(&posed_vertices(mesh, s, Quat::IDENTITY, position))?;
    ((bbox.max_side() as f64 - wanted).abs() <= 1.0).then_some(s)
}

/// Draws a screen-size fraction and solves the matching scale, redrawing
/// when the object would not fit.
pub fn choose_scale<R: Rng + ?Sized>(
    rng: &mut R,
    cam: &Camera,
    object_mesh: &TriMesh,
    placement: &Placement,
    cfg: &PlacementConfig,
) -> Result<f64, PlacementError> {
    let (lo, hi) = cfg.size_fraction;
    for _ in 0..cfg.retry_budget {
        let f = rng.random_range(lo..=hi);
        if let Some(s) = solve_scale(cam, object_mesh, placement.position, f) {
            return Ok(s);
        }
    }
    Err(PlacementError::UnattainableScale)
}

/// Samples a source placement together with the scale fitted to it.
fn sample_source<R: Rng + ?Sized>(
    rng: &mut R,
    scene: &Bvh,
    cam: &Camera,
    mode: PlacementMode,
    mesh: &TriMesh,
    cfg: &PlacementConfig,
) -> Option<(Placement, f64, f64)> {
    let (lo, hi) = cfg.size_fraction;
    let f = rng.random_range(lo..=hi);
    let (placement, scale) = match mode {
        PlacementMode::Air => {
            let pixel = random_pixel(rng, cam);
            let ray = cam.ray_through(pixel.0, pixel.1);
            let (dlo, dhi) = depth_range(scene, &ray, cfg);
            let p = air_at(&ray, pixel, rng.random_range(dlo..=dhi));
            (p, solve_scale(cam, mesh, p.position, f)?)
        }
        PlacementMode::Ground => {
            let (pixel, point, n) = draw_support(rng, scene, cam, cfg)?;
            // the center height depends on the radius, which depends on the
            // scale fitted at that center; a few rounds settle it
            let mut r = 0.0;
            let mut s = 0.0;
            for _ in 0..6 {
                s = solve_scale(cam, mesh, point + n * r, f)?;
                let next = proxy_radius(mesh, s);
                let done = (next - r).abs() < 1e-12;
                r = next;
                if done {
                    break;
                }
            }
            let p = rest_on(cam, pixel, point, n, r);
            let bbox = cam.screen_bbox(&posed_vertices(mesh, s, Quat::IDENTITY, p.position))?;
            if (bbox.max_side() as f64 - f * cam.height as f64).abs() > 1.0 {
                return None;
            }
            (p, s)
        }
    };
    let r = proxy_radius(mesh, scale);
    check(scene, cam, &placement, r, cfg)
        .passed()
        .then_some((placement, scale, f))
}

/// Air placement under a random pixel whose depth is drawn from a normal
/// centered on `source_depth` and truncated to the pixel's depth band.
pub fn sample_air_target<R: Rng + ?Sized>(
    rng: &mut R,
    scene: &Bvh,
    cam: &Camera,
    source_depth: f64,
    radius: f64,
    cfg: &PlacementConfig,
) -> Result<Placement, PlacementError> {
    let normal = Normal::new(source_depth, cfg.depth_sigma * source_depth)
        .map_err(|e| PlacementError::InvalidConfig(e.to_string()))?;
    let mut reason = "visibility";
    for _ in 0..cfg.retry_budget {
        let pixel = random_pixel(rng, cam);
        let ray = cam.ray_through(pixel.0, pixel.1);
        let (lo, hi) = depth_range(scene, &ray, cfg);
        let Some(depth) = sample_truncated(rng, &normal, lo, hi) else {
            reason = "visibility";
            continue;
        };
        let p = air_at(&ray, pixel, depth);
        match check(scene, cam, &p, radius, cfg) {
            Validation::Pass => return Ok(p),
            Validation::Fail(r) => reason = r,
        }
    }
    Err(exhausted(cfg, reason))
}

/// Rejection sampling of `dist` restricted to `[lo, hi]`.
pub fn sample_truncated<R: Rng + ?Sized>(
    rng: &mut R,
    dist: &Normal<f64>,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    (0..64)
        .map(|_| dist.sample(rng))
        .find(|d| (lo..=hi).contains(d))
}

/// Source and target placements for one task, sharing one scale.
pub fn sample_pair<R: Rng + ?Sized>(
    rng: &mut R,
    scene: &Bvh,
    cam: &Camera,
    task: TaskKind,
    object_mesh: &TriMesh,
    cfg: &PlacementConfig,
) -> Result<PlacementPair, PlacementError> {
    cfg.validate()?;
    let mode = PlacementMode::for_task(task);
    let mut last = None;
    for _ in 0..cfg.retry_budget {
        let Some((source, scale, size_fraction)) =
            sample_source(rng, scene, cam, mode, object_mesh, cfg)
        else {
            continue;
        };
        let radius = proxy_radius(object_mesh, scale);
        let target = match mode {
            PlacementMode::Air => sample_air_target(rng, scene, cam, source.depth, radius, cfg),
            PlacementMode::Ground => sample_ground_placement(rng, scene, cam, radius, cfg),
        };
        match target {
            Ok(target) => {
                return Ok(PlacementPair {
                    source,
                    target,
                    scale,
                    proxy_radius: radius,
                    size_fraction,
                    delta: target.position - source.position,
                })
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| exhausted(cfg, "source")))
}
