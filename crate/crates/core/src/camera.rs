//! Pinhole camera. Image coordinates are continuous with pixel `(i, j)`
//! covering `[i, i+1) x [j, j+1)`, so pixel centers sit at half-integers;
//! `y` grows downward.

use serde::{Deserialize, Serialize};

use crate::geometry::{Bvh, Ray, Vec3};

/// Minimum frame dimension in pixels.
pub const MIN_DIMENSION: u32 = 16;
/// Surfaces closer than this to the target point do not occlude it.
pub const VISIBILITY_EPSILON: f64 = 1e-4;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CameraError {
    #[error("pixel ({0}, {1}) lies outside the frame")]
    OutOfFrame(f64, f64),
    #[error("invalid camera: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub forward: Vec3,
    pub up: Vec3,
    /// Vertical field of view, radians.
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

/// Inclusive pixel box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bbox2D {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl Bbox2D {
    pub fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Bbox2D {
        debug_assert!(x_min <= x_max && y_min <= y_max);
        Bbox2D {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn max_side(&self) -> i64 {
        self.width().max(self.height())
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn inflate(&self, by: i64) -> Bbox2D {
        Bbox2D::new(
            self.x_min - by,
            self.y_min - by,
            self.x_max + by,
            self.y_max + by,
        )
    }
}

impl Camera {
    /// Camera at `position` looking at `target`, with `up` re-orthogonalized
    /// against world +Z.
    pub fn look_at(
        position: Vec3,
        target: Vec3,
        vertical_fov: f64,
        width: u32,
        height: u32,
    ) -> Result<Camera, CameraError> {
        let forward = (target - position)
            .try_normalize()
            .ok_or_else(|| CameraError::Invalid("target coincides with position".into()))?;
        let right = forward
            .cross(Vec3::UP)
            .try_normalize()
            .ok_or_else(|| CameraError::Invalid("cannot look straight up or down".into()))?;
        let up = right.cross(forward).normalize();
        Camera::new(position, forward, up, vertical_fov, width, height)
    }

    pub fn new(
        position: Vec3,
        forward: Vec3,
        up: Vec3,
        vertical_fov: f64,
        width: u32,
        height: u32,
    ) -> Result<Camera, CameraError> {
        let cam = Camera {
            position,
            forward,
            up,
            vertical_fov,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |m: &str| Err(CameraError::Invalid(m.to_string()));
        if (self.forward.length() - 1.0).abs() > 1e-9 || (self.up.length() - 1.0).abs() > 1e-9 {
            return bad("forward and up must be unit vectors");
        }
        if self.forward.dot(self.up).abs() > 1e-9 {
            return bad("up must be perpendicular to forward");
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < std::f64::consts::PI) {
            return bad("vertical_fov must lie in (0, pi)");
        }
        if self.width < MIN_DIMENSION || self.height < MIN_DIMENSION {
            return bad("frame must be at least 16x16");
        }
        if !self.position.is_finite() {
            return bad("position must be finite");
        }
        Ok(())
    }

    pub fn right(&self) -> Vec3 {
        self.forward.cross(self.up)
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.height as f64 / (0.5 * self.vertical_fov).tan()
    }

    /// Ray through the continuous image location `(px, py)`.
    pub fn pixel_ray(&self, px: f64, py: f64) -> Result<Ray, CameraError> {
        if !(px >= 0.0 && px < self.width as f64 && py >= 0.0 && py < self.height as f64) {
            return Err(CameraError::OutOfFrame(px, py));
        }
        Ok(self.ray_through(px, py))
    }

    /// Unchecked variant of [`Camera::pixel_ray`] for in-frame coordinates.
    pub(crate) fn ray_through(&self, px: f64, py: f64) -> Ray {
        let dir = self.forward * self.focal_px()
            + self.right() * (px - 0.5 * self.width as f64)
            - self.up * (py - 0.5 * self.height as f64);
        Ray {
            origin: self.position,
            direction: dir.normalize(),
            t_max: f64::INFINITY,
        }
    }

    /// Continuous image coordinates of `p`, or `None` when `p` is at or
    /// behind the camera plane. The result may fall outside the frame.
    pub fn project_point(&self, p: Vec3) -> Option<(f64, f64)> {
        let d = p - self.position;
        let z = self.forward.dot(d);
        if z <= 1e-9 {
            return None;
        }
        let f = self.focal_px();
        let px = 0.5 * self.width as f64 + f * self.right().dot(d) / z;
        let py = 0.5 * self.height as f64 - f * self.up.dot(d) / z;
        Some((px, py))
    }

    /// Depth of `p` along the optical axis.
    pub fn depth_of(&self, p: Vec3) -> f64 {
        self.forward.dot(p - self.position)
    }

    pub fn in_frame(&self, px: f64, py: f64) -> bool {
        px >= 0.0 && px < self.width as f64 && py >= 0.0 && py < self.height as f64
    }

    /// Tight inclusive pixel box over the projections of points in front of
    /// the camera, clipped to the frame.
    pub fn screen_bbox(&self, points: &[Vec3]) -> Option<Bbox2D> {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut any = false;
        for &p in points {
            if let Some((px, py)) = self.project_point(p) {
                any = true;
                x0 = x0.min(px);
                y0 = y0.min(py);
                x1 = x1.max(px);
                y1 = y1.max(py);
            }
        }
        if !any {
            return None;
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let clip_x = |v: f64| (v.floor() as i64).clamp(0, w - 1);
        let clip_y = |v: f64| (v.floor() as i64).clamp(0, h - 1);
        if x1 < 0.0 || y1 < 0.0 || x0 >= w as f64 || y0 >= h as f64 {
            return None;
        }
        Some(Bbox2D::new(clip_x(x0), clip_y(y0), clip_x(x1), clip_y(y1)))
    }

    /// Unclipped continuous extent `(x_min, y_min, x_max, y_max)` of the
    /// projections, or `None` if any point is at or behind the camera.
    pub fn projected_extent(&self, points: &[Vec3]) -> Option<(f64, f64, f64, f64)> {
        let mut ext = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for &p in points {
            let (px, py) = self.project_point(p)?;
            ext = (ext.0.min(px), ext.1.min(py), ext.2.max(px), ext.3.max(py));
        }
        ext.0.is_finite().then_some(ext)
    }

    /// True iff `p` projects inside the frame and nothing in `scene` lies on
    /// the segment from the camera to `p`.
    pub fn point_visible(&self, scene: Option<&Bvh>, p: Vec3) -> bool {
        let Some((px, py)) = self.project_point(p) else {
            return false;
        };
        if !self.in_frame(px, py) {
            return false;
        }
        let Some(scene) = scene else {
            return true;
        };
        let dist = p.distance(self.position);
        let limit = dist - VISIBILITY_EPSILON;
        if limit <= 0.0 {
            return true;
        }
        let ray = Ray {
            origin: self.position,
            direction: (p - self.position) / dist,
            t_max: limit,
        };
        scene.ray_cast(&ray).is_none()
    }
}
