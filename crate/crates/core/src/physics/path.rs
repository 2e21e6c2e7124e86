//! Planar drag paths. Every path starts at its anchor and lies in the
//! horizontal plane through it.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::PhysicsError;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PathShape {
    /// Circle through the anchor, curving to the left of the heading.
    Circle { radius: f64 },
    /// Sinusoid with `half_periods` half-waves along `length` meters.
    SCurve {
        amplitude: f64,
        length: f64,
        half_periods: u32,
    },
    /// Archimedean spiral `rho = a + b theta` swept through `turns` turns.
    Spiral { a: f64, b: f64, turns: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub shape: PathShape,
    pub anchor: Vec3,
    /// Initial direction of travel; unit and horizontal.
    pub heading: Vec3,
}

impl PathSpec {
    pub fn new(shape: PathShape, anchor: Vec3, heading: Vec3) -> Result<PathSpec, PhysicsError> {
        let flat = Vec3::new(heading.x, heading.y, 0.0);
        let heading = flat
            .try_normalize()
            .ok_or_else(|| PhysicsError::InvalidTask("path heading has no horizontal component".into()))?;
        let ok = match shape {
            PathShape::Circle { radius } => radius > 0.0,
            PathShape::SCurve {
                amplitude,
                length,
                half_periods,
            } => amplitude >= 0.0 && length > 0.0 && half_periods > 0,
            PathShape::Spiral { a, b, turns } => a >= 0.0 && b >= 0.0 && turns > 0.0,
        };
        if !ok {
            return Err(PhysicsError::InvalidTask(format!("bad path parameters {shape:?}")));
        }
        Ok(PathSpec {
            shape,
            anchor,
            heading,
        })
    }

    /// Same path re-anchored at `anchor`.
    pub fn anchored(self, anchor: Vec3) -> PathSpec {
        PathSpec { anchor, ..self }
    }

    /// Unit vector to the left of the heading in the horizontal plane.
    pub fn lateral(&self) -> Vec3 {
        Vec3::UP.cross(self.heading)
    }

    /// Offset of the point at progress `s` relative to the anchor.
    pub fn offset(&self, s: f64) -> Result<Vec3, PhysicsError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(PhysicsError::PathProgress(s));
        }
        let h = self.heading;
        let l = self.lateral();
        Ok(match self.shape {
            PathShape::Circle { radius } => {
                // center sits one radius to the left; the anchor is on the rim
                let theta = TAU * s;
                l * radius + (-l * theta.cos() + h * theta.sin()) * radius
            }
            PathShape::SCurve {
                amplitude,
                length,
                half_periods,
            } => {
                let lateral = amplitude * (PI * half_periods as f64 * s).sin();
                h * (length * s) + l * lateral
            }
            PathShape::Spiral { a, b, turns } => {
                // polar frame: theta = 0 along -lateral so the anchor is at rho = a
                let theta = TAU * turns * s;
                let rho = a + b * theta;
                let (u, w) = (-l, h);
                l * a + (u * theta.cos() + w * theta.sin()) * rho
            }
        })
    }

    /// Center of the circle or spiral; `None` for S-curves.
    pub fn center(&self) -> Option<Vec3> {
        match self.shape {
            PathShape::Circle { radius } => Some(self.anchor + self.lateral() * radius),
            PathShape::Spiral { a, .. } => Some(self.anchor + self.lateral() * a),
            PathShape::SCurve { .. } => None,
        }
    }
}

/// Point on `path` at normalized progress `s` in `[0, 1]`.
pub fn path_point(path: &PathSpec, s: f64) -> Result<Vec3, PhysicsError> {
    Ok(path.anchor + path.offset(s)?)
}
