//! Sphere-proxy rigid-body simulation against static triangle geometry.
//!
//! Integration is semi-implicit Euler (velocity first, then position). A
//! penetrating proxy is projected out along the contact normal; the normal
//! velocity is reflected with restitution and the tangential velocity gets a
//! Coulomb-clamped friction impulse. Orientation follows a kinematic no-slip
//! rolling rule while in contact.

mod path;

pub use path::{path_point, PathShape, PathSpec};

use serde::{Deserialize, Serialize};

use crate::geometry::{Bvh, Quat, Vec3};

/// Contacts whose incoming normal speed is below this many `g * dt` are
/// treated as resting (no bounce).
const REST_SPEED_STEPS: f64 = 2.0;
/// Contact resolution passes per substep (corners need more than one).
const CONTACT_PASSES: usize = 4;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PhysicsError {
    #[error("simulation diverged at substep {substep}")]
    Diverged { substep: u64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("path progress {0} outside [0, 1]")]
    PathProgress(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Magnitude of gravity along -Z, m/s^2.
    pub gravity: f64,
    pub substep_hz: u32,
    pub restitution: f64,
    pub friction_coefficient: f64,
    pub frames: u32,
    pub fps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gravity: 9.81,
            substep_hz: 240,
            restitution: 0.4,
            friction_coefficient: 0.5,
            frames: 81,
            fps: 16.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let bad = |m: String| Err(PhysicsError::InvalidConfig(m));
        if !(self.fps > 0.0) || self.substep_hz == 0 {
            return bad("fps and substep_hz must be positive".into());
        }
        let ratio = self.substep_hz as f64 / self.fps;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad(format!(
                "substep_hz {} is not an integer multiple of fps {}",
                self.substep_hz, self.fps
            ));
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return bad(format!("restitution {} outside [0, 1]", self.restitution));
        }
        if !(self.friction_coefficient >= 0.0) || !(self.gravity >= 0.0) {
            return bad("friction and gravity must be non-negative".into());
        }
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        Ok(())
    }

    pub fn substeps_per_frame(&self) -> u32 {
        (self.substep_hz as f64 / self.fps).round() as u32
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.substep_hz as f64
    }

    /// Clip length in seconds.
    pub fn duration(&self) -> f64 {
        self.frames as f64 / self.fps
    }

    pub fn gravity_vector(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.gravity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub position: Vec3,
    pub orientation: Quat,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
    pub mass: f64,
    pub proxy_radius: f64,
}

impl BodyState {
    /// Body at rest with identity orientation.
    pub fn at_rest(position: Vec3, proxy_radius: f64) -> BodyState {
        BodyState {
            position,
            orientation: Quat::IDENTITY,
            linear_velocity: Vec3::ZERO,
            angular_velocity: Vec3::ZERO,
            mass: 1.0,
            proxy_radius,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.linear_velocity.is_finite()
            && self.angular_velocity.is_finite()
            && self.orientation.is_finite()
    }

    /// Kinetic plus gravitational potential energy per unit mass.
    pub fn specific_energy(&self, gravity: f64) -> f64 {
        0.5 * self.linear_velocity.length_squared() + gravity * self.position.z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Drop,
    Throw,
    Roll,
    Drag,
    Static,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Drag,
        TaskKind::Throw,
        TaskKind::Roll,
        TaskKind::Drop,
        TaskKind::Static,
    ];

    /// Whether the first-frame placement rests on a support surface.
    pub fn is_ground(self) -> bool {
        matches!(self, TaskKind::Roll | TaskKind::Drag | TaskKind::Static)
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Drop => "drop",
            TaskKind::Throw => "throw",
            TaskKind::Roll => "roll",
            TaskKind::Drag => "drag",
            TaskKind::Static => "static",
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub throw_speed: f64,
    pub roll_speed: f64,
    pub drag_path: Option<PathSpec>,
    /// Spring stiffness per unit mass, 1/s^2.
    pub spring_k: f64,
    /// Spring damping per unit mass, 1/s.
    pub spring_c: f64,
    /// Camera viewing direction; throws and rolls head away from the camera.
    pub launch_direction: Vec3,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, launch_direction: Vec3) -> TaskSpec {
        TaskSpec {
            kind,
            throw_speed: 6.0,
            roll_speed: 2.0,
            drag_path: None,
            spring_k: 50.0,
            spring_c: 10.0,
            launch_direction,
        }
    }

    pub fn with_path(mut self, path: PathSpec) -> TaskSpec {
        self.drag_path = Some(path);
        self
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if self.kind == TaskKind::Drag && self.drag_path.is_none() {
            return Err(PhysicsError::InvalidTask("drag requires a path".into()));
        }
        if !(self.throw_speed >= 0.0 && self.roll_speed >= 0.0) {
            return Err(PhysicsError::InvalidTask("speeds must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

/// Per-frame poses; frame 0 is the initial placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    /// Whether any contact occurred during the substeps leading to the frame.
    pub contacts: Vec<bool>,
    /// Global index (1-based) of the first substep that resolved a contact.
    pub first_contact_substep: Option<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.poses.iter().map(|p| p.position)
    }
}

/// Resolved contact during one substep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub normal: Vec3,
    /// Normal velocity before resolution (negative when approaching).
    pub normal_speed_in: f64,
    /// Normal velocity after resolution.
    pub normal_speed_out: f64,
    pub penetration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: BodyState,
    /// First contact resolved in this step, if any.
    pub contact: Option<Contact>,
}

/// Planar damped spring toward `target` (per unit mass when `k`, `c` are).
pub fn drag_force(p: Vec3, v: Vec3, target: Vec3, k: f64, c: f64) -> Vec3 {
    let f = (target - p) * k - v * c;
    Vec3::new(f.x, f.y, 0.0)
}

/// Advances `body` by one substep of length `dt` under gravity plus
/// `task_force` (newtons), resolving contacts against `scene`.
pub fn step(
    body: &BodyState,
    scene: Option<&Bvh>,
    task_force: Vec3,
    dt: f64,
    cfg: &SimConfig,
) -> Result<StepOutcome, PhysicsError> {
    let g = cfg.gravity;
    let energy_start = body.specific_energy(g);
    let mut s = *body;
    s.linear_velocity += (cfg.gravity_vector() + task_force / s.mass) * dt;
    s.position += s.linear_velocity * dt;
    let energy_free = s.specific_energy(g);

    let mut first_contact = None;
    if let Some(scene) = scene {
        let r = s.proxy_radius;
        let rest_speed = REST_SPEED_STEPS * g * dt;
        for _ in 0..CONTACT_PASSES {
            let near = scene.nearest(s.position);
            if near.distance >= r {
                break;
            }
            let mut n = (s.position - near.point)
                .try_normalize()
                .unwrap_or(near.face_normal);
            if n.dot(near.face_normal) < 0.0 {
                // center went behind a one-sided surface
                n = near.face_normal;
            }
            let penetration = r - near.distance;
            s.position = near.point + n * r;

            let v = s.linear_velocity;
            let vn = v.dot(n);
            if vn >= 0.0 {
                continue;
            }
            let vt = v - n * vn;
            let e = if -vn < rest_speed { 0.0 } else { cfg.restitution };
            let vt_len = vt.length();
            let vt_new = if vt_len > 0.0 {
                let keep =
                    (1.0 - cfg.friction_coefficient * (1.0 + e) * vn.abs() / vt_len).max(0.0);
                vt * keep
            } else {
                vt
            };
            let vn_out = -e * vn;
            s.linear_velocity = vt_new + n * vn_out;
            s.angular_velocity = n.cross(vt_new) / r;
            if first_contact.is_none() {
                first_contact = Some(Contact {
                    normal: n,
                    normal_speed_in: vn,
                    normal_speed_out: vn_out,
                    penetration,
                });
            }
        }
        if let Some(c) = first_contact.as_mut() {
            // projection lifts the body; never let a contact add energy
            let budget = energy_start.max(energy_free);
            let excess = s.specific_energy(g) - budget;
            if excess > 0.0 {
                let vn = s.linear_velocity.dot(c.normal);
                if vn > 0.0 {
                    let vt = s.linear_velocity - c.normal * vn;
                    let vn_new = (vn * vn - 2.0 * excess).max(0.0).sqrt();
                    s.linear_velocity = vt + c.normal * vn_new;
                    c.normal_speed_out = vn_new;
                }
            }
        }
    }

    s.orientation = (Quat::from_scaled_axis(s.angular_velocity * dt) * s.orientation).normalize();
    if !s.is_finite() {
        return Err(PhysicsError::Diverged { substep: 0 });
    }
    Ok(StepOutcome {
        state: s,
        contact: first_contact,
    })
}

/// Runs the task from `initial` and records one pose per frame.
pub fn simulate(
    initial: &BodyState,
    task: &TaskSpec,
    scene: Option<&Bvh>,
    cfg: &SimConfig,
) -> Result<Trajectory, PhysicsError> {
    cfg.validate()?;
    task.validate()?;
    if !(initial.mass > 0.0 && initial.proxy_radius > 0.0) || !initial.is_finite() {
        return Err(PhysicsError::InvalidTask("initial body state is invalid".into()));
    }
    let frames = cfg.frames as usize;
    let pose = |b: &BodyState| Pose {
        position: b.position,
        orientation: b.orientation,
    };

    if task.kind == TaskKind::Static {
        let touching = scene.is_some_and(|s| {
            s.clearance(initial.position, initial.proxy_radius) <= 1e-6
        });
        return Ok(Trajectory {
            poses: vec![pose(initial); frames],
            contacts: vec![touching; frames],
            first_contact_substep: None,
        });
    }

    let mut body = *initial;
    body.linear_velocity = initial_velocity(initial, task, scene)?;
    let path = task.drag_path.map(|p| p.anchored(initial.position));
    let dt = cfg.dt();
    let substeps = cfg.substeps_per_frame();
    let duration = cfg.duration();

    let mut poses = Vec::with_capacity(frames);
    let mut contacts = Vec::with_capacity(frames);
    let mut counter: u64 = 0;
    let mut touched = false;
    let mut first_contact_substep = None;
    for _ in 0..frames {
        poses.push(pose(&body));
        contacts.push(touched);
        touched = false;
        for _ in 0..substeps {
            counter += 1;
            let force = match (&path, task.kind) {
                (Some(path), TaskKind::Drag) => {
                    let s = (counter as f64 * dt / duration).min(1.0);
                    let target = path_point(path, s)?;
                    drag_force(
                        body.position,
                        body.linear_velocity,
                        target,
                        task.spring_k * body.mass,
                        task.spring_c * body.mass,
                    )
                }
                _ => Vec3::ZERO,
            };
            let out = step(&body, scene, force, dt, cfg).map_err(|e| match e {
                PhysicsError::Diverged { .. } => PhysicsError::Diverged { substep: counter },
                other => other,
            })?;
            if out.contact.is_some() {
                touched = true;
                first_contact_substep.get_or_insert(counter);
            }
            body = out.state;
        }
    }
    Ok(Trajectory {
        poses,
        contacts,
        first_contact_substep,
    })
}

fn initial_velocity(
    body: &BodyState,
    task: &TaskSpec,
    scene: Option<&Bvh>,
) -> Result<Vec3, PhysicsError> {
    let forward = task.launch_direction;
    Ok(match task.kind {
        TaskKind::Drop | TaskKind::Drag | TaskKind::Static => Vec3::ZERO,
        TaskKind::Throw => {
            let dir = Vec3::new(forward.x, forward.y, 0.0)
                .try_normalize()
                .ok_or_else(|| PhysicsError::InvalidTask("launch direction is vertical".into()))?;
            dir * task.throw_speed
        }
        TaskKind::Roll => {
            let normal = support_normal(body, scene);
            let dir = forward
                .reject_from(normal)
                .try_normalize()
                .ok_or_else(|| PhysicsError::InvalidTask("launch direction is along the support normal".into()))?;
            dir * task.roll_speed
        }
    })
}

/// Normal of the surface the body rests on, or world up when it is not
/// touching anything.
fn support_normal(body: &BodyState, scene: Option<&Bvh>) -> Vec3 {
    let Some(scene) = scene else {
        return Vec3::UP;
    };
    let near = scene.nearest(body.position);
    if near.distance > body.proxy_radius + 1e-3 {
        return Vec3::UP;
    }
    let n = (body.position - near.point)
        .try_normalize()
        .unwrap_or(near.face_normal);
    if n.dot(near.face_normal) < 0.0 {
        near.face_normal
    } else {
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::quad_mesh;

    fn floor() -> Bvh {
        Bvh::build(&quad_mesh(
            Vec3::new(-50.0, -50.0, 0.0),
            Vec3::new(100.0, 0.0, 0.0),
            Vec3::new(0.0, 100.0, 0.0),
        ))
        .unwrap()
    }

    #[test]
    fn free_step_from_rest() {
        let cfg = SimConfig::default();
        let dt = cfg.dt();
        let b = BodyState::at_rest(Vec3::new(0.0, 0.0, 5.0), 0.1);
        let out = step(&b, None, Vec3::ZERO, dt, &cfg).unwrap();
        assert_eq!(out.state.linear_velocity.z, -cfg.gravity * dt);
        assert!((out.state.position.z - (5.0 - cfg.gravity * dt * dt)).abs() < 1e-15);
        assert!(out.contact.is_none());
    }

    #[test]
    fn head_on_impact_obeys_restitution() {
        let cfg = SimConfig::default();
        let f = floor();
        let mut b = BodyState::at_rest(Vec3::new(0.0, 0.0, 0.205), 0.2);
        b.linear_velocity = Vec3::new(0.0, 0.0, -3.0);
        let out = step(&b, Some(&f), Vec3::ZERO, cfg.dt(), &cfg).unwrap();
        let c = out.contact.unwrap();
        assert!((c.normal_speed_out / -c.normal_speed_in - 0.4).abs() < 1e-6);
        assert_eq!(out.state.position.z, 0.2);
    }

    #[test]
    fn resting_contact_keeps_position() {
        let cfg = SimConfig::default();
        let f = floor();
        let b = BodyState::at_rest(Vec3::new(0.3, -0.2, 0.25), 0.25);
        let out = step(&b, Some(&f), Vec3::ZERO, cfg.dt(), &cfg).unwrap();
        assert!((out.state.position - b.position).length() < 1e-9);
        assert_eq!(out.state.linear_velocity, Vec3::ZERO);
    }

    #[test]
    fn drag_force_examples() {
        let t = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(drag_force(t, Vec3::ZERO, t, 50.0, 10.0), Vec3::ZERO);
        assert_eq!(
            drag_force(t - Vec3::X, Vec3::ZERO, t, 50.0, 10.0),
            Vec3::new(50.0, 0.0, 0.0)
        );
        assert_eq!(
            drag_force(t, Vec3::new(0.0, 2.0, 5.0), t, 50.0, 10.0),
            Vec3::new(0.0, -20.0, 0.0)
        );
    }

    #[test]
    fn static_task_never_moves() {
        let cfg = SimConfig::default();
        let b = BodyState::at_rest(Vec3::new(0.0, 0.0, 0.3), 0.3);
        let tr = simulate(&b, &TaskSpec::new(TaskKind::Static, Vec3::X), Some(&floor()), &cfg).unwrap();
        assert_eq!(tr.len(), 81);
        assert!(tr.poses.iter().all(|p| p.position == b.position && p.orientation == Quat::IDENTITY));
    }

    #[test]
    fn drag_without_path_is_rejected() {
        let cfg = SimConfig::default();
        let b = BodyState::at_rest(Vec3::new(0.0, 0.0, 0.3), 0.3);
        let err = simulate(&b, &TaskSpec::new(TaskKind::Drag, Vec3::X), None, &cfg).unwrap_err();
        assert!(matches!(err, PhysicsError::InvalidTask(_)));
    }

    #[test]
    fn substep_rate_must_divide_evenly() {
        let cfg = SimConfig {
            substep_hz: 250,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(SimConfig::default().substeps_per_frame(), 15);
    }

    #[test]
    fn non_finite_state_diverges() {
        let cfg = SimConfig::default();
        let mut b = BodyState::at_rest(Vec3::new(0.0, 0.0, 1.0), 0.1);
        b.linear_velocity = Vec3::new(f64::INFINITY, 0.0, 0.0);
        assert!(matches!(
            step(&b, None, Vec3::ZERO, cfg.dt(), &cfg),
            Err(PhysicsError::Diverged { .. })
        ));
    }

    #[test]
    fn rolling_ball_spins_without_slip() {
        let cfg = SimConfig::default();
        let f = floor();
        let b = BodyState::at_rest(Vec3::new(0.0, 0.0, 0.1), 0.1);
        let tr = simulate(&b, &TaskSpec::new(TaskKind::Roll, Vec3::new(1.0, 0.0, -0.3)), Some(&f), &cfg).unwrap();
        let p1 = tr.poses[1].position;
        assert!(p1.x > 0.0 && p1.y.abs() < 1e-12);
        assert!((p1.z - 0.1).abs() < 1e-9);
        // rotation about +Y for motion along +X
        let q = tr.poses[1].orientation;
        assert!(q.y > 0.0 && q.x.abs() < 1e-12 && q.z.abs() < 1e-12);
    }
}
