//! Flat-shaded ray-cast renderer with visibility masks, plus binary PPM/PGM
//! reading and writing.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::geometry::{Bvh, HitRecord, Quat, TriMesh, Vec3};
use crate::physics::{Pose, Trajectory};
use crate::placement::posed_mesh;

/// Object id reserved for the foreground object.
pub const FOREGROUND_ID: u32 = u32::MAX;
pub const MASK_FOREGROUND: u8 = 0;
pub const MASK_BACKGROUND: u8 = 255;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB.
    pub data: Vec<u8>,
}

impl FrameBuffer {
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> FrameBuffer {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        FrameBuffer {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major; 0 marks the foreground object, 255 everything else.
    pub data: Vec<u8>,
}

impl MaskFrame {
    pub fn filled(width: u32, height: u32, value: u8) -> MaskFrame {
        MaskFrame {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == MASK_FOREGROUND).count()
    }

    pub fn is_binary(&self) -> bool {
        self.data
            .iter()
            .all(|&v| v == MASK_FOREGROUND || v == MASK_BACKGROUND)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSettings {
    pub background: [u8; 3],
    /// Unit vector pointing toward the light.
    pub light_direction: Vec3,
    pub light_intensity: f64,
    pub ambient: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            background: [30, 34, 42],
            light_direction: Vec3::new(0.3, -0.5, 1.0).normalize(),
            light_intensity: 0.75,
            ambient: 0.25,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stable per-object surface color with channels in `[0.25, 0.95]`.
pub fn albedo(object_id: u32) -> [f64; 3] {
    let h = splitmix64(object_id as u64);
    let ch = |shift: u32| 0.25 + 0.7 * ((h >> shift) & 0xff) as f64 / 255.0;
    [ch(0), ch(8), ch(16)]
}

fn shade(hit: &HitRecord, view_dir: Vec3, settings: &RenderSettings) -> [u8; 3] {
    let mut n = hit.face_normal;
    if n.dot(view_dir) > 0.0 {
        n = -n;
    }
    let light = settings.ambient + settings.light_intensity * n.dot(settings.light_direction).max(0.0);
    albedo(hit.object_id).map(|a| ((a * light).clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Object mesh at `pose` wrapped in a ray-cast structure tagged with the
/// foreground id.
pub fn object_bvh(object_mesh: &TriMesh, scale: f64, pose: &Pose) -> Bvh {
    let posed = posed_mesh(object_mesh, scale, pose.orientation, pose.position);
    Bvh::build_tagged(&[(&posed, FOREGROUND_ID)]).expect("object mesh is non-empty")
}

/// Nearest of the two hits; the object wins only when strictly nearer.
fn pick<'a>(scene: Option<&'a HitRecord>, object: Option<&'a HitRecord>) -> Option<&'a HitRecord> {
    match (scene, object) {
        (Some(s), Some(o)) => Some(if o.t < s.t { o } else { s }),
        (s, o) => s.or(o),
    }
}

struct Canvas<'a> {
    cam: &'a Camera,
    settings: &'a RenderSettings,
    frame: FrameBuffer,
    mask: MaskFrame,
}

impl Canvas<'_> {
    fn put(&mut self, x: u32, y: u32, dir: Vec3, hit: Option<&HitRecord>) {
        let i = y as usize * self.cam.width as usize + x as usize;
        let rgb = hit.map_or(self.settings.background, |h| shade(h, dir, self.settings));
        self.frame.data[3 * i..3 * i + 3].copy_from_slice(&rgb);
        self.mask.data[i] = match hit {
            Some(h) if h.object_id == FOREGROUND_ID => MASK_FOREGROUND,
            _ => MASK_BACKGROUND,
        };
    }
}

fn render_both(
    scene: Option<&Bvh>,
    object: Option<&Bvh>,
    cam: &Camera,
    settings: &RenderSettings,
) -> (FrameBuffer, MaskFrame) {
    let (w, h) = (cam.width, cam.height);
    let mut canvas = Canvas {
        cam,
        settings,
        frame: FrameBuffer::filled(w, h, settings.background),
        mask: MaskFrame::filled(w, h, MASK_BACKGROUND),
    };
    for y in 0..h {
        for x in 0..w {
            let ray = cam.ray_through(x as f64 + 0.5, y as f64 + 0.5);
            let s = scene.and_then(|b| b.ray_cast(&ray));
            let o = object.and_then(|b| b.ray_cast(&ray));
            canvas.put(x, y, ray.direction, pick(s.as_ref(), o.as_ref()));
        }
    }
    (canvas.frame, canvas.mask)
}

/// RGB frame with the object at `pose`. One ray per pixel center, flat
/// Lambert shading, no shadows.
pub fn render_frame(
    scene: Option<&Bvh>,
    object_mesh: &TriMesh,
    scale: f64,
    pose: &Pose,
    cam: &Camera,
    settings: &RenderSettings,
) -> FrameBuffer {
    let object = object_bvh(object_mesh, scale, pose);
    render_both(scene, Some(&object), cam, settings).0
}

/// Visibility mask: 0 where the object is the first thing a pixel ray hits.
pub fn render_mask(
    scene: Option<&Bvh>,
    object_mesh: &TriMesh,
    scale: f64,
    pose: &Pose,
    cam: &Camera,
) -> MaskFrame {
    let object = object_bvh(object_mesh, scale, pose);
    render_both(scene, Some(&object), cam, &RenderSettings::default()).1
}

/// Frames and masks for every pose of `trajectory`.
///
/// Scene hits are cast once and reused; object rays are only cast inside the
/// object's projected box, which gives the same bytes as rendering each frame
/// from scratch.
pub fn render_video(
    scene: Option<&Bvh>,
    object_mesh: &TriMesh,
    scale: f64,
    trajectory: &Trajectory,
    cam: &Camera,
    settings: &RenderSettings,
) -> (Vec<FrameBuffer>, Vec<MaskFrame>) {
    let (w, h) = (cam.width, cam.height);
    let rays: Vec<_> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| cam.ray_through(x as f64 + 0.5, y as f64 + 0.5))
        .collect();
    let scene_hits: Vec<Option<HitRecord>> = rays
        .iter()
        .map(|r| scene.and_then(|b| b.ray_cast(r)))
        .collect();
    let mut base = Canvas {
        cam,
        settings,
        frame: FrameBuffer::filled(w, h, settings.background),
        mask: MaskFrame::filled(w, h, MASK_BACKGROUND),
    };
    for (i, (ray, hit)) in rays.iter().zip(&scene_hits).enumerate() {
        base.put(i as u32 % w, i as u32 / w, ray.direction, hit.as_ref());
    }

    let mut frames = Vec::with_capacity(trajectory.len());
    let mut masks = Vec::with_capacity(trajectory.len());
    for pose in &trajectory.poses {
        let object = object_bvh(object_mesh, scale, pose);
        let mut canvas = Canvas {
            cam,
            settings,
            frame: base.frame.clone(),
            mask: base.mask.clone(),
        };
        if let Some((x0, y0, x1, y1)) = object_window(cam, object_mesh, scale, pose) {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = (y * w + x) as usize;
                    if let Some(o) = object.ray_cast(&rays[i]) {
                        let chosen = pick(scene_hits[i].as_ref(), Some(&o));
                        canvas.put(x, y, rays[i].direction, chosen);
                    }
                }
            }
        }
        frames.push(canvas.frame);
        masks.push(canvas.mask);
    }
    (frames, masks)
}

/// Pixel window that can contain the object, or `None` if it is off screen.
fn object_window(
    cam: &Camera,
    mesh: &TriMesh,
    scale: f64,
    pose: &Pose,
) -> Option<(u32, u32, u32, u32)> {
    let verts = crate::placement::posed_vertices(mesh, scale, pose.orientation, pose.position);
    let (w, h) = (cam.width as i64, cam.height as i64);
    match cam.projected_extent(&verts) {
        // some vertex is behind the camera: the projection is unbounded
        None => Some((0, 0, cam.width - 1, cam.height - 1)),
        Some((x0, y0, x1, y1)) => {
            let x0 = x0.floor() as i64 - 1;
            let y0 = y0.floor() as i64 - 1;
            let x1 = x1.floor() as i64 + 1;
            let y1 = y1.floor() as i64 + 1;
            if x1 < 0 || y1 < 0 || x0 >= w || y0 >= h {
                return None;
            }
            Some((
                x0.clamp(0, w - 1) as u32,
                y0.clamp(0, h - 1) as u32,
                x1.clamp(0, w - 1) as u32,
                y1.clamp(0, h - 1) as u32,
            ))
        }
    }
}

/// Pose with identity orientation at `position`.
pub fn pose_at(position: Vec3) -> Pose {
    Pose {
        position,
        orientation: Quat::IDENTITY,
    }
}

pub fn encode_ppm(frame: &FrameBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.extend_from_slice(&frame.data);
    out
}

pub fn encode_pgm(mask: &MaskFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend_from_slice(&mask.data);
    out
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), RenderError> {
    fs::write(path, bytes).map_err(|source| RenderError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_frame(frame: &FrameBuffer, path: impl AsRef<Path>) -> Result<(), RenderError> {
    write_bytes(path.as_ref(), &encode_ppm(frame))
}

pub fn write_mask(mask: &MaskFrame, path: impl AsRef<Path>) -> Result<(), RenderError> {
    write_bytes(path.as_ref(), &encode_pgm(mask))
}

/// Parses a binary PNM header with the given magic, returning width, height
/// and the payload.
fn parse_pnm<'a>(bytes: &'a [u8], magic: &[u8; 2]) -> Result<(u32, u32, &'a [u8]), String> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(format!("missing {} magic", String::from_utf8_lossy(magic)));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("malformed header")?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed header".into());
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    Ok((w, h, &bytes[pos + 1..]))
}

fn read_pnm(path: &Path, magic: &[u8; 2], channels: usize) -> Result<(u32, u32, Vec<u8>), RenderError> {
    let bytes = fs::read(path).map_err(|source| RenderError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format = |message: String| RenderError::Format {
        path: path.to_path_buf(),
        message,
    };
    let (w, h, payload) = parse_pnm(&bytes, magic).map_err(format)?;
    let expected = w as usize * h as usize * channels;
    if payload.len() != expected {
        return Err(format(format!(
            "expected {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    Ok((w, h, payload.to_vec()))
}

pub fn read_frame(path: impl AsRef<Path>) -> Result<FrameBuffer, RenderError> {
    let (width, height, data) = read_pnm(path.as_ref(), b"P6", 3)?;
    Ok(FrameBuffer {
        width,
        height,
        data,
    })
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskFrame, RenderError> {
    let (width, height, data) = read_pnm(path.as_ref(), b"P5", 1)?;
    Ok(MaskFrame {
        width,
        height,
        data,
    })
}

fn sorted_files(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<PathBuf>, RenderError> {
    let io = |source| RenderError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with(prefix) && name.ends_with(ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads every `frame_*.ppm` in `dir`, in name order.
pub fn read_frame_sequence(dir: impl AsRef<Path>) -> Result<Vec<FrameBuffer>, RenderError> {
    sorted_files(dir.as_ref(), "frame_", ".ppm")?.iter().map(read_frame).collect()
}

/// Reads every `mask_*.pgm` in `dir`, in name order.
pub fn read_mask_sequence(dir: impl AsRef<Path>) -> Result<Vec<MaskFrame>, RenderError> {
    sorted_files(dir.as_ref(), "mask_", ".pgm")?.iter().map(read_mask).collect()
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.ppm")
}

pub fn mask_file_name(index: usize) -> String {
    format!("mask_{index:05}.pgm")
}
