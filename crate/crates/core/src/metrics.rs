//! Evaluation metrics for paired videos: per-frame bounding-box IoU along a
//! trajectory, SSIM restricted to background pixels, and Bradley–Terry
//! strengths fitted with iterative Luce spectral ranking.
//!
//! Foreground identity scores based on learned image features are not
//! provided; they need a neural encoder.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::Bbox2D;
use crate::render::{FrameBuffer, MaskFrame, RenderError, MASK_FOREGROUND};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
/// Foreground is grown by a disk of this radius before taking the complement.
pub const DILATION_RADIUS: i64 = 5;

pub const ILSR_TOLERANCE: f64 = 1e-8;
pub const ILSR_MAX_ITERATIONS: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("input mismatch: {0}")]
    Mismatch(String),
    #[error("no frame has a ground-truth box")]
    NoValidFrames,
    #[error("no background windows to score")]
    EmptyBackground,
    #[error("comparison graph is not strongly connected; use alpha > 0")]
    Disconnected,
    #[error("ranking did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("invalid votes: {0}")]
    InvalidVotes(String),
    #[error("{path}, line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Tight inclusive box around foreground (value 0) pixels.
pub fn bbox_from_mask(mask: &MaskFrame) -> Option<Bbox2D> {
    let mut b: Option<(i64, i64, i64, i64)> = None;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) != MASK_FOREGROUND {
                continue;
            }
            let (x, y) = (x as i64, y as i64);
            b = Some(match b {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }
    b.map(|(x0, y0, x1, y1)| Bbox2D::new(x0, y0, x1, y1))
}

/// Intersection over union with inclusive pixel areas.
pub fn iou(a: &Bbox2D, b: &Bbox2D) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min) + 1).max(0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min) + 1).max(0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Per-frame metric values and their temporal mean. `None` marks frames
/// excluded from the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSeries {
    pub values: Vec<Option<f64>>,
    pub mean: f64,
}

impl FrameSeries {
    fn from_values(values: Vec<Option<f64>>) -> Option<FrameSeries> {
        let valid: Vec<f64> = values.iter().flatten().copied().collect();
        if valid.is_empty() {
            return None;
        }
        let mean = valid.iter().sum::<f64>() / valid.len() as f64;
        Some(FrameSeries { values, mean })
    }

    pub fn valid_frames(&self) -> usize {
        self.values.iter().flatten().count()
    }
}

fn check_masks(pred: &[MaskFrame], gt: &[MaskFrame]) -> Result<(), MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::Mismatch(format!(
            "{} predicted frames vs {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    let Some(first) = gt.first() else {
        return Err(MetricsError::Mismatch("empty mask video".into()));
    };
    for (i, m) in pred.iter().chain(gt).enumerate() {
        if (m.width, m.height) != (first.width, first.height) {
            return Err(MetricsError::Mismatch(format!(
                "mask {} is {}x{}, expected {}x{}",
                i % gt.len(),
                m.width,
                m.height,
                first.width,
                first.height
            )));
        }
    }
    Ok(())
}

/// Temporal mean of per-frame box IoU. Frames without a ground-truth box
/// are excluded; a missing predicted box scores 0.
pub fn iou_traj(pred: &[MaskFrame], gt: &[MaskFrame]) -> Result<FrameSeries, MetricsError> {
    check_masks(pred, gt)?;
    let values = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let g = bbox_from_mask(g)?;
            Some(bbox_from_mask(p).map_or(0.0, |p| iou(&p, &g)))
        })
        .collect();
    FrameSeries::from_values(values).ok_or(MetricsError::NoValidFrames)
}

fn luma(frame: &FrameBuffer) -> Vec<f64> {
    frame
        .data
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable Gaussian filter keeping only windows fully inside the image.
/// Output is `(w - 10) x (h - 10)`, indexed by the window's top-left corner.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * rows[(y + j) * ow + x])
                .sum();
        }
    }
    out
}

/// Foreground grown by a disk of [`DILATION_RADIUS`].
fn dilate(fg: &[bool], w: usize, h: usize) -> Vec<bool> {
    let r = DILATION_RADIUS;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !fg[y as usize * w + x as usize] {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                    out[ny as usize * w + nx as usize] = true;
                }
            }
        }
    }
    out
}

fn check_frames(a: &FrameBuffer, b: &FrameBuffer, mask: &MaskFrame) -> Result<(), MetricsError> {
    if (a.width, a.height) != (b.width, b.height) || (a.width, a.height) != (mask.width, mask.height) {
        return Err(MetricsError::Mismatch(format!(
            "frame sizes {}x{}, {}x{}, mask {}x{}",
            a.width, a.height, b.width, b.height, mask.width, mask.height
        )));
    }
    Ok(())
}

/// Mean SSIM over 11x11 windows whose center pixel lies in the background,
/// after dilating the foreground (mask value 0) of `mask`.
pub fn masked_ssim(a: &FrameBuffer, b: &FrameBuffer, mask: &MaskFrame) -> Result<f64, MetricsError> {
    check_frames(a, b, mask)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::EmptyBackground);
    }
    let fg: Vec<bool> = mask.data.iter().map(|&v| v == MASK_FOREGROUND).collect();
    let fg = dilate(&fg, w, h);

    let x = luma(a);
    let y = luma(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let k = gaussian_kernel();
    let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|img| filter_valid(img, w, h, &k));

    let ow = w + 1 - SSIM_WINDOW;
    let half = SSIM_WINDOW / 2;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &mux) in mx.iter().enumerate() {
        let (cx, cy) = (i % ow + half, i / ow + half);
        if fg[cy * w + cx] {
            continue;
        }
        let muy = my[i];
        let vx = sxx[i] - mux * mux;
        let vy = syy[i] - muy * muy;
        let cov = sxy[i] - mux * muy;
        let num = (2.0 * mux * muy + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (mux * mux + muy * muy + SSIM_C1) * (vx + vy + SSIM_C2);
        sum += num / den;
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::EmptyBackground);
    }
    Ok(sum / count as f64)
}

/// Union of two masks: foreground where either is foreground.
pub fn mask_union(a: &MaskFrame, b: &MaskFrame) -> Result<MaskFrame, MetricsError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricsError::Mismatch("mask sizes differ".into()));
    }
    let mut out = a.clone();
    for (o, &v) in out.data.iter_mut().zip(&b.data) {
        if v == MASK_FOREGROUND {
            *o = MASK_FOREGROUND;
        }
    }
    Ok(out)
}

/// Temporal mean of [`masked_ssim`]. When predicted-side masks are given,
/// each frame excludes the union of both foregrounds.
pub fn ssim_bg_video(
    pred: &[FrameBuffer],
    gt: &[FrameBuffer],
    gt_masks: &[MaskFrame],
    pred_masks: Option<&[MaskFrame]>,
) -> Result<FrameSeries, MetricsError> {
    if pred.len() != gt.len() || gt.len() != gt_masks.len() {
        return Err(MetricsError::Mismatch(format!(
            "{} predicted frames, {} ground-truth frames, {} masks",
            pred.len(),
            gt.len(),
            gt_masks.len()
        )));
    }
    if let Some(pm) = pred_masks {
        if pm.len() != gt_masks.len() {
            return Err(MetricsError::Mismatch(format!(
                "{} predicted masks vs {} ground-truth masks",
                pm.len(),
                gt_masks.len()
            )));
        }
    }
    if gt.is_empty() {
        return Err(MetricsError::Mismatch("empty video".into()));
    }
    let mut values = Vec::with_capacity(gt.len());
    for i in 0..gt.len() {
        let s = match pred_masks {
            Some(pm) => masked_ssim(&pred[i], &gt[i], &mask_union(&gt_masks[i], &pm[i])?)?,
            None => masked_ssim(&pred[i], &gt[i], &gt_masks[i])?,
        };
        values.push(Some(s));
    }
    Ok(FrameSeries::from_values(values).expect("non-empty"))
}

/// Probability that `i` beats `j` under the Bradley–Terry model.
pub fn bt_prob(u_i: f64, u_j: f64) -> f64 {
    1.0 / (1.0 + (u_j - u_i).exp())
}

/// Named items and pairwise `(winner, loser)` judgments by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteSet {
    pub items: Vec<String>,
    pub votes: Vec<(usize, usize)>,
}

impl VoteSet {
    pub fn new(items: Vec<String>, votes: Vec<(usize, usize)>) -> Result<VoteSet, MetricsError> {
        for (k, &(w, l)) in votes.iter().enumerate() {
            if w >= items.len() || l >= items.len() {
                return Err(MetricsError::InvalidVotes(format!("vote {k}: index out of range")));
            }
            if w == l {
                return Err(MetricsError::InvalidVotes(format!("vote {k}: winner equals loser")));
            }
        }
        Ok(VoteSet { items, votes })
    }

    /// Builds a vote set from named judgments; items are indexed in order of
    /// first appearance.
    pub fn from_named<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<VoteSet, MetricsError> {
        let mut items: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut id = |name: &str| {
            *index.entry(name.to_string()).or_insert_with(|| {
                items.push(name.to_string());
                items.len() - 1
            })
        };
        let votes: Vec<_> = pairs.iter().map(|(w, l)| (id(w.as_ref()), id(l.as_ref()))).collect();
        VoteSet::new(items, votes)
    }

    /// Parses CSV with a `winner,loser` header. `path` is used in messages.
    pub fn from_csv_reader<R: Read>(reader: R, path: &Path) -> Result<VoteSet, MetricsError> {
        let err = |line: u64, message: String| MetricsError::Csv {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
        if headers.is_empty() {
            return Err(err(1, "empty file; expected header `winner,loser`".into()));
        }
        if headers.len() != 2 || &headers[0] != "winner" || &headers[1] != "loser" {
            return Err(err(1, format!("expected header `winner,loser`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut pairs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let (w, l) = (&rec[0], &rec[1]);
            if w.is_empty() || l.is_empty() {
                return Err(err(line, "empty item name".into()));
            }
            if w == l {
                return Err(err(line, format!("`{w}` cannot beat itself")));
            }
            pairs.push((w.to_string(), l.to_string()));
        }
        if pairs.is_empty() {
            return Err(err(1, "no votes".into()));
        }
        VoteSet::from_named(&pairs)
    }

    pub fn read_csv(path: &Path) -> Result<VoteSet, MetricsError> {
        let file = fs::File::open(path).map_err(|source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        VoteSet::from_csv_reader(file, path)
    }
}

/// Fitted strengths, centered to mean zero, in item order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utilities {
    pub items: Vec<String>,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl Utilities {
    /// `(item, utility)` sorted strongest first; ties keep item order.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut r: Vec<(&str, f64)> = self.items.iter().map(String::as_str).zip(self.values.iter().copied()).collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1));
        r
    }
}

fn strongly_connected(n: usize, votes: &[(usize, usize)]) -> bool {
    let reach = |forward: bool| {
        let mut adj = vec![Vec::new(); n];
        for &(w, l) in votes {
            if forward {
                adj[l].push(w);
            } else {
                adj[w].push(l);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary distribution of the continuous-time chain with off-diagonal
/// rates `rates[i][j]` (i to j), by Gaussian elimination on `pi Q = 0`,
/// `sum(pi) = 1`.
fn stationary(rates: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = rates.len();
    // a = Q^T with the last equation replaced by the normalization
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        let out: f64 = (0..n).filter(|&j| j != i).map(|j| rates[i][j]).sum();
        for j in 0..n {
            a[j][i] = if i == j { -out } else { rates[i][j] };
        }
    }
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            let f = row[col] / pivot[col];
            if r != col && f != 0.0 {
                for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    let pi: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
    pi.iter().all(|p| p.is_finite() && *p > 0.0).then_some(pi)
}

fn centered(mut u: Vec<f64>) -> Vec<f64> {
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter_mut().for_each(|v| *v -= mean);
    u
}

/// Regularized Bradley–Terry fit by iterative Luce spectral ranking.
///
/// Each pass builds a chain whose rate from loser to winner accumulates
/// `1 / (pi_w + pi_l)` per vote, on top of a constant rate `alpha` between
/// every pair, and replaces the strengths with its stationary distribution.
pub fn bt_fit_ilsr(votes: &VoteSet, alpha: f64) -> Result<Utilities, MetricsError> {
    let n = votes.items.len();
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(MetricsError::InvalidVotes(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if n == 0 {
        return Err(MetricsError::InvalidVotes("no items".into()));
    }
    let done = |values, iterations| Utilities {
        items: votes.items.clone(),
        values,
        iterations,
    };
    if n == 1 {
        return Ok(done(vec![0.0], 0));
    }
    if alpha == 0.0 && !strongly_connected(n, &votes.votes) {
        return Err(MetricsError::Disconnected);
    }
    let mut u = vec![0.0_f64; n];
    for it in 1..=ILSR_MAX_ITERATIONS {
        let pi: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let mut rates = vec![vec![alpha; n]; n];
        for &(w, l) in &votes.votes {
            rates[l][w] += 1.0 / (pi[w] + pi[l]);
        }
        let next = stationary(&rates).ok_or(MetricsError::Disconnected)?;
        let next = centered(next.iter().map(|p| p.ln()).collect());
        let delta = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        u = next;
        if delta < ILSR_TOLERANCE {
            return Ok(done(u, it));
        }
    }
    Err(MetricsError::NotConverged {
        iterations: ILSR_MAX_ITERATIONS,
    })
}
