//! Synthetic planar scenes viewed along random homography trajectories.
//!
//! A master texture (octave value noise plus dark vessel-like strokes) is
//! observed through a square camera whose pose performs a bounded random
//! walk in translation, rotation and scale, with optional per-frame
//! perspective jitter. Every frame is cut from the master by an exactly known
//! homography, so pairwise and absolute ground truth is available.

use std::fs;
use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset_io::{
    write_image, write_label, write_manifest, write_mask, SequenceManifest, FOV_FILE, IMAGES_DIR,
    LABELS_DIR, MANIFEST_FILE,
};
use crate::error::{Error, Result};
use crate::homography::{invert, Homography, Point2};
use crate::raster::{FovMask, Image, LabelMask};
use crate::warp::{circular_mask, warp_image, warp_labels};

pub const GT_FILE: &str = "gt_homographies.json";

/// Master texture side relative to the frame side.
const MASTER_FACTOR: usize = 3;
const SCALE_BOUNDS: (f64, f64) = (0.8, 1.25);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub n_frames: usize,
    /// Side of the square frames, pixels.
    pub frame_size: usize,
    /// Per-axis bound on the per-frame translation step, pixels.
    pub max_step_translation: f64,
    /// Bound on the per-frame rotation step, degrees.
    pub max_step_rotation: f64,
    /// Bound on the per-frame relative scale change.
    pub max_step_scale: f64,
    /// Bound on the per-frame projective row, in half-frame normalized units.
    pub perspective_jitter: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            n_frames: 50,
            frame_size: 448,
            max_step_translation: 4.0,
            max_step_rotation: 1.0,
            max_step_scale: 0.01,
            perspective_jitter: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_frames must be >= 2, got {}",
                self.n_frames
            )));
        }
        if self.frame_size < 64 {
            return Err(Error::SizeTooSmall(self.frame_size));
        }
        let bounds = [
            ("max_step_translation", self.max_step_translation),
            ("max_step_rotation", self.max_step_rotation),
            ("max_step_scale", self.max_step_scale),
            ("perspective_jitter", self.perspective_jitter),
            ("noise_sigma", self.noise_sigma),
        ];
        for (name, v) in bounds {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if self.max_step_scale >= 0.5 {
            return Err(Error::InvalidConfig("max_step_scale must be < 0.5".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub frames: Vec<Image>,
    /// Binary vessel maps (class 1 on strokes), aligned with `frames`.
    pub vessel_labels: Vec<LabelMask>,
    pub fov: FovMask,
    /// Frame `i` -> frame `i + 1`.
    pub gt_pairwise: Vec<Homography>,
    /// Frame `i` -> frame 0.
    pub gt_absolute: Vec<Homography>,
    /// Frame `i` -> master texture.
    pub poses: Vec<Homography>,
}

/// Smooth interpolation weight with zero first and second derivative at the ends.
fn smootherstep(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn value_noise_octave(size: usize, spacing: f64, rng: &mut ChaCha8Rng, out: &mut [f64], amp: f64) {
    let n = (size as f64 / spacing).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    for y in 0..size {
        let gy = y as f64 / spacing;
        let (iy, ty) = (gy.floor() as usize, smootherstep(gy.fract()));
        for x in 0..size {
            let gx = x as f64 / spacing;
            let (ix, tx) = (gx.floor() as usize, smootherstep(gx.fract()));
            let at = |i: usize, j: usize| lattice[j * n + i];
            let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
            let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
            out[y * size + x] += amp * (top * (1.0 - ty) + bottom * ty);
        }
    }
}

fn catmull_rom(p0: Point2, p1: Point2, p2: Point2, p3: Point2, t: f64) -> Point2 {
    let t2 = t * t;
    let t3 = t2 * t;
    let f = |a: f64, b: f64, c: f64, d: f64| {
        0.5 * (2.0 * b
            + (-a + c) * t
            + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2
            + (-a + 3.0 * b - 3.0 * c + d) * t3)
    };
    Point2::new(f(p0.x, p1.x, p2.x, p3.x), f(p0.y, p1.y, p2.y, p3.y))
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.x - a.x - t * dx).hypot(p.y - a.y - t * dy)
}

/// Random smooth polyline through a drifting sequence of control points.
fn random_stroke(size: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let s = size as f64;
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut p = Point2::new(rng.random_range(0.0..s), rng.random_range(0.0..s));
    let count = rng.random_range(6..=12);
    let mut ctrl = Vec::with_capacity(count);
    for _ in 0..count {
        ctrl.push(p);
        heading += rng.random_range(-0.6..0.6);
        let step = rng.random_range(20.0..50.0);
        p = Point2::new(p.x + step * heading.cos(), p.y + step * heading.sin());
    }
    let mut pts = Vec::new();
    for k in 0..ctrl.len() - 1 {
        let p0 = ctrl[k.saturating_sub(1)];
        let p1 = ctrl[k];
        let p2 = ctrl[k + 1];
        let p3 = ctrl[(k + 2).min(ctrl.len() - 1)];
        let samples = (p1.distance(&p2) / 2.0).ceil().max(1.0) as usize;
        for i in 0..samples {
            pts.push(catmull_rom(p0, p1, p2, p3, i as f64 / samples as f64));
        }
    }
    pts.push(*ctrl.last().expect("non-empty"));
    pts
}

/// Master texture and its vessel label map.
fn generate_master(size: usize, seed: u64) -> Result<(Image, LabelMask)> {
    if size < 64 {
        return Err(Error::SizeTooSmall(size));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; size * size];
    let octaves = [(48.0, 1.0), (24.0, 0.5), (12.0, 0.25), (6.0, 0.125)];
    for (spacing, amp) in octaves {
        value_noise_octave(size, spacing, &mut rng, &mut acc, amp);
    }
    let (lo, hi) = acc
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = (hi - lo).max(1e-12);
    let mut tex: Vec<f64> = acc.iter().map(|v| 0.1 + 0.8 * (v - lo) / span).collect();

    // Darkening per pixel, max over strokes.
    let mut dark = vec![0.0f64; size * size];
    let mut coverage_max = vec![0.0f64; size * size];
    let strokes = (size * size / 40_000).max(6);
    for _ in 0..strokes {
        let pts = random_stroke(size, &mut rng);
        let half = rng.random_range(1.0..3.0);
        let strength = rng.random_range(0.3..0.6);
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let pad = half + 1.0;
            let x0 = (a.x.min(b.x) - pad).floor().max(0.0) as usize;
            let y0 = (a.y.min(b.y) - pad).floor().max(0.0) as usize;
            let x1 = ((a.x.max(b.x) + pad).ceil().max(0.0) as usize).min(size - 1);
            let y1 = ((a.y.max(b.y) + pad).ceil().max(0.0) as usize).min(size - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let d = segment_distance(Point2::new(x as f64, y as f64), a, b);
                    let cov = (half + 0.5 - d).clamp(0.0, 1.0);
                    if cov > 0.0 {
                        let i = y * size + x;
                        dark[i] = dark[i].max(strength * cov);
                        coverage_max[i] = coverage_max[i].max(cov);
                    }
                }
            }
        }
    }
    for (t, d) in tex.iter_mut().zip(&dark) {
        *t = (*t * (1.0 - d)).clamp(0.0, 1.0);
    }
    let labels = coverage_max.iter().map(|&c| u8::from(c >= 0.5)).collect();
    Ok((
        Image::from_raw(size, size, 1, tex),
        LabelMask::new(size, size, labels)?,
    ))
}

/// Deterministic band-limited texture with vessel-like strokes, in `[0, 1]`.
pub fn generate_texture(size: usize, seed: u64) -> Result<Image> {
    Ok(generate_master(size, seed)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pose {
    tx: f64,
    ty: f64,
    angle: f64,
    log_scale: f64,
    persp: (f64, f64),
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let mut v = v;
    // A single step never exceeds the interval width, so one fold suffices
    // except for degenerate intervals.
    if v > hi {
        v = 2.0 * hi - v;
    }
    if v < lo {
        v = 2.0 * lo - v;
    }
    v.clamp(lo, hi)
}

/// Frame -> master homography of a pose.
fn pose_matrix(pose: &Pose, frame: usize, master: usize) -> Result<Homography> {
    let fc = (frame as f64 - 1.0) / 2.0;
    let half = frame as f64 / 2.0;
    let mc = (master as f64 - 1.0) / 2.0;
    let s = pose.log_scale.exp();
    let (sn, cs) = pose.angle.sin_cos();
    let center = Matrix3::new(1.0, 0.0, -fc, 0.0, 1.0, -fc, 0.0, 0.0, 1.0);
    let persp = Matrix3::new(
        1.0,
        0.0,
        0.0,
        0.0,
        1.0,
        0.0,
        pose.persp.0 / half,
        pose.persp.1 / half,
        1.0,
    );
    let rot_scale = Matrix3::new(s * cs, -s * sn, 0.0, s * sn, s * cs, 0.0, 0.0, 0.0, 1.0);
    let place = Matrix3::new(
        1.0,
        0.0,
        mc + pose.tx,
        0.0,
        1.0,
        mc + pose.ty,
        0.0,
        0.0,
        1.0,
    );
    Homography::from_matrix(place * rot_scale * persp * center)
}

/// `a^-1 · b`, exactly identity when the two are identical.
fn relative(a: &Homography, b: &Homography) -> Result<Homography> {
    if a == b {
        return Ok(Homography::identity());
    }
    Ok(invert(a)?.compose(b))
}

pub fn generate_sequence(spec: &TrajectorySpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    let f = spec.frame_size;
    let m = f * MASTER_FACTOR;
    let (master, master_labels) = generate_master(m, spec.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);

    // Keep the rotated, scaled frame (plus a perspective allowance) inside the master.
    let reach = f as f64 / 2.0
        * SCALE_BOUNDS.1
        * std::f64::consts::SQRT_2
        * (1.0 + 2.0 * spec.perspective_jitter);
    let t_bound = (m as f64 / 2.0 - reach - 4.0).max(0.0);
    let (ls_lo, ls_hi) = (SCALE_BOUNDS.0.ln(), SCALE_BOUNDS.1.ln());

    let jitter = |rng: &mut ChaCha8Rng| {
        if spec.perspective_jitter > 0.0 {
            (
                rng.random_range(-spec.perspective_jitter..=spec.perspective_jitter),
                rng.random_range(-spec.perspective_jitter..=spec.perspective_jitter),
            )
        } else {
            (0.0, 0.0)
        }
    };
    let uniform = |rng: &mut ChaCha8Rng, bound: f64| {
        if bound > 0.0 {
            rng.random_range(-bound..=bound)
        } else {
            0.0
        }
    };

    let mut pose = Pose {
        tx: 0.0,
        ty: 0.0,
        angle: 0.0,
        log_scale: 0.0,
        persp: jitter(&mut rng),
    };
    let mut poses = Vec::with_capacity(spec.n_frames);
    poses.push(pose_matrix(&pose, f, m)?);
    for _ in 1..spec.n_frames {
        let dtx = uniform(&mut rng, spec.max_step_translation);
        let dty = uniform(&mut rng, spec.max_step_translation);
        let dang = uniform(&mut rng, spec.max_step_rotation).to_radians();
        let dsc = uniform(&mut rng, spec.max_step_scale);
        pose = Pose {
            tx: reflect(pose.tx + dtx, -t_bound, t_bound),
            ty: reflect(pose.ty + dty, -t_bound, t_bound),
            angle: pose.angle + dang,
            log_scale: reflect(pose.log_scale + (1.0 + dsc).ln(), ls_lo, ls_hi),
            persp: jitter(&mut rng),
        };
        poses.push(pose_matrix(&pose, f, m)?);
    }

    let fov = circular_mask(f, f, 0.0);
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut vessel_labels = Vec::with_capacity(spec.n_frames);
    for pose_h in &poses {
        let to_frame = invert(pose_h)?;
        let (img, _) = warp_image(&master, &to_frame, f, f)?;
        let mut data = img.into_data();
        for (i, v) in data.iter_mut().enumerate() {
            if !fov.data()[i] {
                *v = 0.0;
            } else if spec.noise_sigma > 0.0 {
                *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
        frames.push(Image::new(f, f, 1, data)?);
        let lab = warp_labels(&master_labels, &to_frame, f, f, 0)?;
        let masked: Vec<u8> = lab
            .data()
            .iter()
            .zip(fov.data())
            .map(|(&l, &keep)| if keep { l } else { 0 })
            .collect();
        vessel_labels.push(LabelMask::new(f, f, masked)?);
    }

    let gt_pairwise = poses
        .windows(2)
        .map(|w| relative(&w[1], &w[0]))
        .collect::<Result<Vec<_>>>()?;
    let gt_absolute = poses
        .iter()
        .map(|p| relative(&poses[0], p))
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticSequence {
        frames,
        vessel_labels,
        fov,
        gt_pairwise,
        gt_absolute,
        poses,
    })
}

/// Ground-truth file written next to a synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub frame_count: usize,
    pub pairwise: Vec<Homography>,
    pub absolute: Vec<Homography>,
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruthFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a sequence in the standard directory layout plus ground truth.
pub fn write_sequence(
    dir: &Path,
    video_id: &str,
    seq: &SyntheticSequence,
) -> Result<SequenceManifest> {
    let images = dir.join(IMAGES_DIR);
    let labels = dir.join(LABELS_DIR);
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    fs::create_dir_all(&labels).map_err(|e| Error::io(&labels, e))?;
    let mut frame_paths = Vec::new();
    let mut label_paths = Vec::new();
    for (i, (frame, label)) in seq.frames.iter().zip(&seq.vessel_labels).enumerate() {
        let name = format!("frame_{i:05}.png");
        let fp = images.join(&name);
        write_image(&fp, frame, None)?;
        let lp = labels.join(&name);
        write_label(&lp, label)?;
        frame_paths.push(Path::new(IMAGES_DIR).join(&name));
        label_paths.push(Path::new(LABELS_DIR).join(&name));
    }
    write_mask(&dir.join(FOV_FILE), &seq.fov)?;
    let gt = GroundTruthFile {
        frame_count: seq.frames.len(),
        pairwise: seq.gt_pairwise.clone(),
        absolute: seq.gt_absolute.clone(),
    };
    let gt_path = dir.join(GT_FILE);
    let text = serde_json::to_string_pretty(&gt).map_err(|source| Error::Json {
        path: gt_path.clone(),
        source,
    })?;
    fs::write(&gt_path, text + "\n").map_err(|e| Error::io(&gt_path, e))?;
    let (w, h) = seq.fov.dims();
    let manifest = SequenceManifest {
        video_id: video_id.to_string(),
        resolution: (w, h),
        frame_paths,
        label_paths: Some(label_paths),
        fov_margin_fraction: 0.0,
    };
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
