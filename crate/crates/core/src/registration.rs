//! Masked pyramidal Lucas-Kanade registration of frame pairs.
//!
//! The warp `W` maps fixed-frame pixels into the moving frame and is refined
//! coarse to fine with forward-additive Gauss-Newton on
//! `sum_x [M(W(x)) - F(x)]^2`. Only pixels inside the field-of-view mask whose
//! warped sample and gradient stencil also lie inside the mask contribute.
//! The returned homography is `W^-1`, i.e. it maps moving-frame coordinates
//! into the fixed frame, which is the role of the pairwise `H_i` when frame
//! `i` is moving and frame `i + 1` is fixed.
//!
//! Internally each level works in centered, scaled coordinates
//! `x' = (x - c) / s` so that the normal matrix stays well conditioned.

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_separable, BINOMIAL_5};
use crate::homography::{frame_corners, Homography, Point2};
use crate::raster::{FovMask, Image};
use crate::warp::Tap;

/// Normal matrices with a condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Step halvings tried before a level is declared stalled.
const MAX_HALVINGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    #[default]
    Affine6,
    Projective8,
}

impl Parameterization {
    pub fn dof(self) -> usize {
        match self {
            Parameterization::Affine6 => 6,
            Parameterization::Projective8 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationConfig {
    pub pyramid_levels: usize,
    pub max_iterations_per_level: usize,
    /// Stop when the update moves every frame corner by less than this (pixels).
    pub convergence_epsilon: f64,
    pub parameterization: Parameterization,
    /// Minimum fraction of masked pixels that must stay valid under the warp.
    pub min_valid_overlap_fraction: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            pyramid_levels: 4,
            max_iterations_per_level: 50,
            convergence_epsilon: 1e-3,
            parameterization: Parameterization::Affine6,
            min_valid_overlap_fraction: 0.25,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidConfig("pyramid_levels must be >= 1".into()));
        }
        if self.max_iterations_per_level < 1 {
            return Err(Error::InvalidConfig(
                "max_iterations_per_level must be >= 1".into(),
            ));
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon <= 0.0 {
            return Err(Error::InvalidConfig(
                "convergence_epsilon must be > 0".into(),
            ));
        }
        if !(self.min_valid_overlap_fraction > 0.0 && self.min_valid_overlap_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "min_valid_overlap_fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Maps moving-frame coordinates into fixed-frame coordinates.
    pub h: Homography,
    /// Mean squared photometric error over valid masked pixels at full resolution.
    pub final_residual: f64,
    /// Gauss-Newton iterations per level, index 0 being full resolution.
    pub iterations_used: Vec<usize>,
    pub converged: bool,
    /// Residual after each accepted step, per level (index 0 = full resolution).
    pub level_residuals: Vec<Vec<f64>>,
    /// Set when the pair fell back to identity inside [`register_sequence`].
    pub failure: Option<String>,
}

/// Smallest level dimension allowed at the top of the pyramid.
const MIN_TOP_SIZE: usize = 4;

/// Builds a Gaussian pyramid: each level is the previous one smoothed with a
/// 5x5 binomial kernel and decimated by two. A decimated mask pixel is true only
/// if every pixel under the smoothing support was true.
pub fn build_pyramid(img: &Image, mask: &FovMask, levels: usize) -> Result<Vec<(Image, FovMask)>> {
    if levels < 1 {
        return Err(Error::InvalidConfig(
            "pyramid needs at least one level".into(),
        ));
    }
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch(format!(
            "image {:?} vs mask {:?}",
            img.dims(),
            mask.dims()
        )));
    }
    let (w, h) = img.dims();
    if (w >> (levels - 1)) < MIN_TOP_SIZE || (h >> (levels - 1)) < MIN_TOP_SIZE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            levels,
        });
    }
    let mut out = Vec::with_capacity(levels);
    out.push((img.clone(), mask.clone()));
    for _ in 1..levels {
        let (prev_img, prev_mask) = out.last().expect("non-empty");
        let smoothed = convolve_separable(prev_img, &BINOMIAL_5);
        let (pw, ph) = prev_img.dims();
        let (nw, nh) = (pw / 2, ph / 2);
        let ch = prev_img.channels();
        let mut data = Vec::with_capacity(nw * nh * ch);
        for y in 0..nh {
            for x in 0..nw {
                for c in 0..ch {
                    data.push(smoothed.get(2 * x, 2 * y, c));
                }
            }
        }
        let next_mask = FovMask::from_fn(nw, nh, |x, y| {
            let (cx, cy) = (2 * x as i64, 2 * y as i64);
            (cy - 2..=cy + 2).all(|yy| {
                (cx - 2..=cx + 2).all(|xx| {
                    xx >= 0
                        && yy >= 0
                        && (xx as usize) < pw
                        && (yy as usize) < ph
                        && prev_mask.get(xx as usize, yy as usize)
                })
            })
        });
        out.push((Image::from_raw(nw, nh, ch, data), next_mask));
    }
    Ok(out)
}

/// Centered, scaled coordinates of one pyramid level.
#[derive(Debug, Clone, Copy)]
pub struct Normalizer {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
}

impl Normalizer {
    pub fn for_frame(width: usize, height: usize) -> Self {
        Self {
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            scale: width.max(height) as f64 / 2.0,
        }
    }

    /// Pixel -> normalized.
    fn matrix(&self) -> Matrix3<f64> {
        let s = 1.0 / self.scale;
        Matrix3::new(s, 0.0, -self.cx * s, 0.0, s, -self.cy * s, 0.0, 0.0, 1.0)
    }

    fn inverse_matrix(&self) -> Matrix3<f64> {
        let s = self.scale;
        Matrix3::new(s, 0.0, self.cx, 0.0, s, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Warp parameters in normalized coordinates:
/// `W' = [[1 + p0, p1, p2], [p3, 1 + p4, p5], [p6, p7, 1]]`.
pub type WarpParams = [f64; 8];

fn params_to_matrix(p: &WarpParams) -> Matrix3<f64> {
    Matrix3::new(
        1.0 + p[0],
        p[1],
        p[2],
        p[3],
        1.0 + p[4],
        p[5],
        p[6],
        p[7],
        1.0,
    )
}

/// Pixel-space warp of a level from its normalized parameters.
pub fn params_to_pixel_warp(p: &WarpParams, norm: &Normalizer) -> Result<Homography> {
    Homography::from_matrix(norm.inverse_matrix() * params_to_matrix(p) * norm.matrix())
}

/// Normalized parameters of a pixel-space warp.
pub fn pixel_warp_to_params(w: &Homography, norm: &Normalizer, dof: usize) -> Result<WarpParams> {
    let m = norm.matrix() * w.matrix() * norm.inverse_matrix();
    let m = Homography::from_matrix(m)?;
    let m = m.matrix();
    if m[(2, 2)] != 1.0 {
        return Err(Error::SingularMatrix);
    }
    let mut p = [
        m[(0, 0)] - 1.0,
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)] - 1.0,
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
    ];
    if dof == 6 {
        p[6] = 0.0;
        p[7] = 0.0;
    }
    Ok(p)
}

/// Something that can be sampled with a spatial gradient at real-valued
/// pixel coordinates.
pub trait GradientSampler {
    /// Value and `(d/du, d/dv)` at `(u, v)`, or `None` if the location is not usable.
    fn sample(&self, u: f64, v: f64) -> Option<(f64, f64, f64)>;
}

/// Residual `M(W(x)) - F(x)` and its derivative with respect to the warp
/// parameters for the fixed pixel at `(x, y)`.
pub fn residual_jacobian<S: GradientSampler + ?Sized>(
    sampler: &S,
    norm: &Normalizer,
    p: &WarpParams,
    x: f64,
    y: f64,
    fixed_value: f64,
) -> Option<(f64, WarpParams)> {
    let a = (x - norm.cx) / norm.scale;
    let b = (y - norm.cy) / norm.scale;
    let xn = (1.0 + p[0]) * a + p[1] * b + p[2];
    let yn = p[3] * a + (1.0 + p[4]) * b + p[5];
    let wn = p[6] * a + p[7] * b + 1.0;
    if wn.abs() <= 1e-12 {
        return None;
    }
    let inv_w = 1.0 / wn;
    let un = xn * inv_w;
    let vn = yn * inv_w;
    let u = un * norm.scale + norm.cx;
    let v = vn * norm.scale + norm.cy;
    let (value, gu, gv) = sampler.sample(u, v)?;
    // d(pixel)/d(normalized) = scale
    let gu = gu * norm.scale * inv_w;
    let gv = gv * norm.scale * inv_w;
    let j = [
        gu * a,
        gu * b,
        gu,
        gv * a,
        gv * b,
        gv,
        -(gu * un + gv * vn) * a,
        -(gu * un + gv * vn) * b,
    ];
    Some((value - fixed_value, j))
}

/// Bilinear sampler over a level image and its central-difference gradients.
struct LevelSampler {
    width: usize,
    height: usize,
    value: Vec<f64>,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
    /// True where all four bilinear taps anchored at the pixel are usable.
    tap_ok: Vec<bool>,
}

impl LevelSampler {
    fn new(img: &Image, usable: &FovMask) -> Self {
        let (w, h) = img.dims();
        let value = img.data().to_vec();
        let mut grad_x = vec![0.0; w * h];
        let mut grad_y = vec![0.0; w * h];
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                if usable.get(x, y) {
                    let i = y * w + x;
                    grad_x[i] = 0.5 * (value[i + 1] - value[i - 1]);
                    grad_y[i] = 0.5 * (value[i + w] - value[i - w]);
                }
            }
        }
        let mut tap_ok = vec![false; w * h];
        for y in 0..h {
            let y1 = (y + 1).min(h - 1);
            for x in 0..w {
                let x1 = (x + 1).min(w - 1);
                tap_ok[y * w + x] = usable.get(x, y)
                    && usable.get(x1, y)
                    && usable.get(x, y1)
                    && usable.get(x1, y1);
            }
        }
        Self {
            width: w,
            height: h,
            value,
            grad_x,
            grad_y,
            tap_ok,
        }
    }
}

impl GradientSampler for LevelSampler {
    #[inline]
    fn sample(&self, u: f64, v: f64) -> Option<(f64, f64, f64)> {
        let t = Tap::new(u, v, self.width, self.height)?;
        if !self.tap_ok[t.y0 * self.width + t.x0] {
            return None;
        }
        Some((
            t.sample(&self.value, self.width),
            t.sample(&self.grad_x, self.width),
            t.sample(&self.grad_y, self.width),
        ))
    }
}

/// Fixed-frame pixels entering the normal equations at one level, with their
/// central-difference gradients.
struct FixedPixels {
    coords: Vec<(f64, f64)>,
    values: Vec<f64>,
    grads: Vec<(f64, f64)>,
}

impl FixedPixels {
    fn new(img: &Image, usable: &FovMask) -> Self {
        let w = img.width();
        let data = img.data();
        let mut coords = Vec::new();
        let mut values = Vec::new();
        let mut grads = Vec::new();
        for y in 0..img.height() {
            for x in 0..w {
                if usable.get(x, y) {
                    let i = y * w + x;
                    coords.push((x as f64, y as f64));
                    values.push(data[i]);
                    grads.push((
                        0.5 * (data[i + 1] - data[i - 1]),
                        0.5 * (data[i + w] - data[i - w]),
                    ));
                }
            }
        }
        Self {
            coords,
            values,
            grads,
        }
    }

    fn len(&self) -> usize {
        self.coords.len()
    }
}

type Normal = SMatrix<f64, 8, 8>;
type Gradient = SVector<f64, 8>;

/// Cost and normal equations at one parameter point.
struct Evaluation {
    mse: f64,
    valid: usize,
    jtj: Normal,
    jtr: Gradient,
}

fn evaluate(
    sampler: &LevelSampler,
    fixed: &FixedPixels,
    norm: &Normalizer,
    p: &WarpParams,
    dof: usize,
) -> Evaluation {
    match dof {
        6 => evaluate_n::<6>(sampler, fixed, norm, p),
        _ => evaluate_n::<8>(sampler, fixed, norm, p),
    }
}

fn evaluate_n<const N: usize>(
    sampler: &LevelSampler,
    fixed: &FixedPixels,
    norm: &Normalizer,
    p: &WarpParams,
) -> Evaluation {
    let mut jtj = [[0.0f64; N]; N];
    let mut jtr = [0.0f64; N];
    let mut sse = 0.0;
    let mut valid = 0usize;
    for (&(x, y), &f) in fixed.coords.iter().zip(&fixed.values) {
        let Some((r, j)) = residual_jacobian(sampler, norm, p, x, y, f) else {
            continue;
        };
        valid += 1;
        sse += r * r;
        for a in 0..N {
            jtr[a] += j[a] * r;
            for b in a..N {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    let mut n = Normal::zeros();
    let mut g = Gradient::zeros();
    for a in 0..N {
        g[a] = jtr[a];
        for b in a..N {
            n[(a, b)] = jtj[a][b];
            n[(b, a)] = jtj[a][b];
        }
    }
    Evaluation {
        mse: if valid > 0 {
            sse / valid as f64
        } else {
            f64::INFINITY
        },
        valid,
        jtj: n,
        jtr: g,
    }
}

fn condition_estimate(n: &Normal, dof: usize) -> f64 {
    let sub = n.view((0, 0), (dof, dof)).clone_owned();
    let eig = SymmetricEigen::new(sub);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the reduced `dof x dof` normal equations for the Gauss-Newton step.
fn gauss_newton_step(e: &Evaluation, dof: usize) -> Option<WarpParams> {
    let a = e.jtj.view((0, 0), (dof, dof)).clone_owned();
    let b = -e.jtr.rows(0, dof).clone_owned();
    let chol = a.cholesky()?;
    let d = chol.solve(&b);
    let mut out = [0.0; 8];
    for i in 0..dof {
        out[i] = d[i];
    }
    Some(out)
}

/// Max displacement of the level-frame corners between two parameter sets.
fn corner_shift(p: &WarpParams, q: &WarpParams, norm: &Normalizer, w: usize, h: usize) -> f64 {
    let map = |p: &WarpParams, c: Point2| {
        let a = (c.x - norm.cx) / norm.scale;
        let b = (c.y - norm.cy) / norm.scale;
        let xn = (1.0 + p[0]) * a + p[1] * b + p[2];
        let yn = p[3] * a + (1.0 + p[4]) * b + p[5];
        let wn = p[6] * a + p[7] * b + 1.0;
        (xn / wn * norm.scale, yn / wn * norm.scale)
    };
    frame_corners(w, h)
        .iter()
        .map(|&c| {
            let (x0, y0) = map(p, c);
            let (x1, y1) = map(q, c);
            (x1 - x0).hypot(y1 - y0)
        })
        .fold(0.0, f64::max)
}

/// Degeneracy check on the fixed image alone: the normal matrix built from
/// the fixed-frame gradients at the identity warp.
fn fixed_condition(fixed: &FixedPixels, norm: &Normalizer, dof: usize) -> f64 {
    let mut n = Normal::zeros();
    for (&(x, y), &(gx, gy)) in fixed.coords.iter().zip(&fixed.grads) {
        let a = (x - norm.cx) / norm.scale;
        let b = (y - norm.cy) / norm.scale;
        let (gu, gv) = (gx * norm.scale, gy * norm.scale);
        let j = [
            gu * a,
            gu * b,
            gu,
            gv * a,
            gv * b,
            gv,
            -(gu * a + gv * b) * a,
            -(gu * a + gv * b) * b,
        ];
        for a in 0..dof {
            for b in a..dof {
                n[(a, b)] += j[a] * j[b];
            }
        }
    }
    for a in 0..dof {
        for b in 0..a {
            n[(a, b)] = n[(b, a)];
        }
    }
    condition_estimate(&n, dof)
}

struct LevelOutcome {
    params: WarpParams,
    iterations: usize,
    residuals: Vec<f64>,
    last_step: f64,
    mse: f64,
}

#[allow(clippy::too_many_arguments)]
fn refine_level(
    level: usize,
    fixed_img: &Image,
    moving_img: &Image,
    mask: &FovMask,
    norm: &Normalizer,
    start: WarpParams,
    cfg: &RegistrationConfig,
) -> Result<LevelOutcome> {
    let dof = cfg.parameterization.dof();
    let (w, h) = fixed_img.dims();
    let usable = mask.eroded(1);
    let sampler = LevelSampler::new(moving_img, &usable);
    let fixed = FixedPixels::new(fixed_img, &usable);
    let reference = fixed.len().max(1) as f64;

    let cond = fixed_condition(&fixed, norm, dof);
    if cond > MAX_CONDITION {
        return Err(Error::DegenerateGradient {
            level,
            condition: cond,
        });
    }

    let mut p = start;
    let mut current = evaluate(&sampler, &fixed, norm, &p, dof);
    let fraction = current.valid as f64 / reference;
    if fixed.len() == 0 || fraction < cfg.min_valid_overlap_fraction {
        return Err(Error::InsufficientOverlap {
            level,
            fraction,
            required: cfg.min_valid_overlap_fraction,
        });
    }

    let mut residuals = vec![current.mse];
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    while iterations < cfg.max_iterations_per_level {
        let cond = condition_estimate(&current.jtj, dof);
        if cond > MAX_CONDITION {
            return Err(Error::DegenerateGradient {
                level,
                condition: cond,
            });
        }
        let Some(delta) = gauss_newton_step(&current, dof) else {
            return Err(Error::DegenerateGradient {
                level,
                condition: f64::INFINITY,
            });
        };
        iterations += 1;

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut cand = p;
            for i in 0..dof {
                cand[i] += alpha * delta[i];
            }
            last_step = corner_shift(&p, &cand, norm, w, h);
            let e = evaluate(&sampler, &fixed, norm, &cand, dof);
            let ok_overlap = e.valid as f64 / reference >= cfg.min_valid_overlap_fraction;
            if ok_overlap && e.mse <= current.mse {
                accepted = Some((cand, e));
                break;
            }
            if last_step < cfg.convergence_epsilon {
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, e)) = accepted else {
            break;
        };
        p = cand;
        current = e;
        residuals.push(current.mse);
        if last_step < cfg.convergence_epsilon {
            break;
        }
    }
    Ok(LevelOutcome {
        params: p,
        iterations,
        residuals,
        last_step,
        mse: current.mse,
    })
}

fn scale_warp(w: &Homography, factor: f64) -> Result<Homography> {
    // Pixel i at the finer level sits at 2i; W_fine = S W_coarse S^-1 with S = diag(f, f, 1).
    let s = Matrix3::new(factor, 0.0, 0.0, 0.0, factor, 0.0, 0.0, 0.0, 1.0);
    let si = Matrix3::new(
        1.0 / factor,
        0.0,
        0.0,
        0.0,
        1.0 / factor,
        0.0,
        0.0,
        0.0,
        1.0,
    );
    Homography::from_matrix(s * w.matrix() * si)
}

/// Registers `moving` onto `fixed`. `init` is an initial guess for the
/// returned moving -> fixed homography.
pub fn register_pair(
    fixed: &Image,
    moving: &Image,
    mask: &FovMask,
    cfg: &RegistrationConfig,
    init: &Homography,
) -> Result<RegistrationResult> {
    cfg.validate()?;
    if fixed.dims() != moving.dims() || fixed.dims() != mask.dims() {
        return Err(Error::DimensionMismatch(format!(
            "fixed {:?}, moving {:?}, mask {:?}",
            fixed.dims(),
            moving.dims(),
            mask.dims()
        )));
    }
    let fixed = fixed.to_luma();
    let moving = moving.to_luma();
    let levels = cfg.pyramid_levels;
    let fixed_pyr = build_pyramid(&fixed, mask, levels)?;
    let moving_pyr = build_pyramid(&moving, mask, levels)?;
    let dof = cfg.parameterization.dof();

    let mut warp = init.inverse()?;
    if dof == 6 && !warp.is_affine() {
        return Err(Error::InvalidConfig(
            "projective initial guess with affine parameterization".into(),
        ));
    }
    warp = scale_warp(&warp, 1.0 / (1u64 << (levels - 1)) as f64)?;

    let mut iterations_used = vec![0; levels];
    let mut level_residuals = vec![Vec::new(); levels];
    let mut converged = false;
    let mut mse = f64::INFINITY;
    for level in (0..levels).rev() {
        let (fi, fm) = &fixed_pyr[level];
        let (mi, _) = &moving_pyr[level];
        let norm = Normalizer::for_frame(fi.width(), fi.height());
        let start = pixel_warp_to_params(&warp, &norm, dof)?;
        let out = refine_level(level, fi, mi, fm, &norm, start, cfg)?;
        iterations_used[level] = out.iterations;
        level_residuals[level] = out.residuals;
        warp = params_to_pixel_warp(&out.params, &norm)?;
        if level > 0 {
            warp = scale_warp(&warp, 2.0)?;
        } else {
            converged = out.last_step < cfg.convergence_epsilon;
            mse = out.mse;
        }
    }
    Ok(RegistrationResult {
        h: warp.inverse()?,
        final_residual: mse,
        iterations_used,
        converged,
        level_residuals,
        failure: None,
    })
}

/// Mean squared difference of two single-channel images over the eroded mask.
fn identity_residual(fixed: &Image, moving: &Image, mask: &FovMask) -> f64 {
    let usable = mask.eroded(1);
    let (mut sse, mut n) = (0.0, 0usize);
    for y in 0..fixed.height() {
        for x in 0..fixed.width() {
            if usable.get(x, y) {
                let d = fixed.get(x, y, 0) - moving.get(x, y, 0);
                sse += d * d;
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sse / n as f64
    }
}

/// Registers every consecutive pair: `result[i]` maps frame `i` into frame
/// `i + 1`. A pair that fails falls back to identity with `converged = false`.
pub fn register_sequence(
    frames: &[Image],
    mask: &FovMask,
    cfg: &RegistrationConfig,
) -> Result<Vec<RegistrationResult>> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            got: frames.len(),
        });
    }
    let dims = frames[0].dims();
    if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
        return Err(Error::DimensionMismatch(format!(
            "frame {:?} differs from {:?}",
            f.dims(),
            dims
        )));
    }
    if mask.dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "mask {:?} vs frames {:?}",
            mask.dims(),
            dims
        )));
    }
    // Fail fast on configurations no pair could satisfy.
    build_pyramid(&frames[0].to_luma(), mask, cfg.pyramid_levels)?;

    let results = (0..frames.len() - 1)
        .into_par_iter()
        .map(|i| {
            let (moving, fixed) = (&frames[i], &frames[i + 1]);
            match register_pair(fixed, moving, mask, cfg, &Homography::identity()) {
                Ok(r) => r,
                Err(e) => RegistrationResult {
                    h: Homography::identity(),
                    final_residual: identity_residual(&fixed.to_luma(), &moving.to_luma(), mask),
                    iterations_used: vec![0; cfg.pyramid_levels],
                    converged: false,
                    level_residuals: vec![Vec::new(); cfg.pyramid_levels],
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(results)
}
