//! Registration-consistency metric.
//!
//! Both frames are smoothed with a 9x9 Gaussian (sigma 2), the source is
//! warped into the target by the chained homography, the overlap of the two
//! circular fields of view is measured against the target FOV, and pairs
//! whose overlap is under 25% are reported as failed. Surviving pairs are
//! cropped to the overlap's bounding box and scored with SSIM restricted to
//! overlap pixels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_separable, gaussian_kernel_1d};
use crate::homography::{chain, Homography};
use crate::raster::{FovMask, Image};
use crate::registration::RegistrationResult;
use crate::warp::{warp_image, warp_mask};

pub const SMOOTHING_RADIUS: usize = 4;
pub const SMOOTHING_SIGMA: f64 = 2.0;
/// Pairs whose overlap covers less than this fraction of the target FOV fail.
pub const MIN_OVERLAP_FRACTION: f64 = 0.25;
pub const DEFAULT_GAP: usize = 5;

/// SSIM constants for a dynamic range of 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window_radius: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window_radius: 5,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

/// The 9x9 smoothing kernel as a row-major 2D array (outer product of the
/// normalized 1D kernel).
pub fn smoothing_kernel_2d() -> [[f64; 9]; 9] {
    let k = gaussian_kernel_1d(SMOOTHING_RADIUS, SMOOTHING_SIGMA);
    let mut out = [[0.0; 9]; 9];
    for (y, row) in out.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            *v = k[y] * k[x];
        }
    }
    out
}

/// 9x9 Gaussian smoothing, sigma 2, reflect-101 borders.
pub fn smooth(img: &Image) -> Image {
    convolve_separable(img, &gaussian_kernel_1d(SMOOTHING_RADIUS, SMOOTHING_SIGMA))
}

/// Inclusive pixel rectangle in target coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CropRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyStatus {
    Scored,
    FailedLowOverlap,
}

impl ConsistencyStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConsistencyStatus::Scored => "scored",
            ConsistencyStatus::FailedLowOverlap => "failed_low_overlap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyOutcome {
    pub status: ConsistencyStatus,
    /// Present iff `status` is `Scored`.
    pub ssim: Option<f64>,
    pub overlap_fraction: f64,
    pub crop: Option<CropRect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub source_index: usize,
    pub target_index: usize,
    pub gap: usize,
}

/// Overlap between the target FOV and the source FOV warped by `h`, and its
/// size relative to the target FOV.
pub fn overlap_region(h: &Homography, fov: &FovMask) -> Result<(FovMask, f64)> {
    overlap_region_with(h, fov, fov)
}

/// [`overlap_region`] for frames with distinct source and target FOVs.
pub fn overlap_region_with(
    h: &Homography,
    source_fov: &FovMask,
    target_fov: &FovMask,
) -> Result<(FovMask, f64)> {
    let (w, ht) = target_fov.dims();
    let warped = warp_mask(source_fov, h, w, ht)?;
    let overlap = target_fov.and(&warped)?;
    let denom = target_fov.count();
    let fraction = if denom == 0 {
        0.0
    } else {
        overlap.count() as f64 / denom as f64
    };
    Ok((overlap, fraction))
}

/// Separable Gaussian convolution with zero padding (no border reflection),
/// used for masked local statistics.
fn convolve_zero(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() as i64 / 2;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wt) in kernel.iter().enumerate() {
                let xx = x as i64 + k as i64 - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += wt * data[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wt) in kernel.iter().enumerate() {
                let yy = y as i64 + k as i64 - r;
                if yy >= 0 && (yy as usize) < h {
                    acc += wt * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Mean SSIM of two single-channel images over the pixels where `mask` is
/// true. Local statistics use a Gaussian window renormalized over masked
/// pixels, so pixels outside the mask never contribute.
pub fn masked_ssim(a: &Image, b: &Image, mask: &FovMask, params: &SsimParams) -> Result<f64> {
    if a.dims() != b.dims() || a.dims() != mask.dims() {
        return Err(Error::DimensionMismatch(format!(
            "ssim inputs {:?}, {:?}, mask {:?}",
            a.dims(),
            b.dims(),
            mask.dims()
        )));
    }
    if a.channels() != 1 || b.channels() != 1 {
        return Err(Error::DimensionMismatch(
            "ssim expects single-channel images".into(),
        ));
    }
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyInput("ssim mask has no pixels"));
    }
    let (w, h) = a.dims();
    let k = gaussian_kernel_1d(params.window_radius, params.window_sigma);
    let m: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v { 1.0 } else { 0.0 })
        .collect();
    let (xa, xb) = (a.data(), b.data());
    let prod = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..w * h).map(|i| m[i] * f(i)).collect() };
    let wsum = convolve_zero(&m, w, h, &k);
    let sa = convolve_zero(&prod(&|i| xa[i]), w, h, &k);
    let sb = convolve_zero(&prod(&|i| xb[i]), w, h, &k);
    let saa = convolve_zero(&prod(&|i| xa[i] * xa[i]), w, h, &k);
    let sbb = convolve_zero(&prod(&|i| xb[i] * xb[i]), w, h, &k);
    let sab = convolve_zero(&prod(&|i| xa[i] * xb[i]), w, h, &k);

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let mut total = 0.0;
    for i in 0..w * h {
        if !mask.data()[i] {
            continue;
        }
        let z = wsum[i];
        let (mu_a, mu_b) = (sa[i] / z, sb[i] / z);
        let var_a = saa[i] / z - mu_a * mu_a;
        let var_b = sbb[i] / z - mu_b * mu_b;
        let cov = sab[i] / z - mu_a * mu_b;
        let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        total += num / den;
    }
    Ok((total / n as f64).clamp(-1.0, 1.0))
}

fn crop_image(img: &Image, r: &CropRect) -> Image {
    let ch = img.channels();
    let mut data = Vec::with_capacity(r.width() * r.height() * ch);
    for y in r.y0..=r.y1 {
        for x in r.x0..=r.x1 {
            for c in 0..ch {
                data.push(img.get(x, y, c));
            }
        }
    }
    Image::from_raw(r.width(), r.height(), ch, data)
}

fn crop_mask(mask: &FovMask, r: &CropRect) -> FovMask {
    FovMask::from_fn(r.width(), r.height(), |x, y| mask.get(r.x0 + x, r.y0 + y))
}

/// Scores how well `h` (source -> target) aligns `source` with `target`.
pub fn consistency_score(
    source: &Image,
    target: &Image,
    h: &Homography,
    fov: &FovMask,
) -> Result<ConsistencyOutcome> {
    consistency_score_with(source, target, h, fov, fov, &SsimParams::default())
}

/// [`consistency_score`] with per-frame FOVs and explicit SSIM parameters.
pub fn consistency_score_with(
    source: &Image,
    target: &Image,
    h: &Homography,
    source_fov: &FovMask,
    target_fov: &FovMask,
    params: &SsimParams,
) -> Result<ConsistencyOutcome> {
    if source.dims() != target.dims()
        || source.dims() != source_fov.dims()
        || target.dims() != target_fov.dims()
        || source.channels() != target.channels()
    {
        return Err(Error::DimensionMismatch(format!(
            "source {:?}x{}, target {:?}x{}, fovs {:?}/{:?}",
            source.dims(),
            source.channels(),
            target.dims(),
            target.channels(),
            source_fov.dims(),
            target_fov.dims()
        )));
    }
    let (w, ht) = target.dims();
    let src_s = smooth(source);
    let tgt_s = smooth(target);
    let (warped, valid) = warp_image(&src_s, h, w, ht)?;
    let (overlap, fraction) = overlap_region_with(h, source_fov, target_fov)?;
    if fraction < MIN_OVERLAP_FRACTION {
        return Ok(ConsistencyOutcome {
            status: ConsistencyStatus::FailedLowOverlap,
            ssim: None,
            overlap_fraction: fraction,
            crop: None,
        });
    }
    let scored = overlap.and(&valid)?;
    let Some((x0, y0, x1, y1)) = scored.bounding_box() else {
        return Ok(ConsistencyOutcome {
            status: ConsistencyStatus::FailedLowOverlap,
            ssim: None,
            overlap_fraction: fraction,
            crop: None,
        });
    };
    let crop = CropRect { x0, y0, x1, y1 };
    let a = crop_image(&warped, &crop);
    let b = crop_image(&tgt_s, &crop);
    let m = crop_mask(&scored, &crop);
    let channels = a.channels();
    let mut sum = 0.0;
    for c in 0..channels {
        sum += masked_ssim(&a.channel(c), &b.channel(c), &m, params)?;
    }
    Ok(ConsistencyOutcome {
        status: ConsistencyStatus::Scored,
        ssim: Some(sum / channels as f64),
        overlap_fraction: fraction,
        crop: Some(crop),
    })
}

/// Scores every pair `(i, i + gap)` using the chained pairwise homographies.
pub fn sequence_consistency(
    frames: &[Image],
    pairwise: &[RegistrationResult],
    gap: usize,
    fov: &FovMask,
) -> Result<Vec<(PairSpec, ConsistencyOutcome)>> {
    let hs: Vec<Homography> = pairwise.iter().map(|r| r.h).collect();
    sequence_consistency_homographies(frames, &hs, gap, fov)
}

/// [`sequence_consistency`] over bare homographies.
pub fn sequence_consistency_homographies(
    frames: &[Image],
    pairwise: &[Homography],
    gap: usize,
    fov: &FovMask,
) -> Result<Vec<(PairSpec, ConsistencyOutcome)>> {
    if gap < 1 {
        return Err(Error::InvalidConfig("gap must be >= 1".into()));
    }
    if frames.len() <= gap {
        return Err(Error::TooFewFrames {
            required: gap + 1,
            got: frames.len(),
        });
    }
    if pairwise.len() + 1 != frames.len() {
        return Err(Error::LengthMismatch {
            expected: frames.len() - 1,
            got: pairwise.len(),
        });
    }
    (0..frames.len() - gap)
        .into_par_iter()
        .map(|i| {
            let h = chain(pairwise, i, gap)?;
            let outcome = consistency_score(&frames[i], &frames[i + gap], &h, fov)?;
            Ok((
                PairSpec {
                    source_index: i,
                    target_index: i + gap,
                    gap,
                },
                outcome,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::circular_mask;

    fn texture(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.25 * (x * 0.3).sin() * (y * 0.23).cos() + 0.2 * ((x - y) * 0.11).sin()
        })
    }

    #[test]
    fn kernel_center_weight_closed_form() {
        let k = smoothing_kernel_2d();
        let mut total = 0.0;
        for y in -4i32..=4 {
            for x in -4i32..=4 {
                total += (-((x * x + y * y) as f64) / 8.0).exp();
            }
        }
        assert!((k[4][4] - 1.0 / total).abs() < 1e-15);
    }

    #[test]
    fn constant_image_unchanged_by_smoothing() {
        let img = Image::filled(13, 11, 1, 0.3).unwrap();
        assert!(smooth(&img).data().iter().all(|v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn ssim_self_is_exactly_one() {
        let img = texture(40, 30);
        let m = FovMask::filled(40, 30, true);
        assert_eq!(
            masked_ssim(&img, &img, &m, &SsimParams::default()).unwrap(),
            1.0
        );
    }

    #[test]
    fn ssim_rejects_empty_mask() {
        let img = texture(8, 8);
        let m = FovMask::filled(8, 8, false);
        assert!(masked_ssim(&img, &img, &m, &SsimParams::default()).is_err());
    }

    #[test]
    fn overlap_identity_and_disjoint() {
        let fov = circular_mask(64, 64, 0.0);
        let (o, f) = overlap_region(&Homography::identity(), &fov).unwrap();
        assert_eq!(o, fov);
        assert_eq!(f, 1.0);
        let (_, f) = overlap_region(&Homography::translation(64.0, 0.0), &fov).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn identical_frames_score_one() {
        let img = texture(64, 64);
        let fov = circular_mask(64, 64, 0.0);
        let out = consistency_score(&img, &img, &Homography::identity(), &fov).unwrap();
        assert_eq!(out.status, ConsistencyStatus::Scored);
        assert_eq!(out.ssim, Some(1.0));
        assert_eq!(out.overlap_fraction, 1.0);
    }

    #[test]
    fn gap_larger_than_sequence_is_rejected() {
        let img = texture(32, 32);
        let fov = circular_mask(32, 32, 0.0);
        let frames = vec![img.clone(), img];
        let hs = vec![Homography::identity()];
        assert!(matches!(
            sequence_consistency_homographies(&frames, &hs, 2, &fov),
            Err(Error::TooFewFrames { .. })
        ));
        assert!(sequence_consistency_homographies(&frames, &hs, 0, &fov).is_err());
    }
}
