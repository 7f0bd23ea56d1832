//! Homogeneous-coordinate algebra for 3x3 planar homographies.
//!
//! A pairwise homography `H_i` maps pixel coordinates of frame `i` into frame
//! `i + 1`. Longer spans are obtained by [`chain`], which multiplies the
//! pairwise transforms right to left so that the earliest one is applied first.
//!
//! Every stored matrix is kept in a canonical scale: `m[2][2] = 1` when that
//! entry is not vanishing, unit Frobenius norm otherwise. Canonical matrices
//! can be compared element-wise and serialized without ambiguity.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cutoff below which a homogeneous scale is considered zero.
pub const HOMOGENEOUS_EPS: f64 = 1e-12;

/// A point in pixel coordinates. Pixel `(x, y)` has its center at `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// An invertible projective transform in canonical scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0),
        }
    }

    /// Uniform scale about `center`.
    pub fn scaling_about(s: f64, center: Point2) -> Self {
        Self {
            m: Matrix3::new(
                s,
                0.0,
                center.x * (1.0 - s),
                0.0,
                s,
                center.y * (1.0 - s),
                0.0,
                0.0,
                1.0,
            ),
        }
    }

    /// Similarity transform: rotation by `angle` radians and uniform `scale`
    /// about `center`, followed by a translation.
    pub fn similarity(angle: f64, scale: f64, center: Point2, translation: Point2) -> Self {
        let (s, c) = angle.sin_cos();
        let a = scale * c;
        let b = scale * s;
        let tx = center.x - a * center.x + b * center.y + translation.x;
        let ty = center.y - b * center.x - a * center.y + translation.y;
        Self {
            m: Matrix3::new(a, -b, tx, b, a, ty, 0.0, 0.0, 1.0),
        }
    }

    /// Builds a homography from a raw matrix, validating invertibility and
    /// bringing it to canonical scale.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        let h = normalize_matrix(m)?;
        if !is_invertible(&h) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { m: h })
    }

    /// Row-major constructor.
    pub fn from_row_major(v: [f64; 9]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_row_slice(&v))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn is_affine(&self) -> bool {
        self.m[(2, 0)] == 0.0 && self.m[(2, 1)] == 0.0
    }

    /// Maps a point through the homography, dividing out the homogeneous scale.
    pub fn map_point(&self, p: Point2) -> Result<Point2> {
        let v = self.m * Vector3::new(p.x, p.y, 1.0);
        if v.z.abs() <= HOMOGENEOUS_EPS {
            return Err(Error::PointAtInfinity { w: v.z });
        }
        Ok(Point2::new(v.x / v.z, v.y / v.z))
    }

    /// `self · other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Homography) -> Homography {
        compose(self, other)
    }

    pub fn inverse(&self) -> Result<Homography> {
        invert(self)
    }

    /// Largest element-wise difference to `other`, both in canonical scale.
    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        (self.m - other.m).amax()
    }

    /// Largest reprojection distance between `self` and `other` over the four
    /// pixel-center corners of a `width` x `height` frame.
    pub fn max_corner_error(&self, other: &Homography, width: usize, height: usize) -> f64 {
        frame_corners(width, height)
            .iter()
            .map(|&c| match (self.map_point(c), other.map_point(c)) {
                (Ok(a), Ok(b)) => a.distance(&b),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

impl TryFrom<[f64; 9]> for Homography {
    type Error = Error;

    fn try_from(v: [f64; 9]) -> Result<Self> {
        Homography::from_row_major(v)
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        h.to_row_major()
    }
}

/// Corners of a frame under the pixel-center convention.
pub fn frame_corners(width: usize, height: usize) -> [Point2; 4] {
    let w = width.saturating_sub(1) as f64;
    let h = height.saturating_sub(1) as f64;
    [
        Point2::new(0.0, 0.0),
        Point2::new(w, 0.0),
        Point2::new(w, h),
        Point2::new(0.0, h),
    ]
}

fn is_invertible(m: &Matrix3<f64>) -> bool {
    // Relative test so that the canonical-scale convention does not matter.
    let det = m.determinant();
    let scale = m.norm().powi(3);
    det.is_finite() && det.abs() > 1e-14 * scale
}

fn normalize_matrix(m: Matrix3<f64>) -> Result<Matrix3<f64>> {
    let corner = m[(2, 2)];
    if corner.abs() > HOMOGENEOUS_EPS {
        return Ok(m / corner);
    }
    let norm = m.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroMatrix);
    }
    Ok(m / norm)
}

/// Rescales `h` to canonical form. Point mapping is unchanged.
pub fn normalize(h: &Homography) -> Result<Homography> {
    Ok(Homography {
        m: normalize_matrix(h.m)?,
    })
}

/// Applies an arbitrary nonzero scale to a homography matrix and renormalizes.
/// Used to check projective scale invariance.
pub fn scaled(h: &Homography, s: f64) -> Result<Homography> {
    Homography::from_matrix(h.m * s)
}

/// Returns `normalize(a · b)`.
pub fn compose(a: &Homography, b: &Homography) -> Homography {
    // Product of two invertible matrices is invertible; only normalization can
    // fail, and it cannot for a nonsingular product.
    Homography {
        m: normalize_matrix(a.m * b.m).expect("product of invertible homographies is nonzero"),
    }
}

/// Chains `n` pairwise homographies starting at `i`:
/// `hs[i + n - 1] · ... · hs[i + 1] · hs[i]`, mapping frame `i` to frame `i + n`.
pub fn chain(hs: &[Homography], i: usize, n: usize) -> Result<Homography> {
    let end = i.checked_add(n).ok_or(Error::IndexOutOfRange {
        what: "chain end",
        index: usize::MAX,
        limit: hs.len(),
    })?;
    if end > hs.len() {
        return Err(Error::IndexOutOfRange {
            what: "chain end",
            index: end,
            limit: hs.len(),
        });
    }
    Ok(hs[i..end]
        .iter()
        .fold(Homography::identity(), |acc, h| compose(h, &acc)))
}

pub fn invert(h: &Homography) -> Result<Homography> {
    let inv = h.m.try_inverse().ok_or(Error::SingularMatrix)?;
    Homography::from_matrix(inv)
}
