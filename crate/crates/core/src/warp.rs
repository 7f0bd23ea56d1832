//! Inverse-mapping perspective warps with bilinear interpolation.
//!
//! Destination pixel `(x, y)` is back-projected through `H^-1` to a source
//! location `(u, v)`. The location is valid when `0 <= u <= w - 1` and
//! `0 <= v <= h - 1`; on the last row or column the missing neighbor carries
//! zero weight, so the identity warp reproduces the full frame exactly.

use rayon::prelude::*;

use crate::error::Result;
use crate::homography::{Homography, Point2};
use crate::raster::{FovMask, Image, LabelMask};

/// Disk inscribed in the frame, shrunk by `margin_fraction` of its radius.
///
/// Pixel `(x, y)` covers the unit square whose center is `(x + 0.5, y + 0.5)`
/// in continuous coordinates; the disk is centered at `(width / 2, height / 2)`.
pub fn circular_mask(width: usize, height: usize, margin_fraction: f64) -> FovMask {
    let radius = width.min(height) as f64 / 2.0 * (1.0 - margin_fraction);
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    FovMask::from_fn(width, height, |x, y| {
        let dx = x as f64 + 0.5 - cx;
        let dy = y as f64 + 0.5 - cy;
        dx.hypot(dy) < radius
    })
}

/// Bilinear sample location: top-left neighbor and fractional offsets.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tap {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub fx: f64,
    pub fy: f64,
}

impl Tap {
    #[inline]
    pub fn new(u: f64, v: f64, width: usize, height: usize) -> Option<Tap> {
        let (wmax, hmax) = ((width - 1) as f64, (height - 1) as f64);
        if !(u >= 0.0 && u <= wmax && v >= 0.0 && v <= hmax) {
            return None;
        }
        let x0 = u.floor() as usize;
        let y0 = v.floor() as usize;
        Some(Tap {
            x0,
            y0,
            x1: (x0 + 1).min(width - 1),
            y1: (y0 + 1).min(height - 1),
            fx: u - x0 as f64,
            fy: v - y0 as f64,
        })
    }

    /// Interpolates a single-channel row-major buffer of the given width.
    #[inline]
    pub fn sample(&self, data: &[f64], width: usize) -> f64 {
        self.sample_strided(data, width, 1, 0)
    }

    #[inline]
    pub fn sample_strided(&self, data: &[f64], width: usize, stride: usize, c: usize) -> f64 {
        let at = |x: usize, y: usize| data[(y * width + x) * stride + c];
        let top = at(self.x0, self.y0) * (1.0 - self.fx) + at(self.x1, self.y0) * self.fx;
        let bottom = at(self.x0, self.y1) * (1.0 - self.fx) + at(self.x1, self.y1) * self.fx;
        top * (1.0 - self.fy) + bottom * self.fy
    }
}

/// Axis-aligned destination window `[x0, x0 + width) x [y0, y0 + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Region {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

/// Warps `src` into an `out_width` x `out_height` frame. Returns the warped
/// image (invalid pixels are 0) and the mask of valid pixels.
pub fn warp_image(
    src: &Image,
    h: &Homography,
    out_width: usize,
    out_height: usize,
) -> Result<(Image, FovMask)> {
    let region = Region {
        x0: 0,
        y0: 0,
        width: out_width,
        height: out_height,
    };
    warp_image_region(src, h, region)
}

/// Same as [`warp_image`] restricted to a window of a larger destination
/// canvas. Output buffers have the window's size.
pub(crate) fn warp_image_region(
    src: &Image,
    h: &Homography,
    region: Region,
) -> Result<(Image, FovMask)> {
    let inv = h.inverse()?;
    let ch = src.channels();
    let (sw, sh) = src.dims();
    let mut data = vec![0.0; region.width * region.height * ch];
    let mut valid = vec![false; region.width * region.height];
    data.par_chunks_mut(region.width * ch)
        .zip(valid.par_chunks_mut(region.width))
        .enumerate()
        .for_each(|(row, (out, ok))| {
            let y = (region.y0 + row) as f64;
            for col in 0..region.width {
                let x = (region.x0 + col) as f64;
                let Ok(p) = inv.map_point(Point2::new(x, y)) else {
                    continue;
                };
                if let Some(tap) = Tap::new(p.x, p.y, sw, sh) {
                    for c in 0..ch {
                        out[col * ch + c] = tap.sample_strided(src.data(), sw, ch, c);
                    }
                    ok[col] = true;
                }
            }
        });
    Ok((
        Image::from_raw(region.width, region.height, ch, data),
        FovMask::new(region.width, region.height, valid)?,
    ))
}

#[inline]
fn nearest(p: Point2, width: usize, height: usize) -> Option<(usize, usize)> {
    let (wmax, hmax) = ((width - 1) as f64, (height - 1) as f64);
    if !(p.x >= 0.0 && p.x <= wmax && p.y >= 0.0 && p.y <= hmax) {
        return None;
    }
    let x = ((p.x + 0.5).floor() as usize).min(width - 1);
    let y = ((p.y + 0.5).floor() as usize).min(height - 1);
    Some((x, y))
}

/// Nearest-neighbor mask warp: a destination pixel is true iff its
/// back-projection is in bounds and lands on a true source pixel.
pub fn warp_mask(
    src: &FovMask,
    h: &Homography,
    out_width: usize,
    out_height: usize,
) -> Result<FovMask> {
    let region = Region {
        x0: 0,
        y0: 0,
        width: out_width,
        height: out_height,
    };
    warp_mask_region(src, h, region)
}

pub(crate) fn warp_mask_region(src: &FovMask, h: &Homography, region: Region) -> Result<FovMask> {
    let inv = h.inverse()?;
    let (sw, sh) = src.dims();
    let mut data = vec![false; region.width * region.height];
    data.par_chunks_mut(region.width)
        .enumerate()
        .for_each(|(row, out)| {
            let y = (region.y0 + row) as f64;
            for (col, o) in out.iter_mut().enumerate() {
                let x = (region.x0 + col) as f64;
                if let Ok(p) = inv.map_point(Point2::new(x, y)) {
                    if let Some((sx, sy)) = nearest(p, sw, sh) {
                        *o = src.get(sx, sy);
                    }
                }
            }
        });
    FovMask::new(region.width, region.height, data)
}

/// Nearest-neighbor label warp; out-of-bounds pixels become `fill`.
pub fn warp_labels(
    src: &LabelMask,
    h: &Homography,
    out_width: usize,
    out_height: usize,
    fill: u8,
) -> Result<LabelMask> {
    let inv = h.inverse()?;
    let (sw, sh) = src.dims();
    let mut data = vec![fill; out_width * out_height];
    for y in 0..out_height {
        for x in 0..out_width {
            if let Ok(p) = inv.map_point(Point2::new(x as f64, y as f64)) {
                if let Some((sx, sy)) = nearest(p, sw, sh) {
                    data[y * out_width + x] = src.get(sx, sy);
                }
            }
        }
    }
    LabelMask::new(out_width, out_height, data)
}
