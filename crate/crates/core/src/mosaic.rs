//! Mosaic layout and rendering from chained pairwise homographies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homography::{chain, compose, frame_corners, invert, Homography, Point2};
use crate::raster::{FovMask, Image};
use crate::registration::RegistrationResult;
use crate::warp::{warp_image_region, warp_mask_region, Region};

/// Default limit on either canvas dimension.
pub const DEFAULT_CANVAS_CAP: usize = 8192;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosaicLayout {
    pub anchor_index: usize,
    /// Frame `i` -> canvas coordinates.
    pub per_frame_to_canvas: Vec<Homography>,
    pub canvas_width: usize,
    pub canvas_height: usize,
    /// Canvas origin expressed in anchor-frame coordinates.
    pub offset: Point2,
    pub frame_width: usize,
    pub frame_height: usize,
    /// Frames left out of the canvas because they would exceed the size cap.
    pub excluded: Vec<usize>,
}

impl MosaicLayout {
    /// Frame `i` -> anchor-frame coordinates.
    pub fn frame_to_anchor(&self, i: usize) -> Homography {
        compose(
            &Homography::translation(self.offset.x, self.offset.y),
            &self.per_frame_to_canvas[i],
        )
    }

    pub fn frame_count(&self) -> usize {
        self.per_frame_to_canvas.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    #[default]
    OverwriteLatest,
    RunningMean,
}

/// Homographies mapping each frame into the anchor frame.
pub fn frames_to_anchor(pairwise: &[Homography], anchor_index: usize) -> Result<Vec<Homography>> {
    let n = pairwise.len() + 1;
    if anchor_index >= n {
        return Err(Error::IndexOutOfRange {
            what: "anchor index",
            index: anchor_index,
            limit: n,
        });
    }
    (0..n)
        .map(|i| {
            if i <= anchor_index {
                chain(pairwise, i, anchor_index - i)
            } else {
                invert(&chain(pairwise, anchor_index, i - anchor_index)?)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl Bounds {
    fn of_frame(h: &Homography, w: usize, ht: usize) -> Option<Bounds> {
        let mut b = Bounds {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for c in frame_corners(w, ht) {
            let p = h.map_point(c).ok()?;
            if !p.x.is_finite() || !p.y.is_finite() {
                return None;
            }
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }

    fn union(&self, o: &Bounds) -> Bounds {
        Bounds {
            min_x: self.min_x.min(o.min_x),
            min_y: self.min_y.min(o.min_y),
            max_x: self.max_x.max(o.max_x),
            max_y: self.max_y.max(o.max_y),
        }
    }

    /// Integer canvas size and origin covering these bounds.
    fn canvas(&self) -> (f64, f64, usize, usize) {
        let ox = self.min_x.floor();
        let oy = self.min_y.floor();
        let w = (self.max_x.ceil() - ox) as usize + 1;
        let h = (self.max_y.ceil() - oy) as usize + 1;
        (ox, oy, w, h)
    }
}

/// Computes the canvas for a sequence, anchoring at `anchor_index`.
pub fn layout(
    pairwise: &[RegistrationResult],
    frame_w: usize,
    frame_h: usize,
    anchor_index: usize,
) -> Result<MosaicLayout> {
    let hs: Vec<Homography> = pairwise.iter().map(|r| r.h).collect();
    layout_homographies(&hs, frame_w, frame_h, anchor_index, DEFAULT_CANVAS_CAP)
}

/// [`layout`] over bare homographies with an explicit canvas cap.
///
/// Frames are admitted in order of distance from the anchor; a frame whose
/// corners would push the canvas beyond `canvas_cap` in either dimension, or
/// that maps to infinity, is excluded.
pub fn layout_homographies(
    pairwise: &[Homography],
    frame_w: usize,
    frame_h: usize,
    anchor_index: usize,
    canvas_cap: usize,
) -> Result<MosaicLayout> {
    let to_anchor = frames_to_anchor(pairwise, anchor_index)?;
    let n = to_anchor.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (i.abs_diff(anchor_index), i));

    let mut hull: Option<Bounds> = None;
    let mut excluded = Vec::new();
    for i in order {
        let Some(b) = Bounds::of_frame(&to_anchor[i], frame_w, frame_h) else {
            excluded.push(i);
            continue;
        };
        let candidate = match &hull {
            None => b,
            Some(h) => h.union(&b),
        };
        let (_, _, w, h) = candidate.canvas();
        if w > canvas_cap || h > canvas_cap {
            excluded.push(i);
            continue;
        }
        hull = Some(candidate);
    }
    excluded.sort_unstable();
    let hull = hull.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "anchor frame {frame_w}x{frame_h} exceeds canvas cap {canvas_cap}"
        ))
    })?;
    let (ox, oy, canvas_width, canvas_height) = hull.canvas();
    let shift = Homography::translation(-ox, -oy);
    let per_frame_to_canvas = to_anchor.iter().map(|h| compose(&shift, h)).collect();
    Ok(MosaicLayout {
        anchor_index,
        per_frame_to_canvas,
        canvas_width,
        canvas_height,
        offset: Point2::new(ox, oy),
        frame_width: frame_w,
        frame_height: frame_h,
        excluded,
    })
}

/// Canvas window covering frame `i`, clipped to the canvas.
fn frame_region(lay: &MosaicLayout, i: usize) -> Option<Region> {
    let b = Bounds::of_frame(
        &lay.per_frame_to_canvas[i],
        lay.frame_width,
        lay.frame_height,
    )?;
    let x0 = b.min_x.floor().max(0.0) as usize;
    let y0 = b.min_y.floor().max(0.0) as usize;
    let x1 = (b.max_x.ceil().max(0.0) as usize).min(lay.canvas_width - 1);
    let y1 = (b.max_y.ceil().max(0.0) as usize).min(lay.canvas_height - 1);
    if x0 > x1 || y0 > y1 {
        return None;
    }
    Some(Region {
        x0,
        y0,
        width: x1 - x0 + 1,
        height: y1 - y0 + 1,
    })
}

/// Warps every frame onto the canvas and blends. Returns the mosaic and the
/// union of the frames' valid regions.
pub fn render(
    frames: &[Image],
    masks: &[FovMask],
    lay: &MosaicLayout,
    blend: BlendMode,
) -> Result<(Image, FovMask)> {
    if frames.len() != lay.frame_count() || masks.len() != frames.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frames, {} masks, layout for {}",
            frames.len(),
            masks.len(),
            lay.frame_count()
        )));
    }
    let Some(first) = frames.first() else {
        return Err(Error::EmptyInput("no frames to render"));
    };
    let ch = first.channels();
    for (f, m) in frames.iter().zip(masks) {
        if f.dims() != (lay.frame_width, lay.frame_height)
            || m.dims() != f.dims()
            || f.channels() != ch
        {
            return Err(Error::DimensionMismatch(format!(
                "frame {:?}x{} / mask {:?} vs layout {}x{}x{}",
                f.dims(),
                f.channels(),
                m.dims(),
                lay.frame_width,
                lay.frame_height,
                ch
            )));
        }
    }

    let (cw, chh) = (lay.canvas_width, lay.canvas_height);
    let mut acc = vec![0.0; cw * chh * ch];
    let mut count = vec![0u32; cw * chh];
    for (i, (frame, mask)) in frames.iter().zip(masks).enumerate() {
        if lay.excluded.contains(&i) {
            continue;
        }
        let Some(region) = frame_region(lay, i) else {
            continue;
        };
        let h = &lay.per_frame_to_canvas[i];
        let (warped, valid) = warp_image_region(frame, h, region)?;
        let fov = warp_mask_region(mask, h, region)?;
        for ry in 0..region.height {
            for rx in 0..region.width {
                let k = ry * region.width + rx;
                if !(valid.data()[k] && fov.data()[k]) {
                    continue;
                }
                let ci = (region.y0 + ry) * cw + region.x0 + rx;
                match blend {
                    BlendMode::OverwriteLatest => {
                        for c in 0..ch {
                            acc[ci * ch + c] = warped.get(rx, ry, c);
                        }
                        count[ci] = 1;
                    }
                    BlendMode::RunningMean => {
                        for c in 0..ch {
                            acc[ci * ch + c] += warped.get(rx, ry, c);
                        }
                        count[ci] += 1;
                    }
                }
            }
        }
    }
    let mut data = acc;
    for (ci, &n) in count.iter().enumerate() {
        if n > 1 {
            for c in 0..ch {
                data[ci * ch + c] = (data[ci * ch + c] / n as f64).clamp(0.0, 1.0);
            }
        }
    }
    let covered = FovMask::new(cw, chh, count.iter().map(|&n| n > 0).collect())?;
    Ok((Image::from_raw(cw, chh, ch, data), covered))
}

/// Per-frame drift: the largest corner displacement between the layout's
/// frame-to-anchor mapping and the ground truth. `None` means unavailable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub frame_index: usize,
    pub corner_error_px: Option<f64>,
}

/// `ground_truth[i]` maps frame `i` into anchor coordinates.
pub fn drift_report(
    lay: &MosaicLayout,
    ground_truth: Option<&[Homography]>,
) -> Result<Vec<DriftRow>> {
    let n = lay.frame_count();
    match ground_truth {
        Some(gt) => {
            if gt.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: gt.len(),
                });
            }
            Ok((0..n)
                .map(|i| DriftRow {
                    frame_index: i,
                    corner_error_px: Some(if i == lay.anchor_index {
                        0.0
                    } else {
                        lay.frame_to_anchor(i).max_corner_error(
                            &gt[i],
                            lay.frame_width,
                            lay.frame_height,
                        )
                    }),
                })
                .collect())
        }
        None => Ok((0..n)
            .map(|i| DriftRow {
                frame_index: i,
                corner_error_px: (i == lay.anchor_index).then_some(0.0),
            })
            .collect()),
    }
}

/// Re-expresses absolute frame -> reference homographies in the coordinates of
/// frame `anchor`.
pub fn reanchor(absolute: &[Homography], anchor: usize) -> Result<Vec<Homography>> {
    let base = absolute.get(anchor).ok_or(Error::IndexOutOfRange {
        what: "anchor index",
        index: anchor,
        limit: absolute.len(),
    })?;
    let inv = invert(base)?;
    Ok(absolute.iter().map(|h| compose(&inv, h)).collect())
}
