//! On-disk sequence layout, fold configuration and PNG codecs.
//!
//! A sequence directory looks like
//!
//! ```text
//! Video001/
//!   images/        8-bit PNG frames, lexicographic order = temporal order
//!   labels/        optional single-channel PNGs holding class ids 0..=3
//!   fov.png        optional field-of-view mask (0 = outside, 255 = inside)
//!   manifest.json  optional; supplies fov_margin_fraction
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{FovMask, Image, LabelMask, NUM_CLASSES};
use crate::warp::circular_mask;

pub const IMAGES_DIR: &str = "images";
pub const LABELS_DIR: &str = "labels";
pub const FOV_FILE: &str = "fov.png";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub video_id: String,
    pub resolution: (usize, usize),
    pub frame_paths: Vec<PathBuf>,
    pub label_paths: Option<Vec<PathBuf>>,
    pub fov_margin_fraction: f64,
}

impl SequenceManifest {
    pub fn frame_count(&self) -> usize {
        self.frame_paths.len()
    }
}

/// Subset of the manifest that may be stored alongside the data.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ManifestHints {
    #[serde(default)]
    video_id: Option<String>,
    #[serde(default)]
    fov_margin_fraction: Option<f64>,
}

fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn png_dimensions(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((w as usize, h as usize))
}

/// Scans and validates a sequence directory.
pub fn load_sequence(dir: &Path, expect_labels: bool) -> Result<SequenceManifest> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let hints: ManifestHints = {
        let p = dir.join(MANIFEST_FILE);
        if p.is_file() {
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            serde_json::from_str(&text).map_err(|source| Error::Json { path: p, source })?
        } else {
            ManifestHints::default()
        }
    };
    let frame_paths = list_pngs(&dir.join(IMAGES_DIR))?;
    if frame_paths.is_empty() {
        return Err(Error::TooFewFrames {
            required: 1,
            got: 0,
        });
    }
    let resolution = png_dimensions(&frame_paths[0])?;
    if resolution.0 != resolution.1 {
        return Err(Error::ResolutionMismatch {
            path: frame_paths[0].clone(),
            expected: (resolution.0, resolution.0),
            got: resolution,
        });
    }
    for p in &frame_paths[1..] {
        let got = png_dimensions(p)?;
        if got != resolution {
            return Err(Error::ResolutionMismatch {
                path: p.clone(),
                expected: resolution,
                got,
            });
        }
    }
    let label_paths = if expect_labels {
        let labels = list_pngs(&dir.join(LABELS_DIR))?;
        if labels.len() != frame_paths.len() {
            return Err(Error::LengthMismatch {
                expected: frame_paths.len(),
                got: labels.len(),
            });
        }
        for p in &labels {
            let l = read_label(p)?;
            if l.dims() != resolution {
                return Err(Error::ResolutionMismatch {
                    path: p.clone(),
                    expected: resolution,
                    got: l.dims(),
                });
            }
        }
        Some(labels)
    } else {
        None
    };
    let video_id = hints.video_id.unwrap_or_else(|| {
        dir.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Ok(SequenceManifest {
        video_id,
        resolution,
        frame_paths,
        label_paths,
        fov_margin_fraction: hints.fov_margin_fraction.unwrap_or(0.0),
    })
}

/// FOV for a sequence: `fov.png` when present, otherwise the inscribed disk.
pub fn load_fov(dir: &Path, manifest: &SequenceManifest) -> Result<FovMask> {
    let p = dir.join(FOV_FILE);
    let (w, h) = manifest.resolution;
    if p.is_file() {
        let m = read_mask(&p)?;
        if m.dims() != manifest.resolution {
            return Err(Error::ResolutionMismatch {
                path: p,
                expected: manifest.resolution,
                got: m.dims(),
            });
        }
        Ok(m)
    } else {
        Ok(circular_mask(w, h, manifest.fov_margin_fraction))
    }
}

pub fn write_manifest(path: &Path, manifest: &SequenceManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })
}

fn save(path: &Path, img: DynamicImage) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads an 8-bit PNG as a grayscale or RGB image in `[0, 1]`.
pub fn read_image(path: &Path) -> Result<Image> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let has_color = img.color().has_color();
    let (channels, raw): (usize, Vec<u8>) = if has_color {
        (3, img.into_rgb8().into_raw())
    } else {
        (1, img.into_luma8().into_raw())
    };
    let data = raw.into_iter().map(|v| v as f64 / 255.0).collect();
    Image::new(w, h, channels, data)
}

pub fn load_frames(manifest: &SequenceManifest) -> Result<Vec<Image>> {
    manifest.frame_paths.iter().map(|p| read_image(p)).collect()
}

pub fn load_labels(manifest: &SequenceManifest) -> Result<Vec<LabelMask>> {
    match &manifest.label_paths {
        Some(paths) => paths.iter().map(|p| read_label(p)).collect(),
        None => Err(Error::EmptyInput("sequence has no labels")),
    }
}

/// Writes an image as 8-bit PNG. Pixels outside `mask` are written black.
pub fn write_image(path: &Path, img: &Image, mask: Option<&FovMask>) -> Result<()> {
    let (w, h) = img.dims();
    let ch = img.channels();
    let mut raw: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    if let Some(m) = mask {
        for (i, &keep) in m.data().iter().enumerate() {
            if !keep {
                raw[i * ch..(i + 1) * ch].fill(0);
            }
        }
    }
    let dynimg = if ch == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer size"))
    } else {
        DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer size"))
    };
    save(path, dynimg)
}

/// Reads a single-channel label PNG, rejecting values outside `0..=3`.
pub fn read_label(path: &Path) -> Result<LabelMask> {
    let img = open(path)?;
    if img.color().has_color() {
        return Err(Error::DimensionMismatch(format!(
            "label file {} must be single-channel",
            path.display()
        )));
    }
    let g = img.into_luma8();
    let (w, h) = (g.width() as usize, g.height() as usize);
    let raw = g.into_raw();
    if let Some(&value) = raw.iter().find(|&&v| v as usize >= NUM_CLASSES) {
        return Err(Error::IllegalLabelValue {
            path: path.to_path_buf(),
            value,
        });
    }
    LabelMask::new(w, h, raw)
}

/// Every label PNG in `dir`, in lexicographic file order.
pub fn load_label_dir(dir: &Path) -> Result<Vec<(PathBuf, LabelMask)>> {
    list_pngs(dir)?
        .into_iter()
        .map(|p| read_label(&p).map(|l| (p, l)))
        .collect()
}

pub fn write_label(path: &Path, label: &LabelMask) -> Result<()> {
    let (w, h) = label.dims();
    let g = GrayImage::from_raw(w as u32, h as u32, label.data().to_vec()).expect("buffer size");
    save(path, DynamicImage::ImageLuma8(g))
}

pub fn read_mask(path: &Path) -> Result<FovMask> {
    let g = open(path)?.into_luma8();
    let (w, h) = (g.width() as usize, g.height() as usize);
    FovMask::new(w, h, g.into_raw().into_iter().map(|v| v >= 128).collect())
}

pub fn write_mask(path: &Path, mask: &FovMask) -> Result<()> {
    let (w, h) = mask.dims();
    let raw = mask
        .data()
        .iter()
        .map(|&v| if v { 255 } else { 0 })
        .collect();
    let g = GrayImage::from_raw(w as u32, h as u32, raw).expect("buffer size");
    save(path, DynamicImage::ImageLuma8(g))
}

/// Single-channel map: 1 where `label == class_id`, 0 elsewhere.
pub fn to_probability_map(label: &LabelMask, class_id: u8) -> Image {
    let data = label
        .data()
        .iter()
        .map(|&l| if l == class_id { 1.0 } else { 0.0 })
        .collect();
    Image::from_raw(label.width(), label.height(), 1, data)
}

pub const NUM_FOLDS: u8 = 6;
pub const VIDEOS_PER_FOLD: usize = 3;

/// Cross-validation fold assignment of videos.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldConfig {
    assignment: BTreeMap<String, u8>,
}

const DEFAULT_FOLDS: &str = "\
Video001 1
Video006 1
Video016 1
Video002 2
Video011 2
Video018 2
Video004 3
Video019 3
Video023 3
Video003 4
Video005 4
Video014 4
Video007 5
Video008 5
Video022 5
Video009 6
Video013 6
Video017 6
";

impl Default for FoldConfig {
    fn default() -> Self {
        Self::parse(DEFAULT_FOLDS, Path::new("<embedded>")).expect("embedded fold table is valid")
    }
}

impl FoldConfig {
    /// Parses `video_id fold_id` lines; `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let mut parts = line.split_whitespace();
            let (Some(video), Some(fold), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(format!(
                    "expected `video_id fold_id`, got `{line}`"
                )));
            };
            let fold: u8 = fold
                .parse()
                .ok()
                .filter(|f| (1..=NUM_FOLDS).contains(f))
                .ok_or_else(|| parse_err(format!("fold id `{fold}` not in 1..={NUM_FOLDS}")))?;
            if assignment.insert(video.to_string(), fold).is_some() {
                return Err(parse_err(format!("video `{video}` assigned twice")));
            }
        }
        let cfg = FoldConfig { assignment };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let mut sizes = [0usize; NUM_FOLDS as usize];
        for &f in self.assignment.values() {
            sizes[(f - 1) as usize] += 1;
        }
        if let Some((i, &count)) = sizes.iter().enumerate().find(|(_, &c)| c > VIDEOS_PER_FOLD) {
            return Err(Error::FoldSizeViolation {
                fold: i as u8 + 1,
                count,
            });
        }
        let expected = NUM_FOLDS as usize * VIDEOS_PER_FOLD;
        if self.assignment.len() < expected {
            let short: Vec<String> = sizes
                .iter()
                .enumerate()
                .filter(|(_, &c)| c < VIDEOS_PER_FOLD)
                .map(|(i, c)| format!("fold {} has {c}", i + 1))
                .collect();
            return Err(Error::IncompleteAssignment(format!(
                "{} of {expected} videos assigned ({})",
                self.assignment.len(),
                short.join(", ")
            )));
        }
        Ok(())
    }

    pub fn fold_of(&self, video_id: &str) -> Option<u8> {
        self.assignment.get(video_id).copied()
    }

    pub fn videos_in(&self, fold: u8) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(v, _)| v.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

pub fn load_fold_config(path: &Path) -> Result<FoldConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FoldConfig::parse(&text, path)
}
