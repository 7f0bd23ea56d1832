use std::fs;
use std::path::{Path, PathBuf};

use fetmosaic::consistency::sequence_consistency_homographies;
use fetmosaic::dataset_io::{
    load_fold_config, load_fov, load_frames, load_label_dir, load_labels, load_sequence,
    to_probability_map, write_image, FoldConfig, SequenceManifest, LABELS_DIR,
};
use fetmosaic::mosaic::{drift_report, layout_homographies, reanchor, render};
use fetmosaic::raster::CLASS_NAMES;
use fetmosaic::registration::register_sequence;
use fetmosaic::seg_metrics::{aggregate, confusion, FrameCounts, Grouping, IouRow};
use fetmosaic::synthetic::{
    generate_sequence, read_ground_truth, write_sequence, TrajectorySpec, GT_FILE,
};
use fetmosaic::{Error, FovMask, Image};

use crate::envelope::HomographyEnvelope;
use crate::error::CliError;
use crate::plot::ssim_plot;
use crate::{ConsistencyArgs, MosaicArgs, RegisterArgs, SegArgs, SynthArgs};

const VESSEL_CLASS: u8 = 1;

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn csv_bytes(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Frames to process: the images, or vessel maps derived from the labels.
fn sequence_inputs(manifest: &SequenceManifest, use_labels: bool) -> Result<Vec<Image>, CliError> {
    if use_labels {
        Ok(load_labels(manifest)?
            .iter()
            .map(|l| to_probability_map(l, VESSEL_CLASS))
            .collect())
    } else {
        Ok(load_frames(manifest)?)
    }
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec = TrajectorySpec {
        n_frames: a.frames,
        frame_size: a.size,
        max_step_translation: a.max_translation,
        max_step_rotation: a.max_rotation,
        max_step_scale: a.max_scale,
        perspective_jitter: a.perspective,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    spec.validate()?;
    let seq = generate_sequence(&spec)?;
    let video_id = a
        .video_id
        .clone()
        .unwrap_or_else(|| format!("synth{}", a.seed));
    write_sequence(&a.out, &video_id, &seq)?;
    Ok(())
}

pub fn register(a: &RegisterArgs) -> Result<(), CliError> {
    let cfg = a.registration.config();
    cfg.validate()?;
    let manifest = load_sequence(&a.input, a.use_labels)?;
    if manifest.frame_count() < 2 {
        return Err(Error::TooFewFrames {
            required: 2,
            got: manifest.frame_count(),
        }
        .into());
    }
    let frames = sequence_inputs(&manifest, a.use_labels)?;
    let fov = load_fov(&a.input, &manifest)?;
    let results = register_sequence(&frames, &fov, &cfg)?;

    let envelope = HomographyEnvelope {
        video_id: manifest.video_id.clone(),
        frame_count: manifest.frame_count(),
        pairwise: results.iter().map(|r| r.h).collect(),
    };
    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let iters: Vec<String> = r.iterations_used.iter().map(|n| n.to_string()).collect();
            vec![
                i.to_string(),
                i.to_string(),
                (i + 1).to_string(),
                r.converged.to_string(),
                r.final_residual.to_string(),
                iters.join(";"),
                r.failure.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let csv_path = a
        .csv
        .clone()
        .unwrap_or_else(|| with_extension(&a.out, "csv"));
    let table = csv_bytes(
        &csv_path,
        &[
            "pair_index",
            "source",
            "target",
            "converged",
            "final_residual",
            "iterations",
            "failure",
        ],
        &rows,
    )?;
    let failed = results.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} pairs fell back to identity", results.len());
    }
    write_file(&a.out, envelope.to_json().as_bytes())?;
    write_file(&csv_path, &table)?;
    Ok(())
}

pub fn mosaic(a: &MosaicArgs) -> Result<(), CliError> {
    if a.canvas_cap == 0 {
        return Err(CliError::Usage("--canvas-cap must be positive".into()));
    }
    let manifest = load_sequence(&a.input, a.use_labels)?;
    let envelope = HomographyEnvelope::read(&a.homographies)?;
    let n = manifest.frame_count();
    envelope.check(n)?;
    let last = a.last.unwrap_or(n - 1);
    if a.first > last || last >= n {
        return Err(CliError::Usage(format!(
            "frame range {}..={last} is not within 0..{n}",
            a.first
        )));
    }
    let anchor = a.anchor.unwrap_or(a.first);
    if !(a.first..=last).contains(&anchor) {
        return Err(CliError::Usage(format!(
            "anchor {anchor} outside frame range {}..={last}",
            a.first
        )));
    }
    let gt_path = a.input.join(GT_FILE);
    let ground_truth = if gt_path.is_file() {
        let gt = read_ground_truth(&gt_path)?;
        if gt.absolute.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: gt.absolute.len(),
            }
            .into());
        }
        Some(gt)
    } else {
        None
    };

    let frames = sequence_inputs(&manifest, a.use_labels)?;
    let frames = &frames[a.first..=last];
    let fov = load_fov(&a.input, &manifest)?;
    let (w, h) = manifest.resolution;
    let local_anchor = anchor - a.first;
    let lay = layout_homographies(
        &envelope.pairwise[a.first..last],
        w,
        h,
        local_anchor,
        a.canvas_cap,
    )?;
    let masks: Vec<FovMask> = vec![fov; frames.len()];
    let (canvas, valid) = render(frames, &masks, &lay, a.blend.into())?;
    if !lay.excluded.is_empty() {
        let ids: Vec<String> = lay
            .excluded
            .iter()
            .map(|i| (i + a.first).to_string())
            .collect();
        eprintln!("frames excluded by the canvas cap: {}", ids.join(", "));
    }

    let drift = match &ground_truth {
        Some(gt) => {
            let truth = reanchor(&gt.absolute[a.first..=last], local_anchor)?;
            let rows: Vec<Vec<String>> = drift_report(&lay, Some(&truth))?
                .into_iter()
                .map(|r| {
                    vec![
                        (r.frame_index + a.first).to_string(),
                        fmt_opt(r.corner_error_px),
                    ]
                })
                .collect();
            let path = a
                .drift
                .clone()
                .unwrap_or_else(|| with_suffix(&a.out, "_drift.csv"));
            let bytes = csv_bytes(&path, &["frame_index", "corner_error_px"], &rows)?;
            Some((path, bytes))
        }
        None => None,
    };

    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_image(&a.out, &canvas, Some(&valid))?;
    if let Some((path, bytes)) = drift {
        write_file(&path, &bytes)?;
    }
    Ok(())
}

pub fn eval_consistency(a: &ConsistencyArgs) -> Result<(), CliError> {
    if a.gap == 0 {
        return Err(CliError::Usage("--gap must be at least 1".into()));
    }
    let manifest = load_sequence(&a.input, false)?;
    let envelope = HomographyEnvelope::read(&a.homographies)?;
    let n = manifest.frame_count();
    if a.gap >= n {
        return Err(Error::TooFewFrames {
            required: a.gap + 1,
            got: n,
        }
        .into());
    }
    envelope.check(n)?;
    let frames = load_frames(&manifest)?;
    let fov = load_fov(&a.input, &manifest)?;
    let outcomes = sequence_consistency_homographies(&frames, &envelope.pairwise, a.gap, &fov)?;

    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|(pair, o)| {
            vec![
                pair.source_index.to_string(),
                pair.target_index.to_string(),
                o.status.as_str().to_string(),
                o.overlap_fraction.to_string(),
                fmt_opt(o.ssim),
            ]
        })
        .collect();
    let table = csv_bytes(
        &a.out,
        &[
            "source_index",
            "target_index",
            "status",
            "overlap_fraction",
            "ssim",
        ],
        &rows,
    )?;
    let values: Vec<Option<f64>> = outcomes.iter().map(|(_, o)| o.ssim).collect();
    let title = format!("{}: SSIM of frame pairs {} apart", manifest.video_id, a.gap);
    let svg = ssim_plot(&title, &values);
    let svg_path = a
        .svg
        .clone()
        .unwrap_or_else(|| with_extension(&a.out, "svg"));
    write_file(&a.out, &table)?;
    write_file(&svg_path, svg.as_bytes())?;
    Ok(())
}

fn video_dirs(root: &Path) -> Result<Vec<String>, CliError> {
    if !root.is_dir() {
        return Err(Error::MissingDirectory(root.to_path_buf()).into());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(LABELS_DIR).is_dir() {
            if let Some(name) = path.file_name() {
                out.push(name.to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::EmptyInput("no video folders with labels/").into());
    }
    Ok(out)
}

fn iou_record(row: &IouRow, group: &str) -> Vec<String> {
    let mut r = vec![group.to_string()];
    r.extend(row.class_iou.iter().map(|v| fmt_opt(*v)));
    r.push(fmt_opt(row.overall));
    r
}

pub fn eval_seg(a: &SegArgs) -> Result<(), CliError> {
    let folds = match &a.folds {
        Some(p) => load_fold_config(p)?,
        None => FoldConfig::default(),
    };
    let videos = video_dirs(&a.gt)?;
    let mut per_frame = Vec::new();
    for video in &videos {
        let gt = load_label_dir(&a.gt.join(video).join(LABELS_DIR))?;
        let pred_dir = a.pred.join(video).join(LABELS_DIR);
        if !pred_dir.is_dir() {
            return Err(Error::MissingDirectory(pred_dir).into());
        }
        let pred = load_label_dir(&pred_dir)?;
        if pred.len() != gt.len() {
            return Err(Error::LengthMismatch {
                expected: gt.len(),
                got: pred.len(),
            }
            .into());
        }
        for ((_, p), (_, g)) in pred.iter().zip(&gt) {
            per_frame.push(FrameCounts {
                video_id: video.clone(),
                counts: confusion(p, g, None)?,
            });
        }
    }
    let pooling = a.pooling.into();
    let by_video = aggregate(&per_frame, Grouping::PerVideo, pooling)?;
    let mut rows: Vec<Vec<String>> = by_video
        .rows
        .iter()
        .map(|r| iou_record(r, &r.group))
        .collect();
    if videos.iter().any(|v| folds.fold_of(v).is_some()) {
        let by_fold = aggregate(&per_frame, Grouping::PerFold(&folds), pooling)?;
        rows.extend(by_fold.rows.iter().map(|r| iou_record(r, &r.group)));
    }
    rows.push(iou_record(&by_video.mean, &by_video.mean.group));

    let mut header = vec!["group"];
    header.extend(CLASS_NAMES);
    header.push("Overall");
    let table = csv_bytes(&a.out, &header, &rows)?;
    write_file(&a.out, &table)?;
    Ok(())
}
