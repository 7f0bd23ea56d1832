//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use fetmosaic::consistency::{
    consistency_score, consistency_score_with, masked_ssim, smooth, smoothing_kernel_2d,
    ConsistencyStatus, SsimParams,
};
use fetmosaic::dataset_io::{
    load_sequence, write_image, write_label, FoldConfig, IMAGES_DIR, LABELS_DIR,
};
use fetmosaic::homography::{chain, compose, invert, normalize, Homography, Point2};
use fetmosaic::raster::NUM_CLASSES;
use fetmosaic::registration::{register_sequence, RegistrationConfig};
use fetmosaic::seg_metrics::{
    aggregate, confusion, iou, ConfusionCounts, FrameCounts, Grouping, Pooling,
};
use fetmosaic::synthetic::{generate_sequence, TrajectorySpec};
use fetmosaic::warp::{circular_mask, warp_image};
use fetmosaic::{Error, FovMask, Image, LabelMask};
use nalgebra::Matrix3;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Check + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fetmosaic"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim())
    })
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

// 1

fn projective() -> impl Strategy<Value = Homography> {
    prop::array::uniform8(-1.0f64..1.0).prop_map(|v| {
        Homography::from_matrix(Matrix3::new(
            1.0 + 0.2 * v[0],
            0.2 * v[1],
            20.0 * v[2],
            0.2 * v[3],
            1.0 + 0.2 * v[4],
            20.0 * v[5],
            1e-4 * v[6],
            1e-4 * v[7],
            1.0,
        ))
        .unwrap()
    })
}

fn point() -> impl Strategy<Value = Point2> {
    (-100.0f64..600.0, -100.0f64..600.0).prop_map(|(x, y)| Point2::new(x, y))
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, test)
        .map_err(|e| format!("{name}: {e}"))
}

fn homography_algebra() -> Check {
    let start = Instant::now();
    run_property(
        "scale invariance",
        (
            projective(),
            prop_oneof![-1e6f64..-1e-3, 1e-3f64..1e6],
            point(),
        ),
        |(h, k, p)| {
            let m = Homography::from_matrix(h.matrix() * k).unwrap();
            prop_assert!(h.map_point(p).unwrap().distance(&m.map_point(p).unwrap()) < 1e-9);
            prop_assert!(normalize(&m).unwrap().max_abs_diff(&h) < 1e-9);
            Ok(())
        },
    )?;
    run_property(
        "associativity",
        (projective(), projective(), projective()),
        |(a, b, c)| {
            let left = compose(&compose(&a, &b), &c);
            prop_assert!(left.max_abs_diff(&compose(&a, &compose(&b, &c))) < 1e-9);
            Ok(())
        },
    )?;
    run_property("inverse round trip", projective(), |h| {
        let inv = invert(&h).unwrap();
        prop_assert!(compose(&h, &inv).max_abs_diff(&Homography::identity()) < 1e-9);
        prop_assert!(compose(&inv, &h).max_abs_diff(&Homography::identity()) < 1e-9);
        Ok(())
    })?;
    run_property(
        "chain vs fold",
        (
            prop::collection::vec(projective(), 1..8),
            any::<prop::sample::Index>(),
        ),
        |(hs, start)| {
            let i = start.index(hs.len());
            let n = hs.len() - i;
            let c = chain(&hs, i, n).unwrap();
            let left = hs[i..]
                .iter()
                .fold(Homography::identity(), |acc, h| compose(h, &acc));
            let right = hs[i..]
                .iter()
                .rev()
                .fold(Homography::identity(), |acc, h| compose(&acc, h));
            prop_assert!(c.max_abs_diff(&left) < 1e-9);
            prop_assert!(c.max_abs_diff(&right) < 1e-9);
            Ok(())
        },
    )?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "4 properties x 1000 cases in {:.2} s",
        elapsed.as_secs_f64()
    ))
}

// 2

fn smooth_image(w: usize, h: usize, phase: f64) -> Image {
    Image::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        0.5 + 0.2 * (x / 9.0 + phase).sin() * (y / 11.0).cos()
            + 0.1 * ((x + y) / 17.0 - phase).cos()
    })
}

fn warp_correctness() -> Check {
    let img = smooth_image(41, 29, 0.3);
    let (out, valid) =
        warp_image(&img, &Homography::identity(), 41, 29).map_err(|e| e.to_string())?;
    ensure(out == img && valid.count() == 41 * 29, || {
        "identity warp is not a copy".into()
    })?;

    for (tx, ty) in [(3i64, -2i64), (-5, 4), (0, 7), (10, 0)] {
        let h = Homography::translation(tx as f64, ty as f64);
        let (out, valid) = warp_image(&img, &h, 41, 29).map_err(|e| e.to_string())?;
        for y in 0..29i64 {
            for x in 0..41i64 {
                let (sx, sy) = (x - tx, y - ty);
                let inside = (0..41).contains(&sx) && (0..29).contains(&sy);
                ensure(valid.get(x as usize, y as usize) == inside, || {
                    format!("validity at ({x},{y})")
                })?;
                if inside {
                    let want = img.get(sx as usize, sy as usize, 0);
                    ensure(out.get(x as usize, y as usize, 0) == want, || {
                        format!("translation ({tx},{ty}) not exact at ({x},{y})")
                    })?;
                }
            }
        }
    }

    let mut worst_half = 0.0f64;
    for (h, dx, dy) in [
        (Homography::translation(0.5, 0.0), 1usize, 0usize),
        (Homography::translation(0.0, 0.5), 0, 1),
    ] {
        let (out, valid) = warp_image(&img, &h, 41, 29).map_err(|e| e.to_string())?;
        for y in dy..29 {
            for x in dx..41 {
                ensure(valid.get(x, y), || "half-pixel sample invalid".into())?;
                let want = 0.5 * (img.get(x - dx, y - dy, 0) + img.get(x, y, 0));
                worst_half = worst_half.max((out.get(x, y, 0) - want).abs());
            }
        }
    }
    ensure(worst_half <= 1e-12, || {
        format!("half-pixel deviation {worst_half:e}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_trip = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..50 {
        let src = smooth_image(96, 96, rng.random_range(0.0..6.0));
        let h = Homography::similarity(
            rng.random_range(-0.1..0.1),
            rng.random_range(0.95..1.05),
            Point2::new(48.0, 48.0),
            Point2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)),
        );
        let inv = h.inverse().unwrap();
        let (fwd, v1) = warp_image(&src, &h, 96, 96).map_err(|e| e.to_string())?;
        let (back, v2) = warp_image(&fwd, &inv, 96, 96).map_err(|e| e.to_string())?;
        let interior = v1.eroded(1);
        for y in 0..96 {
            for x in 0..96 {
                if !v2.get(x, y) {
                    continue;
                }
                let p = inv.map_point(Point2::new(x as f64, y as f64)).unwrap();
                let (fx, fy) = (p.x.floor() as usize, p.y.floor() as usize);
                let taps = [(fx, fy), (fx + 1, fy), (fx, fy + 1), (fx + 1, fy + 1)];
                if taps
                    .iter()
                    .all(|&(a, b)| a < 96 && b < 96 && interior.get(a, b))
                {
                    checked += 1;
                    worst_trip = worst_trip.max((back.get(x, y, 0) - src.get(x, y, 0)).abs());
                }
            }
        }
    }
    ensure(worst_trip < 0.02, || {
        format!("round trip deviation {worst_trip}")
    })?;
    Ok(format!(
        "identity and integer shifts exact; half-pixel max dev {worst_half:e}; round trip max {worst_trip:.4} over {checked} px"
    ))
}

// 3

fn registration_oracle() -> Check {
    let start = Instant::now();
    let cfg = RegistrationConfig::default();
    let mut errors = Vec::new();
    for seed in 0..20 {
        let seq = generate_sequence(&TrajectorySpec {
            noise_sigma: 0.01,
            seed,
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let results = register_sequence(&seq.frames, &seq.fov, &cfg).map_err(|e| e.to_string())?;
        for (i, (r, gt)) in results.iter().zip(&seq.gt_pairwise).enumerate() {
            ensure(r.failure.is_none(), || {
                format!("seed {seed} pair {i}: {:?}", r.failure)
            })?;
            errors.push(r.h.max_corner_error(gt, 448, 448));
        }
    }
    let elapsed = start.elapsed();
    errors.sort_by(f64::total_cmp);
    let max = *errors.last().unwrap();
    let median = errors[errors.len() / 2];
    let summary = format!(
        "{} pairs, max {max:.4} px, median {median:.4} px, {:.1} s",
        errors.len(),
        elapsed.as_secs_f64()
    );
    ensure(errors.len() == 20 * 49, || format!("pair count: {summary}"))?;
    ensure(
        max < 0.5 && median < 0.1 && elapsed < Duration::from_secs(300),
        || summary.clone(),
    )?;
    Ok(summary)
}

// 4

fn drift_bound(work: &Path) -> Check {
    let seq = work.join("drift_seq");
    cli(&[
        "synth",
        "--frames",
        "50",
        "--seed",
        "21",
        "--noise",
        "0.01",
        "--out",
        s(&seq),
    ])?;
    let json = work.join("drift_h.json");
    cli(&["register", s(&seq), "--out", s(&json)])?;
    let png = work.join("drift_mosaic.png");
    let csv = work.join("drift.csv");
    cli(&[
        "mosaic",
        s(&seq),
        "--homographies",
        s(&json),
        "--out",
        s(&png),
        "--drift",
        s(&csv),
    ])?;
    let text = fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    let rows: Vec<&str> = text.lines().collect();
    ensure(
        rows.len() == 51 && rows[0] == "frame_index,corner_error_px",
        || "unexpected drift CSV shape".into(),
    )?;
    let last: Vec<&str> = rows[50].split(',').collect();
    ensure(last[0] == "49", || format!("final row is {}", rows[50]))?;
    let drift: f64 = last[1].parse().map_err(|e| format!("{e}"))?;
    ensure(drift < 5.0, || format!("final-frame drift {drift} px"))?;
    Ok(format!("final-frame drift {drift:.4} px"))
}

// 5

fn consistency_metric() -> Check {
    let p = SsimParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(16..48);
        let a = Image::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
        let mask = circular_mask(n, n, 0.0);
        let v = masked_ssim(&a, &a, &mask, &p).map_err(|e| e.to_string())?;
        ensure(v == 1.0, || format!("SSIM(a,a) = {v:e}"))?;
    }

    let img = Image::from_fn(16, 16, |x, y| ((x * 5 + y * 3) % 7) as f64 / 6.0);
    let target = FovMask::from_fn(16, 16, |x, y| (4..12).contains(&x) && (4..12).contains(&y));
    for (k, want) in [
        (16usize, ConsistencyStatus::Scored),
        (15, ConsistencyStatus::FailedLowOverlap),
        (17, ConsistencyStatus::Scored),
    ] {
        let source = FovMask::from_fn(16, 16, |x, y| target.get(x, y) && (y - 4) * 8 + (x - 4) < k);
        let out = consistency_score_with(&img, &img, &Homography::identity(), &source, &target, &p)
            .map_err(|e| e.to_string())?;
        ensure(
            out.overlap_fraction == k as f64 / 64.0 && out.status == want,
            || {
                format!(
                    "{k}/64 overlap gave {:?} at {}",
                    out.status, out.overlap_fraction
                )
            },
        )?;
    }

    let gap = 5;
    let (mut wins, mut pairs) = (0usize, 0usize);
    let (mut sum_gt, mut sum_bias) = (0.0, 0.0);
    for seed in [17u64, 31, 58] {
        let seq = generate_sequence(&TrajectorySpec {
            n_frames: 30,
            seed,
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let bias = Homography::scaling_about(1.02, Point2::new(223.5, 223.5));
        for i in 0..seq.frames.len() - gap {
            let h = chain(&seq.gt_pairwise, i, gap).map_err(|e| e.to_string())?;
            let (src, tgt) = (&seq.frames[i], &seq.frames[i + gap]);
            let good = consistency_score(src, tgt, &h, &seq.fov).map_err(|e| e.to_string())?;
            let bad = consistency_score(src, tgt, &compose(&bias, &h), &seq.fov)
                .map_err(|e| e.to_string())?;
            let (Some(g), Some(b)) = (good.ssim, bad.ssim) else {
                continue;
            };
            pairs += 1;
            wins += usize::from(g > b);
            sum_gt += g;
            sum_bias += b;
        }
    }
    let share = wins as f64 / pairs as f64;
    let summary = format!(
        "SSIM(a,a)=1; 16/64 scored, 15/64 failed; gt beats 2% scale bias on {wins}/{pairs} gap-{gap} pairs (mean {:.4} vs {:.4})",
        sum_gt / pairs as f64,
        sum_bias / pairs as f64
    );
    ensure(pairs > 0 && share >= 0.9, || summary.clone())?;
    Ok(summary)
}

// 6

fn gaussian_smoothing() -> Check {
    let k = smoothing_kernel_2d();
    let total: f64 = k.iter().flatten().sum();
    ensure((total - 1.0).abs() < 1e-12, || {
        format!("kernel sum {total}")
    })?;

    let g = |x: f64, y: f64| (-(x * x + y * y) / (2.0 * 2.0 * 2.0)).exp();
    let z: f64 = (-4..=4)
        .flat_map(|y| (-4..=4).map(move |x| (x, y)))
        .map(|(x, y)| g(x as f64, y as f64))
        .sum();
    let n = 17;
    let mut impulse = Image::filled(n, n, 1, 0.0).unwrap();
    impulse.set(8, 8, 0, 1.0);
    let out = smooth(&impulse);
    let mut worst = 0.0f64;
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (x as f64 - 8.0, y as f64 - 8.0);
            let want = if dx.abs() <= 4.0 && dy.abs() <= 4.0 {
                g(dx, dy) / z
            } else {
                0.0
            };
            worst = worst.max((out.get(x, y, 0) - want).abs());
        }
    }
    ensure(worst < 1e-12, || format!("impulse deviation {worst:e}"))?;
    Ok(format!(
        "kernel sum error {:e}; impulse max deviation {worst:e}",
        (total - 1.0).abs()
    ))
}

// 7

fn iou_metric() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..1000 {
        let p: Vec<u8> = (0..64).map(|_| rng.random_range(0..4u8)).collect();
        let g: Vec<u8> = (0..64).map(|_| rng.random_range(0..4u8)).collect();
        let c = confusion(
            &LabelMask::new(8, 8, p.clone()).unwrap(),
            &LabelMask::new(8, 8, g.clone()).unwrap(),
            None,
        )
        .map_err(|e| e.to_string())?;
        for k in 0..NUM_CLASSES as u8 {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for (&a, &b) in p.iter().zip(&g) {
                match (a == k, b == k) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            let got = c.classes[k as usize];
            let want = (tp + fp + fn_ > 0).then(|| tp as f64 / (tp + fp + fn_) as f64);
            ensure(
                [got.tp, got.fp, got.fn_] == [tp, fp, fn_] && iou(&c, k as usize) == want,
                || format!("case {case} class {k}"),
            )?;
        }
    }

    let frame = |video: &str, cells: [(u64, u64); 4]| {
        let mut counts = ConfusionCounts::default();
        for (k, (tp, miss)) in cells.into_iter().enumerate() {
            counts.classes[k].tp = tp;
            counts.classes[k].fp = miss;
        }
        FrameCounts {
            video_id: video.into(),
            counts,
        }
    };
    let frames = vec![
        frame("Video001", [(4, 1), (1, 1), (0, 0), (2, 0)]),
        frame("Video001", [(3, 2), (3, 0), (1, 3), (0, 5)]),
        frame("Video006", [(9, 1), (3, 1), (1, 1), (0, 0)]),
        frame("Video002", [(5, 0), (1, 4), (0, 2), (1, 1)]),
    ];
    let folds = FoldConfig::default();
    let t = aggregate(&frames, Grouping::PerFold(&folds), Pooling::FrameMean)
        .map_err(|e| e.to_string())?;
    let fold1 = [
        Some((0.8 + 0.6 + 0.9) / 3.0),
        Some((0.5 + 1.0 + 0.75) / 3.0),
        Some((0.25 + 0.5) / 2.0),
        Some((1.0 + 0.0) / 2.0),
    ];
    let fold2 = [Some(1.0), Some(0.2), Some(0.0), Some(0.5)];
    ensure(
        t.rows.len() == 2 && t.rows[0].group == "Fold 1" && t.rows[1].group == "Fold 2",
        || "fold grouping".into(),
    )?;
    ensure(
        t.rows[0].class_iou == fold1 && t.rows[1].class_iou == fold2,
        || {
            format!(
                "fold rows {:?} / {:?}",
                t.rows[0].class_iou, t.rows[1].class_iou
            )
        },
    )?;
    let mean: [Option<f64>; 4] =
        std::array::from_fn(|k| Some((fold1[k].unwrap() + fold2[k].unwrap()) / 2.0));
    ensure(t.mean.class_iou == mean, || {
        format!("mean row {:?}", t.mean.class_iou)
    })?;
    let overall = mean.iter().flatten().sum::<f64>() / 4.0;
    ensure(t.mean.overall == Some(overall), || {
        format!("overall {:?}", t.mean.overall)
    })?;
    Ok(
        "1000 random 8x8 pairs match the recount exactly; fold table matches hand values exactly"
            .into(),
    )
}

// 8

fn dataset_validation(work: &Path) -> Check {
    let root = work.join("Video001");
    fs::create_dir_all(root.join(IMAGES_DIR)).map_err(|e| e.to_string())?;
    fs::create_dir_all(root.join(LABELS_DIR)).map_err(|e| e.to_string())?;
    let n = 470;
    for i in 0..152 {
        let name = format!("frame_{i:05}.png");
        let img = Image::from_fn(n, n, |x, y| ((x * 3 + y + i) % 256) as f64 / 255.0);
        write_image(&root.join(IMAGES_DIR).join(&name), &img, None).map_err(|e| e.to_string())?;
        let label =
            LabelMask::new(n, n, (0..n * n).map(|k| ((k / 7 + i) % 4) as u8).collect()).unwrap();
        write_label(&root.join(LABELS_DIR).join(&name), &label).map_err(|e| e.to_string())?;
    }
    let m = load_sequence(&root, true).map_err(|e| e.to_string())?;
    ensure(
        m.video_id == "Video001"
            && m.resolution == (470, 470)
            && m.frame_count() == 152
            && m.label_paths.as_ref().map(Vec::len) == Some(152),
        || {
            format!(
                "manifest {:?} {:?} {}",
                m.video_id,
                m.resolution,
                m.frame_count()
            )
        },
    )?;

    let bad = root.join(LABELS_DIR).join("frame_00077.png");
    let mut raw = Image::filled(n, n, 1, 0.0).unwrap();
    raw.set(12, 34, 0, 7.0 / 255.0);
    write_image(&bad, &raw, None).map_err(|e| e.to_string())?;
    match load_sequence(&root, true) {
        Err(Error::IllegalLabelValue { path, value }) if path == bad && value == 7 => {}
        other => {
            return Err(format!(
                "expected IllegalLabelValue(7) at {}, got {other:?}",
                bad.display()
            ))
        }
    }
    Ok("470x470 / 152-label fixture accepted; label value 7 rejected with its path".into())
}

// 9

fn pipeline(dir: &Path, threads: &str) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(env!("CARGO_BIN_EXE_fetmosaic"))
            .args(args)
            .env("FETMOSAIC_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
        })
    };
    let seq = dir.join("seq");
    let out = dir.join("out");
    run(&[
        "synth",
        "--frames",
        "16",
        "--seed",
        "42",
        "--noise",
        "0.01",
        "--out",
        s(&seq),
    ])?;
    run(&["register", s(&seq), "--out", s(&out.join("h.json"))])?;
    run(&[
        "mosaic",
        s(&seq),
        "--homographies",
        s(&out.join("h.json")),
        "--out",
        s(&out.join("mosaic.png")),
    ])?;
    run(&[
        "eval-consistency",
        s(&seq),
        "--homographies",
        s(&out.join("h.json")),
        "--out",
        s(&out.join("consistency.csv")),
    ])?;
    let mut files = Vec::new();
    for base in [&seq, &out] {
        let mut stack = vec![base.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).map_err(|e| e.to_string())? {
                let path = e.map_err(|e| e.to_string())?.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let bytes = fs::read(&path).map_err(|e| e.to_string())?;
                    files.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
                }
            }
        }
    }
    files.sort();
    Ok(files)
}

fn end_to_end_determinism(work: &Path) -> Check {
    let a = pipeline(&work.join("run_a"), "1")?;
    let b = pipeline(&work.join("run_b"), "0")?;
    let names: Vec<&PathBuf> = a.iter().map(|(p, _)| p).collect();
    for ext in ["json", "csv", "svg", "png"] {
        ensure(
            names
                .iter()
                .any(|p| p.extension().is_some_and(|e| e == ext)),
            || format!("no .{ext} output"),
        )?;
    }
    ensure(
        names == b.iter().map(|(p, _)| p).collect::<Vec<_>>(),
        || "file sets differ".into(),
    )?;
    for ((p, x), (_, y)) in a.iter().zip(&b) {
        ensure(x == y, || format!("{} differs", p.display()))?;
    }
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn main() -> ExitCode {
    let work = TempDir::new().expect("temp dir");
    let w = work.path();
    let criteria: Vec<Criterion<'_>> = vec![
        ("homography algebra", Box::new(homography_algebra)),
        ("warp correctness", Box::new(warp_correctness)),
        ("registration oracle", Box::new(registration_oracle)),
        ("drift bound", Box::new(|| drift_bound(w))),
        ("consistency metric", Box::new(consistency_metric)),
        ("gaussian smoothing", Box::new(gaussian_smoothing)),
        ("iou metric", Box::new(iou_metric)),
        ("dataset validation", Box::new(|| dataset_validation(w))),
        (
            "end-to-end determinism",
            Box::new(|| end_to_end_determinism(w)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
