use fetmosaic::consistency::{
    consistency_score, consistency_score_with, masked_ssim, overlap_region,
    sequence_consistency_homographies, smooth, smoothing_kernel_2d, ConsistencyStatus, SsimParams,
};
use fetmosaic::homography::{chain, compose, Homography, Point2};
use fetmosaic::synthetic::{generate_sequence, TrajectorySpec};
use fetmosaic::warp::circular_mask;
use fetmosaic::{FovMask, Image};
use proptest::prelude::*;

fn gaussian(x: f64, y: f64) -> f64 {
    (-(x * x + y * y) / 8.0).exp()
}

fn gaussian_sum() -> f64 {
    let mut s = 0.0;
    for y in -4..=4 {
        for x in -4..=4 {
            s += gaussian(x as f64, y as f64);
        }
    }
    s
}

#[test]
fn kernel_sums_to_one() {
    let k = smoothing_kernel_2d();
    let total: f64 = k.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn impulse_response_is_the_gaussian() {
    let n = 17;
    let mut img = Image::filled(n, n, 1, 0.0).unwrap();
    img.set(8, 8, 0, 1.0);
    let out = smooth(&img);
    let z = gaussian_sum();
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (x as f64 - 8.0, y as f64 - 8.0);
            let expected = if dx.abs() <= 4.0 && dy.abs() <= 4.0 {
                gaussian(dx, dy) / z
            } else {
                0.0
            };
            assert!((out.get(x, y, 0) - expected).abs() < 1e-12, "({x}, {y})");
        }
    }
}

#[test]
fn impulse_center_weight_on_nine_by_nine() {
    let mut img = Image::filled(9, 9, 1, 0.0).unwrap();
    img.set(4, 4, 0, 1.0);
    let out = smooth(&img);
    assert!((out.get(4, 4, 0) - 1.0 / gaussian_sum()).abs() < 1e-12);
}

#[test]
fn smoothing_commutes_with_mirroring() {
    let img = Image::from_fn(23, 15, |x, y| ((x * x + 3 * y) % 13) as f64 / 12.0);
    let mirror = |im: &Image| Image::from_fn(23, 15, |x, y| im.get(22 - x, y, 0));
    let a = smooth(&mirror(&img));
    let b = mirror(&smooth(&img));
    for (p, q) in a.data().iter().zip(b.data()) {
        assert!((p - q).abs() < 1e-12);
    }
}

#[test]
fn smoothing_never_expands_range() {
    let img = Image::from_fn(31, 31, |x, y| {
        0.2 + 0.6 * (((x * 7) ^ (y * 3)) % 5) as f64 / 4.0
    });
    let out = smooth(&img);
    assert!(out
        .data()
        .iter()
        .all(|v| (0.2 - 1e-12..=0.8 + 1e-12).contains(v)));
}

#[test]
fn one_radius_shift_gives_lens_fraction() {
    let fov = circular_mask(200, 200, 0.0);
    let (_, fraction) = overlap_region(&Homography::translation(100.0, 0.0), &fov).unwrap();
    let lens = (2.0 * std::f64::consts::PI / 3.0 - 3f64.sqrt() / 2.0) / std::f64::consts::PI;
    assert!((fraction - lens).abs() < 0.01, "{fraction} vs {lens}");
    let (_, none) = overlap_region(&Homography::translation(200.0, 0.0), &fov).unwrap();
    assert_eq!(none, 0.0);
}

/// Target FOV is an 8x8 block; the source FOV covers `k` of its pixels.
fn boundary_case(k: usize) -> ConsistencyStatus {
    let img = Image::from_fn(16, 16, |x, y| ((x * 5 + y * 3) % 7) as f64 / 6.0);
    let target = FovMask::from_fn(16, 16, |x, y| (4..12).contains(&x) && (4..12).contains(&y));
    let source = FovMask::from_fn(16, 16, |x, y| target.get(x, y) && (y - 4) * 8 + (x - 4) < k);
    assert_eq!(target.count(), 64);
    assert_eq!(source.count(), k);
    let out = consistency_score_with(
        &img,
        &img,
        &Homography::identity(),
        &source,
        &target,
        &SsimParams::default(),
    )
    .unwrap();
    assert_eq!(out.overlap_fraction, k as f64 / 64.0);
    out.status
}

#[test]
fn overlap_threshold_is_exact_at_a_quarter() {
    assert_eq!(boundary_case(16), ConsistencyStatus::Scored);
    assert_eq!(boundary_case(15), ConsistencyStatus::FailedLowOverlap);
    assert_eq!(boundary_case(13), ConsistencyStatus::FailedLowOverlap);
}

#[test]
fn low_overlap_fails_regardless_of_content() {
    let fov = circular_mask(64, 64, 0.0);
    let img = Image::filled(64, 64, 1, 0.5).unwrap();
    let out = consistency_score(&img, &img, &Homography::translation(52.0, 0.0), &fov).unwrap();
    assert!(out.overlap_fraction < 0.25);
    assert_eq!(out.status, ConsistencyStatus::FailedLowOverlap);
    assert!(out.ssim.is_none() && out.crop.is_none());
}

#[test]
fn ground_truth_scores_high_and_perturbation_lower() {
    let seq = generate_sequence(&TrajectorySpec {
        n_frames: 2,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let (s, t) = (&seq.frames[0], &seq.frames[1]);
    let h = seq.gt_pairwise[0];
    let good = consistency_score(s, t, &h, &seq.fov).unwrap().ssim.unwrap();
    let shifted = compose(&Homography::translation(5.0, 0.0), &h);
    let bad = consistency_score(s, t, &shifted, &seq.fov)
        .unwrap()
        .ssim
        .unwrap();
    assert!(good >= 0.98, "{good}");
    assert!(bad < good, "{bad} vs {good}");
}

#[test]
fn salt_noise_barely_moves_the_score() {
    let seq = generate_sequence(&TrajectorySpec {
        n_frames: 2,
        seed: 6,
        ..Default::default()
    })
    .unwrap();
    let (s, t) = (&seq.frames[0], &seq.frames[1]);
    let h = seq.gt_pairwise[0];
    let clean = consistency_score(s, t, &h, &seq.fov).unwrap().ssim.unwrap();
    for (x, y) in [(224, 224), (150, 300), (300, 120)] {
        let mut noisy = s.clone();
        noisy.set(x, y, 0, if s.get(x, y, 0) > 0.5 { 0.0 } else { 1.0 });
        let score = consistency_score(&noisy, t, &h, &seq.fov)
            .unwrap()
            .ssim
            .unwrap();
        assert!((score - clean).abs() < 0.02, "{score} vs {clean}");
    }
}

#[test]
fn scale_bias_loses_on_nearly_all_gap_five_pairs() {
    let seq = generate_sequence(&TrajectorySpec {
        n_frames: 20,
        seed: 17,
        ..Default::default()
    })
    .unwrap();
    let gap = 5;
    let c = Point2::new(223.5, 223.5);
    let bias = Homography::scaling_about(1.02, c);
    let mut wins = 0;
    let pairs = seq.frames.len() - gap;
    for i in 0..pairs {
        let h = chain(&seq.gt_pairwise, i, gap).unwrap();
        let (s, t) = (&seq.frames[i], &seq.frames[i + gap]);
        let good = consistency_score(s, t, &h, &seq.fov).unwrap().ssim.unwrap();
        let bad = consistency_score(s, t, &compose(&bias, &h), &seq.fov)
            .unwrap()
            .ssim
            .unwrap();
        wins += usize::from(good > bad);
    }
    assert!(wins as f64 >= 0.9 * pairs as f64, "{wins}/{pairs}");
}

#[test]
fn static_sequence_scores_one_everywhere() {
    let seq = generate_sequence(&TrajectorySpec {
        n_frames: 7,
        max_step_translation: 0.0,
        max_step_rotation: 0.0,
        max_step_scale: 0.0,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let hs = vec![Homography::identity(); 6];
    let out = sequence_consistency_homographies(&seq.frames, &hs, 5, &seq.fov).unwrap();
    assert_eq!(out.len(), 2);
    for (pair, o) in out {
        assert_eq!(pair.target_index - pair.source_index, 5);
        assert_eq!(o.ssim, Some(1.0));
    }
    let one = sequence_consistency_homographies(&seq.frames, &hs, 6, &seq.fov).unwrap();
    assert_eq!(one.len(), 1);
}

fn textured() -> impl Strategy<Value = Image> {
    prop::collection::vec(0.0f64..1.0, 24 * 24).prop_map(|v| Image::new(24, 24, 1, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ssim_is_symmetric_and_bounded(a in textured(), b in textured()) {
        let mask = circular_mask(24, 24, 0.0);
        let p = SsimParams::default();
        let ab = masked_ssim(&a, &b, &mask, &p).unwrap();
        let ba = masked_ssim(&b, &a, &mask, &p).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert_eq!(masked_ssim(&a, &a, &mask, &p).unwrap(), 1.0);
    }
}
