//! Separable convolution with reflect-101 borders.

use crate::raster::Image;

/// Normalized 1D Gaussian sampled at integer offsets `-radius..=radius`.
pub fn gaussian_kernel_1d(radius: usize, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = (-(radius as i64)..=radius as i64)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// `[1 4 6 4 1] / 16`.
pub const BINOMIAL_5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Reflect-101 index: `-1 -> 1`, `n -> n - 2`.
#[inline]
pub fn reflect101(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Convolves every channel of `img` with `kernel` along x then y.
pub fn convolve_separable(img: &Image, kernel: &[f64]) -> Image {
    assert!(kernel.len() % 2 == 1, "kernel length must be odd");
    let r = (kernel.len() / 2) as i64;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src = img.data();

    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wt) in kernel.iter().enumerate() {
                    let xx = reflect101(x as i64 + k as i64 - r, w);
                    acc += wt * src[(y * w + xx) * ch + c];
                }
                tmp[(y * w + x) * ch + c] = acc;
            }
        }
    }

    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (k, wt) in kernel.iter().enumerate() {
                    let yy = reflect101(y as i64 + k as i64 - r, h);
                    acc += wt * tmp[(yy * w + x) * ch + c];
                }
                // Convex combination; clamp only guards last-ulp excursions.
                out[(y * w + x) * ch + c] = acc.clamp(0.0, 1.0);
            }
        }
    }
    Image::from_raw(w, h, ch, out)
}
