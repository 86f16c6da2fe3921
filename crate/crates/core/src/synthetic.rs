//! Deterministic synthetic test scenes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::frame::IntensityFrame;

/// White Gaussian noise blurred with an isotropic Gaussian of std `sigma`
/// pixels, then min-max rescaled to `[0, 1]`.
pub fn blurred_noise(width: usize, height: usize, sigma: f64, seed: u64) -> Result<IntensityFrame> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Contract(format!("sigma must be positive, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..width * height)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let blurred = gaussian_blur(&noise, width, height, sigma);
    let (lo, hi) = blurred
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels = blurred
        .iter()
        .map(|v| (((v - lo) / span) as f32).clamp(0.0, 1.0))
        .collect();
    IntensityFrame::new(width, height, pixels, 0)
}

/// Separable Gaussian blur with mirrored borders; kernel radius is `ceil(3 sigma)`.
pub fn gaussian_blur(data: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        // mirror without repeating the edge sample until the index lands inside
        loop {
            if i < 0 {
                i = -i;
            } else if i >= n {
                i = 2 * (n - 1) - i;
            } else {
                return i as usize;
            }
            if n == 1 {
                return 0;
            }
        }
    };

    let mut tmp = vec![0.0; data.len()];
    for r in 0..height {
        for c in 0..width {
            tmp[r * width + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * data[r * width + reflect(c as isize + k as isize - radius, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; data.len()];
    for r in 0..height {
        for c in 0..width {
            out[r * width + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[reflect(r as isize + k as isize - radius, height) * width + c])
                .sum();
        }
    }
    out
}

/// Black/white checkerboard with square cells of `cell` pixels.
pub fn checkerboard(width: usize, height: usize, cell: usize) -> Result<IntensityFrame> {
    let cell = cell.max(1);
    let pixels = (0..height)
        .flat_map(|r| (0..width).map(move |c| ((r / cell + c / cell) % 2) as f32))
        .collect();
    IntensityFrame::new(width, height, pixels, 0)
}
