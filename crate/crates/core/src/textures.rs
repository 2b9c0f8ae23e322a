//! Procedural RGB test textures in `[0, 255]` pixel units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::Image;

const DARK: [f64; 3] = [30.0, 40.0, 70.0];
const LIGHT: [f64; 3] = [230.0, 210.0, 160.0];

/// Vertical stripes: the first half of every `period` columns is light.
pub fn stripes(width: usize, height: usize, period: usize) -> Result<Image> {
    let period = period.max(2);
    Image::from_fn(width, height, 3, |c, _, x| {
        if x % period < period / 2 {
            LIGHT[c]
        } else {
            DARK[c]
        }
    })
}

/// Checkerboard of `cell x cell` squares.
pub fn checker(width: usize, height: usize, cell: usize) -> Result<Image> {
    let cell = cell.max(1);
    Image::from_fn(width, height, 3, |c, y, x| {
        if (x / cell + y / cell).is_multiple_of(2) {
            LIGHT[c]
        } else {
            DARK[c]
        }
    })
}

/// Soft discs at blue-noise positions: dart throwing with a minimum
/// periodic spacing, so no two dots overlap or clump.
pub fn blue_noise_dots(width: usize, height: usize, spacing: f64, radius: f64, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let wrap = |d: f64, len: f64| {
        let d = d.abs() % len;
        d.min(len - d)
    };
    let mut centers: Vec<(f64, f64)> = Vec::new();
    let attempts = 30 * (width * height) / (spacing * spacing).max(1.0) as usize + 100;
    for _ in 0..attempts {
        let (cy, cx) = (rng.random::<f64>() * h, rng.random::<f64>() * w);
        let ok = centers.iter().all(|&(y, x)| {
            let (dy, dx) = (wrap(cy - y, h), wrap(cx - x, w));
            dy * dy + dx * dx >= spacing * spacing
        });
        if ok {
            centers.push((cy, cx));
        }
    }
    let mut cover = vec![0.0f64; width * height];
    for &(cy, cx) in &centers {
        for (i, v) in cover.iter_mut().enumerate() {
            let (py, px) = ((i / width) as f64 + 0.5, (i % width) as f64 + 0.5);
            let (dy, dx) = (wrap(py - cy, h), wrap(px - cx, w));
            let d = (dy * dy + dx * dx).sqrt();
            *v = v.max((radius + 0.5 - d).clamp(0.0, 1.0));
        }
    }
    Image::from_fn(width, height, 3, |c, y, x| {
        let a = cover[y * width + x];
        DARK[c] + a * (LIGHT[c] - DARK[c])
    })
}

/// The three 128x128 test textures used by the examples and test suites.
pub fn bundled() -> Result<Vec<(&'static str, Image)>> {
    Ok(vec![
        ("stripes", stripes(128, 128, 8)?),
        ("checker", checker(128, 128, 8)?),
        ("dots", blue_noise_dots(128, 128, 14.0, 3.5, 5)?),
    ])
}
