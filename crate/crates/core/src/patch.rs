//! Patch extraction, spatial kernels and kernel-weighted overlap aggregation.
//!
//! A patch of side `p` over `C` channels is vectorized channel-major, then
//! row-major inside each channel: element `c * p * p + i * p + j` is channel
//! `c`, row `i`, column `j` of the patch. This matches the planar layout of
//! [`Image`] and is fixed so that distances are reproducible.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::image::Image;

/// Flat array of equally sized square patches with their top-left positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    patch_size: usize,
    stride: usize,
    channels: usize,
    dim: usize,
    data: Vec<f64>,
    coords: Vec<(usize, usize)>,
}

impl PatchSet {
    /// Wraps precomputed patch vectors, e.g. per-patch velocities laid out on
    /// the grid of an extracted set.
    pub fn from_parts(
        patch_size: usize,
        stride: usize,
        channels: usize,
        coords: Vec<(usize, usize)>,
        data: Vec<f64>,
    ) -> Result<Self> {
        let dim = patch_size * patch_size * channels;
        if patch_size == 0 || channels == 0 {
            return Err(Error::InvalidArgument("patch size and channels must be positive".into()));
        }
        if data.len() != coords.len() * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} patches of dim {} need {} values, got {}",
                coords.len(),
                dim,
                coords.len() * dim,
                data.len()
            )));
        }
        Ok(Self {
            patch_size,
            stride,
            channels,
            dim,
            data,
            coords,
        })
    }

    /// Same grid and geometry, new patch values.
    pub fn with_values(&self, data: Vec<f64>) -> Result<Self> {
        Self::from_parts(
            self.patch_size,
            self.stride,
            self.channels,
            self.coords.clone(),
            data,
        )
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn patch(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Concatenation of two sets with identical patch geometry. Indices of
    /// `other` are shifted by `self.len()`.
    pub fn union(&self, other: &PatchSet) -> Result<PatchSet> {
        if self.patch_size != other.patch_size || self.channels != other.channels {
            return Err(Error::DimensionMismatch(format!(
                "cannot merge patches of size {}x{}x{} and {}x{}x{}",
                self.patch_size,
                self.patch_size,
                self.channels,
                other.patch_size,
                other.patch_size,
                other.channels
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Self::from_parts(self.patch_size, self.stride, self.channels, coords, data)
    }
}

/// Top-left positions along one axis: `0, stride, 2 * stride, ...` up to
/// `len - p`. A trailing remainder smaller than `stride` is left uncovered.
pub fn grid_positions(len: usize, p: usize, stride: usize) -> Vec<usize> {
    (0..=(len - p)).step_by(stride).collect()
}

/// Number of patches [`extract_patches`] returns.
pub fn patch_count(width: usize, height: usize, p: usize, stride: usize) -> usize {
    ((width - p) / stride + 1) * ((height - p) / stride + 1)
}

/// Every `p x p` patch whose top-left corner lies on the stride grid and that
/// fits entirely inside the image. Coordinates are `(row, col)`, row-major.
pub fn extract_patches(img: &Image, p: usize, stride: usize) -> Result<PatchSet> {
    if p == 0 || stride == 0 {
        return Err(Error::InvalidArgument("patch size and stride must be positive".into()));
    }
    if p > img.width() || p > img.height() {
        return Err(Error::InvalidArgument(format!(
            "patch size {p} exceeds {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let rows = grid_positions(img.height(), p, stride);
    let cols = grid_positions(img.width(), p, stride);
    let ch = img.channels();
    let dim = p * p * ch;
    let mut coords = Vec::with_capacity(rows.len() * cols.len());
    let mut data = Vec::with_capacity(rows.len() * cols.len() * dim);
    for &r in &rows {
        for &c0 in &cols {
            coords.push((r, c0));
            for c in 0..ch {
                for i in 0..p {
                    let start = img.index(c, r + i, c0);
                    data.extend_from_slice(&img.data()[start..start + p]);
                }
            }
        }
    }
    PatchSet::from_parts(p, stride, ch, coords, data)
}

/// Square, strictly positive spatial weighting over a patch footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn uniform(size: usize) -> Self {
        Self {
            size,
            weights: vec![1.0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.size + j]
    }
}

/// Unnormalized Gaussian `exp(-(di^2 + dj^2) / (2 sigma^2))`, offsets taken
/// from the patch center (half-pixel centered for even sizes).
pub fn gaussian_kernel(p: usize, sigma: f64) -> Result<Kernel2D> {
    if p == 0 {
        return Err(Error::InvalidArgument("kernel size must be positive".into()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kernel sigma must be positive and finite, got {sigma}"
        )));
    }
    let center = (p as f64 - 1.0) / 2.0;
    let denom = 2.0 * sigma * sigma;
    let mut weights = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let (di, dj) = (i as f64 - center, j as f64 - center);
            // Floor keeps weights strictly positive for tiny sigma.
            weights.push((-(di * di + dj * dj) / denom).exp().max(f64::MIN_POSITIVE));
        }
    }
    Ok(Kernel2D { size: p, weights })
}

/// Kernel-weighted average of overlapping patch values into a
/// `out_w x out_h` image. Pixels no patch covers copy the value of the
/// nearest covered pixel.
pub fn aggregate(values: &PatchSet, kernel: &Kernel2D, out_w: usize, out_h: usize) -> Result<Image> {
    if values.is_empty() {
        return Err(Error::Empty("patch set to aggregate"));
    }
    let p = values.patch_size();
    if kernel.size() != p {
        return Err(Error::DimensionMismatch(format!(
            "kernel of size {} for patches of size {p}",
            kernel.size()
        )));
    }
    for &(r, c) in values.coords() {
        if r + p > out_h || c + p > out_w {
            return Err(Error::InvalidArgument(format!(
                "patch at ({r},{c}) does not fit a {out_w}x{out_h} output"
            )));
        }
    }
    let ch = values.channels();
    let plane = out_w * out_h;
    let mut num = vec![0.0; plane * ch];
    let mut den = vec![0.0; plane];
    for (k, &(r, c0)) in values.coords().iter().enumerate() {
        let v = values.patch(k);
        for i in 0..p {
            let row = (r + i) * out_w + c0;
            let krow = &kernel.weights()[i * p..(i + 1) * p];
            for (j, &w) in krow.iter().enumerate() {
                den[row + j] += w;
            }
            for c in 0..ch {
                let src = &v[c * p * p + i * p..c * p * p + (i + 1) * p];
                let dst = &mut num[c * plane + row..c * plane + row + p];
                for ((d, &s), &w) in dst.iter_mut().zip(src).zip(krow) {
                    *d += w * s;
                }
            }
        }
    }
    let covered: Vec<bool> = den.iter().map(|&d| d > 0.0).collect();
    let mut data = vec![0.0; plane * ch];
    for c in 0..ch {
        for i in 0..plane {
            if covered[i] {
                data[c * plane + i] = num[c * plane + i] / den[i];
            }
        }
    }
    if covered.iter().any(|&b| !b) {
        let source = nearest_covered(&covered, out_w, out_h);
        for c in 0..ch {
            for i in 0..plane {
                if !covered[i] {
                    data[c * plane + i] = data[c * plane + source[i]];
                }
            }
        }
    }
    Image::new(out_w, out_h, ch, data)
}

/// For every pixel, the index of the closest covered pixel (4-neighbour
/// breadth-first distance; first-reached wins on ties).
fn nearest_covered(covered: &[bool], w: usize, h: usize) -> Vec<usize> {
    let mut source = vec![usize::MAX; w * h];
    let mut queue = VecDeque::new();
    for (i, &c) in covered.iter().enumerate() {
        if c {
            source[i] = i;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (y, x) = (i / w, i % w);
        let mut visit = |n: usize| {
            if source[n] == usize::MAX {
                source[n] = source[i];
                queue.push_back(n);
            }
        };
        if y > 0 {
            visit(i - w);
        }
        if y + 1 < h {
            visit(i + w);
        }
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < w {
            visit(i + 1);
        }
    }
    source
}
