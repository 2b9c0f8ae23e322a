//! Patch-distribution and texture statistics used to evaluate syntheses.
//!
//! * [`sliced_wasserstein`]: Monte-Carlo sliced Wasserstein-2 between two
//!   patch sets, scaled by the patch dimension so that it estimates the full
//!   squared W2 whenever the optimal coupling is monotone along every
//!   direction (translations, isotropic scalings) and lower-bounds it
//!   otherwise.
//! * [`exact_w2`]: squared W2 between equal-size sets by optimal assignment,
//!   the oracle for the estimator above.
//! * [`autocorr_distance`]: L2 distance between zero-lag-normalized periodic
//!   autocorrelations.
//! * [`novelty_maps`]: nearest-neighbour distance and source coordinate of
//!   every synthesized patch.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::flow::nearest_neighbor;
use crate::image::{Image, NormStats};
use crate::patch::{aggregate, extract_patches, Kernel2D, PatchSet};

pub const DEFAULT_PROJECTIONS: usize = 64;

/// Largest set size accepted by [`exact_w2`].
pub const EXACT_W2_LIMIT: usize = 512;

/// Random unit directions drawn in orthonormal blocks of up to `dim`.
fn projection_directions<R: Rng + ?Sized>(dim: usize, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut block_start = 0;
    while dirs.len() < count {
        if dirs.len() - block_start == dim {
            block_start = dirs.len();
        }
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for u in &dirs[block_start..] {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        dirs.push(v);
    }
    dirs
}

/// Squared W2 between two sorted 1-D empirical measures of possibly
/// different sizes, integrating the difference of quantile functions.
pub fn wasserstein_1d_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == m {
        return a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64;
    }
    // Each sample of `a` carries m mass units, each of `b` carries n.
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (m, n);
    let mut acc = 0.0;
    while i < n && j < m {
        let step = ra.min(rb);
        let d = a[i] - b[j];
        acc += step as f64 * d * d;
        ra -= step;
        rb -= step;
        if ra == 0 {
            i += 1;
            ra = m;
        }
        if rb == 0 {
            j += 1;
            rb = n;
        }
    }
    acc / (n * m) as f64
}

fn check_sets(a: &PatchSet, b: &PatchSet) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("patch set"));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "patch dims {} and {} differ",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Sliced squared Wasserstein-2 distance, `dim * E_theta[W2^2(theta#A, theta#B)]`,
/// averaged over `projections` random directions.
pub fn sliced_wasserstein<R: Rng + ?Sized>(
    a: &PatchSet,
    b: &PatchSet,
    projections: usize,
    rng: &mut R,
) -> Result<f64> {
    check_sets(a, b)?;
    if projections == 0 {
        return Err(Error::InvalidArgument("need at least one projection".into()));
    }
    let dim = a.dim();
    let dirs = projection_directions(dim, projections, rng);
    let project = |set: &PatchSet, dir: &[f64]| -> Vec<f64> {
        let mut proj: Vec<f64> = set
            .iter()
            .map(|p| p.iter().zip(dir).map(|(x, d)| x * d).sum())
            .collect();
        proj.sort_by(f64::total_cmp);
        proj
    };
    let per_dir: Vec<f64> = dirs
        .par_iter()
        .map(|dir| wasserstein_1d_sorted(&project(a, dir), &project(b, dir)))
        .collect();
    let mean = per_dir.iter().sum::<f64>() / projections as f64;
    Ok(dim as f64 * mean)
}

/// Minimum-cost perfect assignment on a square cost matrix (row-major).
/// Returns `assignment[row] = col`.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // Potentials formulation, 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Exact squared W2 between two equal-size uniform point sets:
/// `min_sigma (1/n) sum_i |a_i - b_sigma(i)|^2`.
pub fn exact_w2(a: &PatchSet, b: &PatchSet) -> Result<f64> {
    check_sets(a, b)?;
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "exact W2 needs equal set sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n > EXACT_W2_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "exact W2 is limited to {EXACT_W2_LIMIT} points, got {n}"
        )));
    }
    let cost: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|ij| crate::flow::sq_dist(a.patch(ij / n), b.patch(ij % n)))
        .collect();
    let assignment = hungarian(&cost, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok(total / n as f64)
}

fn fft2d(buf: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in buf.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = buf[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            buf[y * w + x] = col[y];
        }
    }
}

/// Periodic autocorrelation of each mean-removed channel, divided by its
/// zero-lag value. Constant channels yield all zeros.
pub fn normalized_autocorrelation(img: &Image) -> Vec<Vec<f64>> {
    let (w, h) = (img.width(), img.height());
    (0..img.channels())
        .map(|c| {
            let plane = img.plane(c);
            let mean = plane.iter().sum::<f64>() / plane.len() as f64;
            let mut buf: Vec<Complex<f64>> =
                plane.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
            fft2d(&mut buf, w, h, false);
            for z in buf.iter_mut() {
                *z = Complex::new(z.norm_sqr(), 0.0);
            }
            fft2d(&mut buf, w, h, true);
            let zero = buf[0].re;
            if zero <= f64::EPSILON * (w * h) as f64 {
                vec![0.0; w * h]
            } else {
                buf.iter().map(|z| z.re / zero).collect()
            }
        })
        .collect()
}

/// Sum over channels of the L2 distance between normalized periodic
/// autocorrelations. Both images must have the same shape.
pub fn autocorr_distance(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "autocorrelation needs equal shapes, got {}x{}x{} and {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    if a.width() < 2 || a.height() < 2 {
        return Err(Error::InvalidArgument("autocorrelation needs images of at least 2x2".into()));
    }
    let (ra, rb) = (normalized_autocorrelation(a), normalized_autocorrelation(b));
    Ok(ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        .sum())
}

/// Nearest exemplar patch of one synthesized patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMatch {
    /// Top-left of the synthesized patch.
    pub coord: (usize, usize),
    /// Top-left of its nearest exemplar patch.
    pub source: (usize, usize),
    pub sq_dist: f64,
    pub novel: bool,
}

/// Per-pixel novelty diagnostics.
#[derive(Debug, Clone)]
pub struct NoveltyMaps {
    /// Mean squared NN distance of the patches covering each pixel.
    pub nn_distance: Image,
    /// Source location of each pixel under its patches' NN, normalized to
    /// `[0, 1]`: channel 0 row, channel 1 column, channel 2 zero.
    pub nn_coords: Image,
    /// 1 where any covering patch is farther than `tau` from its NN.
    pub novel_mask: Image,
    pub matches: Vec<PatchMatch>,
    pub tau: f64,
}

impl NoveltyMaps {
    pub fn mean_nn_distance(&self) -> f64 {
        self.matches.iter().map(|m| m.sq_dist).sum::<f64>() / self.matches.len() as f64
    }

    pub fn novel_fraction(&self) -> f64 {
        self.matches.iter().filter(|m| m.novel).count() as f64 / self.matches.len() as f64
    }

    /// `nn_coords` scaled to 8-bit colors for PNG export.
    pub fn coords_colormap(&self) -> Image {
        let mut img = self.nn_coords.clone();
        img.data_mut().iter_mut().for_each(|v| *v *= 255.0);
        img
    }

    /// `nn_distance` rescaled so its maximum maps to 255.
    pub fn distance_colormap(&self) -> Image {
        let max = self.nn_distance.data().iter().copied().fold(0.0, f64::max);
        let mut img = self.nn_distance.clone();
        if max > 0.0 {
            img.data_mut().iter_mut().for_each(|v| *v *= 255.0 / max);
        }
        img
    }
}

/// Default novelty threshold for patches of `dim` values.
pub fn default_tau(dim: usize) -> f64 {
    1e-3 * dim as f64
}

/// Matches every stride-spaced patch of `synth` against all exemplar patches
/// (stride 1) and splats the results to pixels.
pub fn novelty_maps(
    synth: &Image,
    exemplar: &Image,
    p: usize,
    stride: usize,
    tau: Option<f64>,
) -> Result<NoveltyMaps> {
    if synth.channels() != exemplar.channels() {
        return Err(Error::DimensionMismatch("channel counts differ".into()));
    }
    let psis = extract_patches(synth, p, stride)?;
    let reference = extract_patches(exemplar, p, 1)?;
    let tau = tau.unwrap_or_else(|| default_tau(psis.dim()));
    let found: Vec<_> = (0..psis.len())
        .into_par_iter()
        .map(|i| nearest_neighbor(psis.patch(i), &reference))
        .collect::<Result<_>>()?;
    let matches: Vec<PatchMatch> = psis
        .coords()
        .iter()
        .zip(&found)
        .map(|(&coord, nn)| PatchMatch {
            coord,
            source: reference.coords()[nn.index],
            sq_dist: nn.sq_dist,
            novel: nn.sq_dist > tau,
        })
        .collect();

    let (w, h) = (synth.width(), synth.height());
    let uniform = Kernel2D::uniform(p);
    let coords = psis.coords().to_vec();
    let splat = |f: &dyn Fn(&PatchMatch) -> f64| -> Result<Image> {
        let data = matches.iter().flat_map(|m| std::iter::repeat_n(f(m), p * p)).collect();
        aggregate(&PatchSet::from_parts(p, stride, 1, coords.clone(), data)?, &uniform, w, h)
    };
    let nn_distance = splat(&|m| m.sq_dist)?;
    let mut novel_mask = splat(&|m| if m.novel { 1.0 } else { 0.0 })?;
    novel_mask
        .data_mut()
        .iter_mut()
        .for_each(|v| *v = if *v > 0.0 { 1.0 } else { 0.0 });

    let row_den = (exemplar.height() - 1).max(1) as f64;
    let col_den = (exemplar.width() - 1).max(1) as f64;
    let mut data = Vec::with_capacity(matches.len() * p * p * 3);
    for m in &matches {
        for i in 0..p {
            for _ in 0..p {
                data.push((m.source.0 + i) as f64 / row_den);
            }
        }
        for _ in 0..p {
            for j in 0..p {
                data.push((m.source.1 + j) as f64 / col_den);
            }
        }
        data.extend(std::iter::repeat_n(0.0, p * p));
    }
    let nn_coords = aggregate(&PatchSet::from_parts(p, stride, 3, coords, data)?, &uniform, w, h)?;

    Ok(NoveltyMaps {
        nn_distance,
        nn_coords,
        novel_mask,
        matches,
        tau,
    })
}

/// Options for [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricOptions {
    pub patch_size: usize,
    pub projections: usize,
    pub seed: u64,
    /// Synthesis stride for the novelty maps.
    pub novelty_stride: usize,
    pub tau: Option<f64>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            patch_size: 16,
            projections: DEFAULT_PROJECTIONS,
            seed: 0,
            novelty_stride: 4,
            tau: None,
        }
    }
}

/// Scalar evaluation of a candidate image against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub sliced_wasserstein: f64,
    /// Present when both non-overlapping patch sets have the same size, at
    /// most [`EXACT_W2_LIMIT`].
    pub exact_w2: Option<f64>,
    pub autocorr_distance: f64,
    pub mean_nn_distance: f64,
    pub novel_fraction: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "reference,candidate,patch_size,projections,sliced_wasserstein,exact_w2,autocorr_distance,mean_nn_distance,novel_fraction";

    /// One CSV row matching [`Self::CSV_HEADER`]; an absent `exact_w2` is an
    /// empty field.
    pub fn csv_row(&self, reference: &str, candidate: &str, opts: &MetricOptions) -> String {
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{},{}",
            reference,
            candidate,
            opts.patch_size,
            opts.projections,
            self.sliced_wasserstein,
            self.exact_w2.map(|v| v.to_string()).unwrap_or_default(),
            self.autocorr_distance,
            self.mean_nn_distance,
            self.novel_fraction
        );
        row
    }
}

/// Sliced Wasserstein between the non-overlapping patches of two images.
pub fn patch_sliced_wasserstein(
    a: &Image,
    b: &Image,
    p: usize,
    projections: usize,
    seed: u64,
) -> Result<f64> {
    let pa = extract_patches(a, p, p)?;
    let pb = extract_patches(b, p, p)?;
    sliced_wasserstein(&pa, &pb, projections, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Full report plus novelty maps for `candidate` against `reference`, both
/// in `[0, 255]` pixel units. Autocorrelation is compared on the common
/// top-left crop.
pub fn evaluate(reference: &Image, candidate: &Image, opts: &MetricOptions) -> Result<(MetricReport, NoveltyMaps)> {
    let (reference, candidate) = if reference.channels() == candidate.channels() {
        (reference.clone(), candidate.clone())
    } else {
        (reference.to_rgb(), candidate.to_rgb())
    };
    let stats = NormStats::symmetric(reference.channels());
    let r = stats.normalize(&reference)?;
    let c = stats.normalize(&candidate)?;
    let p = opts.patch_size;

    let pa = extract_patches(&r, p, p)?;
    let pb = extract_patches(&c, p, p)?;
    let sliced = sliced_wasserstein(&pa, &pb, opts.projections, &mut ChaCha8Rng::seed_from_u64(opts.seed))?;
    let exact = if pa.len() == pb.len() && pa.len() <= EXACT_W2_LIMIT {
        Some(exact_w2(&pa, &pb)?)
    } else {
        None
    };
    let (w, h) = (r.width().min(c.width()), r.height().min(c.height()));
    let autocorr = autocorr_distance(&r.crop(0, 0, w, h)?, &c.crop(0, 0, w, h)?)?;
    let maps = novelty_maps(&c, &r, p, opts.novelty_stride, opts.tau)?;
    let report = MetricReport {
        sliced_wasserstein: sliced,
        exact_w2: exact,
        autocorr_distance: autocorr,
        mean_nn_distance: maps.mean_nn_distance(),
        novel_fraction: maps.novel_fraction(),
    };
    Ok((report, maps))
}
