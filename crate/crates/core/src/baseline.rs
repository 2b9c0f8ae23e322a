//! Classical texture optimization: alternate nearest-neighbour assignment of
//! every synthesis patch with uniform averaging of the overlapping
//! assignments, coarse to fine and from large to small patches.
//!
//! Defaults: 3 patch sizes (32, 16, 8), stride `p / 4`, 10 iterations per
//! (scale, patch size). The iteration count is not a published value; it is
//! chosen to keep runtime comparable to the flow synthesizer.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::nearest_neighbor;
use crate::image::{pyramid, resize, scaled_len, Image, NormStats};
use crate::patch::{aggregate, extract_patches, Kernel2D, PatchSet};

#[derive(Debug, Clone, PartialEq)]
pub struct TOConfig {
    pub scales: usize,
    /// Strictly descending patch sizes run at each scale.
    pub patch_sizes: Vec<usize>,
    /// Synthesis stride for size `p` is `max(1, p / stride_divisor)`.
    pub stride_divisor: usize,
    /// Spacing of reference patches.
    pub ref_stride: usize,
    pub iterations: usize,
    pub seed: u64,
    pub out_w: usize,
    pub out_h: usize,
}

impl Default for TOConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            patch_sizes: vec![32, 16, 8],
            stride_divisor: 4,
            ref_stride: 4,
            iterations: 10,
            seed: 0,
            out_w: 256,
            out_h: 256,
        }
    }
}

impl TOConfig {
    pub fn with_output(mut self, width: usize, height: usize) -> Self {
        self.out_w = width;
        self.out_h = height;
        self
    }

    pub fn stride_for(&self, p: usize) -> usize {
        (p / self.stride_divisor).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.scales == 0 {
            return fail("scales must be at least 1".into());
        }
        if self.patch_sizes.is_empty() || self.patch_sizes.contains(&0) {
            return fail("patch sizes must be a non-empty list of positive sizes".into());
        }
        if self.patch_sizes.windows(2).any(|w| w[0] <= w[1]) {
            return fail(format!(
                "patch sizes must be strictly descending, got {:?}",
                self.patch_sizes
            ));
        }
        if self.stride_divisor == 0 || self.ref_stride == 0 {
            return fail("strides must be positive".into());
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if self.out_w == 0 || self.out_h == 0 {
            return fail("output size must be positive".into());
        }
        Ok(())
    }
}

fn nearest_patches(psis: &PatchSet, reference: &PatchSet) -> Result<(Vec<f64>, f64)> {
    if reference.is_empty() {
        return Err(Error::Empty("reference patch set"));
    }
    if psis.dim() != reference.dim() {
        return Err(Error::DimensionMismatch(format!(
            "synthesis patches of dim {} against reference dim {}",
            psis.dim(),
            reference.dim()
        )));
    }
    let dim = psis.dim();
    let mut out = vec![0.0; psis.len() * dim];
    let energy = out
        .par_chunks_mut(dim)
        .zip(psis.data().par_chunks(dim))
        .map(|(dst, psi)| {
            let nn = nearest_neighbor(psi, reference).expect("validated shapes");
            dst.copy_from_slice(reference.patch(nn.index));
            nn.sq_dist
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok((out, energy))
}

/// Sum over stride-spaced synthesis patches of the squared distance to their
/// nearest reference patch.
pub fn kwatra_energy(x: &Image, reference: &PatchSet, p: usize, stride: usize) -> Result<f64> {
    let psis = extract_patches(x, p, stride)?;
    Ok(nearest_patches(&psis, reference)?.1)
}

/// One assignment/averaging sweep.
pub fn to_iteration(x: &Image, reference: &PatchSet, p: usize, stride: usize) -> Result<Image> {
    if reference.patch_size() != p {
        return Err(Error::DimensionMismatch(format!(
            "reference patches of size {} for patch size {p}",
            reference.patch_size()
        )));
    }
    let psis = extract_patches(x, p, stride)?;
    let (assigned, _) = nearest_patches(&psis, reference)?;
    aggregate(&psis.with_values(assigned)?, &Kernel2D::uniform(p), x.width(), x.height())
}

/// Texture optimization from noise; `exemplar` in `[0, 255]`, result
/// likewise (unclamped).
pub fn to_synthesize(exemplar: &Image, cfg: &TOConfig) -> Result<Image> {
    use rand::SeedableRng;
    cfg.validate()?;
    let stats = NormStats::symmetric(exemplar.channels());
    let coarsest = cfg.scales - 1;
    let levels = pyramid(&stats.normalize(exemplar)?, cfg.scales)?;

    let fits = |p: usize, s: usize| {
        let side = levels[s].width().min(levels[s].height());
        let out = scaled_len(cfg.out_w, s).min(scaled_len(cfg.out_h, s));
        p <= side && p <= out
    };
    if !cfg.patch_sizes.iter().any(|&p| fits(p, coarsest)) {
        return Err(Error::InvalidConfig(format!(
            "no patch size in {:?} fits the coarsest scale; lower the number of scales",
            cfg.patch_sizes
        )));
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = Image::noise(
        scaled_len(cfg.out_w, coarsest),
        scaled_len(cfg.out_h, coarsest),
        exemplar.channels(),
        &mut rng,
    )?;
    for s in (0..cfg.scales).rev() {
        if s != coarsest {
            x = resize(&x, scaled_len(cfg.out_w, s), scaled_len(cfg.out_h, s))?;
        }
        for &p in cfg.patch_sizes.iter().filter(|&&p| fits(p, s)) {
            let reference = extract_patches(&levels[s], p, cfg.ref_stride)?;
            let stride = cfg.stride_for(p);
            for _ in 0..cfg.iterations {
                x = to_iteration(&x, &reference, p, stride)?;
            }
        }
    }
    stats.denormalize(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_mosaic_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex = Image::noise(12, 12, 3, &mut rng).unwrap();
        let reference = extract_patches(&ex, 4, 4).unwrap();
        // Tile a 16x8 canvas with reference patches 5, 0, 8, 2 / 1, 1, 3, 7.
        let picks = [5usize, 0, 8, 2, 1, 1, 3, 7];
        let coords: Vec<(usize, usize)> = (0..2).flat_map(|r| (0..4).map(move |c| (r * 4, c * 4))).collect();
        let data: Vec<f64> = picks.iter().flat_map(|&i| reference.patch(i).to_vec()).collect();
        let tiles = PatchSet::from_parts(4, 4, 3, coords, data).unwrap();
        let x = aggregate(&tiles, &Kernel2D::uniform(4), 16, 8).unwrap();
        assert_eq!(to_iteration(&x, &reference, 4, 4).unwrap(), x);
    }

    #[test]
    fn single_reference_patch_is_forced() {
        let patch = Image::from_fn(3, 3, 1, |_, y, x| (y * 3 + x) as f64).unwrap();
        let reference = extract_patches(&patch, 3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Image::noise(6, 6, 1, &mut rng).unwrap();
        let out = to_iteration(&x, &reference, 3, 3).unwrap();
        for y in 0..6 {
            for xx in 0..6 {
                assert_eq!(out.get(0, y, xx), patch.get(0, y % 3, xx % 3));
            }
        }
    }

    #[test]
    fn empty_reference_rejected() {
        let x = Image::filled(4, 4, 1, 0.0).unwrap();
        let empty = PatchSet::from_parts(2, 1, 1, vec![], vec![]).unwrap();
        assert!(to_iteration(&x, &empty, 2, 1).is_err());
    }

    #[test]
    fn energy_never_increases() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ex = Image::noise(16, 16, 1, &mut rng).unwrap();
            let reference = extract_patches(&ex, 4, 2).unwrap();
            let mut x = Image::noise(14, 18, 1, &mut rng).unwrap();
            let mut energy = kwatra_energy(&x, &reference, 4, 2).unwrap();
            for _ in 0..3 {
                x = to_iteration(&x, &reference, 4, 2).unwrap();
                let next = kwatra_energy(&x, &reference, 4, 2).unwrap();
                assert!(next <= energy + 1e-9, "seed {seed}: {next} > {energy}");
                energy = next;
            }
        }
    }

    #[test]
    fn config_checks() {
        assert!(TOConfig::default().validate().is_ok());
        let cfg = TOConfig {
            patch_sizes: vec![8, 16],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let ex = Image::filled(16, 16, 1, 10.0).unwrap();
        let cfg = TOConfig {
            patch_sizes: vec![32],
            scales: 1,
            ..Default::default()
        }
        .with_output(16, 16);
        assert!(to_synthesize(&ex, &cfg).is_err());
    }

    #[test]
    fn constant_exemplar_gives_constant_output() {
        let ex = Image::filled(32, 32, 3, 77.0).unwrap();
        let cfg = TOConfig {
            scales: 2,
            patch_sizes: vec![16, 8],
            iterations: 2,
            ..Default::default()
        }
        .with_output(40, 32);
        let out = to_synthesize(&ex, &cfg).unwrap();
        assert!(out.data().iter().all(|v| (v - 77.0).abs() < 1e-9));
    }
}
