//! Multi-scale patch flow synthesis and exemplar blending.
//!
//! Synthesis starts from Gaussian noise at the coarsest output size. At each
//! scale the exemplar is reduced to that resolution, its patches become the
//! reference set, and the ODE is integrated with `steps` Euler steps of the
//! aggregated top-k patch velocity. Finer scales start from the upsampled
//! previous result, partially renoised to flow time `gamma`.
//!
//! Randomness comes from independent ChaCha streams derived from the seed:
//! stream 0 draws all image noise, stream `1 + g` draws the candidate
//! subsets of reference group `g`. Results are bit-identical for a given
//! seed regardless of the number of worker threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::flow::{patch_velocities, sample_candidates, FlowStep, MemoryTable};
use crate::image::{pyramid, resize, scaled_len, Image, NormStats};
use crate::patch::{aggregate, extract_patches, gaussian_kernel, PatchSet};

/// Hyperparameters of the patch flow synthesizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of pyramid levels, each a factor 2 apart.
    pub scales: usize,
    pub patch_size: usize,
    /// Spacing of synthesis patches.
    pub stride: usize,
    /// Spacing of reference (exemplar) patches.
    pub ref_stride: usize,
    /// Neighbours kept in the top-k velocity.
    pub k: usize,
    /// Euler steps per scale.
    pub steps: usize,
    /// Renoising factor; finer scales restart the flow at `t = gamma`.
    pub gamma: f64,
    /// Fraction of reference patches scanned per step.
    pub ratio: f64,
    pub memory: bool,
    pub seed: u64,
    pub out_w: usize,
    pub out_h: usize,
    /// Standard deviation of the Gaussian aggregation kernel, in pixels.
    pub kernel_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            patch_size: 16,
            stride: 4,
            ref_stride: 4,
            k: 5,
            steps: 15,
            gamma: 0.5,
            ratio: 1.0,
            memory: true,
            seed: 0,
            out_w: 256,
            out_h: 256,
            kernel_sigma: 4.0,
        }
    }
}

impl SynthConfig {
    pub fn with_output(mut self, width: usize, height: usize) -> Self {
        self.out_w = width;
        self.out_h = height;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks every constraint that does not depend on the exemplar.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.scales == 0 {
            return fail("scales must be at least 1".into());
        }
        if self.patch_size == 0 {
            return fail("patch size must be positive".into());
        }
        if self.stride == 0 || !self.patch_size.is_multiple_of(self.stride) {
            return fail(format!(
                "patch size {} must be divisible by stride {}",
                self.patch_size, self.stride
            ));
        }
        if self.ref_stride == 0 {
            return fail("reference stride must be positive".into());
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.steps == 0 {
            return fail("steps must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return fail(format!("ratio must lie in (0, 1], got {}", self.ratio));
        }
        if !(self.kernel_sigma > 0.0 && self.kernel_sigma.is_finite()) {
            return fail(format!("kernel sigma must be positive, got {}", self.kernel_sigma));
        }
        if self.out_w == 0 || self.out_h == 0 {
            return fail("output size must be positive".into());
        }
        Ok(())
    }
}

/// `steps + 1` evenly spaced times from `start` to 1.
pub fn timestep_schedule(start: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("at least one timestep is required".into()));
    }
    if !(0.0..1.0).contains(&start) {
        return Err(Error::InvalidArgument(format!(
            "schedule start must lie in [0, 1), got {start}"
        )));
    }
    let dt = (1.0 - start) / steps as f64;
    let mut ts: Vec<f64> = (0..steps).map(|i| start + i as f64 * dt).collect();
    ts.push(1.0);
    Ok(ts)
}

/// `gamma * x + (1 - gamma) * eps` with `eps` standard normal per sample.
pub fn renoise<R: Rng + ?Sized>(x: &Image, gamma: f64, rng: &mut R) -> Result<Image> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "renoising factor must lie in (0, 1], got {gamma}"
        )));
    }
    let mut out = x.clone();
    if gamma == 1.0 {
        return Ok(out);
    }
    for v in out.data_mut() {
        let eps: f64 = rng.sample(StandardNormal);
        *v = gamma * *v + (1.0 - gamma) * eps;
    }
    Ok(out)
}

/// How two exemplars are combined by [`synthesize_blend`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendMode {
    /// Match against the union of both exemplars' patches.
    Distribution,
    /// Separate matches per exemplar; velocities mixed with a global alpha.
    Pixel,
    /// As `Pixel`, with alpha read per patch from a map.
    Spatial,
}

impl std::str::FromStr for BlendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distribution" => Ok(Self::Distribution),
            "pixel" => Ok(Self::Pixel),
            "spatial" => Ok(Self::Spatial),
            other => Err(Error::InvalidArgument(format!(
                "unknown blend mode '{other}', expected distribution, pixel or spatial"
            ))),
        }
    }
}

/// Blend parameters. `alpha` weights the first exemplar in pixel mode;
/// `alpha_map` (values in `[0, 1]`, any size) does so per location in
/// spatial mode.
#[derive(Debug, Clone)]
pub struct BlendSpec {
    pub mode: BlendMode,
    pub alpha: f64,
    pub alpha_map: Option<Image>,
}

/// Progress callback payload, emitted after every Euler step.
pub struct StepEvent<'a> {
    /// Pyramid level, 0 being the finest.
    pub scale: usize,
    /// Step index within the scale.
    pub step: usize,
    /// Flow times of the step just taken.
    pub t_from: f64,
    pub t_to: f64,
    /// Current synthesis in normalized space.
    pub image: &'a Image,
    /// One memory table per reference group.
    pub memories: &'a [MemoryTable],
}

/// Counters accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    /// Number of velocity aggregation rounds (Euler steps).
    pub rounds: usize,
    /// Patch distances evaluated by all k-NN searches.
    pub distance_evals: u64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Result in `[0, 255]` pixel units (unclamped).
    pub image: Image,
    pub stats: RunStats,
}

enum Mix {
    Single,
    Global(f64),
    Map(Image),
}

/// Synthesizes a texture from `exemplar` (pixel values in `[0, 255]`).
pub fn synthesize(exemplar: &Image, cfg: &SynthConfig) -> Result<Image> {
    Ok(synthesize_with(exemplar, cfg, |_| {})?.image)
}

/// [`synthesize`] with a per-step observer and run counters.
pub fn synthesize_with(
    exemplar: &Image,
    cfg: &SynthConfig,
    observer: impl FnMut(&StepEvent<'_>),
) -> Result<SynthOutput> {
    run(vec![vec![exemplar.clone()]], Mix::Single, cfg, observer)
}

/// Synthesizes a blend of two exemplars.
pub fn synthesize_blend(
    ex_a: &Image,
    ex_b: &Image,
    cfg: &SynthConfig,
    blend: &BlendSpec,
) -> Result<Image> {
    Ok(synthesize_blend_with(ex_a, ex_b, cfg, blend, |_| {})?.image)
}

pub fn synthesize_blend_with(
    ex_a: &Image,
    ex_b: &Image,
    cfg: &SynthConfig,
    blend: &BlendSpec,
    observer: impl FnMut(&StepEvent<'_>),
) -> Result<SynthOutput> {
    let (a, b) = if ex_a.channels() == ex_b.channels() {
        (ex_a.clone(), ex_b.clone())
    } else {
        (ex_a.to_rgb(), ex_b.to_rgb())
    };
    match blend.mode {
        BlendMode::Distribution => run(vec![vec![a, b]], Mix::Single, cfg, observer),
        BlendMode::Pixel => {
            if !(0.0..=1.0).contains(&blend.alpha) {
                return Err(Error::InvalidArgument(format!(
                    "blend alpha must lie in [0, 1], got {}",
                    blend.alpha
                )));
            }
            run(vec![vec![a], vec![b]], Mix::Global(blend.alpha), cfg, observer)
        }
        BlendMode::Spatial => {
            let map = blend.alpha_map.as_ref().ok_or_else(|| {
                Error::InvalidArgument("spatial blending requires an alpha map".into())
            })?;
            if map.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument("alpha map values must lie in [0, 1]".into()));
            }
            let map = if map.channels() == 1 {
                map.clone()
            } else {
                Image::new(map.width(), map.height(), 1, map.plane(0).to_vec())?
            };
            run(vec![vec![a], vec![b]], Mix::Map(map), cfg, observer)
        }
    }
}

fn chacha_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Alpha sampled at each patch center (mean of the central 1 or 2x2 pixels).
fn alpha_at_centers(map: &Image, psis: &PatchSet) -> Vec<f64> {
    let p = psis.patch_size();
    let (lo, hi) = ((p - 1) / 2, p / 2);
    psis.coords()
        .iter()
        .map(|&(r, c)| {
            let mut acc = 0.0;
            for y in [r + lo, r + hi] {
                for x in [c + lo, c + hi] {
                    acc += map.get(0, y.min(map.height() - 1), x.min(map.width() - 1));
                }
            }
            acc / 4.0
        })
        .collect()
}

fn run(
    groups: Vec<Vec<Image>>,
    mix: Mix,
    cfg: &SynthConfig,
    mut observer: impl FnMut(&StepEvent<'_>),
) -> Result<SynthOutput> {
    cfg.validate()?;
    let channels = groups[0][0].channels();
    let stats = NormStats::symmetric(channels);
    let p = cfg.patch_size;
    let coarsest = cfg.scales - 1;

    let (cw, ch) = (scaled_len(cfg.out_w, coarsest), scaled_len(cfg.out_h, coarsest));
    if cw < p || ch < p {
        return Err(Error::InvalidConfig(format!(
            "coarsest output scale is {cw}x{ch}, smaller than patch size {p}; lower the number of scales or the patch size"
        )));
    }
    let mut pyramids: Vec<Vec<Vec<Image>>> = Vec::with_capacity(groups.len());
    for group in &groups {
        let mut levels = Vec::with_capacity(group.len());
        for ex in group {
            let (ew, eh) = (scaled_len(ex.width(), coarsest), scaled_len(ex.height(), coarsest));
            if ew < p || eh < p {
                return Err(Error::InvalidConfig(format!(
                    "coarsest exemplar scale is {ew}x{eh}, smaller than patch size {p}; lower the number of scales or the patch size"
                )));
            }
            levels.push(pyramid(&stats.normalize(ex)?, cfg.scales)?);
        }
        pyramids.push(levels);
    }

    let mut noise_rng = chacha_stream(cfg.seed, 0);
    let mut cand_rngs: Vec<ChaCha8Rng> = (0..groups.len())
        .map(|g| chacha_stream(cfg.seed, 1 + g as u64))
        .collect();
    let kernel = gaussian_kernel(p, cfg.kernel_sigma)?;
    let mut run_stats = RunStats::default();

    let mut x = Image::noise(cw, ch, channels, &mut noise_rng)?;
    for s in (0..cfg.scales).rev() {
        let (ow, oh) = (scaled_len(cfg.out_w, s), scaled_len(cfg.out_h, s));
        let mut refs = Vec::with_capacity(pyramids.len());
        for levels in &pyramids {
            let mut set = extract_patches(&levels[0][s], p, cfg.ref_stride)?;
            for extra in &levels[1..] {
                set = set.union(&extract_patches(&extra[s], p, cfg.ref_stride)?)?;
            }
            refs.push(set);
        }

        let start = if s == coarsest {
            0.0
        } else {
            x = renoise(&resize(&x, ow, oh)?, cfg.gamma, &mut noise_rng)?;
            cfg.gamma
        };
        let ts = timestep_schedule(start, cfg.steps)?;

        let grid = extract_patches(&x, p, cfg.stride)?;
        let alphas = match &mix {
            Mix::Map(map) => Some(alpha_at_centers(&resize(map, ow, oh)?, &grid)),
            _ => None,
        };
        let mut memories: Vec<MemoryTable> =
            refs.iter().map(|_| MemoryTable::new(grid.len(), cfg.k)).collect();

        for i in 0..cfg.steps {
            let psis = extract_patches(&x, p, cfg.stride)?;
            let step = FlowStep {
                t: ts[i],
                k: cfg.k,
                use_memory: cfg.memory,
            };
            let mut fields = Vec::with_capacity(refs.len());
            for ((reference, memory), rng) in refs.iter().zip(memories.iter_mut()).zip(&mut cand_rngs) {
                let candidates = sample_candidates(reference, cfg.ratio, rng)?;
                let out = patch_velocities(&psis, reference, &candidates, memory, step)?;
                run_stats.distance_evals += out.distance_evals;
                fields.push(out.velocities);
            }
            let velocities = match &mix {
                Mix::Single => fields.swap_remove(0),
                Mix::Global(alpha) => {
                    let (va, vb) = (&fields[0], &fields[1]);
                    va.iter().zip(vb).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect()
                }
                Mix::Map(_) => {
                    let alphas = alphas.as_ref().expect("computed for map mode");
                    let dim = psis.dim();
                    let (va, vb) = (&fields[0], &fields[1]);
                    let mut v = vec![0.0; va.len()];
                    for (j, &alpha) in alphas.iter().enumerate() {
                        for d in j * dim..(j + 1) * dim {
                            v[d] = alpha * va[d] + (1.0 - alpha) * vb[d];
                        }
                    }
                    v
                }
            };
            let field = aggregate(&psis.with_values(velocities)?, &kernel, ow, oh)?;
            x.add_scaled(&field, ts[i + 1] - ts[i])?;
            if !x.is_finite() {
                return Err(Error::NonFinite("synthesis state"));
            }
            run_stats.rounds += 1;
            observer(&StepEvent {
                scale: s,
                step: i,
                t_from: ts[i],
                t_to: ts[i + 1],
                image: &x,
                memories: &memories,
            });
        }
    }
    Ok(SynthOutput {
        image: stats.denormalize(&x)?,
        stats: run_stats,
    })
}
