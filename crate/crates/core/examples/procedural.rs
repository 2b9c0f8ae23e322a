//! Synthesizes the three procedural textures and scores each output against
//! a Gaussian-noise image of the same size.
//!
//!     cargo run --release --example procedural -- [out_dir]

use std::time::Instant;

use nifty::image::{write_png, Image, NormStats};
use nifty::metrics::{patch_sliced_wasserstein, DEFAULT_PROJECTIONS};
use nifty::synth::{synthesize, SynthConfig};
use nifty::textures::bundled;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nifty::Result<()> {
    let out_dir = std::env::args().nth(1).map(std::path::PathBuf::from);
    let textures = bundled()?;
    let cfg = SynthConfig::default().with_output(128, 128).with_seed(1);
    let stats = NormStats::symmetric(3);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (name, exemplar) in &textures {
        let start = Instant::now();
        let out = synthesize(exemplar, &cfg)?;
        let secs = start.elapsed().as_secs_f64();
        let reference = stats.normalize(exemplar)?;
        let synth = stats.normalize(&out)?;
        let noise = Image::noise(128, 128, 3, &mut rng)?;
        let p = cfg.patch_size;
        let sw = patch_sliced_wasserstein(&synth, &reference, p, DEFAULT_PROJECTIONS, 0)?;
        let sw_noise = patch_sliced_wasserstein(&noise, &reference, p, DEFAULT_PROJECTIONS, 0)?;
        println!(
            "{name:8} sw {sw:10.4}  noise {sw_noise:10.4}  ratio {:8.1}  {secs:.2} s",
            sw_noise / sw.max(f64::MIN_POSITIVE)
        );
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).ok();
            write_png(exemplar, dir.join(format!("{name}_exemplar.png")))?;
            write_png(&out, dir.join(format!("{name}_synth.png")))?;
        }
    }
    Ok(())
}
