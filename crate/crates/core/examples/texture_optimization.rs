//! Compares the classical texture-optimization baseline with the flow
//! synthesizer on the bundled textures.
//!
//!     cargo run --release --example texture_optimization -- [out_dir]

use std::time::Instant;

use nifty::baseline::{to_synthesize, TOConfig};
use nifty::image::{write_png, Image, NormStats};
use nifty::metrics::{patch_sliced_wasserstein, DEFAULT_PROJECTIONS};
use nifty::synth::{synthesize, SynthConfig};
use nifty::textures::bundled;

fn main() -> nifty::Result<()> {
    let out_dir = std::env::args().nth(1).map(std::path::PathBuf::from);
    let flow_cfg = SynthConfig::default().with_output(128, 128);
    let to_cfg = TOConfig::default().with_output(128, 128);
    let stats = NormStats::symmetric(3);
    for (name, exemplar) in bundled()? {
        let reference = stats.normalize(&exemplar)?;
        let score = |img: &Image| -> nifty::Result<f64> {
            patch_sliced_wasserstein(&stats.normalize(img)?, &reference, 16, DEFAULT_PROJECTIONS, 0)
        };
        let t = Instant::now();
        let to = to_synthesize(&exemplar, &to_cfg)?;
        let to_secs = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let flow = synthesize(&exemplar, &flow_cfg)?;
        let flow_secs = t.elapsed().as_secs_f64();
        println!(
            "{name:8} TO  sw {:9.4} ({to_secs:.2} s)   flow  sw {:9.4} ({flow_secs:.2} s)",
            score(&to)?,
            score(&flow)?
        );
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir).ok();
            write_png(&to, dir.join(format!("{name}_to.png")))?;
            write_png(&flow, dir.join(format!("{name}_flow.png")))?;
        }
    }
    Ok(())
}
