//! Synthesizes a texture from a PNG exemplar.
//!
//!     cargo run --release --example synthesize -- exemplar.png out.png [seed]
//!
//! Without arguments a procedural checkerboard is used and the result is
//! written to `synth.png`.

use nifty::image::{read_png, write_png};
use nifty::synth::{synthesize_with, SynthConfig};

fn main() -> nifty::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let exemplar = match args.first() {
        Some(path) => read_png(path)?,
        None => nifty::textures::checker(128, 128, 8)?,
    };
    let out_path = args.get(1).map(String::as_str).unwrap_or("synth.png");
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let cfg = SynthConfig::default()
        .with_output(2 * exemplar.width(), 2 * exemplar.height())
        .with_seed(seed);
    let result = synthesize_with(&exemplar, &cfg, |ev| {
        if ev.step + 1 == cfg.steps {
            println!("scale {} done ({}x{})", ev.scale, ev.image.width(), ev.image.height());
        }
    })?;
    println!(
        "{} velocity rounds, {} patch distances evaluated",
        result.stats.rounds, result.stats.distance_evals
    );
    write_png(&result.image, out_path)?;
    println!("wrote {out_path}");
    Ok(())
}
