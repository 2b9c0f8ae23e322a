//! Blends two textures in the three supported ways.
//!
//!     cargo run --release --example blend -- [a.png b.png] [out_dir]
//!
//! Writes `blend_distribution.png`, `blend_pixel.png` and
//! `blend_spatial.png`; the spatial blend fades from the second exemplar on
//! the left to the first on the right.

use std::path::PathBuf;

use nifty::image::{read_png, write_png, Image};
use nifty::synth::{synthesize_blend, BlendMode, BlendSpec, SynthConfig};
use nifty::textures::{blue_noise_dots, stripes};

fn main() -> nifty::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (a, b, out_dir) = if args.len() >= 2 {
        (read_png(&args[0])?, read_png(&args[1])?, args.get(2))
    } else {
        (stripes(128, 128, 8)?, blue_noise_dots(128, 128, 14.0, 3.5, 5)?, args.first())
    };
    let out_dir = PathBuf::from(out_dir.map(String::as_str).unwrap_or("."));
    std::fs::create_dir_all(&out_dir).ok();

    let (w, h) = (2 * a.width(), a.height());
    let cfg = SynthConfig::default().with_output(w, h).with_seed(2);
    let ramp = Image::from_fn(w, h, 1, |_, _, x| x as f64 / (w - 1) as f64)?;
    let specs = [
        ("distribution", BlendSpec { mode: BlendMode::Distribution, alpha: 0.5, alpha_map: None }),
        ("pixel", BlendSpec { mode: BlendMode::Pixel, alpha: 0.5, alpha_map: None }),
        ("spatial", BlendSpec { mode: BlendMode::Spatial, alpha: 0.5, alpha_map: Some(ramp) }),
    ];
    for (name, spec) in &specs {
        let out = synthesize_blend(&a, &b, &cfg, spec)?;
        let path = out_dir.join(format!("blend_{name}.png"));
        write_png(&out, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
