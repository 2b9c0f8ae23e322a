//! Scores a synthesis against its exemplar and exports the novelty maps:
//! per-pixel nearest-neighbour distance, the source coordinates of each
//! pixel's nearest patch, and the mask of patches that are not copies.
//!
//!     cargo run --release --example novelty -- [out_dir]

use std::path::PathBuf;

use nifty::image::write_png;
use nifty::metrics::{evaluate, MetricOptions, MetricReport};
use nifty::synth::{synthesize, SynthConfig};
use nifty::textures::blue_noise_dots;

fn main() -> nifty::Result<()> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&out_dir).ok();
    let exemplar = blue_noise_dots(128, 128, 14.0, 3.5, 11)?;
    let synth = synthesize(&exemplar, &SynthConfig::default().with_output(160, 160).with_seed(4))?;

    let opts = MetricOptions::default();
    let (report, maps) = evaluate(&exemplar, &synth, &opts)?;
    println!("{}", MetricReport::CSV_HEADER);
    println!("{}", report.csv_row("dots", "synth", &opts));
    println!(
        "{:.1}% of patches are farther than tau = {:.3} from every exemplar patch",
        100.0 * maps.novel_fraction(),
        maps.tau
    );

    write_png(&synth, out_dir.join("novelty_synth.png"))?;
    write_png(&maps.distance_colormap(), out_dir.join("novelty_distance.png"))?;
    write_png(&maps.coords_colormap(), out_dir.join("novelty_coords.png"))?;
    let mut mask = maps.novel_mask.clone();
    mask.data_mut().iter_mut().for_each(|v| *v *= 255.0);
    write_png(&mask, out_dir.join("novelty_mask.png"))?;
    Ok(())
}
