//! Runs a (k, ratio, memory) sweep on a procedural texture and prints the
//! resulting table.
//!
//!     cargo run --release --example ablation -- [stripes|checker|dots] [period] [ks] [ratios] [memory]
//!
//! e.g. `-- stripes 8 5 0.1,1.0 on`. Without list arguments the full default
//! sweep (32 configurations) runs.

use nifty::ablation::{parse_flags, parse_list, run_sweep, AblationRow, SweepSpec};
use nifty::synth::SynthConfig;
use nifty::textures::{blue_noise_dots, checker, stripes};

fn main() -> nifty::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).map(String::as_str);
    let period: usize = arg(1).unwrap_or("8").parse().unwrap_or(8);
    let exemplar = match arg(0).unwrap_or("stripes") {
        "checker" => checker(128, 128, period)?,
        "dots" => blue_noise_dots(128, 128, 2.0 * period as f64, period as f64 / 2.0, 5)?,
        _ => stripes(128, 128, period)?,
    };
    let defaults = SweepSpec::default();
    let sweep = SweepSpec {
        ks: arg(2).map(parse_list).transpose()?.unwrap_or(defaults.ks),
        ratios: arg(3).map(parse_list).transpose()?.unwrap_or(defaults.ratios),
        memory: arg(4).map(parse_flags).transpose()?.unwrap_or(defaults.memory),
    };
    let base = SynthConfig::default().with_output(128, 128).with_seed(3);
    println!("{},seconds", AblationRow::CSV_HEADER);
    run_sweep(&exemplar, &base, &sweep, |row| println!("{},{:.2}", row.csv_row(), row.seconds))?;
    Ok(())
}
