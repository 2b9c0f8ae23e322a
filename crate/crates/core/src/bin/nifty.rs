//! Command-line front end. Every command resolves its flags into a run
//! manifest first and executes from that manifest, so `replay` reproduces
//! any recorded run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use nifty::ablation::{parse_flags, parse_list, run_sweep, AblationRow, SweepSpec};
use nifty::baseline::{to_synthesize, TOConfig};
use nifty::image::{read_png, write_png, Image};
use nifty::manifest::RunManifest;
use nifty::metrics::{evaluate, MetricOptions, MetricReport};
use nifty::synth::{synthesize_blend_with, synthesize_with, BlendMode, BlendSpec, StepEvent, SynthConfig};
use nifty::{Error, Result};

#[derive(Parser)]
#[command(name = "nifty", version, about = "Exemplar-based texture synthesis by patch flow matching")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a texture from an exemplar.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        /// Write every intermediate state as numbered PNGs into this directory.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Texture optimization baseline.
    To(ToArgs),
    /// Blend two exemplars.
    Blend {
        #[command(flatten)]
        synth: SynthArgs,
        /// Second exemplar.
        #[arg(long)]
        ref_b: PathBuf,
        /// distribution, pixel or spatial.
        #[arg(long)]
        mode: String,
        /// Weight of the first exemplar in pixel mode.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Grayscale PNG giving the first exemplar's weight per location.
        #[arg(long)]
        alpha_map: Option<PathBuf>,
    },
    /// Compare a synthesis with its exemplar.
    Metrics(MetricsArgs),
    /// Sweep neighbour count, subsampling ratio and memory.
    Ablate {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, default_value = "1,2,5,10")]
        ks: String,
        #[arg(long, default_value = "0.05,0.1,0.25,1.0")]
        ratios: String,
        #[arg(long, default_value = "on,off")]
        memory_flags: String,
    },
    /// Re-run a recorded manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Exemplar PNG.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Output path (PNG, or CSV for ablate).
    #[arg(long)]
    out: PathBuf,
    /// Output width (default: twice the exemplar width).
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value_t = 4)]
    scales: usize,
    #[arg(long, default_value_t = 16)]
    patch_size: usize,
    #[arg(long, default_value_t = 4)]
    stride: usize,
    #[arg(long, default_value_t = 4)]
    ref_stride: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 15)]
    steps: usize,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,
    /// on or off.
    #[arg(long, default_value = "on")]
    memory: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4.0)]
    kernel_sigma: f64,
}

#[derive(Args)]
struct ToArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value_t = 4)]
    scales: usize,
    #[arg(long, default_value = "32,16,8")]
    patch_sizes: String,
    #[arg(long, default_value_t = 4)]
    stride_divisor: usize,
    #[arg(long, default_value_t = 4)]
    ref_stride: usize,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MetricsArgs {
    /// Exemplar PNG.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Image to evaluate.
    #[arg(long)]
    candidate: PathBuf,
    /// CSV file receiving the header and one row.
    #[arg(long)]
    out: PathBuf,
    /// Directory for the novelty map PNGs.
    #[arg(long)]
    maps: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    patch_size: usize,
    #[arg(long, default_value_t = 64)]
    projections: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    novelty_stride: usize,
    /// Novelty threshold on squared patch distance (default 1e-3 * dim).
    #[arg(long)]
    tau: Option<f64>,
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn synth_manifest(command: &str, a: &SynthArgs) -> Result<RunManifest> {
    let exemplar = read_png(&a.reference)?;
    let memory = match a.memory.as_str() {
        "on" => true,
        "off" => false,
        other => {
            return Err(Error::InvalidArgument(format!("--memory expects on or off, got '{other}'")))
        }
    };
    let cfg = SynthConfig {
        scales: a.scales,
        patch_size: a.patch_size,
        stride: a.stride,
        ref_stride: a.ref_stride,
        k: a.k,
        steps: a.steps,
        gamma: a.gamma,
        ratio: a.ratio,
        memory,
        seed: a.seed,
        out_w: a.width.unwrap_or(2 * exemplar.width()),
        out_h: a.height.unwrap_or(2 * exemplar.height()),
        kernel_sigma: a.kernel_sigma,
    };
    cfg.validate()?;
    let mut m = RunManifest::new(command);
    m.set("ref", path_str(&a.reference));
    m.set("out", path_str(&a.out));
    m.set_synth_config(&cfg);
    Ok(m)
}

fn build_manifest(command: Command) -> Result<RunManifest> {
    Ok(match command {
        Command::Synth { synth, snapshots } => {
            let mut m = synth_manifest("synth", &synth)?;
            if let Some(dir) = snapshots {
                m.set("snapshots", path_str(&dir));
            }
            m
        }
        Command::Blend {
            synth,
            ref_b,
            mode,
            alpha,
            alpha_map,
        } => {
            let parsed: BlendMode = mode.parse()?;
            if parsed == BlendMode::Spatial && alpha_map.is_none() {
                return Err(Error::InvalidArgument("--mode spatial requires --alpha-map".into()));
            }
            let mut m = synth_manifest("blend", &synth)?;
            m.set("ref_b", path_str(&ref_b));
            m.set("mode", mode);
            m.set("alpha", alpha);
            m.set("alpha_map", alpha_map.as_deref().map(path_str).unwrap_or_default());
            m
        }
        Command::To(a) => {
            let exemplar = read_png(&a.reference)?;
            let cfg = TOConfig {
                scales: a.scales,
                patch_sizes: parse_list(&a.patch_sizes)?,
                stride_divisor: a.stride_divisor,
                ref_stride: a.ref_stride,
                iterations: a.iterations,
                seed: a.seed,
                out_w: a.width.unwrap_or(2 * exemplar.width()),
                out_h: a.height.unwrap_or(2 * exemplar.height()),
            };
            cfg.validate()?;
            let mut m = RunManifest::new("to");
            m.set("ref", path_str(&a.reference));
            m.set("out", path_str(&a.out));
            m.set_to_config(&cfg);
            m
        }
        Command::Metrics(a) => {
            let mut m = RunManifest::new("metrics");
            m.set("ref", path_str(&a.reference));
            m.set("candidate", path_str(&a.candidate));
            m.set("out", path_str(&a.out));
            m.set("maps", a.maps.as_deref().map(path_str).unwrap_or_default());
            m.set("patch_size", a.patch_size);
            m.set("projections", a.projections);
            m.set("seed", a.seed);
            m.set("novelty_stride", a.novelty_stride);
            m.set("tau", a.tau.map(|t| t.to_string()).unwrap_or_default());
            m
        }
        Command::Ablate {
            synth,
            ks,
            ratios,
            memory_flags,
        } => {
            let sweep = SweepSpec {
                ks: parse_list(&ks)?,
                ratios: parse_list(&ratios)?,
                memory: parse_flags(&memory_flags)?,
            };
            sweep.validate()?;
            let mut m = synth_manifest("ablate", &synth)?;
            m.set("ks", ks);
            m.set("ratios", ratios);
            m.set("memory_flags", memory_flags);
            m
        }
        Command::Replay { manifest } => RunManifest::read(&manifest)?,
    })
}

fn write_snapshot(dir: &Path, ev: &StepEvent<'_>, count: &mut usize) -> Result<()> {
    let stats = nifty::image::NormStats::symmetric(ev.image.channels());
    let path = dir.join(format!("step_{:04}_s{}_t{:.4}.png", *count, ev.scale, ev.t_to));
    *count += 1;
    write_png(&stats.denormalize(ev.image)?, path)
}

fn opt_path(m: &RunManifest, key: &str) -> Option<PathBuf> {
    m.get(key).filter(|s| !s.is_empty()).map(PathBuf::from)
}

fn required_path(m: &RunManifest, key: &str) -> Result<PathBuf> {
    opt_path(m, key).ok_or_else(|| Error::InvalidConfig(format!("manifest is missing '{key}'")))
}

/// Runs the manifest's command; returns the path the manifest is stored at.
fn execute(m: &mut RunManifest) -> Result<PathBuf> {
    let command = m.get("command").unwrap_or_default().to_string();
    let out = required_path(m, "out")?;
    match command.as_str() {
        "synth" => {
            let cfg = m.synth_config()?;
            let exemplar = read_png(required_path(m, "ref")?)?;
            let snapshots = opt_path(m, "snapshots");
            if let Some(dir) = &snapshots {
                std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            let mut count = 0;
            let mut snap_err = None;
            let result = synthesize_with(&exemplar, &cfg, |ev| {
                if let Some(dir) = &snapshots {
                    if let Err(e) = write_snapshot(dir, ev, &mut count) {
                        snap_err.get_or_insert(e);
                    }
                }
            })?;
            if let Some(e) = snap_err {
                return Err(e);
            }
            write_png(&result.image, &out)?;
        }
        "blend" => {
            let cfg = m.synth_config()?;
            let a = read_png(required_path(m, "ref")?)?;
            let b = read_png(required_path(m, "ref_b")?)?;
            let alpha_map = match opt_path(m, "alpha_map") {
                Some(p) => {
                    let img = read_png(&p)?;
                    let mut g = Image::new(img.width(), img.height(), 1, img.plane(0).to_vec())?;
                    g.data_mut().iter_mut().for_each(|v| *v /= 255.0);
                    Some(g)
                }
                None => None,
            };
            let spec = BlendSpec {
                mode: m.get("mode").unwrap_or_default().parse()?,
                alpha: m.require("alpha")?,
                alpha_map,
            };
            let result = synthesize_blend_with(&a, &b, &cfg, &spec, |_| {})?;
            write_png(&result.image, &out)?;
        }
        "to" => {
            let cfg = m.to_config()?;
            let exemplar = read_png(required_path(m, "ref")?)?;
            write_png(&to_synthesize(&exemplar, &cfg)?, &out)?;
        }
        "metrics" => {
            let reference = read_png(required_path(m, "ref")?)?;
            let candidate = read_png(required_path(m, "candidate")?)?;
            let tau = match m.get("tau").unwrap_or_default() {
                "" => None,
                _ => Some(m.require("tau")?),
            };
            let opts = MetricOptions {
                patch_size: m.require("patch_size")?,
                projections: m.require("projections")?,
                seed: m.require("seed")?,
                novelty_stride: m.require("novelty_stride")?,
                tau,
            };
            let (report, maps) = evaluate(&reference, &candidate, &opts)?;
            let csv = format!(
                "{}\n{}\n",
                MetricReport::CSV_HEADER,
                report.csv_row(m.get("ref").unwrap_or_default(), m.get("candidate").unwrap_or_default(), &opts)
            );
            std::fs::write(&out, csv).map_err(io_err(&out))?;
            if let Some(dir) = opt_path(m, "maps") {
                std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                write_png(&maps.distance_colormap(), dir.join("nn_distance.png"))?;
                write_png(&maps.coords_colormap(), dir.join("nn_coords.png"))?;
                let mut mask = maps.novel_mask.clone();
                mask.data_mut().iter_mut().for_each(|v| *v *= 255.0);
                write_png(&mask, dir.join("novel_mask.png"))?;
            }
        }
        "ablate" => {
            let base = m.synth_config()?;
            let exemplar = read_png(required_path(m, "ref")?)?;
            let sweep = SweepSpec {
                ks: parse_list(m.get("ks").unwrap_or_default())?,
                ratios: parse_list(m.get("ratios").unwrap_or_default())?,
                memory: parse_flags(m.get("memory_flags").unwrap_or_default())?,
            };
            let rows = run_sweep(&exemplar, &base, &sweep, |row| {
                println!("{}  ({:.2} s)", row.csv_row(), row.seconds);
            })?;
            let mut csv = format!("{}\n", AblationRow::CSV_HEADER);
            let mut timing = format!("{}\n", AblationRow::TIMING_HEADER);
            for row in &rows {
                csv.push_str(&row.csv_row());
                csv.push('\n');
                timing.push_str(&row.timing_row());
                timing.push('\n');
            }
            std::fs::write(&out, csv).map_err(io_err(&out))?;
            let mut timing_path = out.as_os_str().to_owned();
            timing_path.push(".timing.csv");
            let timing_path = PathBuf::from(timing_path);
            std::fs::write(&timing_path, timing).map_err(io_err(&timing_path))?;
        }
        other => {
            return Err(Error::InvalidConfig(format!("unknown command '{other}' in manifest")));
        }
    }
    Ok(manifest_path(&out))
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::InvalidConfig(_) | Error::InvalidArgument(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let mut manifest = match build_manifest(cli.command) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let start = Instant::now();
    let result = execute(&mut manifest).and_then(|path| {
        let secs = start.elapsed().as_secs_f64();
        manifest.set("duration_seconds", format!("{secs:.3}"));
        manifest.write(&path)?;
        println!(
            "{} finished in {:.2} s -> {}",
            manifest.get("command").unwrap_or_default(),
            secs,
            manifest.get("out").unwrap_or_default()
        );
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
