//! Training-free exemplar-based texture synthesis by non-local patch flow
//! matching.
//!
//! A synthesis is an ODE integrated from Gaussian noise to the patch
//! distribution of an exemplar. Its velocity field is available in closed
//! form as a Gaussian mixture over exemplar patches; the library evaluates
//! it with a top-k nearest-neighbour truncation, random candidate
//! subsampling with a per-patch memory, kernel-weighted aggregation of
//! overlapping patches, and a coarse-to-fine pyramid.
//!
//! Modules:
//! * [`image`], [`patch`]: rasters, resizing, patch extraction/aggregation.
//! * [`flow`]: neighbour search, mixture weights, velocities, Euler steps.
//! * [`synth`]: the multi-scale synthesizer and exemplar blending.
//! * [`baseline`]: classical texture optimization for comparison.
//! * [`metrics`]: patch Wasserstein distances, autocorrelation, novelty maps.
//! * [`ablation`]: (k, ratio, memory) sweeps.
//!
//! ```no_run
//! use nifty::{image::read_png, synth::{synthesize, SynthConfig}};
//!
//! let exemplar = read_png("wood.png")?;
//! let cfg = SynthConfig::default().with_output(512, 512).with_seed(7);
//! let out = synthesize(&exemplar, &cfg)?;
//! nifty::image::write_png(&out, "wood_synth.png")?;
//! # Ok::<(), nifty::Error>(())
//! ```

pub mod ablation;
pub mod baseline;
pub mod error;
pub mod flow;
pub mod image;
pub mod manifest;
pub mod metrics;
pub mod patch;
pub mod synth;
pub mod textures;

pub use error::{Error, Result};
pub use image::Image;
pub use patch::PatchSet;
pub use synth::{synthesize, SynthConfig};
