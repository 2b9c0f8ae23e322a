//! Sweeps over neighbour count, subsampling ratio and memory.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::image::{Image, NormStats};
use crate::metrics::{patch_sliced_wasserstein, DEFAULT_PROJECTIONS};
use crate::synth::{synthesize_with, SynthConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub ks: Vec<usize>,
    pub ratios: Vec<f64>,
    pub memory: Vec<bool>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            ks: vec![1, 2, 5, 10],
            ratios: vec![0.05, 0.1, 0.25, 1.0],
            memory: vec![true, false],
        }
    }
}

impl SweepSpec {
    pub fn len(&self) -> usize {
        self.ks.len() * self.ratios.len() * self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidConfig("sweep has no configurations".into()));
        }
        if self.ks.contains(&0) {
            return Err(Error::InvalidConfig("sweep k values must be positive".into()));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::InvalidConfig(format!("sweep ratio {r} outside (0, 1]")));
        }
        Ok(())
    }
}

/// Parses a comma-separated list such as `1,2,5`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("malformed sweep entry '{p}' in '{s}'")))
        })
        .collect()
}

/// Parses `on`/`off` lists.
pub fn parse_flags(s: &str) -> Result<Vec<bool>> {
    s.split(',')
        .map(|p| match p.trim() {
            "on" | "true" | "1" => Ok(true),
            "off" | "false" | "0" => Ok(false),
            other => Err(Error::InvalidArgument(format!("malformed memory flag '{other}'"))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub k: usize,
    pub ratio: f64,
    pub memory: bool,
    pub sliced_wasserstein: f64,
    /// Patch distances evaluated by the k-NN searches, a deterministic cost.
    pub distance_evals: u64,
    pub seconds: f64,
}

impl AblationRow {
    pub const CSV_HEADER: &'static str = "k,ratio,memory,sliced_wasserstein,distance_evals";
    pub const TIMING_HEADER: &'static str = "k,ratio,memory,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.k,
            self.ratio,
            if self.memory { "on" } else { "off" },
            self.sliced_wasserstein,
            self.distance_evals
        )
    }

    pub fn timing_row(&self) -> String {
        format!(
            "{},{},{},{:.6}",
            self.k,
            self.ratio,
            if self.memory { "on" } else { "off" },
            self.seconds
        )
    }
}

/// One synthesis per configuration, all with `base.seed`, each scored by the
/// sliced Wasserstein distance between non-overlapping patches of the output
/// and of the exemplar (normalized space).
pub fn run_sweep(
    exemplar: &Image,
    base: &SynthConfig,
    sweep: &SweepSpec,
    mut progress: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    sweep.validate()?;
    let stats = NormStats::symmetric(exemplar.channels());
    let reference = stats.normalize(exemplar)?;
    let mut rows = Vec::with_capacity(sweep.len());
    for &k in &sweep.ks {
        for &ratio in &sweep.ratios {
            for &memory in &sweep.memory {
                let cfg = SynthConfig {
                    k,
                    ratio,
                    memory,
                    ..base.clone()
                };
                let start = Instant::now();
                let out = synthesize_with(exemplar, &cfg, |_| {})?;
                let seconds = start.elapsed().as_secs_f64();
                let synth = stats.normalize(&out.image)?;
                let sw = patch_sliced_wasserstein(
                    &synth,
                    &reference,
                    cfg.patch_size,
                    DEFAULT_PROJECTIONS,
                    cfg.seed,
                )?;
                let row = AblationRow {
                    k,
                    ratio,
                    memory,
                    sliced_wasserstein: sw,
                    distance_evals: out.stats.distance_evals,
                    seconds,
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsing() {
        assert_eq!(parse_list::<usize>("1, 2,5").unwrap(), vec![1, 2, 5]);
        assert!(parse_list::<usize>("1,x").is_err());
        assert_eq!(parse_flags("on,off").unwrap(), vec![true, false]);
        assert!(parse_flags("maybe").is_err());
    }

    #[test]
    fn default_sweep_has_32_cells() {
        assert_eq!(SweepSpec::default().len(), 32);
        let bad = SweepSpec {
            ratios: vec![0.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tiny_sweep_rows() {
        let ex = crate::textures::checker(16, 16, 2).unwrap();
        let base = SynthConfig {
            scales: 1,
            patch_size: 4,
            stride: 2,
            ref_stride: 2,
            steps: 3,
            kernel_sigma: 1.0,
            ..SynthConfig::default()
        }
        .with_output(16, 16);
        let sweep = SweepSpec {
            ks: vec![1, 3],
            ratios: vec![0.5, 1.0],
            memory: vec![true, false],
        };
        let rows = run_sweep(&ex, &base, &sweep, |_| {}).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.sliced_wasserstein.is_finite() && r.sliced_wasserstein >= 0.0));
        assert_eq!(rows[0].csv_row().split(',').count(), 5);
    }
}
