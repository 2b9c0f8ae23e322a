//! Flat `key=value` run manifests written next to every output.
//!
//! A manifest records the fully resolved configuration of a run, so the run
//! can be repeated with [`RunManifest::read`] and the `*_config` helpers.
//! Floats are written in shortest round-trip form.

use std::path::Path;
use std::str::FromStr;

use crate::baseline::TOConfig;
use crate::error::{Error, Result};
use crate::synth::SynthConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("tool", "nifty");
        m.set("version", TOOL_VERSION);
        m.set("command", command);
        m
    }

    /// Inserts or replaces `key`.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::InvalidConfig(format!("manifest is missing '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::InvalidConfig(format!("manifest value '{raw}' for '{key}' is malformed")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("manifest line {} has no '='", n + 1)))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set_synth_config(&mut self, cfg: &SynthConfig) {
        self.set("scales", cfg.scales);
        self.set("patch_size", cfg.patch_size);
        self.set("stride", cfg.stride);
        self.set("ref_stride", cfg.ref_stride);
        self.set("k", cfg.k);
        self.set("steps", cfg.steps);
        self.set("gamma", cfg.gamma);
        self.set("ratio", cfg.ratio);
        self.set("memory", if cfg.memory { "on" } else { "off" });
        self.set("seed", cfg.seed);
        self.set("width", cfg.out_w);
        self.set("height", cfg.out_h);
        self.set("kernel_sigma", cfg.kernel_sigma);
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        Ok(SynthConfig {
            scales: self.require("scales")?,
            patch_size: self.require("patch_size")?,
            stride: self.require("stride")?,
            ref_stride: self.require("ref_stride")?,
            k: self.require("k")?,
            steps: self.require("steps")?,
            gamma: self.require("gamma")?,
            ratio: self.require("ratio")?,
            memory: parse_on_off(self.get("memory").unwrap_or(""))?,
            seed: self.require("seed")?,
            out_w: self.require("width")?,
            out_h: self.require("height")?,
            kernel_sigma: self.require("kernel_sigma")?,
        })
    }

    pub fn set_to_config(&mut self, cfg: &TOConfig) {
        self.set("scales", cfg.scales);
        let sizes: Vec<String> = cfg.patch_sizes.iter().map(|p| p.to_string()).collect();
        self.set("patch_sizes", sizes.join(","));
        self.set("stride_divisor", cfg.stride_divisor);
        self.set("ref_stride", cfg.ref_stride);
        self.set("iterations", cfg.iterations);
        self.set("seed", cfg.seed);
        self.set("width", cfg.out_w);
        self.set("height", cfg.out_h);
    }

    pub fn to_config(&self) -> Result<TOConfig> {
        Ok(TOConfig {
            scales: self.require("scales")?,
            patch_sizes: crate::ablation::parse_list(self.get("patch_sizes").unwrap_or(""))?,
            stride_divisor: self.require("stride_divisor")?,
            ref_stride: self.require("ref_stride")?,
            iterations: self.require("iterations")?,
            seed: self.require("seed")?,
            out_w: self.require("width")?,
            out_h: self.require("height")?,
        })
    }
}

fn parse_on_off(s: &str) -> Result<bool> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(Error::InvalidConfig(format!("memory must be on or off, got '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn synth_config_round_trips(
            seed in any::<u64>(), gamma in 0.001f64..0.999, ratio in 0.001f64..=1.0,
            sigma in 0.01f64..100.0, memory in any::<bool>(), k in 1usize..50,
        ) {
            let cfg = SynthConfig { seed, gamma, ratio, kernel_sigma: sigma, memory, k, ..SynthConfig::default() };
            let mut m = RunManifest::new("synth");
            m.set_synth_config(&cfg);
            let parsed = RunManifest::parse(&m.to_text()).unwrap();
            prop_assert_eq!(parsed.synth_config().unwrap(), cfg);
        }
    }

    #[test]
    fn to_config_round_trips() {
        let cfg = TOConfig {
            patch_sizes: vec![24, 12, 6],
            seed: 99,
            ..TOConfig::default()
        };
        let mut m = RunManifest::new("to");
        m.set_to_config(&cfg);
        assert_eq!(RunManifest::parse(&m.to_text()).unwrap().to_config().unwrap(), cfg);
    }

    #[test]
    fn malformed_lines() {
        assert!(RunManifest::parse("a=1\nnonsense\n").is_err());
        let m = RunManifest::parse("# comment\nk=x\n").unwrap();
        assert!(m.require::<usize>("k").is_err());
        assert!(m.require::<usize>("missing").is_err());
    }
}
