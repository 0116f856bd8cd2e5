//! Run configuration: one TOML file with a section per command family.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, then
//! command-line flags. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::CoupledRange;
use crate::bounds::BoundInputs;
use crate::error::{Error, Result};
use crate::fission::AppendixSchedule;
use crate::harness::EndpointConfig;
use crate::output::Format;
pub use crate::toy::DeltaWConfig;
use crate::toy::{OrderingConfig, SeparationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    /// Layer widths, bottom first, for uniform Monte Carlo runs.
    pub widths: Vec<usize>,
    pub p: f64,
    pub q: f64,
    pub reps: usize,
    pub layers: usize,
    pub schedule: AppendixSchedule,
    pub transition: TransitionConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            widths: vec![16, 12, 8, 4, 1],
            p: 0.3,
            q: 0.5,
            reps: 10,
            layers: 10,
            schedule: AppendixSchedule::default(),
            transition: TransitionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionConfig {
    pub parent_width: usize,
    pub parent_erased: usize,
    pub child_width: usize,
    pub p: f64,
    pub q: f64,
    pub replicates: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        Self {
            parent_width: 8,
            parent_erased: 4,
            child_width: 64,
            p: 0.2,
            q: 0.5,
            replicates: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    pub p: f64,
    pub q: f64,
    pub n: u32,
    pub samples: usize,
    pub range: CoupledRange,
    pub grid_steps: usize,
    pub layers: usize,
    pub deltas: Vec<f64>,
    pub lambda: f64,
    pub filter_layers: f64,
    pub layer: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            p: 0.3,
            q: 0.5,
            n: 4,
            samples: 101,
            range: CoupledRange::default(),
            grid_steps: 15,
            layers: 10,
            deltas: vec![0.1, 0.5, 0.9],
            lambda: 0.5,
            filter_layers: 2.0,
            layer: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub inputs: BoundInputs,
    pub steps: usize,
    pub t_base: f64,
    pub epsilon: f64,
    pub spread: f64,
    pub n_tokens: u64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            inputs: BoundInputs::default(),
            steps: 5,
            t_base: 0.0,
            epsilon: 0.1,
            spread: 0.1,
            n_tokens: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub m: usize,
    pub p_bits: u32,
    pub heads: usize,
    pub n: usize,
    pub h_w: f64,
    pub c: f64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            m: 64,
            p_bits: 16,
            heads: 4,
            n: 16,
            h_w: 8.0,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub separation: SeparationConfig,
    pub ordering: OrderingConfig,
    pub deltaw: DeltaWConfig,
    pub capacity: CapacityConfig,
    pub gradcheck_nets: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            separation: SeparationConfig::default(),
            ordering: OrderingConfig::default(),
            deltaw: DeltaWConfig::default(),
            capacity: CapacityConfig::default(),
            gradcheck_nets: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub dataset: Option<PathBuf>,
    /// Synthetic examples generated when no dataset is given.
    pub synth_examples: usize,
    pub synth_distractors: usize,
    pub layouts: Vec<String>,
    pub endpoint: EndpointConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            synth_examples: 20,
            synth_distractors: 2,
            layouts: vec![
                "query_first+gold".into(),
                "query_last+gold".into(),
                "query_first+gold+1".into(),
                "query_last+gold+1".into(),
                "query_both+gold+1".into(),
            ],
            endpoint: EndpointConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: Option<usize>,
    pub simulate: SimulateConfig,
    pub analyze: AnalyzeConfig,
    pub bounds: BoundsConfig,
    pub toy: ToyConfig,
    pub harness: HarnessConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out: None,
            format: Format::Csv,
            jobs: None,
            simulate: SimulateConfig::default(),
            analyze: AnalyzeConfig::default(),
            bounds: BoundsConfig::default(),
            toy: ToyConfig::default(),
            harness: HarnessConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let c = RunConfig::from_toml("seed = 3\n[analyze]\np = 0.2\n[toy.deltaw]\ninstances = 2\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.analyze.p, 0.2);
        assert_eq!(c.analyze.n, 4);
        assert_eq!(c.toy.deltaw.instances, 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sed = 3\n").is_err());
        assert!(RunConfig::from_toml("[analyze]\nqq = 0.2\n").is_err());
        assert!(RunConfig::from_toml("[toy.separation.train]\nlearning_rate = 1\n").is_err());
    }
}
