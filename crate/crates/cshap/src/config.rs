//! Declarative run configuration (TOML) and the provenance record written
//! beside every run's outputs.
//!
//! One config file drives the whole pipeline; command-line flags override
//! individual keys. The schema, with defaults:
//!
//! ```toml
//! seed = 42
//!
//! [synth]
//! scenarios_per_class = 2
//! cycles_per_scenario = 8
//! overlap = 0.5
//!
//! [windows]
//! sizes = [100, 200, 400]
//! shift = 10
//!
//! [decompose]
//! subsample = 40
//! penalty = 50.0
//! min_segment_length = 2
//! resample_halo = 20
//! resample_smooth_window = 20
//! peak_tukey_k = 1.5
//! peak_noise_smooth_window = 20
//! lf_window = 75
//!
//! [model]
//! channel_sizes = [8, 8, 16]
//! kernel_size = 5
//! fc_size = 64
//! epochs = 10
//! batch_size = 64
//! learning_rate = 0.01
//! momentum = 0.9
//!
//! [explain]
//! core_type = "big"
//! rounds = 1
//! cycles_per_scenario = 5
//! max_windows = 120
//!
//! [experiment]
//! seeds = [1, 2, 3]
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::changepoint::{Bandwidth, CpdParams};
use crate::dataset::BackgroundFilter;
use crate::decompose::{DecomposeParams, PeakRule};
use crate::error::{Error, Result};
use crate::model::ConvNetConfig;
use crate::synth::SynthSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthSection,
    pub windows: WindowSection,
    pub decompose: DecomposeSection,
    pub model: ModelSection,
    pub explain: ExplainSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            synth: SynthSection::default(),
            windows: WindowSection::default(),
            decompose: DecomposeSection::default(),
            model: ModelSection::default(),
            explain: ExplainSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub scenarios_per_class: usize,
    pub cycles_per_scenario: usize,
    pub overlap: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            scenarios_per_class: 2,
            cycles_per_scenario: 8,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub sizes: Vec<usize>,
    pub shift: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection {
            sizes: vec![100, 200, 400],
            shift: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSection {
    pub subsample: usize,
    pub penalty: f64,
    pub min_segment_length: usize,
    pub resample_halo: usize,
    pub resample_smooth_window: usize,
    pub peak_tukey_k: f64,
    pub peak_noise_smooth_window: usize,
    pub lf_window: usize,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        DecomposeSection {
            subsample: 40,
            penalty: 50.0,
            min_segment_length: 2,
            resample_halo: 20,
            resample_smooth_window: 20,
            peak_tukey_k: 1.5,
            peak_noise_smooth_window: 20,
            lf_window: 75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub channel_sizes: Vec<usize>,
    pub kernel_size: usize,
    pub fc_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            channel_sizes: vec![8, 8, 16],
            kernel_size: 5,
            fc_size: 64,
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-2,
            momentum: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub core_type: String,
    pub rounds: u32,
    pub cycles_per_scenario: usize,
    /// Number of test windows explained per run (evenly sampled).
    pub max_windows: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            core_type: "big".into(),
            rounds: 1,
            cycles_per_scenario: 5,
            max_windows: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seeds: Vec<u64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection { seeds: vec![1, 2, 3] }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn decompose_params(&self, seed: u64) -> DecomposeParams {
        DecomposeParams {
            cpd: CpdParams {
                subsample: self.decompose.subsample,
                penalty: self.decompose.penalty,
                bandwidth: Bandwidth::MedianHeuristic,
                min_segment_length: self.decompose.min_segment_length,
            },
            resample_halo: self.decompose.resample_halo,
            resample_smooth_window: self.decompose.resample_smooth_window,
            peak_rule: PeakRule::Tukey { k: self.decompose.peak_tukey_k },
            peak_noise_smooth_window: self.decompose.peak_noise_smooth_window,
            lf_window: self.decompose.lf_window,
            rng_seed: seed,
        }
    }

    pub fn convnet_config(&self, window_size: usize, seed: u64) -> ConvNetConfig {
        ConvNetConfig {
            channel_sizes: self.model.channel_sizes.clone(),
            kernel_size: self.model.kernel_size,
            fc_size: self.model.fc_size,
            window_size,
            epochs: self.model.epochs,
            batch_size: self.model.batch_size,
            learning_rate: self.model.learning_rate,
            momentum: self.model.momentum,
            seed,
        }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec::desk(self.synth.overlap)
    }

    pub fn background_filter(&self) -> BackgroundFilter {
        BackgroundFilter {
            core_type: self.explain.core_type.clone(),
            rounds: self.explain.rounds,
        }
    }
}

/// Record written beside every run's outputs: what produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_sha256: String,
    pub seed: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = std::fmt::Write::write_fmt(&mut out, format_args!("{b:02x}"));
    }
    out
}

/// Writes `provenance.json` into `dir`, keyed by the canonical serialized
/// configuration and the run seed.
pub fn write_provenance(dir: &Path, cfg: &RunConfig, seed: u64) -> Result<Provenance> {
    std::fs::create_dir_all(dir)?;
    let canonical =
        toml::to_string(cfg).map_err(|e| Error::Config(format!("serialize config: {e}")))?;
    let record = Provenance {
        schema_version: 1,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(canonical.as_bytes()),
        seed,
    };
    let json = serde_json::to_string_pretty(&record)?;
    std::fs::File::create(dir.join("provenance.json"))?.write_all(json.as_bytes())?;
    Ok(record)
}
