//! Run configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detrend::FilterConfig;
use crate::error::{Result, SkgError};
use crate::ingest::{ChannelSimConfig, Scenario, SubsampleSpec};
use crate::leakage::{Estimator, DEFAULT_BLOCK_SIZE};
use crate::quantize::QuantizerConfig;
use crate::randomness::SuiteConfig;

pub const DEFAULT_R_VALUES: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Synthetic channels, one per entry in `scenarios`.
    Simulator(SimulatorSource),
    /// Measured channels. The legitimate file holds interleaved
    /// downlink/uplink probes; Eve's file, if any, is aligned with it.
    Dataset(DatasetSource),
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::Simulator(SimulatorSource::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSource {
    /// Presets to run; `unlabeled` uses the plain defaults.
    pub scenarios: Vec<Scenario>,
    pub num_samples: usize,
    pub eve_correlation: f64,
    /// Overrides the preset SNR when set.
    pub snr_db: Option<f64>,
    pub include_eve: bool,
}

impl Default for SimulatorSource {
    fn default() -> Self {
        SimulatorSource {
            scenarios: vec![Scenario::Los, Scenario::Nlos],
            num_samples: 131_072,
            eve_correlation: 0.0,
            snr_db: None,
            include_eve: true,
        }
    }
}

impl SimulatorSource {
    /// Channel configuration for one scenario, seeded from the run seed.
    pub fn channel(&self, scenario: Scenario, seed: u64) -> ChannelSimConfig {
        let mut cfg = match scenario {
            Scenario::Los => ChannelSimConfig::los(seed),
            Scenario::Nlos => ChannelSimConfig::nlos(seed),
            Scenario::Unlabeled => ChannelSimConfig {
                seed,
                scenario,
                ..ChannelSimConfig::default()
            },
        };
        cfg.num_samples = self.num_samples;
        cfg.eve_correlation = self.eve_correlation;
        if let Some(snr) = self.snr_db {
            cfg.snr_db = snr;
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    pub legit_path: PathBuf,
    #[serde(default)]
    pub eve_path: Option<PathBuf>,
    #[serde(default)]
    pub subsample: SubsampleSpec,
    /// Replaces the scenario label stored in the file.
    #[serde(default)]
    pub scenario: Option<Scenario>,
}

/// One detrending choice in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum FilterSetting {
    Unfiltered,
    Kalman(f64),
}

impl FilterSetting {
    pub fn r(self) -> Option<f64> {
        match self {
            FilterSetting::Unfiltered => None,
            FilterSetting::Kalman(r) => Some(r),
        }
    }

    /// Sort key: unfiltered first, then descending R.
    pub(crate) fn order_key(self) -> (u8, f64) {
        match self {
            FilterSetting::Unfiltered => (0, 0.0),
            FilterSetting::Kalman(r) => (1, -r),
        }
    }
}

impl fmt::Display for FilterSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSetting::Unfiltered => f.write_str("none"),
            FilterSetting::Kalman(r) => write!(f, "{r:e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSweep {
    pub r_values: Vec<f64>,
    /// Adds a row without detrending.
    pub include_unfiltered: bool,
    pub process_noise_q: f64,
}

impl Default for FilterSweep {
    fn default() -> Self {
        FilterSweep {
            r_values: DEFAULT_R_VALUES.to_vec(),
            include_unfiltered: true,
            process_noise_q: FilterConfig::DEFAULT_Q,
        }
    }
}

impl FilterSweep {
    pub fn settings(&self) -> Vec<FilterSetting> {
        let mut out = Vec::new();
        if self.include_unfiltered {
            out.push(FilterSetting::Unfiltered);
        }
        out.extend(self.r_values.iter().map(|&r| FilterSetting::Kalman(r)));
        out
    }

    pub fn filter_config(&self, r: f64) -> FilterConfig {
        FilterConfig {
            process_noise_q: self.process_noise_q,
            ..FilterConfig::with_r(r)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeSweep {
    pub block_length: usize,
    pub rates: Vec<f64>,
    /// Fraction of frames, taken from the start, that only calibrate the
    /// decoder crossover.
    pub calibration_fraction: f64,
    pub min_crossover: f64,
    pub max_crossover: f64,
}

impl Default for CodeSweep {
    fn default() -> Self {
        CodeSweep {
            block_length: 1024,
            rates: vec![0.1, 0.3, 0.5],
            calibration_fraction: 0.1,
            min_crossover: 1e-3,
            max_crossover: 0.499,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: Estimator,
    pub block_size: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            kind: Estimator::Frequentist,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub r_values: Vec<f64>,
    pub samples: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            r_values: vec![1e-2, 1e-3, 1e-5],
            samples: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub sampling_period_t_s: f64,
    pub source: SourceConfig,
    pub filter: FilterSweep,
    pub quantizer: QuantizerConfig,
    pub code: CodeSweep,
    pub estimator: EstimatorConfig,
    pub nist: SuiteConfig,
    pub trace: TraceConfig,
    /// Keep the generated keys (hex) in the report.
    pub export_keys: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            sampling_period_t_s: 0.005,
            source: SourceConfig::default(),
            filter: FilterSweep::default(),
            quantizer: QuantizerConfig::default(),
            code: CodeSweep::default(),
            estimator: EstimatorConfig::default(),
            nist: SuiteConfig::default(),
            trace: TraceConfig::default(),
            export_keys: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| SkgError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SkgError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_period_t_s > 0.0) {
            return Err(SkgError::config("sampling_period_t_s must be positive"));
        }
        if self.filter.settings().is_empty() {
            return Err(SkgError::config("filter sweep is empty"));
        }
        for &r in &self.filter.r_values {
            self.filter.filter_config(r).validate()?;
        }
        if self.code.rates.is_empty() {
            return Err(SkgError::config("code rate list is empty"));
        }
        if let Some(r) = self.code.rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(SkgError::config(format!("code rate must lie in (0, 1), got {r}")));
        }
        if !(self.code.calibration_fraction > 0.0 && self.code.calibration_fraction < 1.0) {
            return Err(SkgError::config("calibration_fraction must lie in (0, 1)"));
        }
        if !(0.0 < self.code.min_crossover
            && self.code.min_crossover <= self.code.max_crossover
            && self.code.max_crossover < 0.5)
        {
            return Err(SkgError::config("crossover clamp must satisfy 0 < min ≤ max < 0.5"));
        }
        self.quantizer.validate()?;
        let frame_bits = self.quantizer.frame_bits(crate::quantize::SAMPLES_PER_FRAME);
        if frame_bits != self.code.block_length {
            return Err(SkgError::config(format!(
                "code block length {} must equal the quantized frame length {frame_bits}",
                self.code.block_length
            )));
        }
        if !frame_bits.is_multiple_of(self.estimator.block_size) {
            return Err(SkgError::config("estimator block size must divide the frame length"));
        }
        self.nist.validate()?;
        match &self.source {
            SourceConfig::Simulator(s) => {
                if s.scenarios.is_empty() {
                    return Err(SkgError::config("simulator scenario list is empty"));
                }
                for &sc in &s.scenarios {
                    s.channel(sc, self.seed).validate()?;
                }
            }
            SourceConfig::Dataset(d) => d.subsample.validate()?,
        }
        Ok(())
    }

    /// Short hex digest of the canonical JSON form of the configuration.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}
