//! Python bindings: the pipeline configuration and report plus the stage
//! operations on plain lists of samples and bits.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use skg_core::amplify;
use skg_core::detrend::{kalman_filter_samples, residual_samples, FilterConfig, InitialState};
use skg_core::ingest::NodeId;
use skg_core::leakage::{self, Estimator};
use skg_core::pipeline::{self as core_pipeline, OutputFormat};
use skg_core::quantize::{self as quant, BitFrame, QuantizerConfig};
use skg_core::randomness::{self, ConcatPolicy, SuiteConfig};
use skg_core::reconcile::{self, PolarCodeSpec};
use skg_core::{Bits, SkgError};

create_exception!(skg, ConfigError, PyValueError, "Invalid parameter or configuration.");
create_exception!(skg, DataError, PyValueError, "Malformed or unusable input data.");

fn to_py(e: SkgError) -> PyErr {
    match e {
        SkgError::Config(_) => ConfigError::new_err(e.to_string()),
        SkgError::Io(_) => PyOSError::new_err(e.to_string()),
        _ => DataError::new_err(e.to_string()),
    }
}

fn bits_from(values: &[u8]) -> PyResult<Bits> {
    if let Some(v) = values.iter().find(|&&v| v > 1) {
        return Err(DataError::new_err(format!("bits must be 0 or 1, got {v}")));
    }
    Ok(Bits::from_bools(values.iter().map(|&v| v == 1)))
}

fn frames_from(frames: &[Vec<u8>], origin: NodeId) -> PyResult<Vec<BitFrame>> {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| Ok(BitFrame::new(bits_from(f)?, i, origin)))
        .collect()
}

fn bools(bits: &Bits) -> Vec<bool> {
    bits.iter().collect()
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| DataError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

/// Scalar Kalman filter over `samples`; returns `(states, residuals)`.
#[pyfunction]
#[pyo3(signature = (samples, r, q = FilterConfig::DEFAULT_Q, p0 = FilterConfig::DEFAULT_P0))]
fn kalman_filter(samples: Vec<f64>, r: f64, q: f64, p0: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = FilterConfig {
        measurement_variance_r: r,
        process_noise_q: q,
        initial_state: InitialState::FirstSample,
        initial_covariance_p0: p0,
    };
    let filtered = kalman_filter_samples(&samples, &cfg).map_err(to_py)?;
    let residuals = residual_samples(&samples, &filtered).map_err(to_py)?;
    Ok((filtered.states, residuals))
}

/// Gray-labelled equal-width quantization of one frame of residuals.
#[pyfunction]
fn quantize(samples: Vec<f64>) -> PyResult<Vec<bool>> {
    let frame = quant::quantize_row(&samples, &QuantizerConfig::default(), 0, NodeId::Alice).map_err(to_py)?;
    Ok(bools(&frame.bits))
}

#[pyfunction]
fn mismatch_rate(a: Vec<Vec<u8>>, b: Vec<Vec<u8>>) -> PyResult<f64> {
    quant::mismatch_rate(&frames_from(&a, NodeId::Alice)?, &frames_from(&b, NodeId::Bob)?).map_err(to_py)
}

#[pyfunction]
fn polar_transform(bits: Vec<u8>) -> PyResult<Vec<bool>> {
    Ok(bools(&reconcile::polar_transform(&bits_from(&bits)?).map_err(to_py)?))
}

/// A polar code used in syndrome form.
#[pyclass(frozen, module = "skg")]
struct PolarCode {
    spec: PolarCodeSpec,
}

#[pymethods]
impl PolarCode {
    #[new]
    fn new(block_length: usize, code_rate: f64, design_crossover: f64) -> PyResult<Self> {
        let spec = reconcile::construct_code(block_length, code_rate, design_crossover).map_err(to_py)?;
        Ok(PolarCode { spec })
    }

    #[getter]
    fn block_length(&self) -> usize {
        self.spec.block_length()
    }

    #[getter]
    fn syndrome_len(&self) -> usize {
        self.spec.syndrome_len()
    }

    #[getter]
    fn code_rate(&self) -> f64 {
        self.spec.code_rate()
    }

    #[getter]
    fn syndrome_positions(&self) -> Vec<usize> {
        self.spec.syndrome_positions().to_vec()
    }

    /// Serialized syndrome record for `bits`.
    fn syndrome<'py>(&self, py: Python<'py>, bits: Vec<u8>) -> PyResult<Bound<'py, PyBytes>> {
        let frame = BitFrame::new(bits_from(&bits)?, 0, NodeId::Alice);
        let syn = reconcile::make_syndrome(&frame, &self.spec).map_err(to_py)?;
        let mut out = Vec::new();
        reconcile::encode_syndrome(&syn, &self.spec, &mut out).map_err(to_py)?;
        Ok(PyBytes::new(py, &out))
    }

    /// Recovers the sender's bits from `side_info` and a syndrome record.
    fn decode(&self, side_info: Vec<u8>, record: &[u8], crossover: f64) -> PyResult<Vec<bool>> {
        let (_, syn, _) = reconcile::decode_syndrome(record).map_err(to_py)?;
        let side = BitFrame::new(bits_from(&side_info)?, 0, NodeId::Bob);
        let out = reconcile::decode(&side, &syn, &self.spec, crossover).map_err(to_py)?;
        Ok(bools(&out.bits))
    }

    fn __repr__(&self) -> String {
        format!(
            "PolarCode(block_length={}, code_rate={}, design_crossover={})",
            self.spec.block_length(),
            self.spec.code_rate(),
            self.spec.design_crossover()
        )
    }
}

fn parse_estimator(name: &str) -> PyResult<Estimator> {
    match name {
        "frequentist" => Ok(Estimator::Frequentist),
        "nearest_neighbor" => Ok(Estimator::NearestNeighbor),
        other => Err(ConfigError::new_err(format!("unknown estimator {other:?}"))),
    }
}

/// Min-entropy per bit of `b`-bit blocks across the frames.
#[pyfunction]
#[pyo3(signature = (frames, block_size = leakage::DEFAULT_BLOCK_SIZE))]
fn min_entropy(frames: Vec<Vec<u8>>, block_size: usize) -> PyResult<f64> {
    let f = frames_from(&frames, NodeId::Alice)?;
    Ok(leakage::min_entropy(&f, block_size).map_err(to_py)?.bits_per_symbol)
}

/// Conditional min-entropy per bit of `target` given Eve's observation and,
/// optionally, her decoded frames.
#[pyfunction]
#[pyo3(signature = (target, eve, eve_decoded = None, block_size = leakage::DEFAULT_BLOCK_SIZE, estimator = "frequentist"))]
fn conditional_min_entropy(
    target: Vec<Vec<u8>>,
    eve: Vec<Vec<u8>>,
    eve_decoded: Option<Vec<Vec<u8>>>,
    block_size: usize,
    estimator: &str,
) -> PyResult<f64> {
    let a = frames_from(&target, NodeId::Alice)?;
    let e = frames_from(&eve, NodeId::Eve)?;
    let d = frames_from(&eve_decoded.unwrap_or_default(), NodeId::Eve)?;
    let est =
        leakage::conditional_min_entropy(&a, &e, &[], &d, block_size, parse_estimator(estimator)?).map_err(to_py)?;
    Ok(est.bits_per_symbol)
}

#[pyfunction]
fn required_input_bits(h_cond: f64) -> PyResult<usize> {
    amplify::required_input_bits(h_cond).map_err(to_py)
}

/// 256-bit key hashed from the leading `required_input_bits(h_cond)` bits.
#[pyfunction]
fn amplify_bits<'py>(py: Python<'py>, bits: Vec<u8>, h_cond: f64) -> PyResult<Bound<'py, PyBytes>> {
    let frame = BitFrame::new(bits_from(&bits)?, 0, NodeId::Alice);
    let key = amplify::amplify(&[frame], h_cond).map_err(to_py)?;
    Ok(PyBytes::new(py, &key.key))
}

#[pyfunction]
fn key_rate(frame_bits: usize, fer: f64, h_cond: f64, period_s: f64) -> PyResult<f64> {
    core_pipeline::key_rate(frame_bits, fer, h_cond, period_s).map_err(to_py)
}

/// Randomness suite over 32-byte keys; returns the success-rate table.
#[pyfunction]
#[pyo3(signature = (keys, keys_per_stream = 16, alpha = 0.01))]
fn nist_suite<'py>(
    py: Python<'py>,
    keys: Vec<Vec<u8>>,
    keys_per_stream: usize,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let bits: Vec<Bits> = keys.iter().map(|k| Bits::from_bytes_msb(k, k.len() * 8)).collect();
    let cfg = SuiteConfig {
        significance_alpha: alpha,
        policy: if keys_per_stream <= 1 {
            ConcatPolicy::PerKey
        } else {
            ConcatPolicy::Concatenate { keys_per_stream }
        },
        ..SuiteConfig::default()
    };
    let report = py.detach(|| randomness::run_suite(&bits, &cfg)).map_err(to_py)?;
    json_to_py(py, &report.table_json())
}

/// Pipeline configuration; every field has a default.
#[pyclass(module = "skg", skip_from_py_object)]
#[derive(Clone)]
struct Config {
    inner: core_pipeline::PipelineConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(s) => core_pipeline::PipelineConfig::from_toml_str(s).map_err(to_py)?,
            None => core_pipeline::PipelineConfig::default(),
        };
        Ok(Config { inner })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(Config {
            inner: core_pipeline::PipelineConfig::from_path(&path).map_err(to_py)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn config_hash(&self) -> String {
        self.inner.config_hash()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    /// Runs every configured cell.
    fn run(&self, py: Python<'_>) -> PyResult<Report> {
        let cfg = self.inner.clone();
        let inner = py.detach(|| core_pipeline::run_pipeline(&cfg)).map_err(to_py)?;
        Ok(Report { inner })
    }
}

/// Result of a pipeline run.
#[pyclass(frozen, module = "skg")]
struct Report {
    inner: core_pipeline::PipelineReport,
}

#[pymethods]
impl Report {
    /// One dict per cell.
    fn cells<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.cells)
    }

    fn mismatch<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.mismatch)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| DataError::new_err(e.to_string()))
    }

    /// Every emitted key as 32 bytes, in cell order.
    fn keys<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyBytes>> {
        self.inner
            .all_keys()
            .map(|k| PyBytes::new(py, &k.to_bytes_msb()))
            .collect()
    }

    fn check_invariants(&self) -> PyResult<()> {
        self.inner.check_invariants().map_err(to_py)
    }

    /// Writes the report tables into `out` and returns the paths.
    #[pyo3(signature = (out, format = "csv"))]
    fn write(&self, out: PathBuf, format: &str) -> PyResult<Vec<PathBuf>> {
        let format: OutputFormat = format.parse().map_err(to_py)?;
        core_pipeline::write_artifacts(&self.inner, &out, format).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.cells.len()
    }
}

#[pymodule]
fn skg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add_class::<Config>()?;
    m.add_class::<Report>()?;
    m.add_class::<PolarCode>()?;
    m.add_function(wrap_pyfunction!(kalman_filter, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(mismatch_rate, m)?)?;
    m.add_function(wrap_pyfunction!(polar_transform, m)?)?;
    m.add_function(wrap_pyfunction!(min_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_min_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(required_input_bits, m)?)?;
    m.add_function(wrap_pyfunction!(amplify_bits, m)?)?;
    m.add_function(wrap_pyfunction!(key_rate, m)?)?;
    m.add_function(wrap_pyfunction!(nist_suite, m)?)?;
    Ok(())
}
