//! End-to-end runs: channel source, detrending, quantization,
//! reconciliation, leakage estimation, amplification and randomness tests,
//! swept over filter settings and code rates.

mod config;
mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplify::{extract_keys, KEY_BITS};
use crate::bits::Bits;
use crate::detrend::{kalman_filter_samples, normalize_unit_power, residual_samples};
use crate::error::{Result, SkgError};
use crate::ingest::{load_dataset, simulate_channel, split_updown, MeasurementSeries, NodeId, Scenario};
use crate::leakage::{conditional_min_entropy, leakage, min_entropy, Estimator};
use crate::quantize::{frame, mismatch_rate, quantize_row, BitFrame, SAMPLES_PER_FRAME};
use crate::randomness::run_suite;
use crate::reconcile::{
    construct_code, decode_syndromes, decode_with, encode_syndromes, make_syndrome, ScDecoder, Syndrome,
};

pub use config::{
    CodeSweep, DatasetSource, EstimatorConfig, FilterSetting, FilterSweep, PipelineConfig, SimulatorSource,
    SourceConfig, TraceConfig, DEFAULT_R_VALUES,
};
pub use report::{cells_csv, mismatch_csv, write_artifacts, OutputFormat};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "SKG_THREADS";

/// `F·(1 − fer)·h_cond / T` in bits per second.
pub fn key_rate(frame_bits: usize, fer: f64, h_cond: f64, period_t_s: f64) -> Result<f64> {
    if !(period_t_s > 0.0) {
        return Err(SkgError::config(format!(
            "sampling period must be positive, got {period_t_s}"
        )));
    }
    if !(0.0..=1.0).contains(&fer) || !(0.0..=1.0).contains(&h_cond) {
        return Err(SkgError::data(format!(
            "fer {fer} and h_cond {h_cond} must lie in [0, 1]"
        )));
    }
    Ok(frame_bits as f64 * (1.0 - fer) * h_cond / period_t_s)
}

/// Aligned measurement series for one scenario. Eve's list is empty when
/// she is not modelled; otherwise it pairs with Alice/Bob by position.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    pub scenario: Scenario,
    pub alice: Vec<MeasurementSeries>,
    pub bob: Vec<MeasurementSeries>,
    pub eve: Vec<MeasurementSeries>,
}

impl ChannelSet {
    pub fn without_eve(mut self) -> Self {
        self.eve.clear();
        self
    }
}

fn scenario_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Produces the channel sets described by the configured source.
pub fn load_channels(cfg: &PipelineConfig) -> Result<Vec<ChannelSet>> {
    match &cfg.source {
        SourceConfig::Simulator(sim) => sim
            .scenarios
            .iter()
            .enumerate()
            .map(|(i, &sc)| {
                let (a, b, e) = simulate_channel(&sim.channel(sc, scenario_seed(cfg.seed, i)))?;
                Ok(ChannelSet {
                    scenario: sc,
                    alice: vec![a],
                    bob: vec![b],
                    eve: if sim.include_eve { vec![e] } else { Vec::new() },
                })
            })
            .collect(),
        SourceConfig::Dataset(ds) => {
            let legit = load_dataset(&ds.legit_path, &ds.subsample)?;
            let scenario = ds.scenario.unwrap_or(legit[0].scenario);
            let mut set = ChannelSet {
                scenario,
                alice: Vec::new(),
                bob: Vec::new(),
                eve: Vec::new(),
            };
            for s in &legit {
                let (down, up) = split_updown(s)?;
                set.bob.push(down.with_node(NodeId::Bob));
                set.alice.push(up.with_node(NodeId::Alice));
            }
            if let Some(path) = &ds.eve_path {
                let eve = load_dataset(path, &ds.subsample)?;
                if eve.len() != legit.len() {
                    return Err(SkgError::data(format!(
                        "eve file has {} series, legitimate file has {}",
                        eve.len(),
                        legit.len()
                    )));
                }
                for s in &eve {
                    set.eve.push(split_updown(s)?.0.with_node(NodeId::Eve));
                }
            }
            Ok(vec![set])
        }
    }
}

/// Unit-power normalization followed by the filter, or normalization only.
pub fn residual_for(samples: &[f64], setting: FilterSetting, sweep: &FilterSweep) -> Result<Vec<f64>> {
    let (norm, _) = normalize_unit_power(samples);
    match setting {
        FilterSetting::Unfiltered => Ok(norm),
        FilterSetting::Kalman(r) => {
            let filtered = kalman_filter_samples(&norm, &sweep.filter_config(r))?;
            residual_samples(&norm, &filtered)
        }
    }
}

/// Quantized frames for one filter setting. Frames where Alice or Bob
/// is degenerate are dropped for everyone; Eve's degenerate frames are
/// `None` and only leave her statistics.
#[derive(Clone, Debug)]
pub struct QuantizedSet {
    pub alice: Vec<BitFrame>,
    pub bob: Vec<BitFrame>,
    pub eve: Vec<Option<BitFrame>>,
    pub skipped_legit: usize,
}

pub fn quantize_set(set: &ChannelSet, setting: FilterSetting, cfg: &PipelineConfig) -> Result<QuantizedSet> {
    let mut out = QuantizedSet {
        alice: Vec::new(),
        bob: Vec::new(),
        eve: Vec::new(),
        skipped_legit: 0,
    };
    let mut index = 0usize;
    for (i, (a, b)) in set.alice.iter().zip(&set.bob).enumerate() {
        let ra = residual_for(a.samples(), setting, &cfg.filter)?;
        let rb = residual_for(b.samples(), setting, &cfg.filter)?;
        let re = set
            .eve
            .get(i)
            .map(|e| residual_for(e.samples(), setting, &cfg.filter))
            .transpose()?;
        let fa = frame(&ra, SAMPLES_PER_FRAME)?;
        let fb = frame(&rb, SAMPLES_PER_FRAME)?;
        let fe = re.as_deref().map(|r| frame(r, SAMPLES_PER_FRAME)).transpose()?;
        for (row, (ya, yb)) in fa.rows.iter().zip(&fb.rows).enumerate() {
            let (Ok(qa), Ok(qb)) = (
                quantize_row(ya, &cfg.quantizer, index, NodeId::Alice),
                quantize_row(yb, &cfg.quantizer, index, NodeId::Bob),
            ) else {
                out.skipped_legit += 1;
                continue;
            };
            if !set.eve.is_empty() {
                let qe = fe
                    .as_ref()
                    .and_then(|f| f.rows.get(row))
                    .and_then(|ye| quantize_row(ye, &cfg.quantizer, index, NodeId::Eve).ok());
                out.eve.push(qe);
            }
            out.alice.push(qa);
            out.bob.push(qb);
            index += 1;
        }
    }
    if out.alice.is_empty() {
        return Err(SkgError::data("no usable frames after quantization"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scenario: Scenario,
    /// `none` or the R value.
    pub filter: String,
    pub r: Option<f64>,
    pub code_rate: f64,
    pub error: Option<String>,
    pub frames: usize,
    pub calibration_frames: usize,
    pub eval_frames: usize,
    pub skipped_frames: usize,
    pub mismatch_ab: f64,
    pub mismatch_eve: Option<f64>,
    pub design_crossover: f64,
    pub eve_crossover: Option<f64>,
    pub syndrome_bits: usize,
    pub syndrome_bytes: usize,
    pub fer: f64,
    pub eve_fer: Option<f64>,
    pub h_min: f64,
    pub h_min_cond: f64,
    pub leakage: f64,
    pub leakage_raw: f64,
    pub estimator: Estimator,
    pub block_size: usize,
    pub samples: usize,
    pub frame_bits: usize,
    pub sampling_period_t_s: f64,
    pub key_rate_bps: f64,
    pub reconciled_bits: usize,
    pub keys_emitted: usize,
    pub nist_success_rates: Option<BTreeMap<String, Option<f64>>>,
    pub keys: Vec<String>,
    #[serde(skip)]
    pub nist: Option<crate::randomness::SuiteReport>,
    #[serde(skip)]
    pub key_bits: Vec<Bits>,
}

impl CellReport {
    fn failed(
        scenario: Scenario,
        setting: FilterSetting,
        code_rate: f64,
        cfg: &PipelineConfig,
        err: &SkgError,
    ) -> Self {
        CellReport {
            scenario,
            filter: setting.to_string(),
            r: setting.r(),
            code_rate,
            error: Some(err.to_string()),
            frames: 0,
            calibration_frames: 0,
            eval_frames: 0,
            skipped_frames: 0,
            mismatch_ab: f64::NAN,
            mismatch_eve: None,
            design_crossover: f64::NAN,
            eve_crossover: None,
            syndrome_bits: 0,
            syndrome_bytes: 0,
            fer: f64::NAN,
            eve_fer: None,
            h_min: f64::NAN,
            h_min_cond: f64::NAN,
            leakage: f64::NAN,
            leakage_raw: f64::NAN,
            estimator: cfg.estimator.kind,
            block_size: cfg.estimator.block_size,
            samples: 0,
            frame_bits: cfg.code.block_length,
            sampling_period_t_s: cfg.sampling_period_t_s,
            key_rate_bps: f64::NAN,
            reconciled_bits: 0,
            keys_emitted: 0,
            nist_success_rates: None,
            keys: Vec::new(),
            nist: None,
            key_bits: Vec::new(),
        }
    }

    /// Recomputes the key rate from the stored operands.
    pub fn recomputed_key_rate(&self) -> Result<f64> {
        key_rate(self.frame_bits, self.fer, self.h_min_cond, self.sampling_period_t_s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// Mismatch after quantization for one (scenario, filter) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchRow {
    pub scenario: Scenario,
    pub filter: String,
    pub r: Option<f64>,
    pub frames: usize,
    pub mismatch_ab: f64,
    pub mismatch_eve: Option<f64>,
}

/// Residual variance per filter setting on the first series of the first
/// scenario, plus the leading samples for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetrendTrace {
    pub scenario: Scenario,
    pub r_values: Vec<f64>,
    pub residual_variance: Vec<f64>,
    pub normalized: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub provenance: Provenance,
    pub config: PipelineConfig,
    pub mismatch: Vec<MismatchRow>,
    pub cells: Vec<CellReport>,
    pub trace: Option<DetrendTrace>,
}

fn clamp_crossover(p: f64, code: &CodeSweep) -> f64 {
    p.clamp(code.min_crossover, code.max_crossover)
}

fn eve_mismatch(alice: &[BitFrame], eve: &[Option<BitFrame>]) -> Result<Option<f64>> {
    let (a, e): (Vec<BitFrame>, Vec<BitFrame>) = alice
        .iter()
        .zip(eve)
        .filter_map(|(a, e)| e.as_ref().map(|e| (a.clone(), e.clone())))
        .unzip();
    if a.is_empty() {
        return Ok(None);
    }
    mismatch_rate(&a, &e).map(Some)
}

fn run_cell(
    q: &QuantizedSet,
    scenario: Scenario,
    setting: FilterSetting,
    code_rate: f64,
    cfg: &PipelineConfig,
) -> Result<CellReport> {
    let n = cfg.code.block_length;
    let total = q.alice.len();
    let calib = ((total as f64 * cfg.code.calibration_fraction).ceil() as usize).max(1);
    if calib >= total {
        return Err(SkgError::data(format!("{total} frames leave none after calibration")));
    }
    let has_eve = !q.eve.is_empty();
    let mismatch_ab = mismatch_rate(&q.alice, &q.bob)?;
    let mismatch_eve = if has_eve { eve_mismatch(&q.alice, &q.eve)? } else { None };

    let design = clamp_crossover(mismatch_rate(&q.alice[..calib], &q.bob[..calib])?, &cfg.code);
    let eve_p = if has_eve {
        eve_mismatch(&q.alice[..calib], &q.eve[..calib])?.map(|p| clamp_crossover(p, &cfg.code))
    } else {
        None
    };
    let spec = construct_code(n, code_rate, design)?;

    let alice = &q.alice[calib..];
    let bob = &q.bob[calib..];
    let eve = if has_eve { &q.eve[calib..] } else { &[][..] };
    let syndromes: Vec<Syndrome> = alice.iter().map(|f| make_syndrome(f, &spec)).collect::<Result<_>>()?;
    let wire = encode_syndromes(&syndromes, &spec)?;

    // Bob sees only the published bytes.
    let published = decode_syndromes(&wire)?;
    let bob_spec = published[0].0.rebuild_spec()?;
    let bob_p = bob_spec.design_crossover() as f64;
    let mut decoder = ScDecoder::new(n)?;
    let mut reconciled = Vec::new();
    let mut errors = 0usize;
    for ((a, b), (_, s)) in alice.iter().zip(bob).zip(&published) {
        let out = decode_with(&mut decoder, b, s, &bob_spec, bob_p)?;
        if out.bits == a.bits {
            reconciled.push(a.clone());
        } else {
            errors += 1;
        }
    }
    let fer = errors as f64 / alice.len() as f64;

    let b = cfg.estimator.block_size;
    let marginal = min_entropy(alice, b)?;
    let mut eve_fer = None;
    let conditional = if let Some(p) = eve_p {
        let mut target = Vec::new();
        let mut r_e = Vec::new();
        let mut r_e_prime = Vec::new();
        let mut syn = Vec::new();
        let mut eve_errors = 0usize;
        for ((a, e), (_, s)) in alice.iter().zip(eve).zip(&published) {
            let Some(e) = e else { continue };
            let guess = decode_with(&mut decoder, e, s, &bob_spec, p)?;
            if guess.bits != a.bits {
                eve_errors += 1;
            }
            target.push(a.clone());
            r_e.push(e.clone());
            r_e_prime.push(guess);
            syn.push(s.clone());
        }
        if !target.is_empty() {
            eve_fer = Some(eve_errors as f64 / target.len() as f64);
        }
        conditional_min_entropy(&target, &r_e, &syn, &r_e_prime, b, cfg.estimator.kind)?
    } else {
        let syn: Vec<Syndrome> = published.iter().map(|(_, s)| s.clone()).collect();
        conditional_min_entropy(alice, &[], &syn, &[], b, cfg.estimator.kind)?
    };
    let leak = leakage(&marginal, &conditional)?;
    let h_cond = conditional.bits_per_symbol;
    let rate = key_rate(n, fer, h_cond, cfg.sampling_period_t_s)?;

    let (keys, nist) = if h_cond > 0.0 && !reconciled.is_empty() {
        let (keys, _) = extract_keys(&reconciled, h_cond, Bits::zeros(0))?;
        let bits: Vec<Bits> = keys.iter().map(|k| k.key_bits()).collect();
        let nist = if bits.is_empty() {
            None
        } else {
            Some(run_suite(&bits, &cfg.nist)?)
        };
        (keys, nist)
    } else {
        (Vec::new(), None)
    };

    Ok(CellReport {
        scenario,
        filter: setting.to_string(),
        r: setting.r(),
        code_rate,
        error: None,
        frames: total,
        calibration_frames: calib,
        eval_frames: alice.len(),
        skipped_frames: q.skipped_legit,
        mismatch_ab,
        mismatch_eve,
        design_crossover: bob_p,
        eve_crossover: eve_p,
        syndrome_bits: spec.syndrome_len(),
        syndrome_bytes: wire.len(),
        fer,
        eve_fer,
        h_min: marginal.bits_per_symbol,
        h_min_cond: h_cond,
        leakage: leak.leakage_bits,
        leakage_raw: leak.raw_leakage_bits,
        estimator: conditional.estimator,
        block_size: b,
        samples: conditional.sample_count,
        frame_bits: n,
        sampling_period_t_s: cfg.sampling_period_t_s,
        key_rate_bps: rate,
        reconciled_bits: reconciled.len() * n,
        keys_emitted: keys.len(),
        nist_success_rates: nist.as_ref().map(|r| {
            r.rows
                .iter()
                .map(|row| (row.test.as_str().to_string(), row.success_rate))
                .collect()
        }),
        keys: if cfg.export_keys {
            keys.iter().map(|k| k.hex()).collect()
        } else {
            Vec::new()
        },
        nist,
        key_bits: keys.iter().map(|k| k.key_bits()).collect(),
    })
}

fn detrend_trace(set: &ChannelSet, cfg: &PipelineConfig) -> Result<Option<DetrendTrace>> {
    if cfg.trace.r_values.is_empty() {
        return Ok(None);
    }
    let Some(series) = set.alice.first() else {
        return Ok(None);
    };
    let (norm, _) = normalize_unit_power(series.samples());
    let keep = cfg.trace.samples.min(norm.len());
    let mut trace = DetrendTrace {
        scenario: set.scenario,
        r_values: cfg.trace.r_values.clone(),
        residual_variance: Vec::new(),
        normalized: norm[..keep].to_vec(),
        states: Vec::new(),
        residuals: Vec::new(),
    };
    for &r in &cfg.trace.r_values {
        let filtered = kalman_filter_samples(&norm, &cfg.filter.filter_config(r))?;
        let res = residual_samples(&norm, &filtered)?;
        trace.residual_variance.push(crate::detrend::variance(&res));
        trace.states.push(filtered.states[..keep].to_vec());
        trace.residuals.push(res[..keep].to_vec());
    }
    Ok(Some(trace))
}

/// Worker pool sized by [`THREADS_ENV`] when set, else by rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| SkgError::config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(SkgError::config(format!("{THREADS_ENV} must be at least 1")));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| SkgError::config(e.to_string()))
}

/// Runs every configured cell on channels loaded from the configured source.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let sets = load_channels(cfg)?;
    run_pipeline_on(cfg, &sets)
}

/// Runs every cell on the given channels. Cells are independent; a failing
/// cell records its error and the others proceed.
pub fn run_pipeline_on(cfg: &PipelineConfig, sets: &[ChannelSet]) -> Result<PipelineReport> {
    cfg.validate()?;
    let pool = thread_pool()?;
    let settings = cfg.filter.settings();
    let groups: Vec<(usize, FilterSetting)> = (0..sets.len())
        .flat_map(|s| settings.iter().map(move |&f| (s, f)))
        .collect();

    let (mut mismatch, mut cells) = pool.install(|| {
        let per_group: Vec<(Option<MismatchRow>, Vec<CellReport>)> = groups
            .par_iter()
            .map(|&(si, setting)| {
                let set = &sets[si];
                let q = match quantize_set(set, setting, cfg) {
                    Ok(q) => q,
                    Err(e) => {
                        let cells = cfg
                            .code
                            .rates
                            .iter()
                            .map(|&r| CellReport::failed(set.scenario, setting, r, cfg, &e))
                            .collect();
                        return (None, cells);
                    }
                };
                let row = mismatch_rate(&q.alice, &q.bob).ok().map(|ab| MismatchRow {
                    scenario: set.scenario,
                    filter: setting.to_string(),
                    r: setting.r(),
                    frames: q.alice.len(),
                    mismatch_ab: ab,
                    mismatch_eve: eve_mismatch(&q.alice, &q.eve).ok().flatten(),
                });
                let cells = cfg
                    .code
                    .rates
                    .par_iter()
                    .map(|&rate| {
                        run_cell(&q, set.scenario, setting, rate, cfg)
                            .unwrap_or_else(|e| CellReport::failed(set.scenario, setting, rate, cfg, &e))
                    })
                    .collect::<Vec<_>>();
                (row, cells)
            })
            .collect();
        let mut mismatch = Vec::new();
        let mut cells = Vec::new();
        for (row, c) in per_group {
            mismatch.extend(row);
            cells.extend(c);
        }
        (mismatch, cells)
    });

    let setting_key = |filter: &Option<f64>| match filter {
        None => FilterSetting::Unfiltered.order_key(),
        Some(r) => FilterSetting::Kalman(*r).order_key(),
    };
    mismatch.sort_by(|a, b| {
        (a.scenario, setting_key(&a.r))
            .partial_cmp(&(b.scenario, setting_key(&b.r)))
            .unwrap()
    });
    cells.sort_by(|a, b| {
        (a.scenario, setting_key(&a.r), a.code_rate)
            .partial_cmp(&(b.scenario, setting_key(&b.r), b.code_rate))
            .unwrap()
    });

    let trace = match sets.first() {
        Some(set) => detrend_trace(set, cfg)?,
        None => None,
    };
    Ok(PipelineReport {
        provenance: Provenance {
            config_hash: cfg.config_hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        config: cfg.clone(),
        mismatch,
        cells,
        trace,
    })
}

impl PipelineReport {
    /// Every key emitted across cells, in cell order.
    pub fn all_keys(&self) -> impl Iterator<Item = &Bits> {
        self.cells.iter().flat_map(|c| c.key_bits.iter())
    }

    /// Checks the key-rate closure and the global entropy budget on every
    /// successful cell.
    pub fn check_invariants(&self) -> Result<()> {
        for c in self.cells.iter().filter(|c| c.error.is_none()) {
            if c.recomputed_key_rate()?.to_bits() != c.key_rate_bps.to_bits() {
                return Err(SkgError::data(format!(
                    "key rate closure fails in cell {} {}",
                    c.filter, c.code_rate
                )));
            }
            let budget = c.reconciled_bits as f64 * c.h_min_cond + c.keys_emitted as f64;
            if (c.keys_emitted * KEY_BITS) as f64 > budget {
                return Err(SkgError::data(format!(
                    "entropy budget exceeded in cell {} {}",
                    c.filter, c.code_rate
                )));
            }
        }
        Ok(())
    }
}
