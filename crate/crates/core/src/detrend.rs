//! Scalar Kalman detrending.
//!
//! The filter tracks the slowly varying (predictable) part of a measurement
//! series; subtracting its output leaves the residual used for key
//! generation. Per sample:
//!
//! ```text
//! P_pred = P[m-1] + Q
//! K[m]   = P_pred / (P_pred + R)
//! G[m]   = G[m-1] + K[m]·(Y[m] - G[m-1])
//! P[m]   = (1 - K[m])·P_pred
//! ```
//!
//! `R` controls how much the raw samples are trusted: a large `R` gives a
//! sluggish state (residual keeps the trend), a small `R` tracks closely
//! (residual shrinks toward the measurement noise).

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkgError};
use crate::ingest::MeasurementSeries;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    FirstSample,
    Zero,
    Explicit(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub measurement_variance_r: f64,
    pub process_noise_q: f64,
    pub initial_state: InitialState,
    pub initial_covariance_p0: f64,
}

impl FilterConfig {
    pub const DEFAULT_Q: f64 = 1e-6;
    pub const DEFAULT_P0: f64 = 1.0;

    /// Default filter (Q = 1e-6, P0 = 1, G0 = first sample) with the given R.
    pub fn with_r(r: f64) -> Self {
        FilterConfig {
            measurement_variance_r: r,
            process_noise_q: Self::DEFAULT_Q,
            initial_state: InitialState::FirstSample,
            initial_covariance_p0: Self::DEFAULT_P0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.measurement_variance_r > 0.0 && self.measurement_variance_r.is_finite()) {
            return Err(SkgError::config(format!(
                "measurement variance R must be positive, got {}",
                self.measurement_variance_r
            )));
        }
        if !(self.initial_covariance_p0 > 0.0 && self.initial_covariance_p0.is_finite()) {
            return Err(SkgError::config("initial covariance P0 must be positive"));
        }
        if !(self.process_noise_q >= 0.0 && self.process_noise_q.is_finite()) {
            return Err(SkgError::config("process noise Q must be non-negative"));
        }
        if let InitialState::Explicit(g) = self.initial_state {
            if !g.is_finite() {
                return Err(SkgError::config("explicit initial state must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilteredSeries {
    pub states: Vec<f64>,
    pub gains: Vec<f64>,
    pub covariances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSeries {
    pub residuals: Vec<f64>,
    pub source_config: Option<FilterConfig>,
}

/// Runs the filter over raw samples. Shared by [`kalman_filter`] and callers
/// that hold plain slices (normalized copies, fixtures).
pub fn kalman_filter_samples(samples: &[f64], cfg: &FilterConfig) -> Result<FilteredSeries> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(SkgError::data("cannot filter an empty series"));
    }
    if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
        return Err(SkgError::data(format!("non-finite sample at offset {pos}")));
    }
    let r = cfg.measurement_variance_r;
    let q = cfg.process_noise_q;
    let mut g = match cfg.initial_state {
        InitialState::FirstSample => samples[0],
        InitialState::Zero => 0.0,
        InitialState::Explicit(v) => v,
    };
    let mut p = cfg.initial_covariance_p0;

    let n = samples.len();
    let mut out = FilteredSeries {
        states: Vec::with_capacity(n),
        gains: Vec::with_capacity(n),
        covariances: Vec::with_capacity(n),
    };
    for &y in samples {
        let p_pred = p + q;
        let k = p_pred / (p_pred + r);
        g += k * (y - g);
        p = (1.0 - k) * p_pred;
        out.states.push(g);
        out.gains.push(k);
        out.covariances.push(p);
    }
    Ok(out)
}

pub fn kalman_filter(series: &MeasurementSeries, cfg: &FilterConfig) -> Result<FilteredSeries> {
    kalman_filter_samples(series.samples(), cfg)
}

pub fn residual_samples(raw: &[f64], filtered: &FilteredSeries) -> Result<Vec<f64>> {
    if raw.len() != filtered.states.len() {
        return Err(SkgError::data(format!(
            "residual length mismatch: {} raw samples vs {} states",
            raw.len(),
            filtered.states.len()
        )));
    }
    Ok(raw.iter().zip(&filtered.states).map(|(y, g)| y - g).collect())
}

/// `raw − state`, elementwise.
pub fn residual(series: &MeasurementSeries, filtered: &FilteredSeries) -> Result<ResidualSeries> {
    Ok(ResidualSeries {
        residuals: residual_samples(series.samples(), filtered)?,
        source_config: None,
    })
}

/// Scales a series to unit mean power. Returns the scaled samples and the
/// factor `sqrt(mean(y²))` that was divided out.
pub fn normalize_unit_power(samples: &[f64]) -> (Vec<f64>, f64) {
    let power = samples.iter().map(|y| y * y).sum::<f64>() / samples.len().max(1) as f64;
    let scale = power.sqrt();
    if scale == 0.0 {
        return (samples.to_vec(), 1.0);
    }
    (samples.iter().map(|y| y / scale).collect(), scale)
}

/// Filter with `cfg` after unit-power normalization; the residual is
/// returned in normalized units together with the normalization factor.
pub fn detrend_normalized(series: &MeasurementSeries, cfg: &FilterConfig) -> Result<(ResidualSeries, f64)> {
    let (norm, scale) = normalize_unit_power(series.samples());
    let filtered = kalman_filter_samples(&norm, cfg)?;
    Ok((
        ResidualSeries {
            residuals: residual_samples(&norm, &filtered)?,
            source_config: Some(*cfg),
        },
        scale,
    ))
}

pub fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

pub fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}
