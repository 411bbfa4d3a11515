//! Channel measurements: loading, synthesis, subsampling and the
//! uplink/downlink split.

mod container;
mod sim;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkgError};

pub use container::{load_dataset, read_container, write_container, ContainerHeader, CONTAINER_MAGIC};
pub use sim::{scattered_components, simulate_channel, ChannelSimConfig, FadingSpec, TrendSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeId {
    Alice,
    Bob,
    Eve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Los,
    Nlos,
    Unlabeled,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Los => "los",
            Scenario::Nlos => "nlos",
            Scenario::Unlabeled => "unlabeled",
        }
    }
}

/// Real channel-gain magnitudes for one (node, antenna, subcarrier).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSeries {
    pub node: NodeId,
    pub antenna_index: usize,
    pub subcarrier_index: usize,
    samples: Vec<f64>,
    pub sample_period_s: f64,
    pub scenario: Scenario,
}

impl MeasurementSeries {
    /// Validates and builds a series: at least two finite samples and a
    /// positive sample period.
    pub fn new(
        node: NodeId,
        antenna_index: usize,
        subcarrier_index: usize,
        samples: Vec<f64>,
        sample_period_s: f64,
        scenario: Scenario,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(SkgError::data(format!(
                "series needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SkgError::data(format!("non-finite sample at offset {pos}")));
        }
        if !(sample_period_s > 0.0 && sample_period_s.is_finite()) {
            return Err(SkgError::config(format!(
                "sample period must be positive, got {sample_period_s}"
            )));
        }
        Ok(MeasurementSeries {
            node,
            antenna_index,
            subcarrier_index,
            samples,
            sample_period_s,
            scenario,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same metadata, new samples. Used by transforms that keep length ≥ 1
    /// but may drop below the two-sample minimum (e.g. splitting a pair).
    pub(crate) fn with_samples(&self, samples: Vec<f64>, sample_period_s: f64) -> Self {
        MeasurementSeries {
            samples,
            sample_period_s,
            ..self.clone()
        }
    }

    pub fn with_node(mut self, node: NodeId) -> Self {
        self.node = node;
        self
    }
}

/// Strides applied along the antenna, subcarrier and time axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    pub antenna_stride: usize,
    pub subcarrier_stride: usize,
    pub time_stride: usize,
}

impl Default for SubsampleSpec {
    fn default() -> Self {
        SubsampleSpec {
            antenna_stride: 4,
            subcarrier_stride: 10,
            time_stride: 5,
        }
    }
}

impl SubsampleSpec {
    pub const IDENTITY: SubsampleSpec = SubsampleSpec {
        antenna_stride: 1,
        subcarrier_stride: 1,
        time_stride: 1,
    };

    pub fn validate(&self) -> Result<()> {
        if self.antenna_stride == 0 || self.subcarrier_stride == 0 || self.time_stride == 0 {
            return Err(SkgError::config("subsample strides must be at least 1"));
        }
        Ok(())
    }
}

/// Keeps samples `0, stride, 2·stride, …` of a series.
pub fn subsample_time(series: &MeasurementSeries, time_stride: usize) -> Result<MeasurementSeries> {
    if time_stride == 0 {
        return Err(SkgError::config("time stride must be at least 1"));
    }
    let samples: Vec<f64> = series.samples.iter().step_by(time_stride).copied().collect();
    Ok(series.with_samples(samples, series.sample_period_s * time_stride as f64))
}

/// Splits a series into (downlink, uplink): odd positions counted from 1
/// are downlink, even positions are uplink. Each output has twice the input
/// sample period.
pub fn split_updown(series: &MeasurementSeries) -> Result<(MeasurementSeries, MeasurementSeries)> {
    if series.len() < 2 {
        return Err(SkgError::data(format!(
            "split needs at least 2 samples, got {}",
            series.len()
        )));
    }
    let period = series.sample_period_s * 2.0;
    let down = series.samples.iter().step_by(2).copied().collect();
    let up = series.samples.iter().skip(1).step_by(2).copied().collect();
    Ok((series.with_samples(down, period), series.with_samples(up, period)))
}

/// Pearson correlation of two equal-length sequences.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}
