//! `SKG1` measurement container.
//!
//! Layout: the magic `SKG1`, a little-endian `u32` header length, a UTF-8
//! JSON header, then `time × antennas × subcarriers` little-endian IEEE-754
//! `f32` samples in (time, antenna, subcarrier) row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MeasurementSeries, NodeId, Scenario, SubsampleSpec};
use crate::error::{Result, SkgError};

pub const CONTAINER_MAGIC: &[u8; 4] = b"SKG1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub time: usize,
    pub antennas: usize,
    pub subcarriers: usize,
    pub sample_period_s: f64,
    pub node: NodeId,
    pub scenario: Scenario,
    pub endianness: String,
}

impl ContainerHeader {
    fn sample_count(&self) -> Option<usize> {
        self.time.checked_mul(self.antennas)?.checked_mul(self.subcarriers)
    }
}

pub fn write_container(path: &Path, header: &ContainerHeader, data: &[f32]) -> Result<()> {
    if header.sample_count() != Some(data.len()) {
        return Err(SkgError::data(format!(
            "header declares {}x{}x{} samples but {} were given",
            header.time,
            header.antennas,
            header.subcarriers,
            data.len()
        )));
    }
    let json = serde_json::to_vec(header).map_err(|e| SkgError::format(e.to_string()))?;
    let mut out = Vec::with_capacity(8 + json.len() + data.len() * 4);
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Parses a container from bytes, returning the header and the flat sample
/// array.
pub fn read_container(bytes: &[u8]) -> Result<(ContainerHeader, Vec<f32>)> {
    if bytes.len() < 8 || &bytes[..4] != CONTAINER_MAGIC {
        return Err(SkgError::format("missing SKG1 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = bytes
        .get(8..8 + hlen)
        .ok_or_else(|| SkgError::format("truncated header"))?;
    let header: ContainerHeader =
        serde_json::from_slice(body).map_err(|e| SkgError::format(format!("malformed header: {e}")))?;
    if header.endianness != "little" {
        return Err(SkgError::format(format!(
            "unsupported endianness tag {:?}",
            header.endianness
        )));
    }
    if !(header.sample_period_s > 0.0) {
        return Err(SkgError::format("header sample period must be positive"));
    }
    let count = header
        .sample_count()
        .ok_or_else(|| SkgError::format("header dimensions overflow"))?;
    let payload = &bytes[8 + hlen..];
    if payload.len() != count * 4 {
        return Err(SkgError::format(format!(
            "payload holds {} bytes, header implies {}",
            payload.len(),
            count * 4
        )));
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(SkgError::data(format!("non-finite sample at offset {i}")));
        }
        data.push(v);
    }
    Ok((header, data))
}

/// Loads a container and returns one series per retained
/// (antenna, subcarrier) pair, antenna-major.
pub fn load_dataset(path: &Path, spec: &SubsampleSpec) -> Result<Vec<MeasurementSeries>> {
    spec.validate()?;
    let bytes = fs::read(path)?;
    let (h, data) = read_container(&bytes)?;
    for (name, stride, dim) in [
        ("antenna", spec.antenna_stride, h.antennas),
        ("subcarrier", spec.subcarrier_stride, h.subcarriers),
        ("time", spec.time_stride, h.time),
    ] {
        if stride > dim {
            return Err(SkgError::config(format!(
                "{name} stride {stride} exceeds stored dimension {dim}"
            )));
        }
    }
    let period = h.sample_period_s * spec.time_stride as f64;
    let mut out = Vec::new();
    for a in (0..h.antennas).step_by(spec.antenna_stride) {
        for s in (0..h.subcarriers).step_by(spec.subcarrier_stride) {
            let samples: Vec<f64> = (0..h.time)
                .step_by(spec.time_stride)
                .map(|t| data[(t * h.antennas + a) * h.subcarriers + s] as f64)
                .collect();
            out.push(MeasurementSeries::new(h.node, a, s, samples, period, h.scenario)?);
        }
    }
    Ok(out)
}
