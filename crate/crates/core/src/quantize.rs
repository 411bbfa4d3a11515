//! Framing residuals into fixed-size rows and per-row uniform quantization.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Result, SkgError};
use crate::ingest::NodeId;

pub const SAMPLES_PER_FRAME: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    NaturalBinary,
    Gray,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    pub levels: u32,
    pub bits_per_sample: u32,
    pub labeling: Labeling,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig {
            levels: 4,
            bits_per_sample: 2,
            labeling: Labeling::Gray,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 || self.bits_per_sample == 0 || self.bits_per_sample > 16 {
            return Err(SkgError::config("quantizer needs at least 2 levels"));
        }
        if 1u32 << self.bits_per_sample != self.levels {
            return Err(SkgError::config(format!(
                "levels ({}) must equal 2^bits_per_sample ({})",
                self.levels, self.bits_per_sample
            )));
        }
        Ok(())
    }

    pub fn frame_bits(&self, samples_per_frame: usize) -> usize {
        samples_per_frame * self.bits_per_sample as usize
    }

    fn label(&self, index: u32) -> u32 {
        match self.labeling {
            Labeling::NaturalBinary => index,
            Labeling::Gray => index ^ (index >> 1),
        }
    }
}

/// A quantized row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitFrame {
    pub bits: Bits,
    pub frame_index: usize,
    pub origin: NodeId,
}

impl BitFrame {
    pub fn new(bits: Bits, frame_index: usize, origin: NodeId) -> Self {
        BitFrame {
            bits,
            frame_index,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Consecutive non-overlapping rows of a residual series.
#[derive(Clone, Debug, PartialEq)]
pub struct Framed<'a> {
    pub rows: Vec<&'a [f64]>,
    pub discarded: usize,
}

/// Cuts `residuals` into rows of `samples_per_frame`; the trailing partial
/// row is dropped and counted.
pub fn frame(residuals: &[f64], samples_per_frame: usize) -> Result<Framed<'_>> {
    if samples_per_frame == 0 {
        return Err(SkgError::config("samples_per_frame must be positive"));
    }
    if residuals.len() < samples_per_frame {
        return Err(SkgError::data(format!(
            "residual of {} samples is shorter than one {samples_per_frame}-sample row",
            residuals.len()
        )));
    }
    let chunks = residuals.chunks_exact(samples_per_frame);
    let discarded = chunks.remainder().len();
    Ok(Framed {
        rows: chunks.collect(),
        discarded,
    })
}

/// Bin index of every sample: `floor(levels·(s − min)/(max − min))`,
/// with the top edge clamped into the last bin.
pub fn bin_indices(row: &[f64], levels: u32) -> Result<Vec<u32>> {
    if let Some(pos) = row.iter().position(|s| !s.is_finite()) {
        return Err(SkgError::data(format!("non-finite sample at offset {pos}")));
    }
    let (min, max) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
        (lo.min(s), hi.max(s))
    });
    if !(max > min) {
        return Err(SkgError::data("degenerate row: max equals min"));
    }
    let span = max - min;
    let top = levels - 1;
    Ok(row
        .iter()
        .map(|&s| {
            // (s − min)·L is formed before dividing so that an affine map
            // with exact arithmetic yields identical bins.
            let idx = ((s - min) * levels as f64 / span).floor();
            (idx as u32).min(top)
        })
        .collect())
}

pub fn quantize_row(row: &[f64], cfg: &QuantizerConfig, frame_index: usize, origin: NodeId) -> Result<BitFrame> {
    cfg.validate()?;
    let width = cfg.bits_per_sample;
    let mut bits = Bits::zeros(row.len() * width as usize);
    for (i, idx) in bin_indices(row, cfg.levels)?.into_iter().enumerate() {
        let label = cfg.label(idx);
        for b in 0..width {
            if (label >> (width - 1 - b)) & 1 == 1 {
                bits.set(i * width as usize + b as usize, true);
            }
        }
    }
    Ok(BitFrame::new(bits, frame_index, origin))
}

/// Total Hamming distance over total bits.
pub fn mismatch_rate(a: &[BitFrame], b: &[BitFrame]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SkgError::data(format!(
            "frame count mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut diff = 0usize;
    let mut total = 0usize;
    for (x, y) in a.iter().zip(b) {
        if x.len() != y.len() {
            return Err(SkgError::data(format!(
                "frame length mismatch at frame {}: {} vs {}",
                x.frame_index,
                x.len(),
                y.len()
            )));
        }
        diff += x.bits.hamming(&y.bits);
        total += x.len();
    }
    if total == 0 {
        return Err(SkgError::data("no bits to compare"));
    }
    Ok(diff as f64 / total as f64)
}
