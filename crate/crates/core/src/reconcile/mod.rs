//! Syndrome-based (Slepian–Wolf) reconciliation with polar codes.
//!
//! Alice publishes the bits of `u = x·F^{⊗k}` at the least reliable
//! positions; a peer holding a noisy copy of `x` runs SC decoding with
//! those positions pinned and recovers `x`.

mod code;
mod decoder;
mod transform;
mod wire;

use crate::bits::Bits;
use crate::error::{Result, SkgError};
use crate::quantize::BitFrame;

pub use code::{bhattacharyya_profile, construct_code, reliability_order, PolarCodeSpec, SpecId};
pub use decoder::ScDecoder;
pub use transform::{polar_transform, polar_transform_in_place};
pub use wire::{
    decode_syndrome, decode_syndromes, encode_syndrome, encode_syndromes, SyndromeHeader, SYNDROME_HEADER_LEN,
    SYNDROME_MAGIC,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Syndrome {
    pub bits: Bits,
    pub spec_id: SpecId,
}

pub(crate) fn make_syndrome_bits(x: &Bits, spec: &PolarCodeSpec) -> Result<Syndrome> {
    if x.len() != spec.block_length() {
        return Err(SkgError::data(format!(
            "frame has {} bits, code block length is {}",
            x.len(),
            spec.block_length()
        )));
    }
    let u = polar_transform(x)?;
    Ok(Syndrome {
        bits: spec.syndrome_positions().iter().map(|&p| u.get(p)).collect(),
        spec_id: spec.id(),
    })
}

/// The transform of Alice's frame restricted to the syndrome positions, in
/// ascending position order.
pub fn make_syndrome(alice: &BitFrame, spec: &PolarCodeSpec) -> Result<Syndrome> {
    make_syndrome_bits(&alice.bits, spec)
}

fn check_syndrome(syndrome: &Syndrome, spec: &PolarCodeSpec) -> Result<()> {
    if syndrome.spec_id != spec.id() || syndrome.bits.len() != spec.syndrome_len() {
        return Err(SkgError::data("syndrome does not belong to this code"));
    }
    Ok(())
}

/// Decodes with a caller-owned decoder, avoiding per-frame allocation.
pub fn decode_with(
    decoder: &mut ScDecoder,
    side_info: &BitFrame,
    syndrome: &Syndrome,
    spec: &PolarCodeSpec,
    crossover_p: f64,
) -> Result<BitFrame> {
    check_syndrome(syndrome, spec)?;
    if decoder.block_length() != spec.block_length() {
        return Err(SkgError::data("decoder block length does not match the code"));
    }
    let pins = spec
        .syndrome_positions()
        .iter()
        .zip(syndrome.bits.iter())
        .map(|(&p, b)| (p, b));
    let bits = decoder.decode(&side_info.bits, pins, crossover_p)?;
    Ok(BitFrame::new(bits, side_info.frame_index, side_info.origin))
}

/// Recovers the syndrome sender's frame from `side_info`. The output always
/// reproduces `syndrome` under [`make_syndrome`].
pub fn decode(side_info: &BitFrame, syndrome: &Syndrome, spec: &PolarCodeSpec, crossover_p: f64) -> Result<BitFrame> {
    if !(crossover_p > 0.0 && crossover_p < 0.5) {
        return Err(SkgError::config(format!(
            "crossover must lie in (0, 0.5), got {crossover_p}"
        )));
    }
    let mut dec = ScDecoder::new(spec.block_length())?;
    decode_with(&mut dec, side_info, syndrome, spec, crossover_p)
}

/// Fraction of frames that differ from the reference in any bit.
pub fn frame_error_rate(decoded: &[BitFrame], reference: &[BitFrame]) -> Result<f64> {
    if decoded.len() != reference.len() {
        return Err(SkgError::data(format!(
            "frame count mismatch: {} decoded vs {} reference",
            decoded.len(),
            reference.len()
        )));
    }
    if decoded.is_empty() {
        return Err(SkgError::data("no frames to compare"));
    }
    let errors = decoded.iter().zip(reference).filter(|(d, r)| d.bits != r.bits).count();
    Ok(errors as f64 / decoded.len() as f64)
}
