//! `SKGS` syndrome records.
//!
//! Each record is a 16-byte header followed by the syndrome bits packed
//! most-significant-bit first:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `SKGS`                            |
//! | 4      | 4    | block length `n`, `u32` LE              |
//! | 8      | 2    | rate numerator `n − |syndrome|`, `u16` LE |
//! | 10     | 2    | rate denominator `n`, `u16` LE          |
//! | 12     | 4    | design crossover, `f32` LE              |

use crate::bits::Bits;
use crate::error::{Result, SkgError};

use super::{construct_code, PolarCodeSpec, Syndrome};

pub const SYNDROME_MAGIC: &[u8; 4] = b"SKGS";
pub const SYNDROME_HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyndromeHeader {
    pub block_length: u32,
    pub rate_numerator: u16,
    pub rate_denominator: u16,
    pub design_crossover: f32,
}

impl SyndromeHeader {
    pub fn for_spec(spec: &PolarCodeSpec) -> Self {
        let n = spec.block_length();
        SyndromeHeader {
            block_length: n as u32,
            rate_numerator: (n - spec.syndrome_len()) as u16,
            rate_denominator: n as u16,
            design_crossover: spec.design_crossover(),
        }
    }

    pub fn syndrome_len(&self) -> usize {
        (self.rate_denominator - self.rate_numerator) as usize
    }

    /// Rebuilds the code the sender used.
    pub fn rebuild_spec(&self) -> Result<PolarCodeSpec> {
        let rate = self.rate_numerator as f64 / self.rate_denominator as f64;
        let spec = construct_code(self.block_length as usize, rate, self.design_crossover as f64)?;
        if spec.syndrome_len() != self.syndrome_len() {
            return Err(SkgError::format("syndrome header rate does not round-trip"));
        }
        Ok(spec)
    }
}

pub fn encode_syndrome(syndrome: &Syndrome, spec: &PolarCodeSpec, out: &mut Vec<u8>) -> Result<()> {
    if syndrome.spec_id != spec.id() {
        return Err(SkgError::data("syndrome was produced by a different code"));
    }
    let h = SyndromeHeader::for_spec(spec);
    out.extend_from_slice(SYNDROME_MAGIC);
    out.extend_from_slice(&h.block_length.to_le_bytes());
    out.extend_from_slice(&h.rate_numerator.to_le_bytes());
    out.extend_from_slice(&h.rate_denominator.to_le_bytes());
    out.extend_from_slice(&h.design_crossover.to_le_bytes());
    out.extend_from_slice(&syndrome.bits.to_bytes_msb());
    Ok(())
}

fn parse_header(bytes: &[u8]) -> Result<SyndromeHeader> {
    if bytes.len() < SYNDROME_HEADER_LEN || &bytes[..4] != SYNDROME_MAGIC {
        return Err(SkgError::format("missing SKGS syndrome header"));
    }
    let h = SyndromeHeader {
        block_length: u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
        rate_numerator: u16::from_le_bytes(bytes[8..10].try_into().unwrap()),
        rate_denominator: u16::from_le_bytes(bytes[10..12].try_into().unwrap()),
        design_crossover: f32::from_le_bytes(bytes[12..16].try_into().unwrap()),
    };
    if h.rate_denominator as u32 != h.block_length || h.rate_numerator >= h.rate_denominator {
        return Err(SkgError::format(format!("inconsistent syndrome header {h:?}")));
    }
    Ok(h)
}

/// Decodes one record from the front of `bytes`, returning the header, the
/// syndrome and the number of bytes consumed.
pub fn decode_syndrome(bytes: &[u8]) -> Result<(SyndromeHeader, Syndrome, usize)> {
    let h = parse_header(bytes)?;
    let len = h.syndrome_len();
    let body_len = len.div_ceil(8);
    let body = bytes
        .get(SYNDROME_HEADER_LEN..SYNDROME_HEADER_LEN + body_len)
        .ok_or_else(|| SkgError::format("truncated syndrome body"))?;
    let syndrome = Syndrome {
        bits: Bits::from_bytes_msb(body, len),
        spec_id: super::SpecId {
            block_length: h.block_length,
            syndrome_len: len as u32,
            crossover_bits: h.design_crossover.to_bits(),
        },
    };
    Ok((h, syndrome, SYNDROME_HEADER_LEN + body_len))
}

/// Serializes a sequence of syndromes into one byte stream.
pub fn encode_syndromes(syndromes: &[Syndrome], spec: &PolarCodeSpec) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for s in syndromes {
        encode_syndrome(s, spec, &mut out)?;
    }
    Ok(out)
}

pub fn decode_syndromes(mut bytes: &[u8]) -> Result<Vec<(SyndromeHeader, Syndrome)>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (h, s, used) = decode_syndrome(bytes)?;
        out.push((h, s));
        bytes = &bytes[used..];
    }
    Ok(out)
}
