//! Privacy amplification: hash `⌈256/H⌉` reconciled bits down to a 256-bit key.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::Bits;
use crate::error::{Result, SkgError};
use crate::quantize::BitFrame;

pub const KEY_BITS: usize = 256;
pub const KEY_FILE_MAGIC: &[u8; 4] = b"SKGK";

/// Guards the ceiling against `256/h` landing a hair above an integer
/// through rounding in `h`.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    #[serde(with = "hex_bytes")]
    pub key: [u8; 32],
    pub input_bit_count: usize,
    pub h_cond_used: OrderedF64,
    pub frame_ids: Vec<usize>,
}

/// An `f64` that compares bitwise, so key material can derive `Eq`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedF64(pub f64);

impl PartialEq for OrderedF64 {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for OrderedF64 {}

mod hex_bytes {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(key: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(key))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(D::Error::custom)?;
        v.try_into().map_err(|_| D::Error::custom("key must be 32 bytes"))
    }
}

impl KeyMaterial {
    pub fn key_bits(&self) -> Bits {
        Bits::from_bytes_msb(&self.key, KEY_BITS)
    }

    pub fn hex(&self) -> String {
        hex::encode(self.key)
    }
}

pub fn required_input_bits(h_cond: f64) -> Result<usize> {
    if !(h_cond > 0.0) {
        return Err(SkgError::CannotAmplify(format!(
            "conditional min-entropy {h_cond} leaves no extractable secret"
        )));
    }
    if h_cond > 1.0 {
        return Err(SkgError::config(format!(
            "min-entropy per bit cannot exceed 1, got {h_cond}"
        )));
    }
    Ok((KEY_BITS as f64 / h_cond - CEIL_SLACK).ceil() as usize)
}

/// SHA-256 of `bits` packed most-significant-bit first.
pub fn hash_bits(bits: &Bits) -> [u8; 32] {
    Sha256::digest(bits.to_bytes_msb()).into()
}

fn concat(frames: &[BitFrame]) -> (Bits, Vec<(usize, usize)>) {
    let mut sorted: Vec<&BitFrame> = frames.iter().collect();
    sorted.sort_by_key(|f| f.frame_index);
    let mut all = Bits::zeros(0);
    let mut spans = Vec::with_capacity(sorted.len());
    for f in sorted {
        spans.push((f.frame_index, all.len()));
        all.extend_from(&f.bits);
    }
    (all, spans)
}

fn frames_in(spans: &[(usize, usize)], start: usize, end: usize, total: usize) -> Vec<usize> {
    spans
        .iter()
        .enumerate()
        .filter(|&(i, &(_, s))| {
            let e = spans.get(i + 1).map_or(total, |n| n.1);
            s < end && e > start
        })
        .map(|(_, &(id, _))| id)
        .collect()
}

/// Hashes the first `required_input_bits(h_cond)` bits of the frames taken
/// in index order.
pub fn amplify(reconciled: &[BitFrame], h_cond: f64) -> Result<KeyMaterial> {
    let need = required_input_bits(h_cond)?;
    let (all, spans) = concat(reconciled);
    if all.len() < need {
        return Err(SkgError::CannotAmplify(format!(
            "need {need} input bits, have {} (short by {})",
            all.len(),
            need - all.len()
        )));
    }
    Ok(KeyMaterial {
        key: hash_bits(&all.slice(0, need)),
        input_bit_count: need,
        h_cond_used: OrderedF64(h_cond),
        frame_ids: frames_in(&spans, 0, need, all.len()),
    })
}

/// Cuts the concatenated frames into consecutive windows of
/// `required_input_bits(h_cond)` bits and hashes each. Bits that do not fill
/// a window are returned so a later call can prepend them.
pub fn extract_keys(reconciled: &[BitFrame], h_cond: f64, carry: Bits) -> Result<(Vec<KeyMaterial>, Bits)> {
    let need = required_input_bits(h_cond)?;
    let (frames, mut spans) = concat(reconciled);
    let offset = carry.len();
    let mut all = carry;
    all.extend_from(&frames);
    for s in &mut spans {
        s.1 += offset;
    }
    let windows = all.len() / need;
    let keys = (0..windows)
        .map(|w| {
            let start = w * need;
            KeyMaterial {
                key: hash_bits(&all.slice(start, need)),
                input_bit_count: need,
                h_cond_used: OrderedF64(h_cond),
                frame_ids: frames_in(&spans, start, start + need, all.len()),
            }
        })
        .collect();
    let used = windows * need;
    let rest = all.slice(used, all.len() - used);
    Ok((keys, rest))
}

pub fn write_key_file(path: &Path, keys: &[KeyMaterial]) -> Result<()> {
    let mut out = Vec::with_capacity(4 + 32 * keys.len());
    out.extend_from_slice(KEY_FILE_MAGIC);
    for k in keys {
        out.extend_from_slice(&k.key);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_key_file(path: &Path) -> Result<Vec<[u8; 32]>> {
    let bytes = fs::read(path)?;
    let body = bytes
        .strip_prefix(KEY_FILE_MAGIC.as_slice())
        .ok_or_else(|| SkgError::format("missing SKGK magic"))?;
    if body.len() % 32 != 0 {
        return Err(SkgError::format(format!(
            "key file body of {} bytes is not a multiple of 32",
            body.len()
        )));
    }
    Ok(body.chunks_exact(32).map(|c| c.try_into().unwrap()).collect())
}
