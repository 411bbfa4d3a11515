//! Min-entropy and conditional min-entropy estimation.
//!
//! Targets are blocks of `b` consecutive bits of Alice's reconciled frames.
//! The conditional estimators measure how well an adversary who sees the
//! co-located bits of Eve's observations can guess each block, using a
//! two-fold holdout (even samples train, odd samples test, and the reverse)
//! so that sparse contexts are not rewarded for memorizing noise. The
//! guessing probability `V` is the held-out accuracy of the best predictor
//! and the estimate is `−log₂(V)/b` bits per bit.
//!
//! The adversary is modelled as the best of a nested family of predictors
//! (prior only, Eve's bits, Eve's bits plus a syndrome digest). Taking the
//! minimum entropy over the family means that a richer conditioning set can
//! only lower the estimate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkgError};
use crate::quantize::BitFrame;
use crate::reconcile::{construct_code, PolarCodeSpec, SpecId, Syndrome};

/// Negative leakage within this tolerance is treated as estimator noise.
pub const ESTIMATOR_TOLERANCE: f64 = 0.02;
pub const DEFAULT_BLOCK_SIZE: usize = 4;
/// Width of the syndrome digest appended to the conditioning context.
pub const DIGEST_BITS: usize = 8;
const MAX_CONDITIONAL_BLOCK: usize = 8;
const MAX_MARGINAL_BLOCK: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Frequentist,
    NearestNeighbor,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Frequentist => "frequentist",
            Estimator::NearestNeighbor => "nearest_neighbor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Min-entropy per bit position.
    pub bits_per_symbol: f64,
    pub sample_count: usize,
    pub estimator: Estimator,
    pub block_size_b: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageRecord {
    pub marginal_h: f64,
    pub conditional_h: f64,
    /// `marginal_h − conditional_h`, with negatives inside the tolerance
    /// clamped to zero.
    pub leakage_bits: f64,
    pub raw_leakage_bits: f64,
}

fn min_samples(b: usize) -> usize {
    10 << b
}

fn check_block(frames: &[BitFrame], b: usize, max_b: usize) -> Result<usize> {
    if b == 0 || b > max_b {
        return Err(SkgError::config(format!("block size must lie in 1..={max_b}, got {b}")));
    }
    let Some(first) = frames.first() else {
        return Err(SkgError::data("no frames to estimate from"));
    };
    let len = first.len();
    if let Some(f) = frames.iter().find(|f| f.len() != len) {
        return Err(SkgError::data(format!(
            "frame {} has {} bits, expected {len}",
            f.frame_index,
            f.len()
        )));
    }
    if len % b != 0 {
        return Err(SkgError::config(format!(
            "block size {b} does not divide frame length {len}"
        )));
    }
    let samples = frames.len() * (len / b);
    let required = min_samples(b);
    if samples < required {
        return Err(SkgError::Estimation {
            required,
            available: samples,
        });
    }
    Ok(samples)
}

fn block_values(frames: &[BitFrame], b: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(frames.iter().map(|f| f.len() / b).sum());
    for f in frames {
        for j in 0..f.len() / b {
            out.push(f.bits.read_msb(j * b, b) as u32);
        }
    }
    out
}

/// Plug-in min-entropy of `b`-bit blocks, per bit.
pub fn min_entropy(frames: &[BitFrame], block_size_b: usize) -> Result<EntropyEstimate> {
    let samples = check_block(frames, block_size_b, MAX_MARGINAL_BLOCK)?;
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for x in block_values(frames, block_size_b) {
        *counts.entry(x).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    let h = -(max as f64 / samples as f64).log2() / block_size_b as f64;
    Ok(EntropyEstimate {
        bits_per_symbol: h.clamp(0.0, 1.0),
        sample_count: samples,
        estimator: Estimator::Frequentist,
        block_size_b,
    })
}

/// Most frequent label; ties go to the smallest label.
fn argmax_label<I: IntoIterator<Item = (u32, usize)>>(counts: I) -> Option<u32> {
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(label, _)| label)
}

/// Learns a predictor from the training half and returns the number of
/// correct predictions on the test half.
trait Classifier {
    fn correct(&self, train: &[(u64, u32)], test: &[(u64, u32)], ctx_bits: usize) -> usize;
}

fn prior_label(train: &[(u64, u32)]) -> u32 {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &(_, x) in train {
        *counts.entry(x).or_default() += 1;
    }
    argmax_label(counts).unwrap_or(0)
}

struct Frequentist;

impl Classifier for Frequentist {
    fn correct(&self, train: &[(u64, u32)], test: &[(u64, u32)], _ctx_bits: usize) -> usize {
        let mut joint: HashMap<(u64, u32), usize> = HashMap::new();
        for &s in train {
            *joint.entry(s).or_default() += 1;
        }
        let mut best: HashMap<u64, (usize, u32)> = HashMap::new();
        for (&(ctx, x), &c) in &joint {
            let e = best.entry(ctx).or_insert((c, x));
            if c > e.0 || (c == e.0 && x < e.1) {
                *e = (c, x);
            }
        }
        let fallback = prior_label(train);
        test.iter()
            .filter(|(ctx, x)| best.get(ctx).map_or(fallback, |e| e.1) == *x)
            .count()
    }
}

/// k-nearest-neighbour vote in Hamming distance over the context bits.
/// Every training sample at the boundary distance joins the vote.
struct NearestNeighbor;

impl NearestNeighbor {
    fn predict(by_ctx: &HashMap<u64, HashMap<u32, usize>>, ctx: u64, ctx_bits: usize, k: usize) -> Option<u32> {
        let mut votes: HashMap<u32, usize> = HashMap::new();
        let mut seen = 0usize;
        let mut add = |entry: &HashMap<u32, usize>, votes: &mut HashMap<u32, usize>| {
            for (&label, &c) in entry {
                *votes.entry(label).or_default() += c;
                seen += c;
            }
            seen
        };
        let mut radius = 0;
        let mut ball = 1usize;
        while radius <= ctx_bits {
            if ball > by_ctx.len() {
                // Enumerating the ball costs more than scanning the contexts.
                let mut by_dist: Vec<(u32, u64)> = by_ctx
                    .keys()
                    .map(|&c| ((c ^ ctx).count_ones(), c))
                    .filter(|&(d, _)| d as usize >= radius)
                    .collect();
                by_dist.sort_unstable();
                let mut i = 0;
                while i < by_dist.len() {
                    let d = by_dist[i].0;
                    let mut total = 0;
                    while i < by_dist.len() && by_dist[i].0 == d {
                        total = add(&by_ctx[&by_dist[i].1], &mut votes);
                        i += 1;
                    }
                    if total >= k {
                        break;
                    }
                }
                return argmax_label(votes);
            }
            let mut total = 0;
            for_each_at_distance(ctx, ctx_bits, radius, &mut |c| {
                if let Some(entry) = by_ctx.get(&c) {
                    total = add(entry, &mut votes);
                }
            });
            if total >= k {
                break;
            }
            radius += 1;
            ball = binomial(ctx_bits, radius);
        }
        argmax_label(votes)
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn for_each_at_distance(ctx: u64, bits: usize, radius: usize, f: &mut impl FnMut(u64)) {
    fn go(ctx: u64, start: usize, bits: usize, left: usize, f: &mut impl FnMut(u64)) {
        if left == 0 {
            f(ctx);
            return;
        }
        for i in start..=bits - left {
            go(ctx ^ (1 << i), i + 1, bits, left - 1, f);
        }
    }
    go(ctx, 0, bits, radius, f);
}

impl Classifier for NearestNeighbor {
    fn correct(&self, train: &[(u64, u32)], test: &[(u64, u32)], ctx_bits: usize) -> usize {
        let k = (train.len().max(1) as f64).ln().ceil().max(1.0) as usize;
        let mut by_ctx: HashMap<u64, HashMap<u32, usize>> = HashMap::new();
        for &(ctx, x) in train {
            *by_ctx.entry(ctx).or_default().entry(x).or_default() += 1;
        }
        let fallback = prior_label(train);
        let mut cache: HashMap<u64, u32> = HashMap::new();
        test.iter()
            .filter(|&&(ctx, x)| {
                let guess = *cache
                    .entry(ctx)
                    .or_insert_with(|| Self::predict(&by_ctx, ctx, ctx_bits, k).unwrap_or(fallback));
                guess == x
            })
            .count()
    }
}

/// Two-fold holdout accuracy.
fn holdout_accuracy(samples: &[(u64, u32)], ctx_bits: usize, clf: &dyn Classifier) -> f64 {
    let even: Vec<_> = samples.iter().step_by(2).copied().collect();
    let odd: Vec<_> = samples.iter().skip(1).step_by(2).copied().collect();
    let correct = clf.correct(&even, &odd, ctx_bits) + clf.correct(&odd, &even, ctx_bits);
    correct as f64 / samples.len() as f64
}

fn check_aligned(name: &str, frames: &[BitFrame], r_a: &[BitFrame]) -> Result<()> {
    if frames.is_empty() {
        return Ok(());
    }
    if frames.len() != r_a.len() {
        return Err(SkgError::data(format!(
            "{name} has {} frames, target has {}",
            frames.len(),
            r_a.len()
        )));
    }
    for (f, a) in frames.iter().zip(r_a) {
        if f.len() != a.len() || f.frame_index != a.frame_index {
            return Err(SkgError::data(format!(
                "{name} frame {} is not aligned with target frame {}",
                f.frame_index, a.frame_index
            )));
        }
    }
    Ok(())
}

fn rebuild(id: SpecId) -> Result<PolarCodeSpec> {
    let n = id.block_length as usize;
    let rate = (n - id.syndrome_len as usize) as f64 / n as f64;
    let spec = construct_code(n, rate, f32::from_bits(id.crossover_bits) as f64)?;
    if spec.id() != id {
        return Err(SkgError::data("syndrome code parameters do not round-trip"));
    }
    Ok(spec)
}

/// Digest of `syndrome` for the block starting at bit `start`: the syndrome
/// bits at the [`DIGEST_BITS`] transform positions centred on the block, with
/// non-syndrome positions reading as 0.
pub fn syndrome_digest(syndrome: &Syndrome, spec: &PolarCodeSpec, start: usize, b: usize) -> u64 {
    let n = spec.block_length();
    let width = DIGEST_BITS.min(n);
    let lo = (start + b / 2).saturating_sub(DIGEST_BITS / 2).min(n - width);
    (lo..lo + width).fold(0u64, |acc, pos| {
        let bit = spec.syndrome_rank(pos).is_some_and(|r| syndrome.bits.get(r));
        (acc << 1) | bit as u64
    })
}

/// Estimates `H∞(r_A | r_E, s_A, r_E′)` per bit.
///
/// `r_e`, `s_a` and `r_e_prime` may each be empty, meaning that the
/// adversary does not observe them. Non-empty inputs must be aligned frame
/// by frame with `r_a`.
pub fn conditional_min_entropy(
    r_a: &[BitFrame],
    r_e: &[BitFrame],
    s_a: &[Syndrome],
    r_e_prime: &[BitFrame],
    block_size_b: usize,
    estimator: Estimator,
) -> Result<EntropyEstimate> {
    let b = block_size_b;
    let sample_count = check_block(r_a, b, MAX_CONDITIONAL_BLOCK)?;
    check_aligned("eve observation", r_e, r_a)?;
    check_aligned("eve decoded frames", r_e_prime, r_a)?;
    if !s_a.is_empty() && s_a.len() != r_a.len() {
        return Err(SkgError::data(format!(
            "{} syndromes for {} target frames",
            s_a.len(),
            r_a.len()
        )));
    }
    let mut specs: HashMap<SpecId, PolarCodeSpec> = HashMap::new();
    for s in s_a {
        if s.spec_id.block_length as usize != r_a[0].len() {
            return Err(SkgError::data("syndrome block length differs from frame length"));
        }
        if let std::collections::hash_map::Entry::Vacant(e) = specs.entry(s.spec_id) {
            e.insert(rebuild(s.spec_id)?);
        }
    }

    let eve_bits = b * (!r_e.is_empty() as usize + !r_e_prime.is_empty() as usize);
    let digest_bits = if s_a.is_empty() {
        0
    } else {
        DIGEST_BITS.min(r_a[0].len())
    };
    let mut base = Vec::with_capacity(sample_count);
    let mut eve = Vec::with_capacity(sample_count);
    let mut full = Vec::with_capacity(sample_count);
    for (fi, frame) in r_a.iter().enumerate() {
        for j in 0..frame.len() / b {
            let start = j * b;
            let x = frame.bits.read_msb(start, b) as u32;
            let mut ctx = 0u64;
            for src in [r_e, r_e_prime] {
                if let Some(f) = src.get(fi) {
                    ctx = (ctx << b) | f.bits.read_msb(start, b);
                }
            }
            let digest = s_a
                .get(fi)
                .map_or(0, |s| syndrome_digest(s, &specs[&s.spec_id], start, b));
            base.push((0u64, x));
            eve.push((ctx, x));
            full.push(((ctx << digest_bits) | digest, x));
        }
    }

    let clf: &dyn Classifier = match estimator {
        Estimator::Frequentist => &Frequentist,
        Estimator::NearestNeighbor => &NearestNeighbor,
    };
    let mut family = vec![(base, 0)];
    if eve_bits > 0 {
        family.push((eve, eve_bits));
    }
    if digest_bits > 0 {
        family.push((full, eve_bits + digest_bits));
    }
    let v = family
        .iter()
        .map(|(samples, bits)| holdout_accuracy(samples, *bits, clf))
        .fold(0.0f64, f64::max);
    let h = if v > 0.0 { -v.log2() / b as f64 } else { 1.0 };
    Ok(EntropyEstimate {
        bits_per_symbol: h.clamp(0.0, 1.0),
        sample_count,
        estimator,
        block_size_b: b,
    })
}

pub fn leakage(marginal: &EntropyEstimate, conditional: &EntropyEstimate) -> Result<LeakageRecord> {
    if marginal.block_size_b != conditional.block_size_b {
        return Err(SkgError::config(format!(
            "block sizes differ: marginal {} vs conditional {}",
            marginal.block_size_b, conditional.block_size_b
        )));
    }
    let raw = marginal.bits_per_symbol - conditional.bits_per_symbol;
    let leakage_bits = if (-ESTIMATOR_TOLERANCE..0.0).contains(&raw) {
        0.0
    } else {
        raw
    };
    Ok(LeakageRecord {
        marginal_h: marginal.bits_per_symbol,
        conditional_h: conditional.bits_per_symbol,
        leakage_bits,
        raw_leakage_bits: raw,
    })
}
