//! Polar code construction for syndrome-based reconciliation.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkgError};

/// Identifies the construction that produced a syndrome. Construction is a
/// pure function of these three values, so equal ids imply equal codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecId {
    pub block_length: u32,
    pub syndrome_len: u32,
    pub crossover_bits: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolarCodeSpec {
    block_length: usize,
    syndrome_positions: Vec<usize>,
    /// `rank[i]` is the index of position `i` within the syndrome, if any.
    rank: Vec<Option<u32>>,
    code_rate: f64,
    design_crossover: f32,
}

impl PolarCodeSpec {
    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn syndrome_positions(&self) -> &[usize] {
        &self.syndrome_positions
    }

    pub fn syndrome_len(&self) -> usize {
        self.syndrome_positions.len()
    }

    pub fn code_rate(&self) -> f64 {
        self.code_rate
    }

    pub fn design_crossover(&self) -> f32 {
        self.design_crossover
    }

    pub fn syndrome_rank(&self, position: usize) -> Option<usize> {
        self.rank.get(position).copied().flatten().map(|r| r as usize)
    }

    pub fn is_syndrome_position(&self, position: usize) -> bool {
        self.syndrome_rank(position).is_some()
    }

    pub fn id(&self) -> SpecId {
        SpecId {
            block_length: self.block_length as u32,
            syndrome_len: self.syndrome_positions.len() as u32,
            crossover_bits: self.design_crossover.to_bits(),
        }
    }
}

/// Bhattacharyya parameter carried as `(ln Z, ln(1 − Z))` so that both very
/// reliable (Z → 0) and very noisy (Z → 1) channels keep full precision.
#[derive(Clone, Copy, Debug)]
struct Bhattacharyya {
    ln_z: f64,
    ln_one_minus_z: f64,
}

impl Bhattacharyya {
    fn new(z: f64) -> Self {
        Bhattacharyya {
            ln_z: z.ln(),
            ln_one_minus_z: (-z).ln_1p(),
        }
    }

    /// Check-node (worse) channel: 2Z − Z² = Z(2 − Z), 1 − Z' = (1 − Z)².
    fn minus(self) -> Self {
        let z = self.ln_z.exp();
        Bhattacharyya {
            ln_z: self.ln_z + (2.0 - z).ln(),
            ln_one_minus_z: 2.0 * self.ln_one_minus_z,
        }
    }

    /// Variable-node (better) channel: Z², 1 − Z' = (1 − Z)(1 + Z).
    fn plus(self) -> Self {
        let z = self.ln_z.exp();
        Bhattacharyya {
            ln_z: 2.0 * self.ln_z,
            ln_one_minus_z: self.ln_one_minus_z + z.ln_1p(),
        }
    }

    /// Strictly increasing in Z over (0, 1).
    fn order_key(self) -> f64 {
        let half = std::f64::consts::LN_2;
        if self.ln_z < -half {
            self.ln_z
        } else {
            -self.ln_one_minus_z - 2.0 * half
        }
    }

    fn value(self) -> f64 {
        self.ln_z.exp()
    }
}

/// Bhattacharyya parameters of the `n` synthesized channels of a BSC(p), in
/// natural index order (no bit reversal).
pub fn bhattacharyya_profile(n: usize, p: f64) -> Vec<f64> {
    profile(n, p).into_iter().map(Bhattacharyya::value).collect()
}

fn profile(n: usize, p: f64) -> Vec<Bhattacharyya> {
    let mut z = vec![Bhattacharyya::new(2.0 * (p * (1.0 - p)).sqrt())];
    while z.len() < n {
        z = z.iter().flat_map(|&c| [c.minus(), c.plus()]).collect();
    }
    z
}

/// Picks the `round((1 − rate)·n)` least reliable positions as the
/// syndrome. The design crossover is rounded to `f32` so that a receiver
/// rebuilding the code from a serialized header gets the same positions.
pub fn construct_code(n: usize, code_rate: f64, design_crossover: f64) -> Result<PolarCodeSpec> {
    if n < 2 || !n.is_power_of_two() || n > u16::MAX as usize / 2 + 1 {
        return Err(SkgError::config(format!(
            "block length must be a power of two in [2, 32768], got {n}"
        )));
    }
    if !(code_rate > 0.0 && code_rate < 1.0) {
        return Err(SkgError::config(format!(
            "code rate must lie in (0, 1), got {code_rate}"
        )));
    }
    let p32 = design_crossover as f32;
    let p = p32 as f64;
    if !(p > 0.0 && p < 0.5) {
        return Err(SkgError::config(format!(
            "design crossover must lie in (0, 0.5), got {design_crossover}"
        )));
    }
    let syndrome_len = ((1.0 - code_rate) * n as f64).round() as usize;
    if syndrome_len == 0 || syndrome_len == n {
        return Err(SkgError::config(format!(
            "code rate {code_rate} leaves {syndrome_len} of {n} positions in the syndrome"
        )));
    }

    let order = reliability_order(n, p);
    let mut positions: Vec<usize> = order[..syndrome_len].to_vec();
    positions.sort_unstable();

    let mut rank = vec![None; n];
    for (r, &pos) in positions.iter().enumerate() {
        rank[pos] = Some(r as u32);
    }
    Ok(PolarCodeSpec {
        block_length: n,
        code_rate: 1.0 - syndrome_len as f64 / n as f64,
        syndrome_positions: positions,
        rank,
        design_crossover: p32,
    })
}

/// Synthesized channel indices from least to most reliable (largest Z
/// first, equal Z by lower index).
pub fn reliability_order(n: usize, p: f64) -> Vec<usize> {
    let z = profile(n, p);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[b].order_key().partial_cmp(&z[a].order_key()).unwrap().then(a.cmp(&b)));
    order
}
