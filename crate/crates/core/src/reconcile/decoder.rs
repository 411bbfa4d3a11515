//! Successive-cancellation decoding with pinned (syndrome) positions.
//!
//! The recursion mirrors the Plotkin split of `x = u·F^{⊗k}`: with
//! `u = (a, b)` the codeword is `(c_a ⊕ c_b, c_b)`, so the left half is
//! decoded from `f(L_left, L_right)` and the right half from
//! `L_right ± L_left` once `c_a` is known. Subtrees whose positions are all
//! pinned skip the LLR work: their bits are already determined.

use crate::bits::Bits;
use crate::error::{Result, SkgError};

use super::transform::polar_transform_u8;

/// Exact check-node LLR combination (`2·atanh(tanh(a/2)·tanh(b/2))`) in the
/// numerically stable min-plus-correction form.
#[inline]
pub(crate) fn boxplus(a: f64, b: f64) -> f64 {
    let sign = if (a < 0.0) != (b < 0.0) { -1.0 } else { 1.0 };
    sign * a.abs().min(b.abs()) + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Position state during decoding: `Some(bit)` if pinned by the syndrome.
pub(crate) type Pins = [Option<u8>];

/// Reusable decoder buffers for one block length.
pub struct ScDecoder {
    n: usize,
    llr: Vec<f64>,
    scratch: Vec<f64>,
    u: Vec<u8>,
    codeword: Vec<u8>,
    pins: Vec<Option<u8>>,
}

impl ScDecoder {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(SkgError::data(format!("block length must be a power of two, got {n}")));
        }
        Ok(ScDecoder {
            n,
            llr: vec![0.0; n],
            scratch: vec![0.0; n],
            u: vec![0; n],
            codeword: vec![0; n],
            pins: vec![None; n],
        })
    }

    pub fn block_length(&self) -> usize {
        self.n
    }

    /// Decodes a source word observed through a BSC(`crossover`) as
    /// `side_info`, with `u` pinned at the given positions. Returns the
    /// estimate `x̂ = û·F^{⊗k}`.
    pub fn decode(
        &mut self,
        side_info: &Bits,
        pinned: impl IntoIterator<Item = (usize, bool)>,
        crossover: f64,
    ) -> Result<Bits> {
        if side_info.len() != self.n {
            return Err(SkgError::data(format!(
                "side information has {} bits, block length is {}",
                side_info.len(),
                self.n
            )));
        }
        if !(crossover > 0.0 && crossover < 0.5) {
            return Err(SkgError::config(format!(
                "crossover must lie in (0, 0.5), got {crossover}"
            )));
        }
        let mag = ((1.0 - crossover) / crossover).ln();
        for (i, l) in self.llr.iter_mut().enumerate() {
            *l = if side_info.get(i) { -mag } else { mag };
        }
        self.pins.fill(None);
        for (pos, bit) in pinned {
            self.pins[pos] = Some(bit as u8);
        }
        sc(
            &self.llr,
            &self.pins,
            &mut self.u,
            &mut self.codeword,
            &mut self.scratch,
        );
        Ok(Bits::from_bools(self.codeword.iter().map(|&b| b == 1)))
    }

    /// Decisions `û` from the most recent call to [`ScDecoder::decode`].
    pub fn last_u(&self) -> &[u8] {
        &self.u
    }
}

fn sc(llr: &[f64], pins: &Pins, u: &mut [u8], c: &mut [u8], scratch: &mut [f64]) {
    let n = llr.len();
    if pins.iter().all(Option::is_some) {
        for (ui, p) in u.iter_mut().zip(pins) {
            *ui = p.unwrap();
        }
        c.copy_from_slice(u);
        polar_transform_u8(c);
        return;
    }
    if n == 1 {
        // Zero LLR resolves to 0.
        let bit = pins[0].unwrap_or(u8::from(llr[0] < 0.0));
        u[0] = bit;
        c[0] = bit;
        return;
    }
    let h = n / 2;
    let (left_llr, rest) = scratch.split_at_mut(h);
    let (llr_l, llr_r) = llr.split_at(h);
    for j in 0..h {
        left_llr[j] = boxplus(llr_l[j], llr_r[j]);
    }
    let (c_a, c_b) = c.split_at_mut(h);
    let (u_a, u_b) = u.split_at_mut(h);
    sc(left_llr, &pins[..h], u_a, c_a, rest);
    for j in 0..h {
        left_llr[j] = if c_a[j] == 1 {
            llr_r[j] - llr_l[j]
        } else {
            llr_r[j] + llr_l[j]
        };
    }
    sc(left_llr, &pins[h..], u_b, c_b, rest);
    for j in 0..h {
        c_a[j] ^= c_b[j];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxplus_matches_tanh_rule() {
        for &(a, b) in &[(1.0, 2.0), (-3.0, 0.5), (0.1, -0.2), (7.0, 9.0), (-4.0, -4.0)] {
            let exact: f64 = 2.0 * ((a / 2.0f64).tanh() * (b / 2.0f64).tanh()).atanh();
            assert!((boxplus(a, b) - exact).abs() < 1e-12, "{a} {b}");
        }
        assert_eq!(boxplus(0.0, 5.0), 0.0);
    }

    #[test]
    fn all_pinned_returns_transform_of_pins() {
        let mut dec = ScDecoder::new(8).unwrap();
        let pins: Vec<(usize, bool)> = (0..8).map(|i| (i, i % 3 == 0)).collect();
        let x = dec.decode(&Bits::zeros(8), pins.clone(), 0.1).unwrap();
        let mut expect: Vec<u8> = pins.iter().map(|&(_, b)| b as u8).collect();
        polar_transform_u8(&mut expect);
        assert_eq!(x.to_u8_vec(), expect);
    }

    #[test]
    fn unpinned_noiseless_word_is_returned() {
        let mut dec = ScDecoder::new(16).unwrap();
        let y = Bits::from_str01("1011001110001101");
        assert_eq!(dec.decode(&y, [], 0.01).unwrap(), y);
    }
}
