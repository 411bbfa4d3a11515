//! The polar transform `x·F^{⊗k}` over GF(2), `F = [[1, 0], [1, 1]]`, in
//! natural order. It is an involution.

use crate::bits::Bits;
use crate::error::{Result, SkgError};

/// `MASKS[t]` selects bit positions `j` with `j & (1 << t) == 0`.
const MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

/// In-place butterfly: for every stage half-width `h`, `x[j] ^= x[j + h]`
/// on the first half of each `2h` block. Stages with `h < 64` run as
/// shift-and-mask inside each word, wider stages XOR whole words.
pub fn polar_transform_in_place(bits: &mut Bits) -> Result<()> {
    let n = bits.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(SkgError::data(format!(
            "polar transform length must be a power of two, got {n}"
        )));
    }
    let words = bits.words_mut();
    let mut h = 1usize;
    while h < n {
        if h < 64 {
            let mask = MASKS[h.trailing_zeros() as usize];
            for w in words.iter_mut() {
                *w ^= (*w >> h) & mask;
            }
        } else {
            let hw = h / 64;
            for start in (0..words.len()).step_by(2 * hw) {
                for j in start..start + hw {
                    words[j] ^= words[j + hw];
                }
            }
        }
        h <<= 1;
    }
    Ok(())
}

pub fn polar_transform(bits: &Bits) -> Result<Bits> {
    let mut out = bits.clone();
    polar_transform_in_place(&mut out)?;
    Ok(out)
}

/// Same butterfly on a byte-per-bit buffer; used inside the decoder.
pub(crate) fn polar_transform_u8(x: &mut [u8]) {
    let n = x.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for j in start..start + h {
                x[j] ^= x[j + h];
            }
        }
        h <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Explicit Kronecker power of F, row-major.
    fn kron_matrix(n: usize) -> Vec<Vec<u8>> {
        let mut g = vec![vec![1u8]];
        while g.len() < n {
            let m = g.len();
            let mut next = vec![vec![0u8; 2 * m]; 2 * m];
            for i in 0..2 * m {
                for j in 0..2 * m {
                    let f = [[1u8, 0], [1, 1]][i / m][j / m];
                    next[i][j] = f & g[i % m][j % m];
                }
            }
            g = next;
        }
        g
    }

    fn matrix_product(x: &[u8], g: &[Vec<u8>]) -> Vec<u8> {
        (0..x.len())
            .map(|j| x.iter().zip(g).fold(0, |acc, (&xi, row)| acc ^ (xi & row[j])))
            .collect()
    }

    #[test]
    fn zero_maps_to_zero() {
        let z = Bits::zeros(1024);
        assert_eq!(polar_transform(&z).unwrap(), z);
    }

    #[test]
    fn matches_matrix_oracle_n8() {
        let g = kron_matrix(8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x: Vec<u8> = (0..8).map(|_| rng.random_range(0..2)).collect();
            let bits = Bits::from_bools(x.iter().map(|&b| b == 1));
            let got = polar_transform(&bits).unwrap().to_u8_vec();
            assert_eq!(got, matrix_product(&x, &g));
        }
    }

    #[test]
    fn involution_up_to_1024() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut n = 2;
        while n <= 1024 {
            let x = Bits::from_bools((0..n).map(|_| rng.random_bool(0.5)));
            let y = polar_transform(&x).unwrap();
            assert_eq!(polar_transform(&y).unwrap(), x, "n={n}");
            n *= 2;
        }
    }

    #[test]
    fn byte_and_packed_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<u8> = (0..512).map(|_| rng.random_range(0..2)).collect();
        let mut y = x.clone();
        polar_transform_u8(&mut y);
        let packed = polar_transform(&Bits::from_bools(x.iter().map(|&b| b == 1))).unwrap();
        assert_eq!(packed.to_u8_vec(), y);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(polar_transform(&Bits::zeros(12)), Err(SkgError::Data(_))));
    }
}
