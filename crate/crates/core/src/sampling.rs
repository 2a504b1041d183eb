//! Seeded random matrices for sampling checks and tests.
//!
//! All generators draw from a caller-owned [`ChaCha8Rng`] so that every report
//! is reproducible from its seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matcore::{CMatrix, C64};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for sub-task `index` of a run seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index.wrapping_add(1));
    r
}

/// Standard complex Gaussian (real and imaginary parts i.i.d. N(0, 1/2)).
pub fn complex_gaussian(rng: &mut Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian(rng: &mut Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Real Gaussian entries; handy for readable fixtures.
pub fn real_gaussian(rng: &mut Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        C64::new(x, 0.0)
    })
}

/// Wishart-style `G G*` with `G` of size `n × rank`.
pub fn wishart(rng: &mut Rng, n: usize, rank: usize) -> CMatrix {
    let g = gaussian(rng, n, rank);
    &g * &g.adjoint()
}

pub fn self_adjoint(rng: &mut Rng, n: usize) -> CMatrix {
    gaussian(rng, n, n).hermitian_part()
}

/// Gaussian matrix rescaled to operator norm 1 (zero stays zero).
pub fn unit_ball(rng: &mut Rng, rows: usize, cols: usize) -> CMatrix {
    let g = gaussian(rng, rows, cols);
    let n = g.op_norm();
    if n == 0.0 {
        g
    } else {
        g.scale_real(1.0 / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_streams_repeat() {
        let a = gaussian(&mut rng(7), 3, 2);
        let b = gaussian(&mut rng(7), 3, 2);
        assert_eq!(a, b);
        let c = gaussian(&mut substream(7, 0), 3, 2);
        let d = gaussian(&mut substream(7, 1), 3, 2);
        assert_ne!(c, d);
    }

    #[test]
    fn wishart_is_psd() {
        let mut r = rng(1);
        for n in 1..5 {
            let w = wishart(&mut r, n, 2);
            assert!(w.is_psd(1e-9).unwrap().psd);
        }
    }

    #[test]
    fn unit_ball_has_norm_one() {
        let u = unit_ball(&mut rng(3), 3, 3);
        assert!((u.op_norm() - 1.0).abs() < 1e-12);
    }
}
