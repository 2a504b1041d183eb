//! The λ-tensor algebra of matrix algebras: product through the (W2)
//! witnesses, involution through (O1).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axioms::certified_w2;
use crate::error::{dim_err, LtError, Result};
use crate::lambda::LambdaSequence;
use crate::matcore::{kron, CMatrix};
use crate::sampling;
use crate::tensorspace::{random_decomposition, realize, star, Decomposition, SpaceSpec};

/// Relative tolerance of the flattening oracle check in [`multiply`].
pub const PRODUCT_TOL: f64 = 1e-9;

/// An element of `M_{d_1} ⊗_λ … ⊗_λ M_{d_m}` (`n = 1`) with its decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraElement {
    pub dec: Decomposition,
    pub flat: CMatrix,
}

impl AlgebraElement {
    pub fn new(lambda: &LambdaSequence, dec: Decomposition) -> Result<Self> {
        let el = realize(lambda, &dec)?;
        if el.spec.n != 1 {
            return dim_err(format!("algebra elements have n = 1, got {}", el.spec.n));
        }
        Ok(AlgebraElement { dec, flat: el.flat })
    }

    /// `1 ⊗ … ⊗ 1`.
    pub fn unit(lambda: &LambdaSequence, dims: &[usize]) -> Result<Self> {
        let ones: Vec<CMatrix> = dims.iter().map(|&d| CMatrix::identity(d)).collect();
        Self::new(lambda, Decomposition::elementary(&ones)?)
    }

    pub fn spec(&self) -> Result<SpaceSpec> {
        self.dec.spec()
    }

    pub fn value(&self) -> f64 {
        self.dec.value()
    }

    pub fn scale_real(&self, c: f64) -> Self {
        AlgebraElement {
            dec: Decomposition {
                alpha: self.dec.alpha.scale_real(c),
                ..self.dec.clone()
            },
            flat: self.flat.scale_real(c),
        }
    }
}

/// `z` with block `(i s + k, j s + l)` equal to `u_{ij} v_{kl}`.
fn block_product(u: &CMatrix, r: usize, v: &CMatrix, s: usize, d: usize) -> CMatrix {
    let mut z = CMatrix::zeros(r * s * d, r * s * d);
    for i in 0..r {
        for j in 0..r {
            let uij = u.sub_block(i * d, j * d, d, d);
            if uij.is_zero() {
                continue;
            }
            for k in 0..s {
                for l in 0..s {
                    let p = &uij * &v.sub_block(k * d, l * d, d, d);
                    z.set_block((i * s + k) * d, (j * s + l) * d, &p);
                }
            }
        }
    }
    z
}

/// `x · y` as `((α⊗γ)S, z_1, …, z_m, T(β⊗δ))` at level `rs`; the result is
/// checked against the plain product of the flattenings.
pub fn multiply(lambda: &LambdaSequence, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
    let (sx, sy) = (x.spec()?, y.spec()?);
    if sx != sy {
        return dim_err(format!("cannot multiply elements over {sx:?} and {sy:?}"));
    }
    let (r, s) = (x.dec.level, y.dec.level);
    let (w_s, w_t) = certified_w2(lambda, r, s)?;
    let alpha = &kron(&x.dec.alpha, &y.dec.alpha) * &w_s;
    let beta = &w_t * &kron(&x.dec.beta, &y.dec.beta);
    let factors = x
        .dec
        .factors
        .iter()
        .zip(&y.dec.factors)
        .zip(&sx.dims)
        .map(|((u, v), &d)| block_product(u, r, v, s, d))
        .collect();
    let dec = Decomposition::new(r * s, alpha, factors, beta)?;
    let out = AlgebraElement::new(lambda, dec)?;
    let oracle = &x.flat * &y.flat;
    let residual = (&out.flat - &oracle).max_abs();
    if residual > PRODUCT_TOL * (1.0 + oracle.max_abs()) {
        return Err(LtError::RealizationMismatch { index: 0, residual });
    }
    Ok(out)
}

/// `x*` through the decomposition; refused without (O1).
pub fn involution(lambda: &LambdaSequence, x: &AlgebraElement) -> Result<AlgebraElement> {
    AlgebraElement::new(lambda, star(lambda, &x.dec)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmultEntry {
    pub levels: [usize; 2],
    pub value_product: f64,
    pub value_x: f64,
    pub value_y: f64,
    /// `flat(xy)` against `flat(x)·flat(y)`, entrywise.
    pub oracle_residual: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmultReport {
    pub sequence: String,
    pub seed: u64,
    pub entries: Vec<SubmultEntry>,
    pub all_hold: bool,
    pub max_oracle_residual: f64,
}

/// Seeded random pair at levels `(r, s)`; pair `index` draws from its own stream.
pub fn random_pair(
    lambda: &LambdaSequence,
    dims: &[usize],
    levels: (usize, usize),
    seed: u64,
    index: u64,
) -> Result<(AlgebraElement, AlgebraElement)> {
    let mut rng = sampling::substream(seed, index);
    let x = random_decomposition(&mut rng, lambda, 1, levels.0, dims)?;
    let y = random_decomposition(&mut rng, lambda, 1, levels.1, dims)?;
    Ok((AlgebraElement::new(lambda, x)?, AlgebraElement::new(lambda, y)?))
}

pub fn submult_entry(lambda: &LambdaSequence, x: &AlgebraElement, y: &AlgebraElement) -> Result<SubmultEntry> {
    let p = multiply(lambda, x, y)?;
    let oracle = &x.flat * &y.flat;
    let (vp, vx, vy) = (p.value(), x.value(), y.value());
    Ok(SubmultEntry {
        levels: [x.dec.level, y.dec.level],
        value_product: vp,
        value_x: vx,
        value_y: vy,
        oracle_residual: (&p.flat - &oracle).max_abs(),
        holds: vp <= vx * vy * (1.0 + 1e-12) + 1e-9,
    })
}

/// Submultiplicativity of decomposition values on `pairs` seeded random
/// pairs, levels cycling through `1..=max_level`.
pub fn submult_report(
    lambda: &LambdaSequence,
    dims: &[usize],
    pairs: usize,
    max_level: usize,
    seed: u64,
) -> Result<SubmultReport> {
    let max_level = max_level.max(1);
    let entries = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let levels = (1 + i % max_level, 1 + (i / max_level) % max_level);
            let (x, y) = random_pair(lambda, dims, levels, seed, i as u64)?;
            submult_entry(lambda, &x, &y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubmultReport {
        sequence: lambda.name().into(),
        seed,
        all_hold: entries.iter().all(|e| e.holds),
        max_oracle_residual: entries.iter().map(|e| e.oracle_residual).fold(0.0, f64::max),
        entries,
    })
}
