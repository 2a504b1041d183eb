//! Elements of `M_n(M_{d_1} ⊗ … ⊗ M_{d_m})`, their decompositions
//! `α ⊗_{λ_j}(v_1, …, v_m) β`, and bounds on the λ-norm.
//!
//! Flattening convention: an element is stored as one `(n·D) × (n·D)` matrix,
//! `D = Π d_t`, with row index `((i · d_1 + x_1) · d_2 + x_2) …`, i.e. the
//! `n`-block outermost and the factor indices in slot order. Factors
//! `v_t ∈ M_j(M_{d_t})` use the same block layout with `j` outermost.

use serde::{Deserialize, Serialize};

use crate::axioms::{certified_e2, require_o1, require_o2};
use crate::error::{dim_err, LtError, Result};
use crate::lambda::{tensorize, LambdaSequence};
use crate::matcore::{block_assemble, kron, kron_all, BlockKind, CMatrix, ONE};
use crate::sampling::{self, Rng};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub n: usize,
    pub dims: Vec<usize>,
}

impl SpaceSpec {
    pub fn new(n: usize, dims: Vec<usize>) -> Result<Self> {
        if n == 0 || dims.is_empty() || dims.contains(&0) {
            return dim_err(format!("invalid space n={n}, dims={dims:?}"));
        }
        Ok(SpaceSpec { n, dims })
    }

    /// `D = Π d_t`.
    pub fn inner(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn flat_size(&self) -> usize {
        self.n * self.inner()
    }
}

/// `α ⊗_{λ_j}(v_1, …, v_m) β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub level: usize,
    pub alpha: CMatrix,
    pub factors: Vec<CMatrix>,
    pub beta: CMatrix,
}

impl Decomposition {
    pub fn new(level: usize, alpha: CMatrix, factors: Vec<CMatrix>, beta: CMatrix) -> Result<Self> {
        let d = Decomposition {
            level,
            alpha,
            factors,
            beta,
        };
        d.spec()?;
        Ok(d)
    }

    /// Space signature implied by the shapes.
    pub fn spec(&self) -> Result<SpaceSpec> {
        let j = self.level;
        if j == 0 {
            return dim_err("level must be at least 1");
        }
        let n = self.alpha.rows();
        if self.beta.shape() != (self.alpha.cols(), n) {
            return dim_err(format!(
                "alpha is {:?} but beta is {:?}",
                self.alpha.shape(),
                self.beta.shape()
            ));
        }
        let mut dims = Vec::with_capacity(self.factors.len());
        for v in &self.factors {
            if !v.is_square() || v.rows() % j != 0 || v.rows() == 0 {
                return dim_err(format!("factor {:?} is not in M_{j}(M_d)", v.shape()));
            }
            dims.push(v.rows() / j);
        }
        SpaceSpec::new(n, dims)
    }

    /// Checks shapes against `λ` (arity and `τ(j)`).
    pub fn validate(&self, lambda: &LambdaSequence) -> Result<SpaceSpec> {
        let spec = self.spec()?;
        if self.factors.len() != lambda.arity() {
            return Err(LtError::Arity {
                expected: lambda.arity(),
                got: self.factors.len(),
            });
        }
        let tau = lambda.tau(self.level);
        if self.alpha.cols() != tau {
            return dim_err(format!(
                "alpha has {} columns, tau({}) = {tau}",
                self.alpha.cols(),
                self.level
            ));
        }
        Ok(spec)
    }

    /// `‖α‖ · Π ‖v_t‖ · ‖β‖`.
    pub fn value(&self) -> f64 {
        self.alpha.op_norm() * self.factors.iter().map(CMatrix::op_norm).product::<f64>() * self.beta.op_norm()
    }

    /// Level-1 decomposition of the elementary tensor `x_1 ⊗ … ⊗ x_m` at `n = 1`.
    pub fn elementary(xs: &[CMatrix]) -> Result<Self> {
        Self::new(1, CMatrix::scalar(ONE), xs.to_vec(), CMatrix::scalar(ONE))
    }

    /// Rescales every factor to norm one and balances `‖α‖ = ‖β‖`; the
    /// realized element and the value are unchanged.
    pub fn normalized(&self) -> Decomposition {
        let mut out = self.clone();
        let mut scale = 1.0;
        for v in &mut out.factors {
            let n = v.op_norm();
            if n > 0.0 {
                *v = v.scale_real(1.0 / n);
                scale *= n;
            } else {
                scale = 0.0;
            }
        }
        out.alpha = out.alpha.scale_real(scale);
        let (a, b) = (out.alpha.op_norm(), out.beta.op_norm());
        if a > 0.0 && b > 0.0 {
            let c = (b / a).sqrt();
            out.alpha = out.alpha.scale_real(c);
            out.beta = out.beta.scale_real(1.0 / c);
        }
        out
    }
}

pub fn decomposition_value(dec: &Decomposition) -> f64 {
    dec.value()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorElement {
    pub spec: SpaceSpec,
    pub flat: CMatrix,
}

impl TensorElement {
    pub fn new(spec: SpaceSpec, flat: CMatrix) -> Result<Self> {
        let s = spec.flat_size();
        if flat.shape() != (s, s) {
            return dim_err(format!("flattening is {:?}, space needs {s}x{s}", flat.shape()));
        }
        Ok(TensorElement { spec, flat })
    }

    pub fn zero(spec: SpaceSpec) -> Self {
        let s = spec.flat_size();
        TensorElement {
            spec,
            flat: CMatrix::zeros(s, s),
        }
    }

    /// `x_1 ⊗ … ⊗ x_m` at `n = 1`.
    pub fn elementary(xs: &[CMatrix]) -> Result<Self> {
        let dims = xs
            .iter()
            .map(|x| if x.is_square() { Ok(x.rows()) } else { dim_err("factors must be square") })
            .collect::<Result<Vec<_>>>()?;
        Self::new(SpaceSpec::new(1, dims)?, kron_all(xs))
    }

    /// `γ ⊗ 1 ⊗ … ⊗ 1`.
    pub fn scalar(gamma: &CMatrix, dims: &[usize]) -> Result<Self> {
        let spec = SpaceSpec::new(gamma.rows(), dims.to_vec())?;
        let d = spec.inner();
        Self::new(spec, kron(gamma, &CMatrix::identity(d)))
    }

    /// The unit `1_n ⊗ 1 ⊗ … ⊗ 1`.
    pub fn identity(spec: &SpaceSpec) -> Self {
        let s = spec.flat_size();
        TensorElement {
            spec: spec.clone(),
            flat: CMatrix::identity(s),
        }
    }

    pub fn adjoint(&self) -> Self {
        TensorElement {
            spec: self.spec.clone(),
            flat: self.flat.adjoint(),
        }
    }

    pub fn try_add(&self, other: &TensorElement) -> Result<Self> {
        if self.spec != other.spec {
            return dim_err("elements live in different spaces");
        }
        Ok(TensorElement {
            spec: self.spec.clone(),
            flat: self.flat.try_add(&other.flat)?,
        })
    }

    pub fn scale_real(&self, c: f64) -> Self {
        TensorElement {
            spec: self.spec.clone(),
            flat: self.flat.scale_real(c),
        }
    }

    /// Largest entrywise difference of the flattenings.
    pub fn distance(&self, other: &TensorElement) -> f64 {
        if self.flat.shape() != other.flat.shape() {
            return f64::INFINITY;
        }
        (&self.flat - &other.flat).max_abs()
    }

    /// `‖u − u*‖_F`.
    pub fn asymmetry(&self) -> f64 {
        (&self.flat - &self.flat.adjoint()).fro_norm()
    }
}

/// Flattening of `α ⊗_{λ_j}(v_1, …, v_m) β`, i.e. `(α ⊗ 1_D) T (β ⊗ 1_D)` with
/// `T` the tensorized unit expansion of `λ_j`.
pub fn realize(lambda: &LambdaSequence, dec: &Decomposition) -> Result<TensorElement> {
    let spec = dec.validate(lambda)?;
    let t = tensorize(lambda, dec.level, &dec.factors)?;
    let id = CMatrix::identity(spec.inner());
    let flat = &(&kron(&dec.alpha, &id) * &t) * &kron(&dec.beta, &id);
    TensorElement::new(spec, flat)
}

/// `(β*, v_1*, …, v_m*, α*)`; requires (O1) at the decomposition level.
pub fn star(lambda: &LambdaSequence, dec: &Decomposition) -> Result<Decomposition> {
    dec.validate(lambda)?;
    require_o1(lambda, dec.level).map_err(|e| {
        LtError::InvolutionUnsupported(format!("{} at level {}: {e}", lambda.name(), dec.level))
    })?;
    Ok(Decomposition {
        level: dec.level,
        alpha: dec.beta.adjoint(),
        factors: dec.factors.iter().map(CMatrix::adjoint).collect(),
        beta: dec.alpha.adjoint(),
    })
}

/// Relative self-adjointness tolerance for [`symmetrize`] inputs.
pub const SELF_ADJOINT_TOL: f64 = 1e-9;

fn is_self_adjoint(m: &CMatrix, tol: f64) -> bool {
    (m - &m.adjoint()).max_abs() <= tol * (1.0 + m.max_abs())
}

/// Rewrites a decomposition of a self-adjoint element as
/// `α' ⊗_{λ_{2j}}(y_1, …, y_m) α'*` with `y_t = [[0, v_t*], [v_t, 0]]`,
/// `α' = (μ^{-1} β*/√2, μ α/√2) P`, `P` the (E2) witness at `(j, j)` and
/// `μ = sqrt(‖β‖/‖α‖)`, which makes `‖α'‖² ≤ ‖α‖‖β‖`. Decompositions that are
/// already symmetric are returned unchanged.
pub fn symmetrize(lambda: &LambdaSequence, dec: &Decomposition) -> Result<Decomposition> {
    let u = realize(lambda, dec)?;
    let asym = (&u.flat - &u.flat.adjoint()).op_norm();
    let allowed = SELF_ADJOINT_TOL * (1.0 + u.flat.op_norm());
    if asym > allowed {
        return Err(LtError::NotSelfAdjoint {
            asymmetry: asym,
            allowed,
        });
    }
    let j = dec.level;
    let symmetric = (&dec.beta - &dec.alpha.adjoint()).max_abs() <= 1e-14 * (1.0 + dec.alpha.max_abs())
        && dec.factors.iter().all(|v| is_self_adjoint(v, 1e-14));
    if symmetric {
        return Ok(Decomposition {
            level: j,
            alpha: dec.alpha.clone(),
            factors: dec.factors.iter().map(CMatrix::hermitian_part).collect(),
            beta: dec.alpha.adjoint(),
        });
    }
    let (na, nb) = (dec.alpha.op_norm(), dec.beta.op_norm());
    let factor_norm: f64 = dec.factors.iter().map(CMatrix::op_norm).product();
    if na == 0.0 || nb == 0.0 || factor_norm == 0.0 {
        let alpha = CMatrix::zeros(dec.alpha.rows(), dec.alpha.cols());
        return Ok(Decomposition {
            level: j,
            beta: alpha.adjoint(),
            alpha,
            factors: dec.factors.iter().map(|v| CMatrix::zeros(v.rows(), v.cols())).collect(),
        });
    }
    require_o1(lambda, j)?;
    require_o2(lambda, j)?;
    let p = certified_e2(lambda, j, j)?;
    let mu = (nb / na).sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let row = CMatrix::hstack(&[
        &dec.beta.adjoint().scale_real(h / mu),
        &dec.alpha.scale_real(h * mu),
    ])?;
    let alpha = &row * &p;
    let factors = dec
        .factors
        .iter()
        .map(|v| block_assemble(BlockKind::Adiag, &[v.adjoint(), v.clone()]))
        .collect::<Result<Vec<_>>>()?;
    let out = Decomposition {
        level: 2 * j,
        beta: alpha.adjoint(),
        alpha,
        factors,
    };
    let back = realize(lambda, &out)?;
    let residual = back.distance(&u);
    if residual > 1e-9 * (1.0 + u.flat.max_abs()) {
        return Err(LtError::RealizationMismatch { index: 0, residual });
    }
    Ok(out)
}

/// Certified upper bound on the λ-norm from a list of candidate decompositions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    pub upper: f64,
    pub best_index: usize,
    pub best: Decomposition,
    pub values: Vec<f64>,
}

/// Realization tolerance for candidates: entrywise, relative to the element.
pub const CANDIDATE_TOL: f64 = 1e-9;

pub fn lambda_norm_ub(
    lambda: &LambdaSequence,
    element: &TensorElement,
    candidates: &[Decomposition],
) -> Result<NormBound> {
    if candidates.is_empty() {
        return Err(LtError::EmptyCandidates);
    }
    let scale = 1.0 + element.flat.max_abs();
    let mut values = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, Decomposition, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let got = realize(lambda, c)?;
        let residual = got.distance(element);
        if got.spec != element.spec || residual > CANDIDATE_TOL * scale {
            return Err(LtError::RealizationMismatch { index: i, residual });
        }
        let norm = c.normalized();
        let v = norm.value();
        values.push(v);
        if best.as_ref().is_none_or(|b| v < b.2) {
            best = Some((i, norm, v));
        }
    }
    let (best_index, best, upper) = best.expect("non-empty candidates");
    Ok(NormBound {
        upper,
        best_index,
        best,
        values,
    })
}

/// Lower bound: operator norm of the flattening.
pub fn min_norm(element: &TensorElement) -> f64 {
    element.flat.op_norm()
}

/// Gaussian decomposition with the given shape.
pub fn random_decomposition(
    rng: &mut Rng,
    lambda: &LambdaSequence,
    n: usize,
    level: usize,
    dims: &[usize],
) -> Result<Decomposition> {
    if dims.len() != lambda.arity() {
        return Err(LtError::Arity {
            expected: lambda.arity(),
            got: dims.len(),
        });
    }
    let tau = lambda.tau(level);
    let alpha = sampling::gaussian(rng, n, tau);
    let factors = dims
        .iter()
        .map(|&d| sampling::gaussian(rng, level * d, level * d))
        .collect();
    let beta = sampling::gaussian(rng, tau, n);
    Decomposition::new(level, alpha, factors, beta)
}
