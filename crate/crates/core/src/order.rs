//! Cone certificates `α ⊗_{λ_j}(v_1, …, v_m) α*` with positive factors,
//! block certificates for the Λ-norm, operator-system order units and
//! positivity-preserving constructions.

use serde::{Deserialize, Serialize};

use crate::axioms::{certified_e2, require_o1, require_o2, require_o3};
use crate::error::{dim_err, LtError, Result};
use crate::lambda::LambdaSequence;
use crate::matcore::{block_assemble, kron, kron_all, unit, BlockKind, CMatrix, ONE, ZERO};
use crate::tensorspace::{realize, symmetrize, Decomposition, SpaceSpec, TensorElement};

/// Relative tolerance for positivity of factors and flattenings.
pub const PSD_TOL: f64 = 1e-9;
/// Relative entrywise tolerance for realization comparisons.
pub const REALIZE_TOL: f64 = 1e-9;

/// Witness of membership in `C_n`: `β = α*` is implied, every factor PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub level: usize,
    pub alpha: CMatrix,
    pub factors: Vec<CMatrix>,
    /// Minimum eigenvalue of each factor before clipping.
    pub psd_slack: Vec<f64>,
}

impl ConeCertificate {
    /// Builds a certificate, clipping eigenvalues in `[-tol·(1+‖v‖), 0)` to zero.
    pub fn new(level: usize, alpha: CMatrix, factors: Vec<CMatrix>) -> Result<Self> {
        let mut clean = Vec::with_capacity(factors.len());
        let mut slack = Vec::with_capacity(factors.len());
        for v in factors {
            let check = v.is_psd(PSD_TOL)?;
            if !check.psd {
                return Err(LtError::NotPsd {
                    min_eig: check.min_eig,
                });
            }
            slack.push(check.min_eig);
            clean.push(v.clip_psd().0);
        }
        let cert = ConeCertificate {
            level,
            alpha,
            factors: clean,
            psd_slack: slack,
        };
        cert.decomposition().spec()?;
        Ok(cert)
    }

    /// Certificate of the zero element: `α = 0`, identity factors, level 1.
    pub fn zero(lambda: &LambdaSequence, spec: &SpaceSpec) -> Result<Self> {
        if spec.dims.len() != lambda.arity() {
            return Err(LtError::Arity {
                expected: lambda.arity(),
                got: spec.dims.len(),
            });
        }
        Self::new(
            1,
            CMatrix::zeros(spec.n, lambda.tau(1)),
            spec.dims.iter().map(|&d| CMatrix::identity(d)).collect(),
        )
    }

    pub fn decomposition(&self) -> Decomposition {
        Decomposition {
            level: self.level,
            alpha: self.alpha.clone(),
            factors: self.factors.clone(),
            beta: self.alpha.adjoint(),
        }
    }

    pub fn spec(&self) -> Result<SpaceSpec> {
        self.decomposition().spec()
    }

    pub fn realize(&self, lambda: &LambdaSequence) -> Result<TensorElement> {
        realize(lambda, &self.decomposition())
    }

    pub fn value(&self) -> f64 {
        self.decomposition().value()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub valid: bool,
    pub factor_min_eigs: Vec<f64>,
    /// Largest negativity of a factor beyond zero (0 when all PSD).
    pub psd_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Recomputes positivity of every factor and, if `claimed` is given, compares
/// the realization. `β = α*` holds by construction of the type.
pub fn verify_certificate(
    lambda: &LambdaSequence,
    cert: &ConeCertificate,
    claimed: Option<&TensorElement>,
) -> CertificateCheck {
    let mut out = CertificateCheck {
        valid: true,
        factor_min_eigs: Vec::new(),
        psd_residual: 0.0,
        realization_residual: None,
        error: None,
    };
    for v in &cert.factors {
        match v.is_psd(PSD_TOL) {
            Ok(c) => {
                out.factor_min_eigs.push(c.min_eig);
                out.psd_residual = out.psd_residual.max(-c.min_eig);
                out.valid &= c.psd;
            }
            Err(e) => {
                out.valid = false;
                out.error = Some(e.to_string());
            }
        }
    }
    match cert.realize(lambda) {
        Ok(got) => {
            if let Some(want) = claimed {
                let r = got.distance(want);
                out.realization_residual = Some(r);
                out.valid &= got.spec == want.spec && r <= REALIZE_TOL * (1.0 + want.flat.max_abs());
            }
        }
        Err(e) => {
            out.valid = false;
            out.error = Some(e.to_string());
        }
    }
    out
}

/// Direct sum through the (E2) witness at `(j_1, j_2)`.
pub fn cone_add(lambda: &LambdaSequence, c1: &ConeCertificate, c2: &ConeCertificate) -> Result<ConeCertificate> {
    let (s1, s2) = (c1.spec()?, c2.spec()?);
    if s1 != s2 {
        return dim_err(format!("cannot add certificates over {s1:?} and {s2:?}"));
    }
    let p = certified_e2(lambda, c1.level, c2.level)?;
    let alpha = &CMatrix::hstack(&[&c1.alpha, &c2.alpha])? * &p;
    let factors = c1
        .factors
        .iter()
        .zip(&c2.factors)
        .map(|(v, w)| block_assemble(BlockKind::Diag, &[v.clone(), w.clone()]))
        .collect::<Result<Vec<_>>>()?;
    ConeCertificate::new(c1.level + c2.level, alpha, factors)
}

/// `γ* · u · γ` for `γ ∈ M_{n,k}`; the result lives at matrix level `k`.
pub fn compress(cert: &ConeCertificate, gamma: &CMatrix) -> Result<ConeCertificate> {
    if gamma.rows() != cert.alpha.rows() {
        return dim_err(format!(
            "compression {:?} does not match n = {}",
            gamma.shape(),
            cert.alpha.rows()
        ));
    }
    Ok(ConeCertificate {
        level: cert.level,
        alpha: &gamma.adjoint() * &cert.alpha,
        factors: cert.factors.clone(),
        psd_slack: cert.psd_slack.clone(),
    })
}

/// `ε·1 + u` for a certified `u` and a fixed `ε ≥ 0`.
pub fn archimedean_shift(lambda: &LambdaSequence, cert: &ConeCertificate, eps: f64) -> Result<ConeCertificate> {
    if !(eps >= 0.0) {
        return Err(LtError::NotPsd { min_eig: eps });
    }
    let spec = cert.spec()?;
    let shift = scalar_certificate(lambda, &CMatrix::identity(spec.n).scale_real(eps), &spec.dims)?;
    cone_add(lambda, &shift, cert)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Falsification {
    NotInCone,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifierReport {
    pub verdict: Falsification,
    pub min_eig: f64,
    pub scale: f64,
}

/// Necessary condition for membership: the flattening of a cone element is
/// PSD once λ has (O3). Refuses sequences without verified (O3).
pub fn psd_falsifier(lambda: &LambdaSequence, element: &TensorElement) -> Result<FalsifierReport> {
    require_o3(lambda, 2).map_err(|e| LtError::Refused(format!("positivity of {} is not verified: {e}", lambda.name())))?;
    let check = element.flat.is_psd(PSD_TOL)?;
    Ok(FalsifierReport {
        verdict: if check.psd {
            Falsification::Inconclusive
        } else {
            Falsification::NotInCone
        },
        min_eig: check.min_eig,
        scale: check.scale,
    })
}

/// `(|v*|, |v|)`, the corners making `[[v1, v], [v*, v2]]` positive.
pub fn polar_split(v: &CMatrix) -> (CMatrix, CMatrix) {
    (v.abs_adjoint(), v.abs())
}

/// 2n-level certificate for `[[u, z], [z*, u']]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCertificate {
    pub z: TensorElement,
    pub u: TensorElement,
    pub u_prime: TensorElement,
    pub cert: ConeCertificate,
    pub u_cert: ConeCertificate,
    pub u_prime_cert: ConeCertificate,
    pub value: f64,
}

impl BlockCertificate {
    /// Flattening of `[[u, z], [z*, u']]` in the `2n` layout.
    pub fn block(&self) -> TensorElement {
        let s = self.z.flat.rows();
        let mut flat = CMatrix::zeros(2 * s, 2 * s);
        flat.set_block(0, 0, &self.u.flat);
        flat.set_block(0, s, &self.z.flat);
        flat.set_block(s, 0, &self.z.flat.adjoint());
        flat.set_block(s, s, &self.u_prime.flat);
        TensorElement {
            spec: SpaceSpec {
                n: 2 * self.z.spec.n,
                dims: self.z.spec.dims.clone(),
            },
            flat,
        }
    }
}

/// Upper bound on `‖z‖_{Λ,n}` from a decomposition of `z`: polar-split each
/// factor, certify the block with `diag(α, β*)` and the (E2) witness.
pub fn lambda_capital_ub(lambda: &LambdaSequence, dec: &Decomposition) -> Result<BlockCertificate> {
    let z = realize(lambda, dec)?;
    let j = dec.level;
    require_o1(lambda, j)?;
    require_o2(lambda, j)?;
    let p = certified_e2(lambda, j, j)?;
    let (mut alpha, mut beta) = if z.flat.is_zero() {
        (
            CMatrix::zeros(dec.alpha.rows(), dec.alpha.cols()),
            CMatrix::zeros(dec.beta.rows(), dec.beta.cols()),
        )
    } else {
        (dec.alpha.clone(), dec.beta.clone())
    };
    let (na, nb) = (alpha.op_norm(), beta.op_norm());
    if na > 0.0 && nb > 0.0 {
        let c = (nb / na).sqrt();
        alpha = alpha.scale_real(c);
        beta = beta.scale_real(1.0 / c);
    }
    let mut xs = Vec::with_capacity(dec.factors.len());
    let (mut v1s, mut v2s) = (Vec::new(), Vec::new());
    for v in &dec.factors {
        let (v1, v2) = polar_split(v);
        let top = CMatrix::hstack(&[&v1, v])?;
        let bottom = CMatrix::hstack(&[&v.adjoint(), &v2])?;
        xs.push(CMatrix::vstack(&[&top, &bottom])?);
        v1s.push(v1);
        v2s.push(v2);
    }
    let beta_adj = beta.adjoint();
    let alpha_block = &block_assemble(BlockKind::Diag, &[alpha.clone(), beta_adj.clone()])? * &p;
    let cert = ConeCertificate::new(2 * j, alpha_block, xs)?;
    let u_cert = ConeCertificate::new(j, alpha, v1s)?;
    let u_prime_cert = ConeCertificate::new(j, beta_adj, v2s)?;
    let u = u_cert.realize(lambda)?;
    let u_prime = u_prime_cert.realize(lambda)?;
    let value = u_cert.value().max(u_prime_cert.value());
    Ok(BlockCertificate {
        z,
        u,
        u_prime,
        cert,
        u_cert,
        u_prime_cert,
        value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub cert: CertificateCheck,
    pub u: CertificateCheck,
    pub u_prime: CertificateCheck,
    pub valid: bool,
}

pub fn verify_block(lambda: &LambdaSequence, bc: &BlockCertificate) -> BlockCheck {
    let cert = verify_certificate(lambda, &bc.cert, Some(&bc.block()));
    let u = verify_certificate(lambda, &bc.u_cert, Some(&bc.u));
    let u_prime = verify_certificate(lambda, &bc.u_prime_cert, Some(&bc.u_prime));
    let valid = cert.valid && u.valid && u_prime.valid;
    BlockCheck {
        cert,
        u,
        u_prime,
        valid,
    }
}

/// Certificate for `γ ⊗ 1 ⊗ … ⊗ 1`: one level-1 term `a_i ⊗_{λ_1}(1, …, 1) a_i*`
/// per positive eigenpair of `γ`, summed with [`cone_add`].
pub fn scalar_certificate(lambda: &LambdaSequence, gamma: &CMatrix, dims: &[usize]) -> Result<ConeCertificate> {
    let spec = SpaceSpec::new(gamma.rows(), dims.to_vec())?;
    let check = gamma.is_psd(PSD_TOL)?;
    if !check.psd {
        return Err(LtError::NotPsd {
            min_eig: check.min_eig,
        });
    }
    if lambda.tau(1) != 1 {
        return Err(LtError::UnsupportedSequence {
            sequence: lambda.name().into(),
            condition: "scalar certificate (tau(1) = 1)".into(),
        });
    }
    let ones: Vec<CMatrix> = dims.iter().map(|&d| CMatrix::identity(d)).collect();
    let (vals, vecs) = gamma.eigh();
    let cutoff = f64::EPSILON * 16.0 * check.scale;
    let mut acc: Option<ConeCertificate> = None;
    for (k, &l) in vals.iter().enumerate() {
        if l <= cutoff {
            continue;
        }
        let s = l.sqrt();
        let a = CMatrix::from_fn(gamma.rows(), 1, |r, _| vecs[(r, k)] * s);
        let term = ConeCertificate::new(1, a, ones.clone())?;
        acc = Some(match acc {
            None => term,
            Some(prev) => cone_add(lambda, &prev, &term)?,
        });
    }
    match acc {
        Some(c) => Ok(c),
        None => ConeCertificate::zero(lambda, &spec),
    }
}

/// Order-unit data for a self-adjoint `u` (two slots): `K' · 1 ± u ∈ C_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderUnitBound {
    /// `max ‖x_t‖` over the symmetrized factors.
    pub k: f64,
    /// The certified multiple of the unit, `K² ‖α λ_j(1, 1) α*‖`.
    pub k_prime: f64,
    pub plus: ConeCertificate,
    pub minus: ConeCertificate,
}

/// Symmetrizes `u = α ⊗_{λ_j}(x_1, x_2) α*` and certifies `K'·1 ± u` from
/// `(K+x_1)⊗(K±x_2) + (K−x_1)⊗(K∓x_2)` plus the scalar remainder.
pub fn order_unit_bound(lambda: &LambdaSequence, dec: &Decomposition) -> Result<OrderUnitBound> {
    if lambda.arity() != 2 {
        return Err(LtError::Refused(format!(
            "order units are built for two slots, {} has {}",
            lambda.name(),
            lambda.arity()
        )));
    }
    require_o3(lambda, 2).map_err(|e| LtError::Refused(format!("positivity of {} is not verified: {e}", lambda.name())))?;
    let sym = symmetrize(lambda, dec)?;
    let spec = sym.spec()?;
    let k = sym.factors.iter().map(CMatrix::op_norm).fold(0.0, f64::max);
    if k == 0.0 || sym.alpha.is_zero() {
        let zero = ConeCertificate::zero(lambda, &spec)?;
        return Ok(OrderUnitBound {
            k: 0.0,
            k_prime: 0.0,
            plus: zero.clone(),
            minus: zero,
        });
    }
    let j = sym.level;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let alpha = sym.alpha.scale_real(h);
    let shifted = |sign: f64, x: &CMatrix| {
        let id = CMatrix::identity(x.rows()).scale_real(k);
        if sign > 0.0 {
            id.try_add(x)
        } else {
            id.try_sub(x)
        }
    };
    let (x1, x2) = (&sym.factors[0], &sym.factors[1]);
    let term = |s1: f64, s2: f64| -> Result<ConeCertificate> {
        ConeCertificate::new(j, alpha.clone(), vec![shifted(s1, x1)?, shifted(s2, x2)?])
    };
    let ones = CMatrix::identity(j);
    let g = &(&sym.alpha * &lambda.eval(j, &[ones.clone(), ones])?) * &sym.alpha.adjoint();
    let g = g.hermitian_part();
    let k_prime = k * k * g.op_norm();
    let remainder = CMatrix::identity(spec.n)
        .scale_real(k_prime)
        .try_sub(&g.scale_real(k * k))?;
    let remainder = remainder.clip_psd().0;
    let scalar = scalar_certificate(lambda, &remainder, &spec.dims)?;
    let plus = cone_add(lambda, &cone_add(lambda, &term(1.0, 1.0)?, &term(-1.0, -1.0)?)?, &scalar)?;
    let minus = cone_add(lambda, &cone_add(lambda, &term(1.0, -1.0)?, &term(-1.0, 1.0)?)?, &scalar)?;
    Ok(OrderUnitBound {
        k,
        k_prime,
        plus,
        minus,
    })
}

/// `φ(X)` for the map with Choi matrix `C = Σ E_ab ⊗ φ(E_ab)`, `X ∈ M_d`.
pub fn apply_choi(choi: &CMatrix, d: usize, x: &CMatrix) -> Result<CMatrix> {
    if !choi.is_square() || d == 0 || choi.rows() % d != 0 || x.shape() != (d, d) {
        return dim_err(format!("Choi matrix {:?} does not act on M_{d}", choi.shape()));
    }
    let e = choi.rows() / d;
    let mut out = CMatrix::zeros(e, e);
    for a in 0..d {
        for b in 0..d {
            let z = x[(a, b)];
            if z != ZERO {
                out.add_block(0, 0, &choi.sub_block(a * e, b * e, e, e), z);
            }
        }
    }
    Ok(out)
}

/// Blockwise `φ_j` on `v ∈ M_j(M_d)`.
fn amplify(choi: &CMatrix, d: usize, level: usize, v: &CMatrix) -> Result<CMatrix> {
    let e = choi.rows() / d;
    let mut out = CMatrix::zeros(level * e, level * e);
    for i in 0..level {
        for k in 0..level {
            let img = apply_choi(choi, d, &v.sub_block(i * d, k * d, d, d))?;
            out.set_block(i * e, k * e, &img);
        }
    }
    Ok(out)
}

fn require_cp(choi: &CMatrix) -> Result<()> {
    let c = choi.is_psd(PSD_TOL)?;
    if !c.psd {
        return Err(LtError::NotCompletelyPositive { min_eig: c.min_eig });
    }
    Ok(())
}

/// Image of a certificate under `id_n ⊗ φ_1 ⊗ … ⊗ φ_m` for completely positive
/// `φ_t` given by Choi matrices.
pub fn ucp_apply(cert: &ConeCertificate, chois: &[CMatrix]) -> Result<ConeCertificate> {
    let spec = cert.spec()?;
    if chois.len() != spec.dims.len() {
        return Err(LtError::Arity {
            expected: spec.dims.len(),
            got: chois.len(),
        });
    }
    let mut factors = Vec::with_capacity(chois.len());
    for ((choi, &d), v) in chois.iter().zip(&spec.dims).zip(&cert.factors) {
        require_cp(choi)?;
        if choi.rows() % d != 0 {
            return dim_err(format!("Choi matrix {:?} does not act on M_{d}", choi.shape()));
        }
        factors.push(amplify(choi, d, cert.level, v)?);
    }
    ConeCertificate::new(cert.level, cert.alpha.clone(), factors)
}

/// `id_n ⊗ φ_1 ⊗ … ⊗ φ_m` applied to a flattening, one matrix-unit
/// tensor at a time.
pub fn apply_slotwise(element: &TensorElement, chois: &[CMatrix]) -> Result<TensorElement> {
    let dims = &element.spec.dims;
    if chois.len() != dims.len() {
        return Err(LtError::Arity {
            expected: dims.len(),
            got: chois.len(),
        });
    }
    let mut outs = Vec::with_capacity(dims.len());
    for (c, &d) in chois.iter().zip(dims) {
        if !c.is_square() || c.rows() % d != 0 {
            return dim_err(format!("Choi matrix {:?} does not act on M_{d}", c.shape()));
        }
        outs.push(c.rows() / d);
    }
    let n = element.spec.n;
    let d_in: usize = dims.iter().product();
    let d_out: usize = outs.iter().product();
    let m = dims.len();
    let digits = |mut x: usize, base: &[usize]| {
        let mut out = vec![0; base.len()];
        for t in (0..base.len()).rev() {
            out[t] = x % base[t];
            x /= base[t];
        }
        out
    };
    let mut flat = CMatrix::zeros(n * d_out, n * d_out);
    for r in 0..d_in {
        let ra = digits(r, dims);
        for c in 0..d_in {
            let ca = digits(c, dims);
            let images: Vec<CMatrix> = (0..m)
                .map(|t| chois[t].sub_block(ra[t] * outs[t], ca[t] * outs[t], outs[t], outs[t]))
                .collect();
            let img = kron_all(&images);
            for i in 0..n {
                for k in 0..n {
                    let z = element.flat[(i * d_in + r, k * d_in + c)];
                    if z != ZERO {
                        flat.add_block(i * d_out, k * d_out, &img, z);
                    }
                }
            }
        }
    }
    TensorElement::new(SpaceSpec::new(n, outs)?, flat)
}

/// Flattening of `P ⊗ Q ∈ M_{kl}(M_{d_1} ⊗ M_{d_2})` for `P ∈ M_k(M_{d_1})`,
/// `Q ∈ M_l(M_{d_2})`, row index `((i·l + i')·d_1 + x)·d_2 + y`.
pub fn t2_target(p: &CMatrix, k: usize, q: &CMatrix, l: usize) -> Result<TensorElement> {
    if !p.is_square() || !q.is_square() || k == 0 || l == 0 || p.rows() % k != 0 || q.rows() % l != 0 {
        return dim_err(format!("P {:?} / k={k}, Q {:?} / l={l}", p.shape(), q.shape()));
    }
    let (d1, d2) = (p.rows() / k, q.rows() / l);
    let idx = |i: usize, i2: usize, x: usize, y: usize| ((i * l + i2) * d1 + x) * d2 + y;
    let s = k * l * d1 * d2;
    let mut flat = CMatrix::zeros(s, s);
    for i in 0..k {
        for j in 0..k {
            for x in 0..d1 {
                for x2 in 0..d1 {
                    let pv = p[(i * d1 + x, j * d1 + x2)];
                    if pv == ZERO {
                        continue;
                    }
                    for i2 in 0..l {
                        for j2 in 0..l {
                            for y in 0..d2 {
                                for y2 in 0..d2 {
                                    flat[(idx(i, i2, x, y), idx(j, j2, x2, y2))] =
                                        pv * q[(i2 * d2 + y, j2 * d2 + y2)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    TensorElement::new(SpaceSpec::new(k * l, vec![d1, d2])?, flat)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Attempt {
    pub path: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T2Embedding {
    pub cert: ConeCertificate,
    pub path: String,
    pub attempts: Vec<T2Attempt>,
}

/// Certificate for `P ⊗ Q` with `P ≥ 0` in `M_k(M_{d_1})`, `Q ≥ 0` in
/// `M_l(M_{d_2})`. Tries, in order: the literal level-`(k+l)` witness, sums of
/// elementary certificates from rank-one spectral terms, a zero-padded common
/// level, and replicated factors at level `kl`. Every candidate is verified
/// against the flattening of `P ⊗ Q`; the first that verifies is returned.
pub fn t2_embed(lambda: &LambdaSequence, p: &CMatrix, k: usize, q: &CMatrix, l: usize) -> Result<T2Embedding> {
    if lambda.arity() != 2 {
        return Err(LtError::Arity {
            expected: 2,
            got: lambda.arity(),
        });
    }
    let target = t2_target(p, k, q, l)?;
    for m in [p, q] {
        let c = m.is_psd(PSD_TOL)?;
        if !c.psd {
            return Err(LtError::NotPsd { min_eig: c.min_eig });
        }
    }
    let (d1, d2) = (p.rows() / k, q.rows() / l);
    type Builder<'a> = Box<dyn Fn() -> Result<ConeCertificate> + 'a>;
    let paths: Vec<(&str, Builder)> = vec![
        ("literal", Box::new(|| t2_literal(p, k, q, l))),
        ("rank-one-product", Box::new(|| t2_rank_one(lambda, p, k, q, l))),
        ("padded-common-level", Box::new(|| t2_padded(lambda, p, k, q, l, d1, d2))),
        ("replicated-level", Box::new(|| t2_replicated(lambda, p, k, q, l, d1, d2))),
    ];
    let mut attempts = Vec::new();
    for (name, build) in paths {
        let outcome = build().and_then(|cert| {
            let check = verify_certificate(lambda, &cert, Some(&target));
            if check.valid {
                Ok(cert)
            } else {
                Err(LtError::RealizationMismatch {
                    index: 0,
                    residual: check.realization_residual.unwrap_or(f64::INFINITY),
                })
            }
        });
        match outcome {
            Ok(cert) => {
                attempts.push(T2Attempt {
                    path: name.into(),
                    ok: true,
                    detail: "verified".into(),
                });
                return Ok(T2Embedding {
                    cert,
                    path: name.into(),
                    attempts,
                });
            }
            Err(e) => attempts.push(T2Attempt {
                path: name.into(),
                ok: false,
                detail: e.to_string(),
            }),
        }
    }
    let detail = attempts
        .iter()
        .map(|a| format!("{}: {}", a.path, a.detail))
        .collect::<Vec<_>>()
        .join("; ");
    Err(LtError::ConditionFailed {
        sequence: lambda.name().into(),
        condition: "T2".into(),
        level: k + l,
        detail,
    })
}

/// `α = (I_{k+l}, 0, …)` with factors `I_{k+l} ⊗ P`, `I_{k+l} ⊗ Q`, taken at face
/// value. `α` must have `kl` rows and a level-`(k+l)` factor over `M_{d_1}` must
/// be `(k+l)d_1` square; the shapes only agree in degenerate cases.
fn t2_literal(p: &CMatrix, k: usize, q: &CMatrix, l: usize) -> Result<ConeCertificate> {
    let j = k + l;
    if k * l != j {
        return dim_err(format!("alpha = (I_{j}, 0, ...) has {j} rows, the target needs kl = {}", k * l));
    }
    let f1 = kron(&CMatrix::identity(j), p);
    let f2 = kron(&CMatrix::identity(j), q);
    let (d1, d2) = (p.rows() / k, q.rows() / l);
    if f1.rows() != j * d1 || f2.rows() != j * d2 {
        return dim_err(format!(
            "I_{j} ⊗ P is {0}x{0}, a level-{j} factor over M_{d1} is {1}x{1}",
            f1.rows(),
            j * d1
        ));
    }
    Err(LtError::Refused("literal witness has no admissible shape".into()))
}

/// Spectral terms of a PSD matrix, each reshaped to `k × d` and split as
/// `c · u w^T` when it has Schmidt rank one.
fn rank_one_terms(m: &CMatrix, k: usize) -> Result<Vec<(CMatrix, CMatrix)>> {
    let d = m.rows() / k;
    let (vals, vecs) = m.eigh();
    let scale = 1.0 + vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut out = Vec::new();
    for (a, &lam) in vals.iter().enumerate() {
        if lam <= f64::EPSILON * 16.0 * scale {
            continue;
        }
        let r = CMatrix::from_fn(k, d, |i, x| vecs[(i * d + x, a)]);
        let (u, s, v) = r.svd();
        if s.len() > 1 && s[1] > 1e-10 * s[0] {
            return Err(LtError::Refused(format!(
                "spectral vector {a} has Schmidt rank above one ({:.3e})",
                s[1]
            )));
        }
        let c = (lam.sqrt() * s[0]).sqrt();
        let uc = CMatrix::from_fn(k, 1, |i, _| u[(i, 0)] * c);
        // r = s0 · u v*, so the d-side vector is conj(v).
        let w = CMatrix::from_fn(d, 1, |x, _| v[(x, 0)].conj() * c);
        out.push((uc, w));
    }
    Ok(out)
}

fn t2_rank_one(lambda: &LambdaSequence, p: &CMatrix, k: usize, q: &CMatrix, l: usize) -> Result<ConeCertificate> {
    let tp = rank_one_terms(p, k)?;
    let tq = rank_one_terms(q, l)?;
    let (d1, d2) = (p.rows() / k, q.rows() / l);
    if lambda.tau(1) != 1 {
        return Err(LtError::UnsupportedSequence {
            sequence: lambda.name().into(),
            condition: "elementary certificate (tau(1) = 1)".into(),
        });
    }
    let mut acc: Option<ConeCertificate> = None;
    for (u, w) in &tp {
        for (u2, w2) in &tq {
            // P-term u u* ⊗ w w* times Q-term, with the n-index (i, i').
            let alpha = kron(u, u2);
            let f1 = w * &w.adjoint();
            let f2 = w2 * &w2.adjoint();
            let term = ConeCertificate::new(1, alpha, vec![f1, f2])?;
            acc = Some(match acc {
                None => term,
                Some(prev) => cone_add(lambda, &prev, &term)?,
            });
        }
    }
    match acc {
        Some(c) => Ok(c),
        None => ConeCertificate::zero(lambda, &SpaceSpec::new(k * l, vec![d1, d2])?),
    }
}

fn embed_top_left(m: &CMatrix, size: usize) -> CMatrix {
    let mut out = CMatrix::zeros(size, size);
    out.set_block(0, 0, m);
    out
}

/// Both factors zero-padded to level `max(k, l)`, `α` selecting the `(i, i')`
/// entries of the `j × j` grid (Kronecker-type unit expansions).
fn t2_padded(
    lambda: &LambdaSequence,
    p: &CMatrix,
    k: usize,
    q: &CMatrix,
    l: usize,
    d1: usize,
    d2: usize,
) -> Result<ConeCertificate> {
    let j = k.max(l);
    let tau = lambda.tau(j);
    if tau != j * j {
        return dim_err(format!("tau({j}) = {tau}, the padded witness needs {}", j * j));
    }
    let alpha = CMatrix::from_fn(k * l, tau, |r, c| {
        let (i, i2) = (r / l, r % l);
        if c == i * j + i2 {
            ONE
        } else {
            ZERO
        }
    });
    ConeCertificate::new(
        j,
        alpha,
        vec![embed_top_left(p, j * d1), embed_top_left(q, j * d2)],
    )
}

/// Level `kl` with `v_1 = P ⊗ J_l`, `v_2 = J_k ⊗ Q` (reindexed) and `α = I`
/// (Schur-type unit expansions).
fn t2_replicated(
    lambda: &LambdaSequence,
    p: &CMatrix,
    k: usize,
    q: &CMatrix,
    l: usize,
    d1: usize,
    d2: usize,
) -> Result<ConeCertificate> {
    let j = k * l;
    let tau = lambda.tau(j);
    if tau != j {
        return dim_err(format!("tau({j}) = {tau}, the replicated witness needs {j}"));
    }
    let mut v1 = CMatrix::zeros(j * d1, j * d1);
    let mut v2 = CMatrix::zeros(j * d2, j * d2);
    for a in 0..j {
        for b in 0..j {
            let (i, i2, jj, j2) = (a / l, a % l, b / l, b % l);
            v1.set_block(a * d1, b * d1, &p.sub_block(i * d1, jj * d1, d1, d1));
            v2.set_block(a * d2, b * d2, &q.sub_block(i2 * d2, j2 * d2, d2, d2));
        }
    }
    ConeCertificate::new(j, CMatrix::identity(j), vec![v1, v2])
}

/// Choi matrix `Σ E_ab ⊗ φ(E_ab)` of a linear map on `M_d`.
pub fn choi_of(d: usize, map: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let blocks: Vec<Vec<CMatrix>> = (0..d)
        .map(|a| (0..d).map(|b| map(&unit(a + 1, b + 1, d))).collect())
        .collect();
    let e = blocks[0][0].rows();
    let mut out = CMatrix::zeros(d * e, d * e);
    for (a, row) in blocks.iter().enumerate() {
        for (b, blk) in row.iter().enumerate() {
            out.set_block(a * e, b * e, blk);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::C64;
    use crate::sampling;
    use crate::tensorspace::random_decomposition;

    fn kron2() -> LambdaSequence {
        LambdaSequence::kronecker(2).unwrap()
    }

    fn random_cert(seed: u64, l: &LambdaSequence, n: usize, j: usize, dims: &[usize]) -> ConeCertificate {
        let mut rng = sampling::rng(seed);
        let alpha = sampling::gaussian(&mut rng, n, l.tau(j));
        let factors = dims.iter().map(|&d| sampling::wishart(&mut rng, j * d, 2)).collect();
        ConeCertificate::new(j, alpha, factors).unwrap()
    }

    #[test]
    fn unit_certificate_verifies() {
        let l = kron2();
        let one = CMatrix::identity(1);
        let c = ConeCertificate::new(1, one.clone(), vec![one.clone(), one.clone()]).unwrap();
        let want = TensorElement::elementary(&[one.clone(), one]).unwrap();
        assert!(verify_certificate(&l, &c, Some(&want)).valid);
    }

    #[test]
    fn negative_factor_is_reported() {
        let l = kron2();
        let bad = ConeCertificate {
            level: 1,
            alpha: CMatrix::identity(1),
            factors: vec![CMatrix::real_diag(&[1.0, -0.1]), CMatrix::identity(1)],
            psd_slack: vec![0.0, 0.0],
        };
        let r = verify_certificate(&l, &bad, None);
        assert!(!r.valid);
        assert!((r.psd_residual - 0.1).abs() < 1e-12);
        assert!(ConeCertificate::new(1, CMatrix::identity(1), bad.factors.clone()).is_err());
    }

    #[test]
    fn cone_add_is_additive() {
        for l in [kron2(), LambdaSequence::schur(2).unwrap()] {
            let a = random_cert(1, &l, 2, 2, &[2, 1]);
            let b = random_cert(2, &l, 2, 1, &[2, 1]);
            let s = cone_add(&l, &a, &b).unwrap();
            let want = a.realize(&l).unwrap().try_add(&b.realize(&l).unwrap()).unwrap();
            let r = verify_certificate(&l, &s, Some(&want));
            assert!(r.valid && r.realization_residual.unwrap() < 1e-12, "{r:?}");
            let z = ConeCertificate::zero(&l, &a.spec().unwrap()).unwrap();
            let s = cone_add(&l, &a, &z).unwrap();
            assert!(s.realize(&l).unwrap().distance(&a.realize(&l).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn compress_conjugates() {
        let l = kron2();
        let a = random_cert(3, &l, 2, 2, &[2, 2]);
        let u = a.realize(&l).unwrap();
        assert_eq!(compress(&a, &CMatrix::identity(2)).unwrap().realize(&l).unwrap(), u);
        let zero = compress(&a, &CMatrix::zeros(2, 1)).unwrap().realize(&l).unwrap();
        assert!(zero.flat.is_zero());
        let mut rng = sampling::rng(5);
        let g = sampling::gaussian(&mut rng, 2, 3);
        let got = compress(&a, &g).unwrap().realize(&l).unwrap();
        let gi = kron(&g, &CMatrix::identity(4));
        let want = &(&gi.adjoint() * &u.flat) * &gi;
        assert!((&got.flat - &want).max_abs() < 1e-12);
    }

    #[test]
    fn falsifier() {
        let l = kron2();
        let el = TensorElement::new(SpaceSpec::new(1, vec![2, 1]).unwrap(), CMatrix::real_diag(&[1.0, -1.0])).unwrap();
        assert_eq!(psd_falsifier(&l, &el).unwrap().verdict, Falsification::NotInCone);
        let c = random_cert(7, &l, 2, 2, &[2, 2]);
        let u = c.realize(&l).unwrap();
        assert_eq!(psd_falsifier(&l, &u).unwrap().verdict, Falsification::Inconclusive);
        assert_eq!(psd_falsifier(&l, &u.scale_real(-1.0)).unwrap().verdict, Falsification::NotInCone);
        let mp = LambdaSequence::matprod(2).unwrap();
        assert!(matches!(psd_falsifier(&mp, &el), Err(LtError::Refused(_))));
    }

    #[test]
    fn polar_split_examples() {
        let e12 = unit(1, 2, 2);
        let (v1, v2) = polar_split(&e12);
        assert!((&v1 - &unit(1, 1, 2)).max_abs() < 1e-12);
        assert!((&v2 - &unit(2, 2, 2)).max_abs() < 1e-12);
        let z = CMatrix::zeros(2, 2);
        let (a, b) = polar_split(&z);
        assert!(a.is_zero() && b.is_zero());
        let mut rng = sampling::rng(1);
        let v = sampling::gaussian(&mut rng, 3, 3);
        let (v1, v2) = polar_split(&v);
        let block = CMatrix::vstack(&[
            &CMatrix::hstack(&[&v1, &v]).unwrap(),
            &CMatrix::hstack(&[&v.adjoint(), &v2]).unwrap(),
        ])
        .unwrap();
        assert!(block.is_psd(1e-9).unwrap().psd);
        assert!((v1.op_norm() - v.op_norm()).abs() < 1e-9);
    }

    #[test]
    fn capital_bound_on_certified_element() {
        let l = kron2();
        let c = random_cert(9, &l, 2, 2, &[2, 1]);
        let bc = lambda_capital_ub(&l, &c.decomposition()).unwrap();
        assert!(verify_block(&l, &bc).valid);
        assert!(bc.value <= c.value() + 1e-9);
        let top = CMatrix::vstack(&[&CMatrix::identity(2), &CMatrix::zeros(2, 2)]).unwrap();
        let corner = compress(&bc.cert, &top).unwrap();
        assert!(verify_certificate(&l, &corner, Some(&bc.u)).valid);
    }

    #[test]
    fn capital_bound_zero_and_adjoint() {
        let l = LambdaSequence::schur(2).unwrap();
        let mut rng = sampling::rng(3);
        let d = random_decomposition(&mut rng, &l, 2, 2, &[2, 2]).unwrap();
        let bc = lambda_capital_ub(&l, &d).unwrap();
        assert!(verify_block(&l, &bc).valid);
        let ds = crate::tensorspace::star(&l, &d).unwrap();
        let bs = lambda_capital_ub(&l, &ds).unwrap();
        assert!((bc.value - bs.value).abs() < 1e-12);
        let mut dz = d.clone();
        dz.alpha = CMatrix::zeros(2, l.tau(2));
        assert_eq!(lambda_capital_ub(&l, &dz).unwrap().value, 0.0);
    }

    #[test]
    fn scalar_certificates() {
        let l = kron2();
        let c = scalar_certificate(&l, &CMatrix::identity(1), &[1, 1]).unwrap();
        assert_eq!(c.level, 1);
        let c = scalar_certificate(&l, &CMatrix::real_diag(&[2.0, 0.0]), &[2, 1]).unwrap();
        assert_eq!(c.level, 1);
        let want = TensorElement::scalar(&CMatrix::real_diag(&[2.0, 0.0]), &[2, 1]).unwrap();
        assert!(verify_certificate(&l, &c, Some(&want)).valid);
        let mut rng = sampling::rng(8);
        let g = sampling::wishart(&mut rng, 3, 3);
        let c = scalar_certificate(&l, &g, &[2, 2]).unwrap();
        let want = TensorElement::scalar(&g, &[2, 2]).unwrap();
        assert!(c.realize(&l).unwrap().distance(&want) < 1e-12);
        assert!(matches!(
            scalar_certificate(&l, &CMatrix::real_diag(&[1.0, -1.0]), &[1, 1]),
            Err(LtError::NotPsd { .. })
        ));
    }

    #[test]
    fn order_unit_examples() {
        let l = kron2();
        let one = CMatrix::identity(2);
        let d = Decomposition::elementary(&[one.clone(), one.clone()]).unwrap();
        let ob = order_unit_bound(&l, &d).unwrap();
        assert_eq!(ob.k, 1.0);
        let u = realize(&l, &d).unwrap();
        let unit_el = TensorElement::identity(&u.spec).scale_real(ob.k_prime);
        assert!(verify_certificate(&l, &ob.plus, Some(&unit_el.try_add(&u).unwrap())).valid);
        assert!(verify_certificate(&l, &ob.minus, Some(&unit_el.try_add(&u.scale_real(-1.0)).unwrap())).valid);

        let mut dz = d.clone();
        dz.alpha = CMatrix::zeros(1, 1);
        dz.beta = CMatrix::zeros(1, 1);
        assert_eq!(order_unit_bound(&l, &dz).unwrap().k, 0.0);

        let mut rng = sampling::rng(12);
        let a = sampling::gaussian(&mut rng, 2, 4);
        let x1 = sampling::self_adjoint(&mut rng, 4);
        let x2 = sampling::self_adjoint(&mut rng, 2);
        let d = Decomposition::new(2, a.clone(), vec![x1, x2], a.adjoint()).unwrap();
        let u = realize(&l, &d).unwrap();
        let ob = order_unit_bound(&l, &d).unwrap();
        let kp = TensorElement::identity(&u.spec).scale_real(ob.k_prime);
        let plus = kp.try_add(&u).unwrap();
        let minus = kp.try_add(&u.scale_real(-1.0)).unwrap();
        assert!(verify_certificate(&l, &ob.plus, Some(&plus)).valid);
        assert!(verify_certificate(&l, &ob.minus, Some(&minus)).valid);
        assert!(plus.flat.is_psd(1e-9).unwrap().psd && minus.flat.is_psd(1e-9).unwrap().psd);
    }

    #[test]
    fn ucp_identity_and_compression() {
        let l = kron2();
        let c = random_cert(4, &l, 1, 2, &[2, 2]);
        let id = choi_of(2, |x| x.clone());
        let same = ucp_apply(&c, &[id.clone(), id.clone()]).unwrap();
        assert!(same.realize(&l).unwrap().distance(&c.realize(&l).unwrap()) < 1e-12);

        let w = CMatrix::column(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let comp = choi_of(2, |x| &(&w.adjoint() * x) * &w);
        let out = ucp_apply(&c, &[comp.clone(), id.clone()]).unwrap();
        let want = apply_slotwise(&c.realize(&l).unwrap(), &[comp, id]).unwrap();
        assert!(verify_certificate(&l, &out, Some(&want)).valid);
        assert!(matches!(
            ucp_apply(&c, &[choi_of(2, |x| x.transpose()), choi_of(2, |x| x.clone())]),
            Err(LtError::NotCompletelyPositive { .. })
        ));
    }

    #[test]
    fn t2_paths() {
        let l = kron2();
        let one = CMatrix::identity(1);
        let e = t2_embed(&l, &one, 1, &one, 1).unwrap();
        assert_eq!(e.path, "rank-one-product");
        assert!(!e.attempts[0].ok);
        assert_eq!(e.cert.level, 1);

        let mut rng = sampling::rng(6);
        let p = sampling::wishart(&mut rng, 2, 2);
        let q = sampling::wishart(&mut rng, 2, 2);
        let e = t2_embed(&l, &p, 2, &q, 2).unwrap();
        let want = t2_target(&p, 2, &q, 2).unwrap();
        assert!(e.cert.realize(&l).unwrap().distance(&want) < 1e-12);

        // Entangled P (k = d = 2): no rank-one split, padded path for Kronecker.
        let p = sampling::wishart(&mut rng, 4, 4);
        let q = sampling::wishart(&mut rng, 2, 2);
        let e = t2_embed(&l, &p, 2, &q, 1).unwrap();
        assert_eq!(e.path, "padded-common-level");
        let s = LambdaSequence::schur(2).unwrap();
        let e = t2_embed(&s, &p, 2, &q, 1).unwrap();
        assert_eq!(e.path, "replicated-level");
        assert!(verify_certificate(&s, &e.cert, Some(&t2_target(&p, 2, &q, 1).unwrap())).valid);
    }
}
