//! Independent reference implementations used by the integration tests.
//! Nothing here goes through the library's unit tables or witnesses.

#![allow(dead_code)]

use lt_core::{CMatrix, C64};

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Plain nested-loop Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.cols(), b.rows());
    CMatrix::from_fn(a.rows(), b.cols(), |r, c| (0..a.cols()).map(|k| a[(r, k)] * b[(k, c)]).sum())
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.cols(), a.rows(), |r, c| a[(c, r)].conj())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |r, c| if r == c { C64::new(1.0, 0.0) } else { zero() })
}

pub fn unit(i: usize, j: usize, k: usize) -> CMatrix {
    CMatrix::from_fn(k, k, |r, c| if r == i && c == j { C64::new(1.0, 0.0) } else { zero() })
}

/// Largest entrywise difference relative to `1 + max|b|`.
pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut d: f64 = 0.0;
    let mut s: f64 = 0.0;
    for r in 0..a.rows() {
        for c in 0..a.cols() {
            d = d.max((a[(r, c)] - b[(r, c)]).norm());
            s = s.max(b[(r, c)].norm());
        }
    }
    d / (1.0 + s)
}

/// How a reference λ multiplies one group of arguments.
#[derive(Clone, Copy, Debug)]
pub enum RefProduct {
    Kron,
    Schur,
    Matprod,
}

/// Reference λ: consecutive groups, each combined by its product, groups
/// joined by Kronecker products.
#[derive(Clone, Debug)]
pub struct RefLambda {
    pub groups: Vec<(usize, RefProduct)>,
}

impl RefLambda {
    pub fn arity(&self) -> usize {
        self.groups.iter().map(|g| g.0).sum()
    }

    pub fn eval(&self, args: &[CMatrix]) -> CMatrix {
        let mut out = CMatrix::from_fn(1, 1, |_, _| C64::new(1.0, 0.0));
        let mut at = 0;
        for &(len, prod) in &self.groups {
            let part = &args[at..at + len];
            at += len;
            let g = match prod {
                RefProduct::Kron => part.iter().skip(1).fold(part[0].clone(), |acc, x| kron(&acc, x)),
                RefProduct::Schur => {
                    let n = part[0].rows();
                    CMatrix::from_fn(n, n, |r, c| part.iter().map(|x| x[(r, c)]).product())
                }
                RefProduct::Matprod => part.iter().skip(1).fold(part[0].clone(), |acc, x| matmul(&acc, x)),
            };
            out = kron(&out, &g);
        }
        out
    }
}

/// Brute-force flattening of `α ⊗_{λ_j}(v_1, …, v_m) β`: sum over every
/// matrix-unit tuple of `λ_j(units) ⊗ v_1[a_1,b_1] ⊗ … ⊗ v_m[a_m,b_m]`.
pub fn brute_realize(l: &RefLambda, j: usize, alpha: &CMatrix, factors: &[CMatrix], beta: &CMatrix) -> CMatrix {
    let m = factors.len();
    let dims: Vec<usize> = factors.iter().map(|v| v.rows() / j).collect();
    let big_d: usize = dims.iter().product();
    let tau = alpha.cols();
    let mut t = CMatrix::from_fn(tau * big_d, tau * big_d, |_, _| zero());
    let total = (j * j).pow(m as u32);
    for code in 0..total {
        let mut x = code;
        let mut pairs = vec![(0, 0); m];
        for p in pairs.iter_mut().rev() {
            let q = x % (j * j);
            x /= j * j;
            *p = (q / j, q % j);
        }
        let units: Vec<CMatrix> = pairs.iter().map(|&(a, b)| unit(a, b, j)).collect();
        let lam = l.eval(&units);
        let blocks: Vec<CMatrix> = pairs
            .iter()
            .zip(factors)
            .zip(&dims)
            .map(|((&(a, b), v), &d)| CMatrix::from_fn(d, d, |r, c| v[(a * d + r, b * d + c)]))
            .collect();
        let inner = blocks.iter().skip(1).fold(blocks[0].clone(), |acc, b| kron(&acc, b));
        let term = kron(&lam, &inner);
        for r in 0..term.rows() {
            for c in 0..term.cols() {
                t[(r, c)] += term[(r, c)];
            }
        }
    }
    let id = identity(big_d);
    matmul(&matmul(&kron(alpha, &id), &t), &kron(beta, &id))
}

/// Smallest eigenvalue of a Hermitian matrix through a real symmetric
/// embedding `[[Re, -Im], [Im, Re]]` and nalgebra-free Jacobi sweeps.
pub fn min_eig(a: &CMatrix) -> f64 {
    let n = a.rows();
    let m = 2 * n;
    let mut s = vec![vec![0.0; m]; m];
    for r in 0..n {
        for c in 0..n {
            let z = (a[(r, c)] + a[(c, r)].conj()) * 0.5;
            s[r][c] = z.re;
            s[r + n][c + n] = z.re;
            s[r][c + n] = -z.im;
            s[r + n][c] = z.im;
        }
    }
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..m {
            for q in p + 1..m {
                off += s[p][q] * s[p][q];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if s[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = c * skp - sn * skq;
                    s[k][q] = sn * skp + c * skq;
                }
                for k in 0..m {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = c * spk - sn * sqk;
                    s[q][k] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..m).map(|i| s[i][i]).fold(f64::INFINITY, f64::min)
}

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.data().iter().fold(0.0, |m, z| m.max(z.norm()))
}
