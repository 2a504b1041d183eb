//! Dense complex matrix kernel.
//!
//! [`CMatrix`] stores entries row-major as pairs of `f64`. Spectral work
//! (SVD, Hermitian eigendecomposition) is delegated to `nalgebra`, which is
//! deterministic for a fixed input. Everything else (products, Kronecker and
//! Schur products, block assembly) is implemented directly on the row-major
//! buffer.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{dim_err, LtError, Result};

pub type C64 = num_complex::Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Outcome of a positive-semidefiniteness test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdCheck {
    pub psd: bool,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eig: f64,
    /// Frobenius norm of `A - A*`.
    pub asymmetry: f64,
    /// `1 + spectral radius of the Hermitian part`; tolerances are relative to it.
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Diag,
    Adiag,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            ));
        }
        if let Some(p) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LtError::NonFinite {
                row: p / cols.max(1),
                col: p % cols.max(1),
            });
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn scalar(z: C64) -> Self {
        CMatrix {
            rows: 1,
            cols: 1,
            data: vec![z],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return dim_err("ragged rows");
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn from_real(rows: usize, cols: usize, vals: &[f64]) -> Result<Self> {
        Self::new(rows, cols, vals.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag(vals: &[C64]) -> Self {
        let n = vals.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in vals.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn real_diag(vals: &[f64]) -> Self {
        Self::diag(&vals.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>())
    }

    /// Column vector.
    pub fn column(vals: &[C64]) -> Self {
        CMatrix {
            rows: vals.len(),
            cols: 1,
            data: vals.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.cols.max(1)).map(<[C64]>::to_vec).take(self.rows).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, z: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * z).collect(),
        }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(C64::new(x, 0.0))
    }

    pub fn try_mul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return dim_err(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            ));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn try_add(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.shape() != rhs.shape() {
            return dim_err(format!("sum of {:?} and {:?}", self.shape(), rhs.shape()));
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn try_sub(&self, rhs: &CMatrix) -> Result<CMatrix> {
        self.try_add(&-rhs)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        op_norm(self)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&z| z == ZERO)
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        assert!(self.is_square(), "hermitian part of a non-square matrix");
        Self::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    pub fn sub_block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> CMatrix {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        Self::from_fn(nr, nc, |r, c| self[(r0 + r, c0 + c)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block out of range"
        );
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] = block[(r, c)];
            }
        }
    }

    pub fn add_block(&mut self, r0: usize, c0: usize, block: &CMatrix, z: C64) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] += block[(r, c)] * z;
            }
        }
    }

    /// `[A B]`.
    pub fn hstack(parts: &[&CMatrix]) -> Result<CMatrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        if parts.iter().any(|m| m.rows != rows) {
            return dim_err("hstack with unequal row counts");
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let mut c0 = 0;
        for m in parts {
            out.set_block(0, c0, m);
            c0 += m.cols;
        }
        Ok(out)
    }

    /// `[A; B]`.
    pub fn vstack(parts: &[&CMatrix]) -> Result<CMatrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        if parts.iter().any(|m| m.cols != cols) {
            return dim_err("vstack with unequal column counts");
        }
        let rows = parts.iter().map(|m| m.rows).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let mut r0 = 0;
        for m in parts {
            out.set_block(r0, 0, m);
            r0 += m.rows;
        }
        Ok(out)
    }

    /// Hermitian eigendecomposition of the Hermitian part; eigenvalues ascending.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let h = self.hermitian_part();
        let n = h.rows;
        if n == 0 {
            return (Vec::new(), CMatrix::zeros(0, 0));
        }
        let eig = nalgebra::linalg::SymmetricEigen::new(to_na(&h));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        (vals, vecs)
    }

    /// Thin SVD `A = U diag(s) V*`, singular values descending.
    pub fn svd(&self) -> (CMatrix, Vec<f64>, CMatrix) {
        let k = self.rows.min(self.cols);
        if k == 0 {
            return (
                CMatrix::zeros(self.rows, 0),
                Vec::new(),
                CMatrix::zeros(self.cols, 0),
            );
        }
        let svd = to_na(self).svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let s = order.iter().map(|&i| svd.singular_values[i]).collect();
        let uu = CMatrix::from_fn(self.rows, k, |r, c| u[(r, order[c])]);
        // v_t holds V*, so V[r, c] = conj(v_t[c, r]).
        let vv = CMatrix::from_fn(self.cols, k, |r, c| v_t[(order[c], r)].conj());
        (uu, s, vv)
    }

    /// Positive square root of `A* A`.
    pub fn abs(&self) -> CMatrix {
        let (_, s, v) = self.svd();
        weighted_gram(&v, &s)
    }

    /// Positive square root of `A A*`.
    pub fn abs_adjoint(&self) -> CMatrix {
        let (u, s, _) = self.svd();
        weighted_gram(&u, &s)
    }

    pub fn is_psd(&self, tol: f64) -> Result<PsdCheck> {
        is_psd(self, tol)
    }

    /// Replaces negative eigenvalues of the Hermitian part by zero; returns the
    /// repaired matrix and the magnitude clipped.
    pub fn clip_psd(&self) -> (CMatrix, f64) {
        let (vals, vecs) = self.eigh();
        let clipped = vals.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
        if clipped == 0.0 {
            return (self.hermitian_part(), 0.0);
        }
        let w: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let n = self.rows;
        let out = CMatrix::from_fn(n, n, |r, c| {
            (0..n)
                .map(|k| vecs[(r, k)] * vecs[(c, k)].conj() * w[k])
                .sum()
        });
        (out, clipped)
    }
}

fn weighted_gram(u: &CMatrix, s: &[f64]) -> CMatrix {
    let n = u.rows;
    CMatrix::from_fn(n, n, |r, c| {
        s.iter()
            .enumerate()
            .map(|(k, &w)| u[(r, k)] * u[(c, k)].conj() * w)
            .sum()
    })
}

fn to_na(m: &CMatrix) -> DMatrix<C64> {
    DMatrix::from_row_slice(m.rows, m.cols, &m.data)
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.try_mul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.try_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.try_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl Sub<CMatrix> for CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: CMatrix) -> CMatrix {
        &self - &rhs
    }
}

impl Add<CMatrix> for CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: CMatrix) -> CMatrix {
        &self + &rhs
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|r| (0..self.cols).map(|c| {
                let z = self[(r, c)];
                [z.re, z.im]
            }).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let cooked: Vec<Vec<C64>> = rows
            .into_iter()
            .map(|row| row.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        CMatrix::from_rows(&cooked).map_err(D::Error::custom)
    }
}

/// `ε_{i,j}^{[k,l]}` with 1-based indices; all-zero when `(i, j)` is out of range.
pub fn matrix_unit(i: usize, j: usize, k: usize, l: usize) -> CMatrix {
    let mut m = CMatrix::zeros(k, l);
    if (1..=k).contains(&i) && (1..=l).contains(&j) {
        m[(i - 1, j - 1)] = ONE;
    }
    m
}

/// Square unit `ε_{i,j}^{[k]}`, 1-based.
pub fn unit(i: usize, j: usize, k: usize) -> CMatrix {
    matrix_unit(i, j, k, k)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::scalar(ONE), |acc, f| kron(&acc, f))
}

pub fn schur(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.shape() != b.shape() {
        return dim_err(format!("schur product of {:?} and {:?}", a.shape(), b.shape()));
    }
    Ok(CMatrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    })
}

pub fn op_norm(a: &CMatrix) -> f64 {
    if a.rows == 0 || a.cols == 0 || a.is_zero() {
        return 0.0;
    }
    to_na(a)
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// PSD test with tolerance relative to `1 + ρ(H)`, `H` the Hermitian part.
pub fn is_psd(a: &CMatrix, tol: f64) -> Result<PsdCheck> {
    if !a.is_square() {
        return dim_err(format!("psd test on a {}x{} matrix", a.rows, a.cols));
    }
    if a.rows == 0 {
        return Ok(PsdCheck {
            psd: true,
            min_eig: 0.0,
            asymmetry: 0.0,
            scale: 1.0,
        });
    }
    let asymmetry = (a - &a.adjoint()).fro_norm();
    let (vals, _) = a.eigh();
    let min_eig = vals[0];
    let radius = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = 1.0 + radius;
    Ok(PsdCheck {
        psd: asymmetry <= tol * scale && min_eig >= -tol * scale,
        min_eig,
        asymmetry,
        scale,
    })
}

/// Block-diagonal or 2x2 anti-diagonal assembly.
pub fn block_assemble(kind: BlockKind, blocks: &[CMatrix]) -> Result<CMatrix> {
    match kind {
        BlockKind::Diag => {
            let rows = blocks.iter().map(CMatrix::rows).sum();
            let cols = blocks.iter().map(CMatrix::cols).sum();
            let mut out = CMatrix::zeros(rows, cols);
            let (mut r0, mut c0) = (0, 0);
            for b in blocks {
                out.set_block(r0, c0, b);
                r0 += b.rows;
                c0 += b.cols;
            }
            Ok(out)
        }
        BlockKind::Adiag => {
            let [x, y] = blocks else {
                return dim_err(format!("adiag needs exactly two blocks, got {}", blocks.len()));
            };
            if !x.is_square() || x.shape() != y.shape() {
                return dim_err("adiag blocks must be square and of equal size");
            }
            let n = x.rows;
            let mut out = CMatrix::zeros(2 * n, 2 * n);
            out.set_block(0, n, x);
            out.set_block(n, 0, y);
            Ok(out)
        }
    }
}

/// Sparse matrix as a sorted coordinate map; used for the integer-valued
/// identities checked on matrix units.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseMat {
    pub rows: usize,
    pub cols: usize,
    pub entries: BTreeMap<(usize, usize), C64>,
}

impl SparseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMat {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn unit(rows: usize, cols: usize, r: usize, c: usize) -> Self {
        let mut s = Self::zeros(rows, cols);
        s.entries.insert((r, c), ONE);
        s
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let mut s = Self::zeros(m.rows, m.cols);
        for r in 0..m.rows {
            for c in 0..m.cols {
                let z = m[(r, c)];
                if z != ZERO {
                    s.entries.insert((r, c), z);
                }
            }
        }
        s
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for (&(r, c), &z) in &self.entries {
            m[(r, c)] = z;
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|&z| z == ZERO)
    }

    pub fn adjoint(&self) -> Self {
        SparseMat {
            rows: self.cols,
            cols: self.rows,
            entries: self.entries.iter().map(|(&(r, c), z)| ((c, r), z.conj())).collect(),
        }
    }

    pub fn kron(&self, other: &SparseMat) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for (&(r1, c1), &a) in &self.entries {
            for (&(r2, c2), &b) in &other.entries {
                out.entries.insert((r1 * other.rows + r2, c1 * other.cols + c2), a * b);
            }
        }
        out
    }

    /// Embeds as the `(block_r, block_c)` block of a 2x2 block matrix.
    pub fn place(&self, block_r: usize, block_c: usize) -> Self {
        SparseMat {
            rows: 2 * self.rows,
            cols: 2 * self.cols,
            entries: self
                .entries
                .iter()
                .map(|(&(r, c), &z)| ((r + block_r * self.rows, c + block_c * self.cols), z))
                .collect(),
        }
    }

    pub fn add(&self, other: &SparseMat) -> Self {
        let mut out = self.clone();
        for (&k, &z) in &other.entries {
            *out.entries.entry(k).or_insert(ZERO) += z;
        }
        out
    }

    /// Largest entrywise and Frobenius difference.
    pub fn diff(&self, other: &SparseMat) -> (f64, f64) {
        let mut max = 0.0_f64;
        let mut fro = 0.0_f64;
        let mut visit = |d: f64| {
            max = max.max(d);
            fro += d * d;
        };
        for (k, &a) in &self.entries {
            let b = other.entries.get(k).copied().unwrap_or(ZERO);
            visit((a - b).norm());
        }
        for (k, &b) in &other.entries {
            if !self.entries.contains_key(k) {
                visit(b.norm());
            }
        }
        (max, fro.sqrt())
    }
}

/// Dense matrix indexed for sparse sandwich products `L X R`.
#[derive(Clone, Debug)]
pub struct SandwichOperand {
    rows: usize,
    cols: usize,
    /// For each column of `L`: its nonzero (row, value) pairs.
    by_col: Vec<Vec<(usize, C64)>>,
}

impl SandwichOperand {
    pub fn new(m: &CMatrix) -> Self {
        let mut by_col = vec![Vec::new(); m.cols];
        for r in 0..m.rows {
            for (c, col) in by_col.iter_mut().enumerate() {
                let z = m[(r, c)];
                if z != ZERO {
                    col.push((r, z));
                }
            }
        }
        SandwichOperand {
            rows: m.rows,
            cols: m.cols,
            by_col,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// `L X R` where `right_t` holds `R^T` (so its columns are the rows of `R`).
pub fn sandwich(left: &SandwichOperand, x: &SparseMat, right_t: &SandwichOperand) -> SparseMat {
    let mut out = SparseMat::zeros(left.rows, right_t.rows);
    for (&(c, d), &v) in &x.entries {
        for &(a, l) in &left.by_col[c] {
            for &(b, r) in &right_t.by_col[d] {
                *out.entries.entry((a, b)).or_insert(ZERO) += l * v * r;
            }
        }
    }
    out.entries.retain(|_, z| *z != ZERO);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn matrix_unit_examples() {
        assert_eq!(matrix_unit(1, 1, 2, 2), CMatrix::from_real(2, 2, &[1., 0., 0., 0.]).unwrap());
        assert!(matrix_unit(3, 1, 2, 2).is_zero());
        let e = matrix_unit(2, 1, 2, 3);
        assert_eq!(e.shape(), (2, 3));
        assert_eq!(e[(1, 0)], ONE);
        assert_eq!(e.fro_norm(), 1.0);
    }

    #[test]
    fn matrix_unit_multiplication_table() {
        for n in 1..=4 {
            for i in 1..=n {
                for j in 1..=n {
                    for k in 1..=n {
                        for l in 1..=n {
                            let p = &unit(i, j, n) * &unit(k, l, n);
                            let expect = if j == k { unit(i, l, n) } else { CMatrix::zeros(n, n) };
                            assert_eq!(p, expect);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&CMatrix::identity(2), &CMatrix::identity(3)), CMatrix::identity(6));
        // (i-1)*2 + k with (i,k) = (1,2) -> row 2, (j,l) = (2,1) -> col 3.
        assert_eq!(kron(&unit(1, 2, 2), &unit(2, 1, 2)), unit(2, 3, 4));
        let d = kron(&CMatrix::real_diag(&[1., 2.]), &CMatrix::real_diag(&[3., 4.]));
        assert_eq!(d, CMatrix::real_diag(&[3., 4., 6., 8.]));
    }

    #[test]
    fn schur_examples() {
        let a = CMatrix::from_real(2, 2, &[1., 2., 3., 4.]).unwrap();
        let j = CMatrix::from_real(2, 2, &[1., 1., 1., 1.]).unwrap();
        assert_eq!(schur(&j, &a).unwrap(), a);
        assert_eq!(schur(&unit(1, 2, 2), &unit(1, 2, 2)).unwrap(), unit(1, 2, 2));
        assert!(schur(&unit(1, 2, 2), &unit(2, 1, 2)).unwrap().is_zero());
        assert!(matches!(
            schur(&CMatrix::identity(2), &CMatrix::identity(3)),
            Err(LtError::Dimension(_))
        ));
    }

    #[test]
    fn op_norm_examples() {
        assert!((op_norm(&CMatrix::identity(4)) - 1.0).abs() < 1e-14);
        assert!((op_norm(&unit(1, 2, 2)) - 1.0).abs() < 1e-14);
        let a = CMatrix::from_real(2, 2, &[1., 2., 0., 1.]).unwrap();
        let b = CMatrix::from_real(2, 2, &[0., 3., -1., 0.]).unwrap();
        let lhs = op_norm(&kron(&a, &b));
        assert!((lhs - op_norm(&a) * op_norm(&b)).abs() < 1e-12);
    }

    #[test]
    fn psd_examples() {
        let r = is_psd(&CMatrix::identity(3), 1e-9).unwrap();
        assert!(r.psd);
        assert!((r.min_eig - 1.0).abs() < 1e-14);
        let r = is_psd(&CMatrix::real_diag(&[1., -1.]), 1e-9).unwrap();
        assert!(!r.psd);
        assert!((r.min_eig + 1.0).abs() < 1e-14);
        assert!(is_psd(&CMatrix::zeros(2, 3), 1e-9).is_err());
        // Hermitian part PSD but matrix far from self-adjoint.
        let skew = CMatrix::from_real(2, 2, &[1., 1., -1., 1.]).unwrap();
        assert!(!is_psd(&skew, 1e-9).unwrap().psd);
    }

    #[test]
    fn polar_block_is_psd() {
        let v = CMatrix::new(
            2,
            2,
            vec![C64::new(0.3, -1.0), c(2.0), C64::new(0.0, 0.5), c(-0.7)],
        )
        .unwrap();
        let blk = CMatrix::vstack(&[
            &CMatrix::hstack(&[&v.abs_adjoint(), &v]).unwrap(),
            &CMatrix::hstack(&[&v.adjoint(), &v.abs()]).unwrap(),
        ])
        .unwrap();
        let r = is_psd(&blk, 1e-9).unwrap();
        assert!(r.psd, "{r:?}");
        // Oracle: the block is unitarily equivalent to diag(2s, 0) via the SVD.
        let (_, s, _) = v.svd();
        let (vals, _) = blk.eigh();
        let mut expect: Vec<f64> = s.iter().map(|x| 2.0 * x).chain([0.0, 0.0]).collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn block_assemble_examples() {
        let d = block_assemble(BlockKind::Diag, &[CMatrix::identity(1), CMatrix::identity(2)]).unwrap();
        assert_eq!(d, CMatrix::identity(3));
        let a = block_assemble(BlockKind::Adiag, &[unit(1, 1, 1), CMatrix::zeros(1, 1)]).unwrap();
        assert_eq!(a, CMatrix::from_real(2, 2, &[0., 1., 0., 0.]).unwrap());
        let x = CMatrix::new(2, 2, vec![c(1.), C64::new(0., 2.), c(3.), c(4.)]).unwrap();
        let s = block_assemble(BlockKind::Adiag, &[x.clone(), x.adjoint()]).unwrap();
        assert_eq!(s, s.adjoint());
        assert!(block_assemble(BlockKind::Adiag, &[x]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            CMatrix::new(1, 2, vec![ONE, C64::new(f64::NAN, 0.0)]),
            Err(LtError::NonFinite { row: 0, col: 1 })
        ));
        assert!(CMatrix::new(2, 2, vec![ONE]).is_err());
    }

    #[test]
    fn json_shape() {
        let m = CMatrix::new(1, 2, vec![C64::new(1.0, -2.0), ZERO]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[1.0,-2.0],[0.0,0.0]]]");
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<CMatrix>("[[[1,0]],[[1,0],[2,0]]]").is_err());
    }

    #[test]
    fn sandwich_matches_dense() {
        let l = CMatrix::from_real(2, 3, &[1., 0., 2., 0., -1., 0.]).unwrap();
        let r = CMatrix::from_real(3, 2, &[0., 1., 1., 0., 3., 0.]).unwrap();
        let x = SparseMat::unit(3, 3, 2, 0).add(&SparseMat::unit(3, 3, 1, 1));
        let got = sandwich(&SandwichOperand::new(&l), &x, &SandwichOperand::new(&r.transpose()));
        let expect = &(&l * &x.to_dense()) * &r;
        assert_eq!(got.to_dense(), expect);
    }
}
