//! Lambda sequences: families of m-linear maps `λ_k : M_k × … × M_k → M_{τ(k)}`.
//!
//! Builtin sequences (Kronecker, Schur, matrix product and their mixtures) are
//! described by an ordered list of slot groups. Within a group the base product
//! is applied; groups are combined by the Kronecker product. Every builtin
//! output index is a row-major multi-index over a list of *axes*, one axis per
//! slot of a Kronecker group and one axis per Schur or matrix-product group.
//! All witnesses below are expressed in terms of that axis layout.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, LtError, Result};
use crate::matcore::{kron, kron_all, CMatrix, SparseMat, C64, ONE, ZERO};

/// Base product used inside one slot group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Product {
    Kronecker,
    Schur,
    #[serde(alias = "matrix")]
    Matprod,
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Product::Kronecker => "kronecker",
            Product::Schur => "schur",
            Product::Matprod => "matprod",
        })
    }
}

/// Contiguous run of slots `start..start + len` (0-based) sharing one product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Group {
    pub start: usize,
    pub len: usize,
    pub product: Product,
}

impl Group {
    fn axes(&self) -> usize {
        match self.product {
            Product::Kronecker => self.len,
            Product::Schur | Product::Matprod => 1,
        }
    }
}

/// JSON form of one group; slots are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub slots: Vec<usize>,
    pub product: Product,
}

/// JSON form of a builtin sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LambdaSpec {
    Kronecker { arity: usize },
    Schur { arity: usize },
    Matprod { arity: usize },
    Mixed { groups: Vec<GroupSpec> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaKind {
    Kronecker,
    Schur,
    Matprod,
    Mixed,
    Custom,
}

/// `(p, S, T, a_1..a_k)` for the selection identity.
#[derive(Clone, Debug)]
pub struct E1Witness {
    pub p: usize,
    pub s: CMatrix,
    pub t: CMatrix,
    pub a: Vec<CMatrix>,
}

/// Optional witness supplier for custom sequences. Every method defaults to
/// "not available".
pub trait WitnessProvider: Send + Sync {
    fn e1(&self, _k: usize) -> Option<E1Witness> {
        None
    }
    fn e2(&self, _r: usize, _s: usize) -> Option<CMatrix> {
        None
    }
    /// `(P, Q)` for the given level and 1-based slot.
    fn w1(&self, _p: usize, _slot: usize) -> Option<(CMatrix, CMatrix)> {
        None
    }
    /// `(S, T)` for levels `p`, `q`.
    fn w2(&self, _p: usize, _q: usize) -> Option<(CMatrix, CMatrix)> {
        None
    }
}

pub type EvalFn = Arc<dyn Fn(usize, &[CMatrix]) -> Result<CMatrix> + Send + Sync>;
pub type TauFn = Arc<dyn Fn(usize) -> usize + Send + Sync>;

#[derive(Clone)]
enum Body {
    Builtin(Vec<Group>),
    Custom {
        tau: TauFn,
        eval: EvalFn,
        provider: Option<Arc<dyn WitnessProvider>>,
    },
}

/// A λ-sequence of fixed arity.
#[derive(Clone)]
pub struct LambdaSequence {
    name: String,
    arity: usize,
    kind: LambdaKind,
    body: Body,
}

impl fmt::Debug for LambdaSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LambdaSequence")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("kind", &self.kind)
            .finish()
    }
}

/// One nonzero term of the unit expansion at a fixed level: the slot index
/// pairs and the nonzero entries of `λ_k(ε_{i_1,j_1}, …, ε_{i_m,j_m})`.
#[derive(Clone, Debug)]
pub struct UnitTerm {
    pub pairs: Vec<(usize, usize)>,
    pub entries: Vec<(usize, usize, C64)>,
}

/// All nonzero unit images of `λ_k`, in lexicographic tuple order.
#[derive(Clone, Debug)]
pub struct UnitTable {
    pub level: usize,
    pub tau: usize,
    pub terms: Vec<UnitTerm>,
}

/// Largest number of unit tuples a table may enumerate.
pub const UNIT_TABLE_CAP: usize = 4_000_000;

impl LambdaSequence {
    pub fn kronecker(arity: usize) -> Result<Self> {
        Self::uniform(arity, Product::Kronecker)
    }

    pub fn schur(arity: usize) -> Result<Self> {
        Self::uniform(arity, Product::Schur)
    }

    pub fn matprod(arity: usize) -> Result<Self> {
        Self::uniform(arity, Product::Matprod)
    }

    fn uniform(arity: usize, product: Product) -> Result<Self> {
        if arity == 0 {
            return Err(LtError::InvalidSpec("arity must be at least 1".into()));
        }
        let kind = match product {
            Product::Kronecker => LambdaKind::Kronecker,
            Product::Schur => LambdaKind::Schur,
            Product::Matprod => LambdaKind::Matprod,
        };
        Ok(LambdaSequence {
            name: format!("{product}{arity}"),
            arity,
            kind,
            body: Body::Builtin(vec![Group {
                start: 0,
                len: arity,
                product,
            }]),
        })
    }

    /// Mixed sequence from 1-based slot groups; groups must cover `1..=m`
    /// contiguously and in order.
    pub fn mixed(groups: &[GroupSpec]) -> Result<Self> {
        if groups.is_empty() {
            return Err(LtError::InvalidSpec("mixed sequence needs at least one group".into()));
        }
        let mut next = 1;
        let mut out = Vec::with_capacity(groups.len());
        for g in groups {
            if g.slots.is_empty() {
                return Err(LtError::InvalidSpec("empty slot group".into()));
            }
            for (offset, &s) in g.slots.iter().enumerate() {
                if s != next + offset {
                    return Err(LtError::InvalidSpec(format!(
                        "slot groups must be contiguous and ordered; expected slot {}, found {s}",
                        next + offset
                    )));
                }
            }
            out.push(Group {
                start: next - 1,
                len: g.slots.len(),
                product: g.product,
            });
            next += g.slots.len();
        }
        let name = out
            .iter()
            .map(|g| format!("{}{}", g.product, g.len))
            .collect::<Vec<_>>()
            .join("*");
        Ok(LambdaSequence {
            name: format!("mixed({name})"),
            arity: next - 1,
            kind: LambdaKind::Mixed,
            body: Body::Builtin(out),
        })
    }

    pub fn from_spec(spec: &LambdaSpec) -> Result<Self> {
        match spec {
            LambdaSpec::Kronecker { arity } => Self::kronecker(*arity),
            LambdaSpec::Schur { arity } => Self::schur(*arity),
            LambdaSpec::Matprod { arity } => Self::matprod(*arity),
            LambdaSpec::Mixed { groups } => Self::mixed(groups),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: LambdaSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    /// User-defined sequence. `eval` receives the level and `arity` matrices of
    /// size `k × k` (already validated) and must return a `τ(k) × τ(k)` matrix.
    pub fn custom(
        name: impl Into<String>,
        arity: usize,
        tau: TauFn,
        eval: EvalFn,
        provider: Option<Arc<dyn WitnessProvider>>,
    ) -> Result<Self> {
        if arity == 0 {
            return Err(LtError::InvalidSpec("arity must be at least 1".into()));
        }
        Ok(LambdaSequence {
            name: name.into(),
            arity,
            kind: LambdaKind::Custom,
            body: Body::Custom {
                tau,
                eval,
                provider,
            },
        })
    }

    /// JSON descriptor, `None` for custom sequences.
    pub fn spec(&self) -> Option<LambdaSpec> {
        let Body::Builtin(groups) = &self.body else {
            return None;
        };
        Some(match self.kind {
            LambdaKind::Kronecker => LambdaSpec::Kronecker { arity: self.arity },
            LambdaKind::Schur => LambdaSpec::Schur { arity: self.arity },
            LambdaKind::Matprod => LambdaSpec::Matprod { arity: self.arity },
            _ => LambdaSpec::Mixed {
                groups: groups
                    .iter()
                    .map(|g| GroupSpec {
                        slots: (g.start + 1..=g.start + g.len).collect(),
                        product: g.product,
                    })
                    .collect(),
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kind(&self) -> LambdaKind {
        self.kind
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self.body, Body::Builtin(_))
    }

    pub fn groups(&self) -> Option<&[Group]> {
        match &self.body {
            Body::Builtin(g) => Some(g),
            Body::Custom { .. } => None,
        }
    }

    fn provider(&self) -> Option<&dyn WitnessProvider> {
        match &self.body {
            Body::Custom { provider, .. } => provider.as_deref(),
            Body::Builtin(_) => None,
        }
    }

    /// Number of output axes for builtins (τ(k) = k^axes).
    fn axis_count(groups: &[Group]) -> usize {
        groups.iter().map(Group::axes).sum()
    }

    pub fn tau(&self, k: usize) -> usize {
        match &self.body {
            Body::Builtin(groups) => k.pow(Self::axis_count(groups) as u32),
            Body::Custom { tau, .. } => tau(k),
        }
    }

    /// `λ_k(args)`.
    pub fn eval(&self, k: usize, args: &[CMatrix]) -> Result<CMatrix> {
        if args.len() != self.arity {
            return Err(LtError::Arity {
                expected: self.arity,
                got: args.len(),
            });
        }
        if let Some(a) = args.iter().find(|a| a.shape() != (k, k)) {
            return dim_err(format!("argument is {:?}, level {k} needs {k}x{k}", a.shape()));
        }
        match &self.body {
            Body::Builtin(groups) => {
                let mut out = CMatrix::scalar(ONE);
                for g in groups {
                    let part = &args[g.start..g.start + g.len];
                    let img = match g.product {
                        Product::Kronecker => kron_all(part),
                        Product::Schur => part[1..]
                            .iter()
                            .try_fold(part[0].clone(), |acc, x| crate::matcore::schur(&acc, x))?,
                        Product::Matprod => part[1..].iter().fold(part[0].clone(), |acc, x| &acc * x),
                    };
                    out = kron(&out, &img);
                }
                Ok(out)
            }
            Body::Custom { tau, eval, .. } => {
                let out = eval(k, args)?;
                let t = tau(k);
                if out.shape() != (t, t) {
                    return dim_err(format!(
                        "custom sequence {} returned {:?} at level {k}, tau is {t}",
                        self.name,
                        out.shape()
                    ));
                }
                Ok(out)
            }
        }
    }

    /// Position of the single 1 in `λ_k(ε_{i_1,j_1}, …)` for builtins, `None`
    /// when the image is zero. Indices are 0-based and must be `< k`.
    pub fn builtin_unit_image(&self, k: usize, pairs: &[(usize, usize)]) -> Option<(usize, usize)> {
        let Body::Builtin(groups) = &self.body else {
            return None;
        };
        let (mut r, mut c) = (0, 0);
        for g in groups {
            let ps = &pairs[g.start..g.start + g.len];
            match g.product {
                Product::Kronecker => {
                    for &(i, j) in ps {
                        r = r * k + i;
                        c = c * k + j;
                    }
                }
                Product::Schur => {
                    let first = ps[0];
                    if ps.iter().any(|&p| p != first) {
                        return None;
                    }
                    r = r * k + first.0;
                    c = c * k + first.1;
                }
                Product::Matprod => {
                    if ps.windows(2).any(|w| w[0].1 != w[1].0) {
                        return None;
                    }
                    r = r * k + ps[0].0;
                    c = c * k + ps[ps.len() - 1].1;
                }
            }
        }
        Some((r, c))
    }

    /// `λ_k(ε_{i_1,j_1}, …, ε_{i_m,j_m})` as a sparse matrix. A `None` pair
    /// stands for an out-of-range unit, i.e. the zero matrix.
    pub fn eval_units(&self, k: usize, pairs: &[Option<(usize, usize)>]) -> Result<SparseMat> {
        if pairs.len() != self.arity {
            return Err(LtError::Arity {
                expected: self.arity,
                got: pairs.len(),
            });
        }
        let t = self.tau(k);
        let mut out = SparseMat::zeros(t, t);
        let Some(concrete) = pairs.iter().copied().collect::<Option<Vec<_>>>() else {
            return Ok(out);
        };
        if concrete.iter().any(|&(i, j)| i >= k || j >= k) {
            return Ok(out);
        }
        match &self.body {
            Body::Builtin(_) => {
                if let Some(pos) = self.builtin_unit_image(k, &concrete) {
                    out.entries.insert(pos, ONE);
                }
                Ok(out)
            }
            Body::Custom { .. } => {
                let args: Vec<CMatrix> = concrete
                    .iter()
                    .map(|&(i, j)| crate::matcore::unit(i + 1, j + 1, k))
                    .collect();
                Ok(SparseMat::from_dense(&self.eval(k, &args)?))
            }
        }
    }

    /// Every nonzero unit image at level `k`.
    pub fn unit_table(&self, k: usize) -> Result<UnitTable> {
        let m = self.arity as u32;
        let count = (k * k).checked_pow(m).filter(|&c| c <= UNIT_TABLE_CAP).ok_or_else(|| {
            LtError::Budget(format!(
                "level {k} needs {k}^{} unit tuples for {}",
                2 * m,
                self.name
            ))
        })?;
        let mut terms = Vec::new();
        let mut pairs = vec![(0, 0); self.arity];
        for idx in 0..count {
            decode_pairs(idx, k, &mut pairs);
            let entries: Vec<(usize, usize, C64)> = match &self.body {
                Body::Builtin(_) => self
                    .builtin_unit_image(k, &pairs)
                    .map(|(r, c)| vec![(r, c, ONE)])
                    .unwrap_or_default(),
                Body::Custom { .. } => {
                    let opt: Vec<_> = pairs.iter().copied().map(Some).collect();
                    self.eval_units(k, &opt)?
                        .entries
                        .into_iter()
                        .filter(|(_, z)| *z != ZERO)
                        .map(|((r, c), z)| (r, c, z))
                        .collect()
                }
            };
            if !entries.is_empty() {
                terms.push(UnitTerm {
                    pairs: pairs.clone(),
                    entries,
                });
            }
        }
        Ok(UnitTable {
            level: k,
            tau: self.tau(k),
            terms,
        })
    }

    // ----- witnesses -----

    fn unsupported(&self, condition: &str) -> LtError {
        LtError::UnsupportedSequence {
            sequence: self.name.clone(),
            condition: condition.into(),
        }
    }

    /// Selection witness with `p = k`, `a_j = ε_j`; `S` picks the all-`j`
    /// multi-index for each `j`.
    pub fn e1_witness(&self, k: usize) -> Result<E1Witness> {
        if let Some(p) = self.provider() {
            return p.e1(k).ok_or_else(|| self.unsupported("E1"));
        }
        let Body::Builtin(groups) = &self.body else {
            return Err(self.unsupported("E1"));
        };
        let axes = Self::axis_count(groups);
        let tau = self.tau(k);
        let mut s = CMatrix::zeros(k, tau);
        for j in 0..k {
            let idx = (0..axes).fold(0, |acc, _| acc * k + j);
            s[(j, idx)] = ONE;
        }
        let t = s.adjoint();
        let a = (1..=k).map(|j| crate::matcore::unit(j, j, k)).collect();
        Ok(E1Witness { p: k, s, t, a })
    }

    /// `P ∈ M_{τ(r)+τ(s), τ(r+s)}`: the top block selects multi-indices with
    /// every axis in `0..r`, the bottom block those with every axis in `r..r+s`.
    pub fn e2_witness(&self, r: usize, s: usize) -> Result<CMatrix> {
        if let Some(p) = self.provider() {
            return p.e2(r, s).ok_or_else(|| self.unsupported("E2"));
        }
        let Body::Builtin(groups) = &self.body else {
            return Err(self.unsupported("E2"));
        };
        let axes = Self::axis_count(groups);
        let (tr, ts, big) = (self.tau(r), self.tau(s), self.tau(r + s));
        let mut p = CMatrix::zeros(tr + ts, big);
        let mut digits = vec![0; axes];
        for row in 0..tr {
            decode_digits(row, r, &mut digits);
            p[(row, encode_digits(&digits, r + s, 0))] = ONE;
        }
        for row in 0..ts {
            decode_digits(row, s, &mut digits);
            p[(tr + row, encode_digits(&digits, r + s, r))] = ONE;
        }
        Ok(p)
    }

    /// `(S, T)` with `λ_p(α) ⊗ λ_q(β) = S λ_{pq}(α_1⊗β_1, …) T`. For builtins
    /// `S` is the axis permutation taking the interleaved layout
    /// `(a_1, b_1, a_2, b_2, …)` of `λ_{pq}` to `(a_1, a_2, …, b_1, b_2, …)`,
    /// and `T = S*`.
    pub fn w2_witness(&self, p: usize, q: usize) -> Result<(CMatrix, CMatrix)> {
        if let Some(prov) = self.provider() {
            return prov.w2(p, q).ok_or_else(|| self.unsupported("W2"));
        }
        let Body::Builtin(groups) = &self.body else {
            return Err(self.unsupported("W2"));
        };
        let axes = Self::axis_count(groups);
        let n = self.tau(p) * self.tau(q);
        let mut s = CMatrix::zeros(n, n);
        let mut digits = vec![0; 2 * axes];
        for src in 0..n {
            // Source digits: interleaved (a_1, b_1, a_2, b_2, ...).
            let mut rest = src;
            for ax in (0..axes).rev() {
                let b = rest % q;
                rest /= q;
                let a = rest % p;
                rest /= p;
                digits[2 * ax] = a;
                digits[2 * ax + 1] = b;
            }
            let mut tgt_a = 0;
            let mut tgt_b = 0;
            for ax in 0..axes {
                tgt_a = tgt_a * p + digits[2 * ax];
                tgt_b = tgt_b * q + digits[2 * ax + 1];
            }
            s[(tgt_a * self.tau(q) + tgt_b, src)] = ONE;
        }
        let t = s.adjoint();
        Ok((s, t))
    }

    /// `(P, Q)` with `γ = P λ_p(I, …, γ, …, I) Q` for every `γ ∈ M_p`; `slot`
    /// is 1-based. Builtins get an analytic selector whenever the slot's group
    /// acts on `γ` without collapsing it (Kronecker, matrix product, singleton
    /// groups); otherwise a bounded selector search is run.
    pub fn w1_witness(&self, p: usize, slot: usize) -> Result<(CMatrix, CMatrix)> {
        if slot == 0 || slot > self.arity {
            return Err(LtError::InvalidSpec(format!(
                "slot {slot} outside 1..={}",
                self.arity
            )));
        }
        if let Some(prov) = self.provider() {
            if let Some(w) = prov.w1(p, slot) {
                return Ok(w);
            }
        }
        if let Body::Builtin(groups) = &self.body {
            if let Some(axis) = analytic_w1_axis(groups, slot - 1) {
                let axes = Self::axis_count(groups);
                let tau = self.tau(p);
                let mut pm = CMatrix::zeros(p, tau);
                let mut digits = vec![0; axes];
                for i in 0..p {
                    digits[axis] = i;
                    pm[(i, encode_digits(&digits, p, 0))] = ONE;
                }
                let q = pm.adjoint();
                return Ok((pm, q));
            }
        }
        self.search_w1(p, slot, W1_SEARCH_NODES)
    }

    /// Searches for unit-selector `P`, `Q` (rows `e_{σ(a)}*`, columns
    /// `e_{π(b)}`) with `λ_p(I..ε_{a,b}..I)[σ(a'), π(b')] = δ_{aa'}δ_{bb'}`.
    pub fn search_w1(&self, p: usize, slot: usize, max_nodes: usize) -> Result<(CMatrix, CMatrix)> {
        let images: Vec<Vec<SparseMat>> = (0..p)
            .map(|a| {
                (0..p)
                    .map(|b| {
                        let mut args: Vec<CMatrix> = vec![CMatrix::identity(p); self.arity];
                        args[slot - 1] = crate::matcore::unit(a + 1, b + 1, p);
                        self.eval(p, &args).map(|m| SparseMat::from_dense(&m))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut search = W1Search {
            images: &images,
            p,
            sigma: Vec::with_capacity(p),
            pi: Vec::with_capacity(p),
            nodes: 0,
            max_nodes,
        };
        if search.extend() {
            let tau = self.tau(p);
            let mut pm = CMatrix::zeros(p, tau);
            let mut qm = CMatrix::zeros(tau, p);
            for a in 0..p {
                pm[(a, search.sigma[a])] = ONE;
                qm[(search.pi[a], a)] = ONE;
            }
            Ok((pm, qm))
        } else {
            let why = if search.nodes >= max_nodes {
                "selector search budget exhausted"
            } else {
                "no unit selectors recover every basis matrix"
            };
            Err(LtError::ConditionFailed {
                sequence: self.name.clone(),
                condition: "W1".into(),
                level: p,
                detail: format!("slot {slot}: {why}"),
            })
        }
    }
}

const W1_SEARCH_NODES: usize = 200_000;

/// Axis index of `slot` when an analytic W1 selector exists.
fn analytic_w1_axis(groups: &[Group], slot: usize) -> Option<usize> {
    let mut axis = 0;
    for g in groups {
        if (g.start..g.start + g.len).contains(&slot) {
            return match g.product {
                Product::Kronecker => Some(axis + slot - g.start),
                Product::Matprod => Some(axis),
                Product::Schur if g.len == 1 => Some(axis),
                Product::Schur => None,
            };
        }
        axis += g.axes();
    }
    None
}

struct W1Search<'a> {
    images: &'a [Vec<SparseMat>],
    p: usize,
    sigma: Vec<usize>,
    pi: Vec<usize>,
    nodes: usize,
    max_nodes: usize,
}

impl W1Search<'_> {
    fn value(&self, a: usize, b: usize, row: usize, col: usize) -> C64 {
        self.images[a][b]
            .entries
            .get(&(row, col))
            .copied()
            .unwrap_or(ZERO)
    }

    /// Checks every identity that involves the most recently chosen index.
    fn consistent(&self) -> bool {
        let n = self.sigma.len();
        let last = n - 1;
        for a in 0..n {
            for b in 0..n {
                for a2 in 0..n {
                    for b2 in 0..n {
                        if a.max(b).max(a2).max(b2) != last {
                            continue;
                        }
                        let want = if a == a2 && b == b2 { ONE } else { ZERO };
                        if (self.value(a, b, self.sigma[a2], self.pi[b2]) - want).norm() > 1e-12 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn extend(&mut self) -> bool {
        let a = self.sigma.len();
        if a == self.p {
            return true;
        }
        let candidates: Vec<(usize, usize)> = self.images[a][a]
            .entries
            .iter()
            .filter(|(_, z)| (**z - ONE).norm() <= 1e-12)
            .map(|(&k, _)| k)
            .collect();
        for (row, col) in candidates {
            if self.sigma.contains(&row) || self.pi.contains(&col) {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.max_nodes {
                return false;
            }
            self.sigma.push(row);
            self.pi.push(col);
            if self.consistent() && self.extend() {
                return true;
            }
            self.sigma.pop();
            self.pi.pop();
        }
        false
    }
}

/// Decodes a lexicographic tuple index into `(i_1, j_1, …, i_m, j_m)`, first
/// slot most significant.
pub fn decode_pairs(mut idx: usize, k: usize, pairs: &mut [(usize, usize)]) {
    for pair in pairs.iter_mut().rev() {
        let j = idx % k;
        idx /= k;
        let i = idx % k;
        idx /= k;
        *pair = (i, j);
    }
}

fn decode_digits(mut idx: usize, base: usize, digits: &mut [usize]) {
    for d in digits.iter_mut().rev() {
        *d = idx % base;
        idx /= base;
    }
}

fn encode_digits(digits: &[usize], base: usize, offset: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d + offset)
}

/// Applies `λ_j` tensorized with the Kronecker product of the factor spaces:
/// for factors `v_t ∈ M_j(M_{d_t})` (block layout, `(j·d_t)²`), returns
/// `Σ λ_j(ε_{i_1,j_1}, …) ⊗ v_1[i_1,j_1] ⊗ … ⊗ v_m[i_m,j_m] ∈ M_{τ(j)}(M_D)`.
pub fn tensorize(lambda: &LambdaSequence, level: usize, factors: &[CMatrix]) -> Result<CMatrix> {
    let table = lambda.unit_table(level)?;
    tensorize_with(&table, factors)
}

/// Like [`tensorize`] with a precomputed unit table.
pub fn tensorize_with(table: &UnitTable, factors: &[CMatrix]) -> Result<CMatrix> {
    let j = table.level;
    let mut dims = Vec::with_capacity(factors.len());
    for v in factors {
        if !v.is_square() || v.rows() % j != 0 {
            return dim_err(format!("factor of shape {:?} is not in M_{j}(M_d)", v.shape()));
        }
        dims.push(v.rows() / j);
    }
    let d: usize = dims.iter().product();
    let mut out = CMatrix::zeros(table.tau * d, table.tau * d);
    for term in &table.terms {
        if term.pairs.len() != factors.len() {
            return Err(LtError::Arity {
                expected: term.pairs.len(),
                got: factors.len(),
            });
        }
        let blocks: Vec<CMatrix> = term
            .pairs
            .iter()
            .zip(factors.iter().zip(&dims))
            .map(|(&(i, jj), (v, &dt))| v.sub_block(i * dt, jj * dt, dt, dt))
            .collect();
        if blocks.iter().any(CMatrix::is_zero) {
            continue;
        }
        let prod = kron_all(&blocks);
        for &(r, c, z) in &term.entries {
            out.add_block(r * d, c * d, &prod, z);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::unit;

    fn spec(groups: &[(&[usize], Product)]) -> Vec<GroupSpec> {
        groups
            .iter()
            .map(|(s, p)| GroupSpec {
                slots: s.to_vec(),
                product: *p,
            })
            .collect()
    }

    #[test]
    fn eval_examples() {
        let k2 = LambdaSequence::kronecker(2).unwrap();
        let one = CMatrix::scalar(ONE);
        assert_eq!(k2.eval(1, &[one.clone(), one.clone()]).unwrap(), one);
        let s2 = LambdaSequence::schur(2).unwrap();
        assert_eq!(s2.eval(2, &[unit(1, 2, 2), unit(1, 2, 2)]).unwrap(), unit(1, 2, 2));
        let p2 = LambdaSequence::matprod(2).unwrap();
        assert_eq!(p2.eval(2, &[unit(1, 2, 2), unit(2, 1, 2)]).unwrap(), unit(1, 1, 2));
    }

    #[test]
    fn eval_rejects_bad_args() {
        let k2 = LambdaSequence::kronecker(2).unwrap();
        assert!(matches!(
            k2.eval(2, &[CMatrix::identity(2)]),
            Err(LtError::Arity { expected: 2, got: 1 })
        ));
        assert!(matches!(
            k2.eval(2, &[CMatrix::identity(2), CMatrix::identity(3)]),
            Err(LtError::Dimension(_))
        ));
    }

    #[test]
    fn tau_values() {
        assert_eq!(LambdaSequence::kronecker(3).unwrap().tau(2), 8);
        assert_eq!(LambdaSequence::schur(3).unwrap().tau(5), 5);
        assert_eq!(LambdaSequence::matprod(2).unwrap().tau(4), 4);
        let mixed = LambdaSequence::mixed(&spec(&[
            (&[1, 2], Product::Schur),
            (&[3, 4], Product::Schur),
        ]))
        .unwrap();
        assert_eq!(mixed.tau(3), 9);
        assert_eq!(mixed.tau(1), 1);
    }

    #[test]
    fn mixed_rejects_bad_groups() {
        assert!(LambdaSequence::mixed(&spec(&[(&[2, 1], Product::Schur)])).is_err());
        assert!(LambdaSequence::mixed(&spec(&[(&[1], Product::Schur), (&[3], Product::Schur)])).is_err());
        assert!(LambdaSequence::mixed(&[]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let l = LambdaSequence::from_json(r#"{"kind":"kronecker","arity":2}"#).unwrap();
        assert_eq!(l.kind(), LambdaKind::Kronecker);
        let text = r#"{"kind":"mixed","groups":[{"slots":[1,2],"product":"schur"},{"slots":[3,4],"product":"schur"}]}"#;
        let l = LambdaSequence::from_json(text).unwrap();
        assert_eq!(l.arity(), 4);
        let back = serde_json::to_string(&l.spec().unwrap()).unwrap();
        assert_eq!(LambdaSequence::from_json(&back).unwrap().spec(), l.spec());
        assert!(LambdaSequence::from_json(r#"{"kind":"weird","arity":2}"#).is_err());
    }

    #[test]
    fn unit_images_match_dense_eval() {
        let seqs = [
            LambdaSequence::kronecker(2).unwrap(),
            LambdaSequence::schur(3).unwrap(),
            LambdaSequence::matprod(3).unwrap(),
            LambdaSequence::mixed(&spec(&[(&[1, 2], Product::Matprod), (&[3], Product::Kronecker)]))
                .unwrap(),
        ];
        for l in &seqs {
            let k = 2;
            let total = (k * k as usize).pow(l.arity() as u32);
            let mut pairs = vec![(0, 0); l.arity()];
            for idx in 0..total {
                decode_pairs(idx, k, &mut pairs);
                let args: Vec<CMatrix> = pairs.iter().map(|&(i, j)| unit(i + 1, j + 1, k)).collect();
                let dense = l.eval(k, &args).unwrap();
                let opt: Vec<_> = pairs.iter().copied().map(Some).collect();
                assert_eq!(l.eval_units(k, &opt).unwrap().to_dense(), dense, "{l:?} {pairs:?}");
            }
        }
    }

    #[test]
    fn e2_witness_examples() {
        let s2 = LambdaSequence::schur(2).unwrap();
        assert_eq!(s2.e2_witness(1, 1).unwrap(), CMatrix::identity(2));
        let k2 = LambdaSequence::kronecker(2).unwrap();
        let p = k2.e2_witness(1, 1).unwrap();
        assert_eq!(p.shape(), (2, 4));
        // Grid coordinates (1,1) and (2,2) of the 2x2 grid are indices 0 and 3.
        assert_eq!(p[(0, 0)], ONE);
        assert_eq!(p[(1, 3)], ONE);
        assert!((p.fro_norm().powi(2) - 2.0).abs() < 1e-12);
        let k1 = LambdaSequence::kronecker(1).unwrap();
        assert_eq!(k1.e2_witness(2, 3).unwrap(), CMatrix::identity(5));
    }

    #[test]
    fn e1_witness_examples() {
        let w = LambdaSequence::schur(2).unwrap().e1_witness(2).unwrap();
        assert_eq!(w.p, 2);
        assert_eq!(w.s, CMatrix::identity(2));
        assert_eq!(w.t, CMatrix::identity(2));
        let w = LambdaSequence::kronecker(2).unwrap().e1_witness(2).unwrap();
        assert_eq!(w.s.shape(), (2, 4));
        assert_eq!(w.s[(0, 0)], ONE);
        assert_eq!(w.s[(1, 3)], ONE);
    }

    #[test]
    fn w2_witness_examples() {
        let (s, t) = LambdaSequence::matprod(2).unwrap().w2_witness(2, 2).unwrap();
        assert_eq!(s, CMatrix::identity(4));
        assert_eq!(t, CMatrix::identity(4));
        let (s, _) = LambdaSequence::kronecker(2).unwrap().w2_witness(1, 1).unwrap();
        assert_eq!(s, CMatrix::scalar(ONE));
        let (s, _) = LambdaSequence::kronecker(2).unwrap().w2_witness(2, 2).unwrap();
        assert_eq!(s.shape(), (16, 16));
        assert!((&s * &s.adjoint() - CMatrix::identity(16)).max_abs() == 0.0);
    }

    #[test]
    fn w1_witness_examples() {
        let (p, q) = LambdaSequence::matprod(2).unwrap().w1_witness(2, 1).unwrap();
        assert_eq!(p, CMatrix::identity(2));
        assert_eq!(q, CMatrix::identity(2));
        let k2 = LambdaSequence::kronecker(2).unwrap();
        for slot in 1..=2 {
            let (p, q) = k2.w1_witness(3, slot).unwrap();
            let g = CMatrix::from_fn(3, 3, |r, c| C64::new(r as f64 + 1.0, c as f64 - 1.0));
            let mut args = vec![CMatrix::identity(3); 2];
            args[slot - 1] = g.clone();
            let got = &(&p * &k2.eval(3, &args).unwrap()) * &q;
            assert!((&got - &g).max_abs() < 1e-14);
        }
        let s2 = LambdaSequence::schur(2).unwrap();
        assert!(matches!(s2.w1_witness(2, 1), Err(LtError::ConditionFailed { .. })));
        assert!(s2.w1_witness(1, 1).is_ok());
    }

    #[test]
    fn custom_without_provider_has_no_witnesses() {
        let base = LambdaSequence::kronecker(2).unwrap();
        let inner = base.clone();
        let l = LambdaSequence::custom(
            "twice-kron",
            2,
            Arc::new(|k| k * k),
            Arc::new(move |k, a| Ok(inner.eval(k, a)?.scale_real(2.0))),
            None,
        )
        .unwrap();
        assert!(matches!(l.e2_witness(1, 1), Err(LtError::UnsupportedSequence { .. })));
        assert_eq!(l.tau(3), 9);
        let one = CMatrix::scalar(ONE);
        assert_eq!(l.eval(1, &[one.clone(), one]).unwrap()[(0, 0)], C64::new(2.0, 0.0));
    }

    #[test]
    fn tensorize_level_one_is_kron_of_factors() {
        let l = LambdaSequence::schur(2).unwrap();
        let x = CMatrix::from_real(2, 2, &[1., 2., 3., 4.]).unwrap();
        let y = CMatrix::from_real(1, 1, &[5.]).unwrap();
        assert_eq!(tensorize(&l, 1, &[x.clone(), y.clone()]).unwrap(), kron(&x, &y));
    }
}
