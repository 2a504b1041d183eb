//! Bounded machine verification of the structural conditions on a λ-sequence.
//!
//! Exact identities are checked on every matrix-unit tuple of the requested
//! levels (they are integer-valued for builtins), positivity is checked on a
//! generator family plus seeded Wishart samples. Each result carries the
//! witness that was used or a replayable counterexample.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{LtError, Result};
use crate::lambda::{tensorize_with, LambdaSequence, UnitTable};
use crate::matcore::{
    is_psd, sandwich, unit, CMatrix, SandwichOperand, SparseMat, C64, ONE, ZERO,
};
use crate::sampling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Unknown,
    Fail,
}

impl Verdict {
    /// Worst of two verdicts (fail dominates unknown dominates pass).
    pub fn and(self, other: Verdict) -> Verdict {
        self.max(other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Entrywise tolerance for exact identities.
    pub exact: f64,
    /// Relative tolerance for positivity tests.
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-10,
            psd: 1e-9,
        }
    }
}

/// Limits for [`check_all`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Largest level tried for every level parameter.
    pub max_level: usize,
    /// Random samples for the norm and positivity checks.
    pub trials: usize,
    pub seed: u64,
    /// Largest number of tuples one exact check may enumerate.
    pub cap: u64,
    /// Largest number of generator combinations in the exact positivity tier.
    pub o3_generator_cap: usize,
    /// Factor dimensions `p_t` for the positivity check; `None` picks 2 for
    /// arity up to 3 and 1 above.
    pub o3_dims: Option<Vec<usize>>,
    pub tol: Tolerances,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_level: 3,
            trials: 200,
            seed: 0,
            cap: 1_000_000,
            o3_generator_cap: 4096,
            o3_dims: None,
            tol: Tolerances::default(),
        }
    }
}

/// Concrete data reproducing a failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Matrix-unit index pairs, 1-based, one per slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<[usize; 2]>>,
    /// Second-level unit pairs (the `β` side of the product identity).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units_q: Option<Vec<[usize; 2]>>,
    /// Selection indices `j_1..j_m`, 1-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    /// Explicit argument matrices (sampling checks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<CMatrix>>,
    pub residual: f64,
    /// Frobenius norm of the identity defect, when it applies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frobenius: Option<f64>,
}

impl Counterexample {
    fn empty(residual: f64) -> Self {
        Counterexample {
            units: None,
            units_q: None,
            indices: None,
            matrices: None,
            residual,
            frobenius: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub condition: String,
    pub params: BTreeMap<String, usize>,
    pub verdict: Verdict,
    pub max_residual: f64,
    pub tolerance: f64,
    /// Identities or samples evaluated.
    pub checked: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn new(condition: &str, params: &[(&str, usize)], tolerance: f64) -> Self {
        CheckResult {
            condition: condition.into(),
            params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            verdict: Verdict::Unknown,
            max_residual: 0.0,
            tolerance,
            checked: 0,
            witness: None,
            counterexample: None,
            note: None,
        }
    }

    fn unknown(mut self, note: impl Into<String>) -> Self {
        self.verdict = Verdict::Unknown;
        self.note = Some(note.into());
        self
    }

    fn param(&self, key: &str) -> Result<usize> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| LtError::InvalidSpec(format!("result lacks parameter {key}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub sequence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<crate::lambda::LambdaSpec>,
    pub arity: usize,
    pub budget: Budget,
    /// Aggregate verdict per condition over the tested range.
    pub summary: BTreeMap<String, Verdict>,
    pub results: Vec<CheckResult>,
}

impl AxiomReport {
    pub fn verdict(&self, condition: &str) -> Option<Verdict> {
        self.summary.get(condition).copied()
    }

    pub fn overall(&self) -> Verdict {
        self.summary.values().fold(Verdict::Pass, |a, &b| a.and(b))
    }
}

/// Sparse JSON form of a witness matrix: `{rows, cols, entries: [[r, c, re, im]]}`
/// with 0-based coordinates.
pub fn sparse_json(m: &CMatrix) -> Value {
    let entries: Vec<Value> = SparseMat::from_dense(m)
        .entries
        .iter()
        .map(|(&(r, c), z)| json!([r, c, z.re, z.im]))
        .collect();
    json!({"rows": m.rows(), "cols": m.cols(), "entries": entries})
}

// ----- enumeration plumbing -----

#[derive(Clone, Copy, Debug)]
struct Worst {
    idx: u64,
    fro: f64,
    entry: f64,
}

#[derive(Clone, Copy, Debug)]
struct Scan {
    max_entry: f64,
    worst: Option<Worst>,
}

impl Scan {
    fn empty() -> Self {
        Scan {
            max_entry: 0.0,
            worst: None,
        }
    }

    fn single(idx: u64, entry: f64, fro: f64, tol: f64) -> Self {
        Scan {
            max_entry: entry,
            worst: (entry > tol).then_some(Worst { idx, fro, entry }),
        }
    }

    /// Keeps the failure with the largest Frobenius defect, ties broken by
    /// the lexicographically first tuple. Associative and commutative, so
    /// the parallel reduction is deterministic.
    fn merge(self, other: Scan) -> Scan {
        let worst = match (self.worst, other.worst) {
            (None, w) | (w, None) => w,
            (Some(a), Some(b)) => {
                let a_wins = a.fro > b.fro || (a.fro == b.fro && a.idx < b.idx);
                Some(if a_wins { a } else { b })
            }
        };
        Scan {
            max_entry: self.max_entry.max(other.max_entry),
            worst,
        }
    }
}

fn scan<F>(count: u64, tol: f64, f: F) -> Result<Scan>
where
    F: Fn(u64) -> Result<(f64, f64)> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(i).map(|(e, fr)| Scan::single(i, e, fr, tol)))
        .try_reduce(Scan::empty, |a, b| Ok(a.merge(b)))
}

fn over_cap(res: CheckResult, count: u64, cap: u64) -> Option<CheckResult> {
    (count > cap).then(|| {
        res.unknown(format!(
            "{count} tuples exceed the enumeration cap {cap}; lower the level or raise the budget"
        ))
    })
}

fn checked_count(base: u64, m: usize) -> u64 {
    base.checked_pow(m as u32).unwrap_or(u64::MAX)
}

/// Decodes `idx` into `m` digits of the given base, first digit most significant.
fn digits(mut idx: u64, base: u64, m: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    for d in out.iter_mut().rev() {
        *d = (idx % base) as usize;
        idx /= base;
    }
    out
}

fn to_one_based(pairs: &[(usize, usize)]) -> Vec<[usize; 2]> {
    pairs.iter().map(|&(i, j)| [i + 1, j + 1]).collect()
}

fn from_one_based(pairs: &[[usize; 2]]) -> Result<Vec<(usize, usize)>> {
    pairs
        .iter()
        .map(|&[i, j]| {
            if i == 0 || j == 0 {
                Err(LtError::InvalidSpec("unit indices are 1-based".into()))
            } else {
                Ok((i - 1, j - 1))
            }
        })
        .collect()
}

fn finish(mut res: CheckResult, s: Scan, count: u64, units: impl Fn(u64) -> Counterexample) -> CheckResult {
    res.checked = count;
    res.max_residual = s.max_entry;
    match s.worst {
        Some(w) => {
            res.verdict = Verdict::Fail;
            let mut c = units(w.idx);
            c.residual = w.entry;
            c.frobenius = Some(w.fro);
            res.counterexample = Some(c);
        }
        None => res.verdict = Verdict::Pass,
    }
    res
}

fn norm_ok(m: &CMatrix, tol: f64) -> bool {
    m.op_norm() <= 1.0 + tol
}

fn block_diag_sparse(a: &SparseMat, b: &SparseMat) -> SparseMat {
    let mut out = SparseMat::zeros(a.rows + b.rows, a.cols + b.cols);
    out.entries.extend(a.entries.iter().map(|(&k, &z)| (k, z)));
    out.entries
        .extend(b.entries.iter().map(|(&(r, c), &z)| ((r + a.rows, c + a.cols), z)));
    out
}

fn block_adiag_sparse(x: &SparseMat, y: &SparseMat) -> SparseMat {
    x.place(0, 1).add(&y.place(1, 0))
}

// ----- (E1) -----

pub fn check_e1(lambda: &LambdaSequence, k: usize, tol: f64) -> CheckResult {
    let res = CheckResult::new("E1", &[("k", k)], tol);
    let w = match lambda.e1_witness(k) {
        Ok(w) => w,
        Err(e) => return res.unknown(e.to_string()),
    };
    let m = lambda.arity();
    let count = checked_count(k as u64, m);
    let eval = |idx: u64| -> Result<(f64, f64)> {
        let js = digits(idx, k as u64, m);
        let args: Vec<CMatrix> = js.iter().map(|&j| w.a[j].clone()).collect();
        let img = &(&w.s * &lambda.eval(w.p, &args)?) * &w.t;
        let expect = if js.iter().all(|&j| j == js[0]) {
            unit(js[0] + 1, js[0] + 1, k)
        } else {
            CMatrix::zeros(k, k)
        };
        let d = &img - &expect;
        Ok((d.max_abs(), d.fro_norm()))
    };
    let mut res = match scan(count, tol, eval) {
        Ok(s) => finish(res, s, count, |idx| Counterexample {
            indices: Some(digits(idx, k as u64, m).iter().map(|j| j + 1).collect()),
            ..Counterexample::empty(0.0)
        }),
        Err(e) => return res.unknown(e.to_string()),
    };
    res.witness = Some(json!({
        "p": w.p,
        "S": sparse_json(&w.s),
        "T": sparse_json(&w.t),
        "a": w.a.iter().map(sparse_json).collect::<Vec<_>>(),
    }));
    res
}

// ----- (E2) -----

fn e2_pairs(r: usize, s: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(r * r + s * s);
    for i in 0..r {
        for j in 0..r {
            out.push((i, j));
        }
    }
    for i in r..r + s {
        for j in r..r + s {
            out.push((i, j));
        }
    }
    out
}

/// Residual of the (E2) identity for one tuple of pairs at level `r + s`.
fn e2_defect(
    lambda: &LambdaSequence,
    p_left: &SandwichOperand,
    p_right: &SandwichOperand,
    r: usize,
    s: usize,
    pairs: &[(usize, usize)],
) -> Result<(f64, f64)> {
    let big: Vec<_> = pairs.iter().map(|&p| Some(p)).collect();
    let lhs = sandwich(p_left, &lambda.eval_units(r + s, &big)?, p_right);
    let top: Vec<_> = pairs
        .iter()
        .map(|&(i, j)| (i < r && j < r).then_some((i, j)))
        .collect();
    let bottom: Vec<_> = pairs
        .iter()
        .map(|&(i, j)| (i >= r && j >= r).then(|| (i - r, j - r)))
        .collect();
    let rhs = block_diag_sparse(&lambda.eval_units(r, &top)?, &lambda.eval_units(s, &bottom)?);
    Ok(lhs.diff(&rhs))
}

pub fn check_e2(lambda: &LambdaSequence, r: usize, s: usize, tol: f64, cap: u64) -> CheckResult {
    let res = CheckResult::new("E2", &[("r", r), ("s", s)], tol);
    let pairs = e2_pairs(r, s);
    let m = lambda.arity();
    let count = checked_count(pairs.len() as u64, m);
    if let Some(r) = over_cap(res.clone(), count, cap) {
        return r;
    }
    let p = match lambda.e2_witness(r, s) {
        Ok(p) => p,
        Err(e) => return res.unknown(e.to_string()),
    };
    let mut res = res;
    res.witness = Some(json!({"P": sparse_json(&p)}));
    let expect_shape = (lambda.tau(r) + lambda.tau(s), lambda.tau(r + s));
    if p.shape() != expect_shape {
        res.verdict = Verdict::Fail;
        res.note = Some(format!("witness shape {:?}, expected {expect_shape:?}", p.shape()));
        return res;
    }
    if !norm_ok(&p, tol) {
        res.verdict = Verdict::Fail;
        res.max_residual = p.op_norm() - 1.0;
        res.note = Some("witness is not contractive".into());
        return res;
    }
    let left = SandwichOperand::new(&p);
    let right = SandwichOperand::new(&p.adjoint().transpose());
    let eval = |idx: u64| {
        let tuple: Vec<_> = digits(idx, pairs.len() as u64, m).iter().map(|&d| pairs[d]).collect();
        e2_defect(lambda, &left, &right, r, s, &tuple)
    };
    match scan(count, tol, eval) {
        Ok(sc) => finish(res, sc, count, |idx| Counterexample {
            units: Some(to_one_based(
                &digits(idx, pairs.len() as u64, m).iter().map(|&d| pairs[d]).collect::<Vec<_>>(),
            )),
            ..Counterexample::empty(0.0)
        }),
        Err(e) => res.unknown(e.to_string()),
    }
}

// ----- (E3), (N1), (N2) -----

/// Returns the (E3), (N1) and (N2) results. The norm bound is sampled: the
/// identity tuple plus `samples` tuples of Gaussian matrices rescaled to
/// operator norm one, for every level up to `k_max`.
pub fn check_e3_n(lambda: &LambdaSequence, k_max: usize, samples: usize, seed: u64, tol: f64) -> Vec<CheckResult> {
    let m = lambda.arity();
    let builtin = lambda.is_builtin();

    let mut n1 = CheckResult::new("N1", &[], tol);
    let t1 = lambda.tau(1);
    n1.checked = 1;
    n1.max_residual = (t1 as f64 - 1.0).abs();
    n1.verdict = if t1 == 1 { Verdict::Pass } else { Verdict::Fail };
    if t1 != 1 {
        n1.note = Some(format!("tau(1) = {t1}"));
    }

    let mut e3 = CheckResult::new("E3", &[("k_max", k_max)], tol);
    let ones = vec![CMatrix::scalar(ONE); m];
    match lambda.eval(1, &ones) {
        Ok(v) => {
            let defect = if v.shape() == (1, 1) {
                (v[(0, 0)] - ONE).norm()
            } else {
                f64::INFINITY
            };
            e3.checked = 1;
            e3.max_residual = defect;
            if defect > tol {
                e3.verdict = Verdict::Fail;
                e3.counterexample = Some(Counterexample {
                    matrices: Some(ones.clone()),
                    ..Counterexample::empty(defect)
                });
            }
        }
        Err(e) => return vec![e3.unknown(e.to_string()), n1],
    }

    let mut n2 = CheckResult::new("N2", &[("k_max", k_max), ("samples", samples)], tol);
    let mut best = (0.0_f64, 0usize, Vec::new());
    let mut defect_below = 0.0_f64;
    for k in 1..=k_max {
        let per_level: Vec<(f64, Vec<CMatrix>)> = (0..=samples)
            .into_par_iter()
            .map(|t| {
                let args: Vec<CMatrix> = if t == 0 {
                    vec![CMatrix::identity(k); m]
                } else {
                    let mut rng = sampling::substream(seed ^ 0x4e32, (k as u64) << 32 | t as u64);
                    (0..m).map(|_| sampling::unit_ball(&mut rng, k, k)).collect()
                };
                let n = lambda.eval(k, &args).map(|v| v.op_norm()).unwrap_or(f64::NAN);
                (n, args)
            })
            .collect();
        for (n, args) in per_level {
            if n.is_nan() {
                return vec![e3, n1, n2.unknown(format!("evaluation failed at level {k}"))];
            }
            if n > best.0 {
                best = (n, k, args);
            }
        }
        // The identity tuple certifies ‖λ_k‖ ≥ ‖λ_k(I, …, I)‖.
        let id = lambda.eval(k, &vec![CMatrix::identity(k); m]).map(|v| v.op_norm()).unwrap_or(0.0);
        defect_below = defect_below.max(1.0 - id);
    }
    n2.checked = (k_max * (samples + 1)) as u64;
    n2.max_residual = (best.0 - 1.0).max(0.0);
    n2.witness = Some(json!({"sampled_lower_bound": best.0, "level": best.1}));
    if best.0 > 1.0 + tol {
        n2.verdict = Verdict::Fail;
        n2.params.insert("k".into(), best.1);
        n2.counterexample = Some(Counterexample {
            matrices: Some(best.2),
            ..Counterexample::empty(best.0 - 1.0)
        });
        e3.note = Some(format!("sampled norm bound {:.6} at level {}", best.0, best.1));
    } else if builtin {
        // Builtin products are contractive and attain 1 on the identity tuple.
        n2.verdict = if defect_below <= tol { Verdict::Pass } else { Verdict::Fail };
        n2.note = Some("norm one asserted for builtin products; samples agree".into());
    } else {
        n2 = n2.unknown("sampled bound is only a lower bound for custom sequences");
    }
    if e3.verdict != Verdict::Fail {
        e3.verdict = if builtin { Verdict::Pass } else { Verdict::Unknown };
        if !builtin {
            e3.note = Some("lambda_1(1,...,1) = 1 holds; boundedness of the norms is not decidable by sampling".into());
        }
    }
    vec![e3, n1, n2]
}

// ----- (W1) -----

pub fn check_w1(lambda: &LambdaSequence, p: usize, slot: usize, tol: f64) -> CheckResult {
    let mut res = CheckResult::new("W1", &[("p", p), ("slot", slot)], tol);
    let m = lambda.arity();
    let image = |a: usize, b: usize| -> Result<CMatrix> {
        let mut args = vec![CMatrix::identity(p); m];
        args[slot - 1] = unit(a + 1, b + 1, p);
        lambda.eval(p, &args)
    };
    match lambda.w1_witness(p, slot) {
        Ok((pm, qm)) => {
            res.witness = Some(json!({"P": sparse_json(&pm), "Q": sparse_json(&qm)}));
            if !norm_ok(&pm, tol) || !norm_ok(&qm, tol) {
                res.verdict = Verdict::Fail;
                res.note = Some("witness is not contractive".into());
                return res;
            }
            let mut worst: Option<(f64, f64, usize, usize)> = None;
            let mut max_entry = 0.0_f64;
            for a in 0..p {
                for b in 0..p {
                    let img = match image(a, b) {
                        Ok(x) => x,
                        Err(e) => return res.unknown(e.to_string()),
                    };
                    let d = &(&(&pm * &img) * &qm) - &unit(a + 1, b + 1, p);
                    let (e, f) = (d.max_abs(), d.fro_norm());
                    max_entry = max_entry.max(e);
                    if e > tol && worst.is_none_or(|w| f > w.1) {
                        worst = Some((e, f, a, b));
                    }
                }
            }
            res.checked = (p * p) as u64;
            res.max_residual = max_entry;
            res.verdict = match worst {
                None => Verdict::Pass,
                Some((e, f, a, b)) => {
                    res.counterexample = Some(Counterexample {
                        units: Some(vec![[a + 1, b + 1]]),
                        frobenius: Some(f),
                        ..Counterexample::empty(e)
                    });
                    Verdict::Fail
                }
            };
            res
        }
        Err(LtError::ConditionFailed { detail, .. }) => {
            // Contractive P, Q cannot enlarge a norm, so a basis matrix whose
            // image has norm below one has no witness at all.
            let mut shortfall: Option<(f64, usize, usize)> = None;
            for a in 0..p {
                for b in 0..p {
                    let n = match image(a, b) {
                        Ok(x) => x.op_norm(),
                        Err(e) => return res.unknown(e.to_string()),
                    };
                    let gap = 1.0 - n;
                    if gap > tol && shortfall.is_none_or(|s| gap > s.0) {
                        shortfall = Some((gap, a, b));
                    }
                }
            }
            res.checked = (p * p) as u64;
            match shortfall {
                Some((gap, a, b)) => {
                    res.verdict = Verdict::Fail;
                    res.max_residual = gap;
                    res.note = Some(format!(
                        "{detail}; no contractive P, Q exist since the image of the basis matrix has norm {:.3}",
                        1.0 - gap
                    ));
                    res.counterexample = Some(Counterexample {
                        units: Some(vec![[a + 1, b + 1]]),
                        ..Counterexample::empty(gap)
                    });
                    res
                }
                None => res.unknown(detail),
            }
        }
        Err(e) => res.unknown(e.to_string()),
    }
}

// ----- (W2) -----

pub fn check_w2(lambda: &LambdaSequence, p: usize, q: usize, tol: f64, cap: u64) -> CheckResult {
    let res = CheckResult::new("W2", &[("p", p), ("q", q)], tol);
    let m = lambda.arity();
    let base = (p * p * q * q) as u64;
    let count = checked_count(base, m);
    if let Some(r) = over_cap(res.clone(), count, cap) {
        return r;
    }
    let (s, t) = match lambda.w2_witness(p, q) {
        Ok(w) => w,
        Err(e) => return res.unknown(e.to_string()),
    };
    let mut res = res;
    res.witness = Some(json!({"S": sparse_json(&s), "T": sparse_json(&t)}));
    if !norm_ok(&s, tol) || !norm_ok(&t, tol) {
        res.verdict = Verdict::Fail;
        res.note = Some("witness is not contractive".into());
        return res;
    }
    let left = SandwichOperand::new(&s);
    let right = SandwichOperand::new(&t.transpose());
    let split = |idx: u64| -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
        let ds = digits(idx, base, m);
        let mut a = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        for d in ds {
            // d encodes (i, j, k, l) with i, j < p and k, l < q.
            let l = d % q;
            let k = (d / q) % q;
            let j = (d / (q * q)) % p;
            let i = d / (q * q * p);
            a.push((i, j));
            b.push((k, l));
        }
        (a, b)
    };
    let eval = |idx: u64| -> Result<(f64, f64)> {
        let (a, b) = split(idx);
        w2_defect(lambda, &left, &right, p, q, &a, &b)
    };
    match scan(count, tol, eval) {
        Ok(sc) => finish(res, sc, count, |idx| {
            let (a, b) = split(idx);
            Counterexample {
                units: Some(to_one_based(&a)),
                units_q: Some(to_one_based(&b)),
                ..Counterexample::empty(0.0)
            }
        }),
        Err(e) => res.unknown(e.to_string()),
    }
}

fn w2_defect(
    lambda: &LambdaSequence,
    left: &SandwichOperand,
    right: &SandwichOperand,
    p: usize,
    q: usize,
    a: &[(usize, usize)],
    b: &[(usize, usize)],
) -> Result<(f64, f64)> {
    let la = lambda.eval_units(p, &a.iter().map(|&x| Some(x)).collect::<Vec<_>>())?;
    let lb = lambda.eval_units(q, &b.iter().map(|&x| Some(x)).collect::<Vec<_>>())?;
    let lhs = la.kron(&lb);
    // ε_{i,j} ⊗ ε_{k,l} = ε_{iq+k, jq+l} in M_{pq}.
    let combined: Vec<_> = a
        .iter()
        .zip(b)
        .map(|(&(i, j), &(k, l))| Some((i * q + k, j * q + l)))
        .collect();
    let rhs = sandwich(left, &lambda.eval_units(p * q, &combined)?, right);
    Ok(lhs.diff(&rhs))
}

// ----- (O1) -----

fn o1_defect(lambda: &LambdaSequence, r: usize, pairs: &[(usize, usize)]) -> Result<(f64, f64)> {
    let lhs = lambda.eval_units(r, &pairs.iter().map(|&x| Some(x)).collect::<Vec<_>>())?;
    let swapped: Vec<_> = pairs.iter().map(|&(i, j)| Some((j, i))).collect();
    let rhs = lambda.eval_units(r, &swapped)?.adjoint();
    Ok(lhs.diff(&rhs))
}

pub fn check_o1(lambda: &LambdaSequence, r: usize, tol: f64, cap: u64) -> CheckResult {
    let mut res = CheckResult::new("O1", &[("r", r)], tol);
    let m = lambda.arity();
    let base = (r * r) as u64;
    let count = checked_count(base, m);
    if let Some(r) = over_cap(res.clone(), count, cap) {
        return r;
    }
    let pairs_of = |idx: u64| -> Vec<(usize, usize)> {
        digits(idx, base, m).iter().map(|&d| (d / r, d % r)).collect()
    };
    res.witness = Some(json!({"identity": "lambda_r(e_ij..) = lambda_r(e_ji..)^*"}));
    match scan(count, tol, |idx| o1_defect(lambda, r, &pairs_of(idx))) {
        Ok(sc) => finish(res, sc, count, |idx| Counterexample {
            units: Some(to_one_based(&pairs_of(idx))),
            ..Counterexample::empty(0.0)
        }),
        Err(e) => res.unknown(e.to_string()),
    }
}

// ----- (O2) -----

fn o2_pairs(r: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(2 * r * r);
    for i in 0..r {
        for j in r..2 * r {
            out.push((i, j));
        }
    }
    for i in r..2 * r {
        for j in 0..r {
            out.push((i, j));
        }
    }
    out
}

fn o2_defect(
    lambda: &LambdaSequence,
    left: &SandwichOperand,
    right: &SandwichOperand,
    r: usize,
    pairs: &[(usize, usize)],
) -> Result<(f64, f64)> {
    let big: Vec<_> = pairs.iter().map(|&p| Some(p)).collect();
    let lhs = sandwich(left, &lambda.eval_units(2 * r, &big)?, right);
    // Upper-right block: (i, j - r) for pairs in R; lower-left: (i - r, j) for S.
    let upper: Vec<_> = pairs
        .iter()
        .map(|&(i, j)| (i < r && j >= r).then(|| (i, j - r)))
        .collect();
    let lower: Vec<_> = pairs
        .iter()
        .map(|&(i, j)| (i >= r && j < r).then(|| (i - r, j)))
        .collect();
    let rhs = block_adiag_sparse(&lambda.eval_units(r, &upper)?, &lambda.eval_units(r, &lower)?);
    Ok(lhs.diff(&rhs))
}

pub fn check_o2(lambda: &LambdaSequence, r: usize, tol: f64, cap: u64) -> CheckResult {
    let res = CheckResult::new("O2", &[("r", r)], tol);
    let pairs = o2_pairs(r);
    let m = lambda.arity();
    let count = checked_count(pairs.len() as u64, m);
    if let Some(r) = over_cap(res.clone(), count, cap) {
        return r;
    }
    let p = match lambda.e2_witness(r, r) {
        Ok(p) => p,
        Err(e) => return res.unknown(e.to_string()),
    };
    let mut res = res;
    res.witness = Some(json!({"P": sparse_json(&p)}));
    if p.shape() != (2 * lambda.tau(r), lambda.tau(2 * r)) || !norm_ok(&p, tol) {
        res.verdict = Verdict::Fail;
        res.note = Some("witness has the wrong shape or is not contractive".into());
        return res;
    }
    let left = SandwichOperand::new(&p);
    let right = SandwichOperand::new(&p.adjoint().transpose());
    let tuple = |idx: u64| -> Vec<(usize, usize)> {
        digits(idx, pairs.len() as u64, m).iter().map(|&d| pairs[d]).collect()
    };
    match scan(count, tol, |idx| o2_defect(lambda, &left, &right, r, &tuple(idx))) {
        Ok(sc) => finish(res, sc, count, |idx| Counterexample {
            units: Some(to_one_based(&tuple(idx))),
            ..Counterexample::empty(0.0)
        }),
        Err(e) => res.unknown(e.to_string()),
    }
}

// ----- (O3) -----

/// Rank-one PSD generators `v v*` on `C^n` with `v ∈ {e_a, e_a + e_b, e_a + i e_b}`.
pub fn rank_one_generators(n: usize) -> Vec<CMatrix> {
    let mut vecs: Vec<Vec<C64>> = Vec::new();
    for a in 0..n {
        let mut v = vec![ZERO; n];
        v[a] = ONE;
        vecs.push(v);
    }
    for a in 0..n {
        for b in a + 1..n {
            for phase in [ONE, C64::new(0.0, 1.0)] {
                let mut v = vec![ZERO; n];
                v[a] = ONE;
                v[b] = phase;
                vecs.push(v);
            }
        }
    }
    vecs.iter()
        .map(|v| CMatrix::from_fn(n, n, |r, c| v[r] * v[c].conj()))
        .collect()
}

fn psd_negativity(img: &CMatrix, tol: f64) -> Result<(bool, f64)> {
    let chk = is_psd(img, tol)?;
    let neg = ((-chk.min_eig).max(0.0) / chk.scale).max(chk.asymmetry / chk.scale);
    Ok((chk.psd, neg))
}

pub fn default_o3_dims(arity: usize) -> Vec<usize> {
    vec![if arity <= 3 { 2 } else { 1 }; arity]
}

/// Positivity of `λ_r` tensorized with the Kronecker product on
/// `M_{p_1}, …, M_{p_m}`. Exact tier: all (or a strided subset of)
/// combinations of rank-one generators; random tier: `trials` Wishart tuples.
pub fn check_o3(
    lambda: &LambdaSequence,
    r: usize,
    dims: &[usize],
    trials: usize,
    seed: u64,
    tol: f64,
    generator_cap: usize,
) -> CheckResult {
    let mut params = vec![("r", r), ("trials", trials)];
    let dim_keys: Vec<String> = (1..=dims.len()).map(|t| format!("p{t}")).collect();
    for (k, &d) in dim_keys.iter().zip(dims) {
        params.push((k.as_str(), d));
    }
    let mut res = CheckResult::new("O3", &params, tol);
    let m = lambda.arity();
    if dims.len() != m || dims.contains(&0) {
        return res.unknown("one positive factor dimension per slot is required");
    }
    let table = match lambda.unit_table(r) {
        Ok(t) => t,
        Err(e) => return res.unknown(e.to_string()),
    };
    let gens: Vec<Vec<CMatrix>> = dims.iter().map(|&p| rank_one_generators(r * p)).collect();
    let total: u64 = gens.iter().map(|g| g.len() as u64).product();
    let exact_count = total.min(generator_cap as u64);
    let combo = |i: u64| -> Vec<CMatrix> {
        // Strided subsample when the full product is over the cap.
        let mut idx = if total > exact_count {
            ((i as u128 * total as u128) / exact_count as u128) as u64
        } else {
            i
        };
        let mut out = vec![CMatrix::zeros(0, 0); m];
        for t in (0..m).rev() {
            let n = gens[t].len() as u64;
            out[t] = gens[t][(idx % n) as usize].clone();
            idx /= n;
        }
        out
    };
    let sample = |t: u64| -> Vec<CMatrix> {
        let mut rng = sampling::substream(seed ^ 0x0_3a11, t);
        dims.iter()
            .map(|&p| sampling::wishart(&mut rng, r * p, r * p))
            .collect()
    };
    let evaluate = |tbl: &UnitTable, xs: &[CMatrix]| -> Result<(bool, f64)> {
        psd_negativity(&tensorize_with(tbl, xs)?, tol)
    };
    let n_total = exact_count + trials as u64;
    let outcome: Result<Vec<(u64, bool, f64)>> = (0..n_total)
        .into_par_iter()
        .map(|i| {
            let xs = if i < exact_count { combo(i) } else { sample(i - exact_count) };
            evaluate(&table, &xs).map(|(ok, neg)| (i, ok, neg))
        })
        .collect();
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => return res.unknown(e.to_string()),
    };
    res.checked = n_total;
    res.max_residual = outcome.iter().map(|o| o.2).fold(0.0, f64::max);
    let worst = outcome
        .iter()
        .filter(|o| !o.1)
        .fold(None::<&(u64, bool, f64)>, |acc, o| match acc {
            Some(a) if a.2 >= o.2 => Some(a),
            _ => Some(o),
        });
    res.witness = Some(json!({
        "exact_generators": exact_count,
        "exact_generator_total": total,
        "random_trials": trials,
    }));
    if exact_count < total {
        res.note = Some(format!(
            "exact tier covers {exact_count} of {total} generator combinations (strided)"
        ));
    }
    match worst {
        None => res.verdict = Verdict::Pass,
        Some(&(i, _, neg)) => {
            let xs = if i < exact_count { combo(i) } else { sample(i - exact_count) };
            res.verdict = Verdict::Fail;
            res.counterexample = Some(Counterexample {
                matrices: Some(xs),
                ..Counterexample::empty(neg)
            });
        }
    }
    res
}

// ----- aggregation -----

pub fn check_all(lambda: &LambdaSequence, budget: &Budget) -> AxiomReport {
    let l = budget.max_level.max(1);
    let m = lambda.arity();
    let tol = budget.tol;
    let mut results = Vec::new();
    for k in 1..=l {
        results.push(check_e1(lambda, k, tol.exact));
    }
    for r in 1..=l {
        for s in 1..=l {
            results.push(check_e2(lambda, r, s, tol.exact, budget.cap));
        }
    }
    results.extend(check_e3_n(lambda, l, budget.trials, budget.seed, tol.exact));
    for p in 1..=l {
        for slot in 1..=m {
            results.push(check_w1(lambda, p, slot, tol.exact));
        }
    }
    for p in 1..=l {
        for q in 1..=l {
            results.push(check_w2(lambda, p, q, tol.exact, budget.cap));
        }
    }
    for r in 1..=l {
        results.push(check_o1(lambda, r, tol.exact, budget.cap));
    }
    for r in 1..=l {
        results.push(check_o2(lambda, r, tol.exact, budget.cap));
    }
    let dims = budget.o3_dims.clone().unwrap_or_else(|| default_o3_dims(m));
    for r in 1..=l {
        results.push(check_o3(
            lambda,
            r,
            &dims,
            budget.trials,
            budget.seed.wrapping_add(r as u64),
            tol.psd,
            budget.o3_generator_cap,
        ));
    }
    let mut summary: BTreeMap<String, Verdict> = BTreeMap::new();
    for res in &results {
        summary
            .entry(res.condition.clone())
            .and_modify(|v| *v = v.and(res.verdict))
            .or_insert(res.verdict);
    }
    AxiomReport {
        sequence: lambda.name().to_string(),
        spec: lambda.spec(),
        arity: m,
        budget: budget.clone(),
        summary,
        results,
    }
}

/// Recomputes the residual of a recorded counterexample.
pub fn replay(lambda: &LambdaSequence, res: &CheckResult) -> Result<f64> {
    let c = res
        .counterexample
        .as_ref()
        .ok_or_else(|| LtError::InvalidSpec("result has no counterexample".into()))?;
    let units = || {
        c.units
            .as_deref()
            .ok_or_else(|| LtError::InvalidSpec("counterexample lacks unit indices".into()))
            .and_then(from_one_based)
    };
    let tol = res.tolerance;
    match res.condition.as_str() {
        "O1" => Ok(o1_defect(lambda, res.param("r")?, &units()?)?.0),
        "O2" => {
            let r = res.param("r")?;
            let p = lambda.e2_witness(r, r)?;
            let left = SandwichOperand::new(&p);
            let right = SandwichOperand::new(&p.adjoint().transpose());
            Ok(o2_defect(lambda, &left, &right, r, &units()?)?.0)
        }
        "E2" => {
            let (r, s) = (res.param("r")?, res.param("s")?);
            let p = lambda.e2_witness(r, s)?;
            let left = SandwichOperand::new(&p);
            let right = SandwichOperand::new(&p.adjoint().transpose());
            Ok(e2_defect(lambda, &left, &right, r, s, &units()?)?.0)
        }
        "W2" => {
            let (p, q) = (res.param("p")?, res.param("q")?);
            let (s, t) = lambda.w2_witness(p, q)?;
            let b = c
                .units_q
                .as_deref()
                .ok_or_else(|| LtError::InvalidSpec("counterexample lacks second-level units".into()))
                .and_then(from_one_based)?;
            let left = SandwichOperand::new(&s);
            let right = SandwichOperand::new(&t.transpose());
            Ok(w2_defect(lambda, &left, &right, p, q, &units()?, &b)?.0)
        }
        "E1" => {
            let k = res.param("k")?;
            let w = lambda.e1_witness(k)?;
            let js = c
                .indices
                .as_deref()
                .ok_or_else(|| LtError::InvalidSpec("counterexample lacks indices".into()))?;
            let args: Vec<CMatrix> = js.iter().map(|&j| w.a[j - 1].clone()).collect();
            let img = &(&w.s * &lambda.eval(w.p, &args)?) * &w.t;
            let expect = if js.iter().all(|&j| j == js[0]) {
                unit(js[0], js[0], k)
            } else {
                CMatrix::zeros(k, k)
            };
            Ok((&img - &expect).max_abs())
        }
        "W1" => {
            let (p, slot) = (res.param("p")?, res.param("slot")?);
            let (a, b) = units()?[0];
            let mut args = vec![CMatrix::identity(p); lambda.arity()];
            args[slot - 1] = unit(a + 1, b + 1, p);
            let img = lambda.eval(p, &args)?;
            match lambda.w1_witness(p, slot) {
                Ok((pm, qm)) => Ok((&(&(&pm * &img) * &qm) - &unit(a + 1, b + 1, p)).max_abs()),
                Err(_) => Ok(1.0 - img.op_norm()),
            }
        }
        "N2" => {
            let k = res.param("k")?;
            let xs = c.matrices.as_deref().unwrap_or_default();
            Ok(lambda.eval(k, xs)?.op_norm() - 1.0)
        }
        "E3" => {
            let xs = c.matrices.as_deref().unwrap_or_default();
            Ok((lambda.eval(1, xs)?[(0, 0)] - ONE).norm())
        }
        "O3" => {
            let r = res.param("r")?;
            let xs = c.matrices.as_deref().unwrap_or_default();
            let img = tensorize_with(&lambda.unit_table(r)?, xs)?;
            Ok(psd_negativity(&img, tol)?.1)
        }
        other => Err(LtError::InvalidSpec(format!("no replay for condition {other}"))),
    }
}

// ----- certified witnesses for downstream constructions -----

type CacheKey = (String, &'static str, Vec<usize>);

fn cache() -> &'static Mutex<HashMap<CacheKey, bool>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, bool>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Runs `check` once per builtin sequence and parameter set; custom sequences
/// are re-checked every time since their names need not be unique.
fn cached(lambda: &LambdaSequence, cond: &'static str, params: &[usize], check: impl FnOnce() -> CheckResult) -> Result<()> {
    let key = (lambda.name().to_string(), cond, params.to_vec());
    if lambda.is_builtin() {
        if let Some(&ok) = cache().lock().expect("cache poisoned").get(&key) {
            return if ok { Ok(()) } else { Err(failed(lambda, cond, params, "cached failure".into())) };
        }
    }
    let res = check();
    let ok = res.verdict == Verdict::Pass;
    if lambda.is_builtin() {
        cache().lock().expect("cache poisoned").insert(key, ok);
    }
    if ok {
        Ok(())
    } else {
        let detail = res
            .note
            .clone()
            .unwrap_or_else(|| format!("verdict {:?}, residual {:.3e}", res.verdict, res.max_residual));
        Err(failed(lambda, cond, params, detail))
    }
}

fn failed(lambda: &LambdaSequence, cond: &str, params: &[usize], detail: String) -> LtError {
    LtError::ConditionFailed {
        sequence: lambda.name().to_string(),
        condition: cond.into(),
        level: params.first().copied().unwrap_or(0),
        detail,
    }
}

const CERT_CAP: u64 = 4_000_000;

/// The (E2) witness at `(r, s)`, served only after it passed [`check_e2`].
pub fn certified_e2(lambda: &LambdaSequence, r: usize, s: usize) -> Result<CMatrix> {
    cached(lambda, "E2", &[r, s], || check_e2(lambda, r, s, Tolerances::default().exact, CERT_CAP))?;
    lambda.e2_witness(r, s)
}

/// The (W2) witness at `(p, q)`, served only after it passed [`check_w2`].
pub fn certified_w2(lambda: &LambdaSequence, p: usize, q: usize) -> Result<(CMatrix, CMatrix)> {
    cached(lambda, "W2", &[p, q], || check_w2(lambda, p, q, Tolerances::default().exact, CERT_CAP))?;
    lambda.w2_witness(p, q)
}

pub fn require_o1(lambda: &LambdaSequence, r: usize) -> Result<()> {
    cached(lambda, "O1", &[r], || check_o1(lambda, r, Tolerances::default().exact, CERT_CAP))
}

pub fn require_o2(lambda: &LambdaSequence, r: usize) -> Result<()> {
    cached(lambda, "O2", &[r], || check_o2(lambda, r, Tolerances::default().exact, CERT_CAP))
}

/// Positivity (O3) at levels `1..=max_level` with the default sampling
/// budget; used to gate constructions that rely on it.
pub fn require_o3(lambda: &LambdaSequence, max_level: usize) -> Result<()> {
    let dims = default_o3_dims(lambda.arity());
    for r in 1..=max_level {
        cached(lambda, "O3", &[r], || {
            check_o3(lambda, r, &dims, 50, 0, Tolerances::default().psd, 512)
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lambda::{GroupSpec, Product};

    const TOL: f64 = 1e-10;
    const CAP: u64 = 1_000_000;

    #[test]
    fn e1_examples() {
        let r = check_e1(&LambdaSequence::schur(2).unwrap(), 2, TOL);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(r.checked, 4);
        let r = check_e1(&LambdaSequence::kronecker(2).unwrap(), 3, TOL);
        assert_eq!((r.verdict, r.checked), (Verdict::Pass, 9));
        assert_eq!(check_e1(&LambdaSequence::matprod(2).unwrap(), 2, TOL).verdict, Verdict::Pass);
    }

    #[test]
    fn e2_examples() {
        let r = check_e2(&LambdaSequence::schur(2).unwrap(), 2, 2, TOL, CAP);
        assert_eq!((r.verdict, r.checked), (Verdict::Pass, 64));
        let r = check_e2(&LambdaSequence::kronecker(2).unwrap(), 1, 1, TOL, CAP);
        assert_eq!((r.verdict, r.checked), (Verdict::Pass, 4));
        let r = check_e2(&LambdaSequence::matprod(2).unwrap(), 2, 1, TOL, CAP);
        assert_eq!((r.verdict, r.checked), (Verdict::Pass, 25));
    }

    #[test]
    fn e3_n_examples() {
        let out = check_e3_n(&LambdaSequence::kronecker(2).unwrap(), 3, 50, 0, TOL);
        assert!(out.iter().all(|r| r.verdict == Verdict::Pass), "{out:?}");
        let out = check_e3_n(&LambdaSequence::schur(3).unwrap(), 3, 200, 1, TOL);
        assert!(out.iter().all(|r| r.verdict == Verdict::Pass));
        let inner = LambdaSequence::kronecker(2).unwrap();
        let doubled = LambdaSequence::custom(
            "2kron",
            2,
            std::sync::Arc::new(|k| k * k),
            std::sync::Arc::new(move |k, a| Ok(inner.eval(k, a)?.scale_real(2.0))),
            None,
        )
        .unwrap();
        let out = check_e3_n(&doubled, 2, 20, 0, TOL);
        let n2 = out.iter().find(|r| r.condition == "N2").unwrap();
        assert_eq!(n2.verdict, Verdict::Fail);
        assert!(n2.counterexample.as_ref().unwrap().residual >= 1.0 - TOL);
        assert!((replay(&doubled, n2).unwrap() - n2.counterexample.as_ref().unwrap().residual).abs() < 1e-12);
    }

    #[test]
    fn w_examples() {
        let r = check_w1(&LambdaSequence::matprod(2).unwrap(), 2, 1, TOL);
        assert_eq!(r.verdict, Verdict::Pass);
        let r = check_w2(&LambdaSequence::kronecker(2).unwrap(), 2, 2, TOL, CAP);
        assert_eq!((r.verdict, r.checked), (Verdict::Pass, 256));
        let r = check_w2(&LambdaSequence::schur(2).unwrap(), 2, 2, TOL, CAP);
        assert_eq!(r.verdict, Verdict::Pass);
        let r = check_w2(&LambdaSequence::matprod(2).unwrap(), 2, 2, TOL, CAP);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn schur_w1_fails_with_certificate() {
        let s2 = LambdaSequence::schur(2).unwrap();
        let r = check_w1(&s2, 2, 1, TOL);
        assert_eq!(r.verdict, Verdict::Fail);
        let c = r.counterexample.as_ref().unwrap();
        assert_eq!(c.units.as_deref(), Some(&[[1, 2]][..]));
        assert!((replay(&s2, &r).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(check_w1(&s2, 1, 2, TOL).verdict, Verdict::Pass);
    }

    #[test]
    fn o1_examples() {
        assert_eq!(check_o1(&LambdaSequence::kronecker(2).unwrap(), 2, TOL, CAP).verdict, Verdict::Pass);
        assert_eq!(check_o1(&LambdaSequence::schur(2).unwrap(), 3, TOL, CAP).verdict, Verdict::Pass);
        let mp = LambdaSequence::matprod(2).unwrap();
        let r = check_o1(&mp, 2, TOL, CAP);
        assert_eq!(r.verdict, Verdict::Fail);
        let c = r.counterexample.as_ref().unwrap();
        assert_eq!(c.units.as_deref(), Some(&[[1, 2], [2, 1]][..]));
        assert_eq!(c.residual, 1.0);
        assert!((c.frobenius.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(replay(&mp, &r).unwrap(), 1.0);
    }

    #[test]
    fn o1_cap_gives_unknown() {
        let r = check_o1(&LambdaSequence::kronecker(4).unwrap(), 10, TOL, CAP);
        assert_eq!(r.verdict, Verdict::Unknown);
        assert!(r.note.unwrap().contains("cap"));
    }

    #[test]
    fn o2_examples() {
        assert_eq!(check_o2(&LambdaSequence::schur(2).unwrap(), 2, TOL, CAP).verdict, Verdict::Pass);
        let r = check_o2(&LambdaSequence::kronecker(2).unwrap(), 1, TOL, CAP);
        assert_eq!((r.verdict, r.checked), (Verdict::Pass, 4));
        let mp = LambdaSequence::matprod(2).unwrap();
        let r = check_o2(&mp, 1, TOL, CAP);
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(replay(&mp, &r).unwrap() > TOL);
    }

    #[test]
    fn o3_examples() {
        let r = check_o3(&LambdaSequence::kronecker(2).unwrap(), 2, &[2, 2], 50, 0, 1e-9, 4096);
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        let r = check_o3(&LambdaSequence::schur(2).unwrap(), 2, &[2, 2], 50, 0, 1e-9, 4096);
        assert_eq!(r.verdict, Verdict::Pass);
        let mp = LambdaSequence::matprod(2).unwrap();
        let r = check_o3(&mp, 2, &[1, 1], 50, 0, 1e-9, 4096);
        assert_eq!(r.verdict, Verdict::Fail);
        let c = r.counterexample.as_ref().unwrap();
        let xs = c.matrices.as_ref().unwrap();
        assert!(xs.iter().all(|x| x.is_psd(1e-9).unwrap().psd));
        assert!((replay(&mp, &r).unwrap() - c.residual).abs() < 1e-12);
    }

    #[test]
    fn mixed_matprod_groups_fail_order_conditions() {
        let l = LambdaSequence::mixed(&[
            GroupSpec { slots: vec![1, 2], product: Product::Matprod },
            GroupSpec { slots: vec![3, 4], product: Product::Matprod },
        ])
        .unwrap();
        assert_eq!(check_o1(&l, 2, TOL, CAP).verdict, Verdict::Fail);
        assert_eq!(check_e2(&l, 1, 2, TOL, CAP).verdict, Verdict::Pass);
    }

    #[test]
    fn report_is_deterministic() {
        let l = LambdaSequence::kronecker(2).unwrap();
        let b = Budget { max_level: 2, trials: 20, ..Budget::default() };
        let a = serde_json::to_string(&check_all(&l, &b)).unwrap();
        let c = serde_json::to_string(&check_all(&l, &b)).unwrap();
        assert_eq!(a, c);
    }
}
