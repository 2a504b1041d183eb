//! Python bindings: `import lt_tensor`.
//!
//! Matrices cross the boundary as lists of rows of Python `complex` values;
//! reports come back as JSON strings.

use lt_core::algebra::{self, AlgebraElement};
use lt_core::axioms::{check_all, Budget};
use lt_core::order::{self, ConeCertificate};
use lt_core::tensorspace::{self, Decomposition, SpaceSpec, TensorElement};
use lt_core::{CMatrix, LambdaSequence, LtError};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<Complex64>>;

fn err(e: LtError) -> PyErr {
    match e {
        LtError::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: Rows) -> PyResult<CMatrix> {
    CMatrix::from_rows(&rows).map_err(err)
}

fn matrices(list: Vec<Rows>) -> PyResult<Vec<CMatrix>> {
    list.into_iter().map(matrix).collect()
}

#[pyclass(name = "Lambda", frozen, module = "lt_tensor")]
struct PyLambda {
    inner: LambdaSequence,
}

#[pymethods]
impl PyLambda {
    #[staticmethod]
    fn kronecker(m: usize) -> PyResult<Self> {
        Ok(PyLambda { inner: LambdaSequence::kronecker(m).map_err(err)? })
    }

    #[staticmethod]
    fn schur(m: usize) -> PyResult<Self> {
        Ok(PyLambda { inner: LambdaSequence::schur(m).map_err(err)? })
    }

    #[staticmethod]
    fn matprod(m: usize) -> PyResult<Self> {
        Ok(PyLambda { inner: LambdaSequence::matprod(m).map_err(err)? })
    }

    /// Spec JSON such as `{"kind": "mixed", "groups": [{"slots": [1, 2], "product": "schur"}, ...]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyLambda { inner: LambdaSequence::from_json(text).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn tau(&self, k: usize) -> usize {
        self.inner.tau(k)
    }

    fn eval(&self, k: usize, args: Vec<Rows>) -> PyResult<Rows> {
        Ok(self.inner.eval(k, &matrices(args)?).map_err(err)?.to_rows())
    }

    /// Full axiom report as JSON.
    #[pyo3(signature = (max_level = 3, trials = 200, seed = 0))]
    fn check_axioms(&self, py: Python<'_>, max_level: usize, trials: usize, seed: u64) -> PyResult<String> {
        let budget = Budget { max_level, trials, seed, ..Budget::default() };
        let report = py.detach(|| check_all(&self.inner, &budget));
        serde_json::to_string(&report).map_err(json_err)
    }

    fn __repr__(&self) -> String {
        format!("Lambda({})", self.inner.name())
    }
}

#[pyclass(name = "Decomposition", module = "lt_tensor", from_py_object)]
#[derive(Clone)]
struct PyDecomposition {
    inner: Decomposition,
}

#[pymethods]
impl PyDecomposition {
    #[new]
    fn new(level: usize, alpha: Rows, factors: Vec<Rows>, beta: Rows) -> PyResult<Self> {
        let inner = Decomposition::new(level, matrix(alpha)?, matrices(factors)?, matrix(beta)?).map_err(err)?;
        Ok(PyDecomposition { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyDecomposition { inner: serde_json::from_str(text).map_err(json_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.level
    }

    #[getter]
    fn alpha(&self) -> Rows {
        self.inner.alpha.to_rows()
    }

    #[getter]
    fn beta(&self) -> Rows {
        self.inner.beta.to_rows()
    }

    #[getter]
    fn factors(&self) -> Vec<Rows> {
        self.inner.factors.iter().map(CMatrix::to_rows).collect()
    }

    /// `‖α‖ Π ‖v_t‖ ‖β‖`.
    fn value(&self) -> f64 {
        self.inner.value()
    }
}

#[pyclass(name = "ConeCertificate", module = "lt_tensor", from_py_object)]
#[derive(Clone)]
struct PyCone {
    inner: ConeCertificate,
}

#[pymethods]
impl PyCone {
    #[new]
    fn new(level: usize, alpha: Rows, factors: Vec<Rows>) -> PyResult<Self> {
        Ok(PyCone { inner: ConeCertificate::new(level, matrix(alpha)?, matrices(factors)?).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.level
    }

    fn decomposition(&self) -> PyDecomposition {
        PyDecomposition { inner: self.inner.decomposition() }
    }

    fn value(&self) -> f64 {
        self.inner.value()
    }
}

/// Flattening of the decomposition (`n·D` square, n-block outermost).
#[pyfunction]
fn realize(lambda: &PyLambda, dec: &PyDecomposition) -> PyResult<Rows> {
    Ok(tensorspace::realize(&lambda.inner, &dec.inner).map_err(err)?.flat.to_rows())
}

#[pyfunction]
fn star(lambda: &PyLambda, dec: &PyDecomposition) -> PyResult<PyDecomposition> {
    Ok(PyDecomposition { inner: tensorspace::star(&lambda.inner, &dec.inner).map_err(err)? })
}

#[pyfunction]
fn symmetrize(lambda: &PyLambda, dec: &PyDecomposition) -> PyResult<PyDecomposition> {
    Ok(PyDecomposition { inner: tensorspace::symmetrize(&lambda.inner, &dec.inner).map_err(err)? })
}

/// `(upper bound, index of best candidate)` for the element `flat` over
/// `M_n(M_{d_1} ⊗ …)`.
#[pyfunction]
fn lambda_norm_ub(
    lambda: &PyLambda,
    flat: Rows,
    n: usize,
    dims: Vec<usize>,
    candidates: Vec<PyDecomposition>,
) -> PyResult<(f64, usize)> {
    let spec = SpaceSpec::new(n, dims).map_err(err)?;
    let element = TensorElement::new(spec, matrix(flat)?).map_err(err)?;
    let cands: Vec<Decomposition> = candidates.into_iter().map(|c| c.inner).collect();
    let b = tensorspace::lambda_norm_ub(&lambda.inner, &element, &cands).map_err(err)?;
    Ok((b.upper, b.best_index))
}

/// Operator norm of a flattening.
#[pyfunction]
fn min_norm(flat: Rows) -> PyResult<f64> {
    Ok(matrix(flat)?.op_norm())
}

#[pyfunction]
fn cone_add(lambda: &PyLambda, a: &PyCone, b: &PyCone) -> PyResult<PyCone> {
    Ok(PyCone { inner: order::cone_add(&lambda.inner, &a.inner, &b.inner).map_err(err)? })
}

/// `(valid, largest factor negativity)`.
#[pyfunction]
fn verify_certificate(lambda: &PyLambda, cert: &PyCone) -> (bool, f64) {
    let c = order::verify_certificate(&lambda.inner, &cert.inner, None);
    (c.valid, c.psd_residual)
}

#[pyfunction]
fn scalar_certificate(lambda: &PyLambda, gamma: Rows, dims: Vec<usize>) -> PyResult<PyCone> {
    Ok(PyCone { inner: order::scalar_certificate(&lambda.inner, &matrix(gamma)?, &dims).map_err(err)? })
}

/// `(value, block certificate verifies)`.
#[pyfunction]
fn lambda_capital_ub(lambda: &PyLambda, dec: &PyDecomposition) -> PyResult<(f64, bool)> {
    let bc = order::lambda_capital_ub(&lambda.inner, &dec.inner).map_err(err)?;
    Ok((bc.value, order::verify_block(&lambda.inner, &bc).valid))
}

/// `(K, K', certificate of K'·1 + u, certificate of K'·1 − u)`.
#[pyfunction]
fn order_unit_bound(lambda: &PyLambda, dec: &PyDecomposition) -> PyResult<(f64, f64, PyCone, PyCone)> {
    let ob = order::order_unit_bound(&lambda.inner, &dec.inner).map_err(err)?;
    Ok((ob.k, ob.k_prime, PyCone { inner: ob.plus }, PyCone { inner: ob.minus }))
}

/// Algebra product of two `n = 1` decompositions; returns the product
/// decomposition and its flattening.
#[pyfunction]
fn multiply(lambda: &PyLambda, x: &PyDecomposition, y: &PyDecomposition) -> PyResult<(PyDecomposition, Rows)> {
    let x = AlgebraElement::new(&lambda.inner, x.inner.clone()).map_err(err)?;
    let y = AlgebraElement::new(&lambda.inner, y.inner.clone()).map_err(err)?;
    let p = algebra::multiply(&lambda.inner, &x, &y).map_err(err)?;
    Ok((PyDecomposition { inner: p.dec }, p.flat.to_rows()))
}

#[pymodule]
fn lt_tensor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLambda>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_class::<PyCone>()?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    m.add_function(wrap_pyfunction!(star, m)?)?;
    m.add_function(wrap_pyfunction!(symmetrize, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_norm_ub, m)?)?;
    m.add_function(wrap_pyfunction!(min_norm, m)?)?;
    m.add_function(wrap_pyfunction!(cone_add, m)?)?;
    m.add_function(wrap_pyfunction!(verify_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_capital_ub, m)?)?;
    m.add_function(wrap_pyfunction!(order_unit_bound, m)?)?;
    m.add_function(wrap_pyfunction!(multiply, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
