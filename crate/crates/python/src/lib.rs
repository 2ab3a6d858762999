//! Python bindings for `rotlab-core`. Exact rationals cross the boundary as
//! strings (`"n/d"`, integers or decimal literals); high-precision reals come
//! back as 30-digit strings with a `float` companion where useful.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rotlab_core::analysis::{self, Kind};
use rotlab_core::field::{self, TruncatedField};
use rotlab_core::flow::{self, ClosedFormTrajectory};
use rotlab_core::liouville::{self, LiouvilleSpec};
use rotlab_core::precision::{self, format_sig, parse_rational, rational_string, BigRational, RealHp};
use rotlab_core::{cli, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rat(s: &str) -> PyResult<BigRational> {
    parse_rational(s).map_err(py_err)
}

fn fmt(x: &RealHp) -> String {
    format!("{x:.30}")
}

fn spec(base: u64, truncation: usize) -> PyResult<LiouvilleSpec> {
    LiouvilleSpec::new(base, truncation).map_err(py_err)
}

/// Resonant chain as a list of dicts with exact `p`, `q`, `lambda`.
#[pyfunction]
#[pyo3(signature = (m, base = 10, truncation = 5))]
fn build_resonant_sequence(py: Python<'_>, m: usize, base: u64, truncation: usize) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let spec = spec(base, truncation)?;
    let modes = liouville::build_resonant_sequence(&spec, m).map_err(py_err)?;
    modes
        .iter()
        .map(|md| {
            let d = PyDict::new(py);
            d.set_item("m", md.m)?;
            d.set_item("p", md.p.to_string())?;
            d.set_item("q", md.q.to_string())?;
            d.set_item("lambda", rational_string(&md.lambda))?;
            d.set_item("amplitude", rational_string(&md.amplitude))?;
            Ok(d)
        })
        .collect()
}

/// Names of failed chain checks; empty when the chain verifies.
#[pyfunction]
#[pyo3(signature = (m, base = 10, truncation = 5))]
fn verify_chain(m: usize, base: u64, truncation: usize) -> PyResult<Vec<String>> {
    let spec = spec(base, truncation)?;
    let modes = liouville::build_resonant_sequence(&spec, m).map_err(py_err)?;
    Ok(liouville::verify_chain(&modes, &spec).failures().map(|c| c.name.clone()).collect())
}

/// `sum_{k=1}^{K} base^(-k!)` as `"n/d"`.
#[pyfunction]
#[pyo3(signature = (base = 10, truncation = 5))]
fn liouville_truncation(base: u64, truncation: usize) -> PyResult<String> {
    Ok(rational_string(&liouville::liouville_truncation(&spec(base, truncation)?)))
}

#[pyfunction]
fn reduce_phase(x: &str) -> PyResult<String> {
    Ok(rational_string(&precision::reduce_phase(&rat(x)?)))
}

/// `(sin(2 pi x), cos(2 pi x))` for an exact phase `x`.
#[pyfunction]
#[pyo3(signature = (x, bits = 512))]
fn sincos_turns(x: &str, bits: u32) -> PyResult<(String, String)> {
    let (s, c) = precision::sincos_turns(&precision::reduce_phase(&rat(x)?), bits).map_err(py_err)?;
    Ok((fmt(&s), fmt(&c)))
}

#[pyfunction]
fn tail_bound(m: usize) -> String {
    rational_string(&field::tail_bound(m))
}

#[pyclass(name = "Field", module = "rotlab")]
struct PyField {
    inner: TruncatedField,
}

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (m = 3, base = 10, truncation = 5, bits = 512))]
    fn new(m: usize, base: u64, truncation: usize, bits: u32) -> PyResult<Self> {
        let inner = TruncatedField::build(&spec(base, truncation)?, m, bits).map_err(py_err)?;
        Ok(PyField { inner })
    }

    #[getter]
    fn mode_count(&self) -> usize {
        self.inner.mode_count()
    }

    #[getter]
    fn r_k(&self) -> String {
        rational_string(&self.inner.r_k)
    }

    fn amplitude_sum(&self) -> String {
        rational_string(&self.inner.amplitude_sum())
    }

    /// `h(z)` at an exact point; returns three 30-digit strings.
    fn eval(&self, z1: &str, z2: &str, z3: &str) -> PyResult<Vec<String>> {
        let h = self.inner.eval(&[rat(z1)?, rat(z2)?, rat(z3)?]);
        Ok(h.iter().map(fmt).collect())
    }

    fn smoothness_bound<'py>(&self, py: Python<'py>, k: i64) -> PyResult<Bound<'py, PyDict>> {
        let k = u32::try_from(k).map_err(|_| PyValueError::new_err(format!("derivative order k = {k} must be non-negative")))?;
        let b = self.inner.smoothness_bound(k);
        let d = PyDict::new(py);
        d.set_item("k", k)?;
        d.set_item("majorant", fmt(&b.majorant))?;
        d.set_item("majorant_float", b.majorant.to_f64())?;
        d.set_item("majorant_rational", rational_string(&b.majorant_rational))?;
        d.set_item("comparison_holds", b.comparison_holds)?;
        Ok(d)
    }

    fn tail_bound(&self) -> PyResult<String> {
        self.inner.tail_bound().map(|t| rational_string(&t)).map_err(py_err)
    }

    fn trajectory(&self) -> PyResult<PyTrajectory> {
        Ok(PyTrajectory {
            inner: flow::solve_closed_form(&self.inner).map_err(py_err)?,
        })
    }

    /// Closed form against RK4 on `[0, t_end]`; returns `(max_error, pass)`.
    #[pyo3(signature = (t_end = "100", step = "1/100", tol = "1e-8"))]
    fn cross_validate(&self, t_end: &str, step: &str, tol: &str) -> PyResult<(f64, bool)> {
        let traj = flow::solve_closed_form(&self.inner).map_err(py_err)?;
        let series = flow::integrate_ode(&self.inner, &rat(t_end)?, &rat(step)?, self.inner.bits).map_err(py_err)?;
        let tol = RealHp::from_rational(&rat(tol)?, self.inner.bits);
        let rep = flow::cross_validate(&traj, &series, &tol).map_err(py_err)?;
        Ok((rep.max_error.to_f64(), rep.pass))
    }

    fn __repr__(&self) -> String {
        format!("Field(m={}, bits={})", self.inner.mode_count(), self.inner.bits)
    }
}

#[pyclass(name = "Trajectory", module = "rotlab")]
struct PyTrajectory {
    inner: ClosedFormTrajectory,
}

#[pymethods]
impl PyTrajectory {
    fn x3(&self, t: &str) -> PyResult<String> {
        Ok(fmt(&self.inner.x3(&rat(t)?)))
    }

    fn amplitude(&self, n: usize) -> PyResult<f64> {
        self.inner.amplitude(n).map(|a| a.to_f64()).map_err(py_err)
    }

    /// `(rho_hat_3, bound, within_bound)` at horizon `t`.
    fn weak_rotation(&self, t: &str) -> PyResult<(f64, f64, bool)> {
        let est = analysis::weak_rotation_estimate(&self.inner, &rat(t)?).map_err(py_err)?;
        Ok((est.rho_hat[2].to_f64(), est.third_component_bound.to_f64(), est.within_bound))
    }

    fn deviation<'py>(&self, py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyDict>> {
        let rep = analysis::deviation_at_resonance(&self.inner, n).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("n", n)?;
        d.set_item("t_n", rational_string(&rep.t_n))?;
        d.set_item("t_n_approx", format_sig(&rep.t_n, 30))?;
        d.set_item("x3", fmt(&rep.x3_at_tn))?;
        d.set_item("x3_float", rep.x3_at_tn.to_f64())?;
        d.set_item("lower_bound", fmt(&rep.certified_lower_bound))?;
        d.set_item("pass", rep.pass())?;
        Ok(d)
    }

    #[pyo3(signature = (n, t, kind = "sin"))]
    fn correlation<'py>(&self, py: Python<'py>, n: usize, t: &str, kind: &str) -> PyResult<Bound<'py, PyDict>> {
        let kind: Kind = kind.parse().map_err(py_err)?;
        let est = analysis::correlation(&self.inner, n, &rat(t)?, kind).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("value", est.value.to_f64())?;
        d.set_item("limit", est.limit.to_f64())?;
        d.set_item("error_bound", est.error_bound.to_f64())?;
        d.set_item("pass", est.pass())?;
        Ok(d)
    }
}

/// Runs the command line in-process; returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("rotlab".to_string()).chain(args);
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}

#[pymodule]
fn rotlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(build_resonant_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(verify_chain, m)?)?;
    m.add_function(wrap_pyfunction!(liouville_truncation, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_phase, m)?)?;
    m.add_function(wrap_pyfunction!(sincos_turns, m)?)?;
    m.add_function(wrap_pyfunction!(tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
