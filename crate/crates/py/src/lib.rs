//! Python bindings. Structured results are returned as JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use idealcore::asymptotics::{self, CoreConfig};
use idealcore::constructions::{self, CertificateConfig};
use idealcore::harness::{self, ExperimentConfig, IdealSpec, MatrixSpec, OutputFormat, SequenceSpec, Theorem};
use idealcore::matrices;
use idealcore::regularity::{CheckConfig, TestFamily};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json(v: &impl serde::Serialize) -> PyResult<String> {
    serde_json::to_string(v).map_err(err)
}

/// An ideal on the natural numbers, by name (`fin`, `z`, `eu:-1`, ...) or JSON.
#[pyclass(frozen)]
struct Ideal(idealcore::ideals::Ideal);

#[pymethods]
impl Ideal {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self(IdealSpec::parse(spec).and_then(|s| s.build()).map_err(err)?))
    }

    #[getter]
    fn label(&self) -> String {
        self.0.to_string()
    }

    /// Classification flags as JSON.
    fn classify(&self) -> PyResult<String> {
        to_json(&self.0.classify())
    }

    /// `InIdeal`, `Positive`, `InDualFilter` or `Inconclusive`.
    fn membership(&self, set: &str) -> PyResult<String> {
        let s = harness::parse_set(set).map_err(err)?;
        Ok(format!("{:?}", self.0.membership(&s)))
    }

    fn __repr__(&self) -> String {
        format!("Ideal({})", self.0)
    }
}

/// A bounded real sequence: corpus label, `harmonic`, `constant:<v>`, or JSON.
#[pyclass(frozen)]
struct Sequence(idealcore::sequences::BoundedSequence);

#[pymethods]
impl Sequence {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self(SequenceSpec::parse(spec).and_then(|s| s.build()).map_err(err)?))
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    #[getter]
    fn bound(&self) -> f64 {
        self.0.bound()
    }

    fn __getitem__(&self, n: u64) -> f64 {
        self.0.eval(n)
    }

    fn sample(&self, horizon: u64) -> Vec<f64> {
        self.0.sample(horizon)
    }

    fn __repr__(&self) -> String {
        format!("Sequence({})", self.0.label())
    }
}

/// An infinite matrix with lazily computed rows.
#[pyclass(frozen)]
struct Matrix(matrices::InfiniteMatrix);

#[pymethods]
impl Matrix {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(Self(MatrixSpec::parse(spec).and_then(|s| s.build()).map_err(err)?))
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    /// Nonzero `(column, value)` pairs of row `n`.
    fn row(&self, n: u64) -> Vec<(u64, f64)> {
        self.0.row(n).entries().collect()
    }

    fn entry(&self, n: u64, k: u64) -> f64 {
        self.0.entry(n, k)
    }

    /// `(A x)_n`.
    fn apply(&self, x: &Sequence, n: u64) -> f64 {
        matrices::transform(&self.0, &x.0, n)
    }

    fn transform_prefix(&self, x: &Sequence, horizon: u64) -> Vec<f64> {
        matrices::transform_prefix(&self.0, &x.0, horizon)
    }

    fn __repr__(&self) -> String {
        format!("Matrix({})", self.0.label())
    }
}

fn core_cfg(horizon: Option<u64>, grid: Option<f64>, theta: Option<f64>) -> CoreConfig {
    let d = CoreConfig::default();
    CoreConfig {
        horizon: horizon.unwrap_or(d.horizon),
        grid: grid.unwrap_or(d.grid),
        theta: theta.unwrap_or(d.theta),
        exact: true,
    }
}

/// `(lo, hi)` of the I-core.
#[pyfunction]
#[pyo3(name = "core", signature = (x, ideal, horizon=None, grid=None, theta=None))]
fn ideal_core(x: &Sequence, ideal: &Ideal, horizon: Option<u64>, grid: Option<f64>, theta: Option<f64>) -> PyResult<(f64, f64)> {
    let c = asymptotics::core(&x.0, &ideal.0, &core_cfg(horizon, grid, theta)).map_err(err)?;
    Ok((c.lo, c.hi))
}

/// Symbolic core of a level-structured sequence.
#[pyfunction]
fn oracle_core(x: &Sequence, ideal: &Ideal) -> PyResult<(f64, f64)> {
    let c = asymptotics::oracle_core(&x.0, &ideal.0).map_err(err)?;
    Ok((c.lo, c.hi))
}

/// Cluster point intervals as `[(lo, hi), ...]`.
#[pyfunction]
#[pyo3(signature = (x, ideal, horizon=None, grid=None, theta=None))]
fn cluster_points(
    x: &Sequence,
    ideal: &Ideal,
    horizon: Option<u64>,
    grid: Option<f64>,
    theta: Option<f64>,
) -> PyResult<Vec<(f64, f64)>> {
    let c = asymptotics::cluster_points(&x.0, &ideal.0, &core_cfg(horizon, grid, theta)).map_err(err)?;
    Ok(c.intervals)
}

/// Verdict of `st`, `allen`, `cfo` or `leo` as JSON.
#[pyfunction]
#[pyo3(signature = (theorem, matrix, ideal_i, ideal_j, horizon=None, tol=None, seed=0))]
fn check(
    theorem: &str,
    matrix: &Matrix,
    ideal_i: &Ideal,
    ideal_j: &Ideal,
    horizon: Option<u64>,
    tol: Option<f64>,
    seed: u64,
) -> PyResult<String> {
    let theorem: Theorem = serde_json::from_value(serde_json::Value::String(theorem.to_string())).map_err(err)?;
    let d = CheckConfig::default();
    let cfg = CheckConfig {
        horizon: horizon.unwrap_or(d.horizon),
        tol: tol.unwrap_or(d.tol),
        ..d
    };
    let family = TestFamily::default_for(&ideal_i.0, seed);
    let v = harness::run_check(theorem, &matrix.0, &ideal_i.0, &ideal_j.0, &family, &cfg).map_err(err)?;
    to_json(&v)
}

/// Core equality report of `A` over the corpus as JSON.
#[pyfunction]
#[pyo3(signature = (matrix, ideal_i, ideal_j, horizon=None))]
fn core_equality(matrix: &Matrix, ideal_i: &Ideal, ideal_j: &Ideal, horizon: Option<u64>) -> PyResult<String> {
    let rep = constructions::core_equality_experiment(
        &matrix.0,
        &ideal_i.0,
        &ideal_j.0,
        &idealcore::sequences::corpus(),
        &core_cfg(horizon, None, None),
    );
    to_json(&rep)
}

#[pyfunction]
#[pyo3(signature = (x, y, ideal, tol=0.01))]
fn core_stability(x: &Sequence, y: &Sequence, ideal: &Ideal, tol: f64) -> PyResult<String> {
    to_json(&constructions::core_stability_check(&x.0, &y.0, &ideal.0, &CoreConfig::default(), tol))
}

#[pyfunction]
fn sufficiency_certificate(matrix: &Matrix, x: &Sequence, epsilon: f64, ideal_i: &Ideal, ideal_j: &Ideal) -> PyResult<String> {
    let c = constructions::sufficiency_certificate(&matrix.0, &x.0, epsilon, &ideal_i.0, &ideal_j.0, &CertificateConfig::default())
        .map_err(err)?;
    to_json(&c)
}

/// Exact density of a set as a string, if known.
#[pyfunction]
fn density(set: &str) -> PyResult<String> {
    let s = harness::parse_set(set).map_err(err)?;
    Ok(s.exact_density().map_err(err)?.to_string())
}

/// Runs an experiment config (JSON text); returns the report as JSON.
#[pyfunction]
fn run_experiment(config: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let bundle = harness::run_suite(&cfg).map_err(err)?;
    harness::render(&bundle, OutputFormat::Json).map_err(err)
}

#[pyfunction]
fn catalog() -> String {
    harness::list_catalog()
}

#[pyfunction]
fn corpus_labels() -> Vec<String> {
    idealcore::sequences::corpus_labels()
}

#[pymodule]
fn idealcore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Ideal>()?;
    m.add_class::<Sequence>()?;
    m.add_class::<Matrix>()?;
    m.add_function(wrap_pyfunction!(ideal_core, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_core, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_points, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(core_equality, m)?)?;
    m.add_function(wrap_pyfunction!(core_stability, m)?)?;
    m.add_function(wrap_pyfunction!(sufficiency_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_labels, m)?)?;
    Ok(())
}
