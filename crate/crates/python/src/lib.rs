//! Python bindings: the β-Gaussian distribution, lattice construction, the
//! coefficient field, single-sample PDE solves, and the convergence studies.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bgqmc::betagauss;
use bgqmc::config::StudyConfig;
use bgqmc::fem;
use bgqmc::field;
use bgqmc::lattice;
use bgqmc::studies;
use bgqmc::weights;

fn to_py_err(e: bgqmc::Error) -> PyErr {
    match e {
        bgqmc::Error::Convergence(_) | bgqmc::Error::Divergent(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

/// The univariate generalized Gaussian distribution 𝒩_β(0,1).
#[pyclass(name = "BetaGaussian")]
struct PyBetaGaussian {
    inner: betagauss::BetaGaussian,
}

#[pymethods]
impl PyBetaGaussian {
    #[new]
    fn new(beta: f64) -> PyResult<Self> {
        Ok(PyBetaGaussian { inner: betagauss::BetaGaussian::new(beta).map_err(to_py_err)? })
    }

    fn density(&self, y: f64) -> f64 {
        self.inner.density(y)
    }

    fn cdf(&self, y: f64) -> f64 {
        self.inner.cdf(y)
    }

    fn inv_cdf(&self, t: f64) -> PyResult<f64> {
        self.inner.inv_cdf(t).map_err(to_py_err)
    }

    fn abs_moment(&self, tau: f64) -> PyResult<f64> {
        self.inner.abs_moment(tau).map_err(to_py_err)
    }

    #[pyo3(signature = (alpha, tau, nu=0))]
    fn exp_moment(&self, alpha: f64, tau: f64, nu: u32) -> PyResult<f64> {
        self.inner
            .exp_moment(alpha, tau, nu, &betagauss::QuadratureSpec::default())
            .map_err(to_py_err)
    }

    #[getter]
    fn c_beta(&self) -> f64 {
        self.inner.c_beta()
    }

    fn __repr__(&self) -> String {
        format!("BetaGaussian(beta={})", self.inner.beta())
    }
}

/// A rank-1 lattice rule (prime n, generating vector z).
#[pyclass(name = "Lattice")]
struct PyLattice {
    inner: lattice::GeneratingVector,
}

#[pymethods]
impl PyLattice {
    #[new]
    fn new(n: u64, z: Vec<u64>) -> PyResult<Self> {
        Ok(PyLattice { inner: lattice::GeneratingVector::new(n, z).map_err(to_py_err)? })
    }

    #[getter]
    fn n(&self) -> u64 {
        self.inner.n
    }

    #[getter]
    fn z(&self) -> Vec<u64> {
        self.inner.z.clone()
    }

    /// The i-th shifted point, i in 1..=n.
    fn point(&self, i: u64, shift: Vec<f64>) -> PyResult<Vec<f64>> {
        if shift.len() != self.inner.dim() {
            return Err(PyValueError::new_err("shift length must equal the dimension"));
        }
        Ok(self.inner.point(i, &shift))
    }

    fn __repr__(&self) -> String {
        format!("Lattice(n={}, s={})", self.inner.n, self.inner.dim())
    }
}

fn config_from_overrides(overrides: Vec<(String, String)>) -> PyResult<StudyConfig> {
    let mut cfg = StudyConfig::default();
    for (k, v) in &overrides {
        cfg.set(k, v).map_err(to_py_err)?;
    }
    cfg.validate().map_err(to_py_err)?;
    Ok(cfg)
}

/// Construct a generating vector by the fast CBC algorithm under the POD
/// weights of the study configuration (overridable key/value pairs).
#[pyfunction]
#[pyo3(signature = (n, s, overrides=vec![]))]
fn cbc_construct(n: u64, s: usize, overrides: Vec<(String, String)>) -> PyResult<PyLattice> {
    let mut cfg = config_from_overrides(overrides)?;
    cfg.s = s;
    let setup = studies::prepare(&cfg, s).map_err(to_py_err)?;
    let g = lattice::cbc_construct(n, s, &setup.weights, &setup.kernel).map_err(to_py_err)?;
    Ok(PyLattice { inner: g })
}

#[pyfunction]
fn euler_totient(n: u64) -> u64 {
    lattice::euler_totient(n)
}

/// (lambda, kernel constant K, theoretical RMS rate) for the given
/// configuration overrides.
#[pyfunction]
#[pyo3(signature = (overrides=vec![]))]
fn space_quantities(overrides: Vec<(String, String)>) -> PyResult<(f64, f64, f64)> {
    let cfg = config_from_overrides(overrides)?;
    let sp = weights::SpaceParams::new(cfg.tau, cfg.theta, cfg.r, cfg.delta, cfg.beta)
        .map_err(to_py_err)?;
    let lambda =
        weights::select_lambda(cfg.p_resolved(), cfg.sigma, &sp).map_err(to_py_err)?;
    let k = weights::kernel_constant_k(&sp).map_err(to_py_err)?;
    Ok((lambda, k, weights::theoretical_rate(cfg.p_resolved(), &sp)))
}

/// The diffusion coefficient a(x, y) of the Gevrey family.
#[pyfunction]
fn gevrey_coeff(vartheta: f64, x: (f64, f64), y: Vec<f64>) -> PyResult<f64> {
    let f = field::GevreyField::new(vartheta, y.len().max(1)).map_err(to_py_err)?;
    Ok(f.coeff(x, &y))
}

/// Solve the Dirichlet problem on mesh level k for one parameter sample and
/// return (H¹ seminorm, L² norm) of the solution.
#[pyfunction]
fn solve_sample(vartheta: f64, k: u32, y: Vec<f64>) -> PyResult<(f64, f64)> {
    let mesh = fem::build_mesh(k).map_err(to_py_err)?;
    let f = field::GevreyField::new(vartheta, y.len().max(1)).map_err(to_py_err)?;
    let coeff = move |x: field::Point| f.coeff(x, &y);
    let sol = fem::assemble_and_solve(&mesh, &coeff, &|x| x.1).map_err(to_py_err)?;
    Ok((fem::h1_seminorm(&sol), fem::l2_norm(&sol)))
}

/// Ordinary least squares on log-log points: (slope, intercept, residual).
#[pyfunction]
fn fit_rate(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = studies::fit_rate(&points).map_err(to_py_err)?;
    Ok((f.slope, f.intercept, f.residual))
}

fn rows_and_slopes(t: studies::RateTable) -> (Vec<(f64, f64, f64)>, f64, f64) {
    (t.rows.clone(), t.fit_h1.slope, t.fit_l2.slope)
}

/// Run the QMC convergence study; returns (rows, h1_slope, l2_slope).
#[pyfunction]
#[pyo3(signature = (overrides=vec![]))]
fn qmc_study(overrides: Vec<(String, String)>) -> PyResult<(Vec<(f64, f64, f64)>, f64, f64)> {
    Ok(rows_and_slopes(
        studies::qmc_convergence_study(&config_from_overrides(overrides)?).map_err(to_py_err)?,
    ))
}

/// Run the dimension truncation study; returns (rows, h1_slope, l2_slope).
#[pyfunction]
#[pyo3(signature = (overrides=vec![]))]
fn trunc_study(overrides: Vec<(String, String)>) -> PyResult<(Vec<(f64, f64, f64)>, f64, f64)> {
    Ok(rows_and_slopes(
        studies::truncation_study(&config_from_overrides(overrides)?).map_err(to_py_err)?,
    ))
}

/// Run the finite element study; returns (rows, h1_slope, l2_slope).
#[pyfunction]
#[pyo3(signature = (overrides=vec![]))]
fn fem_study(overrides: Vec<(String, String)>) -> PyResult<(Vec<(f64, f64, f64)>, f64, f64)> {
    Ok(rows_and_slopes(
        studies::fem_study(&config_from_overrides(overrides)?).map_err(to_py_err)?,
    ))
}

#[pymodule]
fn bgqmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyBetaGaussian>()?;
    m.add_class::<PyLattice>()?;
    m.add_function(wrap_pyfunction!(cbc_construct, m)?)?;
    m.add_function(wrap_pyfunction!(euler_totient, m)?)?;
    m.add_function(wrap_pyfunction!(space_quantities, m)?)?;
    m.add_function(wrap_pyfunction!(gevrey_coeff, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sample, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(qmc_study, m)?)?;
    m.add_function(wrap_pyfunction!(trunc_study, m)?)?;
    m.add_function(wrap_pyfunction!(fem_study, m)?)?;
    Ok(())
}
