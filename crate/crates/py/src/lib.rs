//! Python bindings. Matrices cross the boundary as lists of rows
//! (`list[list[float]]`); a NumPy array converts with `.tolist()`.

use misisun::baselines::{solve_sunsal as sunsal, SunsalConfig};
use misisun::metrics;
use misisun::quec::quec_prepare;
use misisun::simulate::{self, Sim1Spec, Sim2Spec, SyntheticLibrarySpec};
use misisun::solver;
use misisun::{EndmemberMatrix, HsiMatrix, SolveResult, SolverConfig, SpectralLibrary, UnmixError};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<f64>>;

fn to_py_err(e: UnmixError) -> PyErr {
    match e.exit_code() {
        3 => PyOSError::new_err(e.to_string()),
        4 => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Row lists to a dense matrix; every row must have the same length.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err("matrix must be non-empty".into());
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(format!("row {i} has {} values, expected {ncols}", rows[i].len()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn mat(rows: Rows) -> PyResult<DMatrix<f64>> {
    matrix_from_rows(&rows).map_err(PyValueError::new_err)
}

fn hsi(rows: Rows) -> PyResult<HsiMatrix> {
    HsiMatrix::new(mat(rows)?).map_err(to_py_err)
}

fn lib(rows: Rows) -> PyResult<SpectralLibrary> {
    SpectralLibrary::new(mat(rows)?).map_err(to_py_err)
}

fn endmembers(rows: Rows) -> PyResult<EndmemberMatrix> {
    EndmemberMatrix::given(mat(rows)?).map_err(to_py_err)
}

/// Solver hyperparameters.
#[pyclass(name = "SolverConfig", skip_from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    inner: SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (r, preset = "simulated"))]
    fn new(r: usize, preset: &str) -> PyResult<Self> {
        let inner = match preset {
            "simulated" => SolverConfig::simulated(r),
            "quick" => SolverConfig::quick(r),
            "cuprite" => SolverConfig::cuprite(r),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown preset {other:?} (simulated, quick, cuprite)"
                )))
            }
        };
        Ok(Self { inner })
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r
    }
    #[setter]
    fn set_r(&mut self, v: usize) {
        self.inner.r = v;
    }
    #[getter]
    fn outer_iters(&self) -> usize {
        self.inner.outer_iters
    }
    #[setter]
    fn set_outer_iters(&mut self, v: usize) {
        self.inner.outer_iters = v;
    }
    #[getter]
    fn a_iters(&self) -> usize {
        self.inner.a_iters
    }
    #[setter]
    fn set_a_iters(&mut self, v: usize) {
        self.inner.a_iters = v;
    }
    #[getter]
    fn b_iters(&self) -> usize {
        self.inner.b_iters
    }
    #[setter]
    fn set_b_iters(&mut self, v: usize) {
        self.inner.b_iters = v;
    }
    #[getter]
    fn mu_a(&self) -> f64 {
        self.inner.mu_a
    }
    #[setter]
    fn set_mu_a(&mut self, v: f64) {
        self.inner.mu_a = v;
    }
    #[getter]
    fn mu_b1(&self) -> f64 {
        self.inner.mu_b1
    }
    #[setter]
    fn set_mu_b1(&mut self, v: f64) {
        self.inner.mu_b1 = v;
    }
    #[getter]
    fn mu_b2(&self) -> f64 {
        self.inner.mu_b2
    }
    #[setter]
    fn set_mu_b2(&mut self, v: f64) {
        self.inner.mu_b2 = v;
    }
    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }
    #[setter]
    fn set_lambda_(&mut self, v: f64) {
        self.inner.lambda = v;
    }
    #[getter]
    fn tol_obj(&self) -> f64 {
        self.inner.tol_obj
    }
    #[setter]
    fn set_tol_obj(&mut self, v: f64) {
        self.inner.tol_obj = v;
    }
    #[getter]
    fn asc_renormalize(&self) -> bool {
        self.inner.asc_renormalize
    }
    #[setter]
    fn set_asc_renormalize(&mut self, v: bool) {
        self.inner.asc_renormalize = v;
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "SolverConfig(r={}, outer_iters={}, a_iters={}, b_iters={}, mu_a={}, mu_b1={}, mu_b2={}, lambda_={}, tol_obj={}, asc_renormalize={})",
            c.r, c.outer_iters, c.a_iters, c.b_iters, c.mu_a, c.mu_b1, c.mu_b2, c.lambda, c.tol_obj,
            if c.asc_renormalize { "True" } else { "False" }
        )
    }
}

/// Output of a two-block solve.
#[pyclass(name = "SolveResult")]
struct PySolveResult {
    inner: SolveResult,
}

#[pymethods]
impl PySolveResult {
    /// `r × n` abundances.
    #[getter]
    fn abundances(&self) -> Rows {
        matrix_to_rows(self.inner.abundances.data())
    }
    /// `m × r` mixing matrix.
    #[getter]
    fn mixing(&self) -> Rows {
        matrix_to_rows(self.inner.mixing.data())
    }
    /// `p × r` endmembers.
    #[getter]
    fn endmembers(&self) -> Rows {
        matrix_to_rows(self.inner.endmembers.data())
    }
    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.inner.objective_trace.clone()
    }
    #[getter]
    fn iterations_run(&self) -> usize {
        self.inner.iterations_run
    }
    #[getter]
    fn wall_time_seconds(&self) -> f64 {
        self.inner.wall_time_seconds
    }
    #[getter]
    fn abundance_sum_residual(&self) -> f64 {
        self.inner.abundance_sum_residual
    }
    #[getter]
    fn mixing_sum_residual(&self) -> f64 {
        self.inner.mixing_sum_residual
    }
    #[getter]
    fn config(&self) -> PySolverConfig {
        PySolverConfig {
            inner: self.inner.config.clone(),
        }
    }
}

#[pyfunction]
fn solve_misisun(
    py: Python<'_>,
    y: Rows,
    d: Rows,
    config: PyRef<'_, PySolverConfig>,
) -> PyResult<PySolveResult> {
    let (y, d, cfg) = (hsi(y)?, lib(d)?, config.inner.clone());
    let inner = py
        .detach(|| solver::solve_misisun(&y, &d, &cfg))
        .map_err(to_py_err)?;
    Ok(PySolveResult { inner })
}

#[pyfunction]
fn solve_fasun(
    py: Python<'_>,
    y: Rows,
    d: Rows,
    config: PyRef<'_, PySolverConfig>,
) -> PyResult<PySolveResult> {
    let (y, d, cfg) = (hsi(y)?, lib(d)?, config.inner.clone());
    let inner = py
        .detach(|| solver::solve_fasun(&y, &d, &cfg))
        .map_err(to_py_err)?;
    Ok(PySolveResult { inner })
}

/// Abundances for known endmembers.
#[pyfunction]
#[pyo3(signature = (y, e, mu_a = 50.0, iters = 2000))]
fn solve_fclsu(py: Python<'_>, y: Rows, e: Rows, mu_a: f64, iters: usize) -> PyResult<Rows> {
    let (y, e) = (hsi(y)?, endmembers(e)?);
    let a = py
        .detach(|| solver::solve_fclsu(&y, &e, mu_a, iters))
        .map_err(to_py_err)?;
    Ok(matrix_to_rows(a.data()))
}

/// Sparse regression over the library; returns `m × n` abundances.
#[pyfunction]
#[pyo3(signature = (y, d, lambda_l1 = 1e-3, mu = 0.1, iters = 2000, enforce_asc = false, enforce_anc = true))]
#[allow(clippy::too_many_arguments)]
fn solve_sunsal(
    py: Python<'_>,
    y: Rows,
    d: Rows,
    lambda_l1: f64,
    mu: f64,
    iters: usize,
    enforce_asc: bool,
    enforce_anc: bool,
) -> PyResult<Rows> {
    let (y, d) = (hsi(y)?, lib(d)?);
    let cfg = SunsalConfig {
        lambda_l1,
        mu,
        iters,
        enforce_asc,
        enforce_anc,
    };
    let x = py.detach(|| sunsal(&y, &d, &cfg)).map_err(to_py_err)?;
    Ok(matrix_to_rows(x.data()))
}

/// `argmin ½‖T − E·X‖² + (μ/2)‖X − G‖²` subject to unit column sums.
#[pyfunction]
fn quec_solve(e: Rows, t: Rows, g: Rows, mu: f64) -> PyResult<Rows> {
    let f = quec_prepare(&mat(e)?, mu).map_err(to_py_err)?;
    let x = f.solve(&mat(t)?, &mat(g)?).map_err(to_py_err)?;
    Ok(matrix_to_rows(&x))
}

#[pyfunction]
fn sre_db(a_true: Rows, a_est: Rows) -> PyResult<f64> {
    metrics::sre_db_raw(&mat(a_true)?, &mat(a_est)?).map_err(to_py_err)
}

#[pyfunction]
fn sad_degrees(e_ref: Vec<f64>, e_est: Vec<f64>) -> PyResult<f64> {
    metrics::sad_degrees(&e_ref, &e_est).map_err(to_py_err)
}

/// Estimated column matched to each reference column.
#[pyfunction]
fn align_endmembers(e_ref: Rows, e_est: Rows) -> PyResult<Vec<usize>> {
    metrics::align_endmembers(&endmembers(e_ref)?, &endmembers(e_est)?).map_err(to_py_err)
}

#[pyfunction]
fn reconstruction_rmse(y: Rows, e: Rows, a: Rows) -> PyResult<f64> {
    metrics::reconstruction_rmse_raw(&mat(y)?, &mat(e)?, &mat(a)?).map_err(to_py_err)
}

/// Returns `(D, E, B)`.
#[pyfunction]
#[pyo3(signature = (bands = 224, atoms = 60, endmembers = 6, seed = 0, smoothness = 6.0, variability = 0, atoms_per_endmember = 3))]
fn generate_library(
    bands: usize,
    atoms: usize,
    endmembers: usize,
    seed: u64,
    smoothness: f64,
    variability: usize,
    atoms_per_endmember: usize,
) -> PyResult<(Rows, Rows, Rows)> {
    let lib = simulate::generate_library(&SyntheticLibrarySpec {
        bands,
        atoms,
        endmembers,
        smoothness,
        variability,
        atoms_per_endmember,
        seed,
    })
    .map_err(to_py_err)?;
    Ok((
        matrix_to_rows(lib.library.data()),
        matrix_to_rows(lib.endmembers.data()),
        matrix_to_rows(lib.mixing.data()),
    ))
}

/// Squares scene; returns `(Y, A)`.
#[pyfunction]
#[pyo3(signature = (endmembers, snr_db = 30.0, seed = 0))]
fn generate_sim1(endmembers: Rows, snr_db: f64, seed: u64) -> PyResult<(Rows, Rows)> {
    let e = self::endmembers(endmembers)?;
    let (y, a) = simulate::generate_sim1(&Sim1Spec { snr_db, seed }, &e).map_err(to_py_err)?;
    Ok((matrix_to_rows(y.data()), matrix_to_rows(a.data())))
}

/// Purity-filtered Dirichlet scene; returns `(Y, A)`.
#[pyfunction]
#[pyo3(signature = (endmembers, rho = 0.8, snr_db = 30.0, seed = 0, height = 100, width = 100))]
fn generate_sim2(
    endmembers: Rows,
    rho: f64,
    snr_db: f64,
    seed: u64,
    height: usize,
    width: usize,
) -> PyResult<(Rows, Rows)> {
    let e = self::endmembers(endmembers)?;
    let spec = Sim2Spec {
        height,
        width,
        ..Sim2Spec::new(rho, snr_db, seed)
    };
    let (y, a) = simulate::generate_sim2(&spec, &e).map_err(to_py_err)?;
    Ok((matrix_to_rows(y.data()), matrix_to_rows(a.data())))
}

#[pyfunction]
fn add_noise(y: Rows, snr_db: f64, seed: u64) -> PyResult<Rows> {
    let noisy = simulate::add_noise(&hsi(y)?, snr_db, seed).map_err(to_py_err)?;
    Ok(matrix_to_rows(noisy.data()))
}

#[pymodule]
fn misisun_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(solve_misisun, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fasun, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fclsu, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sunsal, m)?)?;
    m.add_function(wrap_pyfunction!(quec_solve, m)?)?;
    m.add_function(wrap_pyfunction!(sre_db, m)?)?;
    m.add_function(wrap_pyfunction!(sad_degrees, m)?)?;
    m.add_function(wrap_pyfunction!(align_endmembers, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruction_rmse, m)?)?;
    m.add_function(wrap_pyfunction!(generate_library, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sim1, m)?)?;
    m.add_function(wrap_pyfunction!(generate_sim2, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
