//! Python bindings: the dense tensor type, spiked-model generation, power
//! iteration, the two-step deflation, the limiting-law transforms and the
//! parameter estimation, exposed with plain Python types.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tendefl_core::asymptotics as asym;
use tendefl_core::error::Error;
use tendefl_core::estimation;
use tendefl_core::pipeline;
use tendefl_core::rank_one;
use tendefl_core::spectral;
use tendefl_core::stieltjes;
use tendefl_core::tensor;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::DimensionMismatch { .. } | Error::Parse(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Dense order-3 cubic tensor.
#[pyclass(name = "Tensor3", skip_from_py_object)]
#[derive(Clone)]
struct PyTensor3 {
    inner: tensor::Tensor3,
}

#[pymethods]
impl PyTensor3 {
    #[staticmethod]
    fn zeros(p: usize) -> PyResult<Self> {
        Ok(PyTensor3 {
            inner: tensor::Tensor3::zeros(p).map_err(to_py_err)?,
        })
    }

    /// Builds from a flat entry list in (i, j, k) order with k fastest.
    #[staticmethod]
    fn from_flat(p: usize, data: Vec<f64>) -> PyResult<Self> {
        Ok(PyTensor3 {
            inner: tensor::Tensor3::from_flat(p, data).map_err(to_py_err)?,
        })
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn get(&self, i: usize, j: usize, k: usize) -> PyResult<f64> {
        let p = self.inner.dim();
        if i >= p || j >= p || k >= p {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(i, j, k))
    }

    fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Tensor3(p={})", self.inner.dim())
    }
}

/// Planted components of one spiked realization.
#[pyclass(name = "GroundTruth", skip_from_py_object)]
#[derive(Clone)]
struct PyGroundTruth {
    #[pyo3(get)]
    x1: Vec<f64>,
    #[pyo3(get)]
    x2: Vec<f64>,
    #[pyo3(get)]
    y1: Vec<f64>,
    #[pyo3(get)]
    y2: Vec<f64>,
    #[pyo3(get)]
    z1: Vec<f64>,
    #[pyo3(get)]
    z2: Vec<f64>,
    noise: tensor::Tensor3,
}

#[pymethods]
impl PyGroundTruth {
    /// The raw (unscaled) Gaussian noise tensor of the realization.
    fn noise(&self) -> PyTensor3 {
        PyTensor3 {
            inner: self.noise.clone(),
        }
    }
}

impl PyGroundTruth {
    fn to_core(&self) -> tensor::GroundTruth {
        tensor::GroundTruth {
            x1: self.x1.clone(),
            x2: self.x2.clone(),
            y1: self.y1.clone(),
            y2: self.y2.clone(),
            z1: self.z1.clone(),
            z2: self.z2.clone(),
            noise: self.noise.clone(),
        }
    }
}

/// Rank-one factor `(lam, u, v, w)`.
#[pyclass(name = "RankOneFactor", skip_from_py_object)]
#[derive(Clone)]
struct PyFactor {
    #[pyo3(get)]
    lam: f64,
    #[pyo3(get)]
    u: Vec<f64>,
    #[pyo3(get)]
    v: Vec<f64>,
    #[pyo3(get)]
    w: Vec<f64>,
}

impl From<rank_one::RankOneFactor> for PyFactor {
    fn from(f: rank_one::RankOneFactor) -> Self {
        PyFactor {
            lam: f.lambda,
            u: f.u,
            v: f.v,
            w: f.w,
        }
    }
}

/// One two-step deflation run.
#[pyclass(name = "DeflationRun")]
struct PyDeflationRun {
    #[pyo3(get)]
    gamma: f64,
    #[pyo3(get)]
    factor1: PyFactor,
    #[pyo3(get)]
    factor2: PyFactor,
    #[pyo3(get)]
    kappa: f64,
    #[pyo3(get)]
    eta: f64,
}

/// Recovered model parameters.
#[pyclass(name = "ModelEstimate", skip_from_py_object)]
#[derive(Clone)]
struct PyEstimate {
    #[pyo3(get)]
    beta1: f64,
    #[pyo3(get)]
    beta2: f64,
    #[pyo3(get)]
    alpha: f64,
    #[pyo3(get)]
    alignments: Vec<f64>,
    #[pyo3(get)]
    residual_norm: f64,
    #[pyo3(get)]
    alpha_out_of_model: bool,
}

impl From<estimation::ModelEstimate> for PyEstimate {
    fn from(e: estimation::ModelEstimate) -> Self {
        PyEstimate {
            beta1: e.beta1_hat,
            beta2: e.beta2_hat,
            alpha: e.alpha_hat,
            alignments: vec![e.rho11, e.rho12, e.theta21, e.theta22, e.rho21, e.rho22],
            residual_norm: e.residual_norm,
            alpha_out_of_model: e.alpha_out_of_model,
        }
    }
}

/// Result of the improved deflation.
#[pyclass(name = "ImprovedResult")]
struct PyImproved {
    #[pyo3(get)]
    gamma_star: f64,
    #[pyo3(get)]
    estimate: Option<PyEstimate>,
    #[pyo3(get)]
    factor1: PyFactor,
    #[pyo3(get)]
    factor2: PyFactor,
    #[pyo3(get)]
    snr1: f64,
    #[pyo3(get)]
    snr2: f64,
    #[pyo3(get)]
    sweep_trace: Vec<(f64, f64)>,
    #[pyo3(get)]
    diagnostic: Option<String>,
}

/// Generates a rank-two spiked tensor; returns `(tensor, truth)`.
#[pyfunction]
fn gen_spiked(
    p: usize,
    beta1: f64,
    beta2: f64,
    alpha: f64,
    seed: u64,
) -> PyResult<(PyTensor3, PyGroundTruth)> {
    let model = tensor::SpikedModel {
        p,
        beta1,
        beta2,
        alpha,
        seed,
    };
    let (t, truth) = tensor::gen_spiked(&model).map_err(to_py_err)?;
    Ok((
        PyTensor3 { inner: t },
        PyGroundTruth {
            x1: truth.x1,
            x2: truth.x2,
            y1: truth.y1,
            y2: truth.y2,
            z1: truth.z1,
            z2: truth.z2,
            noise: truth.noise,
        },
    ))
}

#[pyfunction]
fn outer3(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> PyResult<PyTensor3> {
    Ok(PyTensor3 {
        inner: tensor::outer3(&x, &y, &z).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn contract3(t: &PyTensor3, u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> PyResult<f64> {
    tensor::contract3(&t.inner, &u, &v, &w).map_err(to_py_err)
}

/// Contraction of one mode with a vector, returned as a list of rows.
#[pyfunction]
fn contract1(t: &PyTensor3, v: Vec<f64>, mode: usize) -> PyResult<Vec<Vec<f64>>> {
    let m = tensor::contract1(&t.inner, &v, mode).map_err(to_py_err)?;
    Ok((0..m.rows()).map(|i| m.row(i).to_vec()).collect())
}

#[pyfunction]
fn contract2(t: &PyTensor3, a: Vec<f64>, b: Vec<f64>, free_mode: usize) -> PyResult<Vec<f64>> {
    tensor::contract2(&t.inner, &a, &b, free_mode).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (t, tol = 1e-10, max_iter = 1000))]
fn power_iteration(t: &PyTensor3, tol: f64, max_iter: usize) -> PyResult<PyFactor> {
    let cfg = rank_one::PowerIterConfig {
        tol,
        max_iter,
        init: rank_one::InitStrategy::Svd,
    };
    Ok(rank_one::power_iteration(&t.inner, &cfg)
        .map_err(to_py_err)?
        .into())
}

#[pyfunction]
#[pyo3(signature = (t, gamma, truth = None, tol = 1e-10, max_iter = 1000))]
fn deflate(
    py: Python<'_>,
    t: &PyTensor3,
    gamma: f64,
    truth: Option<&PyGroundTruth>,
    tol: f64,
    max_iter: usize,
) -> PyResult<(Py<PyDeflationRun>, Option<Vec<f64>>)> {
    let cfg = rank_one::PowerIterConfig {
        tol,
        max_iter,
        init: rank_one::InitStrategy::Svd,
    };
    let core_truth = truth.map(|tr| tr.to_core());
    let run = pipeline::deflate(&t.inner, gamma, core_truth.as_ref(), &cfg).map_err(to_py_err)?;
    // alignment summary in the order rho11, rho12, theta21, theta22, rho21, rho22
    let alignments = run.truth_alignments.as_ref().map(|al| {
        vec![
            al.rho1(0),
            al.rho1(1),
            al.theta2(0),
            al.theta2(1),
            al.rho2(0),
            al.rho2(1),
        ]
    });
    let out = Py::new(
        py,
        PyDeflationRun {
            gamma: run.gamma,
            factor1: run.factor1.into(),
            factor2: run.factor2.into(),
            kappa: run.kappa,
            eta: run.eta,
        },
    )?;
    Ok((out, alignments))
}

#[pyfunction]
#[pyo3(signature = (t, eps_step = 0.02))]
fn improved_deflation(py: Python<'_>, t: &PyTensor3, eps_step: f64) -> PyResult<Py<PyImproved>> {
    let res = pipeline::improved_deflation(&t.inner, eps_step, &pipeline::ImprovedConfig::default())
        .map_err(to_py_err)?;
    Py::new(
        py,
        PyImproved {
            gamma_star: res.gamma_star,
            estimate: res.estimate.map(Into::into),
            factor1: res.factor1_star.into(),
            factor2: res.factor2_star.into(),
            snr1: res.snr1,
            snr2: res.snr2,
            sweep_trace: res.sweep_trace,
            diagnostic: res.diagnostic,
        },
    )
}

/// Semicircle Stieltjes transform.
#[pyfunction]
fn r_semicircle(z: Complex64) -> PyResult<Complex64> {
    stieltjes::r_semicircle(z).map_err(to_py_err)
}

#[pyfunction]
fn semicircle_density(x: f64) -> f64 {
    stieltjes::semicircle_density(x)
}

/// Deformed-law fixed point; returns `(a, b, q)`.
#[pyfunction]
fn stieltjes_fixed_point(z: Complex64, tau: f64) -> PyResult<(Complex64, Complex64, Complex64)> {
    let s = stieltjes::stieltjes_fixed_point(z, tau, &stieltjes::FixedPointConfig::default())
        .map_err(to_py_err)?;
    Ok((s.a, s.b, s.q))
}

#[pyfunction]
fn support_right_edge(tau: f64) -> f64 {
    stieltjes::support_right_edge(tau)
}

/// Smoothed density of the deformed law on a grid.
#[pyfunction]
#[pyo3(signature = (xs, tau, eps = 1e-6))]
fn nu_density(xs: Vec<f64>, tau: f64, eps: f64) -> PyResult<Vec<f64>> {
    Ok(stieltjes::nu_density(&xs, tau, eps)
        .map_err(to_py_err)?
        .values)
}

/// Eigenvalues of the first-step block contraction matrix.
#[pyfunction]
fn block_spectrum(
    t: &PyTensor3,
    u: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
) -> PyResult<Vec<f64>> {
    let s = spectral::build_n(&t.inner, &u, &v, &w).map_err(to_py_err)?;
    Ok(spectral::sym_eigenvalues(&s, spectral::SpectrumSource::N)
        .map_err(to_py_err)?
        .eigenvalues)
}

/// Solves the first-step system from `(lambda1, rho11, rho12)`.
#[pyfunction]
fn solve_first(
    beta1: f64,
    beta2: f64,
    alpha: f64,
    init: (f64, f64, f64),
) -> PyResult<(f64, f64, f64)> {
    let sol = asym::solve_first(
        beta1,
        beta2,
        alpha,
        &asym::FirstStepSolution {
            lambda1: init.0,
            rho11: init.1,
            rho12: init.2,
        },
        &asym::SolverConfig::default(),
    )
    .map_err(to_py_err)?;
    Ok((sol.lambda1, sol.rho11, sol.rho12))
}

/// Estimates `(beta1, beta2, alpha)` and the alignments from the observables.
#[pyfunction]
fn estimate(lambda1: f64, lambda2: f64, eta: f64) -> PyResult<PyEstimate> {
    let obs = estimation::Observables {
        lambda1_hat: lambda1,
        lambda2_hat: lambda2,
        eta_hat: eta,
    };
    Ok(estimation::estimate(&obs, &estimation::EstimateInit::plug_in(&obs))
        .map_err(to_py_err)?
        .into())
}

#[pymodule]
fn tendefl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor3>()?;
    m.add_class::<PyGroundTruth>()?;
    m.add_class::<PyFactor>()?;
    m.add_class::<PyDeflationRun>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyImproved>()?;
    m.add_function(wrap_pyfunction!(gen_spiked, m)?)?;
    m.add_function(wrap_pyfunction!(outer3, m)?)?;
    m.add_function(wrap_pyfunction!(contract1, m)?)?;
    m.add_function(wrap_pyfunction!(contract2, m)?)?;
    m.add_function(wrap_pyfunction!(contract3, m)?)?;
    m.add_function(wrap_pyfunction!(power_iteration, m)?)?;
    m.add_function(wrap_pyfunction!(deflate, m)?)?;
    m.add_function(wrap_pyfunction!(improved_deflation, m)?)?;
    m.add_function(wrap_pyfunction!(r_semicircle, m)?)?;
    m.add_function(wrap_pyfunction!(semicircle_density, m)?)?;
    m.add_function(wrap_pyfunction!(stieltjes_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(support_right_edge, m)?)?;
    m.add_function(wrap_pyfunction!(nu_density, m)?)?;
    m.add_function(wrap_pyfunction!(block_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(solve_first, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add("SEMICIRCLE_EDGE", stieltjes::SEMICIRCLE_EDGE)?;
    Ok(())
}
