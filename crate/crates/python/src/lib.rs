//! Python extension module for the `mirrorlang` sampling library.
//!
//! The bindings keep the library's coordinate convention: a point on the
//! open probability simplex over `K` categories is passed and returned as
//! its first `K - 1` coordinates, with the last category's probability
//! implied as one minus their sum. Dual points have the same length
//! `K - 1`. Functions that produce posterior samples return full
//! probability vectors of length `K` instead, since that is the natural
//! shape for downstream use.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mirrorlang::mirror::{self, ExpMode, SimplexPoint};
use mirrorlang::samplers::{self, ChainRunSpec, GradSource, NoiseStream, StepSchedule};
use mirrorlang::{diagnostics, experiments, targets, Error};

/// Divergence is a runtime condition of the dynamics, not a bad argument;
/// everything else the library rejects is a value or I/O problem.
fn err(e: Error) -> PyErr {
    match e {
        Error::Divergence { .. } | Error::AllDiverged { .. } => PyRuntimeError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn simplex(coords: Vec<f64>) -> PyResult<SimplexPoint> {
    SimplexPoint::new(coords).map_err(err)
}

fn full_probs(x: &SimplexPoint) -> Vec<f64> {
    let mut p = x.coords().to_vec();
    p.push(x.tail());
    p
}

// ---------------------------------------------------------------------------
// entropic mirror map
// ---------------------------------------------------------------------------

/// Negative entropy of a simplex point, summed over all categories
/// including the implied tail.
#[pyfunction]
fn entropic_h(x: Vec<f64>) -> PyResult<f64> {
    mirror::entropic_h(&simplex(x)?).map_err(err)
}

/// Gradient of the negative entropy: `y_l = ln(x_l / x_tail)`.
#[pyfunction]
fn entropic_grad_h(x: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(mirror::entropic_grad_h(&simplex(x)?).map_err(err)?.into_vec())
}

/// Convex conjugate of the negative entropy: `ln(1 + sum_l exp(y_l))`.
#[pyfunction]
fn entropic_h_star(y: Vec<f64>) -> PyResult<f64> {
    mirror::entropic_h_star(&y).map_err(err)
}

/// Gradient of the conjugate, the softmax map back to the simplex. Returns
/// the first `K - 1` probabilities; the tail is one minus their sum.
#[pyfunction]
fn entropic_grad_h_star(y: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(mirror::entropic_grad_h_star(&y).map_err(err)?.coords().to_vec())
}

/// Log-determinant of the negative-entropy Hessian at a simplex point.
#[pyfunction]
fn entropic_log_det_hess_h(x: Vec<f64>) -> PyResult<f64> {
    mirror::entropic_log_det_hess_h(&simplex(x)?).map_err(err)
}

/// Solves the negative-entropy Hessian system at `x` against `v` without
/// forming the dense matrix.
#[pyfunction]
fn entropic_hess_h_solve(x: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
    mirror::entropic_hess_h_solve(&simplex(x)?, &v).map_err(err)
}

// ---------------------------------------------------------------------------
// Burg map on the positive half-line
// ---------------------------------------------------------------------------

/// Burg potential `-ln x` on the positive half-line.
#[pyfunction]
fn burg_h(x: f64) -> PyResult<f64> {
    mirror::burg_h(x).map_err(err)
}

/// Burg mirror map `-1 / x`, sending the half-line to the negative axis.
#[pyfunction]
fn burg_grad_h(x: f64) -> PyResult<f64> {
    mirror::burg_grad_h(x).map_err(err)
}

/// Conjugate of the Burg potential on the negative axis.
#[pyfunction]
fn burg_h_star(y: f64) -> PyResult<f64> {
    mirror::burg_h_star(y).map_err(err)
}

/// Inverse Burg map `-1 / y` back to the positive half-line.
#[pyfunction]
fn burg_grad_h_star(y: f64) -> PyResult<f64> {
    mirror::burg_grad_h_star(y).map_err(err)
}

// ---------------------------------------------------------------------------
// Dirichlet posterior model
// ---------------------------------------------------------------------------

/// Dirichlet posterior over `K` categories with observed counts and prior
/// parameters. Primal points are the first `K - 1` probabilities; dual
/// points are their images under the entropic mirror map.
#[pyclass(frozen)]
struct DirichletModel {
    inner: targets::DirichletModel,
}

#[pymethods]
impl DirichletModel {
    #[new]
    fn new(counts: Vec<f64>, params: Vec<f64>) -> PyResult<Self> {
        Ok(DirichletModel { inner: targets::DirichletModel::new(counts, params).map_err(err)? })
    }

    /// The sparse 11-category benchmark model: counts
    /// `(10000, 10, 10, 0, ..., 0)` with concentration `0.1` everywhere.
    #[staticmethod]
    fn sparse_benchmark() -> Self {
        DirichletModel { inner: targets::DirichletModel::sparse_benchmark() }
    }

    /// Dual dimension `K - 1`.
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Number of categories `K`.
    #[getter]
    fn num_categories(&self) -> usize {
        self.inner.num_categories()
    }

    /// Observed counts per category.
    #[getter]
    fn counts(&self) -> Vec<f64> {
        self.inner.counts().to_vec()
    }

    /// Prior concentration parameters per category.
    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    /// Smoothness constant of the dual potential: total counts plus total
    /// prior mass.
    #[getter]
    fn dual_smoothness(&self) -> f64 {
        self.inner.dual_smoothness()
    }

    /// Posterior Dirichlet shape parameters, `counts + params`.
    #[getter]
    fn posterior_shape(&self) -> Vec<f64> {
        self.inner.posterior_shape()
    }

    /// Unique stationary point of the dual potential.
    #[getter]
    fn dual_mode(&self) -> Vec<f64> {
        self.inner.dual_mode()
    }

    /// Primal potential (negative unnormalized log-density) at a simplex
    /// point.
    fn v(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.v(&simplex(x)?).map_err(err)
    }

    /// Gradient of the primal potential.
    fn grad_v(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad_v(&simplex(x)?).map_err(err)
    }

    /// Dual potential at a dual point.
    fn w(&self, y: Vec<f64>) -> PyResult<f64> {
        self.inner.w(&y).map_err(err)
    }

    /// Gradient of the dual potential. Every coordinate is bounded by the
    /// dual smoothness constant, so dual chains cannot blow up.
    fn grad_w(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad_w(&y).map_err(err)
    }

    /// Dual-potential Hessian applied to a vector, computed matrix-free.
    fn hess_w_apply(&self, y: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.hess_w_apply(&y, &v).map_err(err)
    }

    /// Initial-divergence proxy used by `smld_step_size_bound`: squared
    /// distance from `y0` to the dual mode plus the stationary dual
    /// fluctuation scale.
    fn default_r0_sq(&self, y0: Vec<f64>) -> PyResult<f64> {
        samplers::default_r0_sq(&self.inner, &y0).map_err(err)
    }

    /// Draws `n` exact posterior samples via normalized Gamma variates.
    /// Returns full probability vectors of length `num_categories`.
    #[pyo3(signature = (n, seed = 0))]
    fn exact_samples(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let mut noise = NoiseStream::for_chain(seed, 0);
        (0..n)
            .map(|_| {
                let x = samplers::sample_dirichlet_exact(&self.inner, &mut noise).map_err(err)?;
                Ok(full_probs(&x))
            })
            .collect()
    }

    /// One approximate posterior sample: runs the mirrored Langevin chain
    /// for `iters` steps of size `beta` from the dual origin and maps the
    /// final state back to the simplex. Distinct `(seed, chain)` pairs give
    /// independent noise streams. Returns a full probability vector.
    #[pyo3(signature = (beta, iters, seed = 0, chain = 0))]
    fn mld_sample(&self, beta: f64, iters: u64, seed: u64, chain: u64) -> PyResult<Vec<f64>> {
        let spec = ChainRunSpec {
            model: &self.inner,
            schedule: StepSchedule::Constant(beta),
            iters,
            grad: GradSource::Full,
            exp_mode: ExpMode::Exact,
        };
        let mut noise = NoiseStream::for_chain(seed, chain);
        let y0 = vec![0.0; self.inner.dim()];
        let y = samplers::run_dual_chain(&spec, &y0, &mut noise, &[], |_, _| {}).map_err(err)?;
        let x = mirror::entropic_grad_h_star(&y).map_err(err)?;
        Ok(full_probs(&x))
    }

    fn __repr__(&self) -> String {
        format!("DirichletModel(counts={:?}, params={:?})", self.inner.counts(), self.inner.params())
    }
}

// ---------------------------------------------------------------------------
// samplers and diagnostics
// ---------------------------------------------------------------------------

/// Largest constant step size for which the mean-square dual error bound
/// reaches its target after `t_steps` iterations, given initial divergence
/// proxy `r0_sq`, dual smoothness `l_smooth`, dimension `dim`, and
/// stochastic-gradient variance `sigma_sq`. Scales as `t_steps^(-1/2)` once
/// the variance term dominates.
#[pyfunction]
fn smld_step_size_bound(t_steps: u64, r0_sq: f64, l_smooth: f64, dim: usize, sigma_sq: f64) -> PyResult<f64> {
    samplers::smld_step_size_bound(t_steps, r0_sq, l_smooth, dim, sigma_sq).map_err(err)
}

/// Sample mean and variance of the reflected square-root diffusion
/// `dX = a (b - X) dt + c sqrt(X) dB` after discarding `burn_in` of `iters`
/// Euler steps of size `beta`, started at the stationary mean `b`.
#[pyfunction]
#[pyo3(signature = (a, b, c, beta, iters, burn_in, seed = 0))]
fn cir_moments(a: f64, b: f64, c: f64, beta: f64, iters: u64, burn_in: u64, seed: u64) -> PyResult<(f64, f64)> {
    let params = samplers::CirParams::new(a, b, c).map_err(err)?;
    let mut noise = NoiseStream::for_chain(seed, 0);
    samplers::run_cir_moments(&params, beta, iters, burn_in, &mut noise).map_err(err)
}

/// Total-variation distance between the histograms of two sample sets on
/// `[0, 1]`, each binned into `bins` equal-width cells.
#[pyfunction]
fn tv_from_samples(a: Vec<f64>, b: Vec<f64>, bins: usize) -> PyResult<f64> {
    let ha = diagnostics::histogram_build(&a, bins).map_err(err)?;
    let hb = diagnostics::histogram_build(&b, bins).map_err(err)?;
    diagnostics::tv_distance(&ha, &hb).map_err(err)
}

/// Squared 1-d Wasserstein-2 distance between two equal-size empirical
/// distributions.
#[pyfunction]
fn wasserstein1d_sq(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    diagnostics::wasserstein1d_sq(&a, &b).map_err(err)
}

/// Log-log least-squares fit of a `(iteration, tv)` convergence curve.
/// Returns `(slope, intercept, window_lo, window_hi)`. With
/// `auto_window=True` the saturated tail of the curve is trimmed before
/// fitting.
#[pyfunction]
#[pyo3(signature = (curve, auto_window = true))]
fn rate_slope(curve: Vec<(u64, f64)>, auto_window: bool) -> PyResult<(f64, f64, u64, u64)> {
    let window = if auto_window { diagnostics::FitWindow::Auto } else { diagnostics::FitWindow::All };
    let fit = diagnostics::rate_slope(&curve, window).map_err(err)?;
    Ok((fit.slope, fit.intercept, fit.window.0, fit.window.1))
}

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

/// Runs one named experiment end to end and returns its metadata as a JSON
/// string. `name` is one of `synthetic-dirichlet`, `grid-search`,
/// `cir-demo`, `burg-demo`, or `product-simplex`; `config_json` uses the
/// same schema as the CLI config file (pass `"{}"` for the defaults). When
/// `output_dir` is given, the experiment's CSV files and `metadata.json`
/// are also written there.
#[pyfunction]
#[pyo3(signature = (name, config_json = "{}", output_dir = None))]
fn run_experiment(name: &str, config_json: &str, output_dir: Option<&str>) -> PyResult<String> {
    let experiment = experiments::Experiment::parse(name).map_err(err)?;
    let file = experiments::ConfigFile::from_json(config_json).map_err(err)?;
    let cfg = experiments::resolve_config(experiment, &file).map_err(err)?;
    let arts = experiments::run_experiment(&cfg).map_err(err)?;
    if let Some(dir) = output_dir {
        experiments::write_artifacts(&arts, std::path::Path::new(dir)).map_err(err)?;
    }
    serde_json::to_string_pretty(&arts.metadata).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Sampling on probability simplices by running Langevin dynamics in a
/// mirror-dual space: entropic mirror calculus, Dirichlet-posterior
/// potentials, chain runners, diagnostics, and the reproducible experiment
/// drivers behind the `mirrorlang` CLI.
#[pymodule]
fn mirrorlang_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<DirichletModel>()?;
    m.add_function(wrap_pyfunction!(entropic_h, m)?)?;
    m.add_function(wrap_pyfunction!(entropic_grad_h, m)?)?;
    m.add_function(wrap_pyfunction!(entropic_h_star, m)?)?;
    m.add_function(wrap_pyfunction!(entropic_grad_h_star, m)?)?;
    m.add_function(wrap_pyfunction!(entropic_log_det_hess_h, m)?)?;
    m.add_function(wrap_pyfunction!(entropic_hess_h_solve, m)?)?;
    m.add_function(wrap_pyfunction!(burg_h, m)?)?;
    m.add_function(wrap_pyfunction!(burg_grad_h, m)?)?;
    m.add_function(wrap_pyfunction!(burg_h_star, m)?)?;
    m.add_function(wrap_pyfunction!(burg_grad_h_star, m)?)?;
    m.add_function(wrap_pyfunction!(smld_step_size_bound, m)?)?;
    m.add_function(wrap_pyfunction!(cir_moments, m)?)?;
    m.add_function(wrap_pyfunction!(tv_from_samples, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1d_sq, m)?)?;
    m.add_function(wrap_pyfunction!(rate_slope, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("DEFAULT_MLD_BETA", experiments::DEFAULT_MLD_BETA)?;
    m.add("DEFAULT_SGRLD_BETA", experiments::DEFAULT_SGRLD_BETA)?;
    m.add("DEFAULT_MLD_GRID", experiments::DEFAULT_MLD_GRID.to_vec())?;
    m.add("DEFAULT_SGRLD_GRID", experiments::DEFAULT_SGRLD_GRID.to_vec())?;
    Ok(())
}
