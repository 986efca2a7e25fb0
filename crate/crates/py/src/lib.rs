//! Python bindings for the selection engine: margin models, the
//! stochastic-search fit with predictive evaluation, Bayes factors and the
//! spatial activation mapper.

use copula_bvs::bayes_factor::{log_bayes_factor as bf_core, BfRequest};
use copula_bvs::copula::RegressionData;
use copula_bvs::margins::{fit_margin, MarginKind};
use copula_bvs::predict;
use copula_bvs::priors::GPrior;
use copula_bvs::sampler::{run_chain, SamplerConfig, Trace};
use copula_bvs::spatial;
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(PyValueError::new_err("design matrix must be non-empty"));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("design rows have unequal lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

/// A calibrated univariate margin.
#[pyclass(name = "MarginModel")]
struct PyMarginModel {
    inner: copula_bvs::margins::MarginModel,
}

#[pymethods]
impl PyMarginModel {
    /// Fit a margin: kind is one of "kde", "empirical", "normal", "lognormal".
    #[staticmethod]
    fn fit(sample: Vec<f64>, kind: &str) -> PyResult<Self> {
        let kind = MarginKind::parse(kind).map_err(err)?;
        Ok(PyMarginModel {
            inner: fit_margin(&sample, kind).map_err(err)?,
        })
    }

    #[staticmethod]
    fn normal(mu: f64, sd: f64) -> Self {
        PyMarginModel {
            inner: copula_bvs::margins::MarginModel::normal(mu, sd),
        }
    }

    #[staticmethod]
    fn lognormal(mu: f64, sd: f64) -> Self {
        PyMarginModel {
            inner: copula_bvs::margins::MarginModel::lognormal(mu, sd),
        }
    }

    fn density(&self, y: f64) -> f64 {
        self.inner.density(y)
    }

    fn cdf(&self, y: f64) -> f64 {
        self.inner.cdf(y)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.inner.quantile(u)
    }

    fn pit(&self, ys: Vec<f64>) -> Vec<f64> {
        self.inner.pit_transform(&ys)
    }

    fn inverse_pit(&self, z: f64) -> f64 {
        self.inner.inverse_pit(z)
    }

    fn kind(&self) -> String {
        self.inner.kind().name().to_string()
    }
}

/// A fitted selection model holding the Monte Carlo trace.
#[pyclass(name = "SelectionFit")]
struct PySelectionFit {
    data: RegressionData,
    margin: copula_bvs::margins::MarginModel,
    trace: Trace,
}

#[pymethods]
impl PySelectionFit {
    fn inclusion_probabilities(&self) -> PyResult<Vec<f64>> {
        self.trace.inclusion_probabilities().map_err(err)
    }

    /// The k most visited models as (bitstring, frequency) pairs.
    fn top_models(&self, k: usize) -> Vec<(String, f64)> {
        self.trace
            .top_models(k)
            .into_iter()
            .map(|(gamma, f)| {
                (
                    gamma
                        .iter()
                        .map(|&b| if b { '1' } else { '0' })
                        .collect::<String>(),
                    f,
                )
            })
            .collect()
    }

    fn posterior_median_g(&self) -> PyResult<f64> {
        self.trace.posterior_median_g().map_err(err)
    }

    fn trace_g(&self) -> Vec<f64> {
        self.trace.records.iter().map(|r| r.g).collect()
    }

    /// Predictive density evaluated on a response grid for a covariate row
    /// (raw scale; training centering offsets are applied internally).
    fn predictive_density(&self, x_new: Vec<f64>, y_grid: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = self.shift(x_new)?;
        predict::predictive_density(&self.trace, &self.data, &self.margin, &x, &y_grid)
            .map_err(err)
    }

    /// Regression-function estimate at a covariate row.
    fn predictive_mean(&self, x_new: Vec<f64>) -> PyResult<f64> {
        let x = self.shift(x_new)?;
        predict::predictive_mean(&self.trace, &self.data, &self.margin, &x).map_err(err)
    }
}

impl PySelectionFit {
    fn shift(&self, x_new: Vec<f64>) -> PyResult<DVector<f64>> {
        if x_new.len() != self.data.p() {
            return Err(PyValueError::new_err(format!(
                "x_new has {} covariates, design has {}",
                x_new.len(),
                self.data.p()
            )));
        }
        Ok(DVector::from_iterator(
            x_new.len(),
            x_new
                .iter()
                .zip(self.data.offsets.iter())
                .map(|(v, o)| v - o),
        ))
    }
}

/// Fit the selection model to (y, X).
#[pyfunction]
#[pyo3(signature = (y, x, margin="kde", g_prior="hyper-g", hyper_a=4.0, sweeps=2000, burnin=500, seed=0))]
#[allow(clippy::too_many_arguments)]
fn fit_selection(
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    margin: &str,
    g_prior: &str,
    hyper_a: f64,
    sweeps: usize,
    burnin: usize,
    seed: u64,
) -> PyResult<PySelectionFit> {
    let xm = to_matrix(x)?;
    let kind = MarginKind::parse(margin).map_err(err)?;
    let margin_model = fit_margin(&y, kind).map_err(err)?;
    let data = RegressionData::new(y, xm, &margin_model).map_err(err)?;
    let prior = GPrior::parse(g_prior, data.n(), hyper_a).map_err(err)?;
    let trace = run_chain(&data, &prior, &SamplerConfig::new(sweeps, burnin, seed)).map_err(err)?;
    Ok(PySelectionFit {
        data,
        margin: margin_model,
        trace,
    })
}

/// log Bayes factor between two indicator bitstrings.
#[pyfunction]
#[pyo3(signature = (y, x, model_a, model_b, margin="kde", g_prior="hyper-g", hyper_a=4.0, nodes=201))]
#[allow(clippy::too_many_arguments)]
fn log_bayes_factor(
    y: Vec<f64>,
    x: Vec<Vec<f64>>,
    model_a: &str,
    model_b: &str,
    margin: &str,
    g_prior: &str,
    hyper_a: f64,
    nodes: usize,
) -> PyResult<f64> {
    let xm = to_matrix(x)?;
    let kind = MarginKind::parse(margin).map_err(err)?;
    let margin_model = fit_margin(&y, kind).map_err(err)?;
    let data = RegressionData::new(y, xm, &margin_model).map_err(err)?;
    let p = data.p();
    let parse = |s: &str| -> PyResult<Vec<bool>> {
        if s.len() != p {
            return Err(PyValueError::new_err(format!(
                "model bitstring `{s}` has {} bits, design has {p}",
                s.len()
            )));
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(PyValueError::new_err(format!("bad bit `{other}`"))),
            })
            .collect()
    };
    let prior = GPrior::parse(g_prior, data.n(), hyper_a).map_err(err)?;
    let mut req = BfRequest::new(parse(model_a)?, parse(model_b)?, prior);
    req.nodes = nodes;
    bf_core(&data, &req).map_err(err)
}

/// Activation threshold implied by the chi-square(1) deviance cutoff.
#[pyfunction]
fn activation_threshold() -> f64 {
    spatial::default_activation_threshold()
}

/// Fit the spatial activation model from a dataset manifest path. Returns a
/// dict with probability/amplitude/binary grids (row-major) and summaries.
#[pyfunction]
#[pyo3(signature = (manifest_path, g_prior="hyper-g", sweeps=2000, burnin=500, seed=0, margin="kde"))]
fn fit_fmri(
    py: Python<'_>,
    manifest_path: &str,
    g_prior: &str,
    sweeps: usize,
    burnin: usize,
    seed: u64,
    margin: &str,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let dataset = spatial::FmriDataset::load(std::path::Path::new(manifest_path)).map_err(err)?;
    let prior = GPrior::parse(g_prior, dataset.t_len, 4.0).map_err(err)?;
    let mut config = spatial::SpatialConfig::new(sweeps, burnin, seed, prior);
    config.margin = MarginKind::parse(margin).map_err(err)?;
    let fit = spatial::fit_spatial(&dataset, &config, None).map_err(err)?;

    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("rows", fit.rows)?;
    dict.set_item("cols", fit.cols)?;
    dict.set_item("probability", fit.probability.clone())?;
    dict.set_item("amplitude", fit.amplitude.clone())?;
    dict.set_item("binary", fit.binary.clone())?;
    dict.set_item("threshold", fit.threshold)?;
    dict.set_item("mls_overall", fit.mls.overall)?;
    dict.set_item("expected_active", fit.mls.e_q)?;
    dict.set_item("g_accept_rate", fit.g_accept_rate)?;
    Ok(dict.unbind())
}

#[pyfunction]
fn version() -> &'static str {
    copula_bvs::VERSION
}

#[pymodule]
fn copula_bvs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMarginModel>()?;
    m.add_class::<PySelectionFit>()?;
    m.add_function(wrap_pyfunction!(fit_selection, m)?)?;
    m.add_function(wrap_pyfunction!(log_bayes_factor, m)?)?;
    m.add_function(wrap_pyfunction!(activation_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fmri, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
