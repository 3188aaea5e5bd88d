//! Python bindings: load or fit a kernel, then query it.
//!
//! Items are plain integer indices; vocabularies stay on the Python side.

use ndpp::eval::{mpr as mpr_report, KernelModel};
use ndpp::inference::{condition_singletons, run_map, Algorithm};
use ndpp::kernel::{load_model, save_model};
use ndpp::likelihood::DEFAULT_EPS;
use ndpp::training::{train, BasketDataset, TrainConfig};
use ndpp::{NdppError, NdppParams};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBool;

create_exception!(ndpp_py, NdppException, PyValueError, "Raised for any error from the ndpp library.");

fn err(e: NdppError) -> PyErr {
    NdppException::new_err(e.to_string())
}

/// A learned kernel `L = V Vᵀ + B (D − Dᵀ) Bᵀ`.
#[pyclass(name = "Model", module = "ndpp_py", frozen)]
pub struct Model {
    params: NdppParams,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Model { params: load_model(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_model(&self.params, path).map_err(err)
    }

    /// Catalog size.
    #[getter]
    fn m(&self) -> usize {
        self.params.m()
    }

    #[getter]
    fn k(&self) -> usize {
        self.params.k()
    }

    #[getter]
    fn tied(&self) -> bool {
        self.params.is_tied()
    }

    /// Dense `M×M` kernel as nested lists. Only sensible for small catalogs.
    fn kernel(&self) -> Vec<Vec<f64>> {
        let l = self.params.materialize();
        (0..l.rows()).map(|i| (0..l.cols()).map(|j| l[(i, j)]).collect()).collect()
    }

    /// `log P(Y) = log det(L_Y) − log det(L + I)`; `-inf` when `det(L_Y) ≤ 0`.
    fn log_prob(&self, items: Vec<usize>) -> PyResult<f64> {
        let kern = self.params.to_inference_kernel();
        if let Some(&bad) = items.iter().find(|&&i| i >= kern.m()) {
            return Err(err(NdppError::UnknownItem(vec![bad.to_string()])));
        }
        let (sign, ld) = kern.subset_logdet(&items);
        if sign <= 0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(ld - kern.log_normalizer().map_err(err)?)
    }

    /// Approximate MAP subset of size `k`. Returns `(items, log_det)`.
    #[pyo3(signature = (k, algo = "greedy", seed = 0))]
    fn map(&self, py: Python<'_>, k: usize, algo: &str, seed: u64) -> PyResult<(Vec<usize>, f64)> {
        let algo: Algorithm = algo.parse().map_err(|_| PyValueError::new_err(format!("unknown algorithm {algo:?}")))?;
        let kern = self.params.to_inference_kernel();
        let r = py.detach(|| run_map(&kern, k, algo, seed)).map_err(err)?;
        Ok((r.items, r.log_det))
    }

    /// Marginal gain of every item given `basket`; zero for basket items.
    fn condition(&self, basket: Vec<usize>) -> PyResult<Vec<f64>> {
        condition_singletons(&self.params.to_inference_kernel(), &basket).map_err(err)
    }

    /// Top `top` next items as `(item, gain)`, best first.
    #[pyo3(signature = (basket, top = 10))]
    fn predict(&self, basket: Vec<usize>, top: usize) -> PyResult<Vec<(usize, f64)>> {
        if basket.len() >= self.params.m() {
            return Ok(Vec::new());
        }
        let gains = self.condition(basket.clone())?;
        let mut order: Vec<usize> = (0..gains.len()).filter(|i| !basket.contains(i)).collect();
        order.sort_by(|&i, &j| gains[j].total_cmp(&gains[i]).then(i.cmp(&j)));
        Ok(order.into_iter().take(top).map(|i| (i, gains[i])).collect())
    }

    fn __repr__(&self) -> String {
        let tied = if self.params.is_tied() { "True" } else { "False" };
        format!("Model(m={}, k={}, tied={tied})", self.params.m(), self.params.k())
    }
}

/// Fits a model to `baskets` over items `0..m`.
///
/// `config` takes the same keys as the CLI config file, e.g.
/// `{"k": 8, "max_epochs": 50}`. Returns the model and the validation
/// log-likelihood per epoch.
#[pyfunction]
#[pyo3(signature = (baskets, m, config = None))]
fn fit(
    py: Python<'_>,
    baskets: Vec<Vec<usize>>,
    m: usize,
    config: Option<std::collections::HashMap<String, Bound<'_, PyAny>>>,
) -> PyResult<(Model, Vec<f64>)> {
    let mut cfg = TrainConfig::default();
    for (key, value) in config.unwrap_or_default() {
        let text = match value.cast::<PyBool>() {
            Ok(b) => b.is_true().to_string(),
            Err(_) => value.str()?.to_string_lossy().into_owned(),
        };
        cfg.set(&key, &text).map_err(err)?;
    }
    let data = BasketDataset::new(m, baskets).map_err(err)?;
    let (params, trace) = py.detach(|| train(&data, &cfg)).map_err(err)?;
    Ok((Model { params }, trace.records.iter().map(|r| r.val_ll).collect()))
}

/// Mean percentile rank with a bootstrap 95% interval: `(value, low, high)`.
#[pyfunction]
#[pyo3(signature = (model, baskets, seed = 0))]
fn mpr(py: Python<'_>, model: &Model, baskets: Vec<Vec<usize>>, seed: u64) -> PyResult<(f64, f64, f64)> {
    let km = KernelModel::new(model.params.clone(), DEFAULT_EPS).map_err(err)?;
    let r = py.detach(|| mpr_report(&km, &baskets, seed)).map_err(err)?;
    Ok((r.value, r.ci_low, r.ci_high))
}

#[pymodule]
fn ndpp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(mpr, m)?)?;
    m.add("NdppException", m.py().get_type::<NdppException>())?;
    Ok(())
}
