//! Python bindings: datasets, training, metrics, the theory suite and
//! Pareto fronts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dcfr::data::{compute_weights, load_csv, Encoder, FairDataset, FairnessMode, RawTable, SchemaSpec};
use dcfr::harness::pareto_front as core_pareto_front;
use dcfr::metrics::MetricsReport;
use dcfr::nn::Matrix;
use dcfr::regularizer::Surrogate;
use dcfr::synthetic::{admission as core_admission, AdmissionParams};
use dcfr::theory::{run_suite, SuiteConfig};
use dcfr::trainer::{fit as core_fit, predict, Checkpoint, TrainConfig, TrainTrace};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Converts any serialisable value into plain Python objects via JSON.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_string(value).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (json,))
}

fn parse_mode(mode: &str) -> PyResult<FairnessMode> {
    mode.parse().map_err(PyValueError::new_err)
}

/// Encoded dataset with binary `s`, binary `y`, stratum ids and features.
#[pyclass(name = "Dataset", module = "pydcfr", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: FairDataset,
}

#[pymethods]
impl PyDataset {
    /// Builds a dataset from encoded arrays; `x` is a list of equal-length rows.
    #[new]
    fn new(s: Vec<u8>, y: Vec<u8>, f: Vec<usize>, x: Vec<Vec<f64>>) -> PyResult<Self> {
        let x = if x.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&x).map_err(value_err)?
        };
        let inner = FairDataset::from_parts(s, y, f, x).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Loads and encodes one CSV file with the schema TOML at `schema`.
    #[staticmethod]
    fn from_csv(path: &str, schema: &str) -> PyResult<Self> {
        let schema = SchemaSpec::from_file(schema).map_err(value_err)?;
        let inner = load_csv(path, &schema).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(rows={}, features={}, strata={})",
            self.inner.len(),
            self.inner.n_features(),
            self.inner.strata.len()
        )
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn s(&self) -> Vec<u8> {
        self.inner.s.clone()
    }

    #[getter]
    fn y(&self) -> Vec<u8> {
        self.inner.y.clone()
    }

    #[getter]
    fn f(&self) -> Vec<usize> {
        self.inner.f_id.clone()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    #[getter]
    fn strata(&self) -> Vec<String> {
        self.inner.strata.labels().to_vec()
    }

    /// Row `i` of the encoded feature matrix.
    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(pyo3::exceptions::PyIndexError::new_err(i));
        }
        Ok(self.inner.x.row(i).to_vec())
    }

    /// Stratified shuffle split into parts with the given fractions.
    fn split(&self, fractions: Vec<f64>, seed: u64) -> PyResult<Vec<PyDataset>> {
        let parts = self.inner.split(&fractions, seed).map_err(value_err)?;
        Ok(parts.into_iter().map(|inner| Self { inner }).collect())
    }

    /// Per-sample adversary weights for `mode` (dp, eo, cf or laftr-cf).
    fn weights(&self, mode: &str) -> PyResult<Vec<f64>> {
        Ok(compute_weights(&self.inner, parse_mode(mode)?).weights)
    }

    /// Accuracy, ΔDP, ΔEO, ΔCF and per-stratum gaps of hard predictions.
    fn evaluate<'py>(&self, py: Python<'py>, pred: Vec<u8>) -> PyResult<Bound<'py, PyAny>> {
        let report = MetricsReport::evaluate(&pred, &self.inner).map_err(value_err)?;
        to_py(py, &report)
    }
}

/// Loads a train/test CSV pair, fitting the encoding on the training file.
#[pyfunction]
#[pyo3(signature = (train, test, schema, test_skip_rows=None))]
fn load_pair(train: &str, test: &str, schema: &str, test_skip_rows: Option<usize>) -> PyResult<(PyDataset, PyDataset)> {
    let schema = SchemaSpec::from_file(schema).map_err(value_err)?;
    let train_raw = RawTable::read(train, &schema).map_err(value_err)?;
    let encoder = Encoder::fit(&train_raw, &schema).map_err(value_err)?;
    let mut test_schema = schema.clone();
    if let Some(skip) = test_skip_rows {
        test_schema.skip_rows = skip;
    }
    let test_raw = RawTable::read(test, &test_schema).map_err(value_err)?;
    Ok((
        PyDataset { inner: encoder.encode(&train_raw).map_err(value_err)? },
        PyDataset { inner: encoder.encode(&test_raw).map_err(value_err)? },
    ))
}

/// Synthetic college-admission data where the department is the fair variable.
#[pyfunction]
#[pyo3(signature = (n, seed=0))]
fn admission(n: usize, seed: u64) -> PyDataset {
    PyDataset {
        inner: core_admission(&AdmissionParams::default(), n, seed),
    }
}

/// Training hyper-parameters; start from a preset and override attributes.
#[pyclass(name = "TrainConfig", module = "pydcfr", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    inner: TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (preset="adult", mode="cf", lambda_=1.0, seed=0, epochs=None))]
    fn new(preset: &str, mode: &str, lambda_: f64, seed: u64, epochs: Option<usize>) -> PyResult<Self> {
        let mut inner = TrainConfig::preset(preset)
            .ok_or_else(|| PyValueError::new_err(format!("unknown preset '{preset}'")))?;
        inner.mode = parse_mode(mode)?;
        inner.lambda = lambda_;
        inner.seed = seed;
        if let Some(e) = epochs {
            inner.epochs = e;
        }
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }
    #[setter]
    fn set_mode(&mut self, mode: &str) -> PyResult<()> {
        self.inner.mode = parse_mode(mode)?;
        Ok(())
    }
    #[getter(lambda_)]
    fn lambda(&self) -> f64 {
        self.inner.lambda
    }
    #[setter(lambda_)]
    fn set_lambda(&mut self, v: f64) {
        self.inner.lambda = v;
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }
    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }
    #[setter]
    fn set_epochs(&mut self, v: usize) {
        self.inner.epochs = v;
    }
    #[getter]
    fn batch_size(&self) -> usize {
        self.inner.batch_size
    }
    #[setter]
    fn set_batch_size(&mut self, v: usize) {
        self.inner.batch_size = v;
    }
    #[getter]
    fn adv_steps(&self) -> usize {
        self.inner.adv_steps
    }
    #[setter]
    fn set_adv_steps(&mut self, v: usize) {
        self.inner.adv_steps = v;
    }
    #[getter]
    fn pred_hidden_units(&self) -> usize {
        self.inner.pred_hidden_units
    }
    #[setter]
    fn set_pred_hidden_units(&mut self, v: usize) {
        self.inner.pred_hidden_units = v;
    }
    #[getter]
    fn adv_hidden_units(&self) -> usize {
        self.inner.adv_hidden_units
    }
    #[setter]
    fn set_adv_hidden_units(&mut self, v: usize) {
        self.inner.adv_hidden_units = v;
    }
    #[getter]
    fn early_stop_patience(&self) -> usize {
        self.inner.early_stop_patience
    }
    #[setter]
    fn set_early_stop_patience(&mut self, v: usize) {
        self.inner.early_stop_patience = v;
    }
    #[getter]
    fn surrogate(&self) -> &'static str {
        match self.inner.surrogate {
            Surrogate::L1 => "l1",
            Surrogate::L2 => "l2",
        }
    }
    #[setter]
    fn set_surrogate(&mut self, v: &str) -> PyResult<()> {
        self.inner.surrogate = match v {
            "l1" => Surrogate::L1,
            "l2" => Surrogate::L2,
            other => return Err(PyValueError::new_err(format!("unknown surrogate '{other}'"))),
        };
        Ok(())
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(mode={}, lambda_={}, seed={}, epochs={})",
            self.inner.mode, self.inner.lambda, self.inner.seed, self.inner.epochs
        )
    }
}

/// A trained encoder, head and adversary plus the run's trace.
#[pyclass(name = "Model", module = "pydcfr")]
struct PyModel {
    checkpoint: Checkpoint,
    trace: Option<TrainTrace>,
}

#[pymethods]
impl PyModel {
    /// Class probabilities and hard 0/1 predictions.
    fn predict(&self, data: PyRef<'_, PyDataset>) -> PyResult<(Vec<f64>, Vec<u8>)> {
        let p = predict(&self.checkpoint.bundle, &data.inner).map_err(value_err)?;
        Ok((p.prob, p.pred))
    }

    /// Test-set metrics from training, if the model was trained here.
    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyAny>>> {
        self.trace
            .as_ref()
            .and_then(|t| t.test.as_ref())
            .map(|r| to_py(py, r))
            .transpose()
    }

    /// Per-epoch trace as CSV text.
    fn trace_csv(&self) -> Option<String> {
        self.trace.as_ref().map(TrainTrace::to_csv)
    }

    #[getter]
    fn config(&self) -> PyTrainConfig {
        PyTrainConfig {
            inner: self.checkpoint.config.clone(),
        }
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.checkpoint.save(path).map_err(runtime_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let checkpoint = Checkpoint::load(path).map_err(value_err)?;
        Ok(Self { checkpoint, trace: None })
    }
}

/// Runs both training steps and evaluates on `test`. Releases the GIL.
#[pyfunction]
fn fit(
    py: Python<'_>,
    train: PyRef<'_, PyDataset>,
    val: PyRef<'_, PyDataset>,
    test: PyRef<'_, PyDataset>,
    config: PyRef<'_, PyTrainConfig>,
) -> PyResult<PyModel> {
    let (train, val, test) = (train.inner.clone(), val.inner.clone(), test.inner.clone());
    let config = config.inner.clone();
    let outcome = py
        .detach(|| core_fit(&train, &val, &test, &config))
        .map_err(runtime_err)?;
    Ok(PyModel {
        checkpoint: Checkpoint::new(config, outcome.bundle, None),
        trace: Some(outcome.trace),
    })
}

/// Indices of the non-dominated `(accuracy, gap)` points, gap ascending.
#[pyfunction]
fn pareto_front(points: Vec<(f64, f64)>) -> Vec<usize> {
    core_pareto_front(&points)
}

/// Runs the randomized theorem checks; returns one dict per check.
#[pyfunction]
#[pyo3(signature = (seed=0, joints=1000, trials=1000, samples=100_000))]
fn verify_theory<'py>(
    py: Python<'py>,
    seed: u64,
    joints: usize,
    trials: usize,
    samples: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let config = SuiteConfig { seed, joints, trials, samples };
    let checks = py.detach(|| run_suite(&config));
    to_py(py, &checks)
}

#[pymodule]
fn pydcfr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(load_pair, m)?)?;
    m.add_function(wrap_pyfunction!(admission, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_front, m)?)?;
    m.add_function(wrap_pyfunction!(verify_theory, m)?)?;
    m.add("MODES", FairnessMode::ALL.map(FairnessMode::as_str).to_vec())?;
    Ok(())
}
