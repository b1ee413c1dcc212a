//! Python bindings for the scour core.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use scour_core::experiment::{load_frame, run_feature_sweep, run_training, run_tune, ExperimentConfig};
use scour_core::frame_io::{read_frame_csv, write_frame_csv};
use scour_core::ingest::{preprocess as core_preprocess, PreprocessParams};
use scour_core::models::{build, format_config, parse_config, BindShape, ModelConfig};
use scour_core::neural::{gradient_check as core_gradient_check, Tensor};
use scour_core::rng::stream;
use scour_core::search::combine;
use scour_core::synth::{generate, ScenarioSpec};
use scour_core::timeseries::{ChannelId, TimeSeriesFrame};

create_exception!(scour, ScourError, PyException);

fn err(e: scour_core::Error) -> PyErr {
    ScourError::new_err(e.to_string())
}

/// A parsed model configuration such as `ss-(336,168)-32-0`.
#[pyclass(name = "ModelConfig", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyModelConfig(ModelConfig);

#[pymethods]
impl PyModelConfig {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse_config(text).map(PyModelConfig).map_err(err)
    }

    #[getter]
    fn family(&self) -> String {
        format!("{:?}", self.0.family).to_lowercase()
    }

    /// `(w_in, w_out)` for recurrent families, `None` for convolutional ones.
    #[getter]
    fn window(&self) -> Option<(usize, usize)> {
        self.0.window()
    }

    fn __str__(&self) -> String {
        format_config(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("ModelConfig('{}')", format_config(&self.0))
    }
}

/// An hourly multichannel frame.
#[pyclass(name = "Frame")]
struct PyFrame(TimeSeriesFrame);

fn channel_id(name: &str) -> PyResult<ChannelId> {
    name.parse().map_err(|e: scour_core::Error| PyValueError::new_err(e.to_string()))
}

#[pymethods]
impl PyFrame {
    /// Reads a wide `timestamp,<channel>...` CSV.
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        read_frame_csv(text).map(PyFrame).map_err(err)
    }

    /// Generates a synthetic scenario (`kind` is `seasonal` or `tidal`).
    #[staticmethod]
    #[pyo3(signature = (kind, years, noise_std, flood_count, rho, seed))]
    fn synth(kind: &str, years: f64, noise_std: f64, flood_count: usize, rho: f64, seed: u64) -> PyResult<Self> {
        let spec = match kind {
            "seasonal" => ScenarioSpec::seasonal(years, noise_std, flood_count, rho, seed),
            "tidal" => ScenarioSpec::tidal(years, noise_std, flood_count, rho, seed),
            other => return Err(PyValueError::new_err(format!("unknown scenario kind `{other}`"))),
        };
        generate(&spec).map(PyFrame).map_err(err)
    }

    fn to_csv(&self) -> String {
        write_frame_csv(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn channels(&self) -> Vec<String> {
        self.0.channel_ids().iter().map(|c| c.name().to_string()).collect()
    }

    #[getter]
    fn timestamps(&self) -> Vec<String> {
        self.0.timestamps().iter().map(|t| t.to_iso()).collect()
    }

    /// Values of one channel; masked entries are `None`.
    fn values(&self, channel: &str) -> PyResult<Vec<Option<f64>>> {
        let c = self.0.channel(channel_id(channel)?).map_err(err)?;
        Ok(c.values.iter().zip(&c.missing).map(|(v, m)| (!m).then_some(*v)).collect())
    }
}

/// Runs the cleaning chain on a long-format sensor CSV; returns the frame and
/// the JSON report.
#[pyfunction]
#[pyo3(signature = (text, despike_window = 24, k_mad = 6.0, max_gap = 3))]
fn preprocess(text: &str, despike_window: usize, k_mad: f64, max_gap: usize) -> PyResult<(PyFrame, String)> {
    let params = PreprocessParams { despike_window, k_mad, max_gap };
    let (frame, report) = core_preprocess(text.as_bytes(), &params).map_err(err)?;
    Ok((PyFrame(frame), serde_json::to_string(&report).expect("report serialises")))
}

/// Maximum relative error between backward and central-difference gradients
/// of `config` bound at toy size.
#[pyfunction]
#[pyo3(signature = (config, w_in = 8, w_out = 3, n_in = 2, n_out = 2, batch = 3, eps = 1e-6, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn gradient_check(
    config: &str,
    w_in: usize,
    w_out: usize,
    n_in: usize,
    n_out: usize,
    batch: usize,
    eps: f64,
    seed: u64,
) -> PyResult<f64> {
    let cfg = parse_config(config).map_err(err)?;
    let (w_in, w_out) = cfg.window().unwrap_or((w_in, w_out));
    let mut model = build(&cfg, BindShape { w_in, w_out, n_in, n_out }, seed).map_err(err)?;
    model.pin_dropout(seed);
    let x = Tensor::uniform(&[batch, w_in, n_in], 1.0, &mut stream(seed, "gradcheck-input"));
    core_gradient_check(model.as_mut(), &x, eps).map(|r| r.max_rel_error).map_err(err)
}

/// Ensemble mean and 95 % band of per-model forecasts.
#[pyfunction]
fn ensemble(per_model: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    combine(&per_model).map_err(err)
}

fn config_from(text: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_toml(text).map_err(err)
}

/// Trains the configured model (hold-out, or sequential when `folds` is set)
/// and returns the JSON report.
#[pyfunction]
fn train(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = config_from(config)?;
    py.detach(|| {
        let frame = load_frame(&cfg)?;
        let run = run_training(&cfg, &frame)?;
        Ok(serde_json::to_string(&run.report).expect("report serialises"))
    })
    .map_err(err)
}

/// Runs the configured search and returns the JSON rankings.
#[pyfunction]
fn tune(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = config_from(config)?;
    py.detach(|| {
        let frame = match cfg.search.as_ref().and_then(|s| s.oracle.as_ref()) {
            Some(_) => None,
            None => Some(load_frame(&cfg)?),
        };
        let report = run_tune(&cfg, frame.as_ref())?;
        Ok(serde_json::to_string(&report).expect("report serialises"))
    })
    .map_err(err)
}

/// Runs the configured feature sweep and returns the JSON report.
#[pyfunction]
fn feature_sweep(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = config_from(config)?;
    py.detach(|| {
        let frame = load_frame(&cfg)?;
        let report = run_feature_sweep(&cfg, &frame)?;
        Ok(serde_json::to_string(&report).expect("report serialises"))
    })
    .map_err(err)
}

#[pymodule]
fn scour(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ScourError", m.py().get_type::<ScourError>())?;
    m.add_class::<PyModelConfig>()?;
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_check, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(tune, m)?)?;
    m.add_function(wrap_pyfunction!(feature_sweep, m)?)?;
    Ok(())
}
