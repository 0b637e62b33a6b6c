//! Python bindings: `import pytweetscale`.
//!
//! Settings are passed as keyword arguments using the same keys as the
//! command line's `--set KEY=VALUE`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyTuple};

use tweetscale::anomaly::{self, anomaly_map, AnomalyKind};
use tweetscale::cli::RunConfig;
use tweetscale::grid::DensityGrid;
use tweetscale::pipeline::{load, prepare};
use tweetscale::scaling::{self, detect_window, fit_all, scan_resolutions, AnalysisInput};
use tweetscale::synth::{generate, GroundTruth};
use tweetscale::validation::{self, subarea_resample, subset_resample, ResampleMode};
use tweetscale::Error;

create_exception!(pytweetscale, InsufficientDataError, PyRuntimeError);

fn err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::InsufficientData(_) | Error::DegenerateFit(_) => InsufficientDataError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn setting_text(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(b) = v.downcast::<PyBool>() {
        return Ok(if b.is_true() { "true" } else { "false" }.to_string());
    }
    if v.is_instance_of::<PyList>() || v.is_instance_of::<PyTuple>() {
        let parts: Vec<String> = v
            .try_iter()?
            .map(|x| x?.str().map(|s| s.to_string()))
            .collect::<PyResult<_>>()?;
        return Ok(parts.join(","));
    }
    Ok(v.str()?.to_string())
}

fn run_config(settings: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(s) = settings {
        for (k, v) in s.iter() {
            let key: String = k.extract()?;
            cfg.apply(&key, &setting_text(&v)?).map_err(err)?;
        }
    }
    cfg.finish().map_err(err)?;
    Ok(cfg)
}

/// One power-law fit `y = 10^log10_prefactor · x^exponent`.
#[pyclass(frozen, module = "pytweetscale")]
#[derive(Clone)]
struct FitResult(scaling::FitResult);

#[pymethods]
impl FitResult {
    #[getter]
    fn exponent(&self) -> f64 {
        self.0.exponent
    }

    #[getter]
    fn exponent_stderr(&self) -> f64 {
        self.0.exponent_stderr
    }

    #[getter]
    fn log10_prefactor(&self) -> f64 {
        self.0.log10_prefactor
    }

    #[getter]
    fn prefactor_stderr(&self) -> f64 {
        self.0.prefactor_stderr
    }

    #[getter]
    fn prefactor(&self) -> f64 {
        self.0.prefactor()
    }

    #[getter]
    fn r_squared(&self) -> f64 {
        self.0.r_squared
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points
    }

    fn predict(&self, x: f64) -> PyResult<f64> {
        anomaly::predict(&self.0, x).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(exponent={:.6}, exponent_stderr={:.6}, log10_prefactor={:.6}, r_squared={:.4}, n_points={})",
            self.0.exponent, self.0.exponent_stderr, self.0.log10_prefactor, self.0.r_squared, self.0.n_points
        )
    }
}

fn fits_dict<'py>(py: Python<'py>, f: &scaling::ScalingFits) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("alpha", FitResult(f.alpha))?;
    d.set_item("beta", FitResult(f.beta))?;
    d.set_item("gamma", FitResult(f.gamma))?;
    Ok(d)
}

/// A gridded corpus: accumulators and densities per cell, row-major from
/// the south-west corner.
#[pyclass(module = "pytweetscale")]
struct Grid {
    grid: DensityGrid,
    cfg: RunConfig,
}

#[pymethods]
impl Grid {
    #[getter]
    fn side(&self) -> usize {
        self.grid.spec.side
    }

    #[getter]
    fn n_tweets(&self) -> Vec<f64> {
        self.grid.n_tweets.clone()
    }

    #[getter]
    fn n_users(&self) -> Vec<f64> {
        self.grid.n_users.clone()
    }

    #[getter]
    fn n_population(&self) -> Vec<f64> {
        self.grid.n_population.clone()
    }

    #[getter]
    fn land_area(&self) -> Vec<f64> {
        self.grid.cells.iter().map(|c| c.land_area).collect()
    }

    /// `(i, j, T, U, P)` for every cell with land, `None` elsewhere.
    fn densities(&self) -> Vec<Option<(usize, usize, f64, f64, f64)>> {
        self.grid
            .cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                self.grid
                    .densities(k)
                    .map(|d| (c.i, c.j, d.tweets, d.users, d.population))
            })
            .collect()
    }

    fn fit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let f = fit_all(&self.grid, &self.cfg.thresholds).map_err(err)?;
        fits_dict(py, &f)
    }

    /// Anomaly cells of kind `"TU"` or `"YP"` against this grid's own fit.
    #[pyo3(signature = (kind = "TU"))]
    fn anomalies(&self, py: Python<'_>, kind: &str) -> PyResult<PyObject> {
        let (kind, fit) = match kind.to_ascii_uppercase().as_str() {
            "TU" => (
                AnomalyKind::TweetsUsers,
                fit_all(&self.grid, &self.cfg.thresholds).map_err(err)?.gamma,
            ),
            "YP" => (
                AnomalyKind::YouthPopulation,
                anomaly::youth_fit(&self.grid, &self.cfg.thresholds).map_err(err)?,
            ),
            other => return Err(PyValueError::new_err(format!("unknown anomaly kind {other:?}"))),
        };
        let map = anomaly_map(&self.grid, &fit, kind, self.cfg.caps, self.cfg.mask).map_err(err)?;
        json_to_py(py, &map.cells)
    }
}

/// Located records and census units ready for gridding at any resolution.
#[pyclass(module = "pytweetscale")]
struct Corpus {
    input: AnalysisInput,
    truth: Option<GroundTruth>,
    cfg: RunConfig,
}

impl Corpus {
    fn side(&self, side: Option<usize>) -> usize {
        side.unwrap_or(self.cfg.x)
    }
}

#[pymethods]
impl Corpus {
    /// Generates a synthetic corpus with known exponents. Records are
    /// geo-tagged, so the default filters keep every tag kind and every
    /// user unless overridden.
    #[staticmethod]
    #[pyo3(signature = (**settings))]
    fn synth(settings: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply("tag_kind", "both").map_err(err)?;
        cfg.apply("min_user_tweets", "1").map_err(err)?;
        if let Some(s) = settings {
            for (k, v) in s.iter() {
                cfg.apply(&k.extract::<String>()?, &setting_text(&v)?).map_err(err)?;
            }
        }
        cfg.finish().map_err(err)?;
        let data = generate(&cfg.synth).map_err(err)?;
        let prepared = prepare(
            &data.tweets,
            &Default::default(),
            data.units,
            None,
            cfg.study,
            cfg.standard_parallel,
            &cfg.filters,
        )
        .map_err(err)?;
        Ok(Corpus {
            input: prepared.input,
            truth: Some(data.truth),
            cfg,
        })
    }

    /// Reads tweet JSON lines and optional census and land GeoJSON.
    #[staticmethod]
    #[pyo3(signature = (tweets, population = None, land = None, **settings))]
    fn load(
        tweets: PathBuf,
        population: Option<PathBuf>,
        land: Option<PathBuf>,
        settings: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<Self> {
        let cfg = run_config(settings)?;
        let loaded = load(&tweets, population.as_deref(), land.as_deref()).map_err(err)?;
        let prepared = prepare(
            &loaded.tweets,
            &loaded.parse,
            loaded.units,
            loaded.land,
            cfg.study,
            cfg.standard_parallel,
            &cfg.filters,
        )
        .map_err(err)?;
        Ok(Corpus {
            input: prepared.input,
            truth: None,
            cfg,
        })
    }

    #[getter]
    fn n_records(&self) -> usize {
        self.input.records.len()
    }

    #[getter]
    fn n_units(&self) -> usize {
        self.input.units.len()
    }

    /// Generation truth for synthetic corpora, `None` for loaded ones.
    #[getter]
    fn truth(&self, py: Python<'_>) -> PyResult<PyObject> {
        match &self.truth {
            Some(t) => json_to_py(py, t),
            None => Ok(py.None()),
        }
    }

    #[pyo3(signature = (side = None))]
    fn grid(&self, side: Option<usize>) -> PyResult<Grid> {
        Ok(Grid {
            grid: self.input.grid(self.side(side)).map_err(err)?,
            cfg: self.cfg.clone(),
        })
    }

    #[pyo3(signature = (side = None))]
    fn fit<'py>(&self, py: Python<'py>, side: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let g = self.input.grid(self.side(side)).map_err(err)?;
        let f = fit_all(&g, &self.cfg.thresholds).map_err(err)?;
        fits_dict(py, &f)
    }

    /// Fits at every side in `sides` and looks for a scaling window.
    #[pyo3(signature = (sides = None, min_run = None))]
    fn scan(&self, py: Python<'_>, sides: Option<Vec<usize>>, min_run: Option<usize>) -> PyResult<PyObject> {
        let sides = sides.unwrap_or_else(|| self.cfg.x_list.clone());
        let scan = py
            .allow_threads(|| scan_resolutions(&self.input, &sides, &self.cfg.thresholds))
            .map_err(err)?;
        let window = detect_window(&scan, min_run.unwrap_or(self.cfg.min_run));
        json_to_py(py, &serde_json::json!({ "entries": scan.entries, "window": window }))
    }

    /// Resampled exponent distribution with 68% intervals.
    #[pyo3(signature = (side = None, mode = None, replicates = None, seed = None))]
    fn resample(
        &self,
        py: Python<'_>,
        side: Option<usize>,
        mode: Option<&str>,
        replicates: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<PyObject> {
        let mut rc = self.cfg.resample;
        if let Some(m) = mode {
            rc.mode = m.parse::<ResampleMode>().map_err(PyValueError::new_err)?;
        }
        if let Some(r) = replicates {
            rc.replicates = r;
        }
        if let Some(s) = seed {
            rc.master_seed = s;
        }
        let side = self.side(side);
        let th = self.cfg.thresholds;
        let dist = py
            .allow_threads(|| match rc.mode {
                ResampleMode::Subarea => subarea_resample(&self.input, side, &rc, &th),
                ResampleMode::Subset | ResampleMode::SubsetNonadjacent => {
                    subset_resample(&self.input.grid(side)?, &rc, &th)
                }
            })
            .map_err(err)?;
        let mut summary = dist.summary();
        summary["samples"] = serde_json::json!(dist.replicates);
        json_to_py(py, &summary)
    }
}

/// Fits `y = c · x^m` by least squares in log-log space.
#[pyfunction]
fn fit_power_law(x: Vec<f64>, y: Vec<f64>) -> PyResult<FitResult> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("x and y differ in length"));
    }
    let points: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
    scaling::fit_power_law(&points).map(FitResult).map_err(err)
}

/// `alpha − beta·gamma` with its propagated error and z-score.
#[pyfunction]
fn consistency(py: Python<'_>, alpha: &FitResult, beta: &FitResult, gamma: &FitResult) -> PyResult<PyObject> {
    json_to_py(py, &scaling::consistency(&alpha.0, &beta.0, &gamma.0))
}

#[pyfunction]
fn anomaly_abs(measured: f64, predicted: f64) -> f64 {
    anomaly::anomaly_abs(measured, predicted)
}

#[pyfunction]
fn anomaly_rel(measured: f64, predicted: f64) -> Option<f64> {
    anomaly::anomaly_rel(measured, predicted)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("x and y differ in length"));
    }
    let pairs: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
    anomaly::pearson(&pairs).map_err(err)
}

#[pyfunction]
fn ci68(samples: Vec<f64>) -> PyResult<(f64, f64)> {
    let [lo, hi] = validation::ci68(&samples).map_err(err)?;
    Ok((lo, hi))
}

#[pyfunction]
fn spherical_rect_area(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> PyResult<f64> {
    let r = tweetscale::geometry::LonLatRect::new(min_lon, min_lat, max_lon, max_lat).map_err(err)?;
    Ok(tweetscale::geometry::spherical_rect_area(&r))
}

/// Area in km² of a middle-latitude cell when the default study area is
/// cut into `side × side` cells.
#[pyfunction]
fn middle_cell_area(side: usize) -> f64 {
    scaling::middle_cell_area(&RunConfig::default().study, side)
}

#[pymodule]
fn pytweetscale(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FitResult>()?;
    m.add_class::<Grid>()?;
    m.add_class::<Corpus>()?;
    m.add("InsufficientDataError", m.py().get_type::<InsufficientDataError>())?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(consistency, m)?)?;
    m.add_function(wrap_pyfunction!(anomaly_abs, m)?)?;
    m.add_function(wrap_pyfunction!(anomaly_rel, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(ci68, m)?)?;
    m.add_function(wrap_pyfunction!(spherical_rect_area, m)?)?;
    m.add_function(wrap_pyfunction!(middle_cell_area, m)?)?;
    Ok(())
}
