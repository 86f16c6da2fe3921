//! Python bindings for `bgcam`.
//!
//! Frames cross the boundary as nested lists (`rows`) or flat row-major
//! lists; streams cross as `bytes` in the `.bgc` format.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyList};

use bgcam::{Error, Modality, PowerConstants, StreamHeader};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_modality(s: &str) -> PyResult<Modality> {
    s.parse().map_err(to_py)
}

fn rows_of(flat: &[f32], width: usize) -> Vec<Vec<f32>> {
    flat.chunks(width).map(<[f32]>::to_vec).collect()
}

#[pyclass(name = "IntensityFrame", module = "bgcam", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyIntensityFrame(bgcam::IntensityFrame);

#[pymethods]
impl PyIntensityFrame {
    /// Builds a frame from rows of intensities in `[0, 1]`.
    #[new]
    #[pyo3(signature = (rows, timestamp_index = 0))]
    fn new(rows: Vec<Vec<f32>>, timestamp_index: u32) -> PyResult<Self> {
        bgcam::IntensityFrame::from_rows(&rows, timestamp_index)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (width, height, pixels, timestamp_index = 0))]
    fn from_flat(width: usize, height: usize, pixels: Vec<f32>, timestamp_index: u32) -> PyResult<Self> {
        bgcam::IntensityFrame::new(width, height, pixels, timestamp_index)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn timestamp_index(&self) -> u32 {
        self.0.timestamp_index()
    }

    fn pixels(&self) -> Vec<f32> {
        self.0.pixels().to_vec()
    }

    fn rows(&self) -> Vec<Vec<f32>> {
        rows_of(self.0.pixels(), self.0.width())
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f32> {
        check_index(row, col, self.0.width(), self.0.height())?;
        Ok(self.0.get(row, col))
    }

    fn inverted(&self) -> Self {
        Self(self.0.inverted())
    }

    fn with_timestamp(&self, timestamp_index: u32) -> Self {
        Self(self.0.clone().with_timestamp(timestamp_index))
    }

    fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> PyResult<Self> {
        self.0.crop(row, col, width, height).map(Self).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "IntensityFrame({}x{}, timestamp_index={})",
            self.0.width(),
            self.0.height(),
            self.0.timestamp_index()
        )
    }
}

fn check_index(row: usize, col: usize, width: usize, height: usize) -> PyResult<()> {
    if row >= height || col >= width {
        return Err(to_py(Error::Index { row, col, width, height }));
    }
    Ok(())
}

#[pyclass(name = "SensorConfig", module = "bgcam", frozen, from_py_object)]
#[derive(Clone)]
pub struct PySensorConfig(bgcam::SensorConfig);

#[pymethods]
impl PySensorConfig {
    #[new]
    #[pyo3(signature = (width, height, threshold = 0.05, bits = 1, modality = "spatial", frame_rate = 30.0))]
    fn new(width: usize, height: usize, threshold: f32, bits: u8, modality: &str, frame_rate: f32) -> PyResult<Self> {
        bgcam::SensorConfig::new(threshold, bits, parse_modality(modality)?, width, height, frame_rate)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn threshold(&self) -> f32 {
        self.0.threshold()
    }

    #[getter]
    fn bits(&self) -> u8 {
        self.0.bits()
    }

    #[getter]
    fn modality(&self) -> &'static str {
        self.0.modality().as_str()
    }

    #[getter]
    fn frame_rate(&self) -> f32 {
        self.0.frame_rate()
    }

    fn with_threshold(&self, threshold: f32) -> PyResult<Self> {
        self.0.with_threshold(threshold).map(Self).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let c = &self.0;
        format!(
            "SensorConfig({}x{}, threshold={}, bits={}, modality='{}', frame_rate={})",
            c.width(),
            c.height(),
            c.threshold(),
            c.bits(),
            c.modality(),
            c.frame_rate()
        )
    }
}

#[pyclass(name = "GradientFrame", module = "bgcam", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyGradientFrame(bgcam::GradientFrame);

#[pymethods]
impl PyGradientFrame {
    #[new]
    #[pyo3(signature = (width, height, values, bits = 1, modality = "spatial", threshold = 0.05, timestamp_index = 0))]
    fn new(
        width: usize,
        height: usize,
        values: Vec<u8>,
        bits: u8,
        modality: &str,
        threshold: f32,
        timestamp_index: u32,
    ) -> PyResult<Self> {
        bgcam::GradientFrame::new(width, height, values, bits, parse_modality(modality)?, threshold, timestamp_index)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn bits(&self) -> u8 {
        self.0.bits()
    }

    #[getter]
    fn modality(&self) -> &'static str {
        self.0.modality().as_str()
    }

    #[getter]
    fn threshold(&self) -> f32 {
        self.0.threshold()
    }

    #[getter]
    fn timestamp_index(&self) -> u32 {
        self.0.timestamp_index()
    }

    /// Codes in row-major order, as a list of ints.
    fn values<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        PyList::new(py, self.0.values())
    }

    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let rows = self
            .0
            .values()
            .chunks(self.0.width())
            .map(|r| PyList::new(py, r))
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, rows)
    }

    fn get(&self, row: usize, col: usize) -> PyResult<u8> {
        check_index(row, col, self.0.width(), self.0.height())?;
        Ok(self.0.get(row, col))
    }

    fn active_count(&self) -> usize {
        self.0.active_count()
    }

    fn __repr__(&self) -> String {
        let g = &self.0;
        format!(
            "GradientFrame({}x{}, {}, bits={}, active={}, timestamp_index={})",
            g.width(),
            g.height(),
            g.modality(),
            g.bits(),
            g.active_count(),
            g.timestamp_index()
        )
    }
}

#[pyclass(name = "PowerReport", module = "bgcam", frozen, get_all, from_py_object)]
#[derive(Clone)]
pub struct PyPowerReport {
    bits: u8,
    active_fraction: f64,
    scan_power: f64,
    deliver_power: f64,
    total_power: f64,
    total_power_sensor: f64,
    energy_per_pixel_per_frame: f64,
    frame_rate: f32,
    pixel_count: usize,
}

impl PyPowerReport {
    fn inner(&self) -> bgcam::PowerReport {
        bgcam::PowerReport {
            bits: self.bits,
            active_fraction: self.active_fraction,
            scan_power: self.scan_power,
            deliver_power: self.deliver_power,
            total_power: self.total_power,
            total_power_sensor: self.total_power_sensor,
            energy_per_pixel_per_frame: self.energy_per_pixel_per_frame,
            frame_rate: self.frame_rate,
            pixel_count: self.pixel_count,
        }
    }
}

impl From<bgcam::PowerReport> for PyPowerReport {
    fn from(r: bgcam::PowerReport) -> Self {
        Self {
            bits: r.bits,
            active_fraction: r.active_fraction,
            scan_power: r.scan_power,
            deliver_power: r.deliver_power,
            total_power: r.total_power,
            total_power_sensor: r.total_power_sensor,
            energy_per_pixel_per_frame: r.energy_per_pixel_per_frame,
            frame_rate: r.frame_rate,
            pixel_count: r.pixel_count,
        }
    }
}

#[pymethods]
impl PyPowerReport {
    fn __repr__(&self) -> String {
        format!(
            "PowerReport(bits={}, active_fraction={}, total_power={} uW/pixel)",
            self.bits, self.active_fraction, self.total_power
        )
    }
}

#[pyclass(name = "CalibrationResult", module = "bgcam", frozen, get_all, from_py_object)]
#[derive(Clone)]
pub struct PyCalibrationResult {
    threshold: f32,
    achieved_fraction: f64,
    iterations: u32,
    converged: bool,
    target_fraction: f64,
    tolerance: f64,
    max_reachable_fraction: f64,
}

#[pymethods]
impl PyCalibrationResult {
    fn __repr__(&self) -> String {
        format!(
            "CalibrationResult(threshold={}, achieved_fraction={}, converged={})",
            self.threshold,
            self.achieved_fraction,
            if self.converged { "True" } else { "False" }
        )
    }
}

fn inner_frames(frames: &[PyIntensityFrame]) -> Vec<bgcam::IntensityFrame> {
    frames.iter().map(|f| f.0.clone()).collect()
}

fn wrap_gradients(frames: Vec<bgcam::GradientFrame>) -> Vec<PyGradientFrame> {
    frames.into_iter().map(PyGradientFrame).collect()
}

/// Max pairwise absolute difference among a pixel and its left and top neighbors.
#[pyfunction]
fn local_contrast(frame: &PyIntensityFrame, row: usize, col: usize) -> PyResult<f32> {
    bgcam::local_contrast(&frame.0, row, col).map_err(to_py)
}

#[pyfunction]
fn spatial_gradient(frame: &PyIntensityFrame, config: &PySensorConfig) -> PyResult<PyGradientFrame> {
    bgcam::spatial_gradient(&frame.0, &config.0).map(PyGradientFrame).map_err(to_py)
}

#[pyfunction]
fn multibit_gradient(frame: &PyIntensityFrame, config: &PySensorConfig) -> PyResult<PyGradientFrame> {
    bgcam::multibit_gradient(&frame.0, &config.0).map(PyGradientFrame).map_err(to_py)
}

#[pyfunction]
fn temporal_gradient(current: &PyGradientFrame, previous: &PyGradientFrame) -> PyResult<PyGradientFrame> {
    bgcam::temporal_gradient(&current.0, &previous.0).map(PyGradientFrame).map_err(to_py)
}

/// Converts a sequence of frames with the config's modality and bit depth.
#[pyfunction]
fn convert_stream(py: Python<'_>, frames: Vec<PyIntensityFrame>, config: &PySensorConfig) -> PyResult<Vec<PyGradientFrame>> {
    let frames = inner_frames(&frames);
    let cfg = config.0.clone();
    py.detach(|| bgcam::convert_stream(&frames, &cfg))
        .map(wrap_gradients)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (bits, active_fraction, config = None, scan_power = 0.0024, deliver_power = 0.0195, reference_energy = 300.0))]
fn estimate_power(
    bits: u8,
    active_fraction: f64,
    config: Option<&PySensorConfig>,
    scan_power: f64,
    deliver_power: f64,
    reference_energy: f64,
) -> PyResult<PyPowerReport> {
    let constants = PowerConstants::new(scan_power, deliver_power, reference_energy).map_err(to_py)?;
    let cfg = match config {
        Some(c) => c.0.clone(),
        None => bgcam::SensorConfig::binary(640, 480).map_err(to_py)?,
    };
    bgcam::estimate_power(&constants, bits, active_fraction, &cfg)
        .map(PyPowerReport::from)
        .map_err(to_py)
}

#[pyfunction]
fn power_ratio(a: &PyPowerReport, b: &PyPowerReport) -> PyResult<f64> {
    bgcam::power_ratio(&a.inner(), &b.inner()).map_err(to_py)
}

/// Packs gradient frames into `.bgc` bytes.
#[pyfunction]
#[pyo3(signature = (frames, frame_rate = 30.0))]
fn encode_stream<'py>(py: Python<'py>, frames: Vec<PyGradientFrame>, frame_rate: f32) -> PyResult<Bound<'py, PyBytes>> {
    let first = frames
        .first()
        .ok_or_else(|| PyValueError::new_err("cannot encode an empty frame list"))?;
    let header = StreamHeader::for_frame(&first.0, frame_rate).map_err(to_py)?;
    let inner: Vec<bgcam::GradientFrame> = frames.iter().map(|f| f.0.clone()).collect();
    let bytes = bgcam::EventStream::from_frames(header, &inner)
        .and_then(|s| s.to_bytes())
        .map_err(to_py)?;
    Ok(PyBytes::new(py, &bytes))
}

#[pyfunction]
fn decode_stream(data: &[u8]) -> PyResult<Vec<PyGradientFrame>> {
    bgcam::EventStream::from_bytes(data)
        .and_then(|s| s.decode_all())
        .map(wrap_gradients)
        .map_err(to_py)
}

#[pyfunction]
fn active_fraction(frame: &PyGradientFrame) -> f64 {
    bgcam::active_fraction(&frame.0)
}

#[pyfunction]
#[pyo3(signature = (frames, target_fraction = 0.1, tolerance = 0.01))]
fn calibrate_threshold(
    py: Python<'_>,
    frames: Vec<PyIntensityFrame>,
    target_fraction: f64,
    tolerance: f64,
) -> PyResult<PyCalibrationResult> {
    let frames = inner_frames(&frames);
    let r = py
        .detach(|| bgcam::calibrate_threshold(&frames, target_fraction, tolerance))
        .map_err(to_py)?;
    Ok(PyCalibrationResult {
        threshold: r.threshold,
        achieved_fraction: r.achieved_fraction,
        iterations: r.iterations,
        converged: r.converged,
        target_fraction: r.target_fraction,
        tolerance: r.tolerance,
        max_reachable_fraction: r.max_reachable_fraction,
    })
}

#[pyfunction]
fn edge_fattening_ratio(frame: &PyIntensityFrame, threshold: f32) -> PyResult<f64> {
    bgcam::edge_fattening_ratio(&frame.0, threshold).map_err(to_py)
}

/// Gaussian-blurred white noise rescaled to `[0, 1]`, reproducible from `seed`.
#[pyfunction]
#[pyo3(signature = (width, height, sigma = 2.0, seed = 0))]
fn blurred_noise(width: usize, height: usize, sigma: f64, seed: u64) -> PyResult<PyIntensityFrame> {
    bgcam::synthetic::blurred_noise(width, height, sigma, seed)
        .map(PyIntensityFrame)
        .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "bgcam")]
fn bgcam_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIntensityFrame>()?;
    m.add_class::<PySensorConfig>()?;
    m.add_class::<PyGradientFrame>()?;
    m.add_class::<PyPowerReport>()?;
    m.add_class::<PyCalibrationResult>()?;
    m.add_function(wrap_pyfunction!(local_contrast, m)?)?;
    m.add_function(wrap_pyfunction!(spatial_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(multibit_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(temporal_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(convert_stream, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_power, m)?)?;
    m.add_function(wrap_pyfunction!(power_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(encode_stream, m)?)?;
    m.add_function(wrap_pyfunction!(decode_stream, m)?)?;
    m.add_function(wrap_pyfunction!(active_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(edge_fattening_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(blurred_noise, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
