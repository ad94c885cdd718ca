//! Python bindings. Everything here converts arguments and calls into
//! `evframe`; frames come back as `(bytes, (C, H, W))` holding little-endian
//! float32 values, ready for `numpy.frombuffer(b, "<f4").reshape(shape)`.

use std::path::PathBuf;

use evframe::io::{evb_geometry, load_stream_with, LoadOptions};
use evframe::metrics::{aucp as core_aucp, Sweep};
use evframe::segment::{Segment, SegmentSpec};
use evframe::simulator::{simulate as core_simulate, SceneConfig};
use evframe::{
    write_stream, BinningMap, Event, EventStream, Format, Frame, KeypointSet, Polarity, Representation, SensorGeometry,
    TailPolicy,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

type Shape = (usize, usize, usize);
type SegmentRow = (usize, usize, u64, u64, String, bool);

fn err(e: evframe::Error) -> PyErr {
    match e {
        evframe::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn geometry((w, h): (u16, u16)) -> PyResult<SensorGeometry> {
    SensorGeometry::new(w, h).map_err(err)
}

fn parse<T: std::str::FromStr<Err = evframe::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn frame_out<'py>(py: Python<'py>, frame: &Frame) -> (Bound<'py, PyBytes>, Shape) {
    let bytes: Vec<u8> = frame.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    (PyBytes::new(py, &bytes), frame.shape())
}

fn to_events(rows: Vec<(u64, u16, u16, i8)>) -> PyResult<Vec<Event>> {
    rows.into_iter()
        .enumerate()
        .map(|(i, (t, x, y, p))| {
            let p = Polarity::from_i8(p)
                .ok_or_else(|| PyValueError::new_err(format!("row {i}: polarity must be 1 or -1, got {p}")))?;
            Ok(Event::new(t, x, y, p))
        })
        .collect()
}

/// A time-sorted event stream on a fixed sensor.
#[pyclass(name = "EventStream", frozen)]
struct PyEventStream {
    inner: EventStream,
}

#[pymethods]
impl PyEventStream {
    /// Builds a stream from `(t, x, y, p)` rows; rows are stably sorted by `t`.
    #[new]
    fn new(events: Vec<(u64, u16, u16, i8)>, geometry: (u16, u16)) -> PyResult<Self> {
        let inner = EventStream::new(to_events(events)?, self::geometry(geometry)?).map_err(err)?;
        Ok(PyEventStream { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("EventStream({} events, {})", self.inner.len(), self.inner.geometry())
    }

    #[getter]
    fn geometry(&self) -> (u16, u16) {
        let g = self.inner.geometry();
        (g.width, g.height)
    }

    fn events(&self) -> Vec<(u64, u16, u16, i8)> {
        self.inner
            .events()
            .iter()
            .map(|e| (e.t, e.x, e.y, e.p.as_i8()))
            .collect()
    }

    fn time_span(&self) -> Option<(u64, u64)> {
        self.inner.time_span()
    }

    /// Encodes the stream as `"csv"` or `"evb"` bytes.
    fn encode<'py>(&self, py: Python<'py>, format: &str) -> PyResult<Bound<'py, PyBytes>> {
        let format: Format = parse(format)?;
        Ok(PyBytes::new(py, &write_stream(&self.inner, format)))
    }
}

/// Loads a `.csv` or `.evb` stream. `geometry` is required for csv and
/// defaults to the evb header otherwise.
#[pyfunction]
#[pyo3(signature = (path, geometry=None, format=None, polarity_less=false))]
fn load_stream(
    path: PathBuf,
    geometry: Option<(u16, u16)>,
    format: Option<&str>,
    polarity_less: bool,
) -> PyResult<PyEventStream> {
    let bytes = std::fs::read(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
    let format = match format {
        Some(f) => parse(f)?,
        None => Format::from_path(&path)
            .ok_or_else(|| PyValueError::new_err("cannot tell the format from the extension; pass format="))?,
    };
    let g = match (geometry, format) {
        (Some(g), _) => self::geometry(g)?,
        (None, Format::Evb) => evb_geometry(&bytes).map_err(err)?,
        (None, Format::Csv) => return Err(PyValueError::new_err("csv input needs geometry=(width, height)")),
    };
    let inner = load_stream_with(&bytes, format, g, LoadOptions { polarity_less }).map_err(err)?;
    Ok(PyEventStream { inner })
}

fn binning(g: SensorGeometry, size: Option<(u16, u16)>) -> PyResult<BinningMap> {
    let out = size.map(geometry).transpose()?.unwrap_or(g);
    BinningMap::new(g, out).map_err(err)
}

/// Segment boundaries as `(offset, length, t_start, t_end, provenance, capped)`.
#[pyfunction]
#[pyo3(signature = (stream, spec, tail="drop"))]
fn segment(stream: &PyEventStream, spec: &str, tail: &str) -> PyResult<Vec<SegmentRow>> {
    let spec: SegmentSpec = parse(spec)?;
    let segments = spec.apply(&stream.inner, parse::<TailPolicy>(tail)?).map_err(err)?;
    Ok(segments
        .iter()
        .map(|s| {
            let (t0, t1) = s.bounds();
            (s.offset(), s.len(), t0, t1, s.provenance().to_string(), s.capped())
        })
        .collect())
}

/// Renders `events[offset:offset+count]` (the whole stream by default).
#[pyfunction]
#[pyo3(signature = (stream, rep, size=None, offset=0, count=None))]
fn render<'py>(
    py: Python<'py>,
    stream: &PyEventStream,
    rep: &str,
    size: Option<(u16, u16)>,
    offset: usize,
    count: Option<usize>,
) -> PyResult<(Bound<'py, PyBytes>, Shape)> {
    let rep: Representation = parse(rep)?;
    let events = stream.inner.events();
    let end = count.map_or(events.len(), |c| offset.saturating_add(c));
    let slice = events
        .get(offset..end)
        .ok_or_else(|| PyValueError::new_err(format!("range {offset}..{end} exceeds {} events", events.len())))?;
    let g = stream.inner.geometry();
    let frame = rep
        .render(&Segment::from_events(slice, g), &binning(g, size)?)
        .map_err(err)?;
    Ok(frame_out(py, &frame))
}

/// Renders raw `(t, x, y, p)` rows captured on a `geometry` sensor.
#[pyfunction]
#[pyo3(signature = (events, geometry, rep, size=None))]
fn render_events<'py>(
    py: Python<'py>,
    events: Vec<(u64, u16, u16, i8)>,
    geometry: (u16, u16),
    rep: &str,
    size: Option<(u16, u16)>,
) -> PyResult<(Bound<'py, PyBytes>, Shape)> {
    let stream = PyEventStream::new(events, geometry)?;
    render(py, &stream, rep, size, 0, None)
}

/// Segments and renders a whole stream.
#[pyfunction]
#[pyo3(signature = (stream, spec, rep, size=None, tail="drop"))]
fn render_segments<'py>(
    py: Python<'py>,
    stream: &PyEventStream,
    spec: &str,
    rep: &str,
    size: Option<(u16, u16)>,
    tail: &str,
) -> PyResult<Vec<(Bound<'py, PyBytes>, Shape)>> {
    let rep: Representation = parse(rep)?;
    let spec: SegmentSpec = parse(spec)?;
    let map = binning(stream.inner.geometry(), size)?;
    let segments = spec.apply(&stream.inner, parse::<TailPolicy>(tail)?).map_err(err)?;
    segments
        .iter()
        .map(|s| Ok(frame_out(py, &rep.render(s, &map).map_err(err)?)))
        .collect()
}

/// Reads an EVF tensor file.
#[pyfunction]
fn read_evf<'py>(py: Python<'py>, path: PathBuf) -> PyResult<(Bound<'py, PyBytes>, Shape)> {
    let bytes = std::fs::read(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
    let t = evframe::frame::EvfTensor::decode(&bytes).map_err(err)?;
    Ok((
        PyBytes::new(py, &bytes[evframe::frame::EVF_HEADER_LEN..]),
        (t.channels, t.height, t.width),
    ))
}

/// Runs a TOML scene; returns the stream and its trajectory csv text.
#[pyfunction]
fn simulate(scene_toml: &str) -> PyResult<(PyEventStream, String)> {
    let scene = SceneConfig::from_toml(scene_toml).map_err(err)?;
    let (inner, traj) = core_simulate(&scene).map_err(err)?;
    Ok((PyEventStream { inner }, traj.to_csv()))
}

/// Area under the mean palm-normalized PCK curve. Each pose is a flat list
/// of `21 * dim` coordinates.
#[pyfunction]
#[pyo3(signature = (preds, gts, dim=2, sweep="0:0.01:1"))]
fn aucp(preds: Vec<Vec<f64>>, gts: Vec<Vec<f64>>, dim: usize, sweep: &str) -> PyResult<f64> {
    let to_sets = |rows: Vec<Vec<f64>>| -> PyResult<Vec<KeypointSet>> {
        rows.iter()
            .map(|r| KeypointSet::from_flat(r, dim).map_err(err))
            .collect()
    };
    let sweep: Sweep = parse(sweep)?;
    core_aucp(&to_sets(preds)?, &to_sets(gts)?, &sweep).map_err(err)
}

#[pymodule(name = "evframe")]
fn evframe_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEventStream>()?;
    m.add_function(wrap_pyfunction!(load_stream, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(render_events, m)?)?;
    m.add_function(wrap_pyfunction!(render_segments, m)?)?;
    m.add_function(wrap_pyfunction!(read_evf, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(aucp, m)?)?;
    Ok(())
}
