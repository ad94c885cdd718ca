//! Cutting streams into segments.
//!
//! Four standards are provided: a fixed number of events, a fixed time
//! length, a fixed number of distinct active pixels, and the inference-time
//! query window (the last `n` events up to a query time). Batch segmentation
//! never overlaps; only [`window_before`] may produce overlapping views.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, SensorGeometry};

/// How a segment was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "standard", content = "value", rename_all = "snake_case")]
pub enum Provenance {
    /// Fixed number of events.
    ByCount(usize),
    /// Fixed time length in microseconds.
    ByTime(u64),
    /// Fixed number of distinct active pixels.
    ByActivePixels(usize),
    /// Last `n` events up to a query time.
    Window(usize),
    /// Explicit `[t0, t1)` slice.
    TimeSlice,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::ByCount(n) => write!(f, "count:{n}"),
            Provenance::ByTime(dt) => write!(f, "time_us:{dt}"),
            Provenance::ByActivePixels(k) => write!(f, "pixels:{k}"),
            Provenance::Window(n) => write!(f, "window:{n}"),
            Provenance::TimeSlice => write!(f, "slice"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Discard a trailing segment that did not reach its target size.
    #[default]
    Drop,
    /// Emit the trailing partial segment.
    EmitPartial,
}

impl FromStr for TailPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(TailPolicy::Drop),
            "partial" | "emit-partial" | "emit_partial" => Ok(TailPolicy::EmitPartial),
            _ => Err(Error::param(format!("unknown tail policy {s:?}"))),
        }
    }
}

/// A contiguous view into a parent stream.
///
/// `bounds` are the nominal `[t_start, t_end)` interval the standard selected,
/// which can be wider than the span of the contained events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment<'a> {
    events: &'a [Event],
    offset: usize,
    bounds: (u64, u64),
    geometry: SensorGeometry,
    provenance: Provenance,
    capped: bool,
}

impl<'a> Segment<'a> {
    pub fn new(
        events: &'a [Event],
        offset: usize,
        bounds: (u64, u64),
        geometry: SensorGeometry,
        provenance: Provenance,
    ) -> Self {
        debug_assert!(events.iter().all(|e| bounds.0 <= e.t && e.t < bounds.1));
        Segment {
            events,
            offset,
            bounds,
            geometry,
            provenance,
            capped: false,
        }
    }

    /// A segment over a bare slice; bounds are derived from the events.
    pub fn from_events(events: &'a [Event], geometry: SensorGeometry) -> Self {
        let bounds = match (events.first(), events.last()) {
            (Some(a), Some(b)) => (a.t, b.t.saturating_add(1)),
            _ => (0, 0),
        };
        Segment::new(events, 0, bounds, geometry, Provenance::TimeSlice)
    }

    #[inline]
    pub fn events(&self) -> &'a [Event] {
        self.events
    }

    /// Index of the first event in the parent stream.
    #[inline]
    pub fn offset(&self) -> usize {
        self.offset
    }

    #[inline]
    pub fn bounds(&self) -> (u64, u64) {
        self.bounds
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// True when an active-pixel segment was closed by the event cap.
    #[inline]
    pub fn capped(&self) -> bool {
        self.capped
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.events.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Latest event time in the segment.
    pub fn last_time(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }

    pub fn to_stream(&self) -> EventStream {
        // Events of a valid stream are already ordered and in bounds.
        EventStream::new(self.events.to_vec(), self.geometry).expect("segment of a valid stream")
    }
}

fn bounds_of(events: &[Event]) -> (u64, u64) {
    match (events.first(), events.last()) {
        (Some(a), Some(b)) => (a.t, b.t.saturating_add(1)),
        _ => (0, 0),
    }
}

/// Consecutive segments of exactly `n` events.
pub fn segment_by_count(stream: &EventStream, n: usize, tail: TailPolicy) -> Result<Vec<Segment<'_>>> {
    if n == 0 {
        return Err(Error::param("event count per segment must be at least 1"));
    }
    let events = stream.events();
    let g = stream.geometry();
    let mut out = Vec::with_capacity(events.len() / n + 1);
    let mut start = 0;
    while start < events.len() {
        let end = (start + n).min(events.len());
        if end - start < n && tail == TailPolicy::Drop {
            break;
        }
        let chunk = &events[start..end];
        out.push(Segment::new(chunk, start, bounds_of(chunk), g, Provenance::ByCount(n)));
        start = end;
    }
    Ok(out)
}

/// Fixed-length time windows `[t_first + i*dt, t_first + (i+1)*dt)`.
///
/// Empty windows are emitted. The windows tile `[t_first, t_last + 1)`; the
/// final window is partial when that span is not a multiple of `dt`, and its
/// nominal end is clipped to `t_last + 1`.
pub fn segment_by_time(stream: &EventStream, dt: u64, tail: TailPolicy) -> Result<Vec<Segment<'_>>> {
    if dt == 0 {
        return Err(Error::param("time window length must be at least 1 µs"));
    }
    let Some((first, last)) = stream.time_span() else {
        return Ok(Vec::new());
    };
    let events = stream.events();
    let g = stream.geometry();
    let end_excl = last.saturating_add(1);
    let span = end_excl - first;
    let full = span / dt;
    let has_partial = span % dt != 0;
    let windows = full + u64::from(has_partial && tail == TailPolicy::EmitPartial);

    let mut out = Vec::with_capacity(windows as usize);
    let mut start = 0;
    for i in 0..windows {
        let t0 = first + i * dt;
        let t1 = t0.saturating_add(dt).min(end_excl);
        let len = events[start..].partition_point(|e| e.t < t1);
        out.push(Segment::new(
            &events[start..start + len],
            start,
            (t0, t1),
            g,
            Provenance::ByTime(dt),
        ));
        start += len;
    }
    Ok(out)
}

/// Segments closed as soon as they contain `k` distinct pixels (polarity
/// ignored), or `max_events` events, whichever comes first. Segments closed
/// by the cap are flagged via [`Segment::capped`].
pub fn segment_by_active_pixels(
    stream: &EventStream,
    k: usize,
    max_events: usize,
    tail: TailPolicy,
) -> Result<Vec<Segment<'_>>> {
    if k == 0 {
        return Err(Error::param("active pixel count per segment must be at least 1"));
    }
    if max_events == 0 {
        return Err(Error::param("event cap must be at least 1"));
    }
    let events = stream.events();
    let g = stream.geometry();
    let width = g.width as usize;
    // Generation stamps avoid clearing the visited map between segments.
    let mut stamp = vec![0u32; g.pixel_count()];
    let mut generation = 1u32;
    let mut distinct = 0usize;
    let mut start = 0usize;
    let mut out = Vec::new();

    for (i, e) in events.iter().enumerate() {
        let idx = e.y as usize * width + e.x as usize;
        if stamp[idx] != generation {
            stamp[idx] = generation;
            distinct += 1;
        }
        let len = i + 1 - start;
        let reached = distinct >= k;
        if reached || len >= max_events {
            let chunk = &events[start..=i];
            let mut seg = Segment::new(chunk, start, bounds_of(chunk), g, Provenance::ByActivePixels(k));
            seg.capped = !reached;
            out.push(seg);
            start = i + 1;
            distinct = 0;
            generation = generation.wrapping_add(1);
            if generation == 0 {
                stamp.fill(0);
                generation = 1;
            }
        }
    }
    if start < events.len() && tail == TailPolicy::EmitPartial {
        let chunk = &events[start..];
        out.push(Segment::new(
            chunk,
            start,
            bounds_of(chunk),
            g,
            Provenance::ByActivePixels(k),
        ));
    }
    Ok(out)
}

/// The last `min(n, available)` events with `t <= t_query`.
pub fn window_before(stream: &EventStream, t_query: u64, n: usize) -> Result<Segment<'_>> {
    if n == 0 {
        return Err(Error::param("window size must be at least 1"));
    }
    let events = stream.events();
    let end = events.partition_point(|e| e.t <= t_query);
    let start = end.saturating_sub(n);
    let chunk = &events[start..end];
    let t_end = t_query.saturating_add(1);
    let bounds = match chunk.first() {
        Some(e) => (e.t, t_end),
        None => (t_end, t_end),
    };
    Ok(Segment::new(
        chunk,
        start,
        bounds,
        stream.geometry(),
        Provenance::Window(n),
    ))
}

/// Command-line segment specification: `count:N`, `time:MS`, `pixels:K`
/// (optionally `pixels:K/CAP`) or `window:N@T` (T in µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "standard", rename_all = "snake_case")]
pub enum SegmentSpec {
    Count { n: usize },
    Time { dt_us: u64 },
    Pixels { k: usize, max_events: usize },
    Window { n: usize, t_us: u64 },
}

impl SegmentSpec {
    pub const DEFAULT_PIXEL_CAP: usize = 1_000_000;

    pub fn apply<'a>(&self, stream: &'a EventStream, tail: TailPolicy) -> Result<Vec<Segment<'a>>> {
        match *self {
            SegmentSpec::Count { n } => segment_by_count(stream, n, tail),
            SegmentSpec::Time { dt_us } => segment_by_time(stream, dt_us, tail),
            SegmentSpec::Pixels { k, max_events } => segment_by_active_pixels(stream, k, max_events, tail),
            SegmentSpec::Window { n, t_us } => Ok(vec![window_before(stream, t_us, n)?]),
        }
    }
}

impl fmt::Display for SegmentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SegmentSpec::Count { n } => write!(f, "count:{n}"),
            SegmentSpec::Time { dt_us } => write!(f, "time:{}", dt_us as f64 / 1000.0),
            SegmentSpec::Pixels { k, max_events } => write!(f, "pixels:{k}/{max_events}"),
            SegmentSpec::Window { n, t_us } => write!(f, "window:{n}@{t_us}"),
        }
    }
}

impl FromStr for SegmentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("bad segment spec {s:?}"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let spec = match kind {
            "count" => SegmentSpec::Count {
                n: arg.parse().map_err(|_| bad())?,
            },
            "time" => {
                let ms: f64 = arg.parse().map_err(|_| bad())?;
                if !(ms.is_finite() && ms > 0.0) {
                    return Err(bad());
                }
                SegmentSpec::Time {
                    dt_us: (ms * 1000.0).round() as u64,
                }
            }
            "pixels" => {
                let (k, cap) = match arg.split_once('/') {
                    Some((k, cap)) => (k, cap.parse().map_err(|_| bad())?),
                    None => (arg, Self::DEFAULT_PIXEL_CAP),
                };
                SegmentSpec::Pixels {
                    k: k.parse().map_err(|_| bad())?,
                    max_events: cap,
                }
            }
            "window" => {
                let (n, t) = arg.split_once('@').ok_or_else(bad)?;
                SegmentSpec::Window {
                    n: n.parse().map_err(|_| bad())?,
                    t_us: t.parse().map_err(|_| bad())?,
                }
            }
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}
