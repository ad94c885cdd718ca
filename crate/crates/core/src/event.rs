//! Event data model and sensor geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{Provenance, Segment};

/// Sign of the brightness change that triggered an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Pos,
    Neg,
}

impl Polarity {
    /// Channel index used by every two-channel representation (`+` first).
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Polarity::Pos => 0,
            Polarity::Neg => 1,
        }
    }

    #[inline]
    pub fn as_i8(self) -> i8 {
        match self {
            Polarity::Pos => 1,
            Polarity::Neg => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Polarity::Pos),
            -1 => Some(Polarity::Neg),
            _ => None,
        }
    }
}

/// A single event: timestamp in microseconds, pixel column/row, polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Event { t, x, y, p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!(
                "sensor geometry must be non-empty, got {width}x{height}"
            )));
        }
        Ok(SensorGeometry { width, height })
    }

    #[inline]
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

impl std::fmt::Display for SensorGeometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl std::str::FromStr for SensorGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::param(format!("expected WIDTHxHEIGHT, got {s:?}")))?;
        let w = w
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("bad width in {s:?}")))?;
        let h = h
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("bad height in {s:?}")))?;
        SensorGeometry::new(w, h)
    }
}

/// A time-ordered, geometry-validated sequence of events.
///
/// Construction sorts stably by timestamp, so events sharing a timestamp keep
/// their input order. The stream is immutable afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
    geometry: SensorGeometry,
}

impl EventStream {
    /// Validates every event against `geometry` and sorts by time.
    pub fn new(mut events: Vec<Event>, geometry: SensorGeometry) -> Result<Self> {
        for (index, e) in events.iter().enumerate() {
            if !geometry.contains(e.x, e.y) {
                return Err(Error::OutOfBounds {
                    index,
                    x: e.x as u32,
                    y: e.y as u32,
                    width: geometry.width,
                    height: geometry.height,
                });
            }
        }
        if !events.windows(2).all(|w| w[0].t <= w[1].t) {
            events.sort_by_key(|e| e.t);
        }
        Ok(EventStream { events, geometry })
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        EventStream {
            events: Vec::new(),
            geometry,
        }
    }

    #[inline]
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.events.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// First and last timestamps, if any.
    pub fn time_span(&self) -> Option<(u64, u64)> {
        Some((self.events.first()?.t, self.events.last()?.t))
    }

    /// Events with `t0 <= t < t1`, as a view carrying the nominal bounds.
    pub fn slice_time(&self, t0: u64, t1: u64) -> Result<Segment<'_>> {
        if t0 > t1 {
            return Err(Error::param(format!("slice start {t0} is after end {t1}")));
        }
        let start = self.events.partition_point(|e| e.t < t0);
        let end = start + self.events[start..].partition_point(|e| e.t < t1);
        Ok(Segment::new(
            &self.events[start..end],
            start,
            (t0, t1),
            self.geometry,
            Provenance::TimeSlice,
        ))
    }

    /// The whole stream as a single segment.
    pub fn as_segment(&self) -> Segment<'_> {
        let bounds = match self.time_span() {
            Some((a, b)) => (a, b.saturating_add(1)),
            None => (0, 0),
        };
        Segment::new(&self.events, 0, bounds, self.geometry, Provenance::TimeSlice)
    }

    /// Merges two streams over the same geometry; ties keep `self` first.
    pub fn merge(&self, other: &EventStream) -> Result<EventStream> {
        if self.geometry != other.geometry {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge {} stream with {} stream",
                self.geometry, other.geometry
            )));
        }
        let (a, b) = (&self.events, &other.events);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if b[j].t < a[i].t {
                out.push(b[j]);
                j += 1;
            } else {
                out.push(a[i]);
                i += 1;
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Ok(EventStream {
            events: out,
            geometry: self.geometry,
        })
    }
}

/// Free-function form of [`EventStream::slice_time`].
pub fn slice_time(stream: &EventStream, t0: u64, t1: u64) -> Result<Segment<'_>> {
    stream.slice_time(t0, t1)
}
