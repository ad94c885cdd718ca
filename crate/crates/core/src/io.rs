//! Stream serialization: `csv` text and the `evb` binary container.
//!
//! `csv`: UTF-8 lines `t,x,y,p` with `p` in `{1,-1}`, optional header line
//! `t,x,y,p`.
//!
//! `evb`: a 16-byte header (`"EVB1"`, width `u16`, height `u16`, record count
//! `u64`) followed by 16-byte little-endian records (`t: u64`, `x: u16`,
//! `y: u16`, `p: i8`, three zero pad bytes).

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};

pub const EVB_MAGIC: &[u8; 4] = b"EVB1";
pub const EVB_HEADER_LEN: usize = 16;
pub const EVB_RECORD_LEN: usize = 16;
pub const CSV_HEADER: &str = "t,x,y,p";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Evb,
}

impl Format {
    /// Guesses the format from a file extension (`.csv` or `.evb`).
    pub fn from_path(path: &std::path::Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "evb" => Some(Format::Evb),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "evb" => Ok(Format::Evb),
            _ => Err(Error::param(format!("unknown stream format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept polarity-less input (3-column csv, or a zero polarity byte in
    /// evb) and map it to [`Polarity::Pos`].
    pub polarity_less: bool,
}

pub fn load_stream(source: &[u8], format: Format, geometry: SensorGeometry) -> Result<EventStream> {
    load_stream_with(source, format, geometry, LoadOptions::default())
}

pub fn load_stream_with(
    source: &[u8],
    format: Format,
    geometry: SensorGeometry,
    opts: LoadOptions,
) -> Result<EventStream> {
    let events = match format {
        Format::Csv => parse_csv(source, opts)?,
        Format::Evb => parse_evb(source, opts)?.1,
    };
    EventStream::new(events, geometry)
}

pub fn write_stream(stream: &EventStream, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut out = String::with_capacity(16 + stream.len() * 20);
            out.push_str(CSV_HEADER);
            out.push('\n');
            for e in stream.events() {
                let _ = writeln!(out, "{},{},{},{}", e.t, e.x, e.y, e.p.as_i8());
            }
            out.into_bytes()
        }
        Format::Evb => {
            let g = stream.geometry();
            let mut out = Vec::with_capacity(EVB_HEADER_LEN + stream.len() * EVB_RECORD_LEN);
            out.extend_from_slice(EVB_MAGIC);
            out.extend_from_slice(&g.width.to_le_bytes());
            out.extend_from_slice(&g.height.to_le_bytes());
            out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
            for e in stream.events() {
                out.extend_from_slice(&e.t.to_le_bytes());
                out.extend_from_slice(&e.x.to_le_bytes());
                out.extend_from_slice(&e.y.to_le_bytes());
                out.push(e.p.as_i8() as u8);
                out.extend_from_slice(&[0, 0, 0]);
            }
            out
        }
    }
}

/// Reads only the geometry declared in an evb header.
pub fn evb_geometry(source: &[u8]) -> Result<SensorGeometry> {
    let header = evb_header(source)?;
    SensorGeometry::new(header.0, header.1).map_err(|_| Error::MalformedBinary {
        offset: 4,
        reason: "header declares an empty sensor".into(),
    })
}

fn evb_header(source: &[u8]) -> Result<(u16, u16, u64)> {
    if source.len() < EVB_HEADER_LEN {
        return Err(Error::MalformedBinary {
            offset: source.len(),
            reason: format!("truncated header ({} of {EVB_HEADER_LEN} bytes)", source.len()),
        });
    }
    if &source[..4] != EVB_MAGIC {
        return Err(Error::MalformedBinary {
            offset: 0,
            reason: "missing EVB1 magic".into(),
        });
    }
    let width = u16::from_le_bytes([source[4], source[5]]);
    let height = u16::from_le_bytes([source[6], source[7]]);
    let count = u64::from_le_bytes(source[8..16].try_into().unwrap());
    Ok((width, height, count))
}

fn parse_evb(source: &[u8], opts: LoadOptions) -> Result<(SensorGeometry, Vec<Event>)> {
    let (width, height, count) = evb_header(source)?;
    let body = &source[EVB_HEADER_LEN..];
    let expected = (count as u128) * EVB_RECORD_LEN as u128;
    if body.len() as u128 != expected {
        return Err(Error::MalformedBinary {
            offset: EVB_HEADER_LEN,
            reason: format!(
                "header declares {count} records ({expected} bytes) but {} bytes follow",
                body.len()
            ),
        });
    }
    let mut events = Vec::with_capacity(count as usize);
    for (i, rec) in body.chunks_exact(EVB_RECORD_LEN).enumerate() {
        let offset = EVB_HEADER_LEN + i * EVB_RECORD_LEN;
        let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let x = u16::from_le_bytes([rec[8], rec[9]]);
        let y = u16::from_le_bytes([rec[10], rec[11]]);
        let p = match (rec[12] as i8, opts.polarity_less) {
            (0, true) => Polarity::Pos,
            (v, _) => Polarity::from_i8(v).ok_or_else(|| Error::MalformedBinary {
                offset: offset + 12,
                reason: format!("polarity byte {v} is not 1 or -1"),
            })?,
        };
        if rec[13..16] != [0, 0, 0] {
            return Err(Error::MalformedBinary {
                offset: offset + 13,
                reason: "non-zero padding".into(),
            });
        }
        events.push(Event { t, x, y, p });
    }
    // Header geometry is informational; callers validate against their own.
    let geometry = SensorGeometry { width, height };
    Ok((geometry, events))
}

fn parse_csv(source: &[u8], opts: LoadOptions) -> Result<Vec<Event>> {
    let text = std::str::from_utf8(source).map_err(|e| {
        let line = source[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::MalformedText {
            line,
            reason: "invalid UTF-8".into(),
        }
    })?;
    let mut events = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !seen_data && is_header(line) {
            seen_data = true;
            continue;
        }
        seen_data = true;
        events.push(parse_csv_record(line, line_no, opts)?);
    }
    Ok(events)
}

fn is_header(line: &str) -> bool {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    cols == ["t", "x", "y", "p"] || cols == ["t", "x", "y"]
}

fn parse_csv_record(line: &str, line_no: usize, opts: LoadOptions) -> Result<Event> {
    let bad = |reason: String| Error::MalformedText { line: line_no, reason };
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    let (t, x, y, p) = match (cols.as_slice(), opts.polarity_less) {
        ([t, x, y, p], _) => (*t, *x, *y, Some(*p)),
        ([t, x, y], true) => (*t, *x, *y, None),
        _ => return Err(bad(format!("expected 4 comma-separated fields, got {}", cols.len()))),
    };
    let t = parse_timestamp(t, line_no)?;
    let x: u16 = x.parse().map_err(|_| bad(format!("bad x coordinate {x:?}")))?;
    let y: u16 = y.parse().map_err(|_| bad(format!("bad y coordinate {y:?}")))?;
    let p = match p {
        None => Polarity::Pos,
        Some(s) => match s {
            "1" | "+1" => Polarity::Pos,
            "-1" => Polarity::Neg,
            _ => return Err(bad(format!("polarity {s:?} is not 1 or -1"))),
        },
    };
    Ok(Event { t, x, y, p })
}

fn parse_timestamp(s: &str, line_no: usize) -> Result<u64> {
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse::<u64>().map_err(|_| Error::TimestampOverflow { line: line_no })
    } else {
        Err(Error::MalformedText {
            line: line_no,
            reason: format!("bad timestamp {s:?}"),
        })
    }
}
