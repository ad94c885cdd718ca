//! Event-to-frame representations.
//!
//! All renderers make a single pass over the segment, binning each event to
//! the output resolution and accumulating per-(pixel, polarity) counts and
//! latest timestamps. The frames derived from that pass:
//!
//! * EC: raw event count per pixel and polarity.
//! * LNES: `(t_latest(x,y,p) - t_min) / (t_max - t_min)`, with `t_min`/`t_max`
//!   taken over the segment's events. If all events share one timestamp the
//!   active pixels take 1.0.
//! * LNEC: EC divided by its global maximum over both polarities.
//! * LNECS: LNES channels followed by LNEC channels.
//! * LNEWCS: LNES × LNEC per pixel and polarity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::frame::{Channel, Frame};
use crate::segment::Segment;

/// Floor-scaling map from sensor resolution to frame resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinningMap {
    input: SensorGeometry,
    output: SensorGeometry,
    x_lut: Vec<u16>,
    y_lut: Vec<u16>,
}

impl BinningMap {
    pub fn new(input: SensorGeometry, output: SensorGeometry) -> Result<Self> {
        if output.width > input.width || output.height > input.height {
            return Err(Error::param(format!(
                "output resolution {output} exceeds input resolution {input}"
            )));
        }
        let lut = |n_in: u16, n_out: u16| -> Vec<u16> {
            (0..n_in as u32)
                .map(|v| (v * n_out as u32 / n_in as u32) as u16)
                .collect()
        };
        Ok(BinningMap {
            input,
            output,
            x_lut: lut(input.width, output.width),
            y_lut: lut(input.height, output.height),
        })
    }

    pub fn identity(geometry: SensorGeometry) -> Self {
        BinningMap::new(geometry, geometry).expect("identity map is always valid")
    }

    #[inline]
    pub fn input(&self) -> SensorGeometry {
        self.input
    }

    #[inline]
    pub fn output(&self) -> SensorGeometry {
        self.output
    }

    /// `(floor(x * out.w / in.w), floor(y * out.h / in.h))`.
    pub fn bin(&self, x: u16, y: u16) -> Result<(u16, u16)> {
        if !self.input.contains(x, y) {
            return Err(Error::OutOfBounds {
                index: 0,
                x: x as u32,
                y: y as u32,
                width: self.input.width,
                height: self.input.height,
            });
        }
        Ok((self.x_lut[x as usize], self.y_lut[y as usize]))
    }
}

/// Free-function form of [`BinningMap::bin`].
pub fn bin_coordinates(x: u16, y: u16, map: &BinningMap) -> Result<(u16, u16)> {
    map.bin(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Ec,
    Lnes,
    Lnec,
    Lnecs,
    Lnewcs,
}

impl Representation {
    pub const ALL: [Representation; 5] = [
        Representation::Ec,
        Representation::Lnes,
        Representation::Lnec,
        Representation::Lnecs,
        Representation::Lnewcs,
    ];

    pub fn channels(self) -> &'static [Channel] {
        match self {
            Representation::Ec => &[Channel::EcPos, Channel::EcNeg],
            Representation::Lnes => &[Channel::LnesPos, Channel::LnesNeg],
            Representation::Lnec => &[Channel::LnecPos, Channel::LnecNeg],
            Representation::Lnecs => &[Channel::LnesPos, Channel::LnesNeg, Channel::LnecPos, Channel::LnecNeg],
            Representation::Lnewcs => &[Channel::LnewcsPos, Channel::LnewcsNeg],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::Ec => "ec",
            Representation::Lnes => "lnes",
            Representation::Lnec => "lnec",
            Representation::Lnecs => "lnecs",
            Representation::Lnewcs => "lnewcs",
        }
    }

    pub fn render(self, seg: &Segment, map: &BinningMap) -> Result<Frame> {
        let acc = Accumulator::run(seg, map)?;
        Ok(match self {
            Representation::Ec => acc.ec_frame(),
            Representation::Lnes => acc.lnes_frame(),
            Representation::Lnec => normalize_counts(&acc.ec_frame()),
            Representation::Lnecs => {
                let lnes = acc.lnes_frame();
                let lnec = normalize_counts(&acc.ec_frame());
                Frame::concat(&[&lnes, &lnec])?
            }
            Representation::Lnewcs => weighted_surface(&acc.lnes_frame(), &normalize_counts(&acc.ec_frame())),
        })
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            // The 4-channel variant is sometimes spelled LNECWS.
            .or_else(|| s.eq_ignore_ascii_case("lnecws").then_some(Representation::Lnecs))
            .ok_or_else(|| Error::param(format!("unknown representation {s:?}")))
    }
}

/// Per-(polarity, pixel) counts and latest timestamps at output resolution.
struct Accumulator {
    counts: Vec<u32>,
    latest: Vec<u64>,
    t_min: u64,
    t_max: u64,
    geometry: SensorGeometry,
}

impl Accumulator {
    fn run(seg: &Segment, map: &BinningMap) -> Result<Self> {
        if seg.geometry() != map.input {
            return Err(Error::ShapeMismatch(format!(
                "segment geometry {} does not match binning input {}",
                seg.geometry(),
                map.input
            )));
        }
        let out = map.output;
        let plane = out.pixel_count();
        let width = out.width as usize;
        let mut counts = vec![0u32; 2 * plane];
        let mut latest = vec![0u64; 2 * plane];
        let mut t_min = u64::MAX;
        let mut t_max = 0u64;
        for e in seg.events() {
            let bx = map.x_lut[e.x as usize] as usize;
            let by = map.y_lut[e.y as usize] as usize;
            let idx = e.p.index() * plane + by * width + bx;
            counts[idx] += 1;
            latest[idx] = latest[idx].max(e.t);
            t_min = t_min.min(e.t);
            t_max = t_max.max(e.t);
        }
        Ok(Accumulator {
            counts,
            latest,
            t_min,
            t_max,
            geometry: out,
        })
    }

    fn ec_frame(&self) -> Frame {
        let data = self.counts.iter().map(|&c| c as f32).collect();
        Frame::from_data(data, Representation::Ec.channels().to_vec(), self.geometry).unwrap()
    }

    fn lnes_frame(&self) -> Frame {
        let span = self.t_max.saturating_sub(self.t_min);
        let data = self
            .counts
            .iter()
            .zip(&self.latest)
            .map(|(&c, &t)| match (c, span) {
                (0, _) => 0.0,
                (_, 0) => 1.0,
                _ => ((t - self.t_min) as f64 / span as f64) as f32,
            })
            .collect();
        Frame::from_data(data, Representation::Lnes.channels().to_vec(), self.geometry).unwrap()
    }
}

/// Per-pixel, per-polarity event counts.
pub fn event_count(seg: &Segment, map: &BinningMap) -> Result<Frame> {
    Ok(Accumulator::run(seg, map)?.ec_frame())
}

/// Locally-normalized event surface.
pub fn lnes(seg: &Segment, map: &BinningMap) -> Result<Frame> {
    Ok(Accumulator::run(seg, map)?.lnes_frame())
}

/// Normalizes an EC frame by its global maximum.
pub fn lnec(ec: &Frame) -> Result<Frame> {
    if ec.channels() != Representation::Ec.channels() {
        return Err(Error::ShapeMismatch(format!(
            "LNEC needs an [EC+, EC-] frame, got {:?}",
            ec.channels()
        )));
    }
    Ok(normalize_counts(ec))
}

fn normalize_counts(ec: &Frame) -> Frame {
    let max = ec.data().iter().copied().fold(0.0f32, f32::max);
    let data = if max > 0.0 {
        let max = max as f64;
        ec.data().iter().map(|&v| (v as f64 / max) as f32).collect()
    } else {
        vec![0.0; ec.data().len()]
    };
    Frame::from_data(data, Representation::Lnec.channels().to_vec(), ec.geometry()).unwrap()
}

fn weighted_surface(lnes: &Frame, lnec: &Frame) -> Frame {
    let data = lnes.data().iter().zip(lnec.data()).map(|(a, b)| a * b).collect();
    Frame::from_data(data, Representation::Lnewcs.channels().to_vec(), lnes.geometry()).unwrap()
}

/// LNES channels followed by LNEC channels.
pub fn lnecs(seg: &Segment, map: &BinningMap) -> Result<Frame> {
    Representation::Lnecs.render(seg, map)
}

/// LNES × LNEC, two channels.
pub fn lnewcs(seg: &Segment, map: &BinningMap) -> Result<Frame> {
    Representation::Lnewcs.render(seg, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, EventStream, Polarity};

    fn g(w: u16, h: u16) -> SensorGeometry {
        SensorGeometry::new(w, h).unwrap()
    }

    fn three_events() -> EventStream {
        EventStream::new(
            vec![
                Event::new(10, 1, 1, Polarity::Pos),
                Event::new(30, 1, 1, Polarity::Pos),
                Event::new(40, 2, 2, Polarity::Neg),
            ],
            g(4, 4),
        )
        .unwrap()
    }

    #[test]
    fn binning_examples() {
        let map = BinningMap::new(g(1280, 800), g(240, 150)).unwrap();
        assert_eq!(bin_coordinates(1279, 799, &map).unwrap(), (239, 149));
        assert_eq!(bin_coordinates(0, 0, &map).unwrap(), (0, 0));
        assert!(bin_coordinates(1280, 0, &map).is_err());
        let id = BinningMap::identity(g(7, 5));
        assert_eq!(id.bin(6, 4).unwrap(), (6, 4));
        assert!(BinningMap::new(g(10, 10), g(11, 10)).is_err());
    }

    #[test]
    fn three_event_example() {
        let s = three_events();
        let seg = s.as_segment();
        let map = BinningMap::identity(g(4, 4));

        let ec = event_count(&seg, &map).unwrap();
        assert_eq!(ec.get(0, 1, 1), 2.0);
        assert_eq!(ec.get(1, 2, 2), 1.0);
        assert_eq!(ec.data().iter().sum::<f32>(), 3.0);

        let s_frame = lnes(&seg, &map).unwrap();
        assert!((s_frame.get(0, 1, 1) - 2.0 / 3.0).abs() < 1e-7);
        assert_eq!(s_frame.get(1, 2, 2), 1.0);
        assert_eq!(s_frame.data().iter().filter(|&&v| v != 0.0).count(), 2);

        let c_frame = lnec(&ec).unwrap();
        assert_eq!(c_frame.get(0, 1, 1), 1.0);
        assert_eq!(c_frame.get(1, 2, 2), 0.5);

        let both = lnecs(&seg, &map).unwrap();
        assert_eq!(both.channels(), Representation::Lnecs.channels());
        assert_eq!(both.select(0..2).data(), s_frame.data());
        assert_eq!(both.select(2..4).data(), c_frame.data());

        let w = lnewcs(&seg, &map).unwrap();
        assert!((w.get(0, 1, 1) - 2.0 / 3.0).abs() < 1e-7);
        assert_eq!(w.get(1, 2, 2), 0.5);
    }

    #[test]
    fn empty_and_single_event_segments() {
        let geometry = g(4, 4);
        let map = BinningMap::identity(geometry);
        let empty = EventStream::empty(geometry);
        for rep in Representation::ALL {
            let f = rep.render(&empty.as_segment(), &map).unwrap();
            assert_eq!(f.channels().len(), rep.channels().len());
            assert!(f.data().iter().all(|&v| v == 0.0), "{rep}");
        }
        let one = EventStream::new(vec![Event::new(99, 3, 0, Polarity::Neg)], geometry).unwrap();
        let seg = one.as_segment();
        assert_eq!(lnes(&seg, &map).unwrap().get(1, 3, 0), 1.0);
        assert_eq!(lnewcs(&seg, &map).unwrap().get(1, 3, 0), 1.0);
    }

    #[test]
    fn lnec_edge_cases() {
        let geometry = g(3, 1);
        let zero = Frame::zeros(Representation::Ec.channels(), geometry);
        assert!(lnec(&zero).unwrap().data().iter().all(|&v| v == 0.0));
        let uniform = Frame::from_data(vec![4.0, 0.0, 4.0, 0.0, 4.0, 0.0], zero.channels().to_vec(), geometry).unwrap();
        let n = lnec(&uniform).unwrap();
        assert_eq!(n.data(), &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let not_ec = Frame::zeros(Representation::Lnes.channels(), geometry);
        assert!(lnec(&not_ec).is_err());
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let s = three_events();
        let map = BinningMap::identity(g(5, 5));
        assert!(event_count(&s.as_segment(), &map).is_err());
    }

    #[test]
    fn representation_names() {
        for rep in Representation::ALL {
            assert_eq!(rep.name().parse::<Representation>().unwrap(), rep);
        }
        assert_eq!("LNECS".parse::<Representation>().unwrap(), Representation::Lnecs);
        assert!("eoi".parse::<Representation>().is_err());
    }
}
