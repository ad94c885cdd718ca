//! Multi-channel float rasters and the EVF tensor container.
//!
//! EVF layout: magic `"EVF1"`, `u16` channel count, `u16` height, `u16` width,
//! then `C*H*W` little-endian `f32` values, channel-major and row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Polarity, SensorGeometry};

pub const EVF_MAGIC: &[u8; 4] = b"EVF1";
pub const EVF_HEADER_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    LnesPos,
    LnesNeg,
    LnecPos,
    LnecNeg,
    EcPos,
    EcNeg,
    LnewcsPos,
    LnewcsNeg,
}

impl Channel {
    pub fn polarity(self) -> Polarity {
        match self {
            Channel::LnesPos | Channel::LnecPos | Channel::EcPos | Channel::LnewcsPos => Polarity::Pos,
            _ => Polarity::Neg,
        }
    }

    /// EC channels hold raw counts; every other channel is normalized.
    pub fn is_normalized(self) -> bool {
        !matches!(self, Channel::EcPos | Channel::EcNeg)
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::LnesPos => "LNES+",
            Channel::LnesNeg => "LNES-",
            Channel::LnecPos => "LNEC+",
            Channel::LnecNeg => "LNEC-",
            Channel::EcPos => "EC+",
            Channel::EcNeg => "EC-",
            Channel::LnewcsPos => "LNEWCS+",
            Channel::LnewcsNeg => "LNEWCS-",
        }
    }
}

/// A `channels x height x width` raster with labelled channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    data: Vec<f32>,
    channels: Vec<Channel>,
    geometry: SensorGeometry,
}

impl Frame {
    pub fn zeros(channels: &[Channel], geometry: SensorGeometry) -> Self {
        Frame {
            data: vec![0.0; channels.len() * geometry.pixel_count()],
            channels: channels.to_vec(),
            geometry,
        }
    }

    pub fn from_data(data: Vec<f32>, channels: Vec<Channel>, geometry: SensorGeometry) -> Result<Self> {
        let expected = channels.len() * geometry.pixel_count();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} channels at {geometry}",
                data.len(),
                channels.len()
            )));
        }
        Ok(Frame {
            data,
            channels,
            geometry,
        })
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.geometry.width as usize
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.geometry.height as usize
    }

    /// `(channels, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels.len(), self.height(), self.width())
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.geometry.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.geometry.pixel_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[(c * self.height() + y) * self.width() + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f32) {
        let w = self.width();
        let h = self.height();
        self.data[(c * h + y) * w + x] = v;
    }

    pub fn channel_index(&self, channel: Channel) -> Option<usize> {
        self.channels.iter().position(|&c| c == channel)
    }

    /// Copies out the channels `range` as a new frame.
    pub fn select(&self, range: std::ops::Range<usize>) -> Frame {
        let n = self.geometry.pixel_count();
        Frame {
            data: self.data[range.start * n..range.end * n].to_vec(),
            channels: self.channels[range].to_vec(),
            geometry: self.geometry,
        }
    }

    /// Stacks frames along the channel axis.
    pub fn concat(frames: &[&Frame]) -> Result<Frame> {
        let first = frames
            .first()
            .ok_or_else(|| Error::param("cannot concatenate zero frames"))?;
        let mut out = Frame {
            data: Vec::new(),
            channels: Vec::new(),
            geometry: first.geometry,
        };
        for f in frames {
            if f.geometry != first.geometry {
                return Err(Error::ShapeMismatch(format!(
                    "cannot concatenate {} and {} frames",
                    first.geometry, f.geometry
                )));
            }
            out.data.extend_from_slice(&f.data);
            out.channels.extend_from_slice(&f.channels);
        }
        Ok(out)
    }

    pub fn to_evf(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(EVF_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(EVF_MAGIC);
        out.extend_from_slice(&(self.channels.len() as u16).to_le_bytes());
        out.extend_from_slice(&self.geometry.height.to_le_bytes());
        out.extend_from_slice(&self.geometry.width.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decodes an EVF tensor, attaching `channels` as its semantics.
    pub fn from_evf(bytes: &[u8], channels: &[Channel]) -> Result<Frame> {
        let tensor = EvfTensor::decode(bytes)?;
        if tensor.channels != channels.len() {
            return Err(Error::ShapeMismatch(format!(
                "EVF holds {} channels, expected {}",
                tensor.channels,
                channels.len()
            )));
        }
        let geometry = SensorGeometry::new(tensor.width as u16, tensor.height as u16)?;
        Frame::from_data(tensor.data, channels.to_vec(), geometry)
    }
}

/// An EVF tensor without channel semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvfTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl EvfTensor {
    pub fn decode(bytes: &[u8]) -> Result<EvfTensor> {
        if bytes.len() < EVF_HEADER_LEN {
            return Err(Error::MalformedBinary {
                offset: bytes.len(),
                reason: "truncated EVF header".into(),
            });
        }
        if &bytes[..4] != EVF_MAGIC {
            return Err(Error::MalformedBinary {
                offset: 0,
                reason: "missing EVF1 magic".into(),
            });
        }
        let channels = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
        let height = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let width = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        let body = &bytes[EVF_HEADER_LEN..];
        let expected = channels * height * width * 4;
        if body.len() != expected {
            return Err(Error::MalformedBinary {
                offset: EVF_HEADER_LEN,
                reason: format!("expected {expected} payload bytes, found {}", body.len()),
            });
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(EvfTensor {
            channels,
            height,
            width,
            data,
        })
    }
}
