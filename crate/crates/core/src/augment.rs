//! Training-time augmentation: view transforms with matching keypoint
//! transforms, variable-length segments and random noise suppression.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};
use crate::frame::{Channel, Frame};
use crate::keypoints::KeypointSet;
use crate::segment::{window_before, Segment};

/// Integer crop window `[x0, x0 + width) x [y0, y0 + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x0: u16,
    pub y0: u16,
    pub width: u16,
    pub height: u16,
}

impl CropRect {
    pub fn full(g: SensorGeometry) -> Self {
        CropRect {
            x0: 0,
            y0: 0,
            width: g.width,
            height: g.height,
        }
    }

    fn check_within(&self, g: SensorGeometry) -> Result<()> {
        let fits = self.width > 0
            && self.height > 0
            && self.x0 as u32 + self.width as u32 <= g.width as u32
            && self.y0 as u32 + self.height as u32 <= g.height as u32;
        if !fits {
            return Err(Error::param(format!("crop {self:?} does not fit inside a {g} frame")));
        }
        Ok(())
    }
}

/// One sampled augmentation.
///
/// Geometric order: quarter turns, then fine rotation about the frame center,
/// then crop (in rotated coordinates). A quarter turn maps pixel `(x, y)` of
/// an `H`-row frame to `(H - 1 - y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub rotation_quarters: u8,
    pub fine_rotation_deg: f64,
    pub crop: Option<CropRect>,
    pub length_multiplier: f64,
    pub noise_threshold: f64,
    pub filter_size: usize,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            rotation_quarters: 0,
            fine_rotation_deg: 0.0,
            crop: None,
            length_multiplier: 1.0,
            noise_threshold: 0.0,
            filter_size: 3,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rotation_quarters > 3 {
            return Err(Error::param("rotation_quarters must be 0..=3"));
        }
        if !self.fine_rotation_deg.is_finite() {
            return Err(Error::param("fine rotation must be finite"));
        }
        if !(self.length_multiplier.is_finite() && self.length_multiplier > 0.0) {
            return Err(Error::param("length multiplier must be positive"));
        }
        if !(self.noise_threshold.is_finite() && self.noise_threshold >= 0.0) {
            return Err(Error::param("noise threshold must be non-negative"));
        }
        check_filter_size(self.filter_size)
    }

    /// Frame geometry after rotation and crop of an `input` frame.
    pub fn output_geometry(&self, input: SensorGeometry) -> Result<SensorGeometry> {
        let rotated = rotated_geometry(input, self.rotation_quarters);
        match self.crop {
            Some(c) => {
                c.check_within(rotated)?;
                Ok(SensorGeometry {
                    width: c.width,
                    height: c.height,
                })
            }
            None => Ok(rotated),
        }
    }

    fn is_exact(&self) -> bool {
        self.fine_rotation_deg == 0.0
    }
}

fn check_filter_size(sigma: usize) -> Result<()> {
    if sigma == 0 || sigma.is_multiple_of(2) {
        return Err(Error::param(format!(
            "filter size must be a positive odd integer, got {sigma}"
        )));
    }
    Ok(())
}

fn rotated_geometry(g: SensorGeometry, quarters: u8) -> SensorGeometry {
    if quarters % 2 == 1 {
        SensorGeometry {
            width: g.height,
            height: g.width,
        }
    } else {
        g
    }
}

/// Closed interval used when sampling a float field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut impl Rng, name: &str) -> Result<f64> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return Err(Error::param(format!(
                "empty range for {name}: [{}, {}]",
                self.lo, self.hi
            )));
        }
        if self.lo == self.hi {
            return Ok(self.lo);
        }
        Ok(rng.random_range(self.lo..=self.hi))
    }
}

/// Distributions that [`sample_augment`] draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRanges {
    /// Frame size the crop is placed in (before rotation).
    pub frame: SensorGeometry,
    pub rotation_quarters: Vec<u8>,
    pub fine_rotation_deg: Interval,
    /// Fixed crop size placed uniformly at random; `None` keeps the full frame.
    pub crop_size: Option<(u16, u16)>,
    pub length_multiplier: Interval,
    pub noise_threshold: Interval,
    pub filter_sizes: Vec<usize>,
}

impl AugmentRanges {
    /// No view change, unit length, `ε_r ~ U[0, 2]`, `σ = 3`.
    pub fn new(frame: SensorGeometry) -> Self {
        AugmentRanges {
            frame,
            rotation_quarters: vec![0],
            fine_rotation_deg: Interval::point(0.0),
            crop_size: None,
            length_multiplier: Interval::point(1.0),
            noise_threshold: Interval::new(0.0, 2.0),
            filter_sizes: vec![3],
        }
    }
}

/// Draws one [`AugmentSpec`]; identical `seed` gives an identical spec.
pub fn sample_augment(ranges: &AugmentRanges, seed: u64) -> Result<AugmentSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if ranges.rotation_quarters.is_empty() {
        return Err(Error::param("empty range for rotation_quarters"));
    }
    if ranges.filter_sizes.is_empty() {
        return Err(Error::param("empty range for filter_sizes"));
    }
    let rotation_quarters = ranges.rotation_quarters[rng.random_range(0..ranges.rotation_quarters.len())];
    let fine_rotation_deg = ranges.fine_rotation_deg.sample(&mut rng, "fine_rotation_deg")?;
    let crop = match ranges.crop_size {
        None => None,
        Some((w, h)) => {
            let g = rotated_geometry(ranges.frame, rotation_quarters);
            if w == 0 || h == 0 || w > g.width || h > g.height {
                return Err(Error::param(format!("crop {w}x{h} does not fit a {g} frame")));
            }
            let x0 = rng.random_range(0..=(g.width - w));
            let y0 = rng.random_range(0..=(g.height - h));
            Some(CropRect {
                x0,
                y0,
                width: w,
                height: h,
            })
        }
    };
    let length_multiplier = ranges.length_multiplier.sample(&mut rng, "length_multiplier")?;
    let noise_threshold = ranges.noise_threshold.sample(&mut rng, "noise_threshold")?;
    let filter_size = ranges.filter_sizes[rng.random_range(0..ranges.filter_sizes.len())];
    let spec = AugmentSpec {
        rotation_quarters,
        fine_rotation_deg,
        crop,
        length_multiplier,
        noise_threshold,
        filter_size,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn rotate_frame_quarter(frame: &Frame) -> Frame {
    let (c_n, h, w) = frame.shape();
    let out_g = rotated_geometry(frame.geometry(), 1);
    let mut out = Frame::zeros(frame.channels(), out_g);
    for c in 0..c_n {
        for y in 0..h {
            for x in 0..w {
                out.set(c, h - 1 - y, x, frame.get(c, x, y));
            }
        }
    }
    out
}

fn rotation_center(g: SensorGeometry) -> (f64, f64) {
    ((g.width as f64 - 1.0) / 2.0, (g.height as f64 - 1.0) / 2.0)
}

fn rotate_frame_fine(frame: &Frame, deg: f64) -> Frame {
    let (c_n, h, w) = frame.shape();
    let (cx, cy) = rotation_center(frame.geometry());
    let (sin, cos) = deg.to_radians().sin_cos();
    let mut out = Frame::zeros(frame.channels(), frame.geometry());
    for y in 0..h {
        for x in 0..w {
            // inverse map: rotate the output pixel back by -deg
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = (cx + dx * cos + dy * sin).round();
            let sy = (cy - dx * sin + dy * cos).round();
            if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
                continue;
            }
            for c in 0..c_n {
                out.set(c, x, y, frame.get(c, sx as usize, sy as usize));
            }
        }
    }
    out
}

fn crop_frame(frame: &Frame, rect: CropRect) -> Result<Frame> {
    rect.check_within(frame.geometry())?;
    let g = SensorGeometry {
        width: rect.width,
        height: rect.height,
    };
    let mut out = Frame::zeros(frame.channels(), g);
    for c in 0..frame.channels().len() {
        for y in 0..rect.height as usize {
            for x in 0..rect.width as usize {
                out.set(c, x, y, frame.get(c, x + rect.x0 as usize, y + rect.y0 as usize));
            }
        }
    }
    Ok(out)
}

/// Applies the view transform of `spec` to a frame.
pub fn transform_frame(frame: &Frame, spec: &AugmentSpec) -> Result<Frame> {
    spec.validate()?;
    let mut f = frame.clone();
    for _ in 0..spec.rotation_quarters {
        f = rotate_frame_quarter(&f);
    }
    if spec.fine_rotation_deg != 0.0 {
        f = rotate_frame_fine(&f, spec.fine_rotation_deg);
    }
    if let Some(rect) = spec.crop {
        f = crop_frame(&f, rect)?;
    }
    Ok(f)
}

/// Applies the view transform of `spec` to 2D keypoints given in the pixel
/// coordinates of a frame of size `input`.
pub fn transform_keypoints(kps: &KeypointSet, input: SensorGeometry, spec: &AugmentSpec) -> Result<KeypointSet> {
    spec.validate()?;
    if kps.dim() != 2 {
        return Err(Error::ShapeMismatch("view transforms apply to 2D keypoints".into()));
    }
    let mut g = input;
    let mut out = kps.clone();
    for _ in 0..spec.rotation_quarters {
        let h = g.height as f64;
        out = out.map(|[u, v, _]| [h - 1.0 - v, u, 0.0]);
        g = rotated_geometry(g, 1);
    }
    if spec.fine_rotation_deg != 0.0 {
        let (cx, cy) = rotation_center(g);
        let (sin, cos) = spec.fine_rotation_deg.to_radians().sin_cos();
        out = out.map(|[u, v, _]| {
            let (dx, dy) = (u - cx, v - cy);
            [cx + dx * cos - dy * sin, cy + dx * sin + dy * cos, 0.0]
        });
    }
    if let Some(rect) = spec.crop {
        rect.check_within(g)?;
        out = out.map(|[u, v, _]| [u - rect.x0 as f64, v - rect.y0 as f64, 0.0]);
    }
    Ok(out)
}

/// Transforms a frame and its 2D keypoints by the same view map.
pub fn apply_geometric(frame: &Frame, keypoints: &KeypointSet, spec: &AugmentSpec) -> Result<(Frame, KeypointSet)> {
    let kps = transform_keypoints(keypoints, frame.geometry(), spec)?;
    Ok((transform_frame(frame, spec)?, kps))
}

/// Event-level counterpart of [`transform_frame`] for quarter turns and
/// crops: rotates event coordinates and drops events outside the crop.
pub fn transform_events(stream: &EventStream, spec: &AugmentSpec) -> Result<EventStream> {
    spec.validate()?;
    if !spec.is_exact() {
        return Err(Error::param(
            "event-level transforms support quarter turns and crops only",
        ));
    }
    let mut g = stream.geometry();
    let mut events: Vec<Event> = stream.events().to_vec();
    for _ in 0..spec.rotation_quarters {
        let h = g.height;
        for e in &mut events {
            let (x, y) = (e.x, e.y);
            e.x = h - 1 - y;
            e.y = x;
        }
        g = rotated_geometry(g, 1);
    }
    if let Some(rect) = spec.crop {
        rect.check_within(g)?;
        events
            .retain(|e| e.x >= rect.x0 && e.x < rect.x0 + rect.width && e.y >= rect.y0 && e.y < rect.y0 + rect.height);
        for e in &mut events {
            e.x -= rect.x0;
            e.y -= rect.y0;
        }
        g = SensorGeometry {
            width: rect.width,
            height: rect.height,
        };
    }
    EventStream::new(events, g)
}

/// Keep-mask derived from a smoothed EC frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMask {
    smoothed: Vec<f64>,
    keep: Vec<bool>,
    geometry: SensorGeometry,
}

impl NoiseMask {
    /// Smoothed count for `(polarity, x, y)`.
    pub fn smoothed(&self, p: Polarity, x: usize, y: usize) -> f64 {
        let g = self.geometry;
        self.smoothed[p.index() * g.pixel_count() + y * g.width as usize + x]
    }

    pub fn keeps(&self, p: Polarity, x: usize, y: usize) -> bool {
        let g = self.geometry;
        self.keep[p.index() * g.pixel_count() + y * g.width as usize + x]
    }

    /// Zeroes every masked pixel in every channel of `frame`, using the plane
    /// that matches each channel's polarity.
    pub fn apply(&self, frame: &Frame) -> Result<Frame> {
        if frame.geometry() != self.geometry {
            return Err(Error::ShapeMismatch(format!(
                "mask is {} but frame is {}",
                self.geometry,
                frame.geometry()
            )));
        }
        let n = self.geometry.pixel_count();
        let mut out = frame.clone();
        for (c, ch) in frame.channels().iter().enumerate() {
            let keep = &self.keep[ch.polarity().index() * n..][..n];
            for (v, &k) in out.plane_mut(c).iter_mut().zip(keep) {
                if !k {
                    *v = 0.0;
                }
            }
        }
        Ok(out)
    }
}

/// Builds the noise mask `EC * E_σ > ε` with a σ×σ mean filter and zero
/// padding, computed per polarity.
pub fn noise_mask(ec: &Frame, sigma: usize, eps: f64) -> Result<NoiseMask> {
    check_filter_size(sigma)?;
    if ec.channels() != [Channel::EcPos, Channel::EcNeg] {
        return Err(Error::ShapeMismatch(format!(
            "noise mask needs an [EC+, EC-] frame, got {:?}",
            ec.channels()
        )));
    }
    let (_, h, w) = ec.shape();
    let r = (sigma / 2) as isize;
    let area = (sigma * sigma) as f64;
    let mut smoothed = Vec::with_capacity(2 * h * w);
    for c in 0..2 {
        // summed-area table with a zero border row/column
        let plane = ec.plane(c);
        let mut sat = vec![0f64; (h + 1) * (w + 1)];
        for y in 0..h {
            let mut row = 0f64;
            for x in 0..w {
                row += plane[y * w + x] as f64;
                sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
            }
        }
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize) as usize;
        for y in 0..h as isize {
            let (y0, y1) = (clamp(y - r, h), clamp(y + r + 1, h));
            for x in 0..w as isize {
                let (x0, x1) = (clamp(x - r, w), clamp(x + r + 1, w));
                let s =
                    sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
                smoothed.push(s / area);
            }
        }
    }
    let keep = smoothed.iter().map(|&s| s > eps).collect();
    Ok(NoiseMask {
        smoothed,
        keep,
        geometry: ec.geometry(),
    })
}

/// Suppresses pixels whose neighbourhood event count is at most `eps` in all
/// of `frames`, using one mask computed from `ec`.
pub fn suppress_noise(frames: &[Frame], ec: &Frame, sigma: usize, eps: f64) -> Result<Vec<Frame>> {
    let mask = noise_mask(ec, sigma, eps)?;
    frames.iter().map(|f| mask.apply(f)).collect()
}

/// The last `round(base_n * multiplier)` events up to `anchor_t`.
///
/// The label paired with this segment is the pose at `anchor_t`.
pub fn variable_length_segment(
    stream: &EventStream,
    anchor_t: u64,
    base_n: usize,
    multiplier: f64,
) -> Result<Segment<'_>> {
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(Error::param(format!(
            "length multiplier must be positive, got {multiplier}"
        )));
    }
    let n = ((base_n as f64 * multiplier).round() as usize).max(1);
    window_before(stream, anchor_t, n)
}
