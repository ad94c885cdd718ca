//! Deterministic synthetic event streams with ground-truth keypoints.
//!
//! Each pixel follows the idealized contrast-threshold model: it keeps a
//! reference log intensity and emits one event each time the current log
//! intensity moves a further `C` above (positive) or below (negative) it.
//! Shapes are rendered with a one-pixel anti-aliased edge over a unit
//! background, and time is stepped so that no keypoint moves more than
//! `max_step_px` per step. Step positions depend only on normalized time, so
//! a scene replayed at a different speed produces the same events with
//! rescaled timestamps.
//!
//! Background noise is a homogeneous Poisson process per pixel with uniform
//! random polarity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};
use crate::keypoints::{KeypointSet, Trajectory, JOINT_COUNT, MIDDLE_MCP, WRIST};

fn one() -> f64 {
    1.0
}

fn default_rate_hz() -> f64 {
    1000.0
}

fn default_step_px() -> f64 {
    0.25
}

/// Motion of a shape anchor over normalized scene time `s ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Path {
    Static {
        at: [f64; 2],
    },
    Linear {
        from: [f64; 2],
        to: [f64; 2],
    },
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "one")]
        revolutions: f64,
        #[serde(default)]
        phase_deg: f64,
    },
}

impl Path {
    pub fn position(&self, s: f64) -> [f64; 2] {
        match *self {
            Path::Static { at } => at,
            Path::Linear { from, to } => [from[0] + (to[0] - from[0]) * s, from[1] + (to[1] - from[1]) * s],
            Path::Circle {
                center,
                radius,
                revolutions,
                phase_deg,
            } => {
                let a = phase_deg.to_radians() + std::f64::consts::TAU * revolutions * s;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disc {
        radius: f64,
        path: Path,
        /// Log-intensity contrast against the background.
        #[serde(default = "one")]
        contrast: f64,
        #[serde(default)]
        slots: Option<Vec<usize>>,
    },
    Bar {
        length: f64,
        thickness: f64,
        #[serde(default)]
        angle_deg: f64,
        /// Total rotation over the scene.
        #[serde(default)]
        rotation_deg: f64,
        path: Path,
        #[serde(default = "one")]
        contrast: f64,
        #[serde(default)]
        slots: Option<Vec<usize>>,
    },
    /// Articulated chain anchored at the path position; link `i` points at
    /// `base_angle_deg + i * bend_deg + rotation_deg * s`.
    Chain {
        link_lengths: Vec<f64>,
        thickness: f64,
        #[serde(default)]
        base_angle_deg: f64,
        #[serde(default)]
        bend_deg: f64,
        #[serde(default)]
        rotation_deg: f64,
        path: Path,
        #[serde(default = "one")]
        contrast: f64,
        #[serde(default)]
        slots: Option<Vec<usize>>,
    },
}

impl Shape {
    fn contrast(&self) -> f64 {
        match self {
            Shape::Disc { contrast, .. } | Shape::Bar { contrast, .. } | Shape::Chain { contrast, .. } => *contrast,
        }
    }

    fn slots(&self) -> Option<&[usize]> {
        match self {
            Shape::Disc { slots, .. } | Shape::Bar { slots, .. } | Shape::Chain { slots, .. } => slots.as_deref(),
        }
    }

    fn keypoint_count(&self) -> usize {
        match self {
            Shape::Disc { .. } => 1,
            Shape::Bar { .. } => 3,
            Shape::Chain { link_lengths, .. } => link_lengths.len() + 1,
        }
    }

    fn default_slots(&self) -> Vec<usize> {
        match self {
            Shape::Disc { .. } => vec![WRIST],
            Shape::Bar { .. } => vec![WRIST, MIDDLE_MCP, 5],
            Shape::Chain { .. } => (0..self.keypoint_count().min(JOINT_COUNT)).collect(),
        }
    }

    /// Keypoints at normalized time `s`: disc center; bar endpoints and
    /// center; chain joints from the anchor outwards.
    pub fn keypoints(&self, s: f64) -> Vec<[f64; 2]> {
        match self {
            Shape::Disc { path, .. } => vec![path.position(s)],
            Shape::Bar {
                length,
                angle_deg,
                rotation_deg,
                path,
                ..
            } => {
                let c = path.position(s);
                let a = (angle_deg + rotation_deg * s).to_radians();
                let (dx, dy) = (a.cos() * length / 2.0, a.sin() * length / 2.0);
                vec![[c[0] - dx, c[1] - dy], [c[0] + dx, c[1] + dy], c]
            }
            Shape::Chain {
                link_lengths,
                base_angle_deg,
                bend_deg,
                rotation_deg,
                path,
                ..
            } => {
                let mut p = path.position(s);
                let mut out = vec![p];
                for (i, len) in link_lengths.iter().enumerate() {
                    let a = (base_angle_deg + bend_deg * i as f64 + rotation_deg * s).to_radians();
                    p = [p[0] + a.cos() * len, p[1] + a.sin() * len];
                    out.push(p);
                }
                out
            }
        }
    }

    /// Signed distance from `(x, y)` to the shape boundary (negative inside).
    fn signed_distance(&self, kps: &[[f64; 2]], x: f64, y: f64) -> f64 {
        match self {
            Shape::Disc { radius, .. } => ((x - kps[0][0]).powi(2) + (y - kps[0][1]).powi(2)).sqrt() - radius,
            Shape::Bar { thickness, .. } => segment_distance(x, y, kps[0], kps[1]) - thickness / 2.0,
            Shape::Chain { thickness, .. } => {
                kps.windows(2)
                    .map(|w| segment_distance(x, y, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
                    - thickness / 2.0
            }
        }
    }

    fn bbox(&self, kps: &[[f64; 2]]) -> [f64; 4] {
        let pad = 2.0
            + match self {
                Shape::Disc { radius, .. } => *radius,
                Shape::Bar { thickness, .. } | Shape::Chain { thickness, .. } => thickness / 2.0,
            };
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in kps {
            b[0] = b[0].min(p[0] - pad);
            b[1] = b[1].min(p[1] - pad);
            b[2] = b[2].max(p[0] + pad);
            b[3] = b[3].max(p[1] + pad);
        }
        b
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidScene(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            Shape::Disc { radius, .. } => positive(*radius, "disc radius")?,
            Shape::Bar { length, thickness, .. } => {
                positive(*length, "bar length")?;
                positive(*thickness, "bar thickness")?;
            }
            Shape::Chain {
                link_lengths,
                thickness,
                ..
            } => {
                if link_lengths.is_empty() {
                    return Err(Error::InvalidScene("chain needs at least one link".into()));
                }
                for l in link_lengths {
                    positive(*l, "chain link length")?;
                }
                positive(*thickness, "chain thickness")?;
            }
        }
        if !self.contrast().is_finite() {
            return Err(Error::InvalidScene("shape contrast must be finite".into()));
        }
        if let Some(slots) = self.slots() {
            if slots.len() != self.keypoint_count() {
                return Err(Error::InvalidScene(format!(
                    "shape has {} keypoints but {} slots",
                    self.keypoint_count(),
                    slots.len()
                )));
            }
            if let Some(bad) = slots.iter().find(|&&s| s >= JOINT_COUNT) {
                return Err(Error::InvalidScene(format!(
                    "slot {bad} is outside the 21-joint layout"
                )));
            }
        }
        Ok(())
    }
}

fn segment_distance(x: f64, y: f64, a: [f64; 2], b: [f64; 2]) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((x - a[0]) * vx + (y - a[1]) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (px, py) = (a[0] + t * vx, a[1] + t * vy);
    ((x - px).powi(2) + (y - py).powi(2)).sqrt()
}

/// Periodic noise bursts, e.g. strobing from mains-powered lighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstNoise {
    pub period_us: u64,
    pub width_us: u64,
    /// Extra events per pixel per second while a burst is on.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: u16,
    pub height: u16,
    #[serde(default)]
    pub shapes: Vec<Shape>,
    pub contrast_threshold: f64,
    pub duration_us: u64,
    /// Events per pixel per second.
    #[serde(default)]
    pub noise_rate: f64,
    #[serde(default)]
    pub noise_burst: Option<BurstNoise>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rate_hz")]
    pub trajectory_rate_hz: f64,
    #[serde(default = "default_step_px")]
    pub max_step_px: f64,
}

impl SceneConfig {
    pub fn new(geometry: SensorGeometry, contrast_threshold: f64, duration_us: u64) -> Self {
        SceneConfig {
            width: geometry.width,
            height: geometry.height,
            shapes: Vec::new(),
            contrast_threshold,
            duration_us,
            noise_rate: 0.0,
            noise_burst: None,
            seed: 0,
            trajectory_rate_hz: default_rate_hz(),
            max_step_px: default_step_px(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| Error::InvalidScene(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene config serializes")
    }

    pub fn geometry(&self) -> Result<SensorGeometry> {
        SensorGeometry::new(self.width, self.height).map_err(|e| Error::InvalidScene(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        if self.duration_us == 0 {
            return Err(Error::InvalidScene("duration must be positive".into()));
        }
        if !(self.contrast_threshold.is_finite() && self.contrast_threshold > 0.0) {
            return Err(Error::InvalidScene(format!(
                "contrast threshold must be positive, got {}",
                self.contrast_threshold
            )));
        }
        if !(self.noise_rate.is_finite() && self.noise_rate >= 0.0) {
            return Err(Error::InvalidScene("noise rate must be non-negative".into()));
        }
        if !(self.trajectory_rate_hz.is_finite() && self.trajectory_rate_hz > 0.0) {
            return Err(Error::InvalidScene("trajectory rate must be positive".into()));
        }
        if !(self.max_step_px.is_finite() && self.max_step_px > 0.0) {
            return Err(Error::InvalidScene("max_step_px must be positive".into()));
        }
        if let Some(b) = self.noise_burst {
            if b.period_us == 0 || b.width_us > b.period_us || !(b.rate.is_finite() && b.rate >= 0.0) {
                return Err(Error::InvalidScene(format!("invalid burst noise {b:?}")));
            }
        }
        for s in &self.shapes {
            s.validate()?;
        }
        Ok(())
    }

    /// Ground-truth pose at normalized time `s`, laid out on 21 slots.
    /// Unmapped slot `j` sits `j` pixels right of slot 0, so a scene with a
    /// single keypoint still has a non-zero palm length (9 pixels).
    pub fn pose(&self, s: f64) -> KeypointSet {
        let mut slots: [Option<[f64; 2]>; JOINT_COUNT] = [None; JOINT_COUNT];
        for (i, shape) in self.shapes.iter().enumerate() {
            let mapping = match shape.slots() {
                Some(m) => m.to_vec(),
                None if i == 0 => shape.default_slots(),
                None => continue,
            };
            for (kp, slot) in shape.keypoints(s).into_iter().zip(mapping) {
                slots[slot] = Some(kp);
            }
        }
        let anchor = slots[0].unwrap_or([0.0, 0.0]);
        let joints: Vec<[f64; 2]> = slots
            .iter()
            .enumerate()
            .map(|(j, s)| s.unwrap_or([anchor[0] + j as f64, anchor[1]]))
            .collect();
        KeypointSet::planar(&joints).expect("21 slots")
    }

    fn log_intensity(&self, x: f64, y: f64, kps: &[Vec<[f64; 2]>]) -> f64 {
        let mut intensity = 1.0;
        for (shape, k) in self.shapes.iter().zip(kps) {
            let coverage = (0.5 - shape.signed_distance(k, x, y)).clamp(0.0, 1.0);
            if coverage > 0.0 {
                intensity += (shape.contrast().exp() - 1.0) * coverage;
            }
        }
        intensity.max(1e-6).ln()
    }

    fn step_count(&self) -> u64 {
        const PROBES: usize = 4096;
        let mut travel = 0.0;
        let mut prev: Vec<Vec<[f64; 2]>> = self.shapes.iter().map(|s| s.keypoints(0.0)).collect();
        for i in 1..=PROBES {
            let s = i as f64 / PROBES as f64;
            let cur: Vec<Vec<[f64; 2]>> = self.shapes.iter().map(|sh| sh.keypoints(s)).collect();
            let mut step_max: f64 = 0.0;
            for (a, b) in prev.iter().zip(&cur) {
                for (p, q) in a.iter().zip(b) {
                    step_max = step_max.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
                }
            }
            travel += step_max;
            prev = cur;
        }
        ((travel / self.max_step_px).ceil() as u64).clamp(1, self.duration_us)
    }
}

struct PixelState {
    last: f64,
    base: f64,
    level: i64,
}

fn signal_events(cfg: &SceneConfig) -> Vec<Event> {
    let g = cfg.geometry().expect("validated");
    let (w, h) = (g.width as usize, g.height as usize);
    if cfg.shapes.is_empty() {
        return Vec::new();
    }
    let c = cfg.contrast_threshold;
    let steps = cfg.step_count();
    let duration = cfg.duration_us as f64;

    let kps0: Vec<Vec<[f64; 2]>> = cfg.shapes.iter().map(|s| s.keypoints(0.0)).collect();
    let mut state: Vec<PixelState> = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let l = cfg.log_intensity(x as f64, y as f64, &kps0);
            state.push(PixelState {
                last: l,
                base: l,
                level: 0,
            });
        }
    }

    let mut events = Vec::new();
    let mut prev_kps = kps0;
    let mut t_prev = 0.0;
    for k in 1..=steps {
        let s = k as f64 / steps as f64;
        let t_cur = duration * s;
        let kps: Vec<Vec<[f64; 2]>> = cfg.shapes.iter().map(|sh| sh.keypoints(s)).collect();

        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (shape, (a, z)) in cfg.shapes.iter().zip(prev_kps.iter().zip(&kps)) {
            for bb in [shape.bbox(a), shape.bbox(z)] {
                b[0] = b[0].min(bb[0]);
                b[1] = b[1].min(bb[1]);
                b[2] = b[2].max(bb[2]);
                b[3] = b[3].max(bb[3]);
            }
        }
        let x0 = b[0].floor().max(0.0) as usize;
        let y0 = b[1].floor().max(0.0) as usize;
        let x1 = (b[2].ceil().max(-1.0) as i64 + 1).clamp(0, w as i64) as usize;
        let y1 = (b[3].ceil().max(-1.0) as i64 + 1).clamp(0, h as i64) as usize;

        for y in y0..y1 {
            for x in x0..x1 {
                let st = &mut state[y * w + x];
                let cur = cfg.log_intensity(x as f64, y as f64, &kps);
                let prev = st.last;
                if cur == prev {
                    continue;
                }
                let emit_at = |level_value: f64| {
                    let frac = ((level_value - prev) / (cur - prev)).clamp(0.0, 1.0);
                    (t_prev + frac * (t_cur - t_prev)).floor() as u64
                };
                while cur >= st.base + (st.level + 1) as f64 * c {
                    st.level += 1;
                    let t = emit_at(st.base + st.level as f64 * c);
                    events.push(Event::new(t, x as u16, y as u16, Polarity::Pos));
                }
                while cur <= st.base + (st.level - 1) as f64 * c {
                    st.level -= 1;
                    let t = emit_at(st.base + st.level as f64 * c);
                    events.push(Event::new(t, x as u16, y as u16, Polarity::Neg));
                }
                st.last = cur;
            }
        }
        prev_kps = kps;
        t_prev = t_cur;
    }
    events.sort_by_key(|e| e.t);
    events
}

fn trajectory(cfg: &SceneConfig) -> Trajectory {
    let period = ((1e6 / cfg.trajectory_rate_hz).round() as u64).max(1);
    let mut samples = Vec::new();
    let mut t = 0u64;
    while t < cfg.duration_us {
        samples.push((t, cfg.pose(t as f64 / cfg.duration_us as f64)));
        t += period;
    }
    samples.push((cfg.duration_us, cfg.pose(1.0)));
    Trajectory::new(samples).expect("strictly increasing sample times")
}

fn noise_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

/// Renders a scene into an event stream and its keypoint trajectory.
pub fn simulate(scene: &SceneConfig) -> Result<(EventStream, Trajectory)> {
    scene.validate()?;
    let g = scene.geometry()?;
    let mut stream = EventStream::new(signal_events(scene), g)?;
    if scene.noise_rate > 0.0 {
        stream = add_noise(&stream, scene.noise_rate, scene.duration_us, noise_seed(scene.seed, 1))?;
    }
    if let Some(burst) = scene.noise_burst {
        stream = add_burst_noise(&stream, burst, scene.duration_us, noise_seed(scene.seed, 2))?;
    }
    Ok((stream, trajectory(scene)))
}

fn random_events(rng: &mut ChaCha8Rng, g: SensorGeometry, count: u64, t0: u64, t1: u64) -> Vec<Event> {
    (0..count)
        .map(|_| {
            let t = rng.random_range(t0..t1);
            let x = rng.random_range(0..g.width);
            let y = rng.random_range(0..g.height);
            let p = if rng.random_bool(0.5) {
                Polarity::Pos
            } else {
                Polarity::Neg
            };
            Event::new(t, x, y, p)
        })
        .collect()
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::param(format!("noise mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Merges homogeneous background noise over `[0, duration_us)` into a stream.
/// Existing events come first among equal timestamps.
pub fn add_noise(stream: &EventStream, rate: f64, duration_us: u64, seed: u64) -> Result<EventStream> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::param(format!("noise rate must be non-negative, got {rate}")));
    }
    if rate == 0.0 || duration_us == 0 {
        return Ok(stream.clone());
    }
    let g = stream.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = rate * g.pixel_count() as f64 * duration_us as f64 / 1e6;
    let count = poisson_count(&mut rng, mean)?;
    let noise = EventStream::new(random_events(&mut rng, g, count, 0, duration_us), g)?;
    stream.merge(&noise)
}

/// Adds extra noise inside each burst window `[k * period, k * period + width)`.
pub fn add_burst_noise(stream: &EventStream, burst: BurstNoise, duration_us: u64, seed: u64) -> Result<EventStream> {
    if burst.period_us == 0 || burst.width_us == 0 || burst.rate <= 0.0 {
        return Ok(stream.clone());
    }
    let g = stream.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = Vec::new();
    let mut start = 0;
    while start < duration_us {
        let end = (start + burst.width_us).min(duration_us);
        let mean = burst.rate * g.pixel_count() as f64 * (end - start) as f64 / 1e6;
        let count = poisson_count(&mut rng, mean)?;
        noise.extend(random_events(&mut rng, g, count, start, end));
        start += burst.period_us;
    }
    stream.merge(&EventStream::new(noise, g)?)
}
