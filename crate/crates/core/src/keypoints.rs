//! 21-joint hand keypoints and time-indexed trajectories.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const JOINT_COUNT: usize = 21;
pub const WRIST: usize = 0;
pub const MIDDLE_MCP: usize = 9;

/// 21 hand joints in 2D (pixels) or 3D (meters).
///
/// Planar sets store `z = 0`; `dim` decides which coordinates take part in
/// distances.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    joints: Vec<[f64; 3]>,
    dim: usize,
}

impl KeypointSet {
    pub fn planar(joints: &[[f64; 2]]) -> Result<Self> {
        check_count(joints.len())?;
        Ok(KeypointSet {
            joints: joints.iter().map(|&[u, v]| [u, v, 0.0]).collect(),
            dim: 2,
        })
    }

    pub fn spatial(joints: &[[f64; 3]]) -> Result<Self> {
        check_count(joints.len())?;
        Ok(KeypointSet {
            joints: joints.to_vec(),
            dim: 3,
        })
    }

    /// Builds a set from a flat coordinate list of length `21 * dim`.
    pub fn from_flat(values: &[f64], dim: usize) -> Result<Self> {
        match dim {
            2 | 3 if values.len() == JOINT_COUNT * dim => {}
            2 | 3 => {
                return Err(Error::ShapeMismatch(format!(
                    "{} values cannot form {JOINT_COUNT} joints of dimension {dim}",
                    values.len()
                )))
            }
            _ => return Err(Error::param(format!("keypoint dimension must be 2 or 3, got {dim}"))),
        }
        let joints = values
            .chunks_exact(dim)
            .map(|c| [c[0], c[1], if dim == 3 { c[2] } else { 0.0 }])
            .collect();
        Ok(KeypointSet { joints, dim })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn joint(&self, i: usize) -> [f64; 3] {
        self.joints[i]
    }

    pub fn joints(&self) -> &[[f64; 3]] {
        &self.joints
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.joints.iter().flat_map(|j| j[..self.dim].to_vec()).collect()
    }

    /// Applies `f` to every joint, keeping the dimension.
    pub fn map(&self, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> KeypointSet {
        KeypointSet {
            joints: self
                .joints
                .iter()
                .map(|&j| {
                    let mut out = f(j);
                    if self.dim == 2 {
                        out[2] = 0.0;
                    }
                    out
                })
                .collect(),
            dim: self.dim,
        }
    }

    /// Euclidean distance between joint `i` of `self` and of `other`.
    pub fn distance(&self, other: &KeypointSet, i: usize) -> f64 {
        let (a, b) = (self.joints[i], other.joints[i]);
        (0..self.dim).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
    }

    pub fn lerp(&self, other: &KeypointSet, w: f64) -> KeypointSet {
        let joints = self
            .joints
            .iter()
            .zip(&other.joints)
            .map(|(a, b)| [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * w))
            .collect();
        KeypointSet { joints, dim: self.dim }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n != JOINT_COUNT {
        return Err(Error::ShapeMismatch(format!("expected {JOINT_COUNT} joints, got {n}")));
    }
    Ok(())
}

/// Keypoints sampled at strictly increasing timestamps (µs).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<(u64, KeypointSet)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(u64, KeypointSet)>) -> Result<Self> {
        if !samples.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::param("trajectory timestamps must be strictly increasing"));
        }
        if let Some((_, first)) = samples.first() {
            if samples.iter().any(|(_, k)| k.dim() != first.dim()) {
                return Err(Error::ShapeMismatch("mixed keypoint dimensions".into()));
            }
        }
        Ok(Trajectory { samples })
    }

    pub fn samples(&self) -> &[(u64, KeypointSet)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Linearly interpolated pose at `t`, clamped to the sampled range.
    pub fn pose_at(&self, t: u64) -> Option<KeypointSet> {
        let first = self.samples.first()?;
        let last = self.samples.last()?;
        if t <= first.0 {
            return Some(first.1.clone());
        }
        if t >= last.0 {
            return Some(last.1.clone());
        }
        let i = self.samples.partition_point(|(ts, _)| *ts <= t);
        let (t0, a) = &self.samples[i - 1];
        let (t1, b) = &self.samples[i];
        let w = (t - t0) as f64 / (t1 - t0) as f64;
        Some(a.lerp(b, w))
    }

    /// CSV with header `t,j0u,j0v,...` (2D) or `t,j0x,j0y,j0z,...` (3D).
    pub fn to_csv(&self) -> String {
        let dim = self.samples.first().map_or(2, |(_, k)| k.dim());
        let mut out = String::new();
        out.push('t');
        let names: &[&str] = if dim == 2 { &["u", "v"] } else { &["x", "y", "z"] };
        for j in 0..JOINT_COUNT {
            for n in names {
                let _ = write!(out, ",j{j}{n}");
            }
        }
        out.push('\n');
        for (t, k) in &self.samples {
            let _ = write!(out, "{t}");
            for v in k.to_flat() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        let mut dim = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('t') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let this_dim = match cols.len() {
                n if n == 1 + 2 * JOINT_COUNT => 2,
                n if n == 1 + 3 * JOINT_COUNT => 3,
                n => {
                    return Err(Error::MalformedText {
                        line: line_no,
                        reason: format!("expected 43 or 64 columns, got {n}"),
                    })
                }
            };
            if *dim.get_or_insert(this_dim) != this_dim {
                return Err(Error::MalformedText {
                    line: line_no,
                    reason: "keypoint dimension changes mid-file".into(),
                });
            }
            let t: u64 = cols[0].parse().map_err(|_| Error::MalformedText {
                line: line_no,
                reason: format!("bad timestamp {:?}", cols[0]),
            })?;
            let values = cols[1..]
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::MalformedText {
                    line: line_no,
                    reason: "bad coordinate".into(),
                })?;
            samples.push((t, KeypointSet::from_flat(&values, this_dim)?));
        }
        Trajectory::new(samples)
    }
}
