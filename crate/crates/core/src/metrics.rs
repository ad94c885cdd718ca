//! Palm-normalized keypoint metrics, camera transforms and the
//! teacher-student distillation loss.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{transform_keypoints, AugmentSpec};
use crate::error::{Error, Result};
use crate::event::SensorGeometry;
use crate::keypoints::{KeypointSet, JOINT_COUNT, MIDDLE_MCP, WRIST};

/// Wrist to middle-finger MCP distance, in the set's native units.
pub fn palm_length(gt: &KeypointSet) -> Result<f64> {
    let d = gt.distance(&gt.map(|_| gt.joint(MIDDLE_MCP)), WRIST);
    if d == 0.0 {
        return Err(Error::DegeneratePalm);
    }
    Ok(d)
}

fn check_same_dim(a: &KeypointSet, b: &KeypointSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cannot compare {}D with {}D keypoints",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Fraction of per-joint errors within `tau * palm` (inclusive).
pub fn pck_from_errors(errors: &[f64], palm: f64, tau: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    let limit = tau * palm;
    errors.iter().filter(|&&e| e <= limit).count() as f64 / errors.len() as f64
}

fn joint_errors(pred: &KeypointSet, gt: &KeypointSet) -> Vec<f64> {
    (0..JOINT_COUNT).map(|j| pred.distance(gt, j)).collect()
}

/// Palm-normalized percentage of correct keypoints at threshold `tau`.
pub fn pckp(pred: &KeypointSet, gt: &KeypointSet, tau: f64) -> Result<f64> {
    check_same_dim(pred, gt)?;
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::param(format!("threshold must be non-negative, got {tau}")));
    }
    Ok(pck_from_errors(&joint_errors(pred, gt), palm_length(gt)?, tau))
}

/// Ascending thresholds in palm-length units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    thresholds: Vec<f64>,
    label: String,
}

impl Sweep {
    /// `lo:step:hi`, inclusive of both ends.
    pub fn range(lo: f64, step: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || lo < 0.0 || hi <= lo || hi > 1.0 {
            return Err(Error::param(format!(
                "sweep {lo}:{step}:{hi} must satisfy 0 <= lo < hi <= 1 and step > 0"
            )));
        }
        let intervals = ((hi - lo) / step).round() as usize;
        if intervals == 0 {
            return Err(Error::param("sweep needs at least two thresholds"));
        }
        let thresholds = (0..=intervals)
            .map(|i| lo + (hi - lo) * i as f64 / intervals as f64)
            .collect();
        Ok(Sweep {
            thresholds,
            label: format!("{lo}:{step}:{hi}"),
        })
    }

    pub fn from_thresholds(thresholds: Vec<f64>) -> Result<Self> {
        let ok = thresholds.len() >= 2
            && thresholds.windows(2).all(|w| w[0] < w[1])
            && thresholds.iter().all(|&t| (0.0..=1.0).contains(&t));
        if !ok {
            return Err(Error::param(
                "sweep must hold at least two ascending thresholds in [0, 1]",
            ));
        }
        let label = format!("{} thresholds", thresholds.len());
        Ok(Sweep { thresholds, label })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep::range(0.0, 0.01, 1.0).unwrap()
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let nums: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
        match nums.as_deref() {
            Some(&[lo, step, hi]) => Sweep::range(lo, step, hi),
            _ => Err(Error::param(format!("expected lo:step:hi, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PckCurve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl PckCurve {
    /// Trapezoid area divided by the threshold span.
    pub fn area(&self) -> f64 {
        let t = &self.thresholds;
        let v = &self.values;
        let area: f64 = (1..t.len()).map(|i| (t[i] - t[i - 1]) * (v[i] + v[i - 1]) / 2.0).sum();
        area / (t[t.len() - 1] - t[0])
    }
}

/// Mean PCKp over aligned frames at every threshold of `sweep`.
///
/// PCKp is pooled over the joints of each frame, then averaged over frames.
pub fn pck_curve(preds: &[KeypointSet], gts: &[KeypointSet], sweep: &Sweep) -> Result<PckCurve> {
    if preds.is_empty() {
        return Err(Error::param("no frames to evaluate"));
    }
    if preds.len() != gts.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    let per_frame: Vec<(Vec<f64>, f64)> = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| {
            check_same_dim(p, g)?;
            Ok((joint_errors(p, g), palm_length(g)?))
        })
        .collect::<Result<_>>()?;
    let values = sweep
        .thresholds()
        .iter()
        .map(|&tau| {
            per_frame
                .iter()
                .map(|(errs, palm)| pck_from_errors(errs, *palm, tau))
                .sum::<f64>()
                / per_frame.len() as f64
        })
        .collect();
    Ok(PckCurve {
        thresholds: sweep.thresholds().to_vec(),
        values,
    })
}

/// Area under the mean PCKp curve, normalized to `[0, 1]`.
pub fn aucp(preds: &[KeypointSet], gts: &[KeypointSet], sweep: &Sweep) -> Result<f64> {
    Ok(pck_curve(preds, gts, sweep)?.area())
}

/// Plain-text evaluation report: header, sweep, per-threshold table, AUCp.
pub fn eval_report(curve: &PckCurve, sweep: &Sweep, frames: usize, dim: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# keypoint evaluation report");
    let _ = writeln!(out, "pooling = \"mean over joints per frame, then mean over frames\"");
    let _ = writeln!(out, "correct_if = \"error <= tau * palm_length\"");
    let _ = writeln!(out, "sweep = \"{}\"", sweep.label());
    let _ = writeln!(out, "frames = {frames}");
    let _ = writeln!(out, "dimension = {dim}");
    let _ = writeln!(out, "aucp = {:.6}", curve.area());
    let _ = writeln!(out);
    let _ = writeln!(out, "[pckp]");
    let _ = writeln!(out, "threshold,pckp");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        let _ = writeln!(out, "{t:.4},{v:.6}");
    }
    out
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Rigid extrinsics plus pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraTransform {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    intrinsics: Intrinsics,
}

impl CameraTransform {
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3], intrinsics: Intrinsics) -> Result<Self> {
        let r = rotation;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > 1e-9 {
                    return Err(Error::param("rotation is not orthonormal"));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("rotation determinant is {det}, expected +1")));
        }
        Ok(CameraTransform {
            rotation,
            translation,
            intrinsics,
        })
    }

    pub fn identity(intrinsics: Intrinsics) -> Self {
        CameraTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
            intrinsics,
        }
    }

    pub fn intrinsics(&self) -> Intrinsics {
        self.intrinsics
    }

    /// `R * p + t`.
    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + self.translation[i])
    }
}

/// Moves 3D points into the event-camera frame and projects them.
///
/// Returns the camera-frame 3D set and its pinhole projection.
pub fn apply_camera(points: &KeypointSet, cam: &CameraTransform) -> Result<(KeypointSet, KeypointSet)> {
    if points.dim() != 3 {
        return Err(Error::ShapeMismatch("camera transform needs 3D keypoints".into()));
    }
    let moved = points.map(|p| cam.to_camera(p));
    let k = cam.intrinsics;
    let mut projected = Vec::with_capacity(JOINT_COUNT);
    for (joint, p) in moved.joints().iter().enumerate() {
        if p[2] <= 0.0 {
            return Err(Error::NonPositiveDepth { joint, depth: p[2] });
        }
        projected.push([k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy]);
    }
    Ok((moved, KeypointSet::planar(&projected)?))
}

/// Rotates 3D camera-frame points about the optical axis by the in-plane
/// rotation of `spec`, matching the image-plane view transform.
fn rotate_about_optical_axis(points: &KeypointSet, spec: &AugmentSpec) -> KeypointSet {
    let deg = 90.0 * spec.rotation_quarters as f64 + spec.fine_rotation_deg;
    let quarter_exact = spec.fine_rotation_deg == 0.0;
    points.map(|[x, y, z]| {
        if quarter_exact {
            let (mut x, mut y) = (x, y);
            for _ in 0..spec.rotation_quarters {
                (x, y) = (-y, x);
            }
            [x, y, z]
        } else {
            let (s, c) = deg.to_radians().sin_cos();
            [x * c - y * s, x * s + y * c, z]
        }
    })
}

/// Mean per-joint distance between the student output and the teacher's 3D
/// keypoints after the camera transform and the augmentation label map.
///
/// A 2D student is compared against the projected, view-transformed teacher
/// (pixel coordinates of a `frame` sized input). A 3D student is compared in
/// camera space, with the augmentation's in-plane rotation applied about the
/// optical axis.
pub fn distill_loss(
    student: &KeypointSet,
    teacher3d: &KeypointSet,
    cam: &CameraTransform,
    label_transform: &AugmentSpec,
    frame: SensorGeometry,
) -> Result<f64> {
    let (cam3d, projected) = apply_camera(teacher3d, cam)?;
    let target = match student.dim() {
        2 => transform_keypoints(&projected, frame, label_transform)?,
        _ => rotate_about_optical_axis(&cam3d, label_transform),
    };
    Ok(mean_joint_distance(student, &target))
}

pub fn mean_joint_distance(a: &KeypointSet, b: &KeypointSet) -> f64 {
    (0..JOINT_COUNT).map(|j| a.distance(b, j)).sum::<f64>() / JOINT_COUNT as f64
}
