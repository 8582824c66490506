//! Camera trajectories: seeded B-spline roams that respect per-segment motion
//! limits, scripted evaluation paths, and a JSONL file format.

mod io;
mod spline;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_between, default_fov, Bounds, CameraPose, GeometryError, Vec2};
use crate::rng::keyed_rng;

pub use io::TrajectoryHeader;
pub use spline::CubicBSpline;

/// Frames per second of every trajectory.
pub const FPS: u32 = 30;
/// Frames per generated video segment.
pub const SEGMENT_LEN: usize = 77;
/// Frame count of a full-length training video.
pub const FULL_SCALE_FRAMES: usize = 7601;
/// Default frame count used for desk-scale runs.
pub const DESK_SCALE_FRAMES: usize = 1001;
/// Camera height above the ground plane; poses are planar, this is metadata.
pub const CAMERA_HEIGHT_M: f64 = 1.7;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("invalid roam spec: {0}")]
    InvalidSpec(String),
    #[error("no trajectory satisfying the motion limits after {attempts} attempts")]
    ConstraintUnsatisfiable { attempts: usize },
    #[error("time indices must start at 0 and strictly increase (frame {index})")]
    NonMonotonicTime { index: usize },
    #[error("frame count {0} must be even and at least 2")]
    InvalidFrameCount(usize),
    #[error("spline of length {length:.3} m is shorter than the requested {needed:.3} m")]
    SplineTooShort { length: f64, needed: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    /// Frame count at [`FPS`].
    pub t: u64,
    pub pose: CameraPose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    frames: Vec<TrajectoryFrame>,
    segment_len: usize,
    seed: Option<u64>,
}

impl Trajectory {
    pub fn new(
        frames: Vec<TrajectoryFrame>,
        segment_len: usize,
        seed: Option<u64>,
    ) -> Result<Self, TrajectoryError> {
        for (i, f) in frames.iter().enumerate() {
            let ok = if i == 0 {
                f.t == 0
            } else {
                f.t > frames[i - 1].t
            };
            if !ok {
                return Err(TrajectoryError::NonMonotonicTime { index: i });
            }
        }
        if segment_len == 0 {
            return Err(TrajectoryError::InvalidSpec(
                "segment_len must be positive".into(),
            ));
        }
        Ok(Self {
            frames,
            segment_len,
            seed,
        })
    }

    /// One frame per time step, `t = 0, 1, 2, ...`.
    pub fn from_poses(poses: impl IntoIterator<Item = CameraPose>, seed: Option<u64>) -> Self {
        let frames = poses
            .into_iter()
            .enumerate()
            .map(|(i, pose)| TrajectoryFrame { t: i as u64, pose })
            .collect();
        Self {
            frames,
            segment_len: SEGMENT_LEN,
            seed,
        }
    }

    pub fn frames(&self) -> &[TrajectoryFrame] {
        &self.frames
    }

    pub fn poses(&self) -> impl Iterator<Item = &CameraPose> + '_ {
        self.frames.iter().map(|f| &f.pose)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn fps(&self) -> u32 {
        FPS
    }

    /// Appends `other`, shifting its time indices to continue after ours.
    pub fn concat(mut self, other: &Trajectory) -> Self {
        let base = self.frames.last().map_or(0, |f| f.t + 1);
        self.frames
            .extend(other.frames.iter().map(|f| TrajectoryFrame {
                t: base + f.t,
                pose: f.pose,
            }));
        self
    }
}

/// Per-segment motion limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintLimits {
    pub min_displacement: f64,
    pub max_displacement: f64,
    /// Limit on |yaw_end − yaw_start| within a segment, radians (exclusive).
    pub max_net_yaw: f64,
    /// Limit on the summed frame-to-frame yaw change, radians (exclusive).
    pub max_cumulative_yaw: f64,
}

impl Default for ConstraintLimits {
    fn default() -> Self {
        Self {
            min_displacement: 3.0,
            max_displacement: 6.0,
            max_net_yaw: 60f64.to_radians(),
            max_cumulative_yaw: 90f64.to_radians(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentCheck {
    pub index: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    /// Straight-line distance between the first and last frame of the segment.
    pub displacement: f64,
    pub net_yaw_change: f64,
    pub cumulative_yaw_change: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub segments: Vec<SegmentCheck>,
    pub pass: bool,
}

/// Checks every complete, non-overlapping segment; a trailing partial
/// segment is not reported. Passes only if at least one segment exists and
/// all pass.
pub fn check_constraints(traj: &Trajectory, limits: &ConstraintLimits) -> ConstraintReport {
    let seg = traj.segment_len();
    let frames = traj.frames();
    let segments: Vec<SegmentCheck> = (0..frames.len() / seg)
        .map(|k| {
            let window = &frames[k * seg..(k + 1) * seg];
            let first = window[0].pose;
            let last = window[seg - 1].pose;
            let displacement = first.position().distance(last.position());
            let net = angle_between(last.yaw(), first.yaw());
            let cumulative: f64 = window
                .windows(2)
                .map(|w| angle_between(w[1].pose.yaw(), w[0].pose.yaw()))
                .sum();
            let pass = displacement >= limits.min_displacement
                && displacement <= limits.max_displacement
                && net < limits.max_net_yaw
                && cumulative < limits.max_cumulative_yaw;
            SegmentCheck {
                index: k,
                start_frame: k * seg,
                end_frame: (k + 1) * seg - 1,
                displacement,
                net_yaw_change: net,
                cumulative_yaw_change: cumulative,
                pass,
            }
        })
        .collect();
    let pass = !segments.is_empty() && segments.iter().all(|s| s.pass);
    ConstraintReport { segments, pass }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoamSpec {
    pub num_frames: usize,
    pub bounds: Bounds,
    pub num_control_points: usize,
    pub seed: u64,
    #[serde(default = "default_fov")]
    pub fov: f64,
    #[serde(default = "default_segment_len")]
    pub segment_len: usize,
    #[serde(default)]
    pub limits: ConstraintLimits,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
}

fn default_segment_len() -> usize {
    SEGMENT_LEN
}

fn default_max_attempts() -> usize {
    200
}

impl RoamSpec {
    pub fn new(num_frames: usize, bounds: Bounds, num_control_points: usize, seed: u64) -> Self {
        Self {
            num_frames,
            bounds,
            num_control_points,
            seed,
            fov: default_fov(),
            segment_len: SEGMENT_LEN,
            limits: ConstraintLimits::default(),
            max_attempts: default_max_attempts(),
        }
    }

    /// Desk-scale default: 1001 frames.
    pub fn desk(bounds: Bounds, num_control_points: usize, seed: u64) -> Self {
        Self::new(DESK_SCALE_FRAMES, bounds, num_control_points, seed)
    }

    /// Full-scale 7,601-frame roam.
    pub fn full_scale(bounds: Bounds, num_control_points: usize, seed: u64) -> Self {
        Self::new(FULL_SCALE_FRAMES, bounds, num_control_points, seed)
    }

    fn validate(&self) -> Result<(), TrajectoryError> {
        if self.segment_len < 2 {
            return Err(TrajectoryError::InvalidSpec(
                "segment_len must be at least 2".into(),
            ));
        }
        if self.num_frames < self.segment_len {
            return Err(TrajectoryError::InvalidSpec(format!(
                "num_frames {} is shorter than one segment ({})",
                self.num_frames, self.segment_len
            )));
        }
        if self.num_control_points < 4 {
            return Err(TrajectoryError::InvalidSpec(
                "need at least 4 control points".into(),
            ));
        }
        self.bounds.validate()?;
        let l = &self.limits;
        if !(l.min_displacement >= 0.0 && l.max_displacement > l.min_displacement) {
            return Err(TrajectoryError::InvalidSpec(
                "displacement limits out of order".into(),
            ));
        }
        // Validates the fov.
        CameraPose::new(0.0, 0.0, 0.0, self.fov)?;
        Ok(())
    }
}

/// Frame poses along a B-spline at constant speed, yaw following the
/// smoothed tangent heading.
pub fn poses_along_spline(
    control_points: Vec<Vec2>,
    num_frames: usize,
    step: f64,
    fov: f64,
) -> Result<Vec<CameraPose>, TrajectoryError> {
    let spline = CubicBSpline::new(control_points)
        .ok_or_else(|| TrajectoryError::InvalidSpec("need at least 4 control points".into()))?;
    let needed = step * num_frames.saturating_sub(1) as f64;
    if spline.length() + 1e-9 < needed {
        return Err(TrajectoryError::SplineTooShort {
            length: spline.length(),
            needed,
        });
    }
    let params: Vec<f64> = (0..num_frames)
        .map(|i| spline.param_at_length(step * i as f64))
        .collect();
    let headings: Vec<Vec2> = params
        .iter()
        .map(|&u| {
            let t = spline.tangent(u);
            let n = t.norm();
            if n > 1e-12 {
                t * (1.0 / n)
            } else {
                Vec2::new(1.0, 0.0)
            }
        })
        .collect();
    let smoothed = smooth_headings(&headings, YAW_SMOOTHING_WINDOW);
    params
        .iter()
        .zip(smoothed)
        .map(|(&u, yaw)| {
            let p = spline.point(u);
            CameraPose::new(p.x, p.y, yaw, fov).map_err(Into::into)
        })
        .collect()
}

/// Window (frames) of the centered moving average applied to headings.
pub const YAW_SMOOTHING_WINDOW: usize = 15;

fn smooth_headings(h: &[Vec2], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..h.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(h.len());
            let sum = h[lo..hi].iter().fold(Vec2::ZERO, |acc, v| acc + *v);
            if sum.norm() > 1e-12 {
                sum.angle()
            } else {
                h[i].angle()
            }
        })
        .collect()
}

/// Seeded random-walk control points inside `bounds`. Returns `None` if the
/// walk cannot stay inside.
fn sample_control_points<R: Rng>(rng: &mut R, spec: &RoamSpec, spacing: f64) -> Option<Vec<Vec2>> {
    let margin = (0.05 * spec.bounds.width().min(spec.bounds.height())).min(2.0);
    let inner = spec.bounds.inset(margin)?;
    let max_turn = 50f64.to_radians();
    let start = Vec2::new(
        rng.random_range(inner.min.x..=inner.max.x),
        rng.random_range(inner.min.y..=inner.max.y),
    );
    let mut heading = rng.random_range(-PI..PI);
    let mut pts = vec![start];
    while pts.len() < spec.num_control_points {
        let last = *pts.last().expect("non-empty");
        let mut placed = false;
        for _ in 0..32 {
            let h = heading + rng.random_range(-max_turn..=max_turn);
            let p = last + Vec2::from_angle(h) * spacing;
            if inner.contains(p) {
                heading = h;
                pts.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            // Turn back toward the middle and try once more.
            let h = (inner.center() - last).angle();
            let p = last + Vec2::from_angle(h) * spacing;
            if !inner.contains(p) || angle_between(h, heading) > 2.0 * max_turn {
                return None;
            }
            heading = h;
            pts.push(p);
        }
    }
    Some(pts)
}

/// Generates a roaming trajectory under the per-segment motion limits.
///
/// Control points come from a seeded random walk inside `spec.bounds`; the
/// cubic B-spline through them is walked at constant speed so that each
/// segment covers 4–5 m of path, and yaw follows the smoothed tangent.
/// Attempts that break a limit are discarded and resampled.
pub fn generate_roam(spec: &RoamSpec) -> Result<Trajectory, TrajectoryError> {
    spec.validate()?;
    let steps_per_segment = (spec.segment_len - 1) as f64;
    let lo = spec.limits.min_displacement;
    let hi = spec.limits.max_displacement;
    for attempt in 0..spec.max_attempts {
        let mut rng = keyed_rng(spec.seed, attempt as u64);
        // Path length per segment, kept away from both limits.
        let seg_path = rng.random_range((lo + 0.3 * (hi - lo))..=(lo + 0.6 * (hi - lo)));
        let step = seg_path / steps_per_segment;
        let needed = step * (spec.num_frames - 1) as f64;
        let spacing = 1.25 * needed / (spec.num_control_points - 3) as f64;
        let Some(points) = sample_control_points(&mut rng, spec, spacing) else {
            continue;
        };
        let poses = match poses_along_spline(points, spec.num_frames, step, spec.fov) {
            Ok(p) => p,
            Err(TrajectoryError::SplineTooShort { .. }) => continue,
            Err(e) => return Err(e),
        };
        let traj = Trajectory {
            frames: poses
                .into_iter()
                .enumerate()
                .map(|(i, pose)| TrajectoryFrame { t: i as u64, pose })
                .collect(),
            segment_len: spec.segment_len,
            seed: Some(spec.seed),
        };
        if check_constraints(&traj, &spec.limits).pass
            && traj.poses().all(|p| spec.bounds.contains(p.position()))
        {
            return Ok(traj);
        }
    }
    Err(TrajectoryError::ConstraintUnsatisfiable {
        attempts: spec.max_attempts,
    })
}

/// In-place rotation by `degrees` and back.
///
/// Frames `0..=n/2` sweep yaw linearly up to `start.yaw + degrees`; the rest
/// sweep back, and the last frame is exactly `start`.
pub fn rotate_and_return(
    start: CameraPose,
    degrees: f64,
    num_frames: usize,
) -> Result<Trajectory, TrajectoryError> {
    if num_frames < 2 || !num_frames.is_multiple_of(2) {
        return Err(TrajectoryError::InvalidFrameCount(num_frames));
    }
    let total = degrees.to_radians();
    let half = num_frames / 2;
    let last = num_frames - 1;
    let poses = (0..num_frames).map(|i| {
        if i == last {
            return start;
        }
        let frac = if i <= half {
            i as f64 / half as f64
        } else {
            (last - i) as f64 / (last - half) as f64
        };
        start
            .with_yaw(start.yaw() + total * frac)
            .expect("rotation keeps pose valid")
    });
    Ok(Trajectory::from_poses(poses, None))
}

/// Constant-speed circuit around a circle, facing along the direction of
/// travel. With `laps > 1` every place is revisited.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub center: Vec2,
    pub radius: f64,
    pub laps: f64,
    /// Path length covered by one segment, meters.
    pub segment_path: f64,
    pub fov: f64,
    /// Starting angle on the circle, radians.
    pub phase: f64,
}

impl Default for LoopSpec {
    fn default() -> Self {
        Self {
            center: Vec2::ZERO,
            radius: 12.0,
            laps: 2.0,
            segment_path: 4.5,
            fov: default_fov(),
            phase: 0.0,
        }
    }
}

pub fn loop_roam(spec: &LoopSpec) -> Result<Trajectory, TrajectoryError> {
    if !(spec.radius > 0.0 && spec.laps > 0.0 && spec.segment_path > 0.0) {
        return Err(TrajectoryError::InvalidSpec(
            "loop radius, laps and segment_path must be positive".into(),
        ));
    }
    let step = spec.segment_path / (SEGMENT_LEN - 1) as f64;
    let total = 2.0 * PI * spec.radius * spec.laps;
    let frames = (total / step).floor() as usize + 1;
    let poses = (0..frames)
        .map(|i| {
            let a = spec.phase + step * i as f64 / spec.radius;
            let p = spec.center + Vec2::from_angle(a) * spec.radius;
            CameraPose::new(p.x, p.y, a + PI / 2.0, spec.fov)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory::from_poses(poses, None))
}
