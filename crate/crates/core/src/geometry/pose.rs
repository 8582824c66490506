use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Horizontal field of view of the reference camera rig, in degrees.
pub const DEFAULT_FOV_DEG: f64 = 52.67;

/// Tolerance used for parallelism and degeneracy tests.
pub const EPS: f64 = 1e-9;

/// A 2D vector, used both for points and directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (−π, π].
///
/// Angles already in range are returned unchanged, bit for bit.
pub fn normalize_yaw(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Absolute angular difference in [0, π].
pub fn angle_between(a: f64, b: f64) -> f64 {
    normalize_yaw(a - b).abs()
}

/// Default field of view in radians.
pub fn default_fov() -> f64 {
    DEFAULT_FOV_DEG.to_radians()
}

/// A planar camera: position on the ground plane, yaw about the vertical
/// axis, and a full horizontal field-of-view angle.
///
/// Construction validates the fov and normalizes yaw into (−π, π].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose", into = "RawPose")]
pub struct CameraPose {
    x: f64,
    y: f64,
    yaw: f64,
    fov: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct RawPose {
    x: f64,
    y: f64,
    yaw: f64,
    fov: f64,
}

impl TryFrom<RawPose> for CameraPose {
    type Error = GeometryError;
    fn try_from(r: RawPose) -> Result<Self, Self::Error> {
        CameraPose::new(r.x, r.y, r.yaw, r.fov)
    }
}

impl From<CameraPose> for RawPose {
    fn from(p: CameraPose) -> Self {
        RawPose {
            x: p.x,
            y: p.y,
            yaw: p.yaw,
            fov: p.fov,
        }
    }
}

impl CameraPose {
    pub fn new(x: f64, y: f64, yaw: f64, fov: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() {
            return Err(GeometryError::NonFinite { field: "x" });
        }
        if !y.is_finite() {
            return Err(GeometryError::NonFinite { field: "y" });
        }
        if !yaw.is_finite() {
            return Err(GeometryError::NonFinite { field: "yaw" });
        }
        if !(fov.is_finite() && fov > 0.0 && fov < PI) {
            return Err(GeometryError::InvalidFov { fov });
        }
        Ok(Self {
            x,
            y,
            yaw: normalize_yaw(yaw),
            fov,
        })
    }

    /// Pose with the default 52.67° field of view.
    ///
    /// Panics if a coordinate is not finite.
    pub fn at(x: f64, y: f64, yaw: f64) -> Self {
        Self::new(x, y, yaw, default_fov()).expect("finite pose coordinates")
    }

    /// Like [`CameraPose::at`] with yaw given in degrees.
    pub fn at_deg(x: f64, y: f64, yaw_deg: f64) -> Self {
        Self::at(x, y, yaw_deg.to_radians())
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn half_fov(&self) -> f64 {
        self.fov * 0.5
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_angle(self.yaw)
    }

    pub fn with_position(&self, x: f64, y: f64) -> Result<Self, GeometryError> {
        Self::new(x, y, self.yaw, self.fov)
    }

    pub fn with_yaw(&self, yaw: f64) -> Result<Self, GeometryError> {
        Self::new(self.x, self.y, yaw, self.fov)
    }

    /// Moves `forward` meters along the heading, `left` meters to the left of
    /// it, then turns by `dyaw`.
    pub fn advanced(&self, forward: f64, left: f64, dyaw: f64) -> Result<Self, GeometryError> {
        let h = self.heading();
        let l = Vec2::new(-h.y, h.x);
        let p = self.position() + h * forward + l * left;
        Self::new(p.x, p.y, self.yaw + dyaw, self.fov)
    }

    /// True if `p` lies inside the infinite view wedge (apex included).
    pub fn wedge_contains(&self, p: Vec2) -> bool {
        let v = p - self.position();
        let n = v.norm();
        if n < EPS {
            return true;
        }
        v.dot(self.heading()) >= n * self.half_fov().cos() - EPS * n
    }

    /// True if `p` lies inside the view sector of the given radius.
    pub fn sector_contains(&self, p: Vec2, radius: f64) -> bool {
        let v = p - self.position();
        v.norm_sq() <= radius * radius && self.wedge_contains(p)
    }

    /// Outline of the view sector: apex followed by `arc_points` points
    /// along the arc from the left edge to the right edge.
    pub fn fan_polygon(&self, radius: f64, arc_points: usize) -> Vec<Vec2> {
        let n = arc_points.max(2);
        let mut pts = Vec::with_capacity(n + 1);
        pts.push(self.position());
        for i in 0..n {
            let a = self.yaw + self.half_fov() - self.fov * i as f64 / (n - 1) as f64;
            pts.push(self.position() + Vec2::from_angle(a) * radius);
        }
        pts
    }
}

/// A planar rigid motion: rotate about the origin, then translate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidMotion {
    pub rotation: f64,
    pub translation: Vec2,
}

impl RigidMotion {
    pub fn apply_point(&self, p: Vec2) -> Vec2 {
        p.rotated(self.rotation) + self.translation
    }

    pub fn apply_pose(&self, pose: &CameraPose) -> CameraPose {
        let p = self.apply_point(pose.position());
        CameraPose::new(p.x, p.y, pose.yaw() + self.rotation, pose.fov())
            .expect("rigid motion preserves validity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaw_normalization_range() {
        assert_eq!(normalize_yaw(PI), PI);
        assert_eq!(normalize_yaw(-PI), PI);
        assert!((normalize_yaw(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_yaw(225f64.to_radians()) - (-135f64).to_radians()).abs() < 1e-12);
        assert_eq!(normalize_yaw(0.0), 0.0);
    }

    #[test]
    fn fov_validation() {
        assert!(matches!(
            CameraPose::new(0.0, 0.0, 0.0, 0.0),
            Err(GeometryError::InvalidFov { .. })
        ));
        assert!(CameraPose::new(0.0, 0.0, 0.0, PI).is_err());
        assert!(CameraPose::new(f64::NAN, 0.0, 0.0, 1.0).is_err());
        let p = CameraPose::new(1.0, 2.0, 4.0 * PI + 0.5, 1.0).unwrap();
        assert!((p.yaw() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn default_fov_is_reference_rig() {
        let p = CameraPose::at(0.0, 0.0, 0.0);
        assert!((p.fov().to_degrees() - 52.67).abs() < 1e-12);
    }

    #[test]
    fn deserialize_rejects_bad_fov() {
        let bad = r#"{"x":0.0,"y":0.0,"yaw":0.0,"fov":0.0}"#;
        assert!(serde_json::from_str::<CameraPose>(bad).is_err());
        let ok = r#"{"x":0.0,"y":0.0,"yaw":7.0,"fov":1.0}"#;
        let p: CameraPose = serde_json::from_str(ok).unwrap();
        assert!(p.yaw() <= PI && p.yaw() > -PI);
    }

    #[test]
    fn wedge_membership() {
        let p = CameraPose::at(0.0, 0.0, 0.0);
        assert!(p.wedge_contains(Vec2::new(5.0, 0.0)));
        assert!(!p.wedge_contains(Vec2::new(0.0, 5.0)));
        assert!(!p.wedge_contains(Vec2::new(-5.0, 0.0)));
        assert!(p.sector_contains(Vec2::new(5.0, 1.0), 20.0));
        assert!(!p.sector_contains(Vec2::new(25.0, 0.0), 20.0));
    }
}
