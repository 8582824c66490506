use serde::{Deserialize, Serialize};

use super::pose::{CameraPose, Vec2, EPS};

/// A half-line with a unit direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec2,
    pub dir: Vec2,
}

impl Ray {
    /// Builds a ray, normalizing `dir`. Returns `None` for a zero direction.
    pub fn new(origin: Vec2, dir: Vec2) -> Option<Self> {
        let n = dir.norm();
        if n.is_nan() || n <= EPS || !origin.is_finite() {
            return None;
        }
        Some(Self {
            origin,
            dir: dir * (1.0 / n),
        })
    }

    pub fn from_angle(origin: Vec2, angle: f64) -> Self {
        Self {
            origin,
            dir: Vec2::from_angle(angle),
        }
    }

    pub fn at(&self, t: f64) -> Vec2 {
        self.origin + self.dir * t
    }
}

/// The two boundary rays of a camera's view wedge.
pub fn fov_rays(pose: &CameraPose) -> (Ray, Ray) {
    let o = pose.position();
    (
        Ray::from_angle(o, pose.yaw() + pose.half_fov()),
        Ray::from_angle(o, pose.yaw() - pose.half_fov()),
    )
}

/// A forward crossing of two rays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub point: Vec2,
    pub t_a: f64,
    pub t_b: f64,
    /// Set when the rays are colinear and overlap; `point` is then the
    /// nearest common point (see [`ray_intersect`]).
    pub degenerate: bool,
}

/// Intersects two rays, accepting only crossings in both forward directions.
///
/// Parallel distinct lines and backward crossings give `None`. Colinear
/// overlapping rays are reported as degenerate: for same-direction rays the
/// hit is the leading origin, for rays facing each other it is the midpoint
/// between the two origins. Both choices are symmetric in the arguments.
pub fn ray_intersect(a: &Ray, b: &Ray) -> Option<RayHit> {
    let w = b.origin - a.origin;
    let denom = a.dir.cross(b.dir);
    if denom.abs() < EPS {
        // Parallel: only colinear rays can share points.
        if w.cross(a.dir).abs() >= EPS {
            return None;
        }
        let s = w.dot(a.dir);
        if a.dir.dot(b.dir) > 0.0 {
            return Some(if s >= 0.0 {
                RayHit {
                    point: b.origin,
                    t_a: s,
                    t_b: 0.0,
                    degenerate: true,
                }
            } else {
                RayHit {
                    point: a.origin,
                    t_a: 0.0,
                    t_b: -s,
                    degenerate: true,
                }
            });
        }
        if s < 0.0 {
            return None;
        }
        let half = 0.5 * s;
        return Some(RayHit {
            point: a.at(half),
            t_a: half,
            t_b: half,
            degenerate: true,
        });
    }
    let t_a = w.cross(b.dir) / denom;
    let t_b = w.cross(a.dir) / denom;
    if t_a < -EPS || t_b < -EPS {
        return None;
    }
    let t_a = t_a.max(0.0);
    Some(RayHit {
        point: a.at(t_a),
        t_a,
        t_b: t_b.max(0.0),
        degenerate: false,
    })
}
