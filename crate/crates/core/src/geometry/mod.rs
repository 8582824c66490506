//! Planar camera geometry: poses, boundary rays, the four-ray overlap
//! heuristic, and a sampled sector oracle.

mod bounds;
mod oracle;
mod overlap;
mod pose;
mod ray;

pub use bounds::Bounds;
pub use oracle::{sector_oracle, sector_overlap_fraction};
pub use overlap::{
    fov_overlap, fov_overlap_admitted, fov_overlap_heuristic, verdict_for, DistanceRule,
    OverlapConfig, OverlapVerdict, PairingMode, PoseGeometry, QueryFilter, RaySide, RejectReason,
    WedgeKey, Witness, WitnessKind,
};
pub use pose::{
    angle_between, default_fov, normalize_yaw, CameraPose, RigidMotion, Vec2, DEFAULT_FOV_DEG, EPS,
};
pub use ray::{fov_rays, ray_intersect, Ray, RayHit};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("fov must be in (0, π) radians, got {fov}")]
    InvalidFov { fov: f64 },
    #[error("{field} must be finite")]
    NonFinite { field: &'static str },
    #[error("invalid overlap config: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

impl GeometryError {
    /// Name of the offending field, for field-level diagnostics.
    pub fn field(&self) -> &'static str {
        match self {
            GeometryError::InvalidFov { .. } => "fov",
            GeometryError::NonFinite { field } => field,
            GeometryError::InvalidConfig { field, .. } => field,
        }
    }
}
