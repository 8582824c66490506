//! Four-ray field-of-view overlap test.
//!
//! Each camera contributes its two boundary rays. The rays of the query are
//! crossed with the rays of the candidate; every forward crossing is a point
//! where the two view wedges meet. A camera origin that sits inside the other
//! camera's wedge is also a corner of the shared region (this is the only
//! corner when one camera looks straight past the other, e.g. pure forward
//! motion). These corner points are the *witnesses* of the overlap, and their
//! distance from the query camera decides whether the overlap is usable.

use serde::{Deserialize, Serialize};

use super::pose::{angle_between, CameraPose, Vec2, EPS};
use super::ray::{ray_intersect, Ray};
use super::GeometryError;

/// Which query/candidate boundary-ray combinations are intersected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingMode {
    /// All four combinations (left×left, left×right, right×left, right×right).
    #[default]
    AllPairs,
    /// query.left × cand.right and query.right × cand.left.
    CrossPair,
    /// query.left × cand.left and query.right × cand.right.
    SamePair,
}

/// How witness distances are combined by the distance filter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceRule {
    /// At least one witness within `[d_min, d_max]` of the query camera.
    #[default]
    AnyInRange,
    /// Every witness within `[d_min, d_max]`.
    AllInRange,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlapConfig {
    /// Near cutoff in meters.
    pub d_min: f64,
    /// Far cutoff in meters; also the view-sector radius.
    pub d_max: f64,
    pub pairing: PairingMode,
    /// Count camera origins inside the other wedge as witnesses.
    pub apex_witnesses: bool,
    pub distance_rule: DistanceRule,
    /// Sample count for [`super::sector_oracle`].
    pub oracle_samples: usize,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        Self {
            d_min: 0.25,
            d_max: 20.0,
            pairing: PairingMode::AllPairs,
            apex_witnesses: true,
            distance_rule: DistanceRule::AnyInRange,
            oracle_samples: 2048,
        }
    }
}

impl OverlapConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.d_min.is_finite() && self.d_min >= 0.0) {
            return Err(GeometryError::InvalidConfig {
                field: "d_min",
                reason: format!("must be finite and >= 0, got {}", self.d_min),
            });
        }
        if !(self.d_max.is_finite() && self.d_max > self.d_min) {
            return Err(GeometryError::InvalidConfig {
                field: "d_max",
                reason: format!(
                    "must be finite and > d_min ({}), got {}",
                    self.d_min, self.d_max
                ),
            });
        }
        if self.oracle_samples < 1000 {
            return Err(GeometryError::InvalidConfig {
                field: "oracle_samples",
                reason: format!("must be >= 1000, got {}", self.oracle_samples),
            });
        }
        Ok(())
    }

    /// Largest camera separation at which two view sectors can still meet.
    pub fn max_separation(&self) -> f64 {
        2.0 * self.d_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RaySide {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WitnessKind {
    Crossing {
        query: RaySide,
        candidate: RaySide,
        colinear: bool,
    },
    /// Candidate origin inside the query wedge.
    CandidateApex,
    /// Query origin inside the candidate wedge.
    QueryApex,
    /// Both cameras at the same point with overlapping headings.
    ZeroBaseline,
}

/// A corner of the shared view region and its distance from the query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec2,
    pub distance: f64,
    #[serde(flatten)]
    pub kind: WitnessKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    NoIntersection,
    TooNear,
    TooFar,
    /// Not a rejection: zero-baseline pair accepted without ray crossings.
    DegenerateAccepted,
}

/// Outcome of [`fov_overlap_heuristic`].
///
/// When `overlaps` is true, `intersections` holds the witnesses that passed
/// the distance filter. When it is false, it holds every witness found, so
/// callers can show why each one failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapVerdict {
    pub overlaps: bool,
    pub intersections: Vec<Witness>,
    pub reject_reason: Option<RejectReason>,
}

/// Precomputed boundary rays for one pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseGeometry {
    pub origin: Vec2,
    pub heading: Vec2,
    pub left: Ray,
    pub right: Ray,
    pub yaw: f64,
    pub half_fov: f64,
    cos_half: f64,
    /// Smallest disk holding the view sector of radius `d_max` is centered
    /// `reach` along the heading with radius `reach`, where
    /// `reach = d_max / (2 cos(half_fov))`. Stored per unit `d_max`.
    reach_per_dmax: f64,
}

impl PoseGeometry {
    pub fn new(pose: &CameraPose) -> Self {
        let (left, right) = super::ray::fov_rays(pose);
        Self {
            origin: pose.position(),
            heading: pose.heading(),
            left,
            right,
            yaw: pose.yaw(),
            half_fov: pose.half_fov(),
            cos_half: pose.half_fov().cos(),
            reach_per_dmax: 0.5 / pose.half_fov().cos(),
        }
    }

    fn ray(&self, side: RaySide) -> &Ray {
        match side {
            RaySide::Left => &self.left,
            RaySide::Right => &self.right,
        }
    }

    /// Closed wedge membership, with `EPS` slack on both boundary lines.
    /// The fov is below π, so the wedge is the intersection of the two
    /// half-planes bounded by the rays.
    pub fn wedge_contains(&self, p: Vec2) -> bool {
        let v = p - self.origin;
        if v.norm_sq() < EPS * EPS {
            return true;
        }
        self.right.dir.cross(v) >= -EPS && self.left.dir.cross(v) <= EPS
    }
}

impl From<&CameraPose> for PoseGeometry {
    fn from(p: &CameraPose) -> Self {
        Self::new(p)
    }
}

const ALL_PAIRS: [(RaySide, RaySide); 4] = [
    (RaySide::Left, RaySide::Right),
    (RaySide::Right, RaySide::Left),
    (RaySide::Left, RaySide::Left),
    (RaySide::Right, RaySide::Right),
];

fn pairs(mode: PairingMode) -> &'static [(RaySide, RaySide)] {
    match mode {
        PairingMode::AllPairs => &ALL_PAIRS,
        PairingMode::CrossPair => &ALL_PAIRS[..2],
        PairingMode::SamePair => &ALL_PAIRS[2..],
    }
}

/// Fixed-capacity witness buffer; at most four crossings plus two apexes.
struct Witnesses {
    items: [Witness; 6],
    len: usize,
}

impl Witnesses {
    fn new() -> Self {
        Self {
            items: [Witness {
                point: Vec2::ZERO,
                distance: 0.0,
                kind: WitnessKind::ZeroBaseline,
            }; 6],
            len: 0,
        }
    }

    fn push(&mut self, w: Witness) {
        self.items[self.len] = w;
        self.len += 1;
    }

    fn as_slice(&self) -> &[Witness] {
        &self.items[..self.len]
    }
}

enum Judgement {
    Accept,
    Reject(RejectReason),
    ZeroBaseline(bool),
}

fn evaluate(
    q: &PoseGeometry,
    c: &PoseGeometry,
    cfg: &OverlapConfig,
    out: &mut Witnesses,
) -> Judgement {
    let sep = q.origin.distance(c.origin);
    if sep > cfg.max_separation() {
        return Judgement::Reject(RejectReason::TooFar);
    }
    if sep < EPS {
        let shared = angle_between(q.yaw, c.yaw) < q.half_fov + c.half_fov;
        if shared {
            out.push(Witness {
                point: q.origin,
                distance: cfg.d_min,
                kind: WitnessKind::ZeroBaseline,
            });
        }
        return Judgement::ZeroBaseline(shared);
    }

    for &(qs, cs) in pairs(cfg.pairing) {
        if let Some(hit) = ray_intersect(q.ray(qs), c.ray(cs)) {
            out.push(Witness {
                point: hit.point,
                // The query ray has a unit direction, so its parameter is
                // the distance from the query camera.
                distance: hit.t_a,
                kind: WitnessKind::Crossing {
                    query: qs,
                    candidate: cs,
                    colinear: hit.degenerate,
                },
            });
        }
    }
    if cfg.apex_witnesses {
        if q.wedge_contains(c.origin) {
            out.push(Witness {
                point: c.origin,
                distance: sep,
                kind: WitnessKind::CandidateApex,
            });
        }
        if c.wedge_contains(q.origin) {
            out.push(Witness {
                point: q.origin,
                distance: sep,
                kind: WitnessKind::QueryApex,
            });
        }
    }

    let ws = out.as_slice();
    if ws.is_empty() {
        return Judgement::Reject(RejectReason::NoIntersection);
    }
    let in_range = |d: f64| d >= cfg.d_min && d <= cfg.d_max;
    let accepted = match cfg.distance_rule {
        DistanceRule::AnyInRange => ws.iter().any(|w| in_range(w.distance)),
        DistanceRule::AllInRange => ws.iter().all(|w| in_range(w.distance)),
    };
    if accepted {
        return Judgement::Accept;
    }
    if ws.iter().any(|w| w.distance < cfg.d_min) {
        Judgement::Reject(RejectReason::TooNear)
    } else {
        Judgement::Reject(RejectReason::TooFar)
    }
}

/// The part of a [`PoseGeometry`] needed to rule a candidate out: origin
/// and the two boundary directions. Small enough to keep inline in an index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WedgeKey {
    pub origin: Vec2,
    left: Vec2,
    right: Vec2,
}

impl PoseGeometry {
    pub fn key(&self) -> WedgeKey {
        WedgeKey {
            origin: self.origin,
            left: self.left.dir,
            right: self.right.dir,
        }
    }
}

/// Cheap necessary condition for [`fov_overlap`] under every pairing mode
/// and distance rule, fixed to one query.
///
/// Every in-range witness lies in the query's view sector of radius
/// `d_max` and (within `EPS`) in the candidate's closed wedge. The sector
/// fits in a disk centered `reach` along the heading with radius `reach`,
/// `reach = d_max / (2 cos(half_fov))`, so the candidate's wedge, a convex
/// cone, must meet that disk. A `false` is final; a `true` still needs the
/// full test.
#[derive(Clone, Copy, Debug)]
pub struct QueryFilter {
    origin: Vec2,
    center: Vec2,
    radius: f64,
    gate_sq: f64,
}

impl QueryFilter {
    pub fn new(q: &PoseGeometry, cfg: &OverlapConfig) -> Self {
        let reach = q.reach_per_dmax * cfg.d_max;
        let gate = cfg.max_separation();
        Self {
            origin: q.origin,
            center: q.origin + q.heading * reach,
            // Margin absorbs the tolerances of the witness tests.
            radius: reach * (1.0 + 1e-9) + 1e-6,
            gate_sq: gate * gate * (1.0 + 1e-12),
        }
    }

    /// Center and radius of the disk holding the query's view sector.
    pub fn disk(&self) -> (Vec2, f64) {
        (self.center, self.radius)
    }

    /// Separation gate only.
    pub fn within_gate(&self, c: &WedgeKey) -> bool {
        (c.origin - self.origin).norm_sq() <= self.gate_sq
    }

    pub fn admits(&self, c: &WedgeKey) -> bool {
        let sep_sq = (c.origin - self.origin).norm_sq();
        let v = self.center - c.origin;
        let r = self.radius;
        let (xr, xl) = (c.right.cross(v), c.left.cross(v));
        // Disk holds the apex, center inside the cone, or disk meets a ray.
        let meets = (v.norm_sq() <= r * r)
            | ((xr >= 0.0) & (xl <= 0.0))
            | ((v.dot(c.right) >= 0.0) & (xr.abs() <= r))
            | ((v.dot(c.left) >= 0.0) & (xl.abs() <= r));
        (sep_sq <= self.gate_sq) & (meets | (sep_sq < 4.0 * EPS * EPS))
    }
}

/// [`evaluate`] under [`DistanceRule::AnyInRange`], stopping at the first
/// witness that passes. Cheapest witnesses first.
fn any_witness_in_range(q: &PoseGeometry, c: &PoseGeometry, cfg: &OverlapConfig) -> bool {
    let sep = q.origin.distance(c.origin);
    if sep > cfg.max_separation() {
        return false;
    }
    if sep < EPS {
        return angle_between(q.yaw, c.yaw) < q.half_fov + c.half_fov;
    }
    QueryFilter::new(q, cfg).admits(&c.key()) && witness_in_range(q, c, cfg)
}

/// Crossings first: they decide most accepted pairs, and the apex test
/// needs the separation.
fn witness_in_range(q: &PoseGeometry, c: &PoseGeometry, cfg: &OverlapConfig) -> bool {
    let in_range = |d: f64| d >= cfg.d_min && d <= cfg.d_max;
    // Same arithmetic as `ray_intersect`, sharing the terms common to the
    // pairs: both rays of a pose start at its origin.
    let w = c.origin - q.origin;
    let wx = |r: &Ray| w.cross(r.dir);
    let (wq, wc) = ([wx(&q.left), wx(&q.right)], [wx(&c.left), wx(&c.right)]);
    let idx = |s: RaySide| s as usize;
    let crossing = |qs: RaySide, cs: RaySide| {
        let (a, b) = (q.ray(qs), c.ray(cs));
        let denom = a.dir.cross(b.dir);
        if denom.abs() < EPS {
            return ray_intersect(a, b).is_some_and(|hit| in_range(hit.t_a));
        }
        let t_a = wc[idx(cs)] / denom;
        let t_b = wq[idx(qs)] / denom;
        t_a >= -EPS && t_b >= -EPS && in_range(t_a.max(0.0))
    };
    if pairs(cfg.pairing).iter().any(|&(qs, cs)| crossing(qs, cs)) {
        return true;
    }
    cfg.apex_witnesses
        && in_range(q.origin.distance(c.origin))
        && (q.wedge_contains(c.origin) || c.wedge_contains(q.origin))
}

/// [`fov_overlap`] for a candidate that [`QueryFilter::admits`] already
/// passed; skips the checks the filter has made.
pub fn fov_overlap_admitted(q: &PoseGeometry, c: &PoseGeometry, cfg: &OverlapConfig) -> bool {
    if cfg.distance_rule != DistanceRule::AnyInRange {
        return fov_overlap(q, c, cfg);
    }
    if q.origin.distance(c.origin) < EPS {
        return angle_between(q.yaw, c.yaw) < q.half_fov + c.half_fov;
    }
    witness_in_range(q, c, cfg)
}

/// Boolean form of [`fov_overlap_heuristic`] over precomputed geometry.
/// Allocation-free; used on hot paths.
pub fn fov_overlap(q: &PoseGeometry, c: &PoseGeometry, cfg: &OverlapConfig) -> bool {
    if cfg.distance_rule == DistanceRule::AnyInRange {
        return any_witness_in_range(q, c, cfg);
    }
    let mut ws = Witnesses::new();
    matches!(
        evaluate(q, c, cfg, &mut ws),
        Judgement::Accept | Judgement::ZeroBaseline(true)
    )
}

/// Decides whether the candidate camera's view overlaps the query camera's.
///
/// The distance filter is measured from the query camera only, so the test
/// is not symmetric in its arguments.
pub fn fov_overlap_heuristic(
    query: &CameraPose,
    cand: &CameraPose,
    cfg: &OverlapConfig,
) -> OverlapVerdict {
    verdict_for(&PoseGeometry::new(query), &PoseGeometry::new(cand), cfg)
}

pub fn verdict_for(q: &PoseGeometry, c: &PoseGeometry, cfg: &OverlapConfig) -> OverlapVerdict {
    let mut ws = Witnesses::new();
    let judgement = evaluate(q, c, cfg, &mut ws);
    let all = ws.as_slice();
    match judgement {
        Judgement::ZeroBaseline(true) => OverlapVerdict {
            overlaps: true,
            intersections: all.to_vec(),
            reject_reason: Some(RejectReason::DegenerateAccepted),
        },
        Judgement::ZeroBaseline(false) => OverlapVerdict {
            overlaps: false,
            intersections: Vec::new(),
            reject_reason: Some(RejectReason::NoIntersection),
        },
        Judgement::Accept => OverlapVerdict {
            overlaps: true,
            intersections: all
                .iter()
                .filter(|w| w.distance >= cfg.d_min && w.distance <= cfg.d_max)
                .copied()
                .collect(),
            reject_reason: None,
        },
        Judgement::Reject(reason) => OverlapVerdict {
            overlaps: false,
            intersections: all.to_vec(),
            reject_reason: Some(reason),
        },
    }
}
