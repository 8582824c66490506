//! Reference computations shared by the integration tests. Nothing here
//! calls into the fast paths under test.

#![allow(dead_code)]

use std::f64::consts::PI;

use context_memory::geometry::{fov_overlap_heuristic, CameraPose, OverlapConfig, RejectReason};

/// Point-in-sector by angle and radius, straight from the definition.
pub fn in_sector(pose: &CameraPose, x: f64, y: f64, radius: f64) -> bool {
    let (dx, dy) = (x - pose.x(), y - pose.y());
    let r = dx.hypot(dy);
    if r > radius {
        return false;
    }
    if r == 0.0 {
        return true;
    }
    let mut d = dy.atan2(dx) - pose.yaw();
    while d > PI {
        d -= 2.0 * PI;
    }
    while d < -PI {
        d += 2.0 * PI;
    }
    d.abs() <= pose.fov() / 2.0
}

/// Share of `a`'s sector covered by `b`'s, on a polar grid of
/// `n_r × n_theta` equal-area cells.
pub fn overlap_fraction(
    a: &CameraPose,
    b: &CameraPose,
    radius: f64,
    n_r: usize,
    n_theta: usize,
) -> f64 {
    let mut hits = 0usize;
    for i in 0..n_r {
        let r = radius * ((i as f64 + 0.5) / n_r as f64).sqrt();
        for j in 0..n_theta {
            let t = a.yaw() - a.fov() / 2.0 + a.fov() * (j as f64 + 0.5) / n_theta as f64;
            if in_sector(b, a.x() + r * t.cos(), a.y() + r * t.sin(), radius) {
                hits += 1;
            }
        }
    }
    hits as f64 / (n_r * n_theta) as f64
}

/// All-pairs edges through the verdict path: `edges[i]` holds every `j < i`
/// that frame `i` overlaps as the query.
pub fn brute_edges(poses: &[CameraPose], cfg: &OverlapConfig) -> Vec<Vec<u32>> {
    (0..poses.len())
        .map(|i| {
            (0..i)
                .filter(|&j| fov_overlap_heuristic(&poses[i], &poses[j], cfg).overlaps)
                .map(|j| j as u32)
                .collect()
        })
        .collect()
}

pub fn brute_query(poses: &[CameraPose], target: &CameraPose, cfg: &OverlapConfig) -> Vec<u32> {
    (0..poses.len() as u32)
        .filter(|&j| fov_overlap_heuristic(target, &poses[j as usize], cfg).overlaps)
        .collect()
}

/// What a hand-built pair is expected to do.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expect {
    Accept,
    Reject(RejectReason),
}

pub struct Case {
    pub label: &'static str,
    pub candidate: CameraPose,
    pub expect: Expect,
    /// Whether the two view sectors share area.
    pub sectors_overlap: bool,
}

/// Query camera for every case: origin, facing +x.
pub fn case_query() -> CameraPose {
    CameraPose::at_deg(0.0, 0.0, 0.0)
}

/// The six canonical heuristic cases. (a)–(d) are the rule working as
/// intended; (e) and (f) are the corner cases where it disagrees with the
/// sectors.
pub fn canonical_cases() -> Vec<Case> {
    vec![
        Case {
            label: "(a) facing cameras 5 m apart",
            candidate: CameraPose::at_deg(5.0, 0.0, 180.0),
            expect: Expect::Accept,
            sectors_overlap: true,
        },
        Case {
            label: "(b) parallel cameras 2 m apart",
            candidate: CameraPose::at_deg(0.0, 2.0, 0.0),
            expect: Expect::Accept,
            sectors_overlap: true,
        },
        Case {
            label: "(c) parallel cameras 20 m apart, rays meet too far",
            candidate: CameraPose::at_deg(0.0, 20.0, 0.0),
            expect: Expect::Reject(RejectReason::TooFar),
            sectors_overlap: false,
        },
        Case {
            label: "(d) candidate just behind, turned 60°, rays meet too near",
            candidate: CameraPose::at_deg(-0.1, -0.1, 60.0),
            expect: Expect::Reject(RejectReason::TooNear),
            sectors_overlap: false,
        },
        Case {
            label: "(e) distant candidate whose ray crosses the near field",
            candidate: CameraPose::at_deg(-35.0, 0.0, 30.0),
            expect: Expect::Accept,
            sectors_overlap: false,
        },
        Case {
            label: "(f) candidate just behind and aside, same heading",
            candidate: CameraPose::at_deg(-2.0, -1.0, 0.0),
            expect: Expect::Reject(RejectReason::TooNear),
            sectors_overlap: true,
        },
    ]
}

/// Shares above this are overlap; below, the sectors are treated as
/// disjoint (they may touch in a sliver at the apex).
pub const OVERLAP_SHARE: f64 = 1e-3;

/// Every way `ids` breaks the context contract for a retrieval at `target`
/// with `recent` as the most recent frame.
pub fn context_violations(
    store: &context_memory::store::MemoryStore,
    target: &CameraPose,
    cfg: &context_memory::retrieval::RetrievalConfig,
    recent: u32,
    ids: &[u32],
) -> Vec<String> {
    let mut bad = Vec::new();
    if ids.len() > cfg.k {
        bad.push(format!("{} ids exceed k = {}", ids.len(), cfg.k));
    }
    if !ids.windows(2).all(|w| w[0] < w[1]) {
        bad.push(format!("not strictly ascending: {ids:?}"));
    }
    if !ids.contains(&recent) {
        bad.push(format!("most recent {recent} missing"));
    }
    if let Some(&id) = ids.iter().find(|&&id| id > recent) {
        bad.push(format!("{id} is later than the most recent frame"));
    }
    if cfg.strategy.is_fov() && !cfg.far_from_all_history {
        for &id in ids.iter().filter(|&&id| id != recent) {
            let pose = store.pose(id).expect("id in store");
            if !fov_overlap_heuristic(target, pose, store.cfg()).overlaps {
                bad.push(format!("{id} fails the overlap test"));
            }
        }
    }
    bad
}
