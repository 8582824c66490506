//! Ray heuristic vs sampled sector oracle on random pose pairs.
//!
//! Pairs whose sectors touch only in a sliver (nonzero overlap below
//! `min_fraction` of a sector) are skipped: neither answer is wrong for
//! them in any useful sense. Every kept pair is either clearly overlapping
//! or clearly disjoint.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    default_fov, fov_overlap_heuristic, sector_oracle, sector_overlap_fraction, CameraPose,
    OverlapConfig, OverlapVerdict, Vec2,
};
use crate::rng::keyed_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOutcome {
    TruePositive,
    TrueNegative,
    FalsePositive,
    FalseNegative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPair {
    pub query: CameraPose,
    pub candidate: CameraPose,
    pub oracle_fraction: f64,
    pub outcome: PairOutcome,
    pub verdict: OverlapVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryCalibration {
    pub pairs: usize,
    pub skipped_slivers: usize,
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub agreement: f64,
    /// Every disagreeing pair with its full verdict.
    pub disagreements: Vec<CalibrationPair>,
}

/// Draws pose pairs until `pairs` of them are kept. The query is uniform
/// over a 100 m square with uniform yaw; the candidate is uniform over the
/// disk of radius `2·d_max` around it, also with uniform yaw.
pub fn geometry_calibration(
    pairs: usize,
    min_fraction: f64,
    cfg: &OverlapConfig,
    seed: u64,
) -> GeometryCalibration {
    let mut rng = keyed_rng(seed, 0);
    let fov = default_fov();
    let mut out = GeometryCalibration {
        pairs: 0,
        skipped_slivers: 0,
        true_positive: 0,
        true_negative: 0,
        false_positive: 0,
        false_negative: 0,
        agreement: 0.0,
        disagreements: Vec::new(),
    };
    let reach = cfg.max_separation();
    while out.pairs < pairs {
        let q = CameraPose::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-PI..PI),
            fov,
        )
        .expect("finite");
        let r = reach * rng.random::<f64>().sqrt();
        let off = Vec2::from_angle(rng.random_range(-PI..PI)) * r;
        let c = CameraPose::new(q.x() + off.x, q.y() + off.y, rng.random_range(-PI..PI), fov)
            .expect("finite");

        let fraction = sector_overlap_fraction(&q, &c, cfg);
        let actual = if fraction >= min_fraction {
            true
        } else if !sector_oracle(&q, &c, cfg) {
            false
        } else {
            out.skipped_slivers += 1;
            continue;
        };
        let verdict = fov_overlap_heuristic(&q, &c, cfg);
        let outcome = match (verdict.overlaps, actual) {
            (true, true) => PairOutcome::TruePositive,
            (false, false) => PairOutcome::TrueNegative,
            (true, false) => PairOutcome::FalsePositive,
            (false, true) => PairOutcome::FalseNegative,
        };
        match outcome {
            PairOutcome::TruePositive => out.true_positive += 1,
            PairOutcome::TrueNegative => out.true_negative += 1,
            PairOutcome::FalsePositive => out.false_positive += 1,
            PairOutcome::FalseNegative => out.false_negative += 1,
        }
        if matches!(
            outcome,
            PairOutcome::FalsePositive | PairOutcome::FalseNegative
        ) {
            out.disagreements.push(CalibrationPair {
                query: q,
                candidate: c,
                oracle_fraction: fraction,
                outcome,
                verdict,
            });
        }
        out.pairs += 1;
    }
    out.agreement = (out.true_positive + out.true_negative) as f64 / out.pairs.max(1) as f64;
    out
}
