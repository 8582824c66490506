//! Retrieval quality measured against the world's visible-landmark oracle.
//!
//! Without a video model there is no PSNR to compute. Instead, *coverage*
//! asks how much of what the target camera sees was also seen by some
//! context frame, and precision/recall compare the returned frames with the
//! frames that truly share a landmark with the target.

mod bench;
mod calibration;
mod report;

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{bench_retrieval, BenchLayout, BenchReport};
pub use calibration::{geometry_calibration, CalibrationPair, GeometryCalibration, PairOutcome};
pub use report::{
    percentile, write_series_csv, Confusion, EvalReport, EvalRun, LatencySummary, SegmentRow,
    StrategySummary, PROXY_NOTE, REPORT_SCHEMA_VERSION,
};

use crate::geometry::{Bounds, CameraPose, GeometryError, OverlapConfig, Vec2};
use crate::retrieval::{retrieve_context_detailed, RetrievalConfig, RetrievalError, StrategyKind};
use crate::store::{FrameRecord, MemoryStore, StoreError};
use crate::trajectory::{loop_roam, rotate_and_return, LoopSpec, Trajectory, TrajectoryError};
use crate::world::{co_visible, generate_world, WorldError, WorldModel, WorldSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no evaluation cases")]
    NoCases,
    #[error("no strategies selected")]
    NoStrategies,
    #[error("no seeds given")]
    NoSeeds,
    #[error("case {0:?} has an empty trajectory")]
    EmptyTrajectory(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("bench needs at least 100 frames, got {0}")]
    BenchTooSmall(usize),
}

/// `|V(target) ∩ ⋃ V(context)| / |V(target)|`, or 1 when the target sees
/// nothing.
pub fn coverage_of_sets<'a>(
    target: &BTreeSet<u32>,
    context: impl IntoIterator<Item = &'a BTreeSet<u32>>,
) -> f64 {
    if target.is_empty() {
        return 1.0;
    }
    let mut covered = BTreeSet::<u32>::new();
    for s in context {
        covered.extend(s.intersection(target));
        if covered.len() == target.len() {
            break;
        }
    }
    covered.len() as f64 / target.len() as f64
}

pub fn coverage(
    world: &WorldModel,
    target: &CameraPose,
    context_ids: &[u32],
    store: &MemoryStore,
    cfg: &OverlapConfig,
) -> f64 {
    let t = world.visible_set(target, cfg);
    let ctx: Vec<BTreeSet<u32>> = context_ids
        .iter()
        .filter_map(|&id| store.pose(id))
        .map(|p| world.visible_set(p, cfg))
        .collect();
    coverage_of_sets(&t, &ctx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    /// Of the returned (budgeted) set.
    pub recall: f64,
    /// Of the candidate set before the budget was applied.
    pub recall_pre_budget: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision and recall of `returned` (and recall of `pre_budget`) against
/// the relevant set.
pub fn precision_recall(
    returned: &[u32],
    pre_budget: &[u32],
    relevant: &BTreeSet<u32>,
) -> PrecisionRecall {
    let hits = |ids: &[u32]| ids.iter().filter(|id| relevant.contains(id)).count();
    PrecisionRecall {
        precision: ratio(hits(returned), returned.len()),
        recall: ratio(hits(returned), relevant.len()),
        recall_pre_budget: ratio(hits(pre_budget), relevant.len()),
    }
}

/// Relevant set: stored frames whose visible set shares at least
/// `threshold` landmarks with the target's.
pub fn relevant_frames(
    world: &WorldModel,
    store: &MemoryStore,
    target: &CameraPose,
    cfg: &OverlapConfig,
    threshold: usize,
) -> BTreeSet<u32> {
    let t = world.visible_set(target, cfg);
    store
        .records()
        .iter()
        .filter(|r| co_visible(&t, &world.visible_set(&r.pose, cfg), threshold))
        .map(|r| r.frame_id)
        .collect()
}

pub fn retrieval_pr(
    store: &MemoryStore,
    world: &WorldModel,
    target: &CameraPose,
    returned: &[u32],
    pre_budget: &[u32],
    cfg: &OverlapConfig,
) -> PrecisionRecall {
    precision_recall(
        returned,
        pre_budget,
        &relevant_frames(world, store, target, cfg, 1),
    )
}

/// A world and a camera path through it.
#[derive(Clone, Debug)]
pub struct EvalCase {
    pub label: String,
    pub world: WorldModel,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub overlap: OverlapConfig,
    /// Base retrieval config; `strategy` and `seed` are overridden per run.
    pub retrieval: RetrievalConfig,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    /// Shared landmarks needed for ground-truth co-visibility.
    pub covis_threshold: usize,
    /// Record wall-clock retrieval latency (makes reports machine-dependent).
    pub timing: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            overlap: OverlapConfig::default(),
            retrieval: RetrievalConfig::default(),
            strategies: StrategyKind::ALL.to_vec(),
            seeds: vec![1, 2, 3],
            covis_threshold: 1,
            timing: false,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<(), EvalError> {
        self.overlap.validate()?;
        self.retrieval.validate()?;
        if self.strategies.is_empty() {
            return Err(EvalError::NoStrategies);
        }
        if self.seeds.is_empty() {
            return Err(EvalError::NoSeeds);
        }
        Ok(())
    }
}

/// One generation step of the streaming loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamStep {
    pub segment: usize,
    /// Frame whose pose is the retrieval target (last of the segment).
    pub target_frame: u32,
    pub most_recent: u32,
    pub context: Vec<u32>,
    /// FOV candidates before deduplication and budgeting.
    pub pre_budget: Vec<u32>,
    pub store_len_before: usize,
    pub store_len_after: usize,
    pub latency_ns: u64,
}

/// Splits frames `1..len` into consecutive segments; frame 0 is the initial
/// frame.
pub fn segment_ranges(len: usize, segment_len: usize) -> Vec<std::ops::Range<usize>> {
    (1..len)
        .step_by(segment_len.max(1))
        .map(|s| s..(s + segment_len).min(len))
        .collect()
}

fn stream_step(
    store: &MemoryStore,
    frames: &[crate::trajectory::TrajectoryFrame],
    cfg: &RetrievalConfig,
    segment: usize,
    range: &std::ops::Range<usize>,
    most_recent: u32,
) -> Result<StreamStep, EvalError> {
    let target_frame = range.end - 1;
    let started = Instant::now();
    let out = retrieve_context_detailed(store, &frames[target_frame].pose, cfg, Some(most_recent))?;
    let latency_ns = started.elapsed().as_nanos() as u64;
    let context = out.ids();
    let pre_budget = if cfg.strategy.is_fov() {
        let mut v = out.fov_candidates;
        v.push(most_recent);
        v
    } else {
        context.clone()
    };
    Ok(StreamStep {
        segment,
        target_frame: target_frame as u32,
        most_recent,
        context,
        pre_budget,
        store_len_before: range.start,
        store_len_after: range.end,
        latency_ns,
    })
}

/// Streams a trajectory through retrieval: start from the first frame;
/// for each segment, retrieve context for the segment's final pose from the
/// frames generated so far, then append every frame of the segment.
pub fn simulate_stream(
    trajectory: &Trajectory,
    overlap: &OverlapConfig,
    cfg: &RetrievalConfig,
    mut on_step: impl FnMut(&MemoryStore, &StreamStep),
) -> Result<MemoryStore, EvalError> {
    let frames = trajectory.frames();
    let first = frames
        .first()
        .ok_or_else(|| EvalError::EmptyTrajectory(String::new()))?;
    let mut store = MemoryStore::new(*overlap)?;
    store.append_frame(FrameRecord::new(first.t, first.pose))?;
    for (segment, range) in segment_ranges(frames.len(), trajectory.segment_len())
        .into_iter()
        .enumerate()
    {
        let most_recent = store.last_id().expect("store holds the initial frame");
        let step = stream_step(&store, frames, cfg, segment, &range, most_recent)?;
        for f in &frames[range] {
            store.append_frame(FrameRecord::new(f.t, f.pose))?;
        }
        on_step(&store, &step);
    }
    Ok(store)
}

/// The steps of [`simulate_stream`], computed against a store that already
/// holds the whole trajectory. Retrieval only looks at frames up to the
/// most recent one, so the results are identical; the store is built once
/// instead of once per run.
pub fn replay_stream(
    full: &MemoryStore,
    trajectory: &Trajectory,
    cfg: &RetrievalConfig,
    mut on_step: impl FnMut(&StreamStep),
) -> Result<(), EvalError> {
    let frames = trajectory.frames();
    assert_eq!(full.len(), frames.len(), "store must hold the trajectory");
    for (segment, range) in segment_ranges(frames.len(), trajectory.segment_len())
        .into_iter()
        .enumerate()
    {
        let step = stream_step(full, frames, cfg, segment, &range, range.start as u32 - 1)?;
        on_step(&step);
    }
    Ok(())
}

/// Per-frame visible sets, computed once per case.
fn visible_sets(case: &EvalCase, cfg: &OverlapConfig) -> Vec<BTreeSet<u32>> {
    case.trajectory
        .poses()
        .map(|p| case.world.visible_set(p, cfg))
        .collect()
}

/// Runs every (case, strategy, seed) combination and aggregates.
pub fn compare_strategies(
    cases: &[EvalCase],
    settings: &EvalSettings,
) -> Result<EvalRun, EvalError> {
    settings.validate()?;
    if cases.is_empty() {
        return Err(EvalError::NoCases);
    }
    if let Some(c) = cases.iter().find(|c| c.trajectory.is_empty()) {
        return Err(EvalError::EmptyTrajectory(c.label.clone()));
    }
    let mut rows = Vec::new();
    let mut confusion = report::Confusion::default();
    let mut latencies: Vec<(StrategyKind, u64)> = Vec::new();
    for case in cases {
        let vis = visible_sets(case, &settings.overlap);
        let frames = case.trajectory.frames();
        let full = MemoryStore::from_poses(settings.overlap, case.trajectory.poses())?;
        let ranges = segment_ranges(frames.len(), case.trajectory.segment_len());
        // Ground truth per step, shared by every strategy.
        let relevant: Vec<BTreeSet<u32>> = ranges
            .iter()
            .map(|r| {
                let t = r.end - 1;
                (0..r.start as u32)
                    .filter(|&j| co_visible(&vis[t], &vis[j as usize], settings.covis_threshold))
                    .collect()
            })
            .collect();
        for (r, rel) in ranges.iter().zip(&relevant) {
            let (cands, _) = full.query_covisible_prefix(&frames[r.end - 1].pose, r.start as u32);
            let cands: BTreeSet<u32> = cands.into_iter().collect();
            for j in 0..r.start as u32 {
                confusion.add(cands.contains(&j), rel.contains(&j));
            }
        }
        for &strategy in &settings.strategies {
            for &seed in &settings.seeds {
                let cfg = RetrievalConfig {
                    strategy,
                    seed,
                    ..settings.retrieval
                };
                replay_stream(&full, &case.trajectory, &cfg, |step| {
                    let t = step.target_frame as usize;
                    let rel = &relevant[step.segment];
                    let pr = precision_recall(&step.context, &step.pre_budget, rel);
                    rows.push(SegmentRow {
                        case: case.label.clone(),
                        strategy,
                        seed,
                        segment: step.segment,
                        target_frame: step.target_frame,
                        context_size: step.context.len(),
                        coverage: coverage_of_sets(
                            &vis[t],
                            step.context.iter().map(|&id| &vis[id as usize]),
                        ),
                        precision: pr.precision,
                        recall: pr.recall,
                        recall_pre_budget: pr.recall_pre_budget,
                    });
                    latencies.push((strategy, step.latency_ns));
                })?;
            }
        }
    }
    Ok(report::build(cases, settings, rows, confusion, &latencies))
}

/// World used by the revisit fixtures: 100 m square, four landmarks per
/// 100 m², eight walls.
pub fn fixture_world(seed: u64) -> Result<WorldModel, WorldError> {
    generate_world(&WorldSpec {
        density: 4.0,
        occluder_count: 8,
        bounds: Bounds::centered(50.0),
        seed,
    })
}

/// Yaw change per frame in the rotate-and-return fixtures: 30° per segment.
pub const FIXTURE_TURN_DEG_PER_FRAME: f64 = 30.0 / 77.0;

/// Rotate 180° and back, rotate 360° and back, and two laps of a 12 m loop,
/// all centered on the world origin.
pub fn revisit_cases(world: &WorldModel, label: &str) -> Result<Vec<EvalCase>, EvalError> {
    let start = CameraPose::at(0.0, 0.0, 0.0);
    let rr = |deg: f64| -> Result<Trajectory, TrajectoryError> {
        let frames = 2 * (deg / FIXTURE_TURN_DEG_PER_FRAME).round() as usize;
        rotate_and_return(start, deg, frames)
    };
    let lp = loop_roam(&LoopSpec {
        center: Vec2::ZERO,
        ..LoopSpec::default()
    })?;
    Ok(vec![
        EvalCase {
            label: format!("{label}/rotate-180"),
            world: world.clone(),
            trajectory: rr(180.0)?,
        },
        EvalCase {
            label: format!("{label}/rotate-360"),
            world: world.clone(),
            trajectory: rr(360.0)?,
        },
        EvalCase {
            label: format!("{label}/loop"),
            world: world.clone(),
            trajectory: lp,
        },
    ])
}

/// The revisit fixtures on each of the given world seeds.
pub fn revisit_suite(world_seeds: &[u64]) -> Result<Vec<EvalCase>, EvalError> {
    let mut cases = Vec::new();
    for &s in world_seeds {
        cases.extend(revisit_cases(&fixture_world(s)?, &format!("world-{s}"))?);
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[u32]) -> BTreeSet<u32> {
        ids.iter().copied().collect()
    }

    #[test]
    fn coverage_examples() {
        assert!(
            (coverage_of_sets(&set(&[1, 2, 3]), [&set(&[1]), &set(&[2, 9])]) - 2.0 / 3.0).abs()
                < 1e-15
        );
        assert_eq!(coverage_of_sets(&set(&[]), [&set(&[1])]), 1.0);
        assert_eq!(coverage_of_sets(&set(&[1, 2]), [&set(&[0, 1, 2, 3])]), 1.0);
        assert_eq!(coverage_of_sets(&set(&[1, 2]), std::iter::empty()), 0.0);
    }

    #[test]
    fn pr_examples() {
        let r = set(&[1, 2]);
        let pr = precision_recall(&[1, 2], &[1, 2], &r);
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
        let pr = precision_recall(&[5, 6], &[5, 6, 1], &r);
        assert_eq!(
            (pr.precision, pr.recall, pr.recall_pre_budget),
            (0.0, 0.0, 0.5)
        );
        let pr = precision_recall(&[], &[], &set(&[]));
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
    }

    #[test]
    fn segments_cover_all_but_first() {
        let r = segment_ranges(155, 77);
        assert_eq!(r, vec![1..78, 78..155]);
        assert_eq!(segment_ranges(160, 77).last(), Some(&(155..160)));
        assert!(segment_ranges(1, 77).is_empty());
    }

    #[test]
    fn stream_appends_every_frame() {
        let t = rotate_and_return(CameraPose::at(0.0, 0.0, 0.0), 90.0, 200).unwrap();
        let mut seen = 0;
        let store = simulate_stream(
            &t,
            &OverlapConfig::default(),
            &RetrievalConfig::default(),
            |s, step| {
                assert_eq!(
                    step.store_len_before,
                    step.target_frame as usize + 1 - (step.store_len_after - step.store_len_before)
                );
                assert_eq!(s.len(), step.store_len_after);
                assert!(step.context.contains(&step.most_recent));
                seen += 1;
            },
        )
        .unwrap();
        assert_eq!(store.len(), 200);
        assert_eq!(seen, 3);
    }

    #[test]
    fn replay_matches_streaming() {
        let t = rotate_and_return(CameraPose::at(0.0, 0.0, 0.0), 180.0, 400).unwrap();
        let overlap = OverlapConfig::default();
        for strategy in StrategyKind::ALL {
            let cfg = RetrievalConfig::with_strategy(strategy);
            let mut streamed = Vec::new();
            let full =
                simulate_stream(&t, &overlap, &cfg, |_, s| streamed.push(s.clone())).unwrap();
            let mut replayed = Vec::new();
            replay_stream(&full, &t, &cfg, |s| replayed.push(s.clone())).unwrap();
            let strip = |v: &[StreamStep]| {
                v.iter()
                    .map(|s| (s.context.clone(), s.pre_budget.clone(), s.store_len_before))
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&streamed), strip(&replayed), "{strategy}");
        }
    }

    #[test]
    fn static_trajectory_full_coverage() {
        let world = fixture_world(7).unwrap();
        let p = CameraPose::at(0.0, 0.0, 0.0);
        let case = EvalCase {
            label: "static".into(),
            world,
            trajectory: Trajectory::from_poses(std::iter::repeat_n(p, 155), None),
        };
        let run =
            compare_strategies(std::slice::from_ref(&case), &EvalSettings::default()).unwrap();
        for s in &run.report.strategies {
            assert_eq!(s.coverage_mean, 1.0, "{}", s.strategy);
        }
    }
}
