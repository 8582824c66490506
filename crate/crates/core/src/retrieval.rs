//! Context selection: which stored frames condition the next prediction.
//!
//! The most recent frame is always included. The remaining `k − 1` slots
//! are filled per [`StrategyKind`]: the FOV strategies start from the frames
//! whose view overlaps the target, optionally keep one frame per run of
//! consecutive ids, and optionally reserve slots for the frames farthest
//! away in space or time. The baselines ignore geometry.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraPose, OverlapConfig};
use crate::rng::keyed_rng;
use crate::store::{FrameRecord, MemoryStore, StoreError};
use crate::trajectory::{Trajectory, FPS};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("invalid retrieval config: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("frame {0} not in store")]
    UnknownFrame(u32),
    #[error("trajectory has {len} frames, need at least {needed}")]
    TrajectoryTooShort { len: usize, needed: usize },
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl RetrievalError {
    pub fn field(&self) -> Option<&'static str> {
        match self {
            RetrievalError::InvalidConfig { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// The most recent frame alone.
    FirstFrame,
    /// Most recent frame plus uniformly random history.
    #[serde(alias = "first-frame-random")]
    FirstFramePlusRandom,
    /// The `k` latest frames.
    RecentWindow,
    /// Frames at offsets 1, 2, 4, 8, … before the most recent one.
    #[serde(alias = "exponential")]
    ExponentialTimestamps,
    /// FOV-overlapping frames, uniformly subsampled.
    FovRandom,
    /// FOV-overlapping frames, one per run of consecutive ids first.
    #[serde(alias = "fov-nonadj")]
    FovNonAdj,
    /// As [`StrategyKind::FovNonAdj`], with slots reserved for the frames
    /// farthest away in space-time.
    #[default]
    #[serde(alias = "fov-nonadj-fst")]
    FovNonAdjFarSpaceTime,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::FirstFrame,
        StrategyKind::FirstFramePlusRandom,
        StrategyKind::RecentWindow,
        StrategyKind::ExponentialTimestamps,
        StrategyKind::FovRandom,
        StrategyKind::FovNonAdj,
        StrategyKind::FovNonAdjFarSpaceTime,
    ];

    pub fn is_fov(self) -> bool {
        matches!(
            self,
            StrategyKind::FovRandom | StrategyKind::FovNonAdj | StrategyKind::FovNonAdjFarSpaceTime
        )
    }

    /// Short name used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::FirstFrame => "first-frame",
            StrategyKind::FirstFramePlusRandom => "first-frame-random",
            StrategyKind::RecentWindow => "recent-window",
            StrategyKind::ExponentialTimestamps => "exponential",
            StrategyKind::FovRandom => "fov-random",
            StrategyKind::FovNonAdj => "fov-nonadj",
            StrategyKind::FovNonAdjFarSpaceTime => "fov-nonadj-fst",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        StrategyKind::ALL
            .into_iter()
            .find(|k| {
                k.name() == norm
                    || serde_json::to_value(k)
                        .ok()
                        .and_then(|v| v.as_str().map(|v| v == norm))
                        == Some(true)
            })
            .ok_or_else(|| {
                let names: Vec<_> = StrategyKind::ALL.iter().map(|k| k.name()).collect();
                format!(
                    "unknown strategy {s:?}; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    /// Context size, most recent frame included.
    pub k: usize,
    pub strategy: StrategyKind,
    /// Slots reserved for far-space-time frames.
    pub far_slots: usize,
    /// Seconds of separation worth one meter in the space-time metric.
    pub time_scale: f64,
    pub seed: u64,
    /// Training only: chance of conditioning on the first frame alone.
    pub recent_only_prob: f64,
    /// Draw far-space-time frames from all history instead of the FOV
    /// candidates.
    pub far_from_all_history: bool,
    /// What to do with budget that deduplication leaves unused.
    pub dedup_fill: DedupFill,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 20,
            strategy: StrategyKind::default(),
            far_slots: 2,
            time_scale: 1.0,
            seed: 0,
            recent_only_prob: 0.10,
            far_from_all_history: false,
            dedup_fill: DedupFill::default(),
        }
    }
}

impl RetrievalConfig {
    pub fn with_strategy(strategy: StrategyKind) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let bad = |field, reason: String| Err(RetrievalError::InvalidConfig { field, reason });
        if self.k < 1 {
            return bad("k", "must be at least 1".into());
        }
        if self.far_slots >= self.k {
            return bad(
                "far_slots",
                format!("must be below k = {}, got {}", self.k, self.far_slots),
            );
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return bad(
                "time_scale",
                format!("must be positive, got {}", self.time_scale),
            );
        }
        if !(0.0..=1.0).contains(&self.recent_only_prob) {
            return bad(
                "recent_only_prob",
                format!("must be in [0, 1], got {}", self.recent_only_prob),
            );
        }
        Ok(())
    }
}

/// Use of the budget left over after deduplication, when the candidates
/// form fewer runs than there are slots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupFill {
    /// Leave it unused: one frame per run, nothing more.
    None,
    /// Uniform sample of the dropped candidates.
    Uniform,
    /// Share it among the runs in proportion to their length and take
    /// evenly spaced frames within each run.
    #[default]
    Spread,
}

impl FromStr for DedupFill {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(DedupFill::None),
            "uniform" => Ok(DedupFill::Uniform),
            "spread" => Ok(DedupFill::Spread),
            _ => Err(format!(
                "unknown dedup fill {s:?}; expected none, uniform or spread"
            )),
        }
    }
}

/// Splits ascending ids into maximal runs of consecutive values.
fn runs(ids: &[u32]) -> Vec<&[u32]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=ids.len() {
        if i == ids.len() || ids[i] != ids[i - 1] + 1 {
            out.push(&ids[start..i]);
            start = i;
        }
    }
    out
}

/// Up to `room` unchosen candidates, allotted to runs by largest remainder
/// on run length and evenly spaced within each run.
fn spread_fill(candidates: &[u32], chosen: &BTreeSet<u32>, room: usize) -> Vec<u32> {
    let free: Vec<Vec<u32>> = runs(candidates)
        .into_iter()
        .map(|r| {
            r.iter()
                .copied()
                .filter(|id| !chosen.contains(id))
                .collect()
        })
        .collect();
    let total: usize = free.iter().map(Vec::len).sum();
    let room = room.min(total);
    if room == 0 {
        return Vec::new();
    }
    let quota: Vec<f64> = free
        .iter()
        .map(|r| room as f64 * r.len() as f64 / total as f64)
        .collect();
    let mut alloc: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..free.len()).collect();
    order.sort_by(|&a, &b| {
        (quota[b] - quota[b].floor())
            .total_cmp(&(quota[a] - quota[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = room - alloc.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        if alloc[i] < free[i].len() {
            alloc[i] += 1;
            left -= 1;
        }
    }
    let mut out: Vec<u32> = free
        .iter()
        .zip(&alloc)
        .flat_map(|(r, &a)| (0..a).map(move |j| r[((2 * j + 1) * r.len()) / (2 * a)]))
        .collect();
    out.sort_unstable();
    out
}

/// Why a frame is in the context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    MostRecent,
    /// Passed the FOV test; chosen by uniform subsampling or fill.
    FovPass,
    /// Representative of its run of consecutive FOV candidates.
    DedupSurvivor,
    FarSlot,
    /// Chosen by a geometry-free baseline.
    Baseline,
    /// Training top-up to reach exactly `k`.
    TopUp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagedId {
    pub id: u32,
    pub stage: Stage,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalOutcome {
    /// Ascending.
    pub context: Vec<StagedId>,
    /// FOV-passing history frames, most recent excluded (FOV strategies).
    pub fov_candidates: Vec<u32>,
    /// Survivors of deduplication (non-adjacent strategies).
    pub dedup_survivors: Vec<u32>,
}

impl RetrievalOutcome {
    pub fn ids(&self) -> Vec<u32> {
        self.context.iter().map(|s| s.id).collect()
    }
}

/// Keeps one uniformly chosen member of every run of consecutive ids.
/// `ids` must be ascending.
pub fn dedup_non_adjacent(ids: &[u32], seed: u64) -> Vec<u32> {
    dedup_with(ids, &mut keyed_rng(seed, 0))
}

fn dedup_with(ids: &[u32], rng: &mut ChaCha8Rng) -> Vec<u32> {
    debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=ids.len() {
        if i == ids.len() || ids[i] != ids[i - 1] + 1 {
            out.push(ids[start + rng.random_range(0..i - start)]);
            start = i;
        }
    }
    out
}

/// A point in space-time for the far-selection metric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTime {
    pub x: f64,
    pub y: f64,
    /// Frames.
    pub t: f64,
}

impl SpaceTime {
    pub fn of(r: &FrameRecord) -> Self {
        Self {
            x: r.pose.x(),
            y: r.pose.y(),
            t: r.time_index as f64,
        }
    }

    /// `‖Δp‖ + |Δt| / (fps · τ)`.
    pub fn distance(&self, o: &SpaceTime, time_scale: f64) -> f64 {
        (self.x - o.x).hypot(self.y - o.y) + (self.t - o.t).abs() / (FPS as f64 * time_scale)
    }
}

/// Greedy farthest-point sampling of up to `m` candidates. The first pick
/// is the candidate farthest from `target`; each later pick maximizes the
/// distance to the nearest pick so far. Exact ties go to a seeded choice.
pub fn far_space_time_select(
    candidates: &[u32],
    store: &MemoryStore,
    target: SpaceTime,
    m: usize,
    time_scale: f64,
    seed: u64,
) -> Vec<u32> {
    far_with(
        candidates,
        store,
        target,
        m,
        time_scale,
        &mut keyed_rng(seed, 0),
    )
}

fn far_with(
    candidates: &[u32],
    store: &MemoryStore,
    target: SpaceTime,
    m: usize,
    time_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<u32> {
    let pts: Vec<SpaceTime> = candidates
        .iter()
        .map(|&id| SpaceTime::of(store.get(id).expect("candidate in store")))
        .collect();
    let mut score: Vec<f64> = pts
        .iter()
        .map(|p| p.distance(&target, time_scale))
        .collect();
    let mut taken = vec![false; pts.len()];
    let mut out = Vec::with_capacity(m.min(pts.len()));
    while out.len() < m && out.len() < pts.len() {
        let best = (0..pts.len())
            .filter(|&i| !taken[i])
            .map(|i| score[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..pts.len())
            .filter(|&i| !taken[i] && score[i] == best)
            .collect();
        let pick = ties[rng.random_range(0..ties.len())];
        taken[pick] = true;
        out.push(candidates[pick]);
        // From here on, score = distance to the nearest pick.
        let first = out.len() == 1;
        for i in 0..pts.len() {
            let d = pts[i].distance(&pts[pick], time_scale);
            score[i] = if first { d } else { score[i].min(d) };
        }
    }
    out
}

/// Uniform sample of `n` elements of `pool`, ascending.
fn sample_sorted(pool: &[u32], n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    if n >= pool.len() {
        return pool.to_vec();
    }
    let mut v: Vec<u32> = sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    v.sort_unstable();
    v
}

/// Frames eligible as history: up to two half-open id ranges.
#[derive(Clone, Debug)]
struct History {
    ranges: Vec<Range<u32>>,
}

impl History {
    fn len(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).sum()
    }

    fn nth(&self, mut i: usize) -> u32 {
        for r in &self.ranges {
            if i < r.len() {
                return r.start + i as u32;
            }
            i -= r.len();
        }
        unreachable!("index within history")
    }

    fn contains(&self, id: u32) -> bool {
        self.ranges.iter().any(|r| r.contains(&id))
    }

    fn sample_excluding(
        &self,
        n: usize,
        exclude: &BTreeSet<u32>,
        rng: &mut ChaCha8Rng,
    ) -> Vec<u32> {
        let free = self.len() - exclude.iter().filter(|&&e| self.contains(e)).count();
        let n = n.min(free);
        if n == 0 {
            return Vec::new();
        }
        // Rejection sampling stays cheap while the exclusions are few;
        // fall back to an explicit pool otherwise.
        if exclude.len() * 2 < self.len() {
            let mut got = BTreeSet::new();
            while got.len() < n {
                let id = self.nth(rng.random_range(0..self.len()));
                if !exclude.contains(&id) {
                    got.insert(id);
                }
            }
            got.into_iter().collect()
        } else {
            let pool: Vec<u32> = self
                .ranges
                .iter()
                .flat_map(|r| r.clone())
                .filter(|id| !exclude.contains(id))
                .collect();
            sample_sorted(&pool, n, rng)
        }
    }
}

struct Selection {
    picks: Vec<StagedId>,
    fov_candidates: Vec<u32>,
    dedup_survivors: Vec<u32>,
}

/// Chooses up to `budget` frames besides the anchor.
#[allow(clippy::too_many_arguments)]
fn select(
    cfg: &RetrievalConfig,
    store: &MemoryStore,
    anchor: u32,
    history: &History,
    fov_candidates: Vec<u32>,
    target: SpaceTime,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Selection {
    let staged = |ids: Vec<u32>, stage| ids.into_iter().map(move |id| StagedId { id, stage });
    let mut sel = Selection {
        picks: Vec::new(),
        fov_candidates: Vec::new(),
        dedup_survivors: Vec::new(),
    };
    match cfg.strategy {
        StrategyKind::FirstFrame => {}
        StrategyKind::FirstFramePlusRandom => {
            let ids = history.sample_excluding(budget, &BTreeSet::new(), rng);
            sel.picks.extend(staged(ids, Stage::Baseline));
        }
        StrategyKind::RecentWindow => {
            let ids = (1..=budget as u32)
                .filter_map(|o| anchor.checked_sub(o))
                .filter(|id| history.contains(*id))
                .collect();
            sel.picks.extend(staged(ids, Stage::Baseline));
        }
        StrategyKind::ExponentialTimestamps => {
            let ids = (0..32)
                .map(|i| 1u64 << i)
                .take_while(|&o| o <= anchor as u64)
                .map(|o| anchor - o as u32)
                .filter(|id| history.contains(*id))
                .take(budget)
                .collect();
            sel.picks.extend(staged(ids, Stage::Baseline));
        }
        StrategyKind::FovRandom => {
            let ids = sample_sorted(&fov_candidates, budget, rng);
            sel.picks.extend(staged(ids, Stage::FovPass));
            sel.fov_candidates = fov_candidates;
        }
        StrategyKind::FovNonAdj | StrategyKind::FovNonAdjFarSpaceTime => {
            let survivors = dedup_with(&fov_candidates, rng);
            let mut chosen: BTreeSet<u32> = BTreeSet::new();
            if cfg.strategy == StrategyKind::FovNonAdjFarSpaceTime
                && cfg.far_slots > 0
                && budget > 0
            {
                let m = cfg.far_slots.min(budget);
                let far = if cfg.far_from_all_history {
                    let pool: Vec<u32> = history.ranges.iter().flat_map(|r| r.clone()).collect();
                    far_with(&pool, store, target, m, cfg.time_scale, rng)
                } else {
                    far_with(&survivors, store, target, m, cfg.time_scale, rng)
                };
                chosen.extend(&far);
                sel.picks.extend(staged(far, Stage::FarSlot));
            }
            let rest: Vec<u32> = survivors
                .iter()
                .copied()
                .filter(|id| !chosen.contains(id))
                .collect();
            let room = budget - chosen.len();
            let kept = sample_sorted(&rest, room, rng);
            chosen.extend(&kept);
            sel.picks.extend(staged(kept, Stage::DedupSurvivor));
            if chosen.len() < budget {
                let room = budget - chosen.len();
                let fill = match cfg.dedup_fill {
                    DedupFill::None => Vec::new(),
                    DedupFill::Uniform => {
                        let dropped: Vec<u32> = fov_candidates
                            .iter()
                            .copied()
                            .filter(|id| !chosen.contains(id))
                            .collect();
                        sample_sorted(&dropped, room, rng)
                    }
                    DedupFill::Spread => spread_fill(&fov_candidates, &chosen, room),
                };
                sel.picks.extend(staged(fill, Stage::FovPass));
            }
            sel.fov_candidates = fov_candidates;
            sel.dedup_survivors = survivors;
        }
    }
    sel
}

/// Selects the context for a new frame at `target`.
///
/// `most_recent` defaults to the last stored frame; only frames up to it are
/// eligible. An empty store yields an empty context.
pub fn retrieve_context(
    store: &MemoryStore,
    target: &CameraPose,
    cfg: &RetrievalConfig,
    most_recent: Option<u32>,
) -> Result<Vec<u32>, RetrievalError> {
    Ok(retrieve_context_detailed(store, target, cfg, most_recent)?.ids())
}

pub fn retrieve_context_detailed(
    store: &MemoryStore,
    target: &CameraPose,
    cfg: &RetrievalConfig,
    most_recent: Option<u32>,
) -> Result<RetrievalOutcome, RetrievalError> {
    cfg.validate()?;
    let Some(recent) = most_recent.or(store.last_id()) else {
        return Ok(RetrievalOutcome::default());
    };
    let recent_rec = store
        .get(recent)
        .ok_or(RetrievalError::UnknownFrame(recent))?;
    let mut rng = keyed_rng(cfg.seed, recent as u64 + 1);
    let fov_candidates = if cfg.strategy.is_fov() {
        let (mut ids, _) = store.query_covisible_prefix(target, recent + 1);
        ids.retain(|&id| id != recent);
        ids
    } else {
        Vec::new()
    };
    let history = History {
        ranges: std::iter::once(0..recent).collect(),
    };
    let target_st = SpaceTime {
        x: target.x(),
        y: target.y(),
        t: recent_rec.time_index as f64 + 1.0,
    };
    let sel = select(
        cfg,
        store,
        recent,
        &history,
        fov_candidates,
        target_st,
        cfg.k - 1,
        &mut rng,
    );
    Ok(finish(recent, sel))
}

fn finish(anchor: u32, sel: Selection) -> RetrievalOutcome {
    let mut context = sel.picks;
    context.push(StagedId {
        id: anchor,
        stage: Stage::MostRecent,
    });
    context.sort_unstable_by_key(|s| s.id);
    debug_assert!(context.windows(2).all(|w| w[0].id < w[1].id));
    RetrievalOutcome {
        context,
        fov_candidates: sel.fov_candidates,
        dedup_survivors: sel.dedup_survivors,
    }
}

/// One training example: the frames to predict and their context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    /// Frame ids of the prediction segment.
    pub segment: Range<u32>,
    pub recent_only: bool,
    pub context: Vec<StagedId>,
}

impl TrainingSample {
    pub fn context_ids(&self) -> Vec<u32> {
        self.context.iter().map(|s| s.id).collect()
    }
}

/// Draws training examples from a complete recording, with co-visibility
/// edges computed once up front.
pub struct TrainingSampler {
    store: MemoryStore,
    adjacency: Vec<Vec<u32>>,
    segment_len: usize,
    cfg: RetrievalConfig,
}

impl TrainingSampler {
    pub fn new(
        trajectory: &Trajectory,
        overlap: OverlapConfig,
        cfg: RetrievalConfig,
    ) -> Result<Self, RetrievalError> {
        cfg.validate()?;
        let segment_len = trajectory.segment_len();
        let needed = segment_len + cfg.k;
        if trajectory.len() < needed {
            return Err(RetrievalError::TrajectoryTooShort {
                len: trajectory.len(),
                needed,
            });
        }
        let mut store = MemoryStore::new(overlap)?;
        for f in trajectory.frames() {
            store.append_frame(FrameRecord::new(f.t, f.pose))?;
        }
        let adjacency = store.undirected_adjacency();
        Ok(Self {
            store,
            adjacency,
            segment_len,
            cfg,
        })
    }

    pub fn store(&self) -> &MemoryStore {
        &self.store
    }

    /// Example number `draw`; deterministic in `(cfg.seed, draw)`.
    pub fn sample(&self, draw: u64) -> TrainingSample {
        let mut rng = keyed_rng(self.cfg.seed, draw);
        let n = self.store.len() as u32;
        let seg = self.segment_len as u32;
        let start = rng.random_range(0..=n - seg);
        let segment = start..start + seg;
        let first = StagedId {
            id: start,
            stage: Stage::MostRecent,
        };
        if rng.random::<f64>() < self.cfg.recent_only_prob {
            return TrainingSample {
                segment,
                recent_only: true,
                context: vec![first],
            };
        }
        let history = History {
            ranges: vec![0..start, segment.end..n],
        };
        let fov_candidates: Vec<u32> = if self.cfg.strategy.is_fov() {
            let mut set = BTreeSet::new();
            for s in segment.clone() {
                set.extend(
                    self.adjacency[s as usize]
                        .iter()
                        .filter(|&&j| history.contains(j)),
                );
            }
            set.into_iter().collect()
        } else {
            Vec::new()
        };
        let rec = self.store.get(start).expect("segment start stored");
        let target = SpaceTime::of(rec);
        let budget = self.cfg.k - 1;
        let sel = select(
            &self.cfg,
            &self.store,
            start,
            &history,
            fov_candidates,
            target,
            budget,
            &mut rng,
        );
        let mut taken: BTreeSet<u32> = sel.picks.iter().map(|s| s.id).collect();
        let mut picks = sel.picks;
        if taken.len() < budget {
            let extra = history.sample_excluding(budget - taken.len(), &taken, &mut rng);
            taken.extend(&extra);
            picks.extend(extra.into_iter().map(|id| StagedId {
                id,
                stage: Stage::TopUp,
            }));
        }
        let out = finish(
            start,
            Selection {
                picks,
                fov_candidates: Vec::new(),
                dedup_survivors: Vec::new(),
            },
        );
        TrainingSample {
            segment,
            recent_only: false,
            context: out.context,
        }
    }
}

/// One-shot form of [`TrainingSampler::sample`]; rebuilds the edges on
/// every call.
pub fn training_sample(
    trajectory: &Trajectory,
    overlap: OverlapConfig,
    cfg: &RetrievalConfig,
    draw: u64,
) -> Result<TrainingSample, RetrievalError> {
    Ok(TrainingSampler::new(trajectory, overlap, *cfg)?.sample(draw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fov_overlap_heuristic;

    fn line_store(n: usize, spacing: f64) -> MemoryStore {
        let poses: Vec<CameraPose> = (0..n)
            .map(|i| CameraPose::at(i as f64 * spacing, 0.0, 0.0))
            .collect();
        MemoryStore::from_poses(OverlapConfig::default(), poses.iter()).unwrap()
    }

    #[test]
    fn dedup_examples() {
        for seed in 0..20 {
            let out = dedup_non_adjacent(&[3, 4, 5, 10, 20, 21], seed);
            assert_eq!(out.len(), 3);
            assert!((3..=5).contains(&out[0]) && out[1] == 10 && (20..=21).contains(&out[2]));
        }
        assert!(dedup_non_adjacent(&[], 1).is_empty());
        assert_eq!(dedup_non_adjacent(&[1, 5, 9], 1), vec![1, 5, 9]);
    }

    #[test]
    fn dedup_picks_every_member_eventually() {
        let seen: BTreeSet<u32> = (0..200)
            .map(|s| dedup_non_adjacent(&[7, 8, 9], s)[0])
            .collect();
        assert_eq!(seen, [7, 8, 9].into());
    }

    #[test]
    fn far_select_line_endpoints() {
        // 10 frames across 9 m at one time index: time does not matter.
        let mut s = MemoryStore::new(OverlapConfig::default()).unwrap();
        for i in 0..10 {
            s.append_frame(FrameRecord::new(0, CameraPose::at(i as f64, 0.0, 0.0)))
                .unwrap();
        }
        let ids: Vec<u32> = (0..10).collect();
        let target = SpaceTime {
            x: 3.0,
            y: 0.0,
            t: 0.0,
        };
        let mut got = far_space_time_select(&ids, &s, target, 2, 1e12, 4);
        got.sort_unstable();
        assert_eq!(got, vec![0, 9]);
        assert!(far_space_time_select(&ids, &s, target, 0, 1.0, 4).is_empty());
    }

    #[test]
    fn far_select_degenerate_ties() {
        let p = CameraPose::at(1.0, 1.0, 0.0);
        let mut s = MemoryStore::new(OverlapConfig::default()).unwrap();
        for _ in 0..5 {
            s.append_frame(FrameRecord::new(3, p)).unwrap();
        }
        let ids: Vec<u32> = (0..5).collect();
        let target = SpaceTime {
            x: 0.0,
            y: 0.0,
            t: 10.0,
        };
        let picks: BTreeSet<u32> = (0..50)
            .map(|seed| {
                let got = far_space_time_select(&ids, &s, target, 1, 1.0, seed);
                assert_eq!(got.len(), 1);
                got[0]
            })
            .collect();
        assert!(picks.len() > 1, "ties must be broken by the seed");
    }

    #[test]
    fn underfull_store_returns_everything() {
        let s = line_store(3, 0.5);
        for kind in [
            StrategyKind::FovRandom,
            StrategyKind::FovNonAdj,
            StrategyKind::RecentWindow,
        ] {
            let cfg = RetrievalConfig::with_strategy(kind);
            let ids = retrieve_context(&s, &CameraPose::at(1.5, 0.0, 0.0), &cfg, None).unwrap();
            assert_eq!(ids, vec![0, 1, 2], "{kind}");
        }
    }

    #[test]
    fn empty_store_empty_context() {
        let s = MemoryStore::new(OverlapConfig::default()).unwrap();
        let ids = retrieve_context(
            &s,
            &CameraPose::at(0.0, 0.0, 0.0),
            &RetrievalConfig::default(),
            None,
        )
        .unwrap();
        assert!(ids.is_empty());
    }

    #[test]
    fn fov_strategies_respect_budget_and_overlap() {
        let s = line_store(300, 0.05);
        let target = CameraPose::at(-1.0, 0.0, 0.0);
        for kind in StrategyKind::ALL {
            let cfg = RetrievalConfig::with_strategy(kind);
            let out = retrieve_context_detailed(&s, &target, &cfg, None).unwrap();
            let ids = out.ids();
            assert!(ids.len() <= 20 && ids.contains(&299), "{kind}");
            if kind.is_fov() {
                for &id in ids.iter().filter(|&&id| id != 299) {
                    assert!(fov_overlap_heuristic(&target, s.pose(id).unwrap(), s.cfg()).overlaps);
                }
            }
        }
    }

    #[test]
    fn baselines() {
        let s = line_store(100, 0.01);
        let t = CameraPose::at(0.0, 0.0, 0.0);
        let cfg = |k| RetrievalConfig::with_strategy(k);
        assert_eq!(
            retrieve_context(&s, &t, &cfg(StrategyKind::FirstFrame), None).unwrap(),
            vec![99]
        );
        assert_eq!(
            retrieve_context(&s, &t, &cfg(StrategyKind::RecentWindow), None).unwrap(),
            (80..100).collect::<Vec<_>>()
        );
        assert_eq!(
            retrieve_context(&s, &t, &cfg(StrategyKind::ExponentialTimestamps), None).unwrap(),
            vec![35, 67, 83, 91, 95, 97, 98, 99]
        );
        let r = retrieve_context(&s, &t, &cfg(StrategyKind::FirstFramePlusRandom), None).unwrap();
        assert_eq!(r.len(), 20);
        assert_eq!(r.last(), Some(&99));
    }

    #[test]
    fn most_recent_bounds_history() {
        let s = line_store(50, 0.01);
        let ids = retrieve_context(
            &s,
            &CameraPose::at(0.0, 0.0, 0.0),
            &RetrievalConfig::default(),
            Some(10),
        )
        .unwrap();
        assert!(ids.iter().all(|&i| i <= 10) && ids.contains(&10));
        assert!(matches!(
            retrieve_context(
                &s,
                &CameraPose::at(0.0, 0.0, 0.0),
                &RetrievalConfig::default(),
                Some(50)
            ),
            Err(RetrievalError::UnknownFrame(50))
        ));
    }

    #[test]
    fn config_validation_names_fields() {
        for (c, field) in [
            (
                RetrievalConfig {
                    k: 0,
                    ..Default::default()
                },
                "k",
            ),
            (
                RetrievalConfig {
                    far_slots: 20,
                    ..Default::default()
                },
                "far_slots",
            ),
            (
                RetrievalConfig {
                    recent_only_prob: 1.5,
                    ..Default::default()
                },
                "recent_only_prob",
            ),
        ] {
            assert_eq!(c.validate().unwrap_err().field(), Some(field));
        }
    }

    #[test]
    fn spread_fill_shares_room_by_run_length() {
        // Runs of 10 and 2 frames; 6 slots split 5:1, evenly spaced.
        let cands: Vec<u32> = (0..10).chain(20..22).collect();
        let out = spread_fill(&cands, &BTreeSet::new(), 6);
        assert_eq!(out, [1, 3, 5, 7, 9, 21]);
        // Chosen frames are skipped and room is capped by what is left.
        let chosen: BTreeSet<u32> = (0..10).collect();
        assert_eq!(spread_fill(&cands, &chosen, 6), [20, 21]);
        assert!(spread_fill(&cands, &BTreeSet::new(), 0).is_empty());
    }

    #[test]
    fn strategy_names_parse() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            let json = serde_json::to_value(k).unwrap();
            assert_eq!(json.as_str().unwrap().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("nope".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn training_too_short() {
        let t = Trajectory::from_poses(
            (0..77).map(|i| CameraPose::at(i as f64 * 0.05, 0.0, 0.0)),
            None,
        );
        assert!(matches!(
            TrainingSampler::new(&t, OverlapConfig::default(), RetrievalConfig::default()),
            Err(RetrievalError::TrajectoryTooShort {
                len: 77,
                needed: 97
            })
        ));
    }
}
