//! Append-only frame memory with a spatial hash grid and precomputed
//! co-visibility edges.
//!
//! Every appended frame is tested, as the query, against the earlier frames
//! that the grid cannot rule out; the passing pairs become edges
//! `(later, earlier)`. The heuristic rejects cameras more than `2·d_max`
//! apart, so with cells `d_max` wide every possible partner lies in the 5×5
//! block of cells around the query; corner cells wholly beyond `2·d_max`
//! are skipped.
//!
//! Within a cell, frames are bucketed by yaw. A partner's view wedge must
//! reach the disk around the query's view sector, which bounds its heading
//! to an arc as seen from anywhere in the cell; buckets outside that arc
//! are skipped. Both prunings are exact: the grid returns what a full scan
//! returns. The heading arc is bounded without trig, see
//! `MemoryStore::bucket_mask`.

mod snapshot;

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use rustc_hash::FxHashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    fov_overlap, fov_overlap_admitted, CameraPose, GeometryError, OverlapConfig, PoseGeometry,
    QueryFilter, Vec2, WedgeKey,
};
use crate::world::Panorama;

pub use snapshot::SnapshotFormat;

/// Cells searched on each side of the query cell.
pub const NEIGHBORHOOD_RADIUS: i64 = 2;

/// Yaw buckets per cell.
pub const YAW_BINS: usize = 16;
const BIN_WIDTH: f64 = TAU / YAW_BINS as f64;
/// Slack on the heading arc, in radians, over floating-point error.
const ARC_SLACK: f64 = 1e-6;

/// One cell's members in a single array, grouped by yaw bucket and
/// ascending by id within a bucket; `starts[k]..starts[k + 1]` is bucket
/// `k`.
#[derive(Clone, Debug, Default)]
struct GridCell {
    members: Vec<(u32, WedgeKey)>,
    starts: [u32; YAW_BINS + 1],
}

impl GridCell {
    fn insert(&mut self, bin: usize, id: u32, key: WedgeKey) {
        let at = self.starts[bin + 1] as usize;
        self.members.insert(at, (id, key));
        for s in &mut self.starts[bin + 1..] {
            *s += 1;
        }
    }

    fn bucket(&self, bin: usize) -> &[(u32, WedgeKey)] {
        &self.members[self.starts[bin] as usize..self.starts[bin + 1] as usize]
    }
}

fn arc_base(max_half_fov: f64) -> (f64, f64) {
    let a = max_half_fov + BIN_WIDTH / 2.0 + ARC_SLACK;
    (a.cos(), a.sin())
}

fn yaw_bin(yaw: f64) -> usize {
    (((yaw + PI) / BIN_WIDTH).floor() as i64).rem_euclid(YAW_BINS as i64) as usize
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("time index {time_index} precedes the last stored time index {last}")]
    OutOfOrder { time_index: u64, last: u64 },
    #[error("frame {frame_id} not in store")]
    UnknownFrame { frame_id: u32 },
    #[error(transparent)]
    Config(#[from] GeometryError),
    #[error("corrupt snapshot at byte {offset}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Corrupt {
        offset: u64,
        line: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One remembered frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u32,
    pub time_index: u64,
    pub pose: CameraPose,
    /// FNV-1a of the panorama bytes; 0 when no panorama was rendered.
    pub payload_digest: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panorama: Option<Panorama>,
}

impl FrameRecord {
    /// A record without payload. `frame_id` is assigned on append.
    pub fn new(time_index: u64, pose: CameraPose) -> Self {
        Self {
            frame_id: 0,
            time_index,
            pose,
            payload_digest: 0,
            panorama: None,
        }
    }

    pub fn with_panorama(time_index: u64, pose: CameraPose, panorama: Panorama) -> Self {
        Self {
            frame_id: 0,
            time_index,
            pose,
            payload_digest: panorama.digest(),
            panorama: Some(panorama),
        }
    }
}

/// Work done by one query or by a whole build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneStats {
    /// Frames gathered from the searched cells.
    pub gathered: u64,
    /// Heuristic evaluations after the exact separation prefilter.
    pub evaluated: u64,
}

impl std::ops::AddAssign for PruneStats {
    fn add_assign(&mut self, o: Self) {
        self.gathered += o.gathered;
        self.evaluated += o.evaluated;
    }
}

type Cell = (i64, i64);

#[derive(Clone, Debug)]
pub struct MemoryStore {
    cfg: OverlapConfig,
    records: Vec<FrameRecord>,
    geoms: Vec<PoseGeometry>,
    /// Per cell and yaw bucket, member ids (ascending) with their wedge
    /// keys inline, so most candidates are ruled out without touching
    /// `geoms`.
    grid: FxHashMap<Cell, GridCell>,
    /// Largest half fov stored; bounds every wedge's width.
    max_half_fov: f64,
    /// cos and sin of `max_half_fov + BIN_WIDTH / 2 + ARC_SLACK`.
    arc_base: (f64, f64),
    bucket_centers: [Vec2; YAW_BINS],
    /// `edges[i]`: earlier frames that passed with frame `i` as the query,
    /// ascending.
    edges: Vec<Vec<u32>>,
    edge_count: usize,
    build_stats: PruneStats,
}

impl PartialEq for MemoryStore {
    /// Records, edges and config; the grid and counters are derived.
    fn eq(&self, o: &Self) -> bool {
        self.cfg == o.cfg && self.records == o.records && self.edges == o.edges
    }
}

impl MemoryStore {
    pub fn new(cfg: OverlapConfig) -> Result<Self, StoreError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            records: Vec::new(),
            geoms: Vec::new(),
            grid: FxHashMap::default(),
            max_half_fov: 0.0,
            arc_base: arc_base(0.0),
            bucket_centers: std::array::from_fn(|k| {
                Vec2::from_angle(-PI + (k as f64 + 0.5) * BIN_WIDTH)
            }),
            edges: Vec::new(),
            edge_count: 0,
            build_stats: PruneStats::default(),
        })
    }

    /// Appends poses with time indices `0, 1, 2, ...`.
    pub fn from_poses<'a>(
        cfg: OverlapConfig,
        poses: impl IntoIterator<Item = &'a CameraPose>,
    ) -> Result<Self, StoreError> {
        let mut store = Self::new(cfg)?;
        for (t, p) in poses.into_iter().enumerate() {
            store.append_frame(FrameRecord::new(t as u64, *p))?;
        }
        Ok(store)
    }

    pub fn cfg(&self) -> &OverlapConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    pub fn get(&self, id: u32) -> Option<&FrameRecord> {
        self.records.get(id as usize)
    }

    pub fn pose(&self, id: u32) -> Option<&CameraPose> {
        self.get(id).map(|r| &r.pose)
    }

    pub fn last_id(&self) -> Option<u32> {
        self.records.len().checked_sub(1).map(|i| i as u32)
    }

    /// Earlier frames linked to `id` (with `id` as the query).
    pub fn edges_of(&self, id: u32) -> &[u32] {
        self.edges.get(id as usize).map_or(&[], Vec::as_slice)
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// All edges as `(query, candidate)` pairs, query ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .flat_map(|(i, js)| js.iter().map(move |&j| (i as u32, j)))
    }

    /// Heuristic work spent building the edge set so far.
    pub fn build_stats(&self) -> PruneStats {
        self.build_stats
    }

    fn cell_size(&self) -> f64 {
        self.cfg.d_max
    }

    /// Squared distance from `p` to the nearest point of `cell`.
    fn cell_dist_sq(&self, cell: Cell, p: Vec2) -> f64 {
        let s = self.cell_size();
        let gap = |lo: f64, v: f64| (lo - v).max(v - (lo + s)).max(0.0);
        let (gx, gy) = (gap(cell.0 as f64 * s, p.x), gap(cell.1 as f64 * s, p.y));
        gx * gx + gy * gy
    }

    fn cell_of(&self, pose: &CameraPose) -> Cell {
        let s = self.cell_size();
        ((pose.x() / s).floor() as i64, (pose.y() / s).floor() as i64)
    }

    /// Frame ids in the cell containing `pose`.
    pub fn cell_members(&self, pose: &CameraPose) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .grid
            .get(&self.cell_of(pose))
            .map_or_else(Vec::new, |c| c.members.iter().map(|e| e.0).collect());
        ids.sort_unstable();
        ids
    }

    /// Yaw buckets that can hold a partner for a query whose sector disk
    /// is `(m, r)`, among frames in `cell`, as a bit mask.
    ///
    /// From a point `o` with `|m − o| > r`, a wedge of half-width `hf`
    /// meets the disk only if its heading is within `hf + asin(r/|m − o|)`
    /// of the direction to `m`. Over a cell with center `b` and
    /// half-diagonal `h`, that direction stays within `asin(h/|m − b|)` of
    /// the direction from `b`, and `|m − o| ≥ |m − b| − h`. A bucket
    /// qualifies when its center is within that arc plus half a bucket.
    /// Angles are summed as unit complex numbers to keep trig off this path.
    fn bucket_mask(&self, cell: Cell, m: Vec2, r: f64) -> u32 {
        const ALL: u32 = ((1u64 << YAW_BINS) - 1) as u32;
        let s = self.cell_size();
        let b = Vec2::new((cell.0 as f64 + 0.5) * s, (cell.1 as f64 + 0.5) * s);
        let h = s * FRAC_1_SQRT_2;
        let to_m = m - b;
        let d = to_m.norm();
        if d <= r + h {
            return ALL;
        }
        // sin and cos of asin(h/d) + asin(r/(d − h)), a sum within [0, π].
        let (s1, s2) = (h / d, r / (d - h));
        let (c1, c2) = ((1.0 - s1 * s1).sqrt(), (1.0 - s2 * s2).sqrt());
        let (cos_v, sin_v) = (c1 * c2 - s1 * s2, s1 * c2 + c1 * s2);
        let (cos_p, sin_p) = self.arc_base;
        // The total reaches π exactly when the variable part reaches π − base.
        if cos_v <= -cos_p {
            return ALL;
        }
        let cos_arc = cos_p * cos_v - sin_p * sin_v;
        if cos_arc < -1.0 + 1e-9 {
            return ALL;
        }
        let dir = to_m * (1.0 / d);
        let mut mask = 0;
        for (k, u) in self.bucket_centers.iter().enumerate() {
            mask |= u32::from(u.dot(dir) >= cos_arc) << k;
        }
        mask
    }

    /// Candidate ids below `upto` that pass the heuristic against `q`.
    ///
    /// Two passes: a branch-free sweep over the searched buckets that keeps
    /// what the filter admits, then the full test on the survivors.
    fn scan_neighborhood(
        &self,
        q: &PoseGeometry,
        cell: Cell,
        upto: u32,
        out: &mut Vec<u32>,
    ) -> PruneStats {
        let filter = QueryFilter::new(q, &self.cfg);
        let (m, r) = filter.disk();
        let gate_sq = self.cfg.max_separation().powi(2) * (1.0 + 1e-9);
        let mut buckets: Vec<&[(u32, WedgeKey)]> = Vec::new();
        for dy in -NEIGHBORHOOD_RADIUS..=NEIGHBORHOOD_RADIUS {
            for dx in -NEIGHBORHOOD_RADIUS..=NEIGHBORHOOD_RADIUS {
                let c = (cell.0 + dx, cell.1 + dy);
                if self.cell_dist_sq(c, q.origin) > gate_sq {
                    continue;
                }
                let Some(members) = self.grid.get(&c) else {
                    continue;
                };
                let mask = self.bucket_mask(c, m, r);
                for k in (0..YAW_BINS).filter(|k| mask >> k & 1 == 1) {
                    let b = members.bucket(k);
                    buckets.push(&b[..b.partition_point(|e| e.0 < upto)]);
                }
            }
        }

        let mut stats = PruneStats::default();
        let mut admitted = vec![0u32; buckets.iter().map(|b| b.len()).sum::<usize>() + 1];
        let mut n = 0;
        for b in buckets {
            stats.gathered += b.len() as u64;
            for (j, key) in b {
                stats.evaluated += u64::from(filter.within_gate(key));
                admitted[n] = *j;
                n += usize::from(filter.admits(key));
            }
        }
        let start = out.len();
        out.extend(
            admitted[..n]
                .iter()
                .filter(|&&j| fov_overlap_admitted(q, &self.geoms[j as usize], &self.cfg)),
        );
        out[start..].sort_unstable();
        stats
    }

    /// Inserts a record, assigning the next frame id, and links it to every
    /// earlier frame whose view it overlaps.
    pub fn append_frame(&mut self, mut record: FrameRecord) -> Result<u32, StoreError> {
        if let Some(last) = self.records.last() {
            if record.time_index < last.time_index {
                return Err(StoreError::OutOfOrder {
                    time_index: record.time_index,
                    last: last.time_index,
                });
            }
        }
        let id = self.records.len() as u32;
        record.frame_id = id;
        let geom = PoseGeometry::new(&record.pose);
        let cell = self.cell_of(&record.pose);
        let mut linked = Vec::new();
        let stats = self.scan_neighborhood(&geom, cell, id, &mut linked);
        self.build_stats += stats;
        self.edge_count += linked.len();
        self.edges.push(linked);
        self.records.push(record);
        let key = geom.key();
        let (record_yaw, half_fov) = (geom.yaw, geom.half_fov);
        self.geoms.push(geom);
        self.grid
            .entry(cell)
            .or_default()
            .insert(yaw_bin(record_yaw), id, key);
        if half_fov > self.max_half_fov {
            self.max_half_fov = half_fov;
            self.arc_base = arc_base(half_fov);
        }
        Ok(id)
    }

    /// Every stored frame whose pose passes the heuristic with `target` as
    /// the query, ascending.
    pub fn query_covisible(&self, target: &CameraPose) -> Vec<u32> {
        self.query_covisible_prefix(target, self.records.len() as u32)
            .0
    }

    /// Like [`MemoryStore::query_covisible`], restricted to ids below `upto`,
    /// with the work counters.
    pub fn query_covisible_prefix(&self, target: &CameraPose, upto: u32) -> (Vec<u32>, PruneStats) {
        let mut out = Vec::new();
        let stats = self.scan_neighborhood(
            &PoseGeometry::new(target),
            self.cell_of(target),
            upto,
            &mut out,
        );
        (out, stats)
    }

    /// Full linear scan; the reference for [`MemoryStore::query_covisible`].
    pub fn naive_query_covisible(&self, target: &CameraPose) -> Vec<u32> {
        let q = PoseGeometry::new(target);
        (0..self.geoms.len() as u32)
            .filter(|&j| fov_overlap(&q, &self.geoms[j as usize], &self.cfg))
            .collect()
    }

    /// Recomputes every edge by testing all ordered pairs.
    pub fn naive_edges(&self) -> Vec<Vec<u32>> {
        naive_edges(self.records.iter().map(|r| &r.pose), &self.cfg)
    }

    /// For each frame, the frames linked to it in either direction,
    /// ascending. Used where both earlier and later frames are history, as
    /// in training on a complete recording.
    pub fn undirected_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj: Vec<Vec<u32>> = self.edges.clone();
        for (i, js) in self.edges.iter().enumerate() {
            for &j in js {
                adj[j as usize].push(i as u32);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }
}

/// All-pairs edge construction, later frame as the query.
pub fn naive_edges<'a>(
    poses: impl IntoIterator<Item = &'a CameraPose>,
    cfg: &OverlapConfig,
) -> Vec<Vec<u32>> {
    let geoms: Vec<PoseGeometry> = poses.into_iter().map(PoseGeometry::new).collect();
    (0..geoms.len())
        .map(|i| {
            (0..i as u32)
                .filter(|&j| fov_overlap(&geoms[i], &geoms[j as usize], cfg))
                .collect()
        })
        .collect()
}
