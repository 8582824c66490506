use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{default_fov, CameraPose, OverlapConfig};
use crate::rng::keyed_rng;
use crate::store::{naive_edges, FrameRecord, MemoryStore, PruneStats};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchLayout {
    /// Uniform positions over a `world_size` square.
    #[default]
    Uniform,
    /// Every frame inside one grid cell: pruning cannot help.
    SingleCell,
}

/// Naive scan vs grid pruning over one random store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_frames: usize,
    pub queries: usize,
    pub world_size: f64,
    pub layout: BenchLayout,
    pub naive_build_pairs: u64,
    pub grid_build: PruneStats,
    /// Heuristic evaluations in the grid build over naive pairs.
    pub build_evaluated_fraction: f64,
    pub naive_query_pairs: u64,
    pub grid_query: PruneStats,
    pub build_naive_ms: f64,
    pub build_grid_ms: f64,
    pub query_naive_ms: f64,
    pub query_grid_ms: f64,
    pub build_speedup: f64,
    pub query_speedup: f64,
    /// Grid and naive edges and query results matched exactly.
    pub results_equal: bool,
}

fn random_pose(rng: &mut impl Rng, layout: BenchLayout, size: f64, cell: f64) -> CameraPose {
    let span = match layout {
        BenchLayout::Uniform => size,
        BenchLayout::SingleCell => cell * 0.999,
    };
    CameraPose::new(
        rng.random_range(0.0..span),
        rng.random_range(0.0..span),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        default_fov(),
    )
    .expect("finite pose")
}

/// Query passes are short, so each is timed several times and the fastest
/// kept.
const QUERY_REPEATS: usize = 5;

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn best_of(n: usize, mut f: impl FnMut()) -> f64 {
    (0..n)
        .map(|_| {
            let t = Instant::now();
            f();
            ms(t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Builds a store of `n_frames` random poses both ways, then answers
/// `queries` random targets both ways.
pub fn bench_retrieval(
    n_frames: usize,
    queries: usize,
    world_size: f64,
    layout: BenchLayout,
    cfg: &OverlapConfig,
    seed: u64,
) -> Result<BenchReport, EvalError> {
    if n_frames < 100 {
        return Err(EvalError::BenchTooSmall(n_frames));
    }
    cfg.validate()?;
    let mut rng = keyed_rng(seed, 0);
    let poses: Vec<CameraPose> = (0..n_frames)
        .map(|_| random_pose(&mut rng, layout, world_size, cfg.d_max))
        .collect();
    let targets: Vec<CameraPose> = (0..queries)
        .map(|_| random_pose(&mut rng, layout, world_size, cfg.d_max))
        .collect();

    let t = Instant::now();
    let mut store = MemoryStore::new(*cfg)?;
    for (i, p) in poses.iter().enumerate() {
        store.append_frame(FrameRecord::new(i as u64, *p))?;
    }
    let build_grid_ms = ms(t);

    let t = Instant::now();
    let naive = naive_edges(poses.iter(), cfg);
    let build_naive_ms = ms(t);
    let mut equal = (0..n_frames as u32).all(|i| store.edges_of(i) == naive[i as usize].as_slice());

    let mut grid_query = PruneStats::default();
    let mut grid_results = Vec::new();
    let query_grid_ms = best_of(QUERY_REPEATS, || {
        grid_query = PruneStats::default();
        grid_results = targets
            .iter()
            .map(|q| {
                let (ids, s) = store.query_covisible_prefix(q, n_frames as u32);
                grid_query += s;
                ids
            })
            .collect();
    });

    let mut naive_results = Vec::new();
    let query_naive_ms = best_of(QUERY_REPEATS, || {
        naive_results = targets
            .iter()
            .map(|q| store.naive_query_covisible(q))
            .collect();
    });
    equal &= grid_results == naive_results;

    let naive_build_pairs = (n_frames as u64) * (n_frames as u64 - 1) / 2;
    Ok(BenchReport {
        n_frames,
        queries,
        world_size,
        layout,
        naive_build_pairs,
        grid_build: store.build_stats(),
        build_evaluated_fraction: store.build_stats().evaluated as f64 / naive_build_pairs as f64,
        naive_query_pairs: (queries * n_frames) as u64,
        grid_query,
        build_naive_ms,
        build_grid_ms,
        query_naive_ms,
        query_grid_ms,
        build_speedup: build_naive_ms / build_grid_ms.max(1e-9),
        query_speedup: query_naive_ms / query_grid_ms.max(1e-9),
        results_equal: equal,
    })
}
