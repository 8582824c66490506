//! Grid-pruned vs naive co-visibility: edge build and 1,000 queries over a
//! random store.
//!
//! cargo run --release --example grid_bench [-- N [single-cell]]

use context_memory::eval::{bench_retrieval, BenchLayout};
use context_memory::OverlapConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args
        .next()
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(10_000);
    let layout = match args.next().as_deref() {
        Some("single-cell") => BenchLayout::SingleCell,
        _ => BenchLayout::Uniform,
    };
    let r = bench_retrieval(n, 1000, 200.0, layout, &OverlapConfig::default(), 42)?;
    println!(
        "frames {}  layout {:?}  results equal: {}",
        r.n_frames, r.layout, r.results_equal
    );
    println!(
        "build: naive {} pairs in {:.1} ms; grid gathered {} evaluated {} ({:.2}% of naive) in {:.1} ms",
        r.naive_build_pairs,
        r.build_naive_ms,
        r.grid_build.gathered,
        r.grid_build.evaluated,
        100.0 * r.build_evaluated_fraction,
        r.build_grid_ms
    );
    println!(
        "{} queries: naive {:.1} ms, grid {:.1} ms, speedup {:.1}x",
        r.queries, r.query_naive_ms, r.query_grid_ms, r.query_speedup
    );
    Ok(())
}
