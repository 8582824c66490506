//! Mean coverage of every retrieval strategy on the revisit fixtures:
//! rotate 180° and back, rotate 360° and back, and a two-lap loop, on five
//! seeded worlds.
//!
//! cargo run --release --example strategy_ladder [-- --fill spread|uniform|none] [--csv series.csv]

use context_memory::eval::{compare_strategies, revisit_suite, EvalSettings};
use context_memory::retrieval::DedupFill;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let flag = |name: &str| {
        args.iter()
            .position(|a| a == name)
            .and_then(|i| args.get(i + 1))
    };

    let mut settings = EvalSettings::default();
    if let Some(fill) = flag("--fill") {
        settings.retrieval.dedup_fill = fill.parse::<DedupFill>()?;
    }
    let cases = revisit_suite(&[3, 5, 7, 11, 13])?;
    let run = compare_strategies(&cases, &settings)?;
    print!("{}", run.report.to_table());

    if let Some(path) = flag("--csv") {
        std::fs::write(path, run.series_csv())?;
        eprintln!("wrote {} rows to {path}", run.series.len());
    }
    Ok(())
}
