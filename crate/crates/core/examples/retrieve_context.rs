//! Streams a two-lap loop one segment at a time and prints what each
//! strategy retrieves for the last frame of every fifth segment.

use context_memory::retrieval::{retrieve_context_detailed, RetrievalConfig, StrategyKind};
use context_memory::store::{FrameRecord, MemoryStore};
use context_memory::trajectory::{loop_roam, LoopSpec};
use context_memory::OverlapConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let traj = loop_roam(&LoopSpec::default())?;
    let frames = traj.frames();
    let seg = traj.segment_len();
    for strategy in [
        StrategyKind::RecentWindow,
        StrategyKind::FovNonAdjFarSpaceTime,
    ] {
        let cfg = RetrievalConfig {
            k: 6,
            far_slots: 1,
            ..RetrievalConfig::with_strategy(strategy)
        };
        println!("{strategy}");
        let mut store = MemoryStore::new(OverlapConfig::default())?;
        store.append_frame(FrameRecord::new(0, frames[0].pose))?;
        for (i, chunk) in frames[1..].chunks(seg - 1).enumerate() {
            let target = chunk.last().expect("non-empty chunk").pose;
            let out = retrieve_context_detailed(&store, &target, &cfg, None)?;
            let picks: Vec<String> = out
                .context
                .iter()
                .map(|s| format!("{}:{:?}", s.id, s.stage))
                .collect();
            if i % 5 == 0 {
                println!("  @{:>4}  {}", store.len(), picks.join(" "));
            }
            for f in chunk {
                store.append_frame(FrameRecord::new(f.t, f.pose))?;
            }
        }
    }
    Ok(())
}
