//! Builds a memory store along a loop, saves it in both snapshot formats,
//! and reloads it.

use context_memory::store::{MemoryStore, SnapshotFormat};
use context_memory::trajectory::{loop_roam, LoopSpec};
use context_memory::OverlapConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let traj = loop_roam(&LoopSpec::default())?;
    let store = MemoryStore::from_poses(OverlapConfig::default(), traj.poses())?;
    println!(
        "{} frames, {} co-visibility edges",
        store.len(),
        store.edge_count()
    );

    let dir = std::env::temp_dir();
    for (format, name) in [
        (SnapshotFormat::Jsonl, "store.jsonl"),
        (SnapshotFormat::Binary, "store.bin"),
    ] {
        let path = dir.join(name);
        store.snapshot(&path, format)?;
        let back = MemoryStore::load(&path)?;
        let same = back.records() == store.records() && back.edges().eq(store.edges());
        println!(
            "{format:?}: {} bytes, identical after reload: {same}",
            std::fs::metadata(&path)?.len()
        );
    }
    Ok(())
}
