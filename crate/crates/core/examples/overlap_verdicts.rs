//! The overlap test on a few hand-picked pairs, with its witnesses.

use context_memory::geometry::{fov_overlap_heuristic, PairingMode};
use context_memory::{CameraPose, OverlapConfig};

fn main() {
    let query = CameraPose::at_deg(0.0, 0.0, 0.0);
    let pairs = [
        ("facing each other", CameraPose::at_deg(5.0, 0.0, 180.0)),
        ("side by side", CameraPose::at_deg(0.0, 2.0, 0.0)),
        ("further along", CameraPose::at_deg(5.0, 0.0, 0.0)),
        ("back to back", CameraPose::at_deg(-1.0, 0.0, 180.0)),
        ("far away", CameraPose::at_deg(100.0, 0.0, 180.0)),
    ];
    for pairing in [PairingMode::AllPairs, PairingMode::CrossPair] {
        let cfg = OverlapConfig {
            pairing,
            ..OverlapConfig::default()
        };
        println!("{pairing:?}");
        for (label, cand) in &pairs {
            let v = fov_overlap_heuristic(&query, cand, &cfg);
            let reason = v
                .reject_reason
                .map(|r| format!(" ({r:?})"))
                .unwrap_or_default();
            println!("  {label:<18} overlaps={}{reason}", v.overlaps);
            for w in &v.intersections {
                println!(
                    "    {:?} at ({:.2}, {:.2}), {:.2} m",
                    w.kind, w.point.x, w.point.y, w.distance
                );
            }
        }
    }
}
