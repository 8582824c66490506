//! A desk-scale roam: generated, checked segment by segment, and saved.
//!
//! cargo run --example roam_trajectory [-- OUT.jsonl]

use context_memory::geometry::Bounds;
use context_memory::trajectory::{check_constraints, generate_roam, ConstraintLimits, RoamSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let traj = generate_roam(&RoamSpec::desk(Bounds::centered(40.0), 10, 3))?;
    let report = check_constraints(&traj, &ConstraintLimits::default());
    for s in &report.segments {
        println!(
            "segment {:>2}: {:>5.2} m, net {:>5.1}°, cumulative {:>5.1}°",
            s.index,
            s.displacement,
            s.net_yaw_change.to_degrees(),
            s.cumulative_yaw_change.to_degrees()
        );
    }
    println!("{} frames, all segments pass: {}", traj.len(), report.pass);

    if let Some(path) = std::env::args().nth(1) {
        traj.save(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
