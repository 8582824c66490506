//! Training examples drawn from a recorded roam: a segment to predict and
//! its context, sometimes just the preceding frame.

use context_memory::geometry::Bounds;
use context_memory::retrieval::{RetrievalConfig, TrainingSampler};
use context_memory::trajectory::{generate_roam, RoamSpec};
use context_memory::OverlapConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let traj = generate_roam(&RoamSpec::desk(Bounds::centered(30.0), 10, 5))?;
    let sampler =
        TrainingSampler::new(&traj, OverlapConfig::default(), RetrievalConfig::default())?;
    let mut recent_only = 0;
    for draw in 0..200 {
        let s = sampler.sample(draw);
        recent_only += s.recent_only as usize;
        if draw < 6 {
            println!(
                "draw {draw}: predict {:?}, context {:?}{}",
                s.segment,
                s.context_ids(),
                if s.recent_only { " (recent only)" } else { "" }
            );
        }
    }
    println!("{recent_only}/200 draws used only the preceding frame");
    Ok(())
}
