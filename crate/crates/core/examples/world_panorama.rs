//! Generates a world and renders one panorama as a strip of landmark colors.
//!
//! cargo run --example world_panorama [-- SEED]

use context_memory::geometry::Bounds;
use context_memory::world::{generate_world, ColorTag, WorldSpec};
use context_memory::{CameraPose, OverlapConfig};

fn glyph(c: ColorTag) -> char {
    match c {
        ColorTag::Red => 'R',
        ColorTag::Green => 'G',
        ColorTag::Blue => 'B',
        ColorTag::Yellow => 'Y',
        ColorTag::Cyan => 'C',
        ColorTag::Magenta => 'M',
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(7);
    let world = generate_world(&WorldSpec {
        density: 4.0,
        occluder_count: 8,
        bounds: Bounds::centered(50.0),
        seed,
    })?;
    println!(
        "world {seed}: {} landmarks, {} walls",
        world.landmarks.len(),
        world.occluders.len()
    );

    let cfg = OverlapConfig::default();
    for yaw in [0.0, 90.0, 180.0, 270.0] {
        let pose = CameraPose::at_deg(0.0, 0.0, yaw);
        let pano = world.render_panorama(&pose, &cfg);
        // Columns run from the left edge of the view to the right.
        let strip: String = pano
            .columns
            .iter()
            .map(|c| match c {
                Some(h) => glyph(world.landmark(h.landmark).expect("hit id exists").color),
                None => '.',
            })
            .collect();
        println!(
            "yaw {yaw:>5}°  |{strip}|  {} visible, digest {:016x}",
            world.visible_set(&pose, &cfg).len(),
            pano.digest()
        );
    }
    Ok(())
}
