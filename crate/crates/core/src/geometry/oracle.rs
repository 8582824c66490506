//! Sampled sector-intersection oracle used to audit the ray heuristic.

use super::overlap::{OverlapConfig, PoseGeometry};
use super::pose::{CameraPose, Vec2};

/// Stratified sample layout: `rings × spokes ≥ samples`, equal-area cells.
fn layout(samples: usize) -> (usize, usize) {
    let rings = (samples as f64).sqrt().ceil() as usize;
    let spokes = samples.div_ceil(rings);
    (rings.max(1), spokes.max(1))
}

/// Counts stratified samples of `a`'s sector (radius `cfg.d_max`) that fall
/// inside `b`'s sector. Returns `(hits, total)`. Stops at the first hit when
/// `first_only` is set.
fn count_hits(
    a: &CameraPose,
    b: &CameraPose,
    cfg: &OverlapConfig,
    first_only: bool,
) -> (usize, usize) {
    let (rings, spokes) = layout(cfg.oracle_samples);
    let total = rings * spokes;
    let radius = cfg.d_max;
    let r2 = radius * radius;
    // Cheap reject: disks too far apart.
    if a.position().distance(b.position()) > 2.0 * radius {
        return (0, total);
    }
    let bg = PoseGeometry::new(b);
    let origin = a.position();
    let dirs: Vec<Vec2> = (0..spokes)
        .map(|j| {
            let theta = a.yaw() - a.half_fov() + a.fov() * (j as f64 + 0.5) / spokes as f64;
            Vec2::from_angle(theta)
        })
        .collect();
    let mut hits = 0;
    for i in 0..rings {
        let r = radius * ((i as f64 + 0.5) / rings as f64).sqrt();
        for d in &dirs {
            let p = origin + *d * r;
            if (p - bg.origin).norm_sq() <= r2 && bg.wedge_contains(p) {
                hits += 1;
                if first_only {
                    return (hits, total);
                }
            }
        }
    }
    (hits, total)
}

/// Fraction of `a`'s view sector covered by `b`'s, estimated by stratified
/// sampling. Not symmetric.
pub fn sector_overlap_fraction(a: &CameraPose, b: &CameraPose, cfg: &OverlapConfig) -> f64 {
    let (hits, total) = count_hits(a, b, cfg, false);
    hits as f64 / total as f64
}

/// True if the two view sectors (radius `cfg.d_max`) intersect.
///
/// Samples each sector and tests the samples against the other, so the
/// result is symmetric in `a` and `b`.
pub fn sector_oracle(a: &CameraPose, b: &CameraPose, cfg: &OverlapConfig) -> bool {
    count_hits(a, b, cfg, true).0 > 0 || count_hits(b, a, cfg, true).0 > 0
}
