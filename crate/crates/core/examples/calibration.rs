//! How often the overlap test agrees with sampled sector intersection,
//! for each pairing mode.
//!
//! cargo run --release --example calibration [-- PAIRS]

use context_memory::eval::geometry_calibration;
use context_memory::geometry::PairingMode;
use context_memory::OverlapConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(2_000);
    for pairing in [
        PairingMode::AllPairs,
        PairingMode::CrossPair,
        PairingMode::SamePair,
    ] {
        let cfg = OverlapConfig {
            pairing,
            ..OverlapConfig::default()
        };
        let c = geometry_calibration(pairs, 0.05, &cfg, 11);
        println!(
            "{pairing:?}: agreement {:.2}%  tp {} tn {} fp {} fn {}  ({} slivers skipped)",
            100.0 * c.agreement,
            c.true_positive,
            c.true_negative,
            c.false_positive,
            c.false_negative,
            c.skipped_slivers
        );
    }
    Ok(())
}
