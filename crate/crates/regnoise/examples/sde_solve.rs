//! Euler scheme for dX = b(X) dt + dB^H with a mollified Dirac drift, and the
//! same-noise gap between two mollification levels.

use regnoise::drifts::{mollify, parse_drift};
use regnoise::fbm::{sample_fbm, HurstIndex};
use regnoise::metrics::sup_gap;
use regnoise::sde::solve_euler;
use std::sync::Arc;

fn main() -> regnoise::Result<()> {
    let h = HurstIndex::new(0.25)?;
    let n = 1024;
    let b = parse_drift("dirac@0")?;
    for seed in 0..3 {
        let noise = Arc::new(sample_fbm(n, 1.0 / n as f64, h, 1, seed)?);
        let coarse = solve_euler(&[0.0], &mollify(&b, 32)?, &noise)?;
        let fine = solve_euler(&[0.0], &mollify(&b, 64)?, &noise)?;
        println!(
            "seed {seed}: X_1 = {:+.4} (n = 64), sup gap to n = 32: {:.4}, reconstruction error {:.1e}",
            fine.terminal()[0],
            sup_gap(&coarse.x, &fine.x),
            fine.reconstruction_error()
        );
    }
    Ok(())
}
