//! Distributional drifts from the catalog, their mollifications and the
//! heat-surrogate distance between two mollification levels.

use regnoise::drifts::{c_alpha_minus_distance, catalog_ids, mollify, parse_drift};
use regnoise::gaussian::besov_norm_neg;

fn main() -> regnoise::Result<()> {
    println!("catalog: {}", catalog_ids().join(", "));
    let b = parse_drift("dirac@0")?;
    let levels: Vec<f64> = (0..=12).map(|k| 2f64.powi(-k)).collect();
    println!("{}: nominal alpha {}", b.id, b.nominal_alpha);
    for n in [16, 64, 256] {
        let f = mollify(&b, n)?;
        println!(
            "  n = {n:>3}: f(0) = {:8.4}, C^-1 surrogate = {:.4}",
            f.eval1(0.0),
            besov_norm_neg(&f, -1.0, &levels)?
        );
    }
    let coarse = mollify(&b, 64)?;
    let fine = mollify(&b, 256)?;
    println!("  distance(64, 256) in C^-1.5 surrogate: {:.4e}", c_alpha_minus_distance(&coarse, &fine, -1.5, &levels)?);
    let w = parse_drift("weierstrass:gamma=0.3:deriv")?;
    println!("{}: nominal alpha {}", w.id, w.nominal_alpha);
    Ok(())
}
