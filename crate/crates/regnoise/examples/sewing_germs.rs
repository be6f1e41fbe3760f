//! Dyadic sewing of an additive germ, the quadratic germ and the conditional
//! drift germ built from one fBM path.

use regnoise::drifts::{mollify, parse_drift};
use regnoise::fbm::{FbmSampler, HurstIndex, VolterraKernelTable};
use regnoise::sewing::{additive_germ, quadratic_germ, sew, ConditionalDriftGerm};
use std::sync::Arc;

fn main() -> regnoise::Result<()> {
    let add = sew(&additive_germ(|x: f64| x.cos()), 0.0, 1.0, 6)?;
    println!("additive: limit {:.6}, exact {:.6}, exact at every level: {}", add.limit()[0], 1f64.cos() - 1.0, add.exact);
    let quad = sew(&quadratic_germ(), 0.0, 1.0, 6)?;
    println!("quadratic: limit {:.2e}", quad.limit()[0]);

    let n = 512;
    let h = HurstIndex::new(0.3)?;
    let table = Arc::new(VolterraKernelTable::new(h, n, 1.0 / n as f64)?);
    let path = Arc::new(FbmSampler::new(table.clone()).sample(1, 5));
    let f = mollify(&parse_drift("dirac@0")?, 256)?;
    let phi = vec![0.0; n + 1];
    let pathwise: f64 = (0..n).map(|i| f.eval1(path.values[i])).sum::<f64>() / n as f64;
    let germ = ConditionalDriftGerm::new(f, phi, true, path, table)?;
    let r = sew(&germ, 0.0, 1.0, 9)?;
    for (k, s) in r.sums.iter().enumerate().step_by(3) {
        println!("drift germ level {k}: {:.6}", s[0]);
    }
    println!("finest level {:.6} vs pathwise sum {pathwise:.6}, decay rate {:?}", r.limit()[0], r.decay_rate);
    Ok(())
}
