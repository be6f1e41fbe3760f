//! Sample fractional Brownian motion through the Volterra representation and
//! compare the empirical variance at t = 1/2 with s^{2H}.

use regnoise::fbm::{fbm_covariance, FbmSampler, HurstIndex, VolterraKernelTable};
use std::sync::Arc;

fn main() -> regnoise::Result<()> {
    let h = HurstIndex::new(0.3)?;
    let n = 256;
    let table = Arc::new(VolterraKernelTable::new(h, n, 1.0 / n as f64)?);
    let sampler = FbmSampler::new(table);
    let seeds: Vec<u64> = (0..2000).collect();
    let paths = sampler.sample_many(1, &seeds);
    let mid = n / 2;
    let var = paths.iter().map(|p| p.values[mid].powi(2)).sum::<f64>() / paths.len() as f64;
    println!("H = {}, N = {n}, {} paths", h.value(), paths.len());
    println!("empirical Var B(1/2) = {var:.4}, exact = {:.4}", fbm_covariance(0.5, 0.5, h));
    println!("first path at t = 1: {:.4}", paths[0].values[n]);
    Ok(())
}
