//! Stability of the SDE in its initial condition and drift: W1 distance of
//! time-1 marginals shrinks as the perturbation halves.

use std::sync::Arc;

use regnoise::drifts::{mollify, parse_drift};
use regnoise::fbm::{FbmSampler, HurstIndex, VolterraKernelTable};
use regnoise::metrics::{wasserstein1_1d, EmpiricalLaw};
use regnoise::sde::solve_euler;

const PATHS: u64 = 400;
const N: usize = 512;

fn terminal_law(x0: f64, n_moll: u64, sampler: &FbmSampler) -> EmpiricalLaw {
    let b = mollify(&parse_drift("dirac@0").unwrap(), n_moll).unwrap();
    let xs = (0..PATHS)
        .map(|s| solve_euler(&[x0], &b, &Arc::new(sampler.sample(1, 1000 + s))).unwrap().terminal()[0])
        .collect();
    EmpiricalLaw::new(xs).unwrap()
}

fn sampler() -> FbmSampler {
    let h = HurstIndex::new(0.25).unwrap();
    FbmSampler::new(Arc::new(VolterraKernelTable::new(h, N, 1.0 / N as f64).unwrap()))
}

#[test]
fn w1_decreases_as_initial_gap_halves() {
    let s = sampler();
    let base = terminal_law(0.0, 64, &s);
    let w: Vec<f64> = [0.4, 0.2, 0.1, 0.05].iter().map(|&d| wasserstein1_1d(&base, &terminal_law(d, 64, &s))).collect();
    for pair in w.windows(2) {
        assert!(pair[1] < pair[0], "{w:?}");
    }
}

#[test]
fn w1_decreases_as_drift_refines() {
    let s = sampler();
    let laws: Vec<EmpiricalLaw> = [8, 16, 32, 64].iter().map(|&n| terminal_law(0.0, n, &s)).collect();
    let w: Vec<f64> = laws.windows(2).map(|p| wasserstein1_1d(&p[0], &p[1])).collect();
    for pair in w.windows(2) {
        assert!(pair[1] < pair[0], "{w:?}");
    }
}
