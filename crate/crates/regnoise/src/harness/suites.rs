//! The experiment suites and their registry.

mod coupling;
mod kernels;
mod noise;
mod sewing;
mod spde;

use super::{Ctx, ExperimentConfig, ExperimentReport};
use crate::drifts::{mollify, parse_drift, DistributionalDrift, MollifiedDrift};
use crate::error::{LabError, Result};
use crate::fbm::HurstIndex;
use crate::metrics::{scaling_exponent, Estimate, SlopeFit};

type Runner = fn(&ExperimentConfig, &Ctx, &mut ExperimentReport) -> Result<()>;

/// A runnable suite: id, one-line summary, accepted config keys, entry point.
pub struct Suite {
    pub id: &'static str,
    pub summary: &'static str,
    pub keys: &'static [&'static str],
    pub run: Runner,
}

static SUITES: &[Suite] = &[
    Suite {
        id: "fbm-covariance",
        summary: "empirical fBM covariance against the closed form on a coarse subgrid",
        keys: &["paths", "n_steps", "hurst"],
        run: noise::fbm_covariance,
    },
    Suite {
        id: "heat-kernel-laws",
        summary: "mass conservation and Chapman-Kolmogorov for periodic and Neumann kernels",
        keys: &["bc", "t_levels"],
        run: kernels::heat_kernel_laws,
    },
    Suite {
        id: "occupation-time-scaling",
        summary: "L2 norm of int_0^t f(B^H) against t for a mollified Dirac",
        keys: &["paths", "n_steps", "hurst", "drift", "alpha", "n_moll", "t_levels"],
        run: noise::occupation_time_scaling,
    },
    Suite {
        id: "exp-weight-scaling",
        summary: "exponentially weighted occupation functional against lambda",
        keys: &["paths", "n_steps", "hurst", "drift", "alpha", "n_moll", "lambda"],
        run: noise::exp_weight_scaling,
    },
    Suite {
        id: "she-lambda-scaling",
        summary: "weighted space-time functional of the stochastic convolution against lambda and t",
        keys: &["paths", "n_steps", "bc", "modes", "drift", "alpha", "n_moll", "lambda", "t_levels"],
        run: spde::she_lambda_scaling,
    },
    Suite {
        id: "sde-coupling-contraction",
        summary: "sup-gap between X and the pushed process against lambda",
        keys: &["paths", "n_steps", "hurst", "drift", "g_drift", "alpha", "n_moll", "lambda", "x0"],
        run: coupling::coupling_contraction,
    },
    Suite {
        id: "girsanov-pinsker",
        summary: "histogram TV of time-1 marginals against Girsanov/Pinsker upper bounds",
        keys: &["paths", "n_steps", "hurst", "drift", "g_drift", "alpha", "n_moll", "lambda", "x0", "bins"],
        run: coupling::girsanov_pinsker,
    },
    Suite {
        id: "sde-weak-cauchy",
        summary: "same-noise Cauchy gaps and W1 distances across mollification levels",
        keys: &["paths", "n_steps", "hurst", "contrast_hurst", "drift", "alpha", "n_moll", "x0"],
        run: coupling::sde_weak_cauchy,
    },
    Suite {
        id: "she-weak-cauchy",
        summary: "same-noise Cauchy gaps of the heat equation in the weighted norm",
        keys: &["paths", "n_steps", "bc", "modes", "drift", "alpha", "n_moll"],
        run: spde::she_weak_cauchy,
    },
    Suite {
        id: "she-coupling",
        summary: "heat-equation coupling gap against lambda and the Pinsker bound",
        keys: &["paths", "n_steps", "bc", "modes", "drift", "g_drift", "alpha", "n_moll", "lambda", "bins"],
        run: spde::she_coupling,
    },
    Suite {
        id: "min-construction",
        summary: "residual of the minimum of two solutions under refined drifts",
        keys: &["paths", "n_steps", "hurst", "drift", "n_moll", "x0"],
        run: coupling::min_construction,
    },
    Suite {
        id: "sewing-oracle",
        summary: "sewn conditional drift germ against the pathwise integral",
        keys: &["paths", "n_steps", "hurst", "drift", "alpha", "n_moll", "levels"],
        run: sewing::sewing_oracle,
    },
    Suite {
        id: "kernel-lipschitz",
        summary: "sqrt(t)-scaled Lipschitz constant of P_t f for bounded probes",
        keys: &["bc", "t_levels"],
        run: kernels::kernel_lipschitz,
    },
    Suite {
        id: "girsanov-calibration",
        summary: "forward Volterra image of the Girsanov weight against int beta",
        keys: &["n_steps", "hurst"],
        run: noise::girsanov_calibration,
    },
];

pub fn suites() -> &'static [Suite] {
    SUITES
}

pub fn find_suite(id: &str) -> Option<&'static Suite> {
    SUITES.iter().find(|s| s.id == id)
}

fn hurst(h: f64) -> Result<HurstIndex> {
    HurstIndex::new(h)
}

/// Parses a drift id and applies an optional regularity override.
fn drift(id: &str, alpha: Option<f64>) -> Result<DistributionalDrift> {
    let d = parse_drift(id)?;
    Ok(match alpha {
        Some(a) => d.with_alpha(a),
        None => d,
    })
}

fn mollified(d: &DistributionalDrift, n: u64) -> Result<MollifiedDrift> {
    mollify(d, n)
}

fn need_grid(n: usize, multiple: usize) -> Result<()> {
    if !n.is_multiple_of(multiple) {
        return Err(LabError::Config(format!("n_steps = {n} must be a multiple of {multiple}")));
    }
    Ok(())
}

/// Fits and stores a log-log slope.
fn fit(rep: &mut ExperimentReport, name: &str, xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let f = scaling_exponent(xs, ys)?;
    rep.fits.insert(name.to_string(), f.clone());
    Ok(f)
}

fn window(rep: &mut ExperimentReport, name: &str, slope: f64, lo: f64, hi: f64) {
    rep.check(name, (lo..=hi).contains(&slope), format!("slope {slope:.4}, window [{lo}, {hi}]"));
}

/// Paired differences `a − b` per member.
fn paired(a: &[f64], b: &[f64]) -> Estimate {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    Estimate::mean_of(&d)
}

/// Column `k` of member rows.
fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

/// Per-index accumulator of `x²` and `x⁴` for root-mean-square curves.
#[derive(Debug, Clone)]
struct SquareSums {
    n: usize,
    sq: Vec<f64>,
    quart: Vec<f64>,
}

impl SquareSums {
    fn new(len: usize) -> Self {
        Self { n: 0, sq: vec![0.0; len], quart: vec![0.0; len] }
    }

    fn add(&mut self, x: &[f64]) {
        self.n += 1;
        for ((s, q), v) in self.sq.iter_mut().zip(self.quart.iter_mut()).zip(x) {
            let v2 = v * v;
            *s += v2;
            *q += v2 * v2;
        }
    }

    /// `(E x²)^{1/2}` at index `k` with a delta-method standard error.
    fn rms(&self, k: usize) -> Estimate {
        let n = self.n as f64;
        let m2 = self.sq[k] / n;
        let m4 = self.quart[k] / n;
        let se_m2 = ((m4 - m2 * m2).max(0.0) / (n - 1.0).max(1.0)).sqrt();
        let value = m2.sqrt();
        Estimate { value, stderr: if value > 0.0 { se_m2 / (2.0 * value) } else { 0.0 }, n: self.n }
    }

    /// Largest RMS over the index range, as an estimate at the arg max.
    fn sup_rms(&self, range: std::ops::Range<usize>) -> (usize, Estimate) {
        let k = range.max_by(|&a, &b| self.sq[a].total_cmp(&self.sq[b])).expect("nonempty range");
        (k, self.rms(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_ids_are_unique() {
        let mut ids: Vec<&str> = suites().iter().map(|s| s.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), suites().len());
        assert!(find_suite("fbm-covariance").is_some());
    }

    #[test]
    fn square_sums_match_direct_rms() {
        let mut acc = SquareSums::new(2);
        let xs = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]];
        for x in &xs {
            acc.add(x);
        }
        let direct = Estimate::rms_of(&[1.0, 3.0, 0.5]);
        let got = acc.rms(0);
        assert!((got.value - direct.value).abs() < 1e-15);
        assert!((got.stderr - direct.stderr).abs() < 1e-12);
        assert_eq!(acc.sup_rms(0..2).0, 0);
    }
}
