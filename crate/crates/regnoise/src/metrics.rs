//! Empirical distances and path statistics: 1-d Wasserstein, the
//! synchronous-coupling bound on `W_{‖·‖∧1}`, histogram total variation,
//! p-variation, and log-log regression.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A Monte Carlo estimate with its standard error and sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, n: 1 }
    }

    /// Sample mean and its standard error.
    pub fn mean_of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { value: f64::NAN, stderr: f64::NAN, n: 0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { value: mean, stderr, n }
    }

    /// Root mean square `(E X²)^{1/2}` with a delta-method standard error.
    pub fn rms_of(samples: &[f64]) -> Self {
        let sq: Vec<f64> = samples.iter().map(|x| x * x).collect();
        let m = Self::mean_of(&sq);
        let value = m.value.sqrt();
        let stderr = if value > 0.0 { m.stderr / (2.0 * value) } else { 0.0 };
        Self { value, stderr, n: m.n }
    }
}

/// Uniformly weighted sample of real numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    samples: Vec<f64>,
}

impl EmpiricalLaw {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(LabError::Domain("empirical law needs at least one sample".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Domain("empirical law has non-finite samples".into()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn sorted(&self) -> Vec<f64> {
        let mut s = self.samples.clone();
        s.sort_by(f64::total_cmp);
        s
    }
}

/// Exact `W_1` between two empirical laws on the real line.
///
/// For equal sizes this is the mean absolute difference of sorted samples.
/// Unequal sizes are handled by integrating `|F_a - F_b|` over the merged
/// support, which is the same distance without discarding samples.
pub fn wasserstein1_1d(a: &EmpiricalLaw, b: &EmpiricalLaw) -> f64 {
    let (sa, sb) = (a.sorted(), b.sorted());
    if sa.len() == sb.len() {
        return sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64;
    }
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut last = sa[0].min(sb[0]);
    let mut acc = 0.0;
    while i < sa.len() || j < sb.len() {
        let next = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        acc += (i as f64 / na - j as f64 / nb).abs() * (next - last);
        last = next;
        while i < sa.len() && sa[i] <= next {
            i += 1;
        }
        while j < sb.len() && sb[j] <= next {
            j += 1;
        }
    }
    acc
}

/// Sup-norm distance between two equally shaped paths.
pub fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Mean of `min(‖a - b‖_∞, 1)` over pairs that share their noise.
pub fn sync_coupling_wbound(a: &[&[f64]], b: &[&[f64]]) -> Result<Estimate> {
    if a.len() != b.len() {
        return Err(LabError::Mismatch(format!("{} paths cannot be paired with {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(LabError::Ensemble { need: 1, got: 0 });
    }
    let mut gaps = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        if x.len() != y.len() {
            return Err(LabError::Mismatch("paired paths have different lengths".into()));
        }
        gaps.push(sup_gap(x, y).min(1.0));
    }
    Ok(Estimate::mean_of(&gaps))
}

/// Histogram estimate of total variation with a multinomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub value: f64,
    pub stderr: f64,
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

/// `(1/2)Σ|p̂_i - q̂_i|` on `bins` bins spanning pooled mean ± 5 pooled sd.
pub fn tv_histogram(a: &[f64], b: &[f64], bins: usize) -> Result<TvEstimate> {
    if a.is_empty() || b.is_empty() {
        return Err(LabError::Ensemble { need: 1, got: 0 });
    }
    let all = a.iter().chain(b);
    let n = (a.len() + b.len()) as f64;
    let mean = all.clone().sum::<f64>() / n;
    let sd = (all.map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let half = if sd > 0.0 { 5.0 * sd } else { 1.0 };
    tv_histogram_range(a, b, bins, mean - half, mean + half)
}

/// Histogram TV on an explicit common range; samples outside land in the edge bins.
pub fn tv_histogram_range(a: &[f64], b: &[f64], bins: usize, lo: f64, hi: f64) -> Result<TvEstimate> {
    if bins == 0 || !(hi > lo) {
        return Err(LabError::Domain("histogram needs bins ≥ 1 and hi > lo".into()));
    }
    if a.is_empty() || b.is_empty() {
        return Err(LabError::Ensemble { need: 1, got: 0 });
    }
    let count = |xs: &[f64]| {
        let mut c = vec![0usize; bins];
        for &x in xs {
            let k = ((x - lo) / (hi - lo) * bins as f64).floor();
            let k = if k.is_nan() { 0 } else { k.clamp(0.0, (bins - 1) as f64) as usize };
            c[k] += 1;
        }
        c
    };
    let (ca, cb) = (count(a), count(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut value = 0.0;
    let mut var = 0.0;
    for k in 0..bins {
        let (p, q) = (ca[k] as f64 / na, cb[k] as f64 / nb);
        value += 0.5 * (p - q).abs();
        // Variance of the bin difference, propagated through |·| with its sign.
        var += 0.25 * (p * (1.0 - p) / na + q * (1.0 - q) / nb);
    }
    Ok(TvEstimate { value: value.min(1.0), stderr: var.sqrt(), bins, lo, hi })
}

/// Exact grid p-variation `(sup_π Σ |Δf|^p)^{1/p}` by dynamic programming.
pub fn p_variation(values: &[f64], p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(LabError::Domain(format!("p-variation needs p ≥ 1, got {p}")));
    }
    Ok(p_variation_power(values, p).powf(1.0 / p))
}

/// `sup_π Σ |Δf|^p` over partitions of the whole grid (the control `w`).
pub fn p_variation_power(values: &[f64], p: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut best = vec![0.0_f64; n];
    for j in 1..n {
        let mut m = 0.0_f64;
        for i in 0..j {
            m = m.max(best[i] + (values[j] - values[i]).abs().powf(p));
        }
        best[j] = m;
    }
    best[n - 1]
}

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub log_x: Vec<f64>,
    pub log_y: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
}

pub fn scaling_exponent(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(LabError::Mismatch("xs and ys differ in length".into()));
    }
    if xs.len() < 3 {
        return Err(LabError::Domain("a slope fit needs at least 3 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(LabError::Domain("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::Domain("abscissae must be distinct".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(SlopeFit { log_x: lx, log_y: ly, slope, intercept, stderr, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(v: &[f64]) -> EmpiricalLaw {
        EmpiricalLaw::new(v.to_vec()).unwrap()
    }

    #[test]
    fn wasserstein_basics() {
        let a = law(&[0.3, -1.0, 2.0]);
        assert_eq!(wasserstein1_1d(&a, &a), 0.0);
        assert!((wasserstein1_1d(&law(&[0.0]), &law(&[2.5])) - 2.5).abs() < 1e-15);
        // Unequal sizes: {0,1} vs {0,0,1,1} are the same law.
        assert!(wasserstein1_1d(&law(&[0.0, 1.0]), &law(&[0.0, 0.0, 1.0, 1.0])).abs() < 1e-15);
        // {0} vs {0, 1}: half the mass moves by 1.
        assert!((wasserstein1_1d(&law(&[0.0]), &law(&[0.0, 1.0])) - 0.5).abs() < 1e-15);
        assert!(EmpiricalLaw::new(vec![]).is_err());
    }

    #[test]
    fn sync_bound_basics() {
        let a = [0.0, 1.0, 2.0];
        let b = [0.0, 3.0, 2.0];
        assert_eq!(sync_coupling_wbound(&[&a], &[&a]).unwrap().value, 0.0);
        assert_eq!(sync_coupling_wbound(&[&a], &[&b]).unwrap().value, 1.0);
        assert!(sync_coupling_wbound(&[&a, &a], &[&b]).is_err());
    }

    #[test]
    fn tv_disjoint_and_identical() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert!(tv_histogram(&a, &b, 64).unwrap().value > 0.99);
        assert_eq!(tv_histogram(&a, &a, 64).unwrap().value, 0.0);
        let ab = tv_histogram(&a, &b, 16).unwrap().value;
        let ba = tv_histogram(&b, &a, 16).unwrap().value;
        assert_eq!(ab, ba);
    }

    #[test]
    fn p_variation_cases() {
        let mono: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        assert!((p_variation(&mono, 1.0).unwrap() - 19f64.sqrt()).abs() < 1e-12);
        let jump = [0.0, 0.0, 0.0, 1.5, 1.5];
        for p in [1.0, 2.0, 3.5] {
            assert!((p_variation(&jump, p).unwrap() - 1.5).abs() < 1e-12);
        }
        assert!(p_variation(&jump, 0.5).is_err());
    }

    #[test]
    fn zigzag_matches_brute_force() {
        let h = 0.7;
        let zig: Vec<f64> = (0..9).map(|i| if i % 2 == 0 { 0.0 } else { h }).collect();
        // Brute force over all 2^7 subsets of interior points.
        let brute = |p: f64| {
            let mut best = 0.0_f64;
            for mask in 0u32..(1 << 7) {
                let mut pts = vec![0usize];
                pts.extend((1..8).filter(|k| mask & (1 << (k - 1)) != 0));
                pts.push(8);
                let s: f64 = pts.windows(2).map(|w| (zig[w[1]] - zig[w[0]]).abs().powf(p)).sum();
                best = best.max(s);
            }
            best
        };
        assert!((p_variation_power(&zig, 1.0) - 8.0 * h).abs() < 1e-12);
        assert!((p_variation_power(&zig, 1.0) - brute(1.0)).abs() < 1e-12);
        assert!((p_variation_power(&zig, 2.5) - brute(2.5)).abs() < 1e-12);
    }

    #[test]
    fn slope_fit_cases() {
        let xs: Vec<f64> = (1..6).map(|i| i as f64).collect();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = scaling_exponent(&xs, &sq).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && fit.stderr < 1e-12);
        let flat = vec![3.0; 5];
        assert!(scaling_exponent(&xs, &flat).unwrap().slope.abs() < 1e-12);
        assert!(scaling_exponent(&xs[..2], &flat[..2]).is_err());
        assert!(scaling_exponent(&xs, &[1.0, -1.0, 1.0, 1.0, 1.0]).is_err());
    }
}
