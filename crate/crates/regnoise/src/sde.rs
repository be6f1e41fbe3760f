//! Euler solver for `dX = b_n(X) dt + dB^H`, the generalized coupling
//! `dỸ = g(Ỹ) dt + λ(X − Ỹ) dt + dB^H`, the d = 1 min-construction, and the
//! exponentially weighted occupation functionals.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::drifts::{admissible_weak, mollify, DistributionalDrift, MollifiedDrift};
use crate::error::{LabError, Result};
use crate::fbm::{girsanov_sup_constant, girsanov_v, pinsker_tv_bound, FbmPath, HurstIndex};
use crate::metrics::{sup_gap, tv_histogram, Estimate, TvEstimate};

/// Parameters of one SDE run.
#[derive(Debug, Clone)]
pub struct SdeConfig {
    pub x0: Vec<f64>,
    pub drift: DistributionalDrift,
    pub n_moll: u64,
    pub hurst: HurstIndex,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
}

impl SdeConfig {
    pub fn mollified(&self) -> Result<MollifiedDrift> {
        mollify(&self.drift, self.n_moll)
    }

    /// Warnings for supercritical parameters; runs are still allowed.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !admissible_weak(self.drift.nominal_alpha, self.hurst) {
            w.push(format!(
                "alpha = {} violates alpha > 1/2 - 1/(2H) = {} (supercritical contrast run)",
                self.drift.nominal_alpha,
                0.5 - 1.0 / (2.0 * self.hurst.value())
            ));
        }
        w
    }

    pub fn solve(&self, fbm: &Arc<FbmPath>) -> Result<SamplePath> {
        if fbm.n_steps() != self.n_steps || (fbm.dt - self.dt).abs() > 1e-15 * self.dt || fbm.hurst != self.hurst {
            return Err(LabError::Mismatch("fBM grid does not match the SDE configuration".into()));
        }
        solve_euler(&self.x0, &self.mollified()?, fbm)
    }
}

/// A solution path together with its noise.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub dt: f64,
    pub dim: usize,
    pub x0: Vec<f64>,
    /// `(N+1) × d`, step-major.
    pub x: Vec<f64>,
    /// `ψ = X − x₀ − B^H`, same layout.
    pub psi: Vec<f64>,
    pub fbm: Arc<FbmPath>,
}

impl SamplePath {
    pub fn n_steps(&self) -> usize {
        self.x.len() / self.dim - 1
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.n_steps())
    }

    /// Largest deviation from `x = x₀ + ψ + B^H` (zero by construction).
    pub fn reconstruction_error(&self) -> f64 {
        let d = self.dim;
        self.x
            .iter()
            .enumerate()
            .map(|(k, x)| (x - (self.x0[k % d] + self.psi[k] + self.fbm.values[k])).abs())
            .fold(0.0, f64::max)
    }

    fn from_psi(x0: &[f64], psi: Vec<f64>, fbm: &Arc<FbmPath>) -> Self {
        let d = x0.len();
        let x = psi.iter().enumerate().map(|(k, p)| x0[k % d] + p + fbm.values[k]).collect();
        Self { dt: fbm.dt, dim: d, x0: x0.to_vec(), x, psi, fbm: fbm.clone() }
    }
}

fn check_noise(x0: &[f64], fbm: &FbmPath) -> Result<()> {
    if x0.len() != fbm.dim {
        return Err(LabError::Mismatch(format!("x0 has dimension {} but the noise has {}", x0.len(), fbm.dim)));
    }
    Ok(())
}

/// Left-point Euler: `ψ_{i+1} = ψ_i + b_n(X_i) dt`, `X = x₀ + ψ + B^H`.
pub fn solve_euler(x0: &[f64], drift: &MollifiedDrift, fbm: &Arc<FbmPath>) -> Result<SamplePath> {
    check_noise(x0, fbm)?;
    if drift.dim() != fbm.dim {
        return Err(LabError::Mismatch("drift and noise dimensions differ".into()));
    }
    let d = fbm.dim;
    let n = fbm.n_steps();
    let dt = fbm.dt;
    let mut psi = vec![0.0; (n + 1) * d];
    let mut x = x0.to_vec();
    let mut b = vec![0.0; d];
    for i in 0..n {
        if d == 1 {
            b[0] = drift.eval1(x[0]);
        } else {
            drift.eval(&x, &mut b);
        }
        for c in 0..d {
            let p = psi[i * d + c] + b[c] * dt;
            psi[(i + 1) * d + c] = p;
            x[c] = x0[c] + p + fbm.values[(i + 1) * d + c];
            if !x[c].is_finite() {
                return Err(LabError::NonFinite { step: i + 1, node: None });
            }
        }
    }
    Ok(SamplePath::from_psi(x0, psi, fbm))
}

/// Time stepping for the λ-pushed equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingScheme {
    /// Explicit Euler with the push at the left point; needs `λ dt < 1/2`.
    Euler,
    /// Integrating factor `e^{−λt}` on `Ỹ − X`; unconditionally stable.
    Exponential,
}

#[derive(Debug, Clone, Copy)]
pub struct CouplingOptions {
    pub scheme: CouplingScheme,
    /// Computing `v` costs O(N²) per run.
    pub compute_v: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self { scheme: CouplingScheme::Euler, compute_v: true }
    }
}

/// `X` under `b_n`, `Y` under `g`, and `Ỹ` under `g` plus the λ-push, all on one noise.
#[derive(Debug, Clone)]
pub struct CouplingRun {
    pub x: SamplePath,
    pub y: SamplePath,
    pub y_tilde: SamplePath,
    pub lambda: f64,
    /// `B̃ = B^H + λ∫_0^t (X − Ỹ) dr` on the grid (left-point sums).
    pub b_tilde: Vec<f64>,
    /// Girsanov weight of the shift `β = λ(X − Ỹ)`.
    pub v: Option<Vec<f64>>,
}

impl CouplingRun {
    pub fn sup_gap(&self) -> f64 {
        sup_gap(&self.x.x, &self.y_tilde.x)
    }
}

/// Builds the generalized coupling on a shared noise path.
pub fn coupled_pair(
    b: &MollifiedDrift,
    x0: &[f64],
    g: &MollifiedDrift,
    y0: &[f64],
    lambda: f64,
    fbm: &Arc<FbmPath>,
    opts: CouplingOptions,
) -> Result<CouplingRun> {
    if !(lambda > 1.0) {
        return Err(LabError::Domain(format!("the push needs lambda > 1, got {lambda}")));
    }
    let dt = fbm.dt;
    if opts.scheme == CouplingScheme::Euler && lambda * dt >= 0.5 {
        return Err(LabError::Stiffness { product: lambda * dt });
    }
    check_noise(y0, fbm)?;
    let x = solve_euler(x0, b, fbm)?;
    let y = solve_euler(y0, g, fbm)?;
    let d = fbm.dim;
    let n = fbm.n_steps();
    let mut psi = vec![0.0; (n + 1) * d];
    let mut yt = y0.to_vec();
    let mut values = Vec::with_capacity((n + 1) * d);
    values.extend_from_slice(y0);
    let mut gv = vec![0.0; d];
    let mut bv = vec![0.0; d];
    let decay = (-lambda * dt).exp();
    let gain = (1.0 - decay) / lambda;
    for i in 0..n {
        let xi = x.at(i);
        if d == 1 {
            gv[0] = g.eval1(yt[0]);
        } else {
            g.eval(&yt, &mut gv);
        }
        for c in 0..d {
            let next = match opts.scheme {
                CouplingScheme::Euler => {
                    let p = psi[i * d + c] + (gv[c] + lambda * (xi[c] - yt[c])) * dt;
                    psi[(i + 1) * d + c] = p;
                    y0[c] + p + fbm.values[(i + 1) * d + c]
                }
                CouplingScheme::Exponential => {
                    if c == 0 {
                        if d == 1 {
                            bv[0] = b.eval1(xi[0]);
                        } else {
                            b.eval(xi, &mut bv);
                        }
                    }
                    let gap = decay * (yt[c] - xi[c]) + gain * (gv[c] - bv[c]);
                    let value = x.at(i + 1)[c] + gap;
                    psi[(i + 1) * d + c] = value - y0[c] - fbm.values[(i + 1) * d + c];
                    value
                }
            };
            if !next.is_finite() {
                return Err(LabError::NonFinite { step: i + 1, node: None });
            }
            yt[c] = next;
        }
        values.extend_from_slice(&yt);
    }
    let y_tilde = match opts.scheme {
        CouplingScheme::Euler => SamplePath::from_psi(y0, psi, fbm),
        CouplingScheme::Exponential => {
            SamplePath { dt, dim: d, x0: y0.to_vec(), x: values, psi, fbm: fbm.clone() }
        }
    };
    let beta: Vec<f64> = x.x.iter().zip(&y_tilde.x).map(|(a, b)| lambda * (a - b)).collect();
    let mut b_tilde = fbm.values.clone();
    let mut acc = vec![0.0; d];
    for i in 1..=n {
        for c in 0..d {
            acc[c] += beta[(i - 1) * d + c] * dt;
            b_tilde[i * d + c] += acc[c];
        }
    }
    let v = if opts.compute_v { Some(girsanov_v(&beta, d, dt, fbm.hurst)?) } else { None };
    Ok(CouplingRun { x, y, y_tilde, lambda, b_tilde, v })
}

/// Upper and lower total-variation estimates for one λ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GirsanovReport {
    pub lambda: f64,
    pub runs: usize,
    /// `(1/2)(∫ E|v|²)^{1/2}` when the runs carry `v`.
    pub pinsker: Option<Estimate>,
    /// `(1/2) C_v λ ‖sup|X − Ỹ|‖_{L2}`.
    pub shaped: Estimate,
    pub shaped_constant: f64,
    /// Histogram TV between the time-1 laws of `Y` and `Ỹ` (first component).
    pub histogram_tv: TvEstimate,
    /// Lower estimate ≤ every upper bound up to 2 combined standard errors.
    pub lower_le_upper: bool,
    /// Largest `|X − Ỹ|` seen, for the localization remark.
    pub max_gap: f64,
}

pub fn girsanov_tv_report(runs: &[CouplingRun], bins: usize) -> Result<GirsanovReport> {
    if runs.len() < 100 {
        return Err(LabError::Ensemble { need: 100, got: runs.len() });
    }
    let lambda = runs[0].lambda;
    if runs.iter().any(|r| r.lambda != lambda) {
        return Err(LabError::Mismatch("runs mix different lambda values".into()));
    }
    let hurst = runs[0].x.fbm.hurst;
    let dim = runs[0].x.dim;
    let dt = runs[0].x.dt;
    let pinsker = if runs.iter().all(|r| r.v.is_some()) {
        let vs: Vec<&[f64]> = runs.iter().map(|r| r.v.as_deref().unwrap()).collect();
        Some(pinsker_tv_bound(&vs, dim, dt)?)
    } else {
        None
    };
    let gaps: Vec<f64> = runs.iter().map(CouplingRun::sup_gap).collect();
    let rms = Estimate::rms_of(&gaps);
    let c_v = girsanov_sup_constant(hurst)?;
    let factor = 0.5 * c_v * lambda;
    let shaped = Estimate { value: factor * rms.value, stderr: factor * rms.stderr, n: rms.n };
    let y1: Vec<f64> = runs.iter().map(|r| r.y.terminal()[0]).collect();
    let yt1: Vec<f64> = runs.iter().map(|r| r.y_tilde.terminal()[0]).collect();
    let histogram_tv = tv_histogram(&y1, &yt1, bins)?;
    let mut lower_le_upper = true;
    for upper in std::iter::once(shaped).chain(pinsker) {
        let slack = 2.0 * (upper.stderr.powi(2) + histogram_tv.stderr.powi(2)).sqrt();
        lower_le_upper &= histogram_tv.value <= upper.value + slack;
    }
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok(GirsanovReport { lambda, runs: runs.len(), pinsker, shaped, shaped_constant: c_v, histogram_tv, lower_le_upper, max_gap })
}

/// `Y = X¹ ∧ X²` for two d = 1 solutions on the same noise.
pub fn min_solution(x1: &SamplePath, x2: &SamplePath) -> Result<SamplePath> {
    if x1.dim != 1 || x2.dim != 1 {
        return Err(LabError::Unsupported("the min-construction is one-dimensional".into()));
    }
    let shared = Arc::ptr_eq(&x1.fbm, &x2.fbm) || x1.fbm.driver == x2.fbm.driver;
    if !shared || x1.x.len() != x2.x.len() {
        return Err(LabError::Mismatch("min-construction needs both paths on one noise".into()));
    }
    let x: Vec<f64> = x1.x.iter().zip(&x2.x).map(|(a, b)| a.min(*b)).collect();
    let x0 = vec![x[0]];
    let psi = x.iter().zip(&x1.fbm.values).map(|(y, b)| y - x0[0] - b).collect();
    Ok(SamplePath { dt: x1.dt, dim: 1, x0, x, psi, fbm: x1.fbm.clone() })
}

/// `sup_t |∫_0^t g(X_r) dr − ψ_t|` with left-point sums.
pub fn residual(path: &SamplePath, g: &MollifiedDrift) -> f64 {
    let d = path.dim;
    let mut acc = vec![0.0; d];
    let mut gv = vec![0.0; d];
    let mut worst = 0.0_f64;
    for i in 1..=path.n_steps() {
        g.eval(path.at(i - 1), &mut gv);
        let mut r2 = 0.0;
        for c in 0..d {
            acc[c] += gv[c] * path.dt;
            r2 += (acc[c] - path.psi[i * d + c]).powi(2);
        }
        worst = worst.max(r2.sqrt());
    }
    worst
}

/// `max_{s<t} ‖ψ_t − ψ_s‖_{L_m} / (t − s)^κ` over pairs of a dyadic sub-grid
/// with at most `2^7` cells.
pub fn holder_seminorm_lm(psi: &[&[f64]], dim: usize, dt: f64, kappa: f64, m: f64) -> Result<f64> {
    if psi.len() < 100 {
        return Err(LabError::Ensemble { need: 100, got: psi.len() });
    }
    if m < 2.0 {
        return Err(LabError::Domain("moment order must be at least 2".into()));
    }
    let n = psi[0].len() / dim - 1;
    let cells = n.min(128);
    let stride = n / cells;
    let mut best = 0.0_f64;
    for a in 0..cells {
        for b in a + 1..=cells {
            let (i, j) = (a * stride, b * stride);
            let moment: f64 = psi
                .iter()
                .map(|p| {
                    let r2: f64 = (0..dim).map(|c| (p[j * dim + c] - p[i * dim + c]).powi(2)).sum();
                    r2.sqrt().powf(m)
                })
                .sum::<f64>()
                / psi.len() as f64;
            best = best.max(moment.powf(1.0 / m) / ((j - i) as f64 * dt).powf(kappa));
        }
    }
    Ok(best)
}

/// Shift `φ` added to the noise inside the functional.
#[derive(Debug, Clone, Copy)]
pub enum Shift<'a> {
    Constant(&'a [f64]),
    /// `(N+1) × d` node values.
    Path(&'a [f64]),
}

impl Shift<'_> {
    #[inline]
    fn at(&self, i: usize, c: usize, d: usize) -> f64 {
        match self {
            Shift::Constant(v) => v[c],
            Shift::Path(p) => p[i * d + c],
        }
    }
}

/// `∫_s^t e^{−λ(t−r)} f(B^H_r + φ_r) dr` by left-point quadrature with exact
/// weights at the nodes; `s_idx ≤ t_idx` are grid indices.
pub fn exp_weighted_functional(
    f: &MollifiedDrift,
    phi: Shift<'_>,
    lambda: f64,
    fbm: &FbmPath,
    s_idx: usize,
    t_idx: usize,
) -> Result<Vec<f64>> {
    if s_idx > t_idx || t_idx > fbm.n_steps() {
        return Err(LabError::Domain("exp-weighted functional needs s ≤ t on the grid".into()));
    }
    let d = fbm.dim;
    let dt = fbm.dt;
    let mut out = vec![0.0; d];
    let mut point = vec![0.0; d];
    let mut fv = vec![0.0; d];
    for j in s_idx..t_idx {
        for (c, p) in point.iter_mut().enumerate() {
            *p = fbm.values[j * d + c] + phi.at(j, c, d);
        }
        f.eval(&point, &mut fv);
        let w = (-lambda * (t_idx - j) as f64 * dt).exp() * dt;
        for c in 0..d {
            out[c] += w * fv[c];
        }
    }
    Ok(out)
}

/// `I_k = ∫_0^{t_k} e^{−λ(t_k − r)} f(B^H_r + φ) dr` for every node, d = 1,
/// by the recursion `I_{k+1} = e^{−λ dt}(I_k + f_k dt)`.
pub fn exp_weighted_running(f: &MollifiedDrift, phi: f64, lambda: f64, path: &[f64], dt: f64) -> Vec<f64> {
    let decay = (-lambda * dt).exp();
    let mut out = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    out.push(0.0);
    for &b in &path[..path.len() - 1] {
        acc = decay * (acc + f.eval1(b + phi) * dt);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drifts::{parse_drift, SmoothFn};
    use crate::fbm::{FbmSampler, VolterraKernelTable};

    fn noise(h: f64, n: usize, seed: u64) -> Arc<FbmPath> {
        let hurst = HurstIndex::new(h).unwrap();
        let table = Arc::new(VolterraKernelTable::new(hurst, n, 1.0 / n as f64).unwrap());
        Arc::new(FbmSampler::new(table).sample(1, seed))
    }

    fn drift(id: &str, n: u64) -> MollifiedDrift {
        mollify(&parse_drift(id).unwrap(), n).unwrap()
    }

    #[test]
    fn zero_and_constant_drifts() {
        let fbm = noise(0.3, 128, 1);
        let zero = solve_euler(&[0.5], &drift("smooth:zero", 1), &fbm).unwrap();
        for (k, x) in zero.x.iter().enumerate() {
            assert_eq!(*x, 0.5 + fbm.values[k]);
        }
        let c = solve_euler(&[0.0], &drift("smooth:const=2", 1), &fbm).unwrap();
        for i in 0..=128 {
            assert!((c.psi[i] - 2.0 * i as f64 / 128.0).abs() < 1e-13);
        }
        assert_eq!(c.reconstruction_error(), 0.0);
    }

    #[test]
    fn identical_drifts_give_identical_coupling() {
        let fbm = noise(0.25, 256, 3);
        let b = drift("dirac@0:mass=1", 64);
        let run = coupled_pair(&b, &[0.0], &b, &[0.0], 16.0, &fbm, CouplingOptions::default()).unwrap();
        assert_eq!(run.x.x, run.y_tilde.x);
        assert!(run.v.as_ref().unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stiffness_guard_and_lambda_precondition() {
        let fbm = noise(0.25, 16, 3);
        let b = drift("dirac@0:mass=1", 64);
        let err = coupled_pair(&b, &[0.0], &b, &[0.0], 10.0, &fbm, CouplingOptions::default());
        assert!(matches!(err, Err(LabError::Stiffness { .. })));
        let ok = coupled_pair(&b, &[0.0], &b, &[0.0], 10.0, &fbm, CouplingOptions { scheme: CouplingScheme::Exponential, compute_v: false });
        assert!(ok.is_ok());
        assert!(coupled_pair(&b, &[0.0], &b, &[0.0], 1.0, &fbm, CouplingOptions::default()).is_err());
    }

    #[test]
    fn transformed_noise_bound_and_schemes_agree() {
        let fbm = noise(0.25, 1024, 5);
        let b = drift("dirac@0:mass=1", 64);
        let g = drift("dirac@0:mass=1", 16);
        let lambda = 32.0;
        let euler = coupled_pair(&b, &[0.0], &g, &[0.2], lambda, &fbm, CouplingOptions::default()).unwrap();
        let gap = euler.sup_gap();
        let tilde_dev = sup_gap(&euler.b_tilde, &fbm.values);
        assert!(tilde_dev <= lambda * 1.0 * gap + 1e-12);
        let expo = coupled_pair(&b, &[0.0], &g, &[0.2], lambda, &fbm, CouplingOptions { scheme: CouplingScheme::Exponential, compute_v: false }).unwrap();
        let diff = sup_gap(&euler.y_tilde.x, &expo.y_tilde.x);
        assert!(diff < 0.05, "schemes differ by {diff}");
    }

    #[test]
    fn min_solution_cases() {
        let fbm = noise(0.25, 128, 2);
        let b = drift("measure:uniform[0,0.5]", 64);
        let x1 = solve_euler(&[0.0], &b, &fbm).unwrap();
        let x2 = solve_euler(&[0.3], &b, &fbm).unwrap();
        let m = min_solution(&x1, &x1).unwrap();
        assert_eq!(m.x, x1.x);
        let lo = min_solution(&x1, &x2).unwrap();
        if x1.x.iter().zip(&x2.x).all(|(a, b)| a <= b) {
            assert_eq!(lo.x, x1.x);
        }
        let other = solve_euler(&[0.0], &b, &noise(0.25, 128, 99)).unwrap();
        assert!(min_solution(&x1, &other).is_err());
    }

    #[test]
    fn residual_cases() {
        let fbm = noise(0.25, 256, 4);
        let g = drift("smooth:sin:amp=1:freq=2", 1);
        let p = solve_euler(&[0.0], &g, &fbm).unwrap();
        assert!(residual(&p, &g) < 1e-12);
        let b = drift("dirac@0:mass=1", 32);
        let q = solve_euler(&[0.0], &b, &fbm).unwrap();
        let zero = drift("smooth:zero", 1);
        let sup_psi = q.psi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((residual(&q, &zero) - sup_psi).abs() < 1e-15);
    }

    #[test]
    fn holder_trivial_cases() {
        let n = 64;
        let zeros = vec![0.0; n + 1];
        let lin: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let z: Vec<&[f64]> = (0..100).map(|_| zeros.as_slice()).collect();
        let l: Vec<&[f64]> = (0..100).map(|_| lin.as_slice()).collect();
        assert_eq!(holder_seminorm_lm(&z, 1, 1.0 / n as f64, 0.75, 2.0).unwrap(), 0.0);
        assert!((holder_seminorm_lm(&l, 1, 1.0 / n as f64, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(holder_seminorm_lm(&z[..10], 1, 0.1, 1.0, 2.0).is_err());
    }

    #[test]
    fn exp_weighted_closed_forms() {
        let fbm = noise(0.3, 512, 6);
        let one = drift("smooth:const=1", 1);
        let s = 100;
        let t = 400;
        let zero = [0.0];
        let plain = exp_weighted_functional(&one, Shift::Constant(&zero), 0.0, &fbm, s, t).unwrap()[0];
        assert!((plain - (t - s) as f64 / 512.0).abs() < 1e-12);
        let lambda = 20.0;
        let span = (t - s) as f64 / 512.0;
        let weighted = exp_weighted_functional(&one, Shift::Constant(&zero), lambda, &fbm, s, t).unwrap()[0];
        let exact = (1.0 - (-lambda * span).exp()) / lambda;
        assert!((weighted - exact).abs() < lambda * exact / 512.0);
        let running = exp_weighted_running(&one, 0.0, lambda, &fbm.values, fbm.dt);
        let direct = exp_weighted_functional(&one, Shift::Constant(&zero), lambda, &fbm, 0, t).unwrap()[0];
        assert!((running[t] - direct).abs() < 1e-12);
    }

    #[test]
    fn euler_ou_strong_error_is_first_order() {
        // dX = -X dt + dW; exact solution X_t = e^{-t}x0 + ∫ e^{-(t-s)} dW_s on a fine grid.
        let lin = mollify(&DistributionalDrift::smooth(SmoothFn::Linear(-1.0), 1, "smooth:linear=-1"), 1).unwrap();
        let fine = 4096;
        let errs: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&n| {
                let mut total = 0.0;
                for seed in 0..20 {
                    let w = noise(0.5, fine, seed);
                    let mut exact = 1.0;
                    let hf = 1.0 / fine as f64;
                    for i in 0..fine {
                        exact = exact * (-hf).exp() + (-hf / 2.0).exp() * w.driver.increments[i];
                    }
                    let stride = fine / n;
                    let coarse: Vec<f64> = (0..=n).map(|i| w.values[i * stride]).collect();
                    let inc: Vec<f64> = coarse.windows(2).map(|p| p[1] - p[0]).collect();
                    let driver = crate::fbm::BrownianDriver { dt: 1.0 / n as f64, dim: 1, seed, increments: inc };
                    let path = Arc::new(FbmPath { hurst: w.hurst, dt: 1.0 / n as f64, dim: 1, values: coarse, driver });
                    let sol = solve_euler(&[1.0], &lin, &path).unwrap();
                    total += (sol.terminal()[0] - exact).abs();
                }
                total / 20.0
            })
            .collect();
        assert!(errs[1] < 0.65 * errs[0] && errs[2] < 0.65 * errs[1], "{errs:?}");
    }
}
