//! Germs `A_{s,t}`, their dyadic Riemann sums, and the defect
//! `δA_{s,u,t} = A_{s,t} − A_{s,u} − A_{u,t}`.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::drifts::MollifiedDrift;
use crate::error::{LabError, Result};
use crate::fbm::{grid_index, FbmPath, VolterraKernelTable};
use crate::metrics::{p_variation_power, scaling_exponent, SlopeFit};

/// A two-parameter increment with values in `R^d`.
pub trait Germ {
    fn dim(&self) -> usize;

    fn eval(&self, s: f64, t: f64, out: &mut [f64]);

    /// True when `A_{s,t}` is measurable with respect to the past at `s`.
    fn conditional(&self) -> bool {
        false
    }

    /// Grid spacing the germ can be evaluated on, if restricted.
    fn grid_step(&self) -> Option<f64> {
        None
    }
}

/// Germ defined by a closure.
pub struct FnGerm<F: Fn(f64, f64, &mut [f64])> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, f64, &mut [f64])> Germ for FnGerm<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, s: f64, t: f64, out: &mut [f64]) {
        (self.f)(s, t, out)
    }
}

/// `h(t) − h(s)`.
pub fn additive_germ(h: impl Fn(f64) -> f64) -> FnGerm<impl Fn(f64, f64, &mut [f64])> {
    FnGerm { dim: 1, f: move |s, t, out: &mut [f64]| out[0] = h(t) - h(s) }
}

/// `(t − s)²`.
pub fn quadratic_germ() -> FnGerm<impl Fn(f64, f64, &mut [f64])> {
    FnGerm { dim: 1, f: |s: f64, t: f64, out: &mut [f64]| out[0] = (t - s).powi(2) }
}

/// `f(B_s + φ)(t − s)` on the grid of a noise path.
pub struct RiemannGerm {
    pub f: MollifiedDrift,
    pub shift: f64,
    pub path: Arc<FbmPath>,
}

impl Germ for RiemannGerm {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, s: f64, t: f64, out: &mut [f64]) {
        let i = (s / self.path.dt).round() as usize;
        out[0] = self.f.eval1(self.path.values[i * self.path.dim] + self.shift) * (t - s);
    }

    fn grid_step(&self) -> Option<f64> {
        Some(self.path.dt)
    }
}

/// `A_{s,t} = ∫_s^t [G_{σ²(s,r)} f](E^s B^H_r + φ_s) dr`, left-point in `r`.
///
/// `φ` is given by its node values. When `phi_deterministic` is set, `φ`
/// does not depend on the noise and the conditional defect has a closed form.
pub struct ConditionalDriftGerm {
    pub f: MollifiedDrift,
    pub phi: Vec<f64>,
    pub phi_deterministic: bool,
    pub fbm: Arc<FbmPath>,
    pub table: Arc<VolterraKernelTable>,
}

impl ConditionalDriftGerm {
    pub fn new(
        f: MollifiedDrift,
        phi: Vec<f64>,
        phi_deterministic: bool,
        fbm: Arc<FbmPath>,
        table: Arc<VolterraKernelTable>,
    ) -> Result<Self> {
        let n = fbm.n_steps();
        if table.n_steps() != n || (table.dt() - fbm.dt).abs() > 1e-15 || table.hurst() != fbm.hurst {
            return Err(LabError::Mismatch("kernel table does not match the noise path".into()));
        }
        if phi.len() != (n + 1) * fbm.dim || f.dim() != fbm.dim {
            return Err(LabError::Mismatch("shift path or drift dimension does not match the noise".into()));
        }
        Ok(Self { f, phi, phi_deterministic, fbm, table })
    }

    fn index(&self, t: f64) -> usize {
        (t / self.fbm.dt).round() as usize
    }

    /// `∫_{u}^{t} G_{σ²(s,r)} f(E^s B_r + φ_at) dr`.
    fn tail(&self, s: usize, u: usize, t: usize, phi_at: usize, out: &mut [f64]) {
        let d = self.fbm.dim;
        let mut point = vec![0.0; d];
        let mut val = vec![0.0; d];
        out.iter_mut().for_each(|o| *o = 0.0);
        for r in u..t {
            let row = self.table.row(r);
            point.iter_mut().enumerate().for_each(|(c, p)| *p = self.phi[phi_at * d + c]);
            for (j, &k) in row.iter().enumerate().take(s) {
                let dw = self.fbm.driver.step(j);
                for c in 0..d {
                    point[c] += k * dw[c];
                }
            }
            let var = self.table.conditional_variance(s, r);
            self.f.heat_eval(var, &point, &mut val);
            for c in 0..d {
                out[c] += val[c] * self.fbm.dt;
            }
        }
    }

    /// `E^s δA_{s,u,t}` for grid times; needs a deterministic shift.
    pub fn conditional_defect(&self, s: f64, u: f64, t: f64) -> Result<Vec<f64>> {
        if !self.phi_deterministic {
            return Err(LabError::Unsupported("closed-form conditional defect needs a deterministic shift".into()));
        }
        let n = self.fbm.n_steps();
        let (si, ui, ti) = (grid_index(s, self.fbm.dt, n)?, grid_index(u, self.fbm.dt, n)?, grid_index(t, self.fbm.dt, n)?);
        if !(si <= ui && ui <= ti) {
            return Err(LabError::Domain("conditional defect needs s ≤ u ≤ t".into()));
        }
        let d = self.fbm.dim;
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        // A_{s,t} − A_{s,u} − E^s A_{u,t}; the last term integrates the same
        // smoothing with the shift frozen at u.
        self.tail(si, ui, ti, si, &mut a);
        self.tail(si, ui, ti, ui, &mut b);
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
}

impl Germ for ConditionalDriftGerm {
    fn dim(&self) -> usize {
        self.fbm.dim
    }

    fn eval(&self, s: f64, t: f64, out: &mut [f64]) {
        let (si, ti) = (self.index(s), self.index(t));
        self.tail(si, si, ti, si, out);
    }

    fn conditional(&self) -> bool {
        true
    }

    fn grid_step(&self) -> Option<f64> {
        Some(self.fbm.dt)
    }
}

/// Refinement sums of one sewing run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SewingReport {
    pub s: f64,
    pub t: f64,
    pub levels: Vec<u32>,
    /// `S_k = Σ_j A_{t_j, t_{j+1}}` over the `2^k` dyadic cells, per level.
    pub sums: Vec<Vec<f64>>,
    /// `|S_{k+1} − S_k|` (Euclidean).
    pub increments: Vec<f64>,
    /// Fitted rate `ρ` in `|S_{k+1} − S_k| ≈ C 2^{−ρk}` over the last 4 increments.
    pub decay_rate: Option<f64>,
    pub converged: bool,
    /// Every increment vanished, so the germ is additive on these partitions.
    pub exact: bool,
}

impl SewingReport {
    pub fn limit(&self) -> &[f64] {
        self.sums.last().expect("at least one level")
    }
}

/// Dyadic sewing of `germ` over `[s, t]` with levels `0..=max_level`.
pub fn sew<G: Germ + ?Sized>(germ: &G, s: f64, t: f64, max_level: u32) -> Result<SewingReport> {
    if !(s < t) {
        return Err(LabError::Domain(format!("sewing needs s < t, got [{s}, {t}]")));
    }
    if max_level > 30 {
        return Err(LabError::Domain("at most 30 refinement levels".into()));
    }
    if let Some(h) = germ.grid_step() {
        let cells = (t - s) / h;
        let fine = (1u64 << max_level) as f64;
        if (s / h - (s / h).round()).abs() > 1e-9 || (cells / fine - (cells / fine).round()).abs() > 1e-9 || cells < fine - 1e-9 {
            return Err(LabError::Domain(format!("level {max_level} partition of [{s}, {t}] is not on the germ's grid")));
        }
    }
    let d = germ.dim();
    let mut buf = vec![0.0; d];
    let mut sums = Vec::with_capacity(max_level as usize + 1);
    for k in 0..=max_level {
        let cells = 1usize << k;
        let mut acc = vec![0.0; d];
        let width = (t - s) / cells as f64;
        for j in 0..cells {
            let a = s + j as f64 * width;
            let b = if j + 1 == cells { t } else { s + (j + 1) as f64 * width };
            germ.eval(a, b, &mut buf);
            for c in 0..d {
                acc[c] += buf[c];
            }
        }
        if acc.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { step: k as usize, node: None });
        }
        sums.push(acc);
    }
    let increments: Vec<f64> = sums
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    let scale = sums.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let exact = increments.iter().all(|&i| i <= 1e-13 * scale);
    let tail: Vec<(f64, f64)> = increments
        .iter()
        .enumerate()
        .rev()
        .take(4)
        .filter(|(_, &v)| v > 0.0)
        .map(|(k, &v)| (k as f64, v.log2()))
        .collect();
    let decay_rate = if tail.len() >= 2 {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(-sxy / sxx)
    } else {
        None
    };
    let converged = exact || decay_rate.is_some_and(|r| r > 0.1);
    Ok(SewingReport { s, t, levels: (0..=max_level).collect(), sums, increments, decay_rate, converged, exact })
}

/// `A_{s,t} − A_{s,u} − A_{u,t}`.
pub fn delta_defect<G: Germ + ?Sized>(germ: &G, s: f64, u: f64, t: f64) -> Result<Vec<f64>> {
    if !(s <= u && u <= t) {
        return Err(LabError::Domain(format!("defect needs s ≤ u ≤ t, got ({s}, {u}, {t})")));
    }
    let d = germ.dim();
    let (mut a, mut b, mut c) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    germ.eval(s, t, &mut a);
    germ.eval(s, u, &mut b);
    germ.eval(u, t, &mut c);
    Ok((0..d).map(|k| a[k] - b[k] - c[k]).collect())
}

/// One observed defect with the shift's p-variation on `[s, t]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DefectSample {
    pub s: f64,
    pub u: f64,
    pub t: f64,
    pub defect: f64,
    /// `[φ]_{p-var;[s,t]}`.
    pub phi_pvar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlFit {
    /// Fitted `1 + ε` in `|δA| ≈ C w(s,t)^{1+ε}`, when any defect is nonzero.
    pub fit: Option<SlopeFit>,
    pub exact_additivity: bool,
    pub superlinear: bool,
}

/// Regresses `log|δA|` on `log w(s,t)` with `w = (t−s)^{1/2} [φ]_{p-var}^θ`.
pub fn control_power_check(samples: &[DefectSample], theta: f64) -> Result<ControlFit> {
    let kept: Vec<&DefectSample> = samples.iter().filter(|s| s.defect != 0.0).collect();
    if kept.is_empty() {
        return Ok(ControlFit { fit: None, exact_additivity: true, superlinear: false });
    }
    let w: Vec<f64> = kept.iter().map(|s| (s.t - s.s).sqrt() * s.phi_pvar.powf(theta)).collect();
    let y: Vec<f64> = kept.iter().map(|s| s.defect.abs()).collect();
    let fit = scaling_exponent(&w, &y)?;
    let superlinear = fit.slope > 1.0;
    Ok(ControlFit { fit: Some(fit), exact_additivity: false, superlinear })
}

/// Largest `w(s,u) + w(u,t) − w(s,t)` over the triples; ≤ 0 means superadditive.
pub fn superadditivity_excess(triples: &[(f64, f64, f64)], w: impl Fn(f64, f64) -> f64) -> f64 {
    triples.iter().map(|&(s, u, t)| w(s, u) + w(u, t) - w(s, t)).fold(f64::NEG_INFINITY, f64::max)
}

/// `[x]^p_{p-var}` of a grid path restricted to node range `[i, j]`.
pub fn pvar_control(values: &[f64], p: f64) -> impl Fn(usize, usize) -> f64 + '_ {
    move |i, j| if j <= i { 0.0 } else { p_variation_power(&values[i..=j], p) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drifts::{mollify, parse_drift};
    use crate::fbm::{BrownianDriver, FbmSampler, HurstIndex};

    #[test]
    fn additive_germ_is_exact_at_every_level() {
        let g = additive_germ(|x: f64| x.sin() + x * x);
        let r = sew(&g, 0.0, 1.0, 10).unwrap();
        let exact = 1f64.sin() + 1.0;
        for s in &r.sums {
            assert!((s[0] - exact).abs() < 1e-13);
        }
        assert!(r.exact && r.converged);
        assert!(delta_defect(&g, 0.1, 0.4, 0.9).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn quadratic_germ_vanishes() {
        let g = quadratic_germ();
        let r = sew(&g, 0.0, 1.0, 16).unwrap();
        assert!(r.limit()[0] < 2e-5);
        assert!(r.converged && !r.exact);
        assert!((r.decay_rate.unwrap() - 1.0).abs() < 1e-6);
        let d = delta_defect(&g, 0.1, 0.3, 0.8).unwrap()[0];
        assert!((d - 2.0 * 0.2 * 0.5).abs() < 1e-14);
        assert!(delta_defect(&g, 0.5, 0.3, 0.8).is_err());
        assert!(sew(&g, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn riemann_germ_matches_left_point_quadrature() {
        let n = 1 << 14;
        let driver = BrownianDriver::from_seed(n, 1.0 / n as f64, 1, 3);
        let values = driver.brownian_values();
        let path = Arc::new(FbmPath { hurst: HurstIndex::new(0.5).unwrap(), dt: 1.0 / n as f64, dim: 1, values, driver });
        let f = mollify(&parse_drift("smooth:sin:amp=1:freq=3").unwrap(), 1).unwrap();
        let direct: f64 = (0..n).map(|i| f.eval1(path.values[i]) / n as f64).sum();
        let g = RiemannGerm { f, shift: 0.0, path };
        let r = sew(&g, 0.0, 1.0, 14).unwrap();
        assert!((r.limit()[0] - direct).abs() < 1e-6);
        assert!(sew(&g, 0.0, 1.0, 15).is_err());
    }

    fn conditional_setup(seed: u64, n: usize, id: &str, phi: impl Fn(f64) -> f64) -> ConditionalDriftGerm {
        let h = HurstIndex::new(0.3).unwrap();
        let table = Arc::new(VolterraKernelTable::new(h, n, 1.0 / n as f64).unwrap());
        let fbm = Arc::new(FbmSampler::new(table.clone()).sample(1, seed));
        let f = mollify(&parse_drift(id).unwrap(), 64).unwrap();
        let phi = (0..=n).map(|i| phi(i as f64 / n as f64)).collect();
        ConditionalDriftGerm::new(f, phi, true, fbm, table).unwrap()
    }

    #[test]
    fn conditional_germ_closed_forms() {
        let g = conditional_setup(1, 64, "smooth:const=2", |_| 0.0);
        let mut out = [0.0];
        g.eval(0.25, 0.75, &mut out);
        assert!((out[0] - 1.0).abs() < 1e-14);
        // s = 0: E f(B_r + φ) = G_{r^{2H}} f(φ).
        let g = conditional_setup(2, 64, "smooth:sin:amp=1:freq=2", |_| 0.3);
        g.eval(0.0, 0.5, &mut out);
        let expect: f64 = (0..32)
            .map(|r| g.f.heat_eval1((r as f64 / 64.0).powf(0.6), 0.3) / 64.0)
            .sum();
        assert!((out[0] - expect).abs() < 1e-12, "{} vs {expect}", out[0]);
    }

    #[test]
    fn conditional_defect_vanishes_for_constant_shift() {
        let g = conditional_setup(3, 64, "dirac@0:mass=1", |_| 0.2);
        let d = g.conditional_defect(0.25, 0.5, 1.0).unwrap();
        assert!(d[0].abs() < 1e-15);
        let lin = conditional_setup(3, 64, "dirac@0:mass=1", |t| t);
        assert!(lin.conditional_defect(0.25, 0.5, 1.0).unwrap()[0].abs() > 0.0);
    }

    #[test]
    fn control_checks() {
        let g = additive_germ(|x: f64| x.exp());
        let samples: Vec<DefectSample> = (1..6)
            .map(|k| {
                let w = 2f64.powi(-k);
                DefectSample { s: 0.0, u: w / 2.0, t: w, defect: delta_defect(&g, 0.0, w / 2.0, w).unwrap()[0], phi_pvar: 1.0 }
            })
            .collect();
        let fit = control_power_check(&samples, 0.0).unwrap();
        assert!(fit.exact_additivity || fit.fit.unwrap().slope > 1.0);
        let q = quadratic_germ();
        let qs: Vec<DefectSample> = (1..8)
            .map(|k| {
                let w = 2f64.powi(-k);
                DefectSample { s: 0.1, u: 0.1 + w / 2.0, t: 0.1 + w, defect: delta_defect(&q, 0.1, 0.1 + w / 2.0, 0.1 + w).unwrap()[0], phi_pvar: 1.0 }
            })
            .collect();
        let fit = control_power_check(&qs, 0.0).unwrap();
        assert!((fit.fit.as_ref().unwrap().slope - 4.0).abs() < 1e-9 && fit.superlinear);
        let path: Vec<f64> = (0..=64).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let w = pvar_control(&path, 2.0);
        let triples: Vec<(usize, usize, usize)> = (0..20).map(|k| (k, k + 10 + k % 7, k + 40)).collect();
        let tf: Vec<(f64, f64, f64)> = triples.iter().map(|&(a, b, c)| (a as f64, b as f64, c as f64)).collect();
        assert!(superadditivity_excess(&tf, |s, t| t - s) <= 1e-12);
        assert!(superadditivity_excess(&tf, |s, t| w(s as usize, t as usize)) <= 1e-12);
    }
}
