//! Gaussian densities, heat kernels on [0,1] built from image sums, semigroup
//! application on uniform grids, and the heat-semigroup surrogate for
//! negative-regularity Hölder–Besov norms.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

use crate::error::{LabError, Result};

/// Density of a centered Gaussian vector with covariance `t·I_d`.
pub fn gamma_density(t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(LabError::Domain(format!("gamma_density needs t > 0, got {t}")));
    }
    Ok(gamma_unchecked(t, x))
}

#[inline]
pub(crate) fn gamma_unchecked(t: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * PI * t).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * t)).exp()
}

#[inline]
pub(crate) fn gamma_1d(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Which Laplacian the heat kernel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Free Gaussian kernel on R^d.
    WholeLine(usize),
    /// Periodic boundary conditions on [0,1].
    Periodic,
    /// Reflecting (Neumann) boundary conditions on [0,1].
    Neumann,
}

/// Boundary condition of an interval problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Periodic,
    Neumann,
}

impl Bc {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "periodic" | "per" => Ok(Bc::Periodic),
            "neumann" | "neu" => Ok(Bc::Neumann),
            other => Err(LabError::Config(format!(
                "unknown boundary condition '{other}' (periodic or neumann)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bc::Periodic => "periodic",
            Bc::Neumann => "neumann",
        }
    }
}

/// Description of a heat kernel and of how it is truncated numerically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelSpec {
    pub domain: DomainKind,
    /// Image terms kept on each side of the image sum.
    pub image_truncation: usize,
    /// Modes used by the spectral route.
    pub spectral_modes: usize,
}

impl HeatKernelSpec {
    pub const DEFAULT_IMAGES: usize = 8;
    pub const DEFAULT_MODES: usize = 256;

    pub fn periodic() -> Self {
        Self { domain: DomainKind::Periodic, image_truncation: Self::DEFAULT_IMAGES, spectral_modes: Self::DEFAULT_MODES }
    }

    pub fn neumann() -> Self {
        Self { domain: DomainKind::Neumann, image_truncation: Self::DEFAULT_IMAGES, spectral_modes: Self::DEFAULT_MODES }
    }

    pub fn whole_line(d: usize) -> Self {
        Self { domain: DomainKind::WholeLine(d), image_truncation: Self::DEFAULT_IMAGES, spectral_modes: Self::DEFAULT_MODES }
    }

    pub fn for_bc(bc: Bc) -> Self {
        match bc {
            Bc::Periodic => Self::periodic(),
            Bc::Neumann => Self::neumann(),
        }
    }

    pub fn with_images(mut self, images: usize) -> Self {
        self.image_truncation = images.max(1);
        self
    }

    pub fn with_modes(mut self, modes: usize) -> Self {
        self.spectral_modes = modes.max(1);
        self
    }

    pub fn bc(&self) -> Option<Bc> {
        match self.domain {
            DomainKind::Periodic => Some(Bc::Periodic),
            DomainKind::Neumann => Some(Bc::Neumann),
            DomainKind::WholeLine(_) => None,
        }
    }

    /// Image count actually used at time `t`. Long times need more images
    /// because the Gaussian spreads over many periods.
    pub fn images_at(&self, t: f64) -> usize {
        let needed = if t > 1.0 { (1.0 + 9.0 * t.sqrt()).ceil() as usize } else { 0 };
        self.image_truncation.max(needed)
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(LabError::Domain(format!("point {x} lies outside [0,1]")))
    }
}

/// Interval heat kernel `p_t(x,y)` for periodic or Neumann conditions.
pub fn heat_kernel_1d(t: f64, x: f64, y: f64, spec: &HeatKernelSpec) -> Result<f64> {
    if !(t > 0.0) {
        return Err(LabError::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    match spec.domain {
        DomainKind::WholeLine(1) => Ok(gamma_1d(t, x - y)),
        DomainKind::WholeLine(d) => Err(LabError::Domain(format!(
            "scalar kernel requested for whole line of dimension {d}"
        ))),
        DomainKind::Periodic | DomainKind::Neumann => {
            check_unit(x)?;
            check_unit(y)?;
            Ok(interval_kernel(t, x, y, spec.domain, spec.images_at(t)))
        }
    }
}

/// General heat kernel; points are slices so the whole-line case can be
/// multi-dimensional. Interval kernels take one-element slices.
pub fn heat_kernel(t: f64, x: &[f64], y: &[f64], spec: &HeatKernelSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(LabError::Mismatch("kernel arguments differ in dimension".into()));
    }
    match spec.domain {
        DomainKind::WholeLine(d) => {
            if x.len() != d {
                return Err(LabError::Domain(format!("expected points in R^{d}")));
            }
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            gamma_density(t, &diff)
        }
        _ => {
            if x.len() != 1 {
                return Err(LabError::Domain("interval kernels act on scalars".into()));
            }
            heat_kernel_1d(t, x[0], y[0], spec)
        }
    }
}

#[inline]
fn interval_kernel(t: f64, x: f64, y: f64, kind: DomainKind, images: usize) -> f64 {
    let k = images as i64;
    let mut acc = 0.0;
    match kind {
        DomainKind::Periodic => {
            for n in -k..=k {
                acc += gamma_1d(t, x - y + n as f64);
            }
        }
        DomainKind::Neumann => {
            for n in -k..=k {
                let shift = 2.0 * n as f64;
                acc += gamma_1d(t, x - y + shift) + gamma_1d(t, x + y + shift);
            }
        }
        DomainKind::WholeLine(_) => acc = gamma_1d(t, x - y),
    }
    acc
}

/// Values of a function on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.is_empty() {
            return Err(LabError::Mismatch("grid and values must have equal nonzero length".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::Domain("grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Domain("grid function has non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` on `n_nodes` equispaced nodes of [0,1], endpoints included.
    pub fn on_unit_interval(n_nodes: usize, f: impl Fn(f64) -> f64) -> Self {
        let grid = unit_grid(n_nodes);
        let values = grid.iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    /// Samples `f` on an arbitrary uniform grid `[a, b]`.
    pub fn on_interval(a: f64, b: f64, n_nodes: usize, f: impl Fn(f64) -> f64) -> Self {
        let grid: Vec<f64> = (0..n_nodes)
            .map(|i| a + (b - a) * i as f64 / (n_nodes - 1) as f64)
            .collect();
        let values = grid.iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    fn covers_unit_interval(&self) -> bool {
        self.grid.len() >= 2
            && self.grid[0].abs() < 1e-12
            && (self.grid[self.grid.len() - 1] - 1.0).abs() < 1e-12
    }
}

/// `n_nodes` equispaced points of [0,1].
pub fn unit_grid(n_nodes: usize) -> Vec<f64> {
    let h = 1.0 / (n_nodes - 1) as f64;
    (0..n_nodes).map(|i| i as f64 * h).collect()
}

/// Composite trapezoid weights for a uniform grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    if n < 2 {
        return vec![1.0; n];
    }
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let mut w = vec![h; n];
    w[0] = h / 2.0;
    w[n - 1] = h / 2.0;
    w
}

/// How the semigroup is applied on an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemigroupRoute {
    Quadrature,
    Spectral,
}

/// `P_t f` on the grid of `f`, by kernel quadrature.
pub fn apply_semigroup(f: &GridFunction, t: f64, spec: &HeatKernelSpec) -> Result<GridFunction> {
    apply_semigroup_with(f, t, spec, SemigroupRoute::Quadrature)
}

pub fn apply_semigroup_with(
    f: &GridFunction,
    t: f64,
    spec: &HeatKernelSpec,
    route: SemigroupRoute,
) -> Result<GridFunction> {
    if t < 0.0 {
        return Err(LabError::Domain(format!("semigroup time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    match (spec.domain, route) {
        (DomainKind::WholeLine(1), _) => {
            let w = trapezoid_weights(&f.grid);
            let values = f
                .grid
                .iter()
                .map(|&x| {
                    f.grid
                        .iter()
                        .zip(&w)
                        .zip(&f.values)
                        .map(|((&y, &wy), &fy)| wy * gamma_1d(t, x - y) * fy)
                        .sum()
                })
                .collect();
            Ok(GridFunction { grid: f.grid.clone(), values })
        }
        (DomainKind::WholeLine(d), _) => Err(LabError::Unsupported(format!(
            "grid semigroup on R^{d} (grid functions are one-dimensional)"
        ))),
        (_, SemigroupRoute::Quadrature) => {
            if !f.covers_unit_interval() {
                return Err(LabError::Domain("interval semigroup needs a grid spanning [0,1]".into()));
            }
            let w = trapezoid_weights(&f.grid);
            let images = spec.images_at(t);
            let values = f
                .grid
                .iter()
                .map(|&x| {
                    f.grid
                        .iter()
                        .zip(&w)
                        .zip(&f.values)
                        .map(|((&y, &wy), &fy)| wy * interval_kernel(t, x, y, spec.domain, images) * fy)
                        .sum()
                })
                .collect();
            Ok(GridFunction { grid: f.grid.clone(), values })
        }
        (_, SemigroupRoute::Spectral) => {
            if !f.covers_unit_interval() {
                return Err(LabError::Domain("interval semigroup needs a grid spanning [0,1]".into()));
            }
            let bc = spec.bc().expect("interval domain");
            let basis = SpectralBasis::new(bc, f.len(), spec.spectral_modes)?;
            let mut coeffs = basis.project(&f.values);
            for (c, mu) in coeffs.iter_mut().zip(&basis.eigen) {
                *c *= (-mu * t).exp();
            }
            Ok(GridFunction { grid: f.grid.clone(), values: basis.synthesize(&coeffs) })
        }
    }
}

/// Real orthonormal eigenbasis of `-(1/2)∂²` on [0,1] sampled on a uniform grid.
///
/// Neumann uses `1, √2 cos(πkx)`; periodic uses `1, √2 cos(2πjx), √2 sin(2πjx)`.
/// Projections use trapezoid weights, for which these vectors are exactly
/// orthogonal below the grid Nyquist frequency.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub bc: Bc,
    pub n_nodes: usize,
    pub modes: usize,
    /// Eigenvalues of `-(1/2)∂²`, one per mode.
    pub eigen: Vec<f64>,
    /// Mode-major table: `synth[k * n_nodes + i] = e_k(x_i)`.
    pub synth: Vec<f64>,
    /// Mode-major weighted table: `proj[k * n_nodes + i] = w_i e_k(x_i) / ‖e_k‖²`.
    pub proj: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(bc: Bc, n_nodes: usize, modes: usize) -> Result<Self> {
        if n_nodes < 3 {
            return Err(LabError::Domain("spectral basis needs at least 3 nodes".into()));
        }
        let intervals = n_nodes - 1;
        // Periodic: the Nyquist cosine is kept, the Nyquist sine vanishes on the grid.
        let max_modes = intervals;
        if modes == 0 || modes > max_modes {
            return Err(LabError::Domain(format!(
                "{modes} modes do not fit on {n_nodes} nodes ({} max)",
                max_modes
            )));
        }
        let grid = unit_grid(n_nodes);
        let w = trapezoid_weights(&grid);
        let mut synth = Vec::with_capacity(modes * n_nodes);
        let mut eigen = Vec::with_capacity(modes);
        for k in 0..modes {
            let (freq, mu, f): (f64, f64, fn(f64) -> f64) = match bc {
                Bc::Neumann => {
                    let a = PI * k as f64;
                    (a, 0.5 * a * a, f64::cos)
                }
                Bc::Periodic => {
                    let j = k.div_ceil(2);
                    let a = 2.0 * PI * j as f64;
                    let f: fn(f64) -> f64 = if k % 2 == 1 { f64::cos } else { f64::sin };
                    (a, 0.5 * a * a, f)
                }
            };
            let scale = if k == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
            eigen.push(mu);
            for &x in &grid {
                let v = if k == 0 { 1.0 } else { scale * f(freq * x) };
                synth.push(v);
            }
        }
        let mut proj = vec![0.0; modes * n_nodes];
        for k in 0..modes {
            let row = &synth[k * n_nodes..(k + 1) * n_nodes];
            let norm: f64 = row.iter().zip(&w).map(|(e, wi)| e * e * wi).sum();
            for i in 0..n_nodes {
                proj[k * n_nodes + i] = w[i] * row[i] / norm;
            }
        }
        Ok(Self { bc, n_nodes, modes, eigen, synth, proj })
    }

    pub fn grid(&self) -> Vec<f64> {
        unit_grid(self.n_nodes)
    }

    /// Mode `k` sampled on the grid.
    pub fn mode(&self, k: usize) -> &[f64] {
        &self.synth[k * self.n_nodes..(k + 1) * self.n_nodes]
    }

    pub fn project_into(&self, values: &[f64], out: &mut [f64]) {
        let n = self.n_nodes;
        for (k, o) in out.iter_mut().enumerate().take(self.modes) {
            let row = &self.proj[k * n..(k + 1) * n];
            let mut acc = 0.0;
            for i in 0..n {
                acc += row[i] * values[i];
            }
            *o = acc;
        }
    }

    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.modes];
        self.project_into(values, &mut out);
        out
    }

    pub fn synthesize_into(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.n_nodes;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &c) in coeffs.iter().enumerate().take(self.modes) {
            if c == 0.0 {
                continue;
            }
            let row = &self.synth[k * n..(k + 1) * n];
            for i in 0..n {
                out[i] += c * row[i];
            }
        }
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        self.synthesize_into(coeffs, &mut out);
        out
    }
}

/// Anything whose heat smoothing `G_t f` has a computable sup norm.
pub trait HeatSmoothing {
    /// `sup_x |G_t f(x)|` on the evaluation grid.
    fn smoothed_sup(&self, t: f64) -> Result<f64>;
}

/// A grid function together with the kernel that smooths it.
pub struct OnDomain<'a> {
    pub f: &'a GridFunction,
    pub spec: &'a HeatKernelSpec,
}

impl HeatSmoothing for OnDomain<'_> {
    fn smoothed_sup(&self, t: f64) -> Result<f64> {
        Ok(apply_semigroup(self.f, t, self.spec)?.sup_norm())
    }
}

/// Dyadic smoothing times `2^{-k}`, k = 0..=16.
pub fn default_t_levels() -> Vec<f64> {
    (0..=16).map(|k| 2f64.powi(-k)).collect()
}

/// Heat-semigroup surrogate of the `C^α` norm for `α < 0`:
/// `max_t t^{-α/2} ‖G_t f‖_∞` over the given levels.
pub fn besov_norm_neg<S: HeatSmoothing + ?Sized>(f: &S, alpha: f64, t_levels: &[f64]) -> Result<f64> {
    if alpha >= 0.0 {
        return Err(LabError::Unsupported(format!(
            "heat surrogate norm needs negative regularity, got alpha = {alpha}"
        )));
    }
    if t_levels.is_empty() {
        return Err(LabError::Domain("no smoothing levels supplied".into()));
    }
    let mut best = 0.0_f64;
    for &t in t_levels {
        if !(t > 0.0) {
            return Err(LabError::Domain(format!("smoothing level {t} is not positive")));
        }
        best = best.max(t.powf(-alpha / 2.0) * f.smoothed_sup(t)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_density_closed_forms() {
        let inv_sqrt = 1.0 / (2.0 * PI).sqrt();
        assert!((gamma_density(1.0, &[0.0]).unwrap() - 0.3989422804014327).abs() < 1e-15);
        assert!((gamma_density(1.0, &[0.0]).unwrap() - inv_sqrt).abs() < 1e-15);
        assert!((gamma_density(1.0, &[0.0, 0.0]).unwrap() - 0.15915494309189535).abs() < 1e-15);
        assert_eq!(gamma_density(0.3, &[0.7]).unwrap(), gamma_density(0.3, &[-0.7]).unwrap());
        assert!(gamma_density(0.0, &[0.0]).is_err());
        assert!(gamma_density(-1.0, &[0.0]).is_err());
    }

    #[test]
    fn periodic_long_time_is_flat() {
        let spec = HeatKernelSpec::periodic();
        for &(x, y) in &[(0.0, 0.5), (0.3, 0.31), (1.0, 0.0)] {
            let p = heat_kernel_1d(10.0, x, y, &spec).unwrap();
            assert!((p - 1.0).abs() < 1e-8, "{p}");
        }
    }

    #[test]
    fn kernel_rejects_points_outside_interval() {
        let spec = HeatKernelSpec::neumann();
        assert!(heat_kernel_1d(0.1, 1.2, 0.5, &spec).is_err());
        assert!(heat_kernel_1d(0.1, 0.5, -0.1, &spec).is_err());
        assert!(heat_kernel_1d(0.0, 0.5, 0.5, &spec).is_err());
    }

    #[test]
    fn neumann_symmetric() {
        let spec = HeatKernelSpec::neumann();
        for &(x, y) in &[(0.1, 0.8), (0.0, 1.0), (0.45, 0.46)] {
            let a = heat_kernel_1d(0.05, x, y, &spec).unwrap();
            let b = heat_kernel_1d(0.05, y, x, &spec).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn doubling_images_is_invisible() {
        for spec in [HeatKernelSpec::periodic(), HeatKernelSpec::neumann()] {
            let doubled = spec.with_images(2 * spec.image_truncation);
            for &t in &[0.01, 0.1, 1.0] {
                for i in 0..=8 {
                    let x = i as f64 / 8.0;
                    let a = heat_kernel_1d(t, x, 0.3, &spec).unwrap();
                    let b = heat_kernel_1d(t, x, 0.3, &doubled).unwrap();
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spectral_basis_round_trip() {
        for bc in [Bc::Neumann, Bc::Periodic] {
            let basis = SpectralBasis::new(bc, 257, 128).unwrap();
            let coeffs: Vec<f64> = (0..128).map(|k| 1.0 / (1.0 + k as f64)).collect();
            let back = basis.project(&basis.synthesize(&coeffs));
            for (a, b) in coeffs.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_and_spectral_routes_agree() {
        let f = GridFunction::on_unit_interval(257, |x| (2.0 * PI * x).cos() + 0.3 * (4.0 * PI * x).sin());
        let g = GridFunction::on_unit_interval(257, |x| (-(x - 0.4) * (x - 0.4) * 20.0).exp());
        for spec in [HeatKernelSpec::periodic(), HeatKernelSpec::neumann()] {
            let probe = if spec.domain == DomainKind::Periodic { &f } else { &g };
            for &t in &[0.01, 0.1] {
                let a = apply_semigroup_with(probe, t, &spec, SemigroupRoute::Quadrature).unwrap();
                let b = apply_semigroup_with(probe, t, &spec, SemigroupRoute::Spectral).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!((x - y).abs() < 1e-8, "{:?} t={t}: {x} vs {y}", spec.domain);
                }
            }
        }
    }

    #[test]
    fn identity_and_constants() {
        let f = GridFunction::on_unit_interval(65, |x| x * x);
        let spec = HeatKernelSpec::neumann();
        assert_eq!(apply_semigroup(&f, 0.0, &spec).unwrap(), f);
        let c = GridFunction::on_unit_interval(129, |_| 2.5);
        for spec in [HeatKernelSpec::periodic(), HeatKernelSpec::neumann()] {
            for &t in &[0.01, 0.1, 1.0] {
                let out = apply_semigroup(&c, t, &spec).unwrap();
                assert!(out.values.iter().all(|v| (v - 2.5).abs() < 1e-8));
            }
        }
    }

    #[test]
    fn besov_surrogate_basics() {
        let zero = GridFunction::on_unit_interval(33, |_| 0.0);
        let spec = HeatKernelSpec::periodic();
        let levels = [1.0, 0.5, 0.25];
        assert_eq!(besov_norm_neg(&OnDomain { f: &zero, spec: &spec }, -0.5, &levels).unwrap(), 0.0);
        assert!(besov_norm_neg(&OnDomain { f: &zero, spec: &spec }, 0.0, &levels).is_err());

        let f = GridFunction::on_unit_interval(65, |x| (6.0 * PI * x).sin());
        let base = besov_norm_neg(&OnDomain { f: &f, spec: &spec }, -0.5, &levels).unwrap();
        let f3 = f.scaled(-3.0);
        let scaled = besov_norm_neg(&OnDomain { f: &f3, spec: &spec }, -0.5, &levels).unwrap();
        assert!((scaled - 3.0 * base).abs() < 1e-12);
        let rougher = besov_norm_neg(&OnDomain { f: &f, spec: &spec }, -1.0, &levels).unwrap();
        assert!(base >= rougher);
    }
}
