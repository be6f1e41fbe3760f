//! Distributional drifts `b ∈ C^α` and their heat-semigroup mollifications
//! `b_n = G_{1/n} b`.
//!
//! Every catalog drift has a closed form for `G_τ b` at positive `τ`: Dirac
//! atoms become Gaussian bumps, the uniform measure becomes a difference of
//! normal distribution functions, and the Weierstrass derivative gets a
//! damping factor per frequency. A user-supplied smooth function is smoothed
//! by Gauss–Hermite quadrature instead.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{LabError, Result};
use crate::fbm::HurstIndex;
use crate::gaussian::{gamma_1d, normal_cdf, HeatSmoothing};

/// One point mass `mass · δ_location` (vector mass for `d > 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Scalar smooth reference drifts; they act componentwise when `d > 1`.
#[derive(Clone)]
pub enum SmoothFn {
    Constant(f64),
    /// `b(x) = slope · x`.
    Linear(f64),
    /// `b(x) = amp · sin(freq · x)`.
    Sine { amp: f64, freq: f64 },
    /// Arbitrary smooth scalar map, smoothed by Gauss–Hermite quadrature.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothFn::Constant(c) => write!(f, "Constant({c})"),
            SmoothFn::Linear(a) => write!(f, "Linear({a})"),
            SmoothFn::Sine { amp, freq } => write!(f, "Sine {{ amp: {amp}, freq: {freq} }}"),
            SmoothFn::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// The symbolic description of a drift.
#[derive(Debug, Clone)]
pub enum DriftKind {
    DiracComb(Vec<Atom>),
    /// Measure with constant density on `[lo, hi]` and total mass `mass` (d = 1).
    UniformMeasure { lo: f64, hi: f64, mass: f64 },
    /// Derivative of `W(x) = Σ_k 2^{-kγ} cos(2^k x)`, a γ-Hölder function (d = 1).
    WeierstrassDerivative { gamma: f64 },
    Smooth(SmoothFn),
}

/// A drift of nominal regularity `α` together with any smoothing already
/// applied to it.
#[derive(Debug, Clone)]
pub struct DistributionalDrift {
    pub kind: DriftKind,
    pub nominal_alpha: f64,
    pub dim: usize,
    /// The drift stands for `c · G_τ b` with `τ = pre_smoothing`, `c = scale`.
    pub pre_smoothing: f64,
    pub scale: f64,
    pub id: String,
}

impl DistributionalDrift {
    fn new(kind: DriftKind, nominal_alpha: f64, dim: usize, id: String) -> Self {
        Self { kind, nominal_alpha, dim, pre_smoothing: 0.0, scale: 1.0, id }
    }

    /// `mass · δ_x0` in d = 1, nominal α = −1.
    pub fn dirac(x0: f64, mass: f64) -> Self {
        Self::new(
            DriftKind::DiracComb(vec![Atom { location: vec![x0], mass: vec![mass] }]),
            -1.0,
            1,
            format!("dirac@{x0}:mass={mass}"),
        )
    }

    /// `mass · δ_{-a} − mass · δ_{a}`: a push toward the origin from both sides.
    pub fn dirac_pair(a: f64, mass: f64) -> Self {
        Self::new(
            DriftKind::DiracComb(vec![
                Atom { location: vec![-a], mass: vec![mass] },
                Atom { location: vec![a], mass: vec![-mass] },
            ]),
            -1.0,
            1,
            format!("dirac-pair@{a}:mass={mass}"),
        )
    }

    /// General comb in R^d; nominal α = −d.
    pub fn dirac_comb(atoms: Vec<Atom>) -> Result<Self> {
        let dim = atoms.first().map(|a| a.location.len()).unwrap_or(1);
        if atoms.iter().any(|a| a.location.len() != dim || a.mass.len() != dim) {
            return Err(LabError::Mismatch("atoms must share one dimension".into()));
        }
        Ok(Self::new(DriftKind::DiracComb(atoms), -(dim as f64), dim, format!("comb:d={dim}")))
    }

    /// Nonnegative measure with density `mass/(hi-lo)` on `[lo, hi]`.
    pub fn uniform_measure(lo: f64, hi: f64, mass: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(LabError::Domain("uniform measure needs hi > lo".into()));
        }
        Ok(Self::new(
            DriftKind::UniformMeasure { lo, hi, mass },
            -1.0,
            1,
            format!("measure:uniform[{lo},{hi}]:mass={mass}"),
        ))
    }

    /// Derivative of a γ-Hölder Weierstrass function, nominal α = γ − 1.
    pub fn weierstrass_derivative(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LabError::Domain(format!("Weierstrass exponent must lie in (0,1), got {gamma}")));
        }
        Ok(Self::new(
            DriftKind::WeierstrassDerivative { gamma },
            gamma - 1.0,
            1,
            format!("weierstrass:gamma={gamma}:deriv"),
        ))
    }

    /// Smooth reference drift; nominal α = 0 (bounded and smooth).
    pub fn smooth(f: SmoothFn, dim: usize, id: &str) -> Self {
        Self::new(DriftKind::Smooth(f), 0.0, dim, id.to_string())
    }

    pub fn zero(dim: usize) -> Self {
        Self::smooth(SmoothFn::Constant(0.0), dim, "smooth:zero")
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.nominal_alpha = alpha;
        self
    }

    /// `c · b`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out.id = format!("{}*{c}", self.id);
        out
    }

    /// The smooth function `G_{1/n} b` viewed again as a drift.
    pub fn mollified_as_drift(&self, n: u64) -> Self {
        let mut out = self.clone();
        out.pre_smoothing += 1.0 / n as f64;
        out.id = format!("{}~{n}", self.id);
        out
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, DriftKind::Smooth(_)) || self.pre_smoothing > 0.0
    }

    /// `G_t b` at `x` (d components into `out`). Requires `t + pre > 0`
    /// unless the drift is a smooth function.
    pub fn heat_eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let tau = t + self.pre_smoothing;
        out.iter_mut().for_each(|o| *o = 0.0);
        match &self.kind {
            DriftKind::DiracComb(atoms) => {
                for atom in atoms {
                    let r2: f64 = x.iter().zip(&atom.location).map(|(a, b)| (a - b) * (a - b)).sum();
                    let g = (2.0 * std::f64::consts::PI * tau).powf(-(self.dim as f64) / 2.0) * (-r2 / (2.0 * tau)).exp();
                    for (o, m) in out.iter_mut().zip(&atom.mass) {
                        *o += m * g;
                    }
                }
            }
            DriftKind::UniformMeasure { .. } | DriftKind::WeierstrassDerivative { .. } => {
                out[0] = self.scalar_kind_eval(tau, x[0]);
            }
            DriftKind::Smooth(f) => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = smooth_eval(f, tau, xi);
                }
            }
        }
        if self.scale != 1.0 {
            out.iter_mut().for_each(|o| *o *= self.scale);
        }
    }

    /// Scalar fast path of [`Self::heat_eval`] for d = 1.
    #[inline]
    pub fn heat_eval1(&self, t: f64, x: f64) -> f64 {
        let tau = t + self.pre_smoothing;
        let v = match &self.kind {
            DriftKind::DiracComb(atoms) => atoms.iter().map(|a| a.mass[0] * gamma_1d(tau, x - a.location[0])).sum(),
            DriftKind::Smooth(f) => smooth_eval(f, tau, x),
            _ => self.scalar_kind_eval(tau, x),
        };
        self.scale * v
    }

    fn scalar_kind_eval(&self, tau: f64, x: f64) -> f64 {
        match &self.kind {
            DriftKind::UniformMeasure { lo, hi, mass } => {
                let sd = tau.sqrt();
                mass / (hi - lo) * (normal_cdf((x - lo) / sd) - normal_cdf((x - hi) / sd))
            }
            DriftKind::WeierstrassDerivative { gamma } => {
                let mut acc = 0.0;
                for k in 0..64 {
                    let freq = 2f64.powi(k);
                    let damp = (-freq * freq * tau / 2.0).exp();
                    if damp < 1e-18 {
                        break;
                    }
                    acc -= freq.powf(1.0 - gamma) * (freq * x).sin() * damp;
                }
                acc
            }
            _ => unreachable!("vector kinds handled by the caller"),
        }
    }

    /// Points where `sup |G_t b|` is sampled: a grid over the evaluation box
    /// fine enough to resolve width `√(t + pre)`, plus all atom locations.
    pub fn evaluation_points(&self, t: f64) -> Vec<Vec<f64>> {
        let tau = t + self.pre_smoothing;
        let h = (tau.sqrt() / 8.0).clamp(1e-4, 0.01);
        let line = |lo: f64, hi: f64| -> Vec<f64> {
            let n = ((hi - lo) / h).ceil() as usize;
            (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
        };
        match &self.kind {
            DriftKind::DiracComb(atoms) => {
                let mut pts: Vec<Vec<f64>> = atoms.iter().map(|a| a.location.clone()).collect();
                for atom in atoms {
                    for c in 0..self.dim {
                        let x0 = atom.location[c];
                        for v in line(x0 - 6.0, x0 + 6.0) {
                            let mut p = atom.location.clone();
                            p[c] = v;
                            pts.push(p);
                        }
                    }
                }
                pts
            }
            DriftKind::UniformMeasure { lo, hi, .. } => line(lo - 6.0, hi + 6.0).into_iter().map(|v| vec![v]).collect(),
            DriftKind::WeierstrassDerivative { .. } => {
                line(0.0, 2.0 * std::f64::consts::PI).into_iter().map(|v| vec![v]).collect()
            }
            DriftKind::Smooth(_) => line(-6.0, 6.0)
                .into_iter()
                .map(|v| vec![v; self.dim])
                .collect(),
        }
    }
}

fn smooth_eval(f: &SmoothFn, tau: f64, x: f64) -> f64 {
    match f {
        SmoothFn::Constant(c) => *c,
        SmoothFn::Linear(a) => a * x,
        SmoothFn::Sine { amp, freq } => amp * (-freq * freq * tau / 2.0).exp() * (freq * x).sin(),
        SmoothFn::Custom(g) => {
            if tau <= 0.0 {
                return g(x);
            }
            let (nodes, weights) = gauss_hermite();
            let s = (2.0 * tau).sqrt();
            nodes.iter().zip(weights).map(|(z, w)| w * g(x + s * z)).sum::<f64>() / std::f64::consts::PI.sqrt()
        }
    }
}

/// Nodes and weights of 64-point Gauss–Hermite quadrature (weight `e^{-z²}`).
fn gauss_hermite() -> (&'static [f64], &'static [f64]) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = RULE.get_or_init(|| {
        let n = 64usize;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                // Orthonormal Hermite recurrence.
                let mut p1 = std::f64::consts::PI.powf(-0.25);
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        (nodes, weights)
    });
    (n, w)
}

/// `b_n = G_{1/n} b`, evaluated in closed form where possible.
#[derive(Debug, Clone)]
pub struct MollifiedDrift {
    pub source: DistributionalDrift,
    pub level: u64,
    /// Smoothing time `1/n` applied on top of the source.
    pub tau: f64,
}

impl MollifiedDrift {
    pub fn dim(&self) -> usize {
        self.source.dim
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.source.heat_eval(self.tau, x, out);
    }

    #[inline]
    pub fn eval1(&self, x: f64) -> f64 {
        self.source.heat_eval1(self.tau, x)
    }

    /// `G_t b_n`.
    pub fn heat_eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.source.heat_eval(self.tau + t, x, out);
    }

    #[inline]
    pub fn heat_eval1(&self, t: f64, x: f64) -> f64 {
        self.source.heat_eval1(self.tau + t, x)
    }

    pub fn as_drift(&self) -> DistributionalDrift {
        let mut d = self.source.clone();
        d.pre_smoothing += self.tau;
        d.id = format!("{}~{}", self.source.id, self.level);
        d
    }
}

/// `G_{1/n} b`.
pub fn mollify(b: &DistributionalDrift, n: u64) -> Result<MollifiedDrift> {
    if n == 0 {
        return Err(LabError::Domain("mollification level must be ≥ 1".into()));
    }
    Ok(MollifiedDrift { source: b.clone(), level: n, tau: 1.0 / n as f64 })
}

/// Smoothing by an arbitrary positive time `τ` (level reported as `round(1/τ)`).
pub fn mollify_time(b: &DistributionalDrift, tau: f64) -> Result<MollifiedDrift> {
    if !(tau > 0.0) {
        return Err(LabError::Domain("smoothing time must be positive".into()));
    }
    Ok(MollifiedDrift { source: b.clone(), level: (1.0 / tau).round().max(1.0) as u64, tau })
}

/// Anything with a heat extension `t ↦ G_t f` and an evaluation grid.
pub trait HeatExtension {
    fn dim(&self) -> usize;
    fn heat_at(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn points(&self, t: f64) -> Vec<Vec<f64>>;
    fn smooth(&self) -> bool;
}

impl HeatExtension for DistributionalDrift {
    fn dim(&self) -> usize {
        self.dim
    }
    fn heat_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.heat_eval(t, x, out)
    }
    fn points(&self, t: f64) -> Vec<Vec<f64>> {
        self.evaluation_points(t)
    }
    fn smooth(&self) -> bool {
        self.is_smooth()
    }
}

impl HeatExtension for MollifiedDrift {
    fn dim(&self) -> usize {
        self.source.dim
    }
    fn heat_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.heat_eval(t, x, out)
    }
    fn points(&self, t: f64) -> Vec<Vec<f64>> {
        self.source.evaluation_points(t + self.tau)
    }
    fn smooth(&self) -> bool {
        true
    }
}

/// `a − b`, both shifted by a common extra smoothing time.
pub struct Difference<'a> {
    pub a: &'a dyn HeatExtension,
    pub b: &'a dyn HeatExtension,
    pub extra: f64,
}

impl HeatExtension for Difference<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn heat_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        self.a.heat_at(t + self.extra, x, out);
        self.b.heat_at(t + self.extra, x, &mut tmp);
        for (o, v) in out.iter_mut().zip(tmp) {
            *o -= v;
        }
    }
    fn points(&self, t: f64) -> Vec<Vec<f64>> {
        let mut p = self.a.points(t + self.extra);
        p.extend(self.b.points(t + self.extra));
        p
    }
    fn smooth(&self) -> bool {
        self.extra > 0.0 || (self.a.smooth() && self.b.smooth())
    }
}

fn heat_sup(f: &dyn HeatExtension, t: f64) -> Result<f64> {
    if t <= 0.0 && !f.smooth() {
        return Err(LabError::Domain("a distribution has no pointwise values at t = 0".into()));
    }
    let mut out = vec![0.0; f.dim()];
    let mut best = 0.0_f64;
    for p in f.points(t) {
        f.heat_at(t, &p, &mut out);
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        best = best.max(norm);
    }
    Ok(best)
}

macro_rules! heat_smoothing_via_extension {
    ($($t:ty),*) => {$(
        impl HeatSmoothing for $t {
            fn smoothed_sup(&self, t: f64) -> Result<f64> {
                heat_sup(self, t)
            }
        }
    )*};
}
heat_smoothing_via_extension!(DistributionalDrift, MollifiedDrift, Difference<'_>);

/// Extra smoothing applied to both sides when a difference involves a
/// non-smooth drift, so both are compared at a common fine level.
pub const FINE_LEVEL_TIME: f64 = 1.0 / 1_048_576.0;

/// Surrogate `C^{α'}` distance between `b` and `g`.
pub fn c_alpha_minus_distance(
    b: &dyn HeatExtension,
    g: &dyn HeatExtension,
    alpha_prime: f64,
    t_levels: &[f64],
) -> Result<f64> {
    if alpha_prime >= 0.0 {
        return Err(LabError::Unsupported("distance needs a negative exponent".into()));
    }
    if b.dim() != g.dim() {
        return Err(LabError::Mismatch("drifts live in different dimensions".into()));
    }
    let extra = if b.smooth() && g.smooth() { 0.0 } else { FINE_LEVEL_TIME };
    crate::gaussian::besov_norm_neg(&Difference { a: b, b: g, extra }, alpha_prime, t_levels)
}

/// Condition (A): `α > 1/2 − 1/(2H)`.
pub fn admissible_weak(alpha: f64, hurst: HurstIndex) -> bool {
    alpha > 0.5 - 1.0 / (2.0 * hurst.value())
}

/// Condition (B1) `(1 + αH)(α + 1/(2H)) > 1/2`, or (B2) a nonnegative measure.
pub fn admissible_strong_d1(alpha: f64, hurst: HurstIndex, nonneg_measure: bool) -> bool {
    let h = hurst.value();
    nonneg_measure || (1.0 + alpha * h) * (alpha + 1.0 / (2.0 * h)) > 0.5
}

/// SHE counterpart of (A): `α > −3/2`.
pub fn admissible_she(alpha: f64) -> bool {
    alpha > -1.5
}

/// Whether the drift is a nonnegative measure (relevant for (B2)).
pub fn is_nonnegative_measure(b: &DistributionalDrift) -> bool {
    let sign_ok = b.scale >= 0.0;
    match &b.kind {
        DriftKind::DiracComb(atoms) => sign_ok && b.dim == 1 && atoms.iter().all(|a| a.mass[0] >= 0.0),
        DriftKind::UniformMeasure { mass, .. } => sign_ok && *mass >= 0.0,
        _ => false,
    }
}

/// Ids of the shipped catalog.
pub fn catalog_ids() -> Vec<&'static str> {
    vec![
        "dirac@0:mass=1",
        "dirac-pair@0.5:mass=1",
        "weierstrass:gamma=0.3:deriv",
        "weierstrass:gamma=0.5:deriv",
        "measure:uniform[0,0.5]",
        "smooth:zero",
        "smooth:const=1",
        "smooth:linear=-1",
        "smooth:sin:amp=1:freq=1",
        "smooth:tanh",
    ]
}

fn num(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| LabError::Config(format!("bad number '{s}' in {what}")))
}

fn nums(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| num(p, what)).collect()
}

/// Parses a drift id such as `dirac@0:mass=1`, `measure:uniform[0,0.5]`,
/// `weierstrass:gamma=0.3:deriv` or `smooth:sin:amp=2`. A trailing
/// `:alpha=<a>` overrides the nominal regularity.
pub fn parse_drift(id: &str) -> Result<DistributionalDrift> {
    let mut parts: Vec<&str> = id.split(':').collect();
    let mut alpha = None;
    let mut dim = 1usize;
    let mut opts = std::collections::BTreeMap::new();
    let head = parts.remove(0);
    let mut flags = Vec::new();
    for p in parts {
        match p.split_once('=') {
            Some(("alpha", v)) => alpha = Some(num(v, id)?),
            Some(("dim", v)) => dim = num(v, id)? as usize,
            Some((k, v)) => {
                opts.insert(k.to_string(), v.to_string());
            }
            None => flags.push(p),
        }
    }
    let opt = |k: &str, default: f64| -> Result<f64> { opts.get(k).map(|v| num(v, id)).unwrap_or(Ok(default)) };
    let drift = if let Some(loc) = head.strip_prefix("dirac-pair@") {
        DistributionalDrift::dirac_pair(num(loc, id)?, opt("mass", 1.0)?)
    } else if let Some(loc) = head.strip_prefix("dirac@") {
        let location = nums(loc, id)?;
        let d = location.len();
        let mass = match opts.get("mass") {
            Some(m) => {
                let m = nums(m, id)?;
                if m.len() == d {
                    m
                } else if m.len() == 1 {
                    vec![m[0]; d]
                } else {
                    return Err(LabError::Config(format!("mass in '{id}' must have 1 or {d} entries")));
                }
            }
            None => vec![1.0; d],
        };
        if d == 1 {
            DistributionalDrift::dirac(location[0], mass[0])
        } else {
            DistributionalDrift::dirac_comb(vec![Atom { location, mass }])?
        }
    } else if head == "measure" {
        let spec = flags.first().ok_or_else(|| LabError::Config(format!("measure id '{id}' lacks a shape")))?;
        let inner = spec
            .strip_prefix("uniform[")
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| LabError::Config(format!("unknown measure shape in '{id}'")))?;
        let b = nums(inner, id)?;
        if b.len() != 2 {
            return Err(LabError::Config(format!("uniform measure needs [lo,hi] in '{id}'")));
        }
        // Default total mass 1.
        DistributionalDrift::uniform_measure(b[0], b[1], opt("mass", 1.0)?)?
    } else if head == "weierstrass" {
        if !flags.contains(&"deriv") {
            return Err(LabError::Config(format!("only the derivative of the Weierstrass function is a drift: '{id}'")));
        }
        DistributionalDrift::weierstrass_derivative(opt("gamma", 0.5)?)?
    } else if head == "smooth" {
        let which = flags.first().copied().unwrap_or("");
        let (f, name) = if let Some(c) = opts.get("const") {
            (SmoothFn::Constant(num(c, id)?), "const")
        } else if let Some(a) = opts.get("linear") {
            (SmoothFn::Linear(num(a, id)?), "linear")
        } else {
            match which {
                "zero" => (SmoothFn::Constant(0.0), "zero"),
                "sin" => (SmoothFn::Sine { amp: opt("amp", 1.0)?, freq: opt("freq", 1.0)? }, "sin"),
                "tanh" => {
                    let s = opt("scale", 1.0)?;
                    (SmoothFn::Custom(Arc::new(move |x: f64| (s * x).tanh())), "tanh")
                }
                other => return Err(LabError::Config(format!("unknown smooth drift '{other}' in '{id}'"))),
            }
        };
        let _ = name;
        DistributionalDrift::smooth(f, dim, id)
    } else {
        return Err(LabError::Config(format!("unknown drift id '{id}'")));
    };
    let mut drift = drift;
    drift.id = id.to_string();
    if let Some(a) = alpha {
        drift.nominal_alpha = a;
    }
    Ok(drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{besov_norm_neg, default_t_levels};

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn dirac_mollification_closed_form() {
        let b = DistributionalDrift::dirac(0.0, 1.0);
        let b4 = mollify(&b, 4).unwrap();
        assert!((b4.eval1(0.0) - 0.7978845608028654).abs() < 1e-15);
        let scaled = mollify(&b.scaled(-2.5), 4).unwrap();
        for x in [-0.3, 0.0, 0.8] {
            assert!((scaled.eval1(x) + 2.5 * b4.eval1(x)).abs() < 1e-15);
        }
        assert!(mollify(&b, 0).is_err());
    }

    #[test]
    fn semigroup_composition_on_dirac() {
        let b = DistributionalDrift::dirac_pair(0.3, 1.0);
        for (n, m) in [(4u64, 16u64), (7, 3)] {
            let lhs = mollify(&b.mollified_as_drift(n), m).unwrap();
            let rhs = mollify_time(&b, 1.0 / n as f64 + 1.0 / m as f64).unwrap();
            for i in -20..=20 {
                let x = i as f64 * 0.1;
                assert!((lhs.eval1(x) - rhs.eval1(x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn dirac_surrogate_norm_is_gaussian_peak() {
        let b = DistributionalDrift::dirac(0.0, 1.0);
        let v = besov_norm_neg(&b, -1.0, &default_t_levels()).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).powf(-0.5)).abs() < 1e-12);
        let b_fine = mollify(&b, 1 << 20).unwrap();
        let w = besov_norm_neg(&b_fine, -1.0, &default_t_levels()).unwrap();
        assert!(w < v && (v - w) < 1e-4);
    }

    #[test]
    fn smooth_mollification_converges_with_halving_error() {
        let b = parse_drift("smooth:sin:amp=1:freq=3").unwrap();
        let err = |n: u64| {
            let bn = mollify(&b, n).unwrap();
            (0..200).map(|i| i as f64 * 0.05).map(|x| (bn.eval1(x) - (3.0 * x).sin()).abs()).fold(0.0, f64::max)
        };
        let (e4, e16, e64) = (err(4), err(16), err(64));
        assert!(e16 < 0.5 * e4 && e64 < 0.5 * e16, "{e4} {e16} {e64}");
    }

    #[test]
    fn custom_smooth_matches_quadrature_oracle() {
        // Gauss–Hermite against a plain trapezoid of the heat kernel.
        let b = parse_drift("smooth:tanh").unwrap();
        let bn = mollify(&b, 8).unwrap();
        let tau: f64 = 1.0 / 8.0;
        for x in [-1.0, 0.0, 0.4, 2.0] {
            let n = 40_000;
            let (lo, hi) = (x - 12.0 * tau.sqrt(), x + 12.0 * tau.sqrt());
            let dz = (hi - lo) / n as f64;
            let oracle: f64 = (0..=n)
                .map(|i| {
                    let y = lo + i as f64 * dz;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    w * dz * gamma_1d(tau, x - y) * y.tanh()
                })
                .sum();
            assert!((bn.eval1(x) - oracle).abs() < 1e-10, "{x}: {} vs {oracle}", bn.eval1(x));
        }
    }

    #[test]
    fn distance_properties() {
        let b = DistributionalDrift::dirac(0.0, 1.0);
        let levels = default_t_levels();
        assert_eq!(c_alpha_minus_distance(&b, &b, -1.1, &levels).unwrap(), 0.0);
        assert!(c_alpha_minus_distance(&b, &b, 0.0, &levels).is_err());
        let mut last = f64::INFINITY;
        for n in [4u64, 16, 64, 256] {
            let bn = mollify(&b, n).unwrap();
            let d = c_alpha_minus_distance(&b, &bn, -1.1, &levels).unwrap();
            assert!(d < last, "n={n}: {d} !< {last}");
            last = d;
        }
        let (x, y, z) = (
            mollify(&b, 4).unwrap(),
            parse_drift("dirac@0.2:mass=0.5").unwrap(),
            parse_drift("measure:uniform[0,0.5]").unwrap(),
        );
        let dxy = c_alpha_minus_distance(&x, &y, -1.1, &levels).unwrap();
        let dyz = c_alpha_minus_distance(&y, &z, -1.1, &levels).unwrap();
        let dxz = c_alpha_minus_distance(&x, &z, -1.1, &levels).unwrap();
        assert!(dxz <= dxy + dyz + 1e-12);
    }

    #[test]
    fn catalog_norms_bounded_under_mollification() {
        let levels = default_t_levels();
        for id in catalog_ids() {
            let b = parse_drift(id).unwrap();
            if matches!(b.kind, DriftKind::Smooth(SmoothFn::Linear(_))) {
                continue; // unbounded on R; its sup is the box size
            }
            let alpha = if b.nominal_alpha < 0.0 { b.nominal_alpha } else { -0.1 };
            let reference = besov_norm_neg(&b, alpha, &levels).unwrap();
            for n in [4u64, 16, 64, 256, 1024] {
                let v = besov_norm_neg(&mollify(&b, n).unwrap(), alpha, &levels).unwrap();
                assert!(v.is_finite() && v <= reference * 1.1 + 1e-12, "{id} n={n}: {v} vs {reference}");
            }
        }
    }

    #[test]
    fn admissibility_predicates() {
        assert!(admissible_weak(-0.4, h(0.5)));
        assert!(admissible_weak(-1.4, h(0.25)));
        assert!(!admissible_weak(0.5 - 1.0 / (2.0 * 0.25), h(0.25)));
        assert!(admissible_strong_d1(-1.0, h(0.25), false));
        assert!(admissible_strong_d1(-7.0, h(0.25), true));
        assert!(admissible_strong_d1(-1.05, h(0.25), false));
        assert!(!admissible_strong_d1(-1.4, h(0.25), false));
    }

    #[test]
    fn parse_ids() {
        for id in catalog_ids() {
            assert_eq!(parse_drift(id).unwrap().id, id);
        }
        let w = parse_drift("weierstrass:gamma=0.3:deriv").unwrap();
        assert!((w.nominal_alpha + 0.7).abs() < 1e-15);
        assert_eq!(parse_drift("dirac@0:alpha=-0.9").unwrap().nominal_alpha, -0.9);
        let d2 = parse_drift("dirac@0,1:mass=1,0").unwrap();
        assert_eq!(d2.dim, 2);
        assert!(parse_drift("bogus").is_err());
        assert!(parse_drift("weierstrass:gamma=0.3").is_err());
        assert!(is_nonnegative_measure(&parse_drift("measure:uniform[0,0.5]").unwrap()));
        assert!(!is_nonnegative_measure(&parse_drift("dirac-pair@0.5").unwrap()));
    }
}
