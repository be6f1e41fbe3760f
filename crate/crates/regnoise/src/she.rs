//! Stochastic heat equation `∂_t u = (1/2)∂²u + b(u) + Ẇ` on [0,1] with
//! periodic or Neumann boundary, solved by spectral Galerkin truncation.
//!
//! The noise enters mode by mode as exact Ornstein–Uhlenbeck innovations, so
//! the stochastic convolution has the correct law at every retained mode.
//! The drift is evaluated pointwise on the grid and projected back.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;
use std::sync::Arc;

use crate::drifts::{admissible_she, mollify, DistributionalDrift, MollifiedDrift};
use crate::error::{LabError, Result};
use crate::gaussian::{apply_semigroup, Bc, GridFunction, HeatKernelSpec, SpectralBasis};
use crate::metrics::Estimate;

/// Number of space nodes on [0,1].
pub const SPACE_NODES: usize = 257;

/// Parameters of one SHE run.
#[derive(Debug, Clone)]
pub struct SheConfig {
    pub u0: GridFunction,
    pub drift: DistributionalDrift,
    pub n_moll: u64,
    pub bc: Bc,
    pub modes: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
}

impl SheConfig {
    pub fn model(&self) -> Result<SheModel> {
        SheModel::new(self.bc, self.modes, self.n_steps, self.dt)
    }

    pub fn mollified(&self) -> Result<MollifiedDrift> {
        if self.drift.dim != 1 {
            return Err(LabError::Unsupported("the heat equation takes a scalar drift".into()));
        }
        mollify(&self.drift, self.n_moll)
    }

    pub fn warnings(&self) -> Vec<String> {
        if admissible_she(self.drift.nominal_alpha) {
            Vec::new()
        } else {
            vec![format!("alpha = {} violates alpha > -3/2 (contrast run)", self.drift.nominal_alpha)]
        }
    }
}

/// Spectral discretization shared by every field of an experiment.
#[derive(Debug, Clone)]
pub struct SheModel {
    pub basis: Arc<SpectralBasis>,
    pub dt: f64,
    pub n_steps: usize,
    /// `e^{−μ_k dt}`.
    decay: Vec<f64>,
    /// Standard deviation of the exact OU innovation of mode k over one step.
    innovation_sd: Vec<f64>,
}

impl SheModel {
    pub fn new(bc: Bc, modes: usize, n_steps: usize, dt: f64) -> Result<Self> {
        if modes < 16 {
            return Err(LabError::Domain(format!("at least 16 modes are needed, got {modes}")));
        }
        if !(dt > 0.0) || n_steps == 0 {
            return Err(LabError::Domain("time grid must be nonempty with dt > 0".into()));
        }
        let basis = Arc::new(SpectralBasis::new(bc, SPACE_NODES, modes)?);
        let decay = basis.eigen.iter().map(|mu| (-mu * dt).exp()).collect();
        let innovation_sd = basis.eigen.iter().map(|&mu| ou_variance(mu, dt).sqrt()).collect();
        Ok(Self { basis, dt, n_steps, decay, innovation_sd })
    }

    pub fn modes(&self) -> usize {
        self.basis.modes
    }

    pub fn bc(&self) -> Bc {
        self.basis.bc
    }

    pub fn grid(&self) -> Vec<f64> {
        self.basis.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| i as f64 * self.dt).collect()
    }

    /// Draws the per-step, per-mode innovations for one noise realization.
    pub fn noise(&self, seed: u64) -> NoiseModes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.modes();
        let mut innovations = Vec::with_capacity(self.n_steps * m);
        for _ in 0..self.n_steps {
            for k in 0..m {
                let z: f64 = StandardNormal.sample(&mut rng);
                innovations.push(self.innovation_sd[k] * z);
            }
        }
        NoiseModes { seed, modes: m, n_steps: self.n_steps, innovations }
    }

    fn check_noise(&self, noise: &NoiseModes) -> Result<()> {
        if noise.modes != self.modes() || noise.n_steps != self.n_steps {
            return Err(LabError::Mismatch("noise modes do not match the model".into()));
        }
        Ok(())
    }

    /// Mode coefficients of the stochastic convolution; `V_0 = 0`.
    pub fn convolution(&self, noise: &NoiseModes) -> Result<SpaceTimeField> {
        self.check_noise(noise)?;
        let m = self.modes();
        let mut state = vec![0.0; (self.n_steps + 1) * m];
        for i in 0..self.n_steps {
            let (prev, next) = state.split_at_mut((i + 1) * m);
            let prev = &prev[i * m..];
            for k in 0..m {
                next[k] = self.decay[k] * prev[k] + noise.innovations[i * m + k];
            }
        }
        Ok(self.field_from_modes(state))
    }

    /// Exponential-Euler mild solution
    /// `a_{i+1} = e^{−μ dt}(a_i + dt·proj b(u_i)) + η_i`.
    pub fn solve_mild(&self, u0: &GridFunction, drift: &MollifiedDrift, noise: &NoiseModes) -> Result<SpaceTimeField> {
        self.run(u0, noise, |_, vals, out| {
            for (o, v) in out.iter_mut().zip(vals) {
                *o = drift.eval1(*v);
            }
        })
    }

    fn initial_modes(&self, u0: &GridFunction) -> Result<Vec<f64>> {
        if u0.len() != SPACE_NODES {
            return Err(LabError::Mismatch(format!("initial condition needs {SPACE_NODES} nodes, got {}", u0.len())));
        }
        Ok(self.basis.project(&u0.values))
    }

    /// Generic stepping loop; `force(i, values, out)` writes the pointwise forcing.
    fn run(
        &self,
        u0: &GridFunction,
        noise: &NoiseModes,
        mut force: impl FnMut(usize, &[f64], &mut [f64]),
    ) -> Result<SpaceTimeField> {
        self.check_noise(noise)?;
        let m = self.modes();
        let nodes = SPACE_NODES;
        let mut state = Vec::with_capacity((self.n_steps + 1) * m);
        state.extend(self.initial_modes(u0)?);
        let mut values = vec![0.0; nodes];
        let mut forcing = vec![0.0; nodes];
        let mut fc = vec![0.0; m];
        for i in 0..self.n_steps {
            self.basis.synthesize_into(&state[i * m..(i + 1) * m], &mut values);
            force(i, &values, &mut forcing);
            if let Some(node) = forcing.iter().position(|v| !v.is_finite()) {
                return Err(LabError::NonFinite { step: i, node: Some(node) });
            }
            self.basis.project_into(&forcing, &mut fc);
            for k in 0..m {
                let a = self.decay[k] * (state[i * m + k] + self.dt * fc[k]) + noise.innovations[i * m + k];
                if !a.is_finite() {
                    return Err(LabError::NonFinite { step: i + 1, node: None });
                }
                state.push(a);
            }
        }
        Ok(self.field_from_modes(state))
    }

    fn field_from_modes(&self, mode_state: Vec<f64>) -> SpaceTimeField {
        let m = self.modes();
        let steps = mode_state.len() / m;
        let mut values = vec![0.0; steps * SPACE_NODES];
        for (coeffs, out) in mode_state.chunks(m).zip(values.chunks_mut(SPACE_NODES)) {
            self.basis.synthesize_into(coeffs, out);
        }
        SpaceTimeField { dt: self.dt, n_nodes: SPACE_NODES, modes: m, values, mode_state }
    }

    /// Solves for `u` under `b`, `v` under `g`, and `ṽ` under `g` plus the
    /// push `λ(u − ṽ)`, all from `u0` on the same noise.
    pub fn coupled_field(
        &self,
        u0: &GridFunction,
        b: &MollifiedDrift,
        g: &MollifiedDrift,
        lambda: f64,
        noise: &NoiseModes,
    ) -> Result<SheCouplingRun> {
        self.stiffness(lambda)?;
        let u = self.solve_mild(u0, b, noise)?;
        let v = self.solve_mild(u0, g, noise)?;
        let v_tilde = self.pushed(u0, &u, g, lambda, noise)?;
        Ok(SheCouplingRun { u, v, v_tilde, lambda })
    }

    fn stiffness(&self, lambda: f64) -> Result<()> {
        if lambda * self.dt >= 0.5 {
            return Err(LabError::Stiffness { product: lambda * self.dt });
        }
        Ok(())
    }

    /// `ṽ` under `g` pushed towards a given `u` with strength `λ`.
    pub fn pushed(
        &self,
        u0: &GridFunction,
        u: &SpaceTimeField,
        g: &MollifiedDrift,
        lambda: f64,
        noise: &NoiseModes,
    ) -> Result<SpaceTimeField> {
        self.stiffness(lambda)?;
        if u.n_steps() != self.n_steps || u.modes != self.modes() {
            return Err(LabError::Mismatch("target field does not match the model".into()));
        }
        self.run(u0, noise, |i, vals, out| {
            let ui = u.slice(i);
            for ((o, y), x) in out.iter_mut().zip(vals).zip(ui) {
                *o = g.eval1(*y) + lambda * (x - y);
            }
        })
    }
}

/// Variance of `∫_0^t e^{−μ(t−r)} dW_r`.
fn ou_variance(mu: f64, t: f64) -> f64 {
    if mu == 0.0 {
        t
    } else {
        -(-2.0 * mu * t).exp_m1() / (2.0 * mu)
    }
}

/// Per-step OU innovations of every retained mode, step-major.
#[derive(Debug, Clone)]
pub struct NoiseModes {
    pub seed: u64,
    pub modes: usize,
    pub n_steps: usize,
    pub innovations: Vec<f64>,
}

/// Grid values of a field at every time step together with its mode coefficients.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub dt: f64,
    pub n_nodes: usize,
    pub modes: usize,
    /// `(N+1) × n_nodes`.
    pub values: Vec<f64>,
    /// `(N+1) × modes`.
    pub mode_state: Vec<f64>,
}

impl SpaceTimeField {
    pub fn n_steps(&self) -> usize {
        self.values.len() / self.n_nodes - 1
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_nodes..(i + 1) * self.n_nodes]
    }

    pub fn coeffs(&self, i: usize) -> &[f64] {
        &self.mode_state[i * self.modes..(i + 1) * self.modes]
    }

    pub fn at(&self, i: usize, node: usize) -> f64 {
        self.values[i * self.n_nodes + node]
    }

    /// `self − other`, slice by slice and mode by mode.
    pub fn difference(&self, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        if self.values.len() != other.values.len() || self.modes != other.modes {
            return Err(LabError::Mismatch("fields live on different grids".into()));
        }
        Ok(SpaceTimeField {
            dt: self.dt,
            n_nodes: self.n_nodes,
            modes: self.modes,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            mode_state: self.mode_state.iter().zip(&other.mode_state).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest gap between stored values and the synthesized mode state.
    pub fn round_trip_error(&self, basis: &SpectralBasis) -> f64 {
        let mut buf = vec![0.0; self.n_nodes];
        let mut worst = 0.0_f64;
        for i in 0..=self.n_steps() {
            basis.synthesize_into(self.coeffs(i), &mut buf);
            for (a, b) in buf.iter().zip(self.slice(i)) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    /// Keeps every `stride`-th time slice.
    pub fn downsample(&self, stride: usize) -> Result<SpaceTimeField> {
        if stride == 0 || !self.n_steps().is_multiple_of(stride) {
            return Err(LabError::Domain(format!("stride {stride} does not divide {} steps", self.n_steps())));
        }
        let keep: Vec<usize> = (0..=self.n_steps()).step_by(stride).collect();
        Ok(SpaceTimeField {
            dt: self.dt * stride as f64,
            n_nodes: self.n_nodes,
            modes: self.modes,
            values: keep.iter().flat_map(|&i| self.slice(i).iter().copied()).collect(),
            mode_state: keep.iter().flat_map(|&i| self.coeffs(i).iter().copied()).collect(),
        })
    }

    /// CSV matrix, one row per time step, first column the time.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n_nodes).map(|j| format!("x{j}")));
        out.write_record(&header)?;
        for i in 0..=self.n_steps() {
            let mut row = vec![format!("{}", i as f64 * self.dt)];
            row.extend(self.slice(i).iter().map(|v| format!("{v}")));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `u` under `b`, `v` under `g`, and the pushed `ṽ`, on one noise.
#[derive(Debug, Clone)]
pub struct SheCouplingRun {
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
    pub v_tilde: SpaceTimeField,
    pub lambda: f64,
}

impl SheCouplingRun {
    /// Shift field `β = λ(u − ṽ)`, `(N+1) × nodes`.
    pub fn beta(&self) -> Vec<f64> {
        self.u.values.iter().zip(&self.v_tilde.values).map(|(a, b)| self.lambda * (a - b)).collect()
    }

    pub fn sup_gap(&self) -> f64 {
        self.u.values.iter().zip(&self.v_tilde.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub fn sample_stochastic_convolution(cfg: &SheConfig, seed: u64) -> Result<SpaceTimeField> {
    let model = cfg.model()?;
    model.convolution(&model.noise(seed))
}

pub fn solve_mild(cfg: &SheConfig, noise: &NoiseModes) -> Result<SpaceTimeField> {
    cfg.model()?.solve_mild(&cfg.u0, &cfg.mollified()?, noise)
}

/// Truncated series `Σ_k (1 − e^{−2μ_k t})/(2μ_k) e_k(x)²` for `Var V_t(x)`.
pub fn convolution_variance(basis: &SpectralBasis, t: f64, node: usize) -> f64 {
    (0..basis.modes).map(|k| ou_variance(basis.eigen[k], t) * basis.mode(k)[node].powi(2)).sum()
}

/// `Var(V_t(x) − E^s V_t(x))`, which depends only on `t − s`.
pub fn convolution_conditional_variance(basis: &SpectralBasis, s: f64, t: f64, node: usize) -> f64 {
    convolution_variance(basis, t - s, node)
}

/// `sup_{t,x} |P_{2−t} f_t(x)|` over the grid, applied mode by mode.
pub fn weighted_norm(field: &SpaceTimeField, basis: &SpectralBasis) -> Result<f64> {
    let horizon = field.n_steps() as f64 * field.dt;
    if horizon > 1.0 + 1e-12 {
        return Err(LabError::Domain(format!("weighted norm needs fields on [0,1], got horizon {horizon}")));
    }
    if field.modes != basis.modes {
        return Err(LabError::Mismatch("field and basis disagree on the mode count".into()));
    }
    let mut scaled = vec![0.0; basis.modes];
    let mut buf = vec![0.0; basis.n_nodes];
    let mut best = 0.0_f64;
    for i in 0..=field.n_steps() {
        let lag = 2.0 - i as f64 * field.dt;
        for (k, (s, c)) in scaled.iter_mut().zip(field.coeffs(i)).enumerate() {
            *s = c * (-basis.eigen[k] * lag).exp();
        }
        basis.synthesize_into(&scaled, &mut buf);
        best = buf.iter().fold(best, |m, v| m.max(v.abs()));
    }
    Ok(best)
}

/// Upper bounds on the total variation between the laws of `v` and `ṽ`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ShePinsker {
    /// `(1/2) λ Leb(D)^{1/2} sup_{t,x} (E|u − ṽ|²)^{1/2}`.
    pub bound: Estimate,
    /// `(1/2) ∫∫ E β² dy dr`.
    pub kl: Estimate,
}

/// Pinsker-type bound from an ensemble of coupling runs with one λ.
pub fn pinsker_bound_she(runs: &[SheCouplingRun]) -> Result<ShePinsker> {
    let first = runs.first().ok_or(LabError::Ensemble { need: 100, got: 0 })?;
    let mut acc = PinskerAccumulator::new(first.lambda, first.u.values.len());
    for r in runs {
        acc.add_run(r)?;
    }
    acc.finish()
}

/// Squared gaps `(u − ṽ)²` on every `time_stride`-th slice, and the KL term
/// `(1/2) λ² ∫∫ (u − ṽ)² dy dr` of one run at full resolution.
pub fn coupling_parts(u: &SpaceTimeField, v_tilde: &SpaceTimeField, lambda: f64, time_stride: usize) -> Result<(Vec<f64>, f64)> {
    if u.values.len() != v_tilde.values.len() {
        return Err(LabError::Mismatch("fields live on different grids".into()));
    }
    if time_stride == 0 {
        return Err(LabError::Domain("time stride must be positive".into()));
    }
    let nodes = u.n_nodes;
    let w = crate::gaussian::trapezoid_weights(&crate::gaussian::unit_grid(nodes));
    let mut total = 0.0;
    let mut sq = Vec::new();
    for i in 0..=u.n_steps() {
        let row = u.slice(i).iter().zip(v_tilde.slice(i)).map(|(a, b)| (a - b).powi(2));
        if i < u.n_steps() {
            total += row.clone().zip(&w).map(|(g, wi)| g * wi).sum::<f64>() * u.dt;
        }
        if i % time_stride == 0 {
            sq.extend(row);
        }
    }
    Ok((sq, 0.5 * lambda * lambda * total))
}

/// Streaming form of [`pinsker_bound_she`]: runs can be dropped after [`Self::add_run`].
#[derive(Debug, Clone)]
pub struct PinskerAccumulator {
    lambda: f64,
    n: usize,
    sum_sq: Vec<f64>,
    sum_quart: Vec<f64>,
    kl: Vec<f64>,
}

impl PinskerAccumulator {
    pub fn new(lambda: f64, len: usize) -> Self {
        Self { lambda, n: 0, sum_sq: vec![0.0; len], sum_quart: vec![0.0; len], kl: Vec::new() }
    }

    pub fn add_run(&mut self, run: &SheCouplingRun) -> Result<()> {
        if run.lambda != self.lambda {
            return Err(LabError::Mismatch("runs mix different lambda values".into()));
        }
        let (sq, kl) = coupling_parts(&run.u, &run.v_tilde, run.lambda, 1)?;
        self.add_parts(&sq, kl)
    }

    pub fn add_parts(&mut self, sq: &[f64], kl: f64) -> Result<()> {
        if sq.len() != self.sum_sq.len() {
            return Err(LabError::Mismatch("runs live on different grids".into()));
        }
        self.n += 1;
        for ((s, q), g) in self.sum_sq.iter_mut().zip(self.sum_quart.iter_mut()).zip(sq) {
            *s += g;
            *q += g * g;
        }
        self.kl.push(kl);
        Ok(())
    }

    pub fn finish(&self) -> Result<ShePinsker> {
        if self.n < 100 {
            return Err(LabError::Ensemble { need: 100, got: self.n });
        }
        let n = self.n as f64;
        let (arg, _) = self
            .sum_sq
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
        let m2 = self.sum_sq[arg] / n;
        let m4 = self.sum_quart[arg] / n;
        let norm = m2.sqrt();
        let se_m2 = ((m4 - m2 * m2).max(0.0) / (n - 1.0)).sqrt();
        let norm_se = if norm > 0.0 { se_m2 / (2.0 * norm) } else { 0.0 };
        let leb = 1.0_f64;
        let factor = 0.5 * self.lambda * leb.sqrt();
        let bound = Estimate { value: factor * norm, stderr: factor * norm_se, n: self.n };
        Ok(ShePinsker { bound, kl: Estimate::mean_of(&self.kl) })
    }
}

/// Largest `|P_t f(x) − P_t f(y)| t^{1/2} / |x − y|` over grid pairs, per level.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LipschitzReport {
    pub t_levels: Vec<f64>,
    /// One constant per level, maximized over probes.
    pub constants: Vec<f64>,
    /// Largest relative deviation of the constants from their mean.
    pub spread: f64,
}

pub fn kernel_lipschitz_check(bc: Bc, t_levels: &[f64], probes: &[GridFunction]) -> Result<LipschitzReport> {
    if t_levels.iter().any(|t| !(*t > 0.0)) {
        return Err(LabError::Domain("kernel Lipschitz check needs t > 0".into()));
    }
    let spec = HeatKernelSpec::for_bc(bc);
    let mut constants = Vec::with_capacity(t_levels.len());
    for &t in t_levels {
        let mut best = 0.0_f64;
        for f in probes {
            let sup = f.sup_norm();
            if sup == 0.0 {
                continue;
            }
            let pf = apply_semigroup(&f.scaled(1.0 / sup), t, &spec)?;
            for i in 0..pf.len() {
                for j in i + 1..pf.len() {
                    let ratio = (pf.values[i] - pf.values[j]).abs() / (pf.grid[j] - pf.grid[i]).abs();
                    best = best.max(ratio);
                }
            }
            best = best.max(0.0);
        }
        constants.push(best * t.sqrt());
    }
    let mean = constants.iter().sum::<f64>() / constants.len().max(1) as f64;
    let spread = if mean > 0.0 {
        constants.iter().map(|c| (c / mean - 1.0).abs()).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(LipschitzReport { t_levels: t_levels.to_vec(), constants, spread })
}

/// Default probes with sup norm 1 on a 257-node grid.
pub fn lipschitz_probes() -> Vec<(&'static str, GridFunction)> {
    vec![
        ("sign", GridFunction::on_unit_interval(SPACE_NODES, |x| if x < 0.5 { -1.0 } else { 1.0 })),
        ("cos", GridFunction::on_unit_interval(SPACE_NODES, |x| (2.0 * std::f64::consts::PI * x).cos())),
        ("indicator", GridFunction::on_unit_interval(SPACE_NODES, |x| if (0.25..0.75).contains(&x) { 1.0 } else { 0.0 })),
    ]
}

/// Running values of `I_t(x) = ∫_0^t ∫_D e^{−λ(t−r)} p_{t−r}(x,y) f(V_r(y)) dy dr`
/// at one node, for each λ, computed per mode by
/// `J_{i+1} = e^{−(λ+μ)dt}(J_i + f̂_i dt)`. Returns `lambdas.len() × (N+1)`.
pub fn weighted_convolution_functional(
    v: &SpaceTimeField,
    f: &MollifiedDrift,
    basis: &SpectralBasis,
    lambdas: &[f64],
    node: usize,
) -> Vec<f64> {
    let m = basis.modes;
    let n = v.n_steps();
    let nodes = v.n_nodes;
    let mut fvals = vec![0.0; nodes];
    let mut fc = vec![0.0; m];
    let mut j = vec![0.0; lambdas.len() * m];
    let decays: Vec<f64> = lambdas
        .iter()
        .flat_map(|l| basis.eigen.iter().map(move |mu| (-(l + mu) * v.dt).exp()))
        .collect();
    let ek: Vec<f64> = (0..m).map(|k| basis.mode(k)[node]).collect();
    let mut out = vec![0.0; lambdas.len() * (n + 1)];
    for i in 0..n {
        for (o, x) in fvals.iter_mut().zip(v.slice(i)) {
            *o = f.eval1(*x);
        }
        basis.project_into(&fvals, &mut fc);
        for l in 0..lambdas.len() {
            let mut acc = 0.0;
            for k in 0..m {
                let idx = l * m + k;
                j[idx] = decays[idx] * (j[idx] + fc[k] * v.dt);
                acc += j[idx] * ek[k];
            }
            out[l * (n + 1) + i + 1] = acc;
        }
    }
    out
}

/// `[K]` diagnostic: `max (E|K_t(x) − P_{t−s}K_s(x)|^m)^{1/m} / (t−s)^κ` over
/// pairs of a dyadic time sub-grid (≤ 32 cells) and every 8th space node.
pub fn holder_field_lm(k_fields: &[&SpaceTimeField], basis: &SpectralBasis, kappa: f64, m: f64) -> Result<f64> {
    if k_fields.len() < 100 {
        return Err(LabError::Ensemble { need: 100, got: k_fields.len() });
    }
    let n = k_fields[0].n_steps();
    let dt = k_fields[0].dt;
    let cells = n.min(32);
    let stride = n / cells;
    let nodes: Vec<usize> = (0..basis.n_nodes).step_by(8).collect();
    let mut best = 0.0_f64;
    let mut shifted = vec![0.0; basis.modes];
    let mut buf = vec![0.0; basis.n_nodes];
    for a in 0..cells {
        for b in a + 1..=cells {
            let (si, ti) = (a * stride, b * stride);
            let lag = (ti - si) as f64 * dt;
            let mut moments = vec![0.0; nodes.len()];
            for field in k_fields {
                for (k, (s, c)) in shifted.iter_mut().zip(field.coeffs(si)).enumerate() {
                    *s = c * (-basis.eigen[k] * lag).exp();
                }
                basis.synthesize_into(&shifted, &mut buf);
                for (mo, &x) in moments.iter_mut().zip(&nodes) {
                    *mo += (field.at(ti, x) - buf[x]).abs().powf(m);
                }
            }
            for mo in moments {
                best = best.max((mo / k_fields.len() as f64).powf(1.0 / m) / lag.powf(kappa));
            }
        }
    }
    Ok(best)
}

/// `K = u − P_t u₀ − V`, all in mode space and synthesized on the grid.
pub fn drift_component(u: &SpaceTimeField, v: &SpaceTimeField, u0: &GridFunction, model: &SheModel) -> Result<SpaceTimeField> {
    let base = model.initial_modes(u0)?;
    let m = model.modes();
    let mut state = u.difference(v)?.mode_state;
    for i in 0..=u.n_steps() {
        let t = i as f64 * u.dt;
        for k in 0..m {
            state[i * m + k] -= base[k] * (-model.basis.eigen[k] * t).exp();
        }
    }
    Ok(model.field_from_modes(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drifts::parse_drift;

    fn zero_u0() -> GridFunction {
        GridFunction::on_unit_interval(SPACE_NODES, |_| 0.0)
    }

    #[test]
    fn convolution_starts_at_zero_and_round_trips() {
        let model = SheModel::new(Bc::Periodic, 64, 64, 1.0 / 64.0).unwrap();
        let v = model.convolution(&model.noise(1)).unwrap();
        assert!(v.slice(0).iter().all(|x| *x == 0.0));
        assert!(v.round_trip_error(&model.basis) < 1e-10);
        assert!(SheModel::new(Bc::Periodic, 8, 4, 0.1).is_err());
    }

    #[test]
    fn convolution_variance_matches_series() {
        let model = SheModel::new(Bc::Neumann, 128, 8, 1.0 / 16.0).unwrap();
        let node = 64;
        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|s| model.convolution(&model.noise(s)).unwrap().at(8, node)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
        let est = Estimate::mean_of(&sq);
        let exact = convolution_variance(&model.basis, 0.5, node);
        assert!((est.value - exact).abs() < 3.0 * est.stderr, "{} vs {exact} ± {}", est.value, est.stderr);
    }

    #[test]
    fn conditional_variance_grows_like_square_root() {
        let basis = SpectralBasis::new(Bc::Periodic, SPACE_NODES, 256).unwrap();
        let lags = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0];
        let ratios: Vec<f64> = lags.iter().map(|&l| convolution_conditional_variance(&basis, 0.2, 0.2 + l, 100) / l.sqrt()).collect();
        let c = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(c > 0.1, "{ratios:?}");
    }

    #[test]
    fn linear_and_constant_drift() {
        let model = SheModel::new(Bc::Neumann, 64, 64, 1.0 / 64.0).unwrap();
        let noise = model.noise(3);
        let u0 = GridFunction::on_unit_interval(SPACE_NODES, |x| (std::f64::consts::PI * x).cos());
        let zero = mollify(&parse_drift("smooth:zero").unwrap(), 1).unwrap();
        let u = model.solve_mild(&u0, &zero, &noise).unwrap();
        let v = model.convolution(&noise).unwrap();
        let k = drift_component(&u, &v, &u0, &model).unwrap();
        assert!(k.sup_abs() < 1e-12);
        let c = mollify(&parse_drift("smooth:const=1.5").unwrap(), 1).unwrap();
        let u = model.solve_mild(&u0, &c, &noise).unwrap();
        let k = drift_component(&u, &v, &u0, &model).unwrap();
        for i in 0..=64 {
            for x in k.slice(i) {
                assert!((x - 1.5 * i as f64 / 64.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenfunction_decays_without_noise() {
        let model = SheModel::new(Bc::Neumann, 32, 100, 0.01).unwrap();
        let quiet = NoiseModes { seed: 0, modes: 32, n_steps: 100, innovations: vec![0.0; 3200] };
        let e1 = GridFunction::on_unit_interval(SPACE_NODES, |x| 2f64.sqrt() * (std::f64::consts::PI * x).cos());
        let zero = mollify(&parse_drift("smooth:zero").unwrap(), 1).unwrap();
        let u = model.solve_mild(&e1, &zero, &quiet).unwrap();
        let decay = (-std::f64::consts::PI.powi(2) / 2.0).exp();
        for (a, b) in u.slice(100).iter().zip(&e1.values) {
            assert!((a - decay * b).abs() < 1e-6);
        }
    }

    #[test]
    fn coupling_identity_and_guard() {
        let model = SheModel::new(Bc::Periodic, 32, 64, 1.0 / 64.0).unwrap();
        let noise = model.noise(4);
        let b = mollify(&parse_drift("dirac@0:mass=1").unwrap(), 16).unwrap();
        let run = model.coupled_field(&zero_u0(), &b, &b, 8.0, &noise).unwrap();
        assert_eq!(run.u.values, run.v_tilde.values);
        assert!(matches!(model.coupled_field(&zero_u0(), &b, &b, 32.0, &noise), Err(LabError::Stiffness { .. })));
    }

    #[test]
    fn weighted_norm_cases() {
        let model = SheModel::new(Bc::Neumann, 32, 16, 1.0 / 16.0).unwrap();
        let quiet = NoiseModes { seed: 0, modes: 32, n_steps: 16, innovations: vec![0.0; 512] };
        let zero = model.convolution(&quiet).unwrap();
        assert_eq!(weighted_norm(&zero, &model.basis).unwrap(), 0.0);
        let k = 3;
        let mut state = vec![0.0; 17 * 32];
        for i in 0..=16 {
            state[i * 32 + k] = 1.0;
        }
        let f = model.field_from_modes(state);
        let expect = (-model.basis.eigen[k]).exp() * 2f64.sqrt();
        assert!((weighted_norm(&f, &model.basis).unwrap() - expect).abs() < 1e-12);
        let noisy = model.convolution(&model.noise(9)).unwrap();
        assert!(weighted_norm(&noisy, &model.basis).unwrap() <= noisy.sup_abs());
    }

    #[test]
    fn pinsker_she_homogeneity() {
        let model = SheModel::new(Bc::Periodic, 16, 32, 1.0 / 32.0).unwrap();
        let b = mollify(&parse_drift("dirac@0:mass=1").unwrap(), 64).unwrap();
        let g = mollify(&parse_drift("dirac@0:mass=1").unwrap(), 16).unwrap();
        let runs: Vec<SheCouplingRun> =
            (0..100).map(|s| model.coupled_field(&zero_u0(), &b, &g, 4.0, &model.noise(s)).unwrap()).collect();
        let base = pinsker_bound_she(&runs).unwrap();
        let doubled: Vec<SheCouplingRun> = runs.iter().cloned().map(|mut r| {
            r.lambda *= 2.0;
            r
        }).collect();
        let twice = pinsker_bound_she(&doubled).unwrap();
        assert!((twice.bound.value - 2.0 * base.bound.value).abs() < 1e-12 * base.bound.value.max(1e-300));
        let same: Vec<SheCouplingRun> = (0..100).map(|s| model.coupled_field(&zero_u0(), &b, &b, 4.0, &model.noise(s)).unwrap()).collect();
        assert_eq!(pinsker_bound_she(&same).unwrap().bound.value, 0.0);
        assert!(pinsker_bound_she(&runs[..50]).is_err());
    }

    #[test]
    fn lipschitz_constant_probe() {
        let flat = GridFunction::on_unit_interval(SPACE_NODES, |_| 1.0);
        let r = kernel_lipschitz_check(Bc::Periodic, &[0.01, 0.1], &[flat]).unwrap();
        assert!(r.constants.iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn weighted_functional_constant_closed_form() {
        let model = SheModel::new(Bc::Neumann, 16, 256, 1.0 / 256.0).unwrap();
        let v = model.convolution(&model.noise(5)).unwrap();
        let one = mollify(&parse_drift("smooth:const=1").unwrap(), 1).unwrap();
        let lambdas = [8.0, 32.0];
        let out = weighted_convolution_functional(&v, &one, &model.basis, &lambdas, 100);
        for (l, lam) in lambdas.iter().enumerate() {
            let exact = (1.0 - (-lam * 1.0f64).exp()) / lam;
            let got = out[l * 257 + 256];
            assert!((got - exact).abs() < lam * exact / 256.0, "{got} vs {exact}");
        }
    }
}
