//! Fractional Brownian motion from an explicit Brownian driver through the
//! Volterra kernel `K_H`, conditional means, an exact Cholesky generator used
//! as a covariance oracle, and the Girsanov weight `v` with its Pinsker bound.
//!
//! The kernel is normalized so that `Var B^H_t = t^{2H}`. Cell integrals of
//! `K_H(t,·)` are evaluated in closed form through incomplete Beta
//! functions, so the endpoint singularities at `s = 0` and `s = t` never need
//! point evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::beta::{beta, beta_reg};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use crate::error::{LabError, Result};
use crate::metrics::Estimate;

/// Hurst index restricted to `(0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h <= 0.5 {
            Ok(Self(h))
        } else {
            Err(LabError::Domain(format!("Hurst index must lie in (0, 1/2], got {h}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = LabError;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

/// Incomplete Beta integral `B_x(p, q) = ∫_0^x y^{p-1}(1-y)^{q-1} dy`.
fn inc_beta(x: f64, p: f64, q: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        beta(p, q)
    } else {
        beta(p, q) * beta_reg(p, q, x)
    }
}

/// Normalizing constant of the kernel (equal to 1 at `H = 1/2`).
pub fn kernel_constant(h: HurstIndex) -> f64 {
    let h = h.value();
    if h == 0.5 {
        return 1.0;
    }
    (2.0 * h / ((1.0 - 2.0 * h) * beta(1.0 - 2.0 * h, h + 0.5))).sqrt()
}

/// Point value of `K_H(t, s)`; zero for `s ≥ t`, infinite at `s = 0` when `H < 1/2`.
pub fn volterra_kernel(t: f64, s: f64, h: HurstIndex) -> f64 {
    if s >= t || t <= 0.0 {
        return 0.0;
    }
    if h.is_brownian() {
        return 1.0;
    }
    if s <= 0.0 {
        return f64::INFINITY;
    }
    let hv = h.value();
    let (a, b) = (1.0 - 2.0 * hv, hv + 0.5);
    let x = s / t;
    let first = x.powf(0.5 - hv) * (1.0 - x).powf(hv - 0.5);
    let tail = 1.0 - beta_reg(a, b, x);
    let second = (0.5 - hv) * x.powf(hv - 0.5) * beta(a, b) * tail;
    kernel_constant(h) * t.powf(hv - 0.5) * (first + second)
}

/// `∫_0^x y^p K_H(1, y) dy` for `p ∈ {0, 1}` and `x ∈ [0, 1]`.
pub fn kernel_moment_antiderivative(x: f64, h: HurstIndex, p: u32) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let pf = p as f64;
    if h.is_brownian() {
        return x.powf(pf + 1.0) / (pf + 1.0);
    }
    let hv = h.value();
    let (a, b) = (1.0 - 2.0 * hv, hv + 0.5);
    let bab = beta(a, b);
    let lead = inc_beta(x, 1.5 - hv + pf, b);
    let e = b + pf;
    let reg = if x >= 1.0 { 1.0 } else if x <= 0.0 { 0.0 } else { beta_reg(a, b, x) };
    let correction = bab * x.powf(e) * (1.0 - reg) / e + lead / e;
    kernel_constant(h) * (lead + (0.5 - hv) * correction)
}

/// `∫_{lo}^{hi} K_H(t, s) ds` in closed form.
pub fn kernel_cell_integral(t: f64, lo: f64, hi: f64, h: HurstIndex) -> f64 {
    if t <= 0.0 || hi <= lo {
        return 0.0;
    }
    let hi = hi.min(t);
    let lo = lo.max(0.0);
    if hi <= lo {
        return 0.0;
    }
    t.powf(h.value() + 0.5)
        * (kernel_moment_antiderivative(hi / t, h, 0) - kernel_moment_antiderivative(lo / t, h, 0))
}

/// Lower-triangular table of kernel cell averages on a uniform grid.
///
/// Row `i` (for `t_i = i·dt`, `1 ≤ i ≤ N`) holds `i` entries indexed by the
/// driver cell `[s_j, s_{j+1})`. Off-diagonal entries are exact cell
/// averages. The diagonal cell `j = i-1` is set so that each row has
/// `Σ_j K̄[i][j]² dt = t_i^{2H}` exactly; plain averaging there loses the
/// non-square-integrable part of the endpoint singularity and would bias the
/// variance noticeably at the first few grid times.
#[derive(Debug)]
pub struct VolterraKernelTable {
    hurst: HurstIndex,
    n_steps: usize,
    dt: f64,
    entries: Vec<f64>,
    suffix_sq: OnceLock<Vec<f64>>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i - 1) / 2
}

impl VolterraKernelTable {
    pub fn new(hurst: HurstIndex, n_steps: usize, dt: f64) -> Result<Self> {
        if n_steps == 0 || !(dt > 0.0) {
            return Err(LabError::Domain("kernel table needs n_steps ≥ 1 and dt > 0".into()));
        }
        let len = row_offset(n_steps + 1);
        let mut entries = vec![0.0; len];
        if hurst.is_brownian() {
            entries.iter_mut().for_each(|e| *e = 1.0);
        } else {
            let hv = hurst.value();
            let mut anti = Vec::with_capacity(n_steps + 1);
            for i in 1..=n_steps {
                let scale = (i as f64).powf(hv + 0.5) * dt.powf(hv - 0.5);
                anti.clear();
                anti.extend((0..=i).map(|j| kernel_moment_antiderivative(j as f64 / i as f64, hurst, 0)));
                let row = &mut entries[row_offset(i)..row_offset(i) + i];
                let mut mass = 0.0;
                for j in 0..i - 1 {
                    let avg = scale * (anti[j + 1] - anti[j]);
                    row[j] = avg;
                    mass += avg * avg * dt;
                }
                let target = (i as f64 * dt).powf(2.0 * hv);
                let rest = target - mass;
                if !(rest > 0.0) {
                    return Err(LabError::Numeric(format!(
                        "kernel row {i} overshoots its variance ({mass} ≥ {target})"
                    )));
                }
                row[i - 1] = (rest / dt).sqrt();
            }
        }
        Ok(Self { hurst, n_steps, dt, entries, suffix_sq: OnceLock::new() })
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Entries `K̄[i][0..i]`; row 0 is empty.
    pub fn row(&self, i: usize) -> &[f64] {
        if i == 0 {
            &[]
        } else {
            &self.entries[row_offset(i)..row_offset(i) + i]
        }
    }

    /// Kernel value at `(i, j)`, zero outside the strictly lower triangle.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j < i && i <= self.n_steps {
            self.entries[row_offset(i) + j]
        } else {
            0.0
        }
    }

    fn suffix(&self) -> &[f64] {
        self.suffix_sq.get_or_init(|| {
            let mut out = vec![0.0; self.entries.len()];
            for i in 1..=self.n_steps {
                let off = row_offset(i);
                let mut acc = 0.0;
                for j in (0..i).rev() {
                    let k = self.entries[off + j];
                    acc += k * k * self.dt;
                    out[off + j] = acc;
                }
            }
            out
        })
    }

    /// `Σ_{j=s}^{r-1} K̄[r][j]² dt`, the variance of `B_r - E^s B_r`.
    pub fn conditional_variance(&self, s_idx: usize, r_idx: usize) -> f64 {
        if s_idx >= r_idx {
            return 0.0;
        }
        self.suffix()[row_offset(r_idx) + s_idx]
    }

    /// `Σ_j K̄[i][j]² dt` for row `i`.
    pub fn row_variance(&self, i: usize) -> f64 {
        self.conditional_variance(0, i)
    }

    /// Applies the discrete Volterra transform to one scalar increment
    /// sequence; `out` receives `N + 1` values starting at 0.
    pub fn transform_scalar(&self, increments: &[f64], out: &mut [f64]) {
        self.transform_batch(increments, 1, out);
    }

    /// Batched transform. `increments` is laid out step-major with `batch`
    /// lanes per step, `out` likewise with `N + 1` steps. Every lane is summed
    /// over `j` in increasing order, so the result of each lane is
    /// bit-identical to a single-lane call.
    pub fn transform_batch(&self, increments: &[f64], batch: usize, out: &mut [f64]) {
        let n = self.n_steps;
        debug_assert_eq!(increments.len(), n * batch);
        debug_assert_eq!(out.len(), (n + 1) * batch);
        out[..batch].iter_mut().for_each(|v| *v = 0.0);
        if self.hurst.is_brownian() {
            for i in 1..=n {
                let (prev, cur) = out.split_at_mut(i * batch);
                let prev = &prev[(i - 1) * batch..];
                let dw = &increments[(i - 1) * batch..i * batch];
                for p in 0..batch {
                    cur[p] = prev[p] + dw[p];
                }
            }
            return;
        }
        let mut acc = vec![0.0; batch];
        for i in 1..=n {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (j, &k) in self.row(i).iter().enumerate() {
                let dw = &increments[j * batch..(j + 1) * batch];
                for (a, &w) in acc.iter_mut().zip(dw) {
                    *a += k * w;
                }
            }
            out[i * batch..(i + 1) * batch].copy_from_slice(&acc);
        }
    }

    /// Writes the table to a binary cache file. Layout: magic, H, N, T,
    /// entries (little endian), then a SHA-256 digest of all preceding bytes.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(32 + 8 * self.entries.len() + 32);
        bytes.extend_from_slice(b"VKT1");
        bytes.extend_from_slice(&self.hurst.value().to_le_bytes());
        bytes.extend_from_slice(&(self.n_steps as u64).to_le_bytes());
        bytes.extend_from_slice(&self.horizon().to_le_bytes());
        for e in &self.entries {
            bytes.extend_from_slice(&e.to_le_bytes());
        }
        let digest = Sha256::digest(&bytes);
        bytes.extend_from_slice(&digest);
        std::fs::File::create(path)?.write_all(&bytes)?;
        Ok(())
    }

    /// Loads a cached table, checking the digest and the `(H, N, T)` key.
    pub fn load(path: &Path, hurst: HurstIndex, n_steps: usize, horizon: f64) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let name = path.display().to_string();
        if bytes.len() < 28 + 32 || &bytes[..4] != b"VKT1" {
            return Err(LabError::Checksum(name));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(LabError::Checksum(name));
        }
        let f = |o: usize| f64::from_le_bytes(body[o..o + 8].try_into().unwrap());
        let h = f(4);
        let n = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        let t = f(20);
        if h != hurst.value() || n != n_steps || t != horizon {
            return Err(LabError::Mismatch(format!(
                "cache key (H={h}, N={n}, T={t}) differs from request (H={}, N={n_steps}, T={horizon})",
                hurst.value()
            )));
        }
        let count = row_offset(n + 1);
        if body.len() != 28 + 8 * count {
            return Err(LabError::Checksum(name));
        }
        let entries = (0..count).map(|k| f(28 + 8 * k)).collect();
        Ok(Self { hurst, n_steps: n, dt: t / n as f64, entries, suffix_sq: OnceLock::new() })
    }

    /// Loads from `dir` when a valid cache exists, otherwise builds and saves.
    pub fn cached(dir: &Path, hurst: HurstIndex, n_steps: usize, horizon: f64) -> Result<Self> {
        let file = dir.join(format!("vkt_h{:.6}_n{}_t{:.6}.bin", hurst.value(), n_steps, horizon));
        if file.exists() {
            if let Ok(table) = Self::load(&file, hurst, n_steps, horizon) {
                return Ok(table);
            }
        }
        let table = Self::new(hurst, n_steps, horizon / n_steps as f64)?;
        std::fs::create_dir_all(dir)?;
        table.save(&file)?;
        Ok(table)
    }
}

/// I.i.d. `N(0, dt·I_d)` increments generated from a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianDriver {
    pub dt: f64,
    pub dim: usize,
    pub seed: u64,
    /// Step-major: `increments[i * dim + c]` is the increment on `[t_i, t_{i+1})`.
    pub increments: Vec<f64>,
}

impl BrownianDriver {
    pub fn from_seed(n_steps: usize, dt: f64, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = dt.sqrt();
        let increments = (0..n_steps * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        Self { dt, dim, seed, increments }
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len() / self.dim
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.increments[i * self.dim..(i + 1) * self.dim]
    }

    /// The Brownian path itself, `(N+1) × d` step-major.
    pub fn brownian_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; (self.n_steps() + 1) * self.dim];
        for i in 0..self.n_steps() {
            for c in 0..self.dim {
                out[(i + 1) * self.dim + c] = out[i * self.dim + c] + self.increments[i * self.dim + c];
            }
        }
        out
    }
}

/// One fBM sample path with the driver that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub hurst: HurstIndex,
    pub dt: f64,
    pub dim: usize,
    /// `(N + 1) × d`, step-major, `values[0..d] = 0`.
    pub values: Vec<f64>,
    pub driver: BrownianDriver,
}

impl FbmPath {
    pub fn n_steps(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|i| self.time(i)).collect()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Recomputes the values from the stored driver.
    pub fn rederive(&self, table: &VolterraKernelTable) -> Result<Vec<f64>> {
        check_table(table, self.hurst, self.n_steps(), self.dt)?;
        Ok(transform_drivers(table, std::slice::from_ref(&self.driver)).remove(0))
    }

    /// CSV with columns `t, b_0..b_{d-1}, dw_0..dw_{d-1}`; the increment on
    /// a row is the one starting at that row's time (empty on the last row).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim).map(|c| format!("b_{c}")));
        header.extend((0..self.dim).map(|c| format!("dw_{c}")));
        out.write_record(&header)?;
        let n = self.n_steps();
        for i in 0..=n {
            let mut rec = vec![format!("{:.17e}", self.time(i))];
            rec.extend(self.at(i).iter().map(|v| format!("{v:.17e}")));
            if i < n {
                rec.extend(self.driver.step(i).iter().map(|v| format!("{v:.17e}")));
            } else {
                rec.extend((0..self.dim).map(|_| String::new()));
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_table(table: &VolterraKernelTable, hurst: HurstIndex, n_steps: usize, dt: f64) -> Result<()> {
    if table.hurst() != hurst || table.n_steps() != n_steps || (table.dt() - dt).abs() > 1e-15 * dt {
        return Err(LabError::Mismatch("kernel table does not match the path grid".into()));
    }
    Ok(())
}

/// Runs the Volterra transform over several drivers at once (all with the
/// same shape) and returns one value vector per driver.
fn transform_drivers(table: &VolterraKernelTable, drivers: &[BrownianDriver]) -> Vec<Vec<f64>> {
    let n = table.n_steps();
    let batch = drivers.len();
    let dim = drivers.first().map_or(1, |d| d.dim);
    let mut results = vec![vec![0.0; (n + 1) * dim]; batch];
    let mut inc = vec![0.0; n * batch];
    let mut out = vec![0.0; (n + 1) * batch];
    for c in 0..dim {
        for (p, d) in drivers.iter().enumerate() {
            for j in 0..n {
                inc[j * batch + p] = d.increments[j * dim + c];
            }
        }
        table.transform_batch(&inc, batch, &mut out);
        for (p, r) in results.iter_mut().enumerate() {
            for i in 0..=n {
                r[i * dim + c] = out[i * batch + p];
            }
        }
    }
    results
}

/// Draws fBM paths over a shared kernel table.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    table: Arc<VolterraKernelTable>,
}

impl FbmSampler {
    /// Lanes processed together by the batched transform.
    pub const BATCH: usize = 32;

    pub fn new(table: Arc<VolterraKernelTable>) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &Arc<VolterraKernelTable> {
        &self.table
    }

    pub fn sample(&self, dim: usize, seed: u64) -> FbmPath {
        self.sample_many(dim, &[seed]).remove(0)
    }

    /// One path per seed; identical to calling [`Self::sample`] per seed.
    pub fn sample_many(&self, dim: usize, seeds: &[u64]) -> Vec<FbmPath> {
        let n = self.table.n_steps();
        let dt = self.table.dt();
        let mut paths = Vec::with_capacity(seeds.len());
        for chunk in seeds.chunks(Self::BATCH) {
            let drivers: Vec<BrownianDriver> =
                chunk.iter().map(|&s| BrownianDriver::from_seed(n, dt, dim, s)).collect();
            let values = transform_drivers(&self.table, &drivers);
            for (driver, values) in drivers.into_iter().zip(values) {
                paths.push(FbmPath { hurst: self.table.hurst(), dt, dim, values, driver });
            }
        }
        paths
    }
}

/// Builds a kernel table and samples a single path.
pub fn sample_fbm(n_steps: usize, dt: f64, hurst: HurstIndex, dim: usize, seed: u64) -> Result<FbmPath> {
    if n_steps == 0 {
        return Err(LabError::Domain("sample_fbm needs n_steps ≥ 1".into()));
    }
    let table = Arc::new(VolterraKernelTable::new(hurst, n_steps, dt)?);
    Ok(FbmSampler::new(table).sample(dim, seed))
}

/// `E^s B^H_r = Σ_{j < s} K̄[r][j] ΔW_j`, by grid index.
pub fn conditional_mean_idx(path: &FbmPath, table: &VolterraKernelTable, s_idx: usize, r_idx: usize) -> Vec<f64> {
    let d = path.dim;
    let mut out = vec![0.0; d];
    let row = table.row(r_idx);
    for (j, &k) in row.iter().enumerate().take(s_idx) {
        let dw = path.driver.step(j);
        for c in 0..d {
            out[c] += k * dw[c];
        }
    }
    out
}

/// Maps a time onto the grid, refusing anything off a node.
pub fn grid_index(t: f64, dt: f64, n_steps: usize) -> Result<usize> {
    let k = (t / dt).round();
    if (t / dt - k).abs() > 1e-9 || k < 0.0 || k as usize > n_steps {
        return Err(LabError::Domain(format!("time {t} is not a grid node (dt = {dt})")));
    }
    Ok(k as usize)
}

/// Conditional mean `E^s B^H_r` for grid times `s ≤ r`.
pub fn conditional_mean(path: &FbmPath, table: &VolterraKernelTable, s: f64, r: f64) -> Result<Vec<f64>> {
    check_table(table, path.hurst, path.n_steps(), path.dt)?;
    let s_idx = grid_index(s, path.dt, path.n_steps())?;
    let r_idx = grid_index(r, path.dt, path.n_steps())?;
    if s_idx > r_idx {
        return Err(LabError::Domain(format!("conditional mean needs s ≤ r, got s={s}, r={r}")));
    }
    Ok(conditional_mean_idx(path, table, s_idx, r_idx))
}

/// Exact fBM samples at `times` by Cholesky factorization of the covariance.
/// `normals` supplies one standard normal per time. Oracle use only.
pub fn cholesky_fbm(times: &[f64], hurst: HurstIndex, normals: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if normals.len() != n {
        return Err(LabError::Mismatch("one normal per time is required".into()));
    }
    let l = cholesky_factor(times, hurst)?;
    Ok((0..n).map(|i| (0..=i).map(|j| l[i * n + j] * normals[j]).sum()).collect())
}

/// Lower Cholesky factor of the fBM covariance at `times` (row-major).
pub fn cholesky_factor(times: &[f64], hurst: HurstIndex) -> Result<Vec<f64>> {
    let n = times.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = fbm_covariance(times[i], times[j], hurst);
        }
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return Err(LabError::Numeric(format!("covariance not positive definite at index {j}")));
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// `(1/2)(s^{2H} + t^{2H} - |t-s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstIndex) -> f64 {
    let e = 2.0 * hurst.value();
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
}

/// Girsanov weight `v_t = c_H t^{H-1/2} ∫_0^t (t-s)^{-H-1/2} s^{1/2-H} β(s) ds`.
///
/// `beta` holds `(N+1) × dim` node values. The integrand `s^{1/2-H}β(s)` is
/// interpolated linearly on each cell and integrated exactly against the
/// singular factor `(t-s)^{-H-1/2}`.
pub fn girsanov_v(beta: &[f64], dim: usize, dt: f64, hurst: HurstIndex) -> Result<Vec<f64>> {
    girsanov_v_with_constant(beta, dim, dt, hurst, girsanov_constant(hurst)?)
}

/// [`girsanov_v`] with an explicit constant, used by the calibration.
pub fn girsanov_v_with_constant(beta: &[f64], dim: usize, dt: f64, hurst: HurstIndex, c: f64) -> Result<Vec<f64>> {
    if dim == 0 || !beta.len().is_multiple_of(dim) || beta.len() < dim {
        return Err(LabError::Mismatch("beta length is not a multiple of the dimension".into()));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(LabError::Numeric("beta has non-finite values".into()));
    }
    if hurst.is_brownian() {
        return Ok(beta.iter().map(|b| c * b).collect());
    }
    let n = beta.len() / dim - 1;
    let a = 0.5 - hurst.value();
    let (w_left, w_right) = girsanov_weights(n, a);
    let mut g = vec![0.0; beta.len()];
    for j in 0..=n {
        let sa = (j as f64 * dt).powf(a);
        for k in 0..dim {
            g[j * dim + k] = sa * beta[j * dim + k];
        }
    }
    let mut v = vec![0.0; beta.len()];
    let dta = dt.powf(a);
    for i in 1..=n {
        let pre = c * dta * (i as f64 * dt).powf(-a);
        for k in 0..dim {
            let mut acc = 0.0;
            for m in 1..=i {
                acc += g[(i - m) * dim + k] * w_left[m] + g[(i - m + 1) * dim + k] * w_right[m];
            }
            v[i * dim + k] = pre * acc;
        }
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Numeric("Girsanov quadrature produced non-finite values".into()));
    }
    Ok(v)
}

/// Product-integration weights in units of `dt^a` for the cell at lag `m`.
fn girsanov_weights(n: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let mut left = vec![0.0; n + 1];
    let mut right = vec![0.0; n + 1];
    for m in 1..=n {
        let mf = m as f64;
        let whole = (mf.powf(a) - (mf - 1.0).powf(a)) / a;
        let lin = mf * whole - (mf.powf(a + 1.0) - (mf - 1.0).powf(a + 1.0)) / (a + 1.0);
        left[m] = whole - lin;
        right[m] = lin;
    }
    (left, right)
}

/// Forward Volterra map `t_i ↦ ∫_0^{t_i} K_H(t_i, s) v(s) ds` with `v`
/// linear between nodes and the kernel integrated exactly on each cell.
pub fn forward_volterra(v: &[f64], dim: usize, dt: f64, hurst: HurstIndex) -> Result<Vec<f64>> {
    if dim == 0 || !v.len().is_multiple_of(dim) {
        return Err(LabError::Mismatch("v length is not a multiple of the dimension".into()));
    }
    let n = v.len() / dim - 1;
    let hv = hurst.value();
    let mut out = vec![0.0; v.len()];
    let mut m0 = vec![0.0; n + 1];
    let mut m1 = vec![0.0; n + 1];
    for i in 1..=n {
        let t = i as f64 * dt;
        for j in 0..=i {
            let x = j as f64 / i as f64;
            m0[j] = kernel_moment_antiderivative(x, hurst, 0);
            m1[j] = kernel_moment_antiderivative(x, hurst, 1);
        }
        let s0 = t.powf(hv + 0.5);
        let s1 = t.powf(hv + 1.5);
        for k in 0..dim {
            let mut acc = 0.0;
            for j in 0..i {
                let int0 = s0 * (m0[j + 1] - m0[j]);
                // ∫_cell K(t,s)(s - s_j) ds
                let int1 = s1 * (m1[j + 1] - m1[j]) - j as f64 * dt * int0;
                let (vl, vr) = (v[j * dim + k], v[(j + 1) * dim + k]);
                acc += vl * int0 + (vr - vl) * int1 / dt;
            }
            out[i * dim + k] = acc;
        }
    }
    Ok(out)
}

/// `c_H` frozen from [`calibrate_girsanov_constant`] on a 1024-step grid.
pub const GIRSANOV_CONSTANTS: &[(f64, f64)] = &[
    (0.25, 0.348_573_955_565_332_4),
    (0.4, 0.111_736_862_590_799_2),
    (0.5, 1.0),
];

/// The constant `c_H`: frozen where tabulated, otherwise calibrated.
pub fn girsanov_constant(hurst: HurstIndex) -> Result<f64> {
    if let Some(&(_, c)) = GIRSANOV_CONSTANTS.iter().find(|(h, _)| *h == hurst.value()) {
        return Ok(c);
    }
    Ok(calibrate_girsanov_constant(hurst, 1024)?.constant)
}

/// Outcome of the least-squares calibration of `c_H`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GirsanovCalibration {
    pub hurst: f64,
    pub n_steps: usize,
    pub constant: f64,
    /// Largest `|forward(∫v) - ∫β|` over grid and test shifts after calibration.
    pub max_residual: f64,
}

/// A named scalar shift `t ↦ φ(t)`.
pub type NamedShift = (&'static str, fn(f64) -> f64);

/// Smooth shifts used to calibrate `c_H`.
pub fn calibration_shifts() -> Vec<NamedShift> {
    vec![
        ("one", |_| 1.0),
        ("cos", |t| (2.0 * std::f64::consts::PI * t).cos()),
        ("ramp", |t| t * t.exp()),
    ]
}

/// Fits `c_H` so that the forward Volterra map applied to `v` reproduces
/// `∫_0^t β` for each calibration shift, in the least-squares sense.
pub fn calibrate_girsanov_constant(hurst: HurstIndex, n_steps: usize) -> Result<GirsanovCalibration> {
    let dt = 1.0 / n_steps as f64;
    let mut pairs = Vec::new();
    for (_, beta_fn) in calibration_shifts() {
        let beta: Vec<f64> = (0..=n_steps).map(|i| beta_fn(i as f64 * dt)).collect();
        let target = cumulative_trapezoid(&beta, dt);
        let raw = girsanov_v_with_constant(&beta, 1, dt, hurst, 1.0)?;
        let image = forward_volterra(&raw, 1, dt, hurst)?;
        pairs.push((image, target));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (image, target) in &pairs {
        for (x, y) in image.iter().zip(target) {
            num += x * y;
            den += x * x;
        }
    }
    if !(den > 0.0) {
        return Err(LabError::Numeric("degenerate calibration system".into()));
    }
    let c = num / den;
    let max_residual = pairs
        .iter()
        .flat_map(|(image, target)| image.iter().zip(target).map(move |(x, y)| (c * x - y).abs()))
        .fold(0.0, f64::max);
    Ok(GirsanovCalibration { hurst: hurst.value(), n_steps, constant: c, max_residual })
}

fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for i in 1..values.len() {
        out[i] = out[i - 1] + 0.5 * dt * (values[i - 1] + values[i]);
    }
    out
}

/// Sup-norm constant of the map `β ↦ v`: `|v_t| ≤ C_v ‖β‖_∞` on `[0,1]`,
/// attained by `β ≡ 1` at `t = 1`.
pub fn girsanov_sup_constant(hurst: HurstIndex) -> Result<f64> {
    if hurst.is_brownian() {
        return Ok(1.0);
    }
    let a = 0.5 - hurst.value();
    Ok(girsanov_constant(hurst)? * beta(a, 1.0 + a))
}

/// `(1/2)(∫_0^T E|v_s|² ds)^{1/2}` from an ensemble of weight paths, with a
/// delta-method standard error.
pub fn pinsker_tv_bound(v_paths: &[&[f64]], dim: usize, dt: f64) -> Result<Estimate> {
    if v_paths.is_empty() {
        return Err(LabError::Ensemble { need: 1, got: 0 });
    }
    let energies: Vec<f64> = v_paths
        .iter()
        .map(|v| {
            let n = v.len() / dim;
            let sq = |i: usize| v[i * dim..(i + 1) * dim].iter().map(|x| x * x).sum::<f64>();
            (1..n).map(|i| 0.5 * dt * (sq(i - 1) + sq(i))).sum()
        })
        .collect();
    let q = Estimate::mean_of(&energies);
    let value = 0.5 * q.value.sqrt();
    let stderr = if q.value > 0.0 { 0.25 * q.stderr / q.value.sqrt() } else { 0.0 };
    Ok(Estimate { value, stderr, n: q.n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    /// Tanh-sinh quadrature on (lo, hi); handles integrable endpoint singularities.
    fn tanh_sinh(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let step = 1.0 / 64.0;
        let mut acc = 0.0;
        for k in -400..=400 {
            let u = k as f64 * step;
            let s = std::f64::consts::FRAC_PI_2 * u.sinh();
            let x = s.tanh();
            let w = std::f64::consts::FRAC_PI_2 * u.cosh() / s.cosh().powi(2);
            let y = c + r * x;
            if y <= lo || y >= hi || w < 1e-300 {
                continue;
            }
            acc += w * f(y);
        }
        acc * r * step
    }

    #[test]
    fn hurst_bounds() {
        assert!(HurstIndex::new(0.0).is_err());
        assert!(HurstIndex::new(0.51).is_err());
        assert!(HurstIndex::new(0.5).is_ok());
    }

    #[test]
    fn kernel_l2_norm_is_variance() {
        for &hv in &[0.25, 0.4, 0.45] {
            for &t in &[0.3, 1.0] {
                let int = tanh_sinh(|s| volterra_kernel(t, s, h(hv)).powi(2), 0.0, t);
                assert!((int - t.powf(2.0 * hv)).abs() < 1e-4, "H={hv} t={t}: {int}");
            }
        }
        assert_eq!(volterra_kernel(1.0, 0.3, h(0.5)), 1.0);
        assert_eq!(volterra_kernel(1.0, 1.3, h(0.25)), 0.0);
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        for &hv in &[0.2, 0.25, 0.4] {
            for &x in &[0.1, 0.5, 0.9, 1.0] {
                for p in 0..2 {
                    let q = tanh_sinh(|y| y.powi(p as i32) * volterra_kernel(1.0, y, h(hv)), 0.0, x);
                    let a = kernel_moment_antiderivative(x, h(hv), p);
                    assert!((q - a).abs() < 1e-9, "H={hv} x={x} p={p}: {q} vs {a}");
                }
            }
        }
    }

    #[test]
    fn table_rows_reproduce_variance() {
        let table = VolterraKernelTable::new(h(0.25), 64, 1.0 / 64.0).unwrap();
        for i in 1..=64 {
            let t = i as f64 / 64.0;
            assert!((table.row_variance(i) - t.sqrt()).abs() < 1e-12);
        }
        assert_eq!(table.get(3, 3), 0.0);
        assert_eq!(table.get(3, 7), 0.0);
    }

    #[test]
    fn brownian_case_is_cumulative_sum() {
        let p = sample_fbm(50, 0.02, h(0.5), 2, 9).unwrap();
        assert_eq!(p.values, p.driver.brownian_values());
    }

    #[test]
    fn batched_sampling_is_bit_identical() {
        let table = Arc::new(VolterraKernelTable::new(h(0.3), 40, 0.025).unwrap());
        let sampler = FbmSampler::new(table.clone());
        let seeds: Vec<u64> = (0..70).collect();
        let many = sampler.sample_many(2, &seeds);
        for (s, p) in seeds.iter().zip(&many) {
            assert_eq!(*p, sampler.sample(2, *s));
            assert_eq!(p.rederive(&table).unwrap(), p.values);
        }
    }

    #[test]
    fn conditional_mean_edges_and_causality() {
        let table = VolterraKernelTable::new(h(0.25), 32, 1.0 / 32.0).unwrap();
        let p = FbmSampler::new(Arc::new(VolterraKernelTable::new(h(0.25), 32, 1.0 / 32.0).unwrap())).sample(1, 3);
        assert_eq!(conditional_mean(&p, &table, 0.0, 0.5).unwrap(), vec![0.0]);
        assert_eq!(conditional_mean(&p, &table, 0.5, 0.5).unwrap(), p.at(16).to_vec());
        assert!(conditional_mean(&p, &table, 0.51, 0.75).is_err());
        assert!(conditional_mean(&p, &table, 0.75, 0.5).is_err());
        let mut q = p.clone();
        for j in 16..32 {
            q.driver.increments[j] += 1.0;
        }
        for r in 16..=32 {
            assert_eq!(conditional_mean_idx(&p, &table, 16, r), conditional_mean_idx(&q, &table, 16, r));
        }
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let t = VolterraKernelTable::cached(dir.path(), h(0.3), 16, 1.0).unwrap();
        let u = VolterraKernelTable::cached(dir.path(), h(0.3), 16, 1.0).unwrap();
        assert_eq!(t.entries, u.entries);
        let file = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
        let mut bytes = std::fs::read(&file).unwrap();
        bytes[40] ^= 1;
        std::fs::write(&file, &bytes).unwrap();
        assert!(matches!(VolterraKernelTable::load(&file, h(0.3), 16, 1.0), Err(LabError::Checksum(_))));
    }

    #[test]
    fn cholesky_oracle_reproduces_covariance() {
        let times = [0.25, 0.5, 1.0];
        let l = cholesky_factor(&times, h(0.3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let c: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((c - fbm_covariance(times[i], times[j], h(0.3))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn girsanov_trivial_cases() {
        let zero = vec![0.0; 33];
        assert!(girsanov_v(&zero, 1, 1.0 / 32.0, h(0.25)).unwrap().iter().all(|v| *v == 0.0));
        let beta: Vec<f64> = (0..33).map(|i| (i as f64 * 0.1).sin()).collect();
        assert_eq!(girsanov_v(&beta, 1, 1.0 / 32.0, h(0.5)).unwrap(), beta);
    }

    #[test]
    fn girsanov_constant_beta_matches_beta_integral() {
        let hv = h(0.25);
        let n = 1024;
        let ones = vec![1.0; n + 1];
        let v = girsanov_v(&ones, 1, 1.0 / n as f64, hv).unwrap();
        // s = 1 - u^4 removes the endpoint singularity.
        let integral = tanh_sinh(|u| 4.0 * (1.0 - u.powi(4)).powf(0.25), 0.0, 1.0);
        let expected = girsanov_constant(hv).unwrap() * integral;
        assert!((v[n] - expected).abs() < 1e-3 * expected, "{} vs {expected}", v[n]);
        assert!((integral - beta(1.25, 0.25)).abs() < 1e-8);
    }

    /// `c_H` from the `β ≡ 1` case in closed form:
    /// `1 / (B(a, 1+a) ∫_0^1 K_H(1,x) x^a dx)` with `a = 1/2 - H`.
    fn analytic_girsanov_constant(hv: f64) -> f64 {
        let a = 0.5 - hv;
        let j = kernel_constant(h(hv))
            * (beta(2.0 - 2.0 * hv, hv + 0.5)
                + (0.5 - hv) * beta(1.0 - 2.0 * hv, hv + 0.5) * (1.0 - 2.0 * hv) / (1.5 - hv));
        1.0 / (beta(a, 1.0 + a) * j)
    }

    #[test]
    fn calibration_matches_frozen_and_analytic_constants() {
        for &hv in &[0.25, 0.4] {
            let cal = calibrate_girsanov_constant(h(hv), 1024).unwrap();
            let frozen = GIRSANOV_CONSTANTS.iter().find(|(x, _)| *x == hv).unwrap().1;
            let exact = analytic_girsanov_constant(hv);
            eprintln!("H={hv}: calibrated {:.16} analytic {:.16} residual {:e}", cal.constant, exact, cal.max_residual);
            assert!(cal.max_residual < 1e-3);
            assert!((cal.constant - exact).abs() < 2e-3 * exact);
            assert!((cal.constant - frozen).abs() < 1e-12 * frozen);
            assert!((cal.constant - exact).abs() < 2e-3 * exact);
        }
    }

    #[test]
    fn pinsker_trivial_cases() {
        let ones = vec![1.0; 101];
        let b = pinsker_tv_bound(&[&ones], 1, 0.01).unwrap();
        assert!((b.value - 0.5).abs() < 1e-12);
        let zeros = vec![0.0; 101];
        assert_eq!(pinsker_tv_bound(&[&zeros], 1, 0.01).unwrap().value, 0.0);
        assert!(pinsker_tv_bound(&[], 1, 0.01).is_err());
        let threes: Vec<f64> = ones.iter().map(|x| -3.0 * x).collect();
        assert!((pinsker_tv_bound(&[&threes], 1, 0.01).unwrap().value - 1.5).abs() < 1e-12);
    }
}
