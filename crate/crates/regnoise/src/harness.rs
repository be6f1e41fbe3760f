//! Named experiment suites with deterministic seeding and reports.
//!
//! A run is fixed by its configuration, base seed and worker count. Members
//! of an ensemble draw their seeds from [`seed_fanout`], run on a rayon pool,
//! and are reduced in member order, so the report bytes do not depend on
//! scheduling.

mod config;
mod report;
mod seed;
mod suites;

pub use config::{ExperimentConfig, Scale};
pub use report::{num, Attrition, Check, ExperimentReport, Table, Timing, SCHEMA_VERSION};
pub use seed::{seed_fanout, substream};
pub use suites::{find_suite, suites, Suite};

use rayon::prelude::*;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use crate::error::{LabError, Result};
use crate::fbm::{FbmPath, FbmSampler, HurstIndex, VolterraKernelTable};

/// Seed used when neither the config nor the caller sets one.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Caller-side overrides for one run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub out: Option<PathBuf>,
}

/// Execution context handed to a suite.
pub struct Ctx {
    pub seed: u64,
    pub workers: usize,
    pub scale: Scale,
    pool: rayon::ThreadPool,
}

/// Members processed per block when reducing on the fly.
const FOLD_BLOCK: usize = 256;

impl Ctx {
    pub fn new(seed: u64, workers: usize, scale: Scale) -> Result<Self> {
        let workers = if workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { workers };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| LabError::Config(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self { seed, workers, scale, pool })
    }

    /// The configured value, or the default for the current scale.
    pub fn pick<T: Clone>(&self, value: &Option<T>, full: T, smoke: T) -> T {
        match (value, self.scale) {
            (Some(v), _) => v.clone(),
            (None, Scale::Full) => full,
            (None, Scale::Smoke) => smoke,
        }
    }

    /// Base seed of a named sub-experiment.
    pub fn stream(&self, id: u64) -> u64 {
        substream(self.seed, id)
    }

    /// Runs `f(index, seed)` for every member; failed members are `None`.
    pub fn members<T, F>(&self, n: usize, base: u64, f: F) -> (Vec<Option<T>>, Attrition)
    where
        T: Send,
        F: Fn(usize, u64) -> Result<T> + Sync,
    {
        let results: Vec<Result<T>> =
            self.pool.install(|| (0..n).into_par_iter().map(|i| f(i, seed_fanout(base, i as u64))).collect());
        collect(results, 0)
    }

    /// Like [`Self::members`], but hands each member an fBM path drawn with
    /// its seed. Paths are sampled in batches for the vectorized transform.
    pub fn fbm_members<T, F>(&self, sampler: &FbmSampler, dim: usize, n: usize, base: u64, f: F) -> (Vec<Option<T>>, Attrition)
    where
        T: Send,
        F: Fn(usize, FbmPath) -> Result<T> + Sync,
    {
        self.fbm_range(sampler, dim, 0..n, base, &f)
    }

    fn fbm_range<T, F>(
        &self,
        sampler: &FbmSampler,
        dim: usize,
        range: std::ops::Range<usize>,
        base: u64,
        f: &F,
    ) -> (Vec<Option<T>>, Attrition)
    where
        T: Send,
        F: Fn(usize, FbmPath) -> Result<T> + Sync,
    {
        let start = range.start;
        let idx: Vec<usize> = range.collect();
        let results: Vec<Result<T>> = self.pool.install(|| {
            idx.par_chunks(FbmSampler::BATCH)
                .flat_map_iter(|chunk| {
                    let seeds: Vec<u64> = chunk.iter().map(|&i| seed_fanout(base, i as u64)).collect();
                    let paths = sampler.sample_many(dim, &seeds);
                    chunk.iter().zip(paths).map(|(&i, p)| f(i, p)).collect::<Vec<_>>()
                })
                .collect()
        });
        collect(results, start)
    }

    /// Streams members through `fold` in index order without keeping them all.
    #[allow(clippy::too_many_arguments)]
    pub fn fbm_fold<A, T, F, G>(&self, sampler: &FbmSampler, dim: usize, n: usize, base: u64, f: F, mut acc: A, mut fold: G) -> (A, Attrition)
    where
        T: Send,
        F: Fn(usize, FbmPath) -> Result<T> + Sync,
        G: FnMut(&mut A, T),
    {
        let mut attrition = Attrition::default();
        let mut start = 0;
        while start < n {
            let end = (start + FOLD_BLOCK).min(n);
            let (items, a) = self.fbm_range(sampler, dim, start..end, base, &f);
            attrition.merge(a);
            for item in items.into_iter().flatten() {
                fold(&mut acc, item);
            }
            start = end;
        }
        (acc, attrition)
    }

    /// Same as [`Self::fbm_fold`] for members that need only their seed.
    pub fn fold<A, T, F, G>(&self, n: usize, base: u64, f: F, mut acc: A, mut fold: G) -> (A, Attrition)
    where
        T: Send,
        F: Fn(usize, u64) -> Result<T> + Sync,
        G: FnMut(&mut A, T),
    {
        let mut attrition = Attrition::default();
        let mut start = 0;
        while start < n {
            let end = (start + FOLD_BLOCK).min(n);
            let results: Vec<Result<T>> = self
                .pool
                .install(|| (start..end).into_par_iter().map(|i| f(i, seed_fanout(base, i as u64))).collect());
            let (items, a) = collect(results, start);
            attrition.merge(a);
            for item in items.into_iter().flatten() {
                fold(&mut acc, item);
            }
            start = end;
        }
        (acc, attrition)
    }
}

fn collect<T>(results: Vec<Result<T>>, offset: usize) -> (Vec<Option<T>>, Attrition)
where
{
    let mut attrition = Attrition { members: results.len(), ..Attrition::default() };
    let items = results
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(v) => Some(v),
            Err(e) => {
                attrition.failed += 1;
                if attrition.examples.len() < 5 {
                    attrition.examples.push(format!("member {}: {e}", i + offset));
                }
                None
            }
        })
        .collect();
    (items, attrition)
}

/// Kernel table on [0,1] with `n` steps, built once per process.
pub fn kernel_table(hurst: HurstIndex, n: usize) -> Result<Arc<VolterraKernelTable>> {
    type Key = (u64, usize);
    static TABLES: OnceLock<Mutex<HashMap<Key, Arc<VolterraKernelTable>>>> = OnceLock::new();
    let key = (hurst.value().to_bits(), n);
    let cache = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("table cache").get(&key) {
        return Ok(t.clone());
    }
    let table = Arc::new(VolterraKernelTable::new(hurst, n, 1.0 / n as f64)?);
    cache.lock().expect("table cache").insert(key, table.clone());
    Ok(table)
}

/// Validates the configuration, runs its suite and, when an output
/// directory is known, writes `report.json`, the CSV tables and `timing.json`.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    let suite = find_suite(&config.experiment)
        .ok_or_else(|| LabError::Config(format!("unknown experiment `{}` (see `lab list`)", config.experiment)))?;
    config.validate(suite.keys)?;
    let seed = opts.seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let ctx = Ctx::new(seed, opts.workers, config.scale())?;
    let mut report = ExperimentReport::new(config, seed, ctx.workers);
    report.resolve("scale", config.scale());
    let clock = Instant::now();
    (suite.run)(config, &ctx, &mut report)?;
    report.finalize();
    let out = opts.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from));
    if let Some(dir) = out {
        report.write(&dir)?;
        Timing { suite: suite.id.to_string(), seconds: clock.elapsed().as_secs_f64() }.write(&dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn member_results_do_not_depend_on_workers() {
        let run = |w| {
            let ctx = Ctx::new(5, w, Scale::Smoke).unwrap();
            ctx.members(100, 9, |i, s| if i == 17 { Err(LabError::Numeric("x".into())) } else { Ok(s ^ i as u64) })
        };
        let (a, att_a) = run(1);
        let (b, att_b) = run(3);
        assert_eq!(a, b);
        assert_eq!(att_a, att_b);
        assert_eq!(att_a.failed, 1);
        assert!(a[17].is_none());
    }

    #[test]
    fn unknown_suite_and_stray_keys_are_usage_errors() {
        let bad = ExperimentConfig::new("no-such-suite");
        assert!(matches!(run_experiment(&bad, &RunOptions::default()), Err(LabError::Config(_))));
        let stray = ExperimentConfig { modes: Some(64), ..ExperimentConfig::smoke("fbm-covariance") };
        assert!(matches!(run_experiment(&stray, &RunOptions::default()), Err(LabError::Config(_))));
    }
}
