//! Command-line front end of the `lab` binary.
//!
//! `lab run` and `lab list` drive the suite registry. The `sde`, `she` and
//! `sewing` groups either run a single capability directly and write CSV plus
//! a JSON summary, or forward their flags to the matching suite.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::drifts::{mollify, parse_drift};
use crate::error::{LabError, Result};
use crate::fbm::{FbmSampler, HurstIndex};
use crate::gaussian::{Bc, GridFunction};
use crate::harness::{kernel_table, run_experiment, seed_fanout, suites, ExperimentConfig, RunOptions, Scale, DEFAULT_SEED};
use crate::metrics::{scaling_exponent, Estimate};
use crate::sde::{coupled_pair, solve_euler, CouplingOptions, CouplingScheme};
use crate::sewing::{additive_germ, quadratic_germ, sew, ConditionalDriftGerm, Germ, SewingReport};
use crate::she::{convolution_variance, SheModel, SPACE_NODES};

#[derive(Debug, Parser)]
#[command(name = "lab", version, about = "Regularization-by-noise laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a suite by id.
    Run(RunArgs),
    /// List the available suites.
    List,
    /// Fractional SDE tools.
    Sde {
        #[command(subcommand)]
        cmd: SdeCmd,
    },
    /// Stochastic heat equation tools.
    She {
        #[command(subcommand)]
        cmd: SheCmd,
    },
    /// Sewing of germs.
    Sewing {
        #[command(subcommand)]
        cmd: SewingCmd,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub suite: String,
    /// TOML or JSON config; its `experiment` key, if present, must match.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the reduced smoke-scale defaults.
    #[arg(long)]
    pub smoke: bool,
}

/// Flags shared by the commands that forward to a suite.
#[derive(Debug, Args, Clone, Default)]
pub struct SuiteFlags {
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub drift: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub n_moll: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub smoke: bool,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SheFlags {
    #[arg(long)]
    pub bc: Option<String>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[command(flatten)]
    pub common: SuiteFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScalingVariable {
    Time,
    Lambda,
}

#[derive(Debug, Subcommand)]
pub enum SdeCmd {
    /// Solve an ensemble and write per-path summaries.
    Solve {
        #[command(flatten)]
        flags: SuiteFlags,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
    },
    /// Couple X with the pushed process and report sup-gaps per lambda.
    Couple {
        #[command(flatten)]
        flags: SuiteFlags,
        #[arg(long)]
        g_drift: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long, value_enum, default_value_t = SchemeArg::Euler)]
        scheme: SchemeArg,
    },
    /// Occupation-time (`time`) or exponential-weight (`lambda`) scaling suite.
    Scaling {
        #[command(flatten)]
        flags: SuiteFlags,
        #[arg(long, value_enum, default_value_t = ScalingVariable::Lambda)]
        variable: ScalingVariable,
    },
    /// Same-noise Cauchy gaps across mollification levels.
    WeakCauchy {
        #[command(flatten)]
        flags: SuiteFlags,
    },
    /// Residual of the minimum of two solutions.
    MinConstruction {
        #[command(flatten)]
        flags: SuiteFlags,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Euler,
    Exponential,
}

#[derive(Debug, Subcommand)]
pub enum SheCmd {
    /// Sample the stochastic convolution.
    Convolution {
        #[command(flatten)]
        flags: SheFlags,
    },
    /// Solve the mild equation from zero initial data.
    Solve {
        #[command(flatten)]
        flags: SheFlags,
    },
    /// Coupling gap and Pinsker bound suite.
    Couple {
        #[command(flatten)]
        flags: SheFlags,
    },
    /// Weighted functional against lambda and t.
    Scaling {
        #[command(flatten)]
        flags: SheFlags,
    },
    /// Same-noise Cauchy gaps in the weighted norm.
    WeakCauchy {
        #[command(flatten)]
        flags: SheFlags,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GermKind {
    Additive,
    Quadratic,
    Drift,
}

#[derive(Debug, Subcommand)]
pub enum SewingCmd {
    /// Sew a germ over [0,1] and report the per-level sums.
    Run {
        #[arg(long, value_enum)]
        germ: GermKind,
        #[arg(long, default_value_t = 0.3)]
        hurst: f64,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 8)]
        levels: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "dirac@0")]
        drift: String,
        #[arg(long, default_value_t = 256)]
        n_moll: u64,
        #[arg(long, default_value_t = 1024)]
        steps: usize,
    },
}

/// What a command produced: pass/fail state and the text to print.
pub struct Outcome {
    pub passed: bool,
    pub output: String,
}

/// Runs a parsed command.
pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::List => {
            let mut s = String::new();
            for suite in suites() {
                s.push_str(&format!("{:<26} {}\n", suite.id, suite.summary));
            }
            Ok(Outcome { passed: true, output: s })
        }
        Command::Run(a) => {
            let mut cfg = match &a.config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::new(&a.suite),
            };
            if cfg.experiment.is_empty() {
                cfg.experiment = a.suite.clone();
            } else if cfg.experiment != a.suite {
                return Err(LabError::Config(format!(
                    "config names experiment `{}` but `{}` was requested",
                    cfg.experiment, a.suite
                )));
            }
            if a.smoke {
                cfg.scale = Some(Scale::Smoke);
            }
            suite_outcome(&cfg, RunOptions { seed: a.seed, workers: a.workers, out: a.out })
        }
        Command::Sde { cmd } => sde(cmd),
        Command::She { cmd } => she(cmd),
        Command::Sewing { cmd } => sewing(cmd),
    }
}

fn suite_outcome(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Outcome> {
    let rep = run_experiment(cfg, &opts)?;
    let mut s = format!("suite {} (seed {}, {} workers)\n", rep.suite, rep.seed, rep.workers);
    for c in &rep.checks {
        let tag = match (c.passed, c.gating) {
            (true, true) => "PASS",
            (false, true) => "FAIL",
            (true, false) => "note ok",
            (false, false) => "note",
        };
        s.push_str(&format!("  [{tag}] {}: {}\n", c.name, c.detail));
    }
    for n in &rep.notes {
        s.push_str(&format!("  note: {n}\n"));
    }
    s.push_str(if rep.passed { "PASSED\n" } else { "FAILED\n" });
    Ok(Outcome { passed: rep.passed, output: s })
}

fn forward(id: &str, f: &SuiteFlags, she: Option<(&Option<String>, Option<usize>)>) -> Result<Outcome> {
    let mut cfg = ExperimentConfig::new(id);
    cfg.hurst = f.hurst.map(|h| vec![h]);
    cfg.alpha = f.alpha;
    cfg.drift = f.drift.clone();
    cfg.n_moll = f.n_moll.clone();
    cfg.lambda = f.lambda.clone();
    cfg.paths = f.paths;
    cfg.n_steps = f.steps;
    if f.smoke {
        cfg.scale = Some(Scale::Smoke);
    }
    if let Some((bc, modes)) = she {
        cfg.bc = bc.clone().map(|b| vec![b]);
        cfg.modes = modes;
    }
    suite_outcome(&cfg, RunOptions { seed: f.seed, workers: f.workers, out: f.out.clone() })
}

fn write_summary(out: &Option<PathBuf>, name: &str, value: &serde_json::Value) -> Result<String> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), &text)?;
    }
    Ok(text)
}

fn csv_writer(out: &Option<PathBuf>, name: &str) -> Result<Option<csv::Writer<std::fs::File>>> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Some(csv::Writer::from_path(Path::new(dir).join(name))?))
        }
        None => Ok(None),
    }
}

fn sde_drift(f: &SuiteFlags, id: Option<&str>, level: usize) -> Result<crate::drifts::MollifiedDrift> {
    let mut d = parse_drift(id.or(f.drift.as_deref()).unwrap_or("dirac@0"))?;
    if let Some(a) = f.alpha {
        d = d.with_alpha(a);
    }
    let levels = f.n_moll.clone().unwrap_or_else(|| vec![256, 64]);
    mollify(&d, *levels.get(level).unwrap_or(&levels[0]))
}

fn sde(cmd: SdeCmd) -> Result<Outcome> {
    match cmd {
        SdeCmd::Solve { flags: f, x0 } => {
            let h = HurstIndex::new(f.hurst.unwrap_or(0.25))?;
            let n = f.steps.unwrap_or(1024);
            let paths = f.paths.unwrap_or(100);
            let seed = f.seed.unwrap_or(DEFAULT_SEED);
            let b = sde_drift(&f, None, 0)?;
            let sampler = FbmSampler::new(kernel_table(h, n)?);
            let mut w = csv_writer(&f.out, "paths.csv")?;
            if let Some(w) = w.as_mut() {
                w.write_record(["path", "seed", "x1", "sup_abs_psi", "reconstruction_error"])?;
            }
            let mut x1 = Vec::with_capacity(paths);
            for i in 0..paths {
                let s = seed_fanout(seed, i as u64);
                let p = solve_euler(&[x0], &b, &Arc::new(sampler.sample(1, s)))?;
                let sup_psi = p.psi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if let Some(w) = w.as_mut() {
                    w.write_record([i.to_string(), s.to_string(), p.terminal()[0].to_string(), sup_psi.to_string(), p.reconstruction_error().to_string()])?;
                }
                x1.push(p.terminal()[0]);
            }
            if let Some(w) = w.as_mut() {
                w.flush()?;
            }
            let summary = json!({
                "hurst": h.value(), "n_steps": n, "paths": paths, "seed": seed, "x0": x0,
                "drift": b.as_drift().id, "alpha": b.as_drift().nominal_alpha,
                "mean_x1": Estimate::mean_of(&x1),
            });
            Ok(Outcome { passed: true, output: write_summary(&f.out, "summary.json", &summary)? })
        }
        SdeCmd::Couple { flags: f, g_drift, x0, scheme } => {
            let h = HurstIndex::new(f.hurst.unwrap_or(0.25))?;
            let n = f.steps.unwrap_or(4096);
            let paths = f.paths.unwrap_or(100);
            let seed = f.seed.unwrap_or(DEFAULT_SEED);
            let lambdas = f.lambda.clone().unwrap_or_else(|| vec![8.0, 16.0, 32.0, 64.0]);
            let b = sde_drift(&f, None, 0)?;
            let g = sde_drift(&f, g_drift.as_deref(), 1)?;
            let scheme = match scheme {
                SchemeArg::Euler => CouplingScheme::Euler,
                SchemeArg::Exponential => CouplingScheme::Exponential,
            };
            let opts = CouplingOptions { scheme, compute_v: false };
            let sampler = FbmSampler::new(kernel_table(h, n)?);
            let mut w = csv_writer(&f.out, "paths.csv")?;
            if let Some(w) = w.as_mut() {
                w.write_record(["path", "lambda", "sup_gap", "x1", "y1", "y_tilde1"])?;
            }
            let mut gaps = vec![Vec::with_capacity(paths); lambdas.len()];
            for i in 0..paths {
                let fbm = Arc::new(sampler.sample(1, seed_fanout(seed, i as u64)));
                for (l, &lam) in lambdas.iter().enumerate() {
                    let r = coupled_pair(&b, &[x0], &g, &[x0], lam, &fbm, opts)?;
                    if let Some(w) = w.as_mut() {
                        w.write_record([
                            i.to_string(),
                            lam.to_string(),
                            r.sup_gap().to_string(),
                            r.x.terminal()[0].to_string(),
                            r.y.terminal()[0].to_string(),
                            r.y_tilde.terminal()[0].to_string(),
                        ])?;
                    }
                    gaps[l].push(r.sup_gap());
                }
            }
            if let Some(w) = w.as_mut() {
                w.flush()?;
            }
            let means: Vec<Estimate> = gaps.iter().map(|g| Estimate::mean_of(g)).collect();
            let fit = if lambdas.len() >= 3 {
                Some(scaling_exponent(&lambdas, &means.iter().map(|e| e.value).collect::<Vec<_>>())?)
            } else {
                None
            };
            let summary = json!({
                "hurst": h.value(), "n_steps": n, "paths": paths, "seed": seed, "x0": x0,
                "scheme": scheme, "lambda": lambdas, "mean_sup_gap": means, "slope_fit": fit,
            });
            Ok(Outcome { passed: true, output: write_summary(&f.out, "summary.json", &summary)? })
        }
        SdeCmd::Scaling { flags, variable } => {
            let id = match variable {
                ScalingVariable::Time => "occupation-time-scaling",
                ScalingVariable::Lambda => "exp-weight-scaling",
            };
            forward(id, &flags, None)
        }
        SdeCmd::WeakCauchy { flags } => forward("sde-weak-cauchy", &flags, None),
        SdeCmd::MinConstruction { flags } => forward("min-construction", &flags, None),
    }
}

fn she_model(f: &SheFlags) -> Result<SheModel> {
    let bc = Bc::parse(f.bc.as_deref().unwrap_or("periodic"))?;
    let n = f.common.steps.unwrap_or(1024);
    SheModel::new(bc, f.modes.unwrap_or(128), n, 1.0 / n as f64)
}

fn she(cmd: SheCmd) -> Result<Outcome> {
    match cmd {
        SheCmd::Convolution { flags: f } => {
            let model = she_model(&f)?;
            let paths = f.common.paths.unwrap_or(1);
            let seed = f.common.seed.unwrap_or(DEFAULT_SEED);
            let mid = SPACE_NODES / 2;
            let mut terminal = Vec::with_capacity(paths);
            for i in 0..paths {
                let field = model.convolution(&model.noise(seed_fanout(seed, i as u64)))?;
                if i == 0 {
                    if let Some(dir) = &f.common.out {
                        std::fs::create_dir_all(dir)?;
                        field.write_csv(std::fs::File::create(dir.join("field.csv"))?)?;
                    }
                }
                terminal.push(field.at(model.n_steps, mid).powi(2));
            }
            let horizon = model.n_steps as f64 * model.dt;
            let summary = json!({
                "bc": model.bc().name(), "modes": model.modes(), "n_steps": model.n_steps, "paths": paths, "seed": seed,
                "node": mid, "horizon": horizon,
                "empirical_second_moment": Estimate::mean_of(&terminal),
                "series_variance": convolution_variance(&model.basis, horizon, mid),
            });
            Ok(Outcome { passed: true, output: write_summary(&f.common.out, "summary.json", &summary)? })
        }
        SheCmd::Solve { flags: f } => {
            let model = she_model(&f)?;
            let seed = f.common.seed.unwrap_or(DEFAULT_SEED);
            let b = sde_drift(&f.common, None, 0)?;
            let u0 = GridFunction::on_unit_interval(SPACE_NODES, |_| 0.0);
            let u = model.solve_mild(&u0, &b, &model.noise(seed_fanout(seed, 0)))?;
            if let Some(dir) = &f.common.out {
                std::fs::create_dir_all(dir)?;
                u.write_csv(std::fs::File::create(dir.join("field.csv"))?)?;
            }
            let summary = json!({
                "bc": model.bc().name(), "modes": model.modes(), "n_steps": model.n_steps, "seed": seed,
                "drift": b.as_drift().id, "alpha": b.as_drift().nominal_alpha,
                "sup_abs": u.sup_abs(), "round_trip_error": u.round_trip_error(&model.basis),
            });
            Ok(Outcome { passed: true, output: write_summary(&f.common.out, "summary.json", &summary)? })
        }
        SheCmd::Couple { flags } => forward("she-coupling", &flags.common, Some((&flags.bc, flags.modes))),
        SheCmd::Scaling { flags } => forward("she-lambda-scaling", &flags.common, Some((&flags.bc, flags.modes))),
        SheCmd::WeakCauchy { flags } => forward("she-weak-cauchy", &flags.common, Some((&flags.bc, flags.modes))),
    }
}

fn sewing(cmd: SewingCmd) -> Result<Outcome> {
    let SewingCmd::Run { germ, hurst, alpha, levels, seed, out, drift, n_moll, steps } = cmd;
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let (report, extra): (SewingReport, serde_json::Value) = match germ {
        GermKind::Additive => (sew(&additive_germ(|x: f64| x.sin() + x * x), 0.0, 1.0, levels)?, json!({"exact": 1f64.sin() + 1.0})),
        GermKind::Quadratic => (sew(&quadratic_germ(), 0.0, 1.0, levels)?, json!({"exact": 0.0})),
        GermKind::Drift => {
            let h = HurstIndex::new(hurst)?;
            let mut d = parse_drift(&drift)?;
            if let Some(a) = alpha {
                d = d.with_alpha(a);
            }
            let f = mollify(&d, n_moll)?;
            let table = kernel_table(h, steps)?;
            let path = Arc::new(FbmSampler::new(table.clone()).sample(1, seed));
            let dt = path.dt;
            let phi: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
            let pathwise: f64 = (0..steps).map(|i| f.eval1(path.values[i] + phi[i]) * dt).sum();
            let germ = ConditionalDriftGerm::new(f, phi, true, path, table)?;
            debug_assert!(germ.conditional());
            let r = sew(&germ, 0.0, 1.0, levels)?;
            (r, json!({"pathwise_quadrature": pathwise, "shift": "phi_t = t", "drift": d.id, "alpha": d.nominal_alpha}))
        }
    };
    let summary = json!({
        "germ": format!("{germ:?}").to_lowercase(), "hurst": hurst, "levels": levels, "seed": seed,
        "report": report, "details": extra,
    });
    Ok(Outcome { passed: report.converged, output: write_summary(&out, "sewing.json", &summary)? })
}

/// Process exit code for a command result: 0 pass, 1 failed checks,
/// 2 usage error, 3 runtime error.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed => 0,
        Ok(_) => 1,
        Err(LabError::Config(_)) => 2,
        Err(_) => 3,
    }
}
