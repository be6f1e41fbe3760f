//! SDE suites: coupling contraction, Girsanov/Pinsker dominance, the
//! same-noise Cauchy property and the min-construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use super::{column, drift, fit, hurst, mollified, paired, window};
use crate::drifts::{admissible_weak, is_nonnegative_measure};
use crate::error::Result;
use crate::fbm::{girsanov_constant, girsanov_sup_constant, kernel_constant, FbmSampler, HurstIndex};
use crate::harness::{kernel_table, num, Ctx, ExperimentConfig, ExperimentReport, Table};
use crate::metrics::{wasserstein1_1d, EmpiricalLaw, Estimate};
use crate::sde::{coupled_pair, girsanov_tv_report, holder_seminorm_lm, min_solution, residual, solve_euler, CouplingOptions, CouplingScheme};

const LAMBDAS: [f64; 4] = [8.0, 16.0, 32.0, 64.0];

fn constants(rep: &mut ExperimentReport, h: HurstIndex) -> Result<()> {
    rep.constants.insert("kernel_constant".into(), kernel_constant(h));
    rep.constants.insert("c_H".into(), girsanov_constant(h)?);
    rep.constants.insert("girsanov_sup_constant".into(), girsanov_sup_constant(h)?);
    Ok(())
}

/// `a[k+1] ≤ a[k] + 2 stderr` for paired per-member columns.
fn nonincreasing(rep: &mut ExperimentReport, name: &str, labels: &[String], rows: &[Vec<f64>]) {
    for k in 0..labels.len() - 1 {
        let d = paired(&column(rows, k + 1), &column(rows, k));
        rep.check(
            format!("{name}: {} to {}", labels[k], labels[k + 1]),
            d.value <= 2.0 * d.stderr,
            format!("paired change {:.4e} ± {:.2e}", d.value, d.stderr),
        );
    }
}

pub(super) fn coupling_contraction(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let h = hurst(ctx.pick(&cfg.hurst, vec![0.25], vec![0.25])[0])?;
    let n = ctx.pick(&cfg.n_steps, 4096, 512);
    let paths = ctx.pick(&cfg.paths, 1000, 100);
    let b_id = ctx.pick(&cfg.drift, "dirac@0".to_string(), "dirac@0".to_string());
    let g_id = cfg.g_drift.clone().unwrap_or_else(|| b_id.clone());
    let levels = ctx.pick(&cfg.n_moll, vec![256, 64], vec![256, 64]);
    let lambdas = ctx.pick(&cfg.lambda, LAMBDAS.to_vec(), LAMBDAS.to_vec());
    let x0 = cfg.x0.unwrap_or(0.0);
    let b = mollified(&drift(&b_id, cfg.alpha)?, levels[0])?;
    let g = mollified(&drift(&g_id, cfg.alpha)?, *levels.get(1).unwrap_or(&levels[0]))?;
    rep.resolve("hurst", h.value());
    rep.resolve("n_steps", n);
    rep.resolve("paths", paths);
    rep.resolve("drift", &b_id);
    rep.resolve("g_drift", &g_id);
    rep.resolve("n_moll", &levels);
    rep.resolve("lambda", &lambdas);
    rep.resolve("x0", x0);
    rep.resolve("scheme", CouplingScheme::Euler);
    constants(rep, h)?;
    let sampler = FbmSampler::new(kernel_table(h, n)?);
    let opts = CouplingOptions { scheme: CouplingScheme::Euler, compute_v: false };
    let (rows, att) = ctx.fbm_members(&sampler, 1, paths, ctx.stream(0), |_, p| {
        let p = Arc::new(p);
        lambdas.iter().map(|&l| Ok(coupled_pair(&b, &[x0], &g, &[x0], l, &p, opts)?.sup_gap())).collect::<Result<Vec<f64>>>()
    });
    rep.attrition.merge(att);
    let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    let mut table = Table::new(&["lambda", "mean_sup_gap", "stderr"]);
    let mut means = Vec::new();
    for (k, &l) in lambdas.iter().enumerate() {
        let e = Estimate::mean_of(&column(&rows, k));
        rep.quantity(format!("sup_gap[lambda={l}]"), e);
        table.push(vec![num(l), num(e.value), num(e.stderr)]);
        means.push(e.value);
    }
    let labels: Vec<String> = lambdas.iter().map(|l| format!("lambda {l}")).collect();
    nonincreasing(rep, "sup-gap nonincreasing", &labels, &rows);
    let slope = fit(rep, "sup_gap_vs_lambda", &lambdas, &means)?.slope;
    window(rep, "contraction slope", slope, -1.3, -0.5);
    // The drift difference alone, weighted as in the gap equation, along X.
    let (diff, att) = ctx.fbm_members(&sampler, 1, paths, ctx.stream(0), |_, p| {
        let x = solve_euler(&[x0], &b, &Arc::new(p))?;
        let dt = x.dt;
        Ok(lambdas
            .iter()
            .map(|&l| {
                let decay = (-l * dt).exp();
                let mut j = 0.0_f64;
                let mut sup = 0.0_f64;
                for i in 0..x.n_steps() {
                    let xi = x.x[i];
                    j = decay * (j + (b.eval1(xi) - g.eval1(xi)) * dt);
                    sup = sup.max(j.abs());
                }
                sup
            })
            .collect::<Vec<f64>>())
    });
    rep.attrition.merge(att);
    let diff: Vec<Vec<f64>> = diff.into_iter().flatten().collect();
    let diff_means: Vec<f64> = (0..lambdas.len()).map(|k| Estimate::mean_of(&column(&diff, k)).value).collect();
    for (l, m) in lambdas.iter().zip(&diff_means) {
        rep.quantity(format!("drift_difference_functional[lambda={l}]"), Estimate::exact(*m));
    }
    if diff_means.iter().all(|m| *m > 0.0) {
        let diff_slope = fit(rep, "drift_difference_functional_vs_lambda", &lambdas, &diff_means)?.slope;
        rep.observe(
            "gap slope tracks the drift-difference functional",
            (slope - diff_slope).abs() <= 0.15,
            format!(
                "gap slope {slope:.4}, slope of E sup_t |int e^(-lambda(t-r)) (b-g)(X_r) dr| {diff_slope:.4}, \
                 second-derivative scaling -1 + 3H = {:.2}",
                -1.0 + 3.0 * h.value()
            ),
        );
    }
    rep.tables.insert("contraction".into(), table);
    Ok(())
}

pub(super) fn girsanov_pinsker(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let h = hurst(ctx.pick(&cfg.hurst, vec![0.25], vec![0.25])[0])?;
    let n = ctx.pick(&cfg.n_steps, 1024, 256);
    let paths = ctx.pick(&cfg.paths, 1000, 100);
    let b_id = ctx.pick(&cfg.drift, "dirac@0".to_string(), "dirac@0".to_string());
    let g_id = cfg.g_drift.clone().unwrap_or_else(|| b_id.clone());
    let levels = ctx.pick(&cfg.n_moll, vec![256, 64], vec![256, 64]);
    let lambdas = ctx.pick(&cfg.lambda, LAMBDAS.to_vec(), LAMBDAS.to_vec());
    let bins = ctx.pick(&cfg.bins, 16, 10);
    let x0 = cfg.x0.unwrap_or(0.0);
    let b = mollified(&drift(&b_id, cfg.alpha)?, levels[0])?;
    let g = mollified(&drift(&g_id, cfg.alpha)?, *levels.get(1).unwrap_or(&levels[0]))?;
    rep.resolve("hurst", h.value());
    rep.resolve("n_steps", n);
    rep.resolve("paths", paths);
    rep.resolve("drift", &b_id);
    rep.resolve("g_drift", &g_id);
    rep.resolve("n_moll", &levels);
    rep.resolve("lambda", &lambdas);
    rep.resolve("bins", bins);
    rep.resolve("x0", x0);
    constants(rep, h)?;
    let sampler = FbmSampler::new(kernel_table(h, n)?);
    let opts = CouplingOptions { scheme: CouplingScheme::Euler, compute_v: true };
    let mut table = Table::new(&[
        "lambda",
        "histogram_tv",
        "tv_stderr",
        "shaped_bound",
        "shaped_stderr",
        "pinsker_bound",
        "pinsker_stderr",
        "max_gap",
    ]);
    let mut shaped = Vec::new();
    for &l in &lambdas {
        let (runs, att) = ctx.fbm_members(&sampler, 1, paths, ctx.stream(0), |_, p| {
            coupled_pair(&b, &[x0], &g, &[x0], l, &Arc::new(p), opts)
        });
        rep.attrition.merge(att);
        let runs: Vec<_> = runs.into_iter().flatten().collect();
        let r = girsanov_tv_report(&runs, bins)?;
        let pinsker = r.pinsker.expect("weights were computed");
        rep.quantity(format!("histogram_tv[lambda={l}]"), Estimate { value: r.histogram_tv.value, stderr: r.histogram_tv.stderr, n: runs.len() });
        rep.quantity(format!("shaped_bound[lambda={l}]"), r.shaped);
        rep.quantity(format!("pinsker_bound[lambda={l}]"), pinsker);
        table.push(vec![
            num(l),
            num(r.histogram_tv.value),
            num(r.histogram_tv.stderr),
            num(r.shaped.value),
            num(r.shaped.stderr),
            num(pinsker.value),
            num(pinsker.stderr),
            num(r.max_gap),
        ]);
        let slack = |u: Estimate| 2.0 * (u.stderr.powi(2) + r.histogram_tv.stderr.powi(2)).sqrt();
        rep.check(
            format!("TV below shaped bound, lambda = {l}"),
            r.histogram_tv.value <= r.shaped.value + slack(r.shaped),
            format!("TV {:.4} vs bound {:.4} ± {:.4}", r.histogram_tv.value, r.shaped.value, slack(r.shaped)),
        );
        rep.check(
            format!("TV below Pinsker bound, lambda = {l}"),
            r.histogram_tv.value <= pinsker.value + slack(pinsker),
            format!("TV {:.4} vs bound {:.4} ± {:.4}", r.histogram_tv.value, pinsker.value, slack(pinsker)),
        );
        shaped.push((l, r.shaped.value));
    }
    for w in shaped.windows(2) {
        if (w[1].0 - 2.0 * w[0].0).abs() < 1e-12 && w[0].1 > 0.0 {
            rep.quantity(format!("shaped_bound_ratio[lambda={}->{}]", w[0].0, w[1].0), Estimate::exact(w[1].1 / w[0].1));
        }
    }
    rep.tables.insert("girsanov".into(), table);
    Ok(())
}

/// Standard error of `W1(a_k, b_k) − W1(a_{k+1}, b_{k+1})` by a paired bootstrap.
fn w1_bootstrap(levels: &[Vec<f64>], seed: u64, reps: usize) -> Result<Vec<f64>> {
    let m = levels[0].len();
    let gaps = levels.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); gaps.saturating_sub(1)];
    let mut idx = vec![0usize; m];
    for _ in 0..reps {
        idx.iter_mut().for_each(|i| *i = rng.random_range(0..m));
        let w: Vec<f64> = (0..gaps)
            .map(|k| {
                let a = EmpiricalLaw::new(idx.iter().map(|&i| levels[k][i]).collect())?;
                let b = EmpiricalLaw::new(idx.iter().map(|&i| levels[k + 1][i]).collect())?;
                Ok(wasserstein1_1d(&a, &b))
            })
            .collect::<Result<_>>()?;
        for k in 0..gaps.saturating_sub(1) {
            draws[k].push(w[k] - w[k + 1]);
        }
    }
    Ok(draws
        .iter()
        .map(|d| {
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt()
        })
        .collect())
}

struct CauchyMember {
    gaps: Vec<f64>,
    finals: Vec<f64>,
    psi_first: Vec<f64>,
    psi_last: Vec<f64>,
}

fn cauchy_ensemble(
    cfg: &ExperimentConfig,
    ctx: &Ctx,
    rep: &mut ExperimentReport,
    h: HurstIndex,
    stream: u64,
    gating: bool,
) -> Result<()> {
    let n = ctx.pick(&cfg.n_steps, 1024, 256);
    let paths = ctx.pick(&cfg.paths, 1000, 100);
    let id = ctx.pick(&cfg.drift, "dirac@0".to_string(), "dirac@0".to_string());
    let base = ctx.pick(&cfg.n_moll, vec![16, 32, 64, 128], vec![16, 32, 64]);
    let x0 = cfg.x0.unwrap_or(0.0);
    let b = drift(&id, cfg.alpha)?;
    let mut levels = base.clone();
    levels.push(2 * base[base.len() - 1]);
    let drifts = levels.iter().map(|&k| mollified(&b, k)).collect::<Result<Vec<_>>>()?;
    let tag = format!("H={}", h.value());
    let admissible = admissible_weak(b.nominal_alpha, h);
    rep.resolve(&format!("admissible[{tag}]"), admissible);
    let sampler = FbmSampler::new(kernel_table(h, n)?);
    let (rows, att) = ctx.fbm_members(&sampler, 1, paths, ctx.stream(stream), |_, p| {
        let p = Arc::new(p);
        let sols = drifts.iter().map(|d| solve_euler(&[x0], d, &p)).collect::<Result<Vec<_>>>()?;
        let gaps = sols.windows(2).map(|w| crate::metrics::sup_gap(&w[0].x, &w[1].x).min(1.0)).collect();
        let finals = sols.iter().map(|s| s.terminal()[0]).collect();
        Ok(CauchyMember {
            gaps,
            finals,
            psi_first: sols[0].psi.clone(),
            psi_last: sols[sols.len() - 1].psi.clone(),
        })
    });
    rep.attrition.merge(att);
    let rows: Vec<CauchyMember> = rows.into_iter().flatten().collect();
    let gap_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.gaps.clone()).collect();
    let finals: Vec<Vec<f64>> = (0..levels.len()).map(|k| rows.iter().map(|r| r.finals[k]).collect()).collect();
    let mut table = Table::new(&["hurst", "n", "two_n", "mean_gap", "gap_stderr", "w1_time1"]);
    let mut w1 = Vec::new();
    for k in 0..base.len() {
        let e = Estimate::mean_of(&column(&gap_rows, k));
        let w = wasserstein1_1d(&EmpiricalLaw::new(finals[k].clone())?, &EmpiricalLaw::new(finals[k + 1].clone())?);
        rep.quantity(format!("cauchy_gap[{tag},n={}]", levels[k]), e);
        rep.quantity(format!("w1_time1[{tag},n={}]", levels[k]), Estimate::exact(w));
        table.push(vec![num(h.value()), num(levels[k] as f64), num(levels[k + 1] as f64), num(e.value), num(e.stderr), num(w)]);
        w1.push(w);
    }
    let labels: Vec<String> = base.iter().map(|n| format!("n = {n}")).collect();
    let w1_se = w1_bootstrap(&finals, ctx.stream(1000 + stream), 200)?;
    for k in 0..base.len() - 1 {
        let d = paired(&column(&gap_rows, k + 1), &column(&gap_rows, k));
        let gap_ok = d.value <= 2.0 * d.stderr;
        let w_ok = w1[k + 1] - w1[k] <= 2.0 * w1_se[k];
        let gap_detail = format!("paired change {:.4e} ± {:.2e}", d.value, d.stderr);
        let w_detail = format!("W1 {:.4e} -> {:.4e}, bootstrap stderr {:.2e}", w1[k], w1[k + 1], w1_se[k]);
        let gap_name = format!("Cauchy gap decreasing, {tag}: {} to {}", labels[k], labels[k + 1]);
        let w_name = format!("W1 decreasing, {tag}: {} to {}", labels[k], labels[k + 1]);
        if gating {
            rep.check(gap_name, gap_ok, gap_detail);
            rep.check(w_name, w_ok, w_detail);
        } else {
            rep.observe(gap_name, gap_ok, gap_detail);
            rep.observe(w_name, w_ok, w_detail);
        }
    }
    if gating && rows.len() >= 100 {
        let kappa = 1.0 + b.nominal_alpha * h.value();
        let dt = 1.0 / n as f64;
        let first: Vec<&[f64]> = rows.iter().map(|r| r.psi_first.as_slice()).collect();
        let last: Vec<&[f64]> = rows.iter().map(|r| r.psi_last.as_slice()).collect();
        let hf = holder_seminorm_lm(&first, 1, dt, kappa, 2.0)?;
        let hl = holder_seminorm_lm(&last, 1, dt, kappa, 2.0)?;
        rep.quantity(format!("holder_psi[{tag},n={}]", levels[0]), Estimate::exact(hf));
        rep.quantity(format!("holder_psi[{tag},n={}]", levels[levels.len() - 1]), Estimate::exact(hl));
        rep.observe(
            format!("Holder seminorm of psi stable within 15% at kappa = {kappa}"),
            (hl / hf - 1.0).abs() <= 0.15,
            format!("{hf:.4} at n = {} vs {hl:.4} at n = {}", levels[0], levels[levels.len() - 1]),
        );
    }
    rep.tables.insert(format!("cauchy_{}", h.value()), table);
    Ok(())
}

pub(super) fn sde_weak_cauchy(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let h = hurst(ctx.pick(&cfg.hurst, vec![0.25], vec![0.25])[0])?;
    let contrast = ctx.pick(&cfg.contrast_hurst, 0.45, 0.45);
    rep.resolve("hurst", h.value());
    rep.resolve("contrast_hurst", contrast);
    rep.resolve("n_steps", ctx.pick(&cfg.n_steps, 1024, 256));
    rep.resolve("paths", ctx.pick(&cfg.paths, 1000, 100));
    rep.resolve("drift", ctx.pick(&cfg.drift, "dirac@0".to_string(), "dirac@0".to_string()));
    rep.resolve("n_moll", ctx.pick(&cfg.n_moll, vec![16u64, 32, 64, 128], vec![16, 32, 64]));
    rep.resolve("x0", cfg.x0.unwrap_or(0.0));
    rep.resolve("gap", "E[min(sup |X^(n) - X^(2n)|, 1)] under shared noise");
    rep.constants.insert("kernel_constant".into(), kernel_constant(h));
    cauchy_ensemble(cfg, ctx, rep, h, 0, true)?;
    rep.notes.push(format!("H = {contrast} is reported for contrast only; no convergence is asserted there."));
    cauchy_ensemble(cfg, ctx, rep, hurst(contrast)?, 1, false)
}

pub(super) fn min_construction(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let h = hurst(ctx.pick(&cfg.hurst, vec![0.25], vec![0.25])[0])?;
    let n = ctx.pick(&cfg.n_steps, 1024, 256);
    let paths = ctx.pick(&cfg.paths, 200, 50);
    let id = ctx.pick(&cfg.drift, "measure:uniform[0,0.5]".to_string(), "measure:uniform[0,0.5]".to_string());
    let ks = ctx.pick(&cfg.n_moll, vec![64, 256, 1024], vec![64, 256, 1024]);
    let x0 = cfg.x0.unwrap_or(0.25);
    let b = drift(&id, None)?;
    let top = *ks.iter().max().expect("levels");
    let solution_levels = [8 * top, 4 * top];
    rep.resolve("hurst", h.value());
    rep.resolve("n_steps", n);
    rep.resolve("paths", paths);
    rep.resolve("drift", &id);
    rep.resolve("n_moll", &ks);
    rep.resolve("solution_levels", solution_levels);
    rep.resolve("x0", x0);
    rep.constants.insert("kernel_constant".into(), kernel_constant(h));
    rep.check("drift is a nonnegative measure", is_nonnegative_measure(&b), id.clone());
    let s1 = mollified(&b, solution_levels[0])?;
    let s2 = mollified(&b, solution_levels[1])?;
    let residual_drifts = ks.iter().map(|&k| mollified(&b, k)).collect::<Result<Vec<_>>>()?;
    let sampler = FbmSampler::new(kernel_table(h, n)?);
    let (rows, att) = ctx.fbm_members(&sampler, 1, paths, ctx.stream(0), |_, p| {
        let p = Arc::new(p);
        let y = min_solution(&solve_euler(&[x0], &s1, &p)?, &solve_euler(&[x0], &s2, &p)?)?;
        Ok(residual_drifts.iter().map(|g| residual(&y, g)).collect::<Vec<f64>>())
    });
    rep.attrition.merge(att);
    let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    let mut table = Table::new(&["k", "mean_residual", "stderr"]);
    let mut means = Vec::new();
    for (j, &k) in ks.iter().enumerate() {
        let e = Estimate::mean_of(&column(&rows, j));
        rep.quantity(format!("residual[k={k}]"), e);
        table.push(vec![num(k as f64), num(e.value), num(e.stderr)]);
        means.push(e);
    }
    for j in 0..ks.len() - 1 {
        let d = paired(&column(&rows, j + 1), &column(&rows, j));
        rep.check(
            format!("residual decreasing: k = {} to {}", ks[j], ks[j + 1]),
            means[j + 1].value < means[j].value,
            format!("{:.4e} -> {:.4e} (paired change {:.3e} ± {:.2e})", means[j].value, means[j + 1].value, d.value, d.stderr),
        );
    }
    rep.tables.insert("min_construction".into(), table);
    Ok(())
}
