//! Suites that only need fBM paths.

use super::{drift, fit, hurst, mollified, need_grid, window, SquareSums};
use crate::error::Result;
use crate::fbm::{
    calibrate_girsanov_constant, calibration_shifts, fbm_covariance as covariance_exact, forward_volterra, girsanov_constant,
    girsanov_v_with_constant, kernel_constant, FbmSampler, HurstIndex,
};
use crate::harness::{kernel_table, num, Ctx, ExperimentConfig, ExperimentReport, Table};
use crate::metrics::Estimate;
use crate::sde::exp_weighted_running;

/// Points of the coarse subgrid `{k/8}` on which covariances are compared.
const SUBGRID: usize = 8;

pub(super) fn fbm_covariance(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let hs = ctx.pick(&cfg.hurst, vec![0.25, 0.4, 0.5], vec![0.25, 0.5]);
    let n = ctx.pick(&cfg.n_steps, 256, 64);
    let paths = ctx.pick(&cfg.paths, 10_000, 400);
    need_grid(n, SUBGRID)?;
    rep.resolve("hurst", &hs);
    rep.resolve("n_steps", n);
    rep.resolve("paths", paths);
    rep.resolve("subgrid", format!("k/{SUBGRID}, k = 1..{SUBGRID}"));
    let mut table = Table::new(&["hurst", "s", "t", "empirical", "stderr", "exact", "z"]);
    for (j, &h) in hs.iter().enumerate() {
        let hu = hurst(h)?;
        rep.constants.insert(format!("kernel_constant[H={h}]"), kernel_constant(hu));
        let sampler = FbmSampler::new(kernel_table(hu, n)?);
        let idx: Vec<usize> = (1..=SUBGRID).map(|k| k * n / SUBGRID).collect();
        let (vals, att) = ctx.fbm_members(&sampler, 1, paths, ctx.stream(j as u64), |_, p| {
            Ok(idx.iter().map(|&i| p.values[i]).collect::<Vec<f64>>())
        });
        rep.attrition.merge(att);
        let vals: Vec<Vec<f64>> = vals.into_iter().flatten().collect();
        let mut worst: f64 = 0.0;
        let mut entries = 0;
        for a in 0..SUBGRID {
            for b in a..SUBGRID {
                let (s, t) = ((a + 1) as f64 / SUBGRID as f64, (b + 1) as f64 / SUBGRID as f64);
                let prods: Vec<f64> = vals.iter().map(|v| v[a] * v[b]).collect();
                let e = Estimate::mean_of(&prods);
                let exact = covariance_exact(s, t, hu);
                let z = (e.value - exact).abs() / e.stderr;
                worst = worst.max(z);
                entries += 1;
                table.push(vec![num(h), num(s), num(t), num(e.value), num(e.stderr), num(exact), num(z)]);
            }
        }
        rep.check(
            format!("covariance within 3 stderr, H = {h}"),
            worst <= 3.0,
            format!("largest |empirical - exact| / stderr = {worst:.3} over {entries} entries"),
        );
    }
    rep.tables.insert("covariance".into(), table);
    Ok(())
}

fn dyadic_levels(k_max: i32) -> Vec<f64> {
    (1..=k_max).map(|k| 2f64.powi(-k)).collect()
}

/// `1 + αH`, the time exponent for a drift of regularity α.
fn time_exponent(alpha: f64, h: HurstIndex) -> f64 {
    1.0 + alpha * h.value()
}

pub(super) fn occupation_time_scaling(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let h = hurst(ctx.pick(&cfg.hurst, vec![0.3], vec![0.3])[0])?;
    let n = ctx.pick(&cfg.n_steps, 2048, 512);
    let paths = ctx.pick(&cfg.paths, 10_000, 300);
    let id = ctx.pick(&cfg.drift, "dirac@0".to_string(), "dirac@0".to_string());
    let n_moll = ctx.pick(&cfg.n_moll, vec![256], vec![256])[0];
    let ts = ctx.pick(&cfg.t_levels, dyadic_levels(6), dyadic_levels(4));
    let b = drift(&id, cfg.alpha)?;
    let f = mollified(&b, n_moll)?;
    let idx: Vec<usize> = ts.iter().map(|t| crate::fbm::grid_index(*t, 1.0 / n as f64, n)).collect::<Result<_>>()?;
    rep.resolve("hurst", h.value());
    rep.resolve("n_steps", n);
    rep.resolve("paths", paths);
    rep.resolve("drift", &id);
    rep.resolve("alpha", b.nominal_alpha);
    rep.resolve("n_moll", n_moll);
    rep.resolve("t_levels", &ts);
    rep.constants.insert("kernel_constant".into(), kernel_constant(h));
    let sampler = FbmSampler::new(kernel_table(h, n)?);
    let dt = 1.0 / n as f64;
    let last = *idx.iter().max().expect("levels");
    let (acc, att) = ctx.fbm_fold(
        &sampler,
        1,
        paths,
        ctx.stream(0),
        |_, p| {
            let mut out = Vec::with_capacity(idx.len());
            let mut sum = 0.0;
            let mut running = vec![0.0; last + 1];
            for i in 0..last {
                sum += f.eval1(p.values[i]) * dt;
                running[i + 1] = sum;
            }
            out.extend(idx.iter().map(|&i| running[i]));
            Ok(out)
        },
        SquareSums::new(idx.len()),
        |acc, v| acc.add(&v),
    );
    rep.attrition.merge(att);
    let mut table = Table::new(&["t", "l2_norm", "stderr"]);
    let mut norms = Vec::new();
    for (k, &t) in ts.iter().enumerate() {
        let e = acc.rms(k);
        rep.quantity(format!("l2_norm[t={t}]"), e);
        table.push(vec![num(t), num(e.value), num(e.stderr)]);
        norms.push(e.value);
    }
    let expected = time_exponent(b.nominal_alpha, h);
    let slope = fit(rep, "l2_norm_vs_t", &ts, &norms)?.slope;
    window(rep, "time exponent", slope, expected - 0.1, expected + 0.1);
    rep.tables.insert("occupation".into(), table);
    Ok(())
}

pub(super) fn exp_weight_scaling(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let h = hurst(ctx.pick(&cfg.hurst, vec![0.3], vec![0.3])[0])?;
    let n = ctx.pick(&cfg.n_steps, 2048, 512);
    let paths = ctx.pick(&cfg.paths, 10_000, 300);
    let id = ctx.pick(&cfg.drift, "dirac@0".to_string(), "dirac@0".to_string());
    let n_moll = ctx.pick(&cfg.n_moll, vec![256], vec![256])[0];
    let lambdas = ctx.pick(&cfg.lambda, vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0], vec![4.0, 16.0, 64.0]);
    let b = drift(&id, cfg.alpha)?;
    let f = mollified(&b, n_moll)?;
    rep.resolve("hurst", h.value());
    rep.resolve("n_steps", n);
    rep.resolve("paths", paths);
    rep.resolve("drift", &id);
    rep.resolve("alpha", b.nominal_alpha);
    rep.resolve("n_moll", n_moll);
    rep.resolve("lambda", &lambdas);
    rep.resolve("norm", "sup over grid times of the L2 norm");
    rep.constants.insert("kernel_constant".into(), kernel_constant(h));
    let sampler = FbmSampler::new(kernel_table(h, n)?);
    let dt = 1.0 / n as f64;
    let len = n + 1;
    let (acc, att) = ctx.fbm_fold(
        &sampler,
        1,
        paths,
        ctx.stream(0),
        |_, p| {
            let mut out = Vec::with_capacity(lambdas.len() * len);
            for &l in &lambdas {
                out.extend(exp_weighted_running(&f, 0.0, l, &p.values, dt));
            }
            Ok(out)
        },
        SquareSums::new(lambdas.len() * len),
        |acc, v| acc.add(&v),
    );
    rep.attrition.merge(att);
    let mut table = Table::new(&["lambda", "sup_l2_norm", "stderr", "argmax_t"]);
    let mut norms = Vec::new();
    for (l, &lam) in lambdas.iter().enumerate() {
        let (k, e) = acc.sup_rms(l * len + 1..(l + 1) * len);
        rep.quantity(format!("sup_l2_norm[lambda={lam}]"), e);
        table.push(vec![num(lam), num(e.value), num(e.stderr), num((k - l * len) as f64 * dt)]);
        norms.push(e.value);
    }
    let expected = -time_exponent(b.nominal_alpha, h);
    let slope = fit(rep, "sup_l2_norm_vs_lambda", &lambdas, &norms)?.slope;
    window(rep, "lambda exponent", slope, expected - 0.15, expected + 0.15);
    rep.tables.insert("exp_weight".into(), table);
    Ok(())
}

fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for i in 1..values.len() {
        out[i] = out[i - 1] + 0.5 * dt * (values[i - 1] + values[i]);
    }
    out
}

pub(super) fn girsanov_calibration(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let hs = ctx.pick(&cfg.hurst, vec![0.25, 0.4, 0.5], vec![0.25, 0.4, 0.5]);
    let n = ctx.pick(&cfg.n_steps, 1024, 256);
    rep.resolve("hurst", &hs);
    rep.resolve("n_steps", n);
    rep.resolve("tolerance", 1e-3);
    let mut table = Table::new(&["hurst", "constant", "max_residual", "frozen_constant"]);
    let dt = 1.0 / n as f64;
    for &h in &hs {
        let hu = hurst(h)?;
        let frozen = girsanov_constant(hu)?;
        rep.constants.insert(format!("c_H[H={h}]"), frozen);
        let (constant, residual) = if hu.is_brownian() {
            let mut worst: f64 = 0.0;
            for (_, beta_fn) in calibration_shifts() {
                let beta: Vec<f64> = (0..=n).map(|i| beta_fn(i as f64 * dt)).collect();
                let v = girsanov_v_with_constant(&beta, 1, dt, hu, 1.0)?;
                let image = forward_volterra(&v, 1, dt, hu)?;
                let target = cumulative_trapezoid(&beta, dt);
                worst = image.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
            }
            (1.0, worst)
        } else {
            let cal = calibrate_girsanov_constant(hu, n)?;
            (cal.constant, cal.max_residual)
        };
        rep.quantity(format!("max_residual[H={h}]"), Estimate::exact(residual));
        table.push(vec![num(h), num(constant), num(residual), num(frozen)]);
        let how = if hu.is_brownian() { "c_H = 1, no calibration" } else { "after calibration" };
        rep.check(
            format!("forward image reproduces int beta, H = {h}"),
            residual <= 1e-3,
            format!("max residual {residual:.3e} {how} (constant {constant:.10})"),
        );
    }
    rep.tables.insert("calibration".into(), table);
    Ok(())
}
