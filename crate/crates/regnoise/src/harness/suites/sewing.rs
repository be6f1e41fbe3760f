//! Sewing of the conditional drift germ against the pathwise integral.

use std::sync::Arc;

use super::{column, drift, hurst, mollified};
use crate::error::{LabError, Result};
use crate::harness::{kernel_table, num, Ctx, ExperimentConfig, ExperimentReport, Table};
use crate::metrics::{scaling_exponent, Estimate};
use crate::sewing::{sew, ConditionalDriftGerm, Germ};
use crate::fbm::FbmSampler;

/// Piecewise-constant shift `0.1·⌊4t⌋`, constant on the quarters of [0,1].
fn step_shift(t: f64) -> f64 {
    0.1 * (4.0 * t).floor().min(3.0)
}

pub(super) fn sewing_oracle(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let h = hurst(ctx.pick(&cfg.hurst, vec![0.3], vec![0.3])[0])?;
    let n = ctx.pick(&cfg.n_steps, 1024, 256);
    let paths = ctx.pick(&cfg.paths, 1000, 100);
    let level = ctx.pick(&cfg.levels, 8, 6);
    let n_moll = ctx.pick(&cfg.n_moll, vec![256], vec![256])[0];
    let ids = match &cfg.drift {
        Some(id) => vec![id.clone()],
        None => vec!["smooth:sin".to_string(), "dirac@0".to_string()],
    };
    let cells = 1usize << level;
    if !n.is_multiple_of(cells) || n / cells < 2 {
        return Err(LabError::Config(format!("level {level} needs n_steps a multiple of {} with at least two nodes per cell", cells)));
    }
    if !n.is_multiple_of(4) || !cells.is_multiple_of(4) {
        return Err(LabError::Config("cells must align with the quarters of [0,1]".into()));
    }
    rep.resolve("hurst", h.value());
    rep.resolve("n_steps", n);
    rep.resolve("paths", paths);
    rep.resolve("level", level);
    rep.resolve("drift", &ids);
    rep.resolve("n_moll", n_moll);
    rep.resolve("shift", "0.1 * floor(4t)");
    let dt = 1.0 / n as f64;
    let phi: Vec<f64> = (0..=n).map(|i| step_shift(i as f64 * dt)).collect();
    let table = kernel_table(h, n)?;
    let sampler = FbmSampler::new(table.clone());
    let mut out = Table::new(&["drift", "mean_sewn", "mean_pathwise", "mean_difference", "stderr", "decay_rate"]);
    for (j, id) in ids.iter().enumerate() {
        let b = drift(id, cfg.alpha)?;
        let f = mollified(&b, n_moll)?;
        let (rows, att) = ctx.fbm_members(&sampler, 1, paths, ctx.stream(j as u64), |_, p| {
            let p = Arc::new(p);
            let pathwise: f64 = (0..n).map(|i| f.eval1(p.values[i] + phi[i]) * dt).sum();
            let germ = ConditionalDriftGerm::new(f.clone(), phi.clone(), true, p, table.clone())?;
            let r = sew(&germ, 0.0, 1.0, level)?;
            Ok(vec![r.limit()[0], pathwise, r.decay_rate.unwrap_or(f64::NAN)])
        });
        rep.attrition.merge(att);
        let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
        let sewn = Estimate::mean_of(&column(&rows, 0));
        let path = Estimate::mean_of(&column(&rows, 1));
        let d = super::paired(&column(&rows, 0), &column(&rows, 1));
        let rates: Vec<f64> = column(&rows, 2).into_iter().filter(|r| r.is_finite()).collect();
        let rate = if rates.is_empty() { f64::NAN } else { rates.iter().sum::<f64>() / rates.len() as f64 };
        rep.quantity(format!("sewn[{id}]"), sewn);
        rep.quantity(format!("pathwise[{id}]"), path);
        rep.quantity(format!("difference[{id}]"), d);
        let ok = if d.stderr > 0.0 { d.value.abs() <= 3.0 * d.stderr } else { d.value.abs() <= 1e-12 };
        rep.check(
            format!("sewn limit agrees with pathwise integral, {id}"),
            ok,
            format!("mean difference {:.4e} ± {:.2e}", d.value, d.stderr),
        );
        out.push(vec![id.clone(), num(sewn.value), num(path.value), num(d.value), num(d.stderr), num(rate)]);
        defect_fit(ctx, rep, &sampler, &f, id, j, n, paths.min(200))?;
    }
    rep.tables.insert("sewing".into(), out);
    Ok(())
}

/// Non-gating fits of `‖A_{s,t}‖_{L2}` and `‖E^s δA_{s,u,t}‖_{L2}` against
/// `t − s` for the shift `φ_t = t`.
#[allow(clippy::too_many_arguments)]
fn defect_fit(
    ctx: &Ctx,
    rep: &mut ExperimentReport,
    sampler: &FbmSampler,
    f: &crate::drifts::MollifiedDrift,
    id: &str,
    j: usize,
    n: usize,
    paths: usize,
) -> Result<()> {
    let dt = 1.0 / n as f64;
    let s = 0.25;
    let widths: Vec<f64> = (1..=5).map(|k| 2f64.powi(-k) * 0.5).filter(|w| w / dt >= 2.0).collect();
    if widths.len() < 2 {
        return Ok(());
    }
    let phi: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let table = sampler.table().clone();
    let (rows, att) = ctx.fbm_members(sampler, 1, paths, ctx.stream(100 + j as u64), |_, p| {
        let germ = ConditionalDriftGerm::new(f.clone(), phi.clone(), true, Arc::new(p), table.clone())?;
        let mut out = Vec::with_capacity(2 * widths.len());
        let mut a = [0.0];
        for w in &widths {
            let u = s + (w / 2.0 / dt).round() * dt;
            out.push(germ.conditional_defect(s, u, s + w)?[0].powi(2));
            germ.eval(s, s + w, &mut a);
            out.push(a[0] * a[0]);
        }
        Ok(out)
    });
    rep.attrition.merge(att);
    let rows: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    let l2 = |k: usize| Estimate::mean_of(&column(&rows, k)).value.sqrt();
    let germ_norms: Vec<f64> = (0..widths.len()).map(|k| l2(2 * k + 1)).collect();
    let defect_norms: Vec<f64> = (0..widths.len()).map(|k| l2(2 * k)).collect();
    for (name, norms, threshold) in [("germ", germ_norms, 0.5), ("conditional_defect", defect_norms, 1.0)] {
        if norms.iter().all(|m| *m > 0.0) {
            let fit = scaling_exponent(&widths, &norms)?;
            let slope = fit.slope;
            rep.fits.insert(format!("{name}_l2_vs_width[{id}]"), fit);
            rep.observe(
                format!("{name} L2 slope above {threshold}, {id}"),
                slope > threshold,
                format!("slope {slope:.4} over widths {widths:?}"),
            );
        } else {
            rep.notes.push(format!("{name} vanished identically for {id}"));
        }
    }
    Ok(())
}
