//! Deterministic checks of the interval heat kernels.

use crate::error::Result;
use crate::gaussian::{heat_kernel_1d, trapezoid_weights, unit_grid, Bc, HeatKernelSpec};
use crate::harness::{num, Ctx, ExperimentConfig, ExperimentReport, Table};
use crate::metrics::Estimate;
use crate::she::{kernel_lipschitz_check, lipschitz_probes};

const QUADRATURE_NODES: usize = 2049;

fn boundaries(cfg: &ExperimentConfig, ctx: &Ctx) -> Result<Vec<Bc>> {
    let names = ctx.pick(&cfg.bc, vec!["periodic".into(), "neumann".into()], vec!["periodic".into(), "neumann".into()]);
    names.iter().map(|n| Bc::parse(n)).collect()
}

pub(super) fn heat_kernel_laws(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let bcs = boundaries(cfg, ctx)?;
    let ts = ctx.pick(&cfg.t_levels, vec![0.01, 0.1, 1.0], vec![0.01, 0.1, 1.0]);
    rep.resolve("bc", bcs.iter().map(|b| b.name()).collect::<Vec<_>>());
    rep.resolve("t_levels", &ts);
    rep.resolve("quadrature_nodes", QUADRATURE_NODES);
    rep.resolve("tolerance", 1e-8);
    let grid = unit_grid(QUADRATURE_NODES);
    let w = trapezoid_weights(&grid);
    let xs = [0.0, 0.1, 0.37, 0.5, 0.9, 1.0];
    let pairs = [(0.1, 0.7), (0.37, 0.37), (0.0, 1.0), (0.5, 0.2), (0.95, 0.05)];
    let mut table = Table::new(&["bc", "t", "mass_error", "chapman_kolmogorov_error"]);
    for bc in bcs {
        let spec = HeatKernelSpec::for_bc(bc);
        for &t in &ts {
            let mut mass_err: f64 = 0.0;
            for &x in &xs {
                let mut mass = 0.0;
                for (y, wy) in grid.iter().zip(&w) {
                    mass += wy * heat_kernel_1d(t, x, *y, &spec)?;
                }
                mass_err = mass_err.max((mass - 1.0).abs());
            }
            let mut ck_err: f64 = 0.0;
            for &(x, y) in &pairs {
                let mut conv = 0.0;
                for (z, wz) in grid.iter().zip(&w) {
                    conv += wz * heat_kernel_1d(t / 2.0, x, *z, &spec)? * heat_kernel_1d(t / 2.0, *z, y, &spec)?;
                }
                ck_err = ck_err.max((conv - heat_kernel_1d(t, x, y, &spec)?).abs());
            }
            let name = bc.name();
            rep.quantity(format!("mass_error[{name},t={t}]"), Estimate::exact(mass_err));
            rep.quantity(format!("chapman_kolmogorov_error[{name},t={t}]"), Estimate::exact(ck_err));
            table.push(vec![name.to_string(), num(t), num(mass_err), num(ck_err)]);
            rep.check(format!("unit mass, {name}, t = {t}"), mass_err <= 1e-8, format!("max error {mass_err:.3e}"));
            rep.check(
                format!("Chapman-Kolmogorov, {name}, t = {t}"),
                ck_err <= 1e-8,
                format!("max error {ck_err:.3e}"),
            );
        }
    }
    rep.tables.insert("heat_kernel_laws".into(), table);
    Ok(())
}

pub(super) fn kernel_lipschitz(cfg: &ExperimentConfig, ctx: &Ctx, rep: &mut ExperimentReport) -> Result<()> {
    let bcs = boundaries(cfg, ctx)?;
    let ts = ctx.pick(&cfg.t_levels, vec![0.01, 0.1, 1.0], vec![0.01, 0.1, 1.0]);
    let probes = lipschitz_probes();
    rep.resolve("bc", bcs.iter().map(|b| b.name()).collect::<Vec<_>>());
    rep.resolve("t_levels", &ts);
    rep.resolve("probes", probes.iter().map(|p| p.0).collect::<Vec<_>>());
    rep.resolve("tolerance", 0.1);
    let grids: Vec<_> = probes.into_iter().map(|p| p.1).collect();
    let mut table = Table::new(&["bc", "t", "constant"]);
    for bc in bcs {
        let r = kernel_lipschitz_check(bc, &ts, &grids)?;
        let name = bc.name();
        for (t, c) in r.t_levels.iter().zip(&r.constants) {
            rep.quantity(format!("lipschitz_constant[{name},t={t}]"), Estimate::exact(*c));
            table.push(vec![name.to_string(), num(*t), num(*c)]);
        }
        rep.check(
            format!("constant stable within 10%, {name}"),
            r.spread <= 0.1,
            format!("constants {:?}, largest relative deviation from their mean {:.3}", r.constants, r.spread),
        );
    }
    rep.notes.push(
        "On [0,1] the semigroup equilibrates for t of order 1, so |P_t f(x) - P_t f(y)| decays like e^{-mu_1 t} \
         while the sqrt(t) factor grows; the constant is then no longer flat in t."
            .into(),
    );
    rep.tables.insert("lipschitz".into(), table);
    Ok(())
}
