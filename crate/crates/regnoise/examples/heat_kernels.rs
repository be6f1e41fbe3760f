//! Periodic and Neumann heat kernels on [0,1], the semigroup acting on a grid
//! function, and the heat surrogate of a negative Hölder norm.

use regnoise::gaussian::{apply_semigroup, besov_norm_neg, default_t_levels, heat_kernel_1d, Bc, GridFunction, HeatKernelSpec, OnDomain};

fn main() -> regnoise::Result<()> {
    for bc in [Bc::Periodic, Bc::Neumann] {
        let spec = HeatKernelSpec::for_bc(bc);
        println!("{}: p_0.1(0.2, 0.7) = {:.6}", bc.name(), heat_kernel_1d(0.1, 0.2, 0.7, &spec)?);
        let f = GridFunction::on_unit_interval(257, |x| if x < 0.5 { -1.0 } else { 1.0 });
        let pf = apply_semigroup(&f, 0.01, &spec)?;
        println!("  sup |P_0.01 sign| = {:.4}", pf.sup_norm());
        let spike = GridFunction::on_unit_interval(257, |x| if (x - 0.5).abs() < 1e-3 { 256.0 } else { 0.0 });
        let norm = besov_norm_neg(&OnDomain { f: &spike, spec: &spec }, -1.0, &default_t_levels())?;
        println!("  C^-1 surrogate of a grid spike: {norm:.4}");
    }
    Ok(())
}
