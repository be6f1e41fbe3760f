//! Spectral Galerkin solution of the stochastic heat equation with a
//! mollified Dirac drift, and the weighted norm of a Cauchy gap.

use regnoise::drifts::{mollify, parse_drift};
use regnoise::gaussian::{Bc, GridFunction};
use regnoise::she::{weighted_norm, SheModel, SPACE_NODES};

fn main() -> regnoise::Result<()> {
    let n = 256;
    let model = SheModel::new(Bc::Periodic, 64, n, 1.0 / n as f64)?;
    let u0 = GridFunction::on_unit_interval(SPACE_NODES, |x| (2.0 * std::f64::consts::PI * x).sin());
    let b = parse_drift("dirac@0")?;
    let noise = model.noise(11);
    let u16 = model.solve_mild(&u0, &mollify(&b, 16)?, &noise)?;
    let u32 = model.solve_mild(&u0, &mollify(&b, 32)?, &noise)?;
    let v = model.convolution(&noise)?;
    println!("sup |u| = {:.4}, sup |V| = {:.4}", u32.sup_abs(), v.sup_abs());
    println!("u(1, 1/2) = {:+.4}", u32.at(n, SPACE_NODES / 2));
    println!("weighted norm of u16 - u32: {:.4e}", weighted_norm(&u16.difference(&u32)?, &model.basis)?);
    Ok(())
}
