//! Wasserstein-1, histogram TV, p-variation and log-log slope fits.

use regnoise::metrics::{p_variation, scaling_exponent, tv_histogram, wasserstein1_1d, EmpiricalLaw};

fn main() -> regnoise::Result<()> {
    let a: Vec<f64> = (0..500).map(|i| (i as f64 + 0.5) / 500.0).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 0.1).collect();
    let w = wasserstein1_1d(&EmpiricalLaw::new(a.clone())?, &EmpiricalLaw::new(b.clone())?);
    println!("W1 of a shift by 0.1: {w:.4}");
    let tv = tv_histogram(&a, &b, 20)?;
    println!("histogram TV: {:.3} ± {:.3}", tv.value, tv.stderr);
    let zigzag: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
    println!("2-variation of a 64-step zigzag: {:.4}", p_variation(&zigzag, 2.0)?);
    let xs = [1.0, 2.0, 4.0, 8.0];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.75)).collect();
    let fit = scaling_exponent(&xs, &ys)?;
    println!("slope {:.4}, r2 {:.4}", fit.slope, fit.r2);
    Ok(())
}
