//! Circular mean, resultant length and a von Mises fit for a small sample
//! that straddles the ±π seam.

use dirgrid::circular::{angles, circular_stats, fit_vm, inverse_bessel_ratio, VonMises};

fn main() -> dirgrid::Result<()> {
    let raw = [3.0, 3.1, -3.1, -3.05, 2.95, 3.12, -3.0];
    let xs = angles(&raw)?;
    let s = circular_stats(&xs)?;
    println!("n={} mean={:.4} rad R={:.4}", s.n, s.mean_dir.radians(), s.r_bar);
    println!("arithmetic mean would be {:.4}", raw.iter().sum::<f64>() / raw.len() as f64);

    let fit = fit_vm(&xs)?;
    println!("fit: mu={:.4} kappa={:.3} ({:?})", fit.dist.mu().radians(), fit.dist.kappa(), fit.flag);
    println!("two-branch approximation: kappa={:.3}", inverse_bessel_ratio(s.r_bar)?.kappa);

    let d = VonMises::new(fit.dist.mu(), fit.dist.kappa())?;
    for deg in [180.0f64, 150.0, 90.0, 0.0] {
        let t = dirgrid::circular::wrap(deg.to_radians())?;
        println!("  p({deg:>5} deg) = {:.5}", d.pdf(t));
    }
    Ok(())
}
