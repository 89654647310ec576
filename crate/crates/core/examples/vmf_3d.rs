//! Bidirectional lobes on the sphere: a two-component von Mises-Fisher
//! mixture fitted to antipodal caps.

use dirgrid::em::EmOptions;
use dirgrid::vmf::{fit_vmf, fit_vmf_mixture, sample_vmf, UnitVector, VonMisesFisher};

fn main() -> dirgrid::Result<()> {
    let up = UnitVector::new(vec![0.2, 0.1, 1.0])?;
    let down = UnitVector::new(up.as_slice().iter().map(|v| -v).collect())?;
    let mut xs = sample_vmf(&VonMisesFisher::new(up.clone(), 15.0)?, 400, 1);
    xs.extend(sample_vmf(&VonMisesFisher::new(down, 15.0)?, 300, 2));

    let single = fit_vmf(&xs)?;
    println!("single vMF: kappa={:.3} ({:?})", single.dist.kappa(), single.flag);

    let init = [UnitVector::basis(3, 0)?, UnitVector::basis(3, 2)?];
    let options = EmOptions { epsilon: 1e-6, max_iterations: 200, alpha_floor: 1e-4 };
    let (mix, report) = fit_vmf_mixture(&xs, &init, 1.0, &options)?;
    println!("mixture after {} iterations:", report.iterations);
    for (alpha, d) in &mix.components {
        let m = d.mu().as_slice();
        println!("  alpha={alpha:.3} mu=({:+.3}, {:+.3}, {:+.3}) kappa={:.2}", m[0], m[1], m[2], d.kappa());
    }
    println!("density at the upper pole direction: {:.4}", mix.pdf(&up)?);
    Ok(())
}
