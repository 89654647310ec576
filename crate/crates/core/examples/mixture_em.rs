//! Fit a von Mises mixture to a three-way sample. DBSCAN picks the number
//! of components, EM refines them.

use dirgrid::circular::{wrap, VonMises};
use dirgrid::vmm::{find_modes, fit_vmm, sample, EmConfig, MixtureComponent, VonMisesMixture};

fn main() -> dirgrid::Result<()> {
    let truth = VonMisesMixture::new(vec![
        MixtureComponent { alpha: 0.5, dist: VonMises::new(wrap(0.0)?, 12.0)? },
        MixtureComponent { alpha: 0.3, dist: VonMises::new(wrap(2.2)?, 15.0)? },
        MixtureComponent { alpha: 0.2, dist: VonMises::new(wrap(-2.0)?, 20.0)? },
    ])?;
    let xs = sample(&truth, 400, 42);

    let (fit, report) = fit_vmm(&xs, &EmConfig::default())?;
    println!(
        "M={} after {} iterations (converged: {}, pruned: {})",
        fit.len(),
        report.iterations,
        report.converged,
        report.pruned
    );
    for c in fit.components() {
        println!("  alpha={:.3} mu={:+.3} kappa={:.2}", c.alpha, c.dist.mu().radians(), c.dist.kappa());
    }
    let trace: Vec<String> = report.nll_trace.iter().map(|v| format!("{v:.3}")).collect();
    println!("NLL trace: {}", trace.join(" > "));
    let modes: Vec<String> = find_modes(&fit).modes.iter().map(|m| format!("{:+.3}", m.radians())).collect();
    println!("modes: {}", modes.join(", "));
    Ok(())
}
