//! Modified Bessel functions of the first kind, `I_ν(x)` for `x ≥ 0`.
//!
//! Small and moderate arguments use the power series
//! `I_ν(x) = Σ_p (x/2)^{2p+ν} / (p! Γ(p+ν+1))`; large arguments use the
//! Hankel asymptotic expansion in log space so that densities built on
//! top of these functions never overflow.

use crate::error::{Error, Result};

/// Argument above which the asymptotic expansion replaces the series (for ν = 0).
pub const SERIES_LIMIT: f64 = 50.0;

const SERIES_MAX_TERMS: usize = 100;

/// `I_ν(x) = exp(x + log_scale) * sum`.
#[derive(Debug, Clone, Copy)]
struct Split {
    x: f64,
    log_scale: f64,
    sum: f64,
}

impl Split {
    fn ln(self) -> f64 {
        self.x + self.log_scale + self.sum.ln()
    }

    fn ln_scaled(self) -> f64 {
        self.log_scale + self.sum.ln()
    }
}

fn series_limit(nu: f64) -> f64 {
    SERIES_LIMIT + 10.0 * nu * nu
}

/// ln Γ(ν + 1) for ν a non-negative integer or half-integer.
pub(crate) fn ln_gamma_shifted(nu: f64) -> f64 {
    let twice = (2.0 * nu).round();
    debug_assert!((twice - 2.0 * nu).abs() < 1e-12 && twice >= 0.0);
    let twice = twice as u64;
    // Γ(ν+1) = ν (ν-1) ... down to Γ(1) = 1 or Γ(1/2) = √π.
    let mut acc = 0.0;
    let mut z = nu;
    while z > 0.75 {
        acc += z.ln();
        z -= 1.0;
    }
    if twice % 2 == 1 {
        // z == 0.5 here: Γ(1.5) = 0.5 √π
        acc += 0.5f64.ln() + 0.5 * std::f64::consts::PI.ln();
    }
    acc
}

fn series(nu: f64, x: f64) -> Split {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let max_terms = SERIES_MAX_TERMS.max(x as usize + 50);
    for p in 1..=max_terms {
        let p = p as f64;
        term *= q / (p * (p + nu));
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    Split {
        x,
        log_scale: nu * (0.5 * x).ln() - ln_gamma_shifted(nu) - x,
        sum,
    }
}

fn asymptotic(nu: f64, x: f64) -> Split {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    Split {
        x,
        log_scale: -0.5 * (2.0 * std::f64::consts::PI * x).ln(),
        sum,
    }
}

fn split(nu: f64, x: f64) -> Split {
    if x > series_limit(nu) {
        asymptotic(nu, x)
    } else {
        series(nu, x)
    }
}

fn check(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!(
            "Bessel argument must be non-negative, got {x}"
        )));
    }
    Ok(())
}

/// Natural log of `I_ν(x)`; `ν` must be a non-negative integer or half-integer.
///
/// Returns `0` for `I_0(0)` and `-∞` for `I_ν(0)`, `ν > 0`.
pub fn log_bessel_i(nu: f64, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    split(nu, x).ln()
}

/// `ln I_ν(x) − x`, free of cancellation for large `x`.
pub fn log_bessel_i_scaled(nu: f64, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    split(nu, x).ln_scaled()
}

/// `ln I_0(x)`, finite for every finite `x ≥ 0`.
pub fn log_bessel_i0(x: f64) -> f64 {
    log_bessel_i(0.0, x)
}

pub fn bessel_i0(x: f64) -> Result<f64> {
    check(x)?;
    if x <= SERIES_LIMIT {
        return Ok(series(0.0, x).sum);
    }
    Ok(log_bessel_i0(x).exp())
}

pub fn bessel_i1(x: f64) -> Result<f64> {
    check(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x <= series_limit(1.0) {
        return Ok(0.5 * x * series(1.0, x).sum);
    }
    Ok(log_bessel_i(1.0, x).exp())
}

/// `A(κ) = I_1(κ) / I_0(κ)`, the mean resultant length of a von Mises
/// distribution with concentration `κ`.
pub fn bessel_ratio_a(kappa: f64) -> Result<f64> {
    check(kappa)?;
    Ok(ratio_unchecked(kappa))
}

pub(crate) fn ratio_unchecked(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return 0.0;
    }
    if kappa.is_infinite() {
        return 1.0;
    }
    let i0 = split(0.0, kappa);
    let i1 = split(1.0, kappa);
    (i1.log_scale - i0.log_scale).exp() * i1.sum / i0.sum
}

/// `A'(κ) = 1 − A(κ)/κ − A(κ)²`.
pub(crate) fn ratio_derivative(kappa: f64, a: f64) -> f64 {
    if kappa == 0.0 {
        0.5
    } else {
        1.0 - a / kappa - a * a
    }
}
