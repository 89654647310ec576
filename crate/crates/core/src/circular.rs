//! Angles, circular summary statistics, and the unimodal von Mises model.

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::bessel;
use crate::error::{Error, Result};

/// Largest concentration ever reported. Data more concentrated than this
/// is treated as a point mass and flagged as saturated.
pub const KAPPA_MAX: f64 = 1e6;

/// Mean resultant lengths below this are treated as exactly zero.
pub const UNIFORM_R_BAR: f64 = 1e-12;

/// `ln(2π)`
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Switch point of the two-branch κ approximation. The polynomial branch
/// and `0.5 / (1 − R̄)` intersect here, so the piecewise rule is continuous
/// and monotone.
pub const TWO_BRANCH_SWITCH: f64 = 0.780_486_180_700_853_4;

/// A direction in radians, always in the canonical range `(−π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
#[repr(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps `theta` into `(−π, π]`; fails on NaN or infinities.
    pub fn new(theta: f64) -> Result<Angle> {
        wrap(theta)
    }

    /// Wraps a value already known to be finite.
    pub(crate) fn wrapped(theta: f64) -> Angle {
        debug_assert!(theta.is_finite());
        if theta > -PI && theta <= PI {
            return Angle(theta);
        }
        let r = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        Angle(if r > PI { r - TAU } else { r })
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Unit vector `(cos θ, sin θ)`.
    pub fn unit(self) -> [f64; 2] {
        [self.0.cos(), self.0.sin()]
    }

    /// Rotates by `delta` radians.
    pub fn rotate(self, delta: f64) -> Angle {
        Angle::wrapped(self.0 + delta)
    }

    /// Signed shortest rotation from `other` to `self`, in `(−π, π]`.
    pub fn diff(self, other: Angle) -> Angle {
        Angle::wrapped(self.0 - other.0)
    }

    /// Geodesic distance on the circle, in `[0, π]`.
    pub fn distance(self, other: Angle) -> f64 {
        self.diff(other).0.abs()
    }

    /// Direction of the vector `(x, y)`; `atan2` never returns −π for
    /// finite input except at `(−x, −0.0)`, which is wrapped to +π.
    pub fn from_xy(x: f64, y: f64) -> Angle {
        Angle::wrapped(y.atan2(x))
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Canonicalizes `theta` into `(−π, π]`; `−π` maps to `+π`.
pub fn wrap(theta: f64) -> Result<Angle> {
    if !theta.is_finite() {
        return Err(Error::domain(format!("angle must be finite, got {theta}")));
    }
    Ok(Angle::wrapped(theta))
}

/// Wraps a slice of raw radians.
pub fn angles(raw: &[f64]) -> Result<Vec<Angle>> {
    raw.iter().map(|&t| wrap(t)).collect()
}

/// Weighted sums of unit vectors: the sufficient statistics of the von
/// Mises family. Unweighted data has weight 1 per observation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DirectionalSums {
    pub weight: f64,
    pub sum_cos: f64,
    pub sum_sin: f64,
}

impl DirectionalSums {
    pub fn from_angles(thetas: &[Angle]) -> Self {
        let mut s = Self::default();
        for &t in thetas {
            s.push(t);
        }
        s
    }

    pub fn from_weighted(thetas: &[Angle], weights: &[f64]) -> Self {
        debug_assert_eq!(thetas.len(), weights.len());
        let mut s = Self::default();
        for (&t, &w) in thetas.iter().zip(weights) {
            let [c, si] = t.unit();
            s.weight += w;
            s.sum_cos += w * c;
            s.sum_sin += w * si;
        }
        s
    }

    pub fn push(&mut self, theta: Angle) {
        let [c, s] = theta.unit();
        self.weight += 1.0;
        self.sum_cos += c;
        self.sum_sin += s;
    }

    pub fn merge(&mut self, other: &DirectionalSums) {
        self.weight += other.weight;
        self.sum_cos += other.sum_cos;
        self.sum_sin += other.sum_sin;
    }

    /// Direction of the resultant vector.
    pub fn mean_direction(&self) -> Angle {
        Angle::from_xy(self.sum_cos, self.sum_sin)
    }

    /// Resultant length divided by total weight, clamped into `[0, 1]`.
    pub fn mean_resultant_length(&self) -> f64 {
        if self.weight <= 0.0 {
            return 0.0;
        }
        (self.sum_cos.hypot(self.sum_sin) / self.weight).clamp(0.0, 1.0)
    }
}

/// First-order circular summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularStats {
    pub n: usize,
    /// mean cosine
    pub c_bar: f64,
    /// mean sine
    pub s_bar: f64,
    pub mean_dir: Angle,
    /// mean resultant length, in `[0, 1]`
    pub r_bar: f64,
    /// circular variance `1 − r_bar`
    pub variance: f64,
}

impl CircularStats {
    pub fn from_sums(sums: &DirectionalSums) -> Result<Self> {
        if sums.weight <= 0.0 {
            return Err(Error::domain("circular statistics of an empty sample"));
        }
        let c_bar = sums.sum_cos / sums.weight;
        let s_bar = sums.sum_sin / sums.weight;
        let r_bar = c_bar.hypot(s_bar).min(1.0);
        Ok(CircularStats {
            n: sums.weight.round() as usize,
            c_bar,
            s_bar,
            mean_dir: Angle::from_xy(c_bar, s_bar),
            r_bar,
            variance: 1.0 - r_bar,
        })
    }
}

/// Mean direction, mean resultant length and circular variance of `thetas`.
pub fn circular_stats(thetas: &[Angle]) -> Result<CircularStats> {
    if thetas.is_empty() {
        return Err(Error::domain("circular statistics of an empty sample"));
    }
    CircularStats::from_sums(&DirectionalSums::from_angles(thetas))
}

/// How the concentration is recovered from a mean resultant length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaEstimator {
    /// Solve `A(κ) = R̄` to machine precision (the exact likelihood maximizer).
    #[default]
    Exact,
    /// Closed-form two-branch approximation of `A⁻¹`.
    TwoBranch,
}

impl KappaEstimator {
    pub fn estimate(self, r_bar: f64) -> Result<KappaEstimate> {
        match self {
            KappaEstimator::Exact => inverse_bessel_ratio_exact(r_bar),
            KappaEstimator::TwoBranch => inverse_bessel_ratio(r_bar),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaEstimate {
    pub kappa: f64,
    /// `true` when the estimate hit [`KAPPA_MAX`].
    pub saturated: bool,
}

fn check_r_bar(r_bar: f64) -> Result<()> {
    if r_bar.is_nan() || r_bar < 0.0 {
        return Err(Error::domain(format!(
            "mean resultant length must be in [0, 1), got {r_bar}"
        )));
    }
    Ok(())
}

fn saturated() -> KappaEstimate {
    KappaEstimate {
        kappa: KAPPA_MAX,
        saturated: true,
    }
}

fn two_branch(r: f64) -> f64 {
    if r < TWO_BRANCH_SWITCH {
        let r2 = r * r;
        r * (2.0 + r2 + 5.0 / 6.0 * r2 * r2)
    } else {
        0.5 / (1.0 - r)
    }
}

/// Two-branch approximation of `A⁻¹(R̄)`:
/// `2R̄ + R̄³ + (5/6)R̄⁵` for small `R̄`, `0.5 / (1 − R̄)` otherwise.
pub fn inverse_bessel_ratio(r_bar: f64) -> Result<KappaEstimate> {
    check_r_bar(r_bar)?;
    if r_bar >= 1.0 {
        return Ok(saturated());
    }
    let kappa = two_branch(r_bar);
    if kappa >= KAPPA_MAX {
        return Ok(saturated());
    }
    Ok(KappaEstimate {
        kappa,
        saturated: false,
    })
}

/// `A⁻¹(R̄)` solved by safeguarded Newton iteration, seeded with the
/// two-branch approximation.
pub fn inverse_bessel_ratio_exact(r_bar: f64) -> Result<KappaEstimate> {
    check_r_bar(r_bar)?;
    if r_bar == 0.0 {
        return Ok(KappaEstimate {
            kappa: 0.0,
            saturated: false,
        });
    }
    if r_bar >= bessel::ratio_unchecked(KAPPA_MAX) {
        return Ok(saturated());
    }
    let (mut lo, mut hi) = (0.0f64, KAPPA_MAX);
    let mut k = two_branch(r_bar).clamp(f64::MIN_POSITIVE, KAPPA_MAX);
    for _ in 0..200 {
        let a = bessel::ratio_unchecked(k);
        let f = a - r_bar;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let mut next = k - f / bessel::ratio_derivative(k, a);
        if !(next > lo && next < hi) {
            next = if lo > 0.0 && hi > 4.0 * lo {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
        }
        let step = (next - k).abs();
        k = next;
        if step <= 1e-15 * k {
            break;
        }
    }
    Ok(KappaEstimate {
        kappa: k,
        saturated: false,
    })
}

/// The von Mises distribution `VM(μ, κ)` on the circle.
#[derive(Debug, Clone, Copy)]
pub struct VonMises {
    mu: Angle,
    kappa: f64,
    // −ln 2π − (ln I0(κ) − κ)
    log_norm_scaled: f64,
}

impl PartialEq for VonMises {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu && self.kappa == other.kappa
    }
}

impl VonMises {
    pub fn new(mu: Angle, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || kappa.is_infinite() {
            return Err(Error::domain(format!(
                "concentration must be finite and non-negative, got {kappa}"
            )));
        }
        Ok(Self::new_unchecked(mu, kappa))
    }

    pub(crate) fn new_unchecked(mu: Angle, kappa: f64) -> Self {
        VonMises {
            mu,
            kappa,
            log_norm_scaled: -LN_2PI - log_i0_scaled(kappa),
        }
    }

    /// The uniform circular distribution (κ = 0).
    pub fn uniform() -> Self {
        Self::new_unchecked(Angle::ZERO, 0.0)
    }

    #[inline]
    pub fn mu(&self) -> Angle {
        self.mu
    }

    #[inline]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn ln_pdf(&self, theta: Angle) -> f64 {
        // κ(cos d − 1) = −2κ sin²(d/2), exact near the mode
        let half = 0.5 * (theta.0 - self.mu.0);
        let s = half.sin();
        self.log_norm_scaled - 2.0 * self.kappa * s * s
    }

    pub fn pdf(&self, theta: Angle) -> f64 {
        self.ln_pdf(theta).exp()
    }

    /// Log-likelihood computed from the sufficient statistics.
    pub fn log_likelihood_from_sums(&self, sums: &DirectionalSums) -> f64 {
        let [c, s] = self.mu.unit();
        let projected = sums.sum_cos * c + sums.sum_sin * s;
        sums.weight * self.log_norm_scaled + self.kappa * (projected - sums.weight)
    }

    /// `−N ln 2π − N ln I0(κ) + κ N R̄ cos(θ̄ − μ)`.
    pub fn log_likelihood(&self, thetas: &[Angle]) -> Result<f64> {
        if thetas.is_empty() {
            return Err(Error::domain("log-likelihood of an empty sample"));
        }
        Ok(self.log_likelihood_from_sums(&DirectionalSums::from_angles(thetas)))
    }
}

/// `ln I0(κ) − κ`, stable for very large κ.
fn log_i0_scaled(kappa: f64) -> f64 {
    bessel::log_bessel_i_scaled(0.0, kappa)
}

pub fn vm_pdf(dist: &VonMises, theta: Angle) -> f64 {
    dist.pdf(theta)
}

pub fn vm_log_likelihood(dist: &VonMises, thetas: &[Angle]) -> Result<f64> {
    dist.log_likelihood(thetas)
}

/// Outcome classification of a maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFlag {
    Regular,
    /// κ clamped at [`KAPPA_MAX`]; the data is (numerically) a point mass.
    Saturated,
    /// Zero resultant: no preferred direction, κ = 0 and μ = 0.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesFit {
    pub dist: VonMises,
    pub stats: CircularStats,
    pub flag: FitFlag,
}

/// Maximum-likelihood von Mises fit: `μ = θ̄`, `κ = A⁻¹(R̄)`.
pub fn fit_vm(thetas: &[Angle]) -> Result<VonMisesFit> {
    fit_vm_with(thetas, KappaEstimator::Exact)
}

pub fn fit_vm_with(thetas: &[Angle], estimator: KappaEstimator) -> Result<VonMisesFit> {
    if thetas.is_empty() {
        return Err(Error::domain("cannot fit a von Mises distribution to no data"));
    }
    fit_vm_from_sums(&DirectionalSums::from_angles(thetas), estimator)
}

pub fn fit_vm_from_sums(sums: &DirectionalSums, estimator: KappaEstimator) -> Result<VonMisesFit> {
    let stats = CircularStats::from_sums(sums)?;
    if stats.r_bar < UNIFORM_R_BAR {
        return Ok(VonMisesFit {
            dist: VonMises::uniform(),
            stats,
            flag: FitFlag::Uniform,
        });
    }
    let est = estimator.estimate(stats.r_bar)?;
    Ok(VonMisesFit {
        dist: VonMises::new_unchecked(stats.mean_dir, est.kappa),
        stats,
        flag: if est.saturated {
            FitFlag::Saturated
        } else {
            FitFlag::Regular
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn a(x: f64) -> Angle {
        wrap(x).unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap(0.0).unwrap().radians(), 0.0);
        assert!((wrap(3.0 * PI).unwrap().radians() - PI).abs() < 1e-15);
        assert_eq!(wrap(-PI).unwrap().radians(), PI);
        assert_eq!(wrap(PI).unwrap().radians(), PI);
        assert!(wrap(f64::NAN).is_err());
        assert!(wrap(f64::INFINITY).is_err());
        let t = wrap(-1e-300).unwrap().radians();
        assert!(t > -PI && t <= PI);
    }

    #[test]
    fn two_branch_examples() {
        assert_eq!(inverse_bessel_ratio(0.0).unwrap().kappa, 0.0);
        assert!((inverse_bessel_ratio(0.3).unwrap().kappa - 0.629025).abs() < 1e-12);
        assert!((inverse_bessel_ratio(0.8).unwrap().kappa - 2.5).abs() < 1e-12);
        assert!(inverse_bessel_ratio(1.0).unwrap().saturated);
        assert!(inverse_bessel_ratio(-0.1).is_err());
    }

    #[test]
    fn two_branch_is_continuous_at_switch() {
        let r = TWO_BRANCH_SWITCH;
        let poly = r * (2.0 + r * r + 5.0 / 6.0 * r.powi(4));
        assert!((poly - 0.5 / (1.0 - r)).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..1000 {
            let k = inverse_bessel_ratio(i as f64 / 1000.0).unwrap().kappa;
            assert!(k >= prev);
            prev = k;
        }
    }

    #[test]
    fn exact_inverse_round_trips() {
        for &k in &[1e-4, 0.05, 0.7, 2.0, 3.0, 17.0, 150.0, 4000.0, 2e5] {
            let r = bessel::ratio_unchecked(k);
            let est = inverse_bessel_ratio_exact(r).unwrap();
            assert!(!est.saturated);
            assert!((est.kappa - k).abs() < 1e-7 * k, "k={k} got {}", est.kappa);
        }
        assert!(inverse_bessel_ratio_exact(1.0).unwrap().saturated);
        assert!(inverse_bessel_ratio_exact(1.0 - 1e-9).unwrap().saturated);
    }

    #[test]
    fn stats_examples() {
        let s = circular_stats(&[a(0.0), a(FRAC_PI_2)]).unwrap();
        assert!((s.mean_dir.radians() - PI / 4.0).abs() < 1e-15);
        assert!((s.r_bar - 0.5f64.sqrt()).abs() < 1e-15);

        let s = circular_stats(&[a(PI - 0.1), a(-PI + 0.1)]).unwrap();
        assert!((s.mean_dir.radians() - PI).abs() < 1e-12);
        assert!((s.r_bar - 0.1f64.cos()).abs() < 1e-12);

        let s = circular_stats(&[a(0.0), a(FRAC_PI_2), a(PI), a(-FRAC_PI_2)]).unwrap();
        assert!(s.r_bar < 1e-15);
        assert!((s.variance - 1.0).abs() < 1e-15);

        assert!(circular_stats(&[]).is_err());
    }

    #[test]
    fn pdf_examples() {
        let u = VonMises::uniform();
        assert!((u.pdf(a(1.3)) - 1.0 / TAU).abs() < 1e-15);
        let d = VonMises::new(a(0.4), 2.0).unwrap();
        let i0 = 2.279_585_302_336_067_3;
        assert!((d.pdf(a(0.4)) - 2f64.exp() / (TAU * i0)).abs() < 1e-12);
        assert!((d.pdf(a(0.4 + PI)) - (-2f64).exp() / (TAU * i0)).abs() < 1e-13);
        assert!((d.pdf(a(0.4)) - 0.51589).abs() < 1e-5);
        assert!(VonMises::new(a(0.0), -1.0).is_err());
    }

    #[test]
    fn log_likelihood_examples() {
        let data: Vec<Angle> = (0..10).map(|i| a(i as f64)).collect();
        let ll = VonMises::uniform().log_likelihood(&data).unwrap();
        assert!((ll + 10.0 * LN_2PI).abs() < 1e-12);

        let d = VonMises::new(a(0.0), 2.0).unwrap();
        let ll = d.log_likelihood(&[a(0.0)]).unwrap();
        assert!((ll - d.pdf(a(0.0)).ln()).abs() < 1e-12);
        assert!((ll + 0.661_870_607_892_301_8).abs() < 1e-12);
        assert!(d.log_likelihood(&[]).is_err());
    }

    #[test]
    fn fit_degenerate_cases() {
        let same = vec![a(1.0); 1000];
        let f = fit_vm(&same).unwrap();
        assert_eq!(f.flag, FitFlag::Saturated);
        assert_eq!(f.dist.kappa(), KAPPA_MAX);
        assert!((f.dist.mu().radians() - 1.0).abs() < 1e-12);

        let bal = [a(0.0), a(FRAC_PI_2), a(PI), a(-FRAC_PI_2)];
        let f = fit_vm(&bal).unwrap();
        assert_eq!(f.flag, FitFlag::Uniform);
        assert_eq!(f.dist.kappa(), 0.0);
        assert_eq!(f.dist.mu(), Angle::ZERO);

        assert!(fit_vm(&[]).is_err());
    }

    #[test]
    fn saturated_pdf_is_finite() {
        let d = VonMises::new(a(0.5), KAPPA_MAX).unwrap();
        let peak = d.pdf(a(0.5));
        assert!(peak.is_finite() && peak > 1e2);
        assert_eq!(d.pdf(a(-2.0)), 0.0);
        assert!(d.ln_pdf(a(-2.0)).is_finite());
    }
}
