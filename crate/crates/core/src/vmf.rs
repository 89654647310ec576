//! Von Mises–Fisher distributions on the unit sphere in `D ≥ 2` dimensions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::bessel;
use crate::circular::{Angle, FitFlag, KAPPA_MAX, UNIFORM_R_BAR};
use crate::em::{self, Component, EmOptions, EmReport, Weighted};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;

/// A direction in `D` dimensions, `‖x‖ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `v`. Fails for `D < 2`, non-finite entries or a zero vector.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::domain("unit vectors need at least 2 dimensions"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("unit vector components must be finite"));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::domain("cannot normalize the zero vector"));
        }
        Ok(UnitVector(v.into_iter().map(|x| x / norm).collect()))
    }

    /// Accepts `v` only if it already has unit norm (within 1e−12).
    pub fn exact(v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if v.len() < 2 || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("not a unit vector (norm {norm})")));
        }
        Ok(UnitVector(v))
    }

    /// `(cos θ, sin θ)`.
    pub fn from_angle(theta: Angle) -> Self {
        UnitVector(theta.unit().to_vec())
    }

    pub fn basis(dim: usize, axis: usize) -> Result<Self> {
        if dim < 2 || axis >= dim {
            return Err(Error::domain("basis axis out of range"));
        }
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        Ok(UnitVector(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn to_angle(&self) -> Option<Angle> {
        (self.dim() == 2).then(|| Angle::from_xy(self.0[0], self.0[1]))
    }
}

/// `ln` of the surface area of the unit sphere in `dim` dimensions.
fn ln_sphere_area(dim: usize) -> f64 {
    let half = dim as f64 / 2.0;
    (2.0f64).ln() + half * PI.ln() - bessel::ln_gamma_shifted(half - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VonMisesFisher {
    mu: UnitVector,
    kappa: f64,
    ln_norm: f64,
}

impl VonMisesFisher {
    pub fn new(mu: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::domain(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        let dim = mu.dim();
        let nu = dim as f64 / 2.0 - 1.0;
        // ln C_D(κ) − κ, so the density is exp(ln_norm + κ(μ·x − 1))
        let ln_norm = if kappa == 0.0 {
            -ln_sphere_area(dim)
        } else {
            nu * kappa.ln()
                - (dim as f64 / 2.0) * (2.0 * PI).ln()
                - bessel::log_bessel_i_scaled(nu, kappa)
        };
        Ok(VonMisesFisher { mu, kappa, ln_norm })
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Self::new(UnitVector::basis(dim, 0)?, 0.0)
    }

    pub fn mu(&self) -> &UnitVector {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    fn check_dim(&self, x: &UnitVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::domain(format!(
                "dimension mismatch: distribution is {}-D, point is {}-D",
                self.dim(),
                x.dim()
            )));
        }
        Ok(())
    }

    fn ln_pdf_unchecked(&self, x: &UnitVector) -> f64 {
        self.ln_norm + self.kappa * (self.mu.dot(x) - 1.0)
    }

    pub fn ln_pdf(&self, x: &UnitVector) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.ln_pdf_unchecked(x))
    }

    pub fn pdf(&self, x: &UnitVector) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }
}

pub fn vmf_pdf(dist: &VonMisesFisher, x: &UnitVector) -> Result<f64> {
    dist.pdf(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmfFit {
    pub dist: VonMisesFisher,
    pub r_bar: f64,
    pub flag: FitFlag,
}

fn common_dim(xs: &[UnitVector]) -> Result<usize> {
    let dim = xs
        .first()
        .ok_or_else(|| Error::domain("cannot fit a vMF distribution to no data"))?
        .dim();
    if xs.iter().any(|x| x.dim() != dim) {
        return Err(Error::domain("all unit vectors must share one dimension"));
    }
    Ok(dim)
}

/// Mean-direction fit with `κ ≈ R̄(D − R̄²)/(1 − R̄²)`.
pub fn fit_vmf(xs: &[UnitVector]) -> Result<VmfFit> {
    fit_vmf_weighted(xs, &vec![1.0; xs.len()])
}

pub fn fit_vmf_weighted(xs: &[UnitVector], weights: &[f64]) -> Result<VmfFit> {
    let dim = common_dim(xs)?;
    if weights.len() != xs.len() {
        return Err(Error::domain("one weight per point is required"));
    }
    let mut sum = vec![0.0; dim];
    let mut mass = 0.0;
    for (x, &w) in xs.iter().zip(weights) {
        mass += w;
        for (s, c) in sum.iter_mut().zip(x.as_slice()) {
            *s += w * c;
        }
    }
    if !(mass > 0.0) {
        return Err(Error::domain("weights must have a positive sum"));
    }
    let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r_bar = (norm / mass).min(1.0);
    if r_bar < UNIFORM_R_BAR {
        return Ok(VmfFit {
            dist: VonMisesFisher::uniform(dim)?,
            r_bar,
            flag: FitFlag::Uniform,
        });
    }
    let mu = UnitVector(sum.into_iter().map(|x| x / norm).collect());
    let d = dim as f64;
    let r2 = r_bar * r_bar;
    let kappa = r_bar * (d - r2) / (1.0 - r2);
    let (kappa, flag) = if !(kappa < KAPPA_MAX) {
        (KAPPA_MAX, FitFlag::Saturated)
    } else {
        (kappa, FitFlag::Regular)
    };
    Ok(VmfFit {
        dist: VonMisesFisher::new(mu, kappa)?,
        r_bar,
        flag,
    })
}

fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn uniform_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v = standard_normal_vec(dim, rng);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Wood's rejection sampler for the component `w = μ·x`.
fn sample_w<R: Rng + ?Sized>(kappa: f64, dim: usize, beta: &Beta<f64>, rng: &mut R) -> f64 {
    let m1 = dim as f64 - 1.0;
    let b = m1 / (2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + m1 * (1.0 - x0 * x0).ln();
    loop {
        let z = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + m1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            return w;
        }
    }
}

/// `n` i.i.d. draws; deterministic for a given seed.
pub fn sample_vmf(dist: &VonMisesFisher, n: usize, seed: u64) -> Vec<UnitVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_vmf_with(dist, n, &mut rng)
}

pub fn sample_vmf_with<R: Rng + ?Sized>(
    dist: &VonMisesFisher,
    n: usize,
    rng: &mut R,
) -> Vec<UnitVector> {
    let dim = dist.dim();
    if dist.kappa == 0.0 {
        return (0..n).map(|_| UnitVector(uniform_sphere(dim, rng))).collect();
    }
    let half = (dim as f64 - 1.0) / 2.0;
    let beta = Beta::new(half, half).expect("valid beta parameters");
    // Householder reflection taking the last axis onto μ
    let mu = dist.mu.as_slice();
    let mut h: Vec<f64> = mu.iter().map(|x| -x).collect();
    h[dim - 1] += 1.0;
    let h_norm2: f64 = h.iter().map(|x| x * x).sum();
    (0..n)
        .map(|_| {
            let w = sample_w(dist.kappa, dim, &beta, rng);
            let v = uniform_sphere(dim - 1, rng);
            let s = (1.0 - w * w).max(0.0).sqrt();
            let mut x: Vec<f64> = v.iter().map(|c| s * c).collect();
            x.push(w);
            if h_norm2 > 1e-24 {
                let proj = 2.0 * x.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>() / h_norm2;
                for (xi, hi) in x.iter_mut().zip(&h) {
                    *xi -= proj * hi;
                }
            }
            UnitVector::new(x).expect("sample is a non-zero vector")
        })
        .collect()
}

impl Component for VonMisesFisher {
    type Point = UnitVector;

    fn ln_density(&self, x: &UnitVector) -> f64 {
        self.ln_pdf_unchecked(x)
    }

    fn location(&self) -> Vec<f64> {
        self.mu.0.clone()
    }
}

/// Finite mixture of vMF distributions of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfMixture {
    pub components: Vec<(f64, VonMisesFisher)>,
}

impl VmfMixture {
    pub fn pdf(&self, x: &UnitVector) -> Result<f64> {
        let mut total = 0.0;
        for (alpha, c) in &self.components {
            total += alpha * c.pdf(x)?;
        }
        Ok(total)
    }
}

/// EM for vMF mixtures from initial mean directions, equal weights and
/// concentration `kappa_init`.
pub fn fit_vmf_mixture(
    xs: &[UnitVector],
    means: &[UnitVector],
    kappa_init: f64,
    options: &EmOptions,
) -> Result<(VmfMixture, EmReport)> {
    let dim = common_dim(xs)?;
    if means.is_empty() || means.iter().any(|m| m.dim() != dim) {
        return Err(Error::domain("initial means must be non-empty and match the data dimension"));
    }
    let alpha = 1.0 / means.len() as f64;
    let init = means
        .iter()
        .map(|m| {
            Ok(Weighted {
                alpha,
                component: VonMisesFisher::new(m.clone(), kappa_init)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mix, report) = em::run_em(xs, init, options, |pts: &[UnitVector], w: &[f64]| {
        Ok(fit_vmf_weighted(pts, w)?.dist)
    })?;
    Ok((
        VmfMixture {
            components: mix.into_iter().map(|w| (w.alpha, w.component)).collect(),
        },
        report,
    ))
}
