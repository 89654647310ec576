//! Von Mises mixture models: density, EM fitting with density-based
//! initialization, sampling, and mode finding.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circular::{
    fit_vm_from_sums, Angle, DirectionalSums, KappaEstimator, VonMises, UNIFORM_R_BAR,
};
use crate::dbscan::dbscan_circular;
use crate::em::{self, Component, EmOptions, Weighted};
use crate::error::{Error, Result};

pub use crate::em::EmReport;

/// Hard cap on the number of mixture components per fit.
pub const MAX_COMPONENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub alpha: f64,
    pub dist: VonMises,
}

impl Component for VonMises {
    type Point = Angle;

    fn ln_density(&self, x: &Angle) -> f64 {
        self.ln_pdf(*x)
    }

    fn location(&self) -> Vec<f64> {
        self.mu().unit().to_vec()
    }
}

/// A convex combination of von Mises distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct VonMisesMixture {
    components: Vec<MixtureComponent>,
}

const WEIGHT_TOL: f64 = 1e-12;

impl VonMisesMixture {
    /// Validates that weights are non-negative and sum to one (within 1e−12).
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("a mixture needs at least one component"));
        }
        if components.iter().any(|c| !(c.alpha >= 0.0)) {
            return Err(Error::domain("mixture weights must be non-negative"));
        }
        let total: f64 = components.iter().map(|c| c.alpha).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::domain(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(VonMisesMixture { components })
    }

    /// Like [`new`](Self::new) but rescales positive weights to sum to one.
    pub fn normalized(mut components: Vec<MixtureComponent>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.alpha).sum();
        if !(total > 0.0) {
            return Err(Error::domain("mixture weights must have a positive sum"));
        }
        for c in &mut components {
            c.alpha /= total;
        }
        Self::new(components)
    }

    pub fn single(dist: VonMises) -> Self {
        VonMisesMixture {
            components: vec![MixtureComponent { alpha: 1.0, dist }],
        }
    }

    pub fn uniform() -> Self {
        Self::single(VonMises::uniform())
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn ln_pdf(&self, theta: Angle) -> f64 {
        if let [only] = self.components.as_slice() {
            return only.dist.ln_pdf(theta);
        }
        let mut max = f64::NEG_INFINITY;
        let ls: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let l = c.alpha.ln() + c.dist.ln_pdf(theta);
                max = max.max(l);
                l
            })
            .collect();
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + ls.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }

    /// `Σ_m α_m · VM(θ; μ_m, κ_m)`.
    pub fn pdf(&self, theta: Angle) -> f64 {
        match self.components.as_slice() {
            [only] => only.dist.pdf(theta),
            comps => comps.iter().map(|c| c.alpha * c.dist.pdf(theta)).sum(),
        }
    }

    /// Rotates every component mean by `delta`.
    pub fn rotated(&self, delta: f64) -> Self {
        VonMisesMixture {
            components: self
                .components
                .iter()
                .map(|c| MixtureComponent {
                    alpha: c.alpha,
                    dist: VonMises::new_unchecked(c.dist.mu().rotate(delta), c.dist.kappa()),
                })
                .collect(),
        }
    }

    pub(crate) fn to_weighted(&self) -> Vec<Weighted<VonMises>> {
        self.components
            .iter()
            .map(|c| Weighted {
                alpha: c.alpha,
                component: c.dist,
            })
            .collect()
    }

    pub(crate) fn from_weighted(w: Vec<Weighted<VonMises>>) -> Self {
        VonMisesMixture {
            components: w
                .into_iter()
                .map(|w| MixtureComponent {
                    alpha: w.alpha,
                    dist: w.component,
                })
                .collect(),
        }
    }
}

pub fn vmm_pdf(mix: &VonMisesMixture, theta: Angle) -> f64 {
    mix.pdf(theta)
}

/// Settings for [`fit_vmm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Convergence tolerance on the change of component mean directions.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// DBSCAN neighbourhood radius in radians.
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub alpha_floor: f64,
    pub seed: u64,
    /// Starting concentration of every component.
    pub kappa_init: f64,
    pub kappa_estimator: KappaEstimator,
    pub max_components: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            epsilon: 1e-6,
            max_iterations: 100,
            dbscan_eps: 0.5,
            dbscan_min_pts: 5,
            alpha_floor: 1e-4,
            seed: 0,
            kappa_init: 1.0,
            kappa_estimator: KappaEstimator::Exact,
            max_components: MAX_COMPONENTS,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::domain("epsilon must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be at least 1"));
        }
        if !(self.dbscan_eps > 0.0 && self.dbscan_eps <= PI) {
            return Err(Error::domain("dbscan_eps must lie in (0, π]"));
        }
        if self.dbscan_min_pts == 0 {
            return Err(Error::domain("dbscan_min_pts must be at least 1"));
        }
        if !(self.kappa_init >= 0.0) {
            return Err(Error::domain("kappa_init must be non-negative"));
        }
        if self.max_components == 0 {
            return Err(Error::domain("max_components must be at least 1"));
        }
        Ok(())
    }

    fn em_options(&self) -> EmOptions {
        EmOptions {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            alpha_floor: self.alpha_floor,
        }
    }
}

fn non_empty(thetas: &[Angle]) -> Result<()> {
    if thetas.is_empty() {
        return Err(Error::domain("no observations"));
    }
    Ok(())
}

/// E-step: `γ_mn = α_m VM_m(θ_n) / Σ_m' α_m' VM_m'(θ_n)`, one row per component.
pub fn responsibilities(mix: &VonMisesMixture, thetas: &[Angle]) -> Result<Vec<Vec<f64>>> {
    non_empty(thetas)?;
    let mut gammas = Vec::new();
    em::e_step(thetas, &mix.to_weighted(), &mut gammas);
    Ok(gammas)
}

/// Weighted maximum-likelihood von Mises fit: mean of the weighted unit
/// vectors gives the direction, its length over the weight mass gives `R̄`.
pub fn fit_vm_weighted(
    thetas: &[Angle],
    weights: &[f64],
    estimator: KappaEstimator,
) -> Result<VonMises> {
    Ok(fit_vm_from_sums(&DirectionalSums::from_weighted(thetas, weights), estimator)?.dist)
}

/// M-step. Rows of `gammas` with zero mass are dropped and the remaining
/// weights renormalized.
pub fn m_step(
    gammas: &[Vec<f64>],
    thetas: &[Angle],
    estimator: KappaEstimator,
) -> Result<Vec<MixtureComponent>> {
    non_empty(thetas)?;
    if gammas.iter().any(|row| row.len() != thetas.len()) {
        return Err(Error::domain("responsibility rows must match the data length"));
    }
    let next = em::m_step(thetas, gammas, &|pts: &[Angle], w: &[f64]| {
        fit_vm_weighted(pts, w, estimator)
    })?;
    Ok(VonMisesMixture::from_weighted(next).components)
}

/// Cluster centres from circular DBSCAN, largest clusters first when the
/// component cap applies. With no dense cluster, falls back to the single
/// global mean direction.
pub fn init_clusters(thetas: &[Angle], config: &EmConfig) -> Vec<Angle> {
    if thetas.is_empty() {
        return Vec::new();
    }
    let clustering = dbscan_circular(thetas, config.dbscan_eps, config.dbscan_min_pts);
    if clustering.n_clusters == 0 {
        return vec![DirectionalSums::from_angles(thetas).mean_direction()];
    }
    let centers = clustering.centers(thetas);
    if centers.len() <= config.max_components {
        return centers;
    }
    let sizes = clustering.sizes();
    let mut order: Vec<usize> = (0..centers.len()).collect();
    // stable: ties keep discovery order
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
    order.truncate(config.max_components);
    order.sort_unstable();
    order.into_iter().map(|i| centers[i]).collect()
}

fn distinct_count(thetas: &[Angle]) -> usize {
    let mut v: Vec<f64> = thetas.iter().map(|t| t.radians()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Fits a mixture with DBSCAN-seeded means, equal weights and
/// `config.kappa_init` concentrations.
pub fn fit_vmm(thetas: &[Angle], config: &EmConfig) -> Result<(VonMisesMixture, EmReport)> {
    config.validate()?;
    non_empty(thetas)?;
    let means = init_clusters(thetas, config);
    fit_vmm_from_means(thetas, &means, config)
}

/// EM from the given initial means (equal weights, `kappa_init`).
pub fn fit_vmm_from_means(
    thetas: &[Angle],
    means: &[Angle],
    config: &EmConfig,
) -> Result<(VonMisesMixture, EmReport)> {
    config.validate()?;
    non_empty(thetas)?;
    if means.is_empty() {
        return Err(Error::domain("at least one initial mean is required"));
    }
    let m = means.len().min(distinct_count(thetas)).min(config.max_components);
    let alpha = 1.0 / m as f64;
    let init = means[..m]
        .iter()
        .map(|&mu| MixtureComponent {
            alpha,
            dist: VonMises::new_unchecked(mu, config.kappa_init),
        })
        .collect();
    fit_vmm_warm(thetas, &VonMisesMixture { components: init }, config)
}

/// EM warm-started from a complete set of mixture parameters.
pub fn fit_vmm_warm(
    thetas: &[Angle],
    start: &VonMisesMixture,
    config: &EmConfig,
) -> Result<(VonMisesMixture, EmReport)> {
    config.validate()?;
    non_empty(thetas)?;
    let estimator = config.kappa_estimator;
    let (mix, report) = em::run_em(
        thetas,
        start.to_weighted(),
        &config.em_options(),
        |pts: &[Angle], w: &[f64]| fit_vm_weighted(pts, w, estimator),
    )?;
    Ok((VonMisesMixture::from_weighted(mix), report))
}

/// One draw from `VM(μ, κ)` by the Best–Fisher wrapped-Cauchy envelope.
pub fn sample_vm<R: Rng + ?Sized>(dist: &VonMises, rng: &mut R) -> Angle {
    let kappa = dist.kappa();
    if kappa < 1e-8 {
        return Angle::wrapped(rng.random::<f64>() * TAU - PI);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let dev = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 > 0.5 { dev } else { -dev };
            return dist.mu().rotate(signed);
        }
    }
}

/// `n` i.i.d. draws from the mixture; deterministic for a given seed.
pub fn sample(mix: &VonMisesMixture, n: usize, seed: u64) -> Vec<Angle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(mix, n, &mut rng)
}

pub fn sample_with<R: Rng + ?Sized>(mix: &VonMisesMixture, n: usize, rng: &mut R) -> Vec<Angle> {
    let comps = mix.components();
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = comps.len() - 1;
            for (i, c) in comps.iter().enumerate() {
                acc += c.alpha;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            sample_vm(&comps[pick].dist, rng)
        })
        .collect()
}

/// Local maxima of a mixture density.
#[derive(Debug, Clone, PartialEq)]
pub struct Modes {
    /// Sorted ascending, deduplicated within 1e−6.
    pub modes: Vec<Angle>,
    /// The density is constant: there is no mode.
    pub uniform: bool,
}

const MODE_GRID: usize = 3600;
const MODE_TOL: f64 = 1e-8;
const MODE_DEDUP: f64 = 1e-6;

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > MODE_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Scans the density on a 3600-point grid, refines each bracketed local
/// maximum by golden-section search, and returns the sorted modes.
pub fn find_modes(mix: &VonMisesMixture) -> Modes {
    let step = TAU / MODE_GRID as f64;
    let grid: Vec<f64> = (0..MODE_GRID).map(|i| -PI + i as f64 * step).collect();
    let ln: Vec<f64> = grid.iter().map(|&t| mix.ln_pdf(Angle::wrapped(t))).collect();
    let (lo, hi) = ln.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
        (lo.min(l), hi.max(l))
    });
    if hi.exp() - lo.exp() < 1e-12 {
        return Modes {
            modes: Vec::new(),
            uniform: true,
        };
    }
    let mut modes: Vec<Angle> = Vec::new();
    for i in 0..MODE_GRID {
        let prev = ln[(i + MODE_GRID - 1) % MODE_GRID];
        let next = ln[(i + 1) % MODE_GRID];
        if ln[i] > prev && ln[i] >= next {
            let t = golden_max(
                |x| mix.ln_pdf(Angle::wrapped(x)),
                grid[i] - step,
                grid[i] + step,
            );
            let a = Angle::wrapped(t);
            if modes.iter().all(|m| m.distance(a) > MODE_DEDUP) {
                modes.push(a);
            }
        }
    }
    modes.sort_by(|a, b| a.radians().total_cmp(&b.radians()));
    Modes {
        modes,
        uniform: false,
    }
}

/// `true` when every component is uniform or the data had zero resultant.
pub fn is_uniform(mix: &VonMisesMixture) -> bool {
    mix.components().iter().all(|c| c.dist.kappa() < UNIFORM_R_BAR)
}
