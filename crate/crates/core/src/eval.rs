//! Model-quality metrics: held-out negative log-likelihood, average
//! probability density, squared error to the closest mode, and KL divergence.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circular::Angle;
use crate::dgm::{fit_cell, FitMode};
use crate::error::{Error, Result};
use crate::vmm::{find_modes, EmConfig, VonMisesMixture};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_KL_GRID: usize = 7200;

fn non_empty(thetas: &[Angle]) -> Result<()> {
    if thetas.is_empty() {
        return Err(Error::domain("metric over an empty sample"));
    }
    Ok(())
}

/// Expected negative log-likelihood `−(1/N) Σ ln p(θᵢ)`.
pub fn enll(mix: &VonMisesMixture, thetas: &[Angle]) -> Result<f64> {
    non_empty(thetas)?;
    Ok(-thetas.iter().map(|&t| mix.ln_pdf(t)).sum::<f64>() / thetas.len() as f64)
}

/// Mean density of the sample under the model.
pub fn average_density(mix: &VonMisesMixture, thetas: &[Angle]) -> Result<f64> {
    non_empty(thetas)?;
    Ok(thetas.iter().map(|&t| mix.pdf(t)).sum::<f64>() / thetas.len() as f64)
}

/// Mean squared geodesic distance to the nearest of `modes`.
pub fn mse_to_modes(modes: &[Angle], thetas: &[Angle]) -> Result<f64> {
    non_empty(thetas)?;
    if modes.is_empty() {
        return Err(Error::domain("no modes to measure against"));
    }
    Ok(thetas
        .iter()
        .map(|t| {
            let d = modes
                .iter()
                .map(|m| t.distance(*m))
                .fold(f64::INFINITY, f64::min);
            d * d
        })
        .sum::<f64>()
        / thetas.len() as f64)
}

/// Squared error to the closest mode of the mixture density.
pub fn mse_closest_mode(mix: &VonMisesMixture, thetas: &[Angle]) -> Result<f64> {
    let modes = find_modes(mix);
    if modes.uniform {
        return Err(Error::domain("uniform density has no modes"));
    }
    mse_to_modes(&modes.modes, thetas)
}

/// `∫ p ln(p/q)` by the trapezoid rule on `n_grid` points over one period.
pub fn kl_divergence(p: &VonMisesMixture, q: &VonMisesMixture, n_grid: usize) -> f64 {
    let n = n_grid.max(2);
    let h = TAU / n as f64;
    // periodic integrand: the trapezoid rule reduces to a plain sum
    (0..n)
        .map(|i| {
            let t = Angle::new(-PI + (i as f64 + 0.5) * h).expect("finite");
            let lp = p.ln_pdf(t);
            lp.exp() * (lp - q.ln_pdf(t))
        })
        .sum::<f64>()
        * h
}

/// Shuffles `0..n` with `seed` and cuts it into `k` contiguous folds.
pub fn folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::domain("cross-validation needs at least 2 folds"));
    }
    if n < k {
        return Err(Error::domain(format!("{n} observations cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k).map(|f| idx[f * n / k..(f + 1) * n / k].to_vec()).collect())
}

/// Held-out metrics of one cross-validated model.
#[derive(Debug, Clone, PartialEq)]
pub struct CvMetrics {
    /// Held-out ENLL pooled over all test points.
    pub enll: f64,
    /// Mean over folds of the fold's average held-out density.
    pub apd: f64,
    /// Held-out squared error to the closest mode, pooled over test points.
    pub mse_closest_mode: f64,
    pub n: usize,
    /// Wall-clock fit time per fold, milliseconds.
    pub fit_ms: Vec<f64>,
}

/// k-fold cross-validation with a caller-supplied fitter.
pub fn cross_validate<F>(thetas: &[Angle], k: usize, seed: u64, fitter: F) -> Result<CvMetrics>
where
    F: Fn(&[Angle]) -> Result<VonMisesMixture> + Sync,
{
    let parts = folds(thetas.len(), k, seed)?;
    let per_fold = parts
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let train: Vec<Angle> = parts
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, p)| p.iter().map(|&i| thetas[i]))
                .collect();
            let test: Vec<Angle> = test_idx.iter().map(|&i| thetas[i]).collect();
            let start = Instant::now();
            let model = fitter(&train)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            Ok((
                test.len() as f64,
                enll(&model, &test)?,
                average_density(&model, &test)?,
                mse_closest_mode(&model, &test)?,
                ms,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = thetas.len() as f64;
    Ok(CvMetrics {
        enll: per_fold.iter().map(|f| f.0 * f.1).sum::<f64>() / n,
        apd: per_fold.iter().map(|f| f.2).sum::<f64>() / k as f64,
        mse_closest_mode: per_fold.iter().map(|f| f.0 * f.3).sum::<f64>() / n,
        n: thetas.len(),
        fit_ms: per_fold.iter().map(|f| f.4).collect(),
    })
}

/// Cross-validated metrics of the chosen model family.
pub fn cv_metrics(
    thetas: &[Angle],
    mode: FitMode,
    k: usize,
    config: &EmConfig,
    seed: u64,
) -> Result<CvMetrics> {
    config.validate()?;
    cross_validate(thetas, k, seed, |train| Ok(fit_cell(train, mode, config)?.mixture))
}

/// Average held-out probability density under k-fold cross-validation.
pub fn apd_cv(thetas: &[Angle], mode: FitMode, k: usize, config: &EmConfig, seed: u64) -> Result<f64> {
    apd_cv_with(thetas, k, seed, |train| Ok(fit_cell(train, mode, config)?.mixture))
}

pub fn apd_cv_with<F>(thetas: &[Angle], k: usize, seed: u64, fitter: F) -> Result<f64>
where
    F: Fn(&[Angle]) -> Result<VonMisesMixture> + Sync,
{
    let parts = folds(thetas.len(), k, seed)?;
    let apds = parts
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let train: Vec<Angle> = parts
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, p)| p.iter().map(|&i| thetas[i]))
                .collect();
            let test: Vec<Angle> = test_idx.iter().map(|&i| thetas[i]).collect();
            average_density(&fitter(&train)?, &test)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(apds.iter().sum::<f64>() / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub method: FitMode,
    pub enll: f64,
    pub apd: f64,
    pub mse_closest_mode: f64,
    pub fit_ms_mean: f64,
    pub fit_ms_sd: f64,
    /// Observations evaluated.
    pub n: usize,
}

impl MetricReport {
    /// Equality ignoring timing.
    pub fn same_metrics(&self, other: &MetricReport) -> bool {
        self.method == other.method
            && self.enll == other.enll
            && self.apd == other.apd
            && self.mse_closest_mode == other.mse_closest_mode
            && self.n == other.n
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn report(method: FitMode, groups: &[CvMetrics]) -> MetricReport {
    let n: usize = groups.iter().map(|g| g.n).sum();
    let w = |f: fn(&CvMetrics) -> f64| {
        groups.iter().map(|g| g.n as f64 * f(g)).sum::<f64>() / n as f64
    };
    let times: Vec<f64> = groups.iter().flat_map(|g| g.fit_ms.iter().copied()).collect();
    let (fit_ms_mean, fit_ms_sd) = mean_sd(&times);
    MetricReport {
        method,
        enll: w(|g| g.enll),
        apd: w(|g| g.apd),
        mse_closest_mode: w(|g| g.mse_closest_mode),
        fit_ms_mean,
        fit_ms_sd,
        n,
    }
}

/// Evaluates the unimodal and the mixture model on identical folds.
pub fn compare(
    thetas: &[Angle],
    config: &EmConfig,
    k: usize,
    seed: u64,
) -> Result<(MetricReport, MetricReport)> {
    if thetas.len() < 10 {
        return Err(Error::domain("comparison needs at least 10 observations"));
    }
    let vm = cv_metrics(thetas, FitMode::Vm, k, config, seed)?;
    let vmm = cv_metrics(thetas, FitMode::Vmm, k, config, seed)?;
    Ok((report(FitMode::Vm, &[vm]), report(FitMode::Vmm, &[vmm])))
}

/// Scene-level comparison: every group (typically a grid cell) with at
/// least `k` observations is cross-validated on its own; metrics are
/// averaged with weights proportional to group size.
pub fn compare_groups(
    groups: &[Vec<Angle>],
    config: &EmConfig,
    k: usize,
    seed: u64,
) -> Result<(MetricReport, MetricReport)> {
    let eligible: Vec<&Vec<Angle>> = groups.iter().filter(|g| g.len() >= k.max(10)).collect();
    if eligible.is_empty() {
        return Err(Error::domain(format!(
            "no group has at least {} observations",
            k.max(10)
        )));
    }
    let run = |mode| {
        eligible
            .iter()
            .map(|g| cv_metrics(g, mode, k, config, seed))
            .collect::<Result<Vec<_>>>()
    };
    let vm = run(FitMode::Vm)?;
    let vmm = run(FitMode::Vmm)?;
    Ok((report(FitMode::Vm, &vm), report(FitMode::Vmm, &vmm)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel;
    use crate::circular::{wrap, VonMises};
    use crate::vmm::{sample, MixtureComponent};

    fn a(x: f64) -> Angle {
        wrap(x).unwrap()
    }

    fn vm(mu: f64, k: f64) -> VonMisesMixture {
        VonMisesMixture::single(VonMises::new(a(mu), k).unwrap())
    }

    #[test]
    fn enll_examples() {
        let data: Vec<Angle> = (0..17).map(|i| a(i as f64)).collect();
        assert!((enll(&VonMisesMixture::uniform(), &data).unwrap() - TAU.ln()).abs() < 1e-14);
        let e = enll(&vm(0.0, 2.0), &[a(0.0)]).unwrap();
        let expected = -(2f64.exp() / (TAU * bessel::bessel_i0(2.0).unwrap())).ln();
        assert!((e - expected).abs() < 1e-14);
        assert!((e - 0.66187).abs() < 1e-5);
        assert!(enll(&vm(0.0, 2.0), &[]).is_err());
    }

    #[test]
    fn mse_examples() {
        let modes = [a(0.0), a(PI)];
        let m = mse_to_modes(&modes, &[a(PI / 2.0)]).unwrap();
        assert!((m - (PI / 2.0).powi(2)).abs() < 1e-15);
        assert_eq!(mse_to_modes(&modes, &[a(0.0), a(PI)]).unwrap(), 0.0);
        assert!(mse_closest_mode(&VonMisesMixture::uniform(), &[a(0.0)]).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = vm(0.3, 2.0);
        assert!(kl_divergence(&p, &p, DEFAULT_KL_GRID).abs() < 1e-9);
        let k = 2.0;
        let closed = k * bessel::bessel_ratio_a(k).unwrap() - bessel::bessel_i0(k).unwrap().ln();
        let est = kl_divergence(&vm(0.0, k), &VonMisesMixture::uniform(), DEFAULT_KL_GRID);
        assert!((est - closed).abs() < 1e-10);
        assert!((closed - 0.571556).abs() < 1e-6);
        let q = VonMisesMixture::new(vec![
            MixtureComponent { alpha: 0.5, dist: VonMises::new(a(1.0), 4.0).unwrap() },
            MixtureComponent { alpha: 0.5, dist: VonMises::new(a(-2.0), 1.0).unwrap() },
        ])
        .unwrap();
        let (pq, qp) = (kl_divergence(&p, &q, 7200), kl_divergence(&q, &p, 7200));
        assert!((pq - qp).abs() > 1e-3);
    }

    #[test]
    fn fold_layout() {
        let f = folds(23, 10, 4).unwrap();
        assert_eq!(f.len(), 10);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(f.iter().all(|p| p.len() == 2 || p.len() == 3));
        assert_eq!(f, folds(23, 10, 4).unwrap());
        assert!(folds(5, 10, 0).is_err());
    }

    #[test]
    fn apd_examples() {
        let data = sample(&VonMisesMixture::uniform(), 200, 1);
        let apd = apd_cv_with(&data, 10, 3, |_| Ok(VonMisesMixture::uniform())).unwrap();
        assert!((apd - 1.0 / TAU).abs() < 1e-15);
        let tight = sample(&vm(1.0, 50.0), 200, 2);
        let cfg = EmConfig::default();
        assert!(apd_cv(&tight, FitMode::Vm, 10, &cfg, 0).unwrap() > 5.0 / TAU);
        assert!(apd_cv(&tight[..5], FitMode::Vm, 10, &cfg, 0).is_err());
    }

    #[test]
    fn compare_is_deterministic() {
        let data = sample(&vm(0.4, 3.0), 300, 8);
        let cfg = EmConfig::default();
        let (a1, b1) = compare(&data, &cfg, 10, 5).unwrap();
        let (a2, b2) = compare(&data, &cfg, 10, 5).unwrap();
        assert!(a1.same_metrics(&a2) && b1.same_metrics(&b2));
        assert_eq!(a1.method, FitMode::Vm);
        assert_eq!(b1.method, FitMode::Vmm);
    }
}
