//! Expectation-maximization for finite mixtures of directional distributions.
//!
//! The loop is generic over the component family: anything with a log
//! density and a unit-vector location can be mixed. The caller supplies the
//! weighted maximum-likelihood update used in the M-step.

use crate::error::{Error, Result};

/// A mixture component family usable by [`run_em`].
pub trait Component: Clone {
    type Point;

    fn ln_density(&self, x: &Self::Point) -> f64;

    /// Location parameter embedded as a unit vector; convergence is measured
    /// on this embedding so angle wrapping never looks like movement.
    fn location(&self) -> Vec<f64>;
}

/// A component together with its mixing weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Weighted<C> {
    pub alpha: f64,
    pub component: C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Stop once no component location moves more than this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Components lighter than this are pruned after convergence.
    pub alpha_floor: f64,
}

/// Diagnostics of one EM fit.
#[derive(Debug, Clone, PartialEq)]
pub struct EmReport {
    /// Total E/M iterations, including any re-run after pruning.
    pub iterations: usize,
    /// Negative log-likelihood before the first M-step and after each one,
    /// for the EM phase that produced the returned parameters.
    pub nll_trace: Vec<f64>,
    pub converged: bool,
    pub m_initial: usize,
    pub m_final: usize,
    /// Components removed for falling under the weight floor.
    pub pruned: usize,
}

impl EmReport {
    pub fn final_nll(&self) -> f64 {
        *self.nll_trace.last().expect("trace is never empty")
    }
}

/// Compensated running sum.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// E-step. Fills `gammas` (M×N, row per component) and returns the
/// negative log-likelihood of the current parameters.
pub fn e_step<C: Component>(
    points: &[C::Point],
    mixture: &[Weighted<C>],
    gammas: &mut Vec<Vec<f64>>,
) -> f64 {
    let m = mixture.len();
    gammas.resize_with(m, Vec::new);
    for row in gammas.iter_mut() {
        row.clear();
        row.resize(points.len(), 0.0);
    }
    let ln_alpha: Vec<f64> = mixture.iter().map(|w| w.alpha.ln()).collect();
    let mut nll = Neumaier::default();
    let mut scratch = vec![0.0; m];
    for (n, x) in points.iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        for (k, w) in mixture.iter().enumerate() {
            let l = ln_alpha[k] + w.component.ln_density(x);
            scratch[k] = l;
            max = max.max(l);
        }
        let mut total = 0.0;
        for l in scratch.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        for (k, l) in scratch.iter().enumerate() {
            gammas[k][n] = l / total;
        }
        nll.add(-(max + total.ln()));
    }
    nll.value()
}

/// Negative log-likelihood of `points` under a mixture.
pub fn mixture_nll<C: Component>(points: &[C::Point], mixture: &[Weighted<C>]) -> f64 {
    let ln_alpha: Vec<f64> = mixture.iter().map(|w| w.alpha.ln()).collect();
    let mut nll = Neumaier::default();
    for x in points {
        let ls: Vec<f64> = mixture
            .iter()
            .zip(&ln_alpha)
            .map(|(w, la)| la + w.component.ln_density(x))
            .collect();
        let max = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = ls.iter().map(|l| (l - max).exp()).sum();
        nll.add(-(max + total.ln()));
    }
    nll.value()
}

/// M-step: weights from responsibility mass, components from `fit`.
/// Components with zero total responsibility are dropped; the remaining
/// weights are renormalized to sum to one.
pub fn m_step<C, F>(points: &[C::Point], gammas: &[Vec<f64>], fit: &F) -> Result<Vec<Weighted<C>>>
where
    C: Component,
    F: Fn(&[C::Point], &[f64]) -> Result<C>,
{
    let n = points.len() as f64;
    let mut out = Vec::with_capacity(gammas.len());
    for row in gammas {
        let mass: f64 = row.iter().sum();
        if !(mass > 0.0) {
            continue;
        }
        out.push(Weighted {
            alpha: mass / n,
            component: fit(points, row)?,
        });
    }
    if out.is_empty() {
        return Err(Error::domain("every mixture component lost all responsibility"));
    }
    normalize(&mut out);
    Ok(out)
}

pub(crate) fn normalize<C>(mix: &mut [Weighted<C>]) {
    let total: f64 = mix.iter().map(|w| w.alpha).sum();
    for w in mix.iter_mut() {
        w.alpha /= total;
    }
}

fn max_location_change<C: Component>(old: &[Weighted<C>], new: &[Weighted<C>]) -> f64 {
    if old.len() != new.len() {
        return f64::INFINITY;
    }
    old.iter()
        .zip(new)
        .map(|(a, b)| {
            a.component
                .location()
                .iter()
                .zip(b.component.location())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

struct Phase<C> {
    mixture: Vec<Weighted<C>>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn run_phase<C, F>(
    points: &[C::Point],
    mut mixture: Vec<Weighted<C>>,
    epsilon: f64,
    max_iterations: usize,
    fit: &F,
) -> Result<Phase<C>>
where
    C: Component,
    F: Fn(&[C::Point], &[f64]) -> Result<C>,
{
    let mut gammas = Vec::new();
    let mut trace = Vec::with_capacity(max_iterations + 1);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        trace.push(e_step(points, &mixture, &mut gammas));
        let next = m_step(points, &gammas, fit)?;
        iterations += 1;
        let change = max_location_change(&mixture, &next);
        mixture = next;
        if change < epsilon {
            converged = true;
            break;
        }
    }
    trace.push(mixture_nll(points, &mixture));
    Ok(Phase {
        mixture,
        trace,
        iterations,
        converged,
    })
}

/// Runs EM from `init` until the largest location change drops below
/// `epsilon` or the iteration budget is spent, then prunes components whose
/// weight fell under `alpha_floor` and, if any were pruned, re-runs EM on the
/// reduced mixture.
pub fn run_em<C, F>(
    points: &[C::Point],
    init: Vec<Weighted<C>>,
    options: &EmOptions,
    fit: F,
) -> Result<(Vec<Weighted<C>>, EmReport)>
where
    C: Component,
    F: Fn(&[C::Point], &[f64]) -> Result<C>,
{
    if points.is_empty() {
        return Err(Error::domain("EM needs at least one observation"));
    }
    if init.is_empty() {
        return Err(Error::domain("EM needs at least one initial component"));
    }
    let m_initial = init.len();
    let mut phase = run_phase(points, init, options.epsilon, options.max_iterations, &fit)?;
    let mut iterations = phase.iterations;
    let mut pruned = 0;
    loop {
        let before = phase.mixture.len();
        let mut kept: Vec<Weighted<C>> = phase
            .mixture
            .iter()
            .filter(|w| w.alpha >= options.alpha_floor)
            .cloned()
            .collect();
        if kept.len() == before || kept.is_empty() {
            break;
        }
        pruned += before - kept.len();
        normalize(&mut kept);
        let budget = options.max_iterations.saturating_sub(iterations).max(1);
        phase = run_phase(points, kept, options.epsilon, budget, &fit)?;
        iterations += phase.iterations;
    }
    let report = EmReport {
        iterations,
        nll_trace: phase.trace,
        converged: phase.converged,
        m_initial,
        m_final: phase.mixture.len(),
        pruned,
    };
    Ok((phase.mixture, report))
}
