//! DBSCAN on the circle with the geodesic metric `|wrap(θᵢ − θⱼ)|`.
//!
//! Used to seed the mixture means: the number of dense clusters becomes the
//! number of mixture components.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::circular::{Angle, DirectionalSums};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Unvisited,
    Noise,
    Cluster(usize),
}

/// Result of a circular DBSCAN run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster index per input point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(move |(i, l)| (*l == Some(cluster)).then_some(i))
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for c in self.labels.iter().flatten() {
            sizes[*c] += 1;
        }
        sizes
    }

    /// Circular mean direction of each cluster, in cluster order.
    pub fn centers(&self, thetas: &[Angle]) -> Vec<Angle> {
        let mut sums = vec![DirectionalSums::default(); self.n_clusters];
        for (t, l) in thetas.iter().zip(&self.labels) {
            if let Some(c) = l {
                sums[*c].push(*t);
            }
        }
        sums.iter().map(DirectionalSums::mean_direction).collect()
    }
}

struct CircleIndex {
    // (angle, original index), ascending by angle
    sorted: Vec<(f64, usize)>,
}

impl CircleIndex {
    fn new(thetas: &[Angle]) -> Self {
        let mut sorted: Vec<(f64, usize)> = thetas
            .iter()
            .enumerate()
            .map(|(i, t)| (t.radians(), i))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        CircleIndex { sorted }
    }

    fn range(&self, lo: f64, hi: f64, out: &mut Vec<usize>, center: f64, eps: f64) {
        let start = self.sorted.partition_point(|p| p.0 < lo);
        let end = self.sorted.partition_point(|p| p.0 <= hi);
        let c = Angle::wrapped(center);
        for &(a, i) in &self.sorted[start..end.max(start)] {
            if Angle::wrapped(a).distance(c) <= eps {
                out.push(i);
            }
        }
    }

    fn neighbors(&self, center: f64, eps: f64, out: &mut Vec<usize>) {
        out.clear();
        if eps >= PI {
            out.extend(0..self.sorted.len());
            return;
        }
        // widen slightly; the exact distance test above decides membership
        let slack = 1e-12;
        let lo = center - eps - slack;
        let hi = center + eps + slack;
        if lo < -PI {
            self.range(-PI - 1.0, hi, out, center, eps);
            self.range(lo + 2.0 * PI, PI + 1.0, out, center, eps);
        } else if hi > PI {
            self.range(-PI - 1.0, hi - 2.0 * PI, out, center, eps);
            self.range(lo, PI + 1.0, out, center, eps);
        } else {
            self.range(lo, hi, out, center, eps);
        }
        out.sort_unstable();
        out.dedup();
    }
}

/// Runs DBSCAN over angles. A point is a core point when at least `min_pts`
/// points (itself included) lie within `eps` radians. Border points reachable
/// from several clusters join the first cluster that reaches them in scan order.
pub fn dbscan_circular(thetas: &[Angle], eps: f64, min_pts: usize) -> Clustering {
    let n = thetas.len();
    let index = CircleIndex::new(thetas);
    let mut labels = vec![Label::Unvisited; n];
    let mut n_clusters = 0;
    let mut nb = Vec::new();
    let mut nb_inner = Vec::new();
    let mut queue = VecDeque::new();

    for i in 0..n {
        if labels[i] != Label::Unvisited {
            continue;
        }
        index.neighbors(thetas[i].radians(), eps, &mut nb);
        if nb.len() < min_pts {
            labels[i] = Label::Noise;
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        labels[i] = Label::Cluster(c);
        queue.clear();
        queue.extend(nb.iter().copied().filter(|&j| j != i));
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Label::Cluster(_) => {}
                Label::Noise => labels[j] = Label::Cluster(c),
                Label::Unvisited => {
                    labels[j] = Label::Cluster(c);
                    index.neighbors(thetas[j].radians(), eps, &mut nb_inner);
                    if nb_inner.len() >= min_pts {
                        queue.extend(nb_inner.iter().copied().filter(|&k| {
                            matches!(labels[k], Label::Unvisited | Label::Noise)
                        }));
                    }
                }
            }
        }
    }

    Clustering {
        labels: labels
            .into_iter()
            .map(|l| match l {
                Label::Cluster(c) => Some(c),
                _ => None,
            })
            .collect(),
        n_clusters,
    }
}
