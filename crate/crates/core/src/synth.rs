//! Deterministic synthetic pedestrian and robot trajectories with
//! ground-truth bearings.
//!
//! The street scenes live on a 10 m × 8 m world that a 5 × 4 grid of 2 m
//! cells covers: a sidewalk along the bottom (eastbound), one along the top
//! (westbound) and a crosswalk in the middle column. In the unimodal scene
//! the crosswalk is only walked north; the multimodal scene adds southbound
//! walkers, so the crosswalk cells see two opposite directions.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::circular::Angle;
use crate::dgm::{GridSpec, SiteSet};
use crate::error::{Error, Result};
use crate::ingest::TrackPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Unimodal,
    Multimodal,
    KukaLoop,
    HumanLPath,
}

impl SceneKind {
    pub const ALL: [SceneKind; 4] = [
        SceneKind::Unimodal,
        SceneKind::Multimodal,
        SceneKind::KukaLoop,
        SceneKind::HumanLPath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Unimodal => "unimodal",
            SceneKind::Multimodal => "multimodal",
            SceneKind::KukaLoop => "kuka_loop",
            SceneKind::HumanLPath => "human_l_path",
        }
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown scene '{s}', expected unimodal, multimodal, kuka_loop or human_l_path"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub scene: SceneKind,
    /// Walkers, or loop repetitions for the robot scene.
    pub n_agents: usize,
    /// Points emitted per agent.
    pub steps_per_agent: usize,
    /// Standard deviation of the per-step heading perturbation (radians).
    pub noise_sigma: f64,
    /// Standard deviation of the goal perturbation in metres (robot loop only).
    pub goal_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Defaults sized for quick experiments.
    pub fn new(scene: SceneKind, seed: u64) -> Self {
        let (n_agents, steps_per_agent, noise_sigma, goal_sigma) = match scene {
            SceneKind::Unimodal | SceneKind::Multimodal => (40, 60, 0.15, 0.0),
            SceneKind::KukaLoop => (20, 120, 0.0, 0.1),
            SceneKind::HumanLPath => (1, 286, 0.1, 0.0),
        };
        SceneSpec {
            scene,
            n_agents,
            steps_per_agent,
            noise_sigma,
            goal_sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::domain("n_agents must be at least 1"));
        }
        let min_steps = match self.scene {
            SceneKind::KukaLoop => 5,
            SceneKind::HumanLPath => 3,
            _ => 2,
        };
        if self.steps_per_agent < min_steps {
            return Err(Error::domain(format!(
                "steps_per_agent must be at least {min_steps} for {}",
                self.scene.name()
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::domain("noise_sigma must be finite and >= 0"));
        }
        if !(self.goal_sigma >= 0.0 && self.goal_sigma.is_finite()) {
            return Err(Error::domain("goal_sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Noise-free bearing of one emitted step (the segment from point `step`
/// to point `step + 1` of a track).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub segment_id: usize,
    pub track_id: String,
    pub step: usize,
    pub route: usize,
    pub true_theta: Angle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub points: Vec<TrackPoint>,
    pub segments: Vec<Segment>,
    /// Time span `[start, end]` of each route.
    pub route_windows: Vec<(f64, f64)>,
}

/// World rectangle of the street scenes.
pub fn street_grid() -> GridSpec {
    GridSpec::new(0.0, 0.0, 10.0, 8.0, 5, 4).expect("valid grid")
}

/// Cells the crosswalk runs through on [`street_grid`].
pub const CROSSWALK_CELLS: [(usize, usize); 2] = [(2, 1), (2, 2)];

/// Whether a cell of [`street_grid`] lies on a sidewalk.
pub fn is_sidewalk_cell(_col: usize, row: usize) -> bool {
    row == 0 || row == 3
}

/// Closed loop driven by the robot scene, counter-clockwise.
pub const KUKA_LOOP: [(f64, f64); 4] = [(2.0, 2.0), (8.0, 2.0), (8.0, 6.0), (2.0, 6.0)];

/// Sites on the middle of each loop side: bottom, right, top, left.
pub fn kuka_sites() -> SiteSet {
    SiteSet::new(vec![(5.0, 2.0), (8.0, 4.0), (5.0, 6.0), (2.0, 4.0)], 0.8).expect("valid sites")
}

/// Corners of the L-shaped walk: east, then north.
pub const L_PATH: [(f64, f64); 3] = [(1.0, 1.0), (11.0, 1.0), (11.0, 11.0)];

const LANE_HALF_WIDTH: f64 = 0.5;
const DT: f64 = 0.5;

struct Route {
    waypoints: Vec<(f64, f64)>,
    lateral: (f64, f64),
}

fn street_routes(multimodal: bool) -> Vec<Route> {
    let mut routes = vec![
        Route {
            waypoints: vec![(0.1, 1.0), (9.9, 1.0)],
            lateral: (0.0, 1.0),
        },
        Route {
            waypoints: vec![(5.0, 2.1), (5.0, 5.9)],
            lateral: (1.0, 0.0),
        },
        Route {
            waypoints: vec![(9.9, 7.0), (0.1, 7.0)],
            lateral: (0.0, 1.0),
        },
    ];
    if multimodal {
        routes.push(Route {
            waypoints: vec![(5.0, 5.9), (5.0, 2.1)],
            lateral: (1.0, 0.0),
        });
    }
    routes
}

/// Splits `steps` moves over legs in proportion to their length, at least
/// one move per leg (largest-remainder rounding).
fn allocate(lengths: &[f64], steps: usize) -> Vec<usize> {
    let total: f64 = lengths.iter().sum();
    let spare = steps - lengths.len();
    let exact: Vec<f64> = lengths.iter().map(|l| l / total * spare as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = spare - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[i] += 1;
        left -= 1;
    }
    alloc.iter().map(|a| a + 1).collect()
}

struct Walker<'a> {
    rng: &'a mut ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl Walker<'_> {
    /// Walks the polyline with `n_points` points. Returns the points and the
    /// noise-free bearing of every move.
    fn walk(&mut self, waypoints: &[(f64, f64)], n_points: usize) -> (Vec<(f64, f64)>, Vec<Angle>) {
        let lengths: Vec<f64> = waypoints
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .collect();
        let alloc = allocate(&lengths, n_points - 1);
        let mut pts = vec![waypoints[0]];
        let mut bearings = Vec::with_capacity(n_points - 1);
        let mut p = waypoints[0];
        for (leg, &moves) in alloc.iter().enumerate() {
            let (a, b) = (waypoints[leg], waypoints[leg + 1]);
            let d = ((b.0 - a.0) / moves as f64, (b.1 - a.1) / moves as f64);
            let bearing = Angle::from_xy(b.0 - a.0, b.1 - a.1);
            for _ in 0..moves {
                let eps = self.noise.map_or(0.0, |n| n.sample(self.rng));
                let step = if eps == 0.0 {
                    d
                } else {
                    let (s, c) = eps.sin_cos();
                    (d.0 * c - d.1 * s, d.0 * s + d.1 * c)
                };
                p = (p.0 + step.0, p.1 + step.1);
                pts.push(p);
                bearings.push(bearing);
            }
        }
        (pts, bearings)
    }
}

/// Generates a scene; identical specs give identical output.
pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sigma).expect("valid sigma"));
    let mut points = Vec::with_capacity(spec.n_agents * spec.steps_per_agent);
    let mut segments = Vec::with_capacity(spec.n_agents * (spec.steps_per_agent - 1));
    let n = spec.steps_per_agent;
    let span = (n - 1) as f64 * DT;

    let emit = |points: &mut Vec<TrackPoint>,
                    segments: &mut Vec<Segment>,
                    id: String,
                    route: usize,
                    t0: f64,
                    pts: Vec<(f64, f64)>,
                    bearings: Vec<Angle>| {
        for (k, (x, y)) in pts.into_iter().enumerate() {
            points.push(TrackPoint {
                t: t0 + k as f64 * DT,
                track_id: id.clone(),
                x,
                y,
            });
        }
        for (k, b) in bearings.into_iter().enumerate() {
            segments.push(Segment {
                segment_id: segments.len(),
                track_id: id.clone(),
                step: k,
                route,
                true_theta: b,
            });
        }
    };

    let route_windows = match spec.scene {
        SceneKind::Unimodal | SceneKind::Multimodal => {
            let routes = street_routes(spec.scene == SceneKind::Multimodal);
            let n_routes = routes.len();
            let phase = span + 10.0;
            for a in 0..spec.n_agents {
                let r = a % n_routes;
                let route = &routes[r];
                let offset = rng.random_range(-LANE_HALF_WIDTH..LANE_HALF_WIDTH);
                let wps: Vec<(f64, f64)> = route
                    .waypoints
                    .iter()
                    .map(|&(x, y)| (x + offset * route.lateral.0, y + offset * route.lateral.1))
                    .collect();
                let mut walker = Walker { rng: &mut rng, noise };
                let (pts, bearings) = walker.walk(&wps, n);
                let t0 = r as f64 * phase + (a / n_routes) as f64 * 1e-3;
                emit(&mut points, &mut segments, format!("agent{a:03}"), r, t0, pts, bearings);
            }
            let per_route = spec.n_agents.div_ceil(n_routes);
            (0..n_routes)
                .map(|r| {
                    let t0 = r as f64 * phase;
                    (t0, t0 + span + per_route as f64 * 1e-3)
                })
                .collect()
        }
        SceneKind::KukaLoop => {
            let goal = (spec.goal_sigma > 0.0)
                .then(|| Normal::new(0.0, spec.goal_sigma).expect("valid sigma"));
            for a in 0..spec.n_agents {
                let mut wps: Vec<(f64, f64)> = KUKA_LOOP
                    .iter()
                    .map(|&(x, y)| match goal {
                        Some(g) => (x + g.sample(&mut rng), y + g.sample(&mut rng)),
                        None => (x, y),
                    })
                    .collect();
                wps.push(wps[0]);
                let mut walker = Walker { rng: &mut rng, noise };
                let (pts, bearings) = walker.walk(&wps, n);
                let t0 = a as f64 * (span + 1.0);
                emit(&mut points, &mut segments, format!("loop{a:02}"), 0, t0, pts, bearings);
            }
            vec![(0.0, spec.n_agents as f64 * (span + 1.0))]
        }
        SceneKind::HumanLPath => {
            for a in 0..spec.n_agents {
                let mut walker = Walker { rng: &mut rng, noise };
                let (pts, bearings) = walker.walk(&L_PATH, n);
                let t0 = a as f64 * (span + 1.0);
                emit(&mut points, &mut segments, format!("human{a:02}"), 0, t0, pts, bearings);
            }
            vec![(0.0, spec.n_agents as f64 * (span + 1.0))]
        }
    };
    Ok(Scene {
        spec: *spec,
        points,
        segments,
        route_windows,
    })
}

/// Writes the ground-truth sidecar `segment_id,true_theta`.
pub fn write_truth_csv<W: std::io::Write>(out: W, segments: &[Segment]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| Error::domain(format!("csv write failed: {e}"));
    w.write_record(["segment_id", "true_theta"]).map_err(fail)?;
    for s in segments {
        w.write_record([s.segment_id.to_string(), s.true_theta.radians().to_string()])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::domain(format!("csv write failed: {e}")))
}

/// Noise-free bearings of the street routes, by route index.
pub fn street_bearings(multimodal: bool) -> Vec<Angle> {
    street_routes(multimodal)
        .iter()
        .map(|r| {
            let (a, b) = (r.waypoints[0], r.waypoints[1]);
            Angle::from_xy(b.0 - a.0, b.1 - a.1)
        })
        .collect()
}

/// Bearing of the southbound crosswalk route.
pub const SOUTH: f64 = -PI / 2.0;
