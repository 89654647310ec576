//! Track and observation ingestion, heading extraction, and the indexed
//! observation store used for spatial, temporal and per-track slicing.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::circular::{wrap, Angle};
use crate::dgm::GridSpec;
use crate::error::{Error, Result};

/// Default minimum displacement (metres) for a heading to be emitted.
pub const DEFAULT_MIN_STEP: f64 = 0.05;

/// A tracked position.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub track_id: String,
    pub x: f64,
    pub y: f64,
}

/// A heading observed at a position and time.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub track_id: Option<String>,
    pub x: f64,
    pub y: f64,
    pub theta: Angle,
}

/// Finite-difference bearings between consecutive points of one track.
///
/// Each pair moving at least `min_step` metres yields one observation at
/// the first point of the pair; shorter moves are treated as jitter.
pub fn headings_from_track(points: &[TrackPoint], min_step: f64) -> Vec<Observation> {
    points
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            if dx.hypot(dy) < min_step {
                return None;
            }
            Some(Observation {
                t: a.t,
                track_id: Some(a.track_id.clone()),
                x: a.x,
                y: a.y,
                theta: Angle::from_xy(dx, dy),
            })
        })
        .collect()
}

/// Groups mixed track points by `track_id` (file order within a track) and
/// extracts headings track by track, tracks in id order.
pub fn headings_from_tracks(points: &[TrackPoint], min_step: f64) -> Vec<Observation> {
    let mut tracks: BTreeMap<&str, Vec<TrackPoint>> = BTreeMap::new();
    for p in points {
        tracks.entry(&p.track_id).or_default().push(p.clone());
    }
    tracks
        .values()
        .flat_map(|pts| headings_from_track(pts, min_step))
        .collect()
}

/// Parsed content of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Tracks(Vec<TrackPoint>),
    Observations(Vec<Observation>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Tracks(v) => v.len(),
            Records::Observations(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Observations as-is, or headings extracted from tracks.
    pub fn into_observations(self, min_step: f64) -> Vec<Observation> {
        match self {
            Records::Tracks(pts) => headings_from_tracks(&pts, min_step),
            Records::Observations(obs) => obs,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Number of invalid rows tolerated (and skipped) before the load fails.
    pub error_budget: usize,
}

/// Records plus the rows that were rejected within the error budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub records: Records,
    pub rejected: Vec<(usize, String)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Schema {
    Tracks,
    Observations,
}

fn field_f64(rec: &csv::StringRecord, i: usize, name: &str) -> std::result::Result<f64, String> {
    let raw = rec.get(i).ok_or_else(|| format!("missing column {name}"))?;
    let v: f64 = raw.trim().parse().map_err(|_| format!("{name} not numeric"))?;
    if !v.is_finite() {
        return Err(format!("{name} not finite"));
    }
    Ok(v)
}

pub fn load_csv(path: impl AsRef<Path>, options: LoadOptions) -> Result<Loaded> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

/// Reads schema A (`t,track_id,x,y`) or schema B (`t,track_id,x,y,theta`).
pub fn read_csv<R: Read>(reader: R, options: LoadOptions) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Err(Error::parse(1, "empty file, expected a header")),
        Some(r) => r.map_err(|e| Error::parse(1, e.to_string()))?,
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let schema = match names.as_slice() {
        ["t", "track_id", "x", "y"] => Schema::Tracks,
        ["t", "track_id", "x", "y", "theta"] => Schema::Observations,
        _ => {
            return Err(Error::parse(
                1,
                format!(
                    "unknown schema '{}', expected t,track_id,x,y or t,track_id,x,y,theta",
                    names.join(",")
                ),
            ))
        }
    };
    let width = names.len();

    let mut rejected: Vec<(usize, String)> = Vec::new();
    let mut tracks = Vec::new();
    let mut observations = Vec::new();
    let mut last_t: BTreeMap<String, f64> = BTreeMap::new();

    for row in rows {
        let (line, parsed) = match row {
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                (line, Err(e.to_string()))
            }
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line() as usize);
                (line, parse_row(&rec, schema, width, &mut last_t))
            }
        };
        match parsed {
            Ok(Row::Track(p)) => tracks.push(p),
            Ok(Row::Obs(o)) => observations.push(o),
            Err(msg) => {
                if rejected.len() >= options.error_budget {
                    return Err(Error::parse(line, msg));
                }
                rejected.push((line, msg));
            }
        }
    }
    let records = match schema {
        Schema::Tracks => Records::Tracks(tracks),
        Schema::Observations => Records::Observations(observations),
    };
    Ok(Loaded { records, rejected })
}

enum Row {
    Track(TrackPoint),
    Obs(Observation),
}

fn parse_row(
    rec: &csv::StringRecord,
    schema: Schema,
    width: usize,
    last_t: &mut BTreeMap<String, f64>,
) -> std::result::Result<Row, String> {
    if rec.len() != width {
        return Err(format!("expected {width} fields, found {}", rec.len()));
    }
    let t = field_f64(rec, 0, "t")?;
    let id = rec.get(1).unwrap_or("").trim().to_string();
    let x = field_f64(rec, 2, "x")?;
    let y = field_f64(rec, 3, "y")?;
    match schema {
        Schema::Tracks => {
            if id.is_empty() {
                return Err("track_id is empty".into());
            }
            if let Some(&prev) = last_t.get(&id) {
                if t <= prev {
                    return Err(format!("t not increasing within track {id}"));
                }
            }
            last_t.insert(id.clone(), t);
            Ok(Row::Track(TrackPoint {
                t,
                track_id: id,
                x,
                y,
            }))
        }
        Schema::Observations => {
            let theta = wrap(field_f64(rec, 4, "theta")?).map_err(|e| e.to_string())?;
            Ok(Row::Obs(Observation {
                t,
                track_id: (!id.is_empty()).then_some(id),
                x,
                y,
                theta,
            }))
        }
    }
}

/// Writes schema-B CSV.
pub fn write_observations_csv<W: std::io::Write>(out: W, obs: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::domain(format!("csv write failed: {e}"));
    w.write_record(["t", "track_id", "x", "y", "theta"]).map_err(map)?;
    for o in obs {
        w.write_record([
            o.t.to_string(),
            o.track_id.clone().unwrap_or_default(),
            o.x.to_string(),
            o.y.to_string(),
            o.theta.radians().to_string(),
        ])
        .map_err(map)?;
    }
    w.flush().map_err(|e| Error::domain(format!("csv write failed: {e}")))
}

/// Writes schema-A CSV.
pub fn write_tracks_csv<W: std::io::Write>(out: W, points: &[TrackPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::domain(format!("csv write failed: {e}"));
    w.write_record(["t", "track_id", "x", "y"]).map_err(map)?;
    for p in points {
        w.write_record([
            p.t.to_string(),
            p.track_id.clone(),
            p.x.to_string(),
            p.y.to_string(),
        ])
        .map_err(map)?;
    }
    w.flush().map_err(|e| Error::domain(format!("csv write failed: {e}")))
}

fn canonical_cmp(a: &Observation, b: &Observation) -> Ordering {
    a.t.total_cmp(&b.t)
        .then_with(|| a.track_id.cmp(&b.track_id))
        .then_with(|| a.theta.radians().total_cmp(&b.theta.radians()))
        .then_with(|| a.x.total_cmp(&b.x))
        .then_with(|| a.y.total_cmp(&b.y))
}

/// Observations indexed by time, by grid cell (when bound to a grid) and
/// by track. Every slice comes out ordered by time, then track id, so
/// results do not depend on insertion order.
#[derive(Debug, Clone)]
pub struct ObservationStore {
    grid: Option<GridSpec>,
    // canonical order
    obs: Vec<Observation>,
    by_cell: Vec<Vec<usize>>,
    outside: Vec<usize>,
    by_track: BTreeMap<String, Vec<usize>>,
}

impl ObservationStore {
    pub fn new(grid: Option<GridSpec>, mut obs: Vec<Observation>) -> Self {
        // stable: exact duplicates keep insertion order
        obs.sort_by(canonical_cmp);
        let mut by_cell = vec![Vec::new(); grid.map_or(0, |g| g.n_cells())];
        let mut outside = Vec::new();
        let mut by_track: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, o) in obs.iter().enumerate() {
            if let Some(g) = &grid {
                match g.cell_of(o.x, o.y) {
                    Some((c, r)) => by_cell[g.index(c, r)].push(i),
                    None => outside.push(i),
                }
            }
            if let Some(id) = &o.track_id {
                by_track.entry(id.clone()).or_default().push(i);
            }
        }
        ObservationStore {
            grid,
            obs,
            by_cell,
            outside,
            by_track,
        }
    }

    pub fn with_grid(grid: GridSpec, obs: Vec<Observation>) -> Self {
        Self::new(Some(grid), obs)
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// All observations in canonical order.
    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn track_ids(&self) -> impl Iterator<Item = &str> {
        self.by_track.keys().map(String::as_str)
    }

    fn time_range(&self, t_lo: f64, t_hi: f64) -> Result<std::ops::Range<usize>> {
        if !(t_lo <= t_hi) {
            return Err(Error::domain(format!("empty time window [{t_lo}, {t_hi}]")));
        }
        let start = self.obs.partition_point(|o| o.t < t_lo);
        let end = self.obs.partition_point(|o| o.t <= t_hi);
        Ok(start..end.max(start))
    }

    /// Every heading with `t ∈ [t_lo, t_hi]`, across all cells and tracks.
    pub fn slice_spatial(&self, t_lo: f64, t_hi: f64) -> Result<Vec<Angle>> {
        Ok(self.obs[self.time_range(t_lo, t_hi)?]
            .iter()
            .map(|o| o.theta)
            .collect())
    }

    /// Observations (not just headings) in a time window.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> Result<&[Observation]> {
        Ok(&self.obs[self.time_range(t_lo, t_hi)?])
    }

    /// One track's headings in time order.
    pub fn slice_track(&self, track_id: &str) -> Result<Vec<Angle>> {
        match self.by_track.get(track_id) {
            Some(idx) => Ok(idx.iter().map(|&i| self.obs[i].theta).collect()),
            None => {
                let known: Vec<&str> = self.track_ids().collect();
                Err(Error::domain(format!(
                    "unknown track '{track_id}', known tracks: {}",
                    known.join(", ")
                )))
            }
        }
    }

    fn cell_indices(&self, col: usize, row: usize) -> Result<&[usize]> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::domain("store is not bound to a grid"))?;
        if col >= g.n_cols || row >= g.n_rows {
            return Err(Error::domain(format!(
                "cell ({col}, {row}) outside a {}x{} grid",
                g.n_cols, g.n_rows
            )));
        }
        Ok(&self.by_cell[g.index(col, row)])
    }

    /// All headings observed inside a cell.
    pub fn slice_cell(&self, col: usize, row: usize) -> Result<Vec<Angle>> {
        Ok(self
            .cell_indices(col, row)?
            .iter()
            .map(|&i| self.obs[i].theta)
            .collect())
    }

    /// Headings inside a cell and a time window.
    pub fn slice_cell_window(
        &self,
        col: usize,
        row: usize,
        t_lo: f64,
        t_hi: f64,
    ) -> Result<Vec<Angle>> {
        let range = self.time_range(t_lo, t_hi)?;
        Ok(self
            .cell_indices(col, row)?
            .iter()
            .filter(|&&i| range.contains(&i))
            .map(|&i| self.obs[i].theta)
            .collect())
    }

    /// Number of observations that fell outside the bound grid.
    pub fn outside_count(&self) -> usize {
        self.outside.len()
    }

    /// Headings per cell in grid index order (empty without a grid).
    pub fn cells(&self) -> Vec<Vec<Angle>> {
        self.by_cell
            .iter()
            .map(|idx| idx.iter().map(|&i| self.obs[i].theta).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn tp(t: f64, x: f64, y: f64) -> TrackPoint {
        TrackPoint {
            t,
            track_id: "a".into(),
            x,
            y,
        }
    }

    fn obs(t: f64, id: Option<&str>, x: f64, y: f64, theta: f64) -> Observation {
        Observation {
            t,
            track_id: id.map(str::to_string),
            x,
            y,
            theta: wrap(theta).unwrap(),
        }
    }

    #[test]
    fn heading_examples() {
        let h = headings_from_track(&[tp(0.0, 0.0, 0.0), tp(1.0, 1.0, 1.0)], 0.05);
        assert_eq!(h.len(), 1);
        assert!((h[0].theta.radians() - FRAC_PI_4).abs() < 1e-15);
        assert_eq!((h[0].t, h[0].x), (0.0, 0.0));

        let h = headings_from_track(&[tp(0.0, 0.0, 0.0), tp(1.0, 0.0, -1.0)], 0.05);
        assert_eq!(h[0].theta.radians(), -FRAC_PI_2);

        assert!(headings_from_track(&[tp(0.0, 0.0, 0.0), tp(1.0, 1e-6, 0.0)], 0.01).is_empty());
        assert!(headings_from_track(&[tp(0.0, 0.0, 0.0)], 0.01).is_empty());
    }

    #[test]
    fn csv_tracks() {
        let data = "t,track_id,x,y\n0,a,0,0\n1,a,1,0\n0.5,b,2,2\n";
        let l = read_csv(data.as_bytes(), LoadOptions::default()).unwrap();
        assert_eq!(l.records.len(), 3);
        assert!(matches!(l.records, Records::Tracks(_)));
    }

    #[test]
    fn csv_errors() {
        let data = "t,track_id,x,y\n0,a,abc,0\n";
        let e = read_csv(data.as_bytes(), LoadOptions::default()).unwrap_err();
        assert_eq!(e.to_string(), "line 2: x not numeric");

        let e = read_csv("a,b\n1,2\n".as_bytes(), LoadOptions::default()).unwrap_err();
        assert!(e.to_string().starts_with("line 1: unknown schema"));

        let e = read_csv("t,track_id,x,y\n0,a,0\n".as_bytes(), LoadOptions::default())
            .unwrap_err();
        assert!(e.to_string().starts_with("line 2: expected 4 fields"));

        let e = read_csv("t,track_id,x,y\n1,a,0,0\n1,a,1,1\n".as_bytes(), LoadOptions::default())
            .unwrap_err();
        assert_eq!(e.to_string(), "line 3: t not increasing within track a");
    }

    #[test]
    fn error_budget() {
        let data = "t,track_id,x,y\n0,a,x,0\n1,a,1,0\n2,a,2,y\n3,a,3,0\n";
        let l = read_csv(data.as_bytes(), LoadOptions { error_budget: 2 }).unwrap();
        assert_eq!(l.records.len(), 2);
        assert_eq!(l.rejected[0], (2, "x not numeric".to_string()));
        assert_eq!(l.rejected[1].0, 4);
        let e = read_csv(data.as_bytes(), LoadOptions { error_budget: 1 }).unwrap_err();
        assert!(e.to_string().starts_with("line 4"));
    }

    #[test]
    fn csv_theta_is_wrapped() {
        let data = "t,track_id,x,y,theta\n0,,1,1,7.0\n";
        let l = read_csv(data.as_bytes(), LoadOptions::default()).unwrap();
        let Records::Observations(o) = l.records else {
            panic!("expected observations")
        };
        assert_eq!(o[0].track_id, None);
        assert!((o[0].theta.radians() - (7.0 - std::f64::consts::TAU)).abs() < 1e-15);
    }

    fn grid() -> GridSpec {
        GridSpec::new(0.0, 0.0, 10.0, 8.0, 5, 4).unwrap()
    }

    fn sample_obs() -> Vec<Observation> {
        vec![
            obs(3.0, Some("b"), 1.0, 1.0, 0.3),
            obs(1.0, Some("a"), 1.5, 1.0, 0.1),
            obs(2.0, Some("a"), 9.0, 7.0, -2.0),
            obs(2.0, None, 11.0, 1.0, 1.0),
            obs(1.0, Some("b"), 1.0, 1.2, 0.2),
        ]
    }

    #[test]
    fn store_slices() {
        let s = ObservationStore::with_grid(grid(), sample_obs());
        let all = s.slice_spatial(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert_eq!(all.len(), 5);
        assert!(s.slice_spatial(5.0, 6.0).unwrap().is_empty());
        assert!(s.slice_spatial(2.0, 1.0).is_err());
        let at1: Vec<f64> = s.slice_spatial(1.0, 1.0).unwrap().iter().map(|a| a.radians()).collect();
        assert_eq!(at1, vec![0.1, 0.2]);

        let b: Vec<f64> = s.slice_track("b").unwrap().iter().map(|a| a.radians()).collect();
        assert_eq!(b, vec![0.2, 0.3]);
        let e = s.slice_track("zz").unwrap_err().to_string();
        assert!(e.contains("a, b"));

        assert_eq!(s.slice_cell(0, 0).unwrap().len(), 3);
        assert!(s.slice_cell(2, 2).unwrap().is_empty());
        assert!(s.slice_cell(5, 0).is_err());
        let total: usize = s.cells().iter().map(Vec::len).sum();
        assert_eq!(total + s.outside_count(), s.len());
    }

    #[test]
    fn insertion_order_is_irrelevant() {
        let a = ObservationStore::with_grid(grid(), sample_obs());
        let mut rev = sample_obs();
        rev.reverse();
        let b = ObservationStore::with_grid(grid(), rev);
        assert_eq!(a.observations(), b.observations());
        assert_eq!(a.cells(), b.cells());
    }
}
