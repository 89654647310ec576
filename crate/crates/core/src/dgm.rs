//! Directional grid maps: a lattice of cells, each holding a directional
//! distribution fitted to the headings observed inside it.

use std::f64::consts::TAU;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bessel;
use crate::circular::{fit_vm_from_sums, wrap, Angle, DirectionalSums, VonMises};
use crate::dbscan::dbscan_circular;
use crate::error::{Error, Result};
use crate::ingest::{Observation, ObservationStore};
use crate::vmm::{
    fit_vmm, fit_vmm_warm, EmConfig, EmReport, MixtureComponent, VonMisesMixture,
};

/// Axis-aligned world rectangle split into `n_cols × n_rows` equal cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub n_cols: usize,
    pub n_rows: usize,
}

impl GridSpec {
    pub fn new(
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        n_cols: usize,
        n_rows: usize,
    ) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::domain("grid bounds must be finite with max > min"));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::domain("grid needs at least one column and one row"));
        }
        Ok(GridSpec {
            x_min,
            y_min,
            x_max,
            y_max,
            n_cols,
            n_rows,
        })
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        (self.y_max - self.y_min) / self.n_rows as f64
    }

    pub fn n_cells(&self) -> usize {
        self.n_cols * self.n_rows
    }

    /// Column-major linear index.
    pub fn index(&self, col: usize, row: usize) -> usize {
        col * self.n_rows + row
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index / self.n_rows, index % self.n_rows)
    }

    /// Cell containing `(x, y)`, or `None` outside the bounds. Max edges
    /// belong to the last column/row.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max) {
            return None;
        }
        let col = (((x - self.x_min) / self.cell_width()).floor() as usize).min(self.n_cols - 1);
        let row = (((y - self.y_min) / self.cell_height()).floor() as usize).min(self.n_rows - 1);
        Some((col, row))
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.x_min + (col as f64 + 0.5) * self.cell_width(),
            self.y_min + (row as f64 + 0.5) * self.cell_height(),
        )
    }
}

/// Parses `x_min,y_min,x_max,y_max,n_cols,n_rows`.
impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(Error::domain(
                "grid must be x_min,y_min,x_max,y_max,n_cols,n_rows",
            ));
        }
        let f = |i: usize| -> Result<f64> {
            parts[i]
                .parse()
                .map_err(|_| Error::domain(format!("grid field '{}' is not a number", parts[i])))
        };
        let n = |i: usize| -> Result<usize> {
            parts[i]
                .parse()
                .map_err(|_| Error::domain(format!("grid field '{}' is not a count", parts[i])))
        };
        GridSpec::new(f(0)?, f(1)?, f(2)?, f(3)?, n(4)?, n(5)?)
    }
}

/// Per-cell model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitMode {
    /// One von Mises distribution per cell.
    Vm,
    /// A von Mises mixture per cell.
    Vmm,
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMode::Vm => "VM",
            FitMode::Vmm => "VMM",
        })
    }
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vm" => Ok(FitMode::Vm),
            "vmm" => Ok(FitMode::Vmm),
            _ => Err(Error::domain(format!("unknown mode '{s}', expected vm or vmm"))),
        }
    }
}

/// A fitted model with its EM diagnostics (none for the unimodal fit).
#[derive(Debug, Clone, PartialEq)]
pub struct CellFit {
    pub mixture: VonMisesMixture,
    pub report: Option<EmReport>,
}

/// Fits one set of headings with the chosen model family.
pub fn fit_cell(thetas: &[Angle], mode: FitMode, config: &EmConfig) -> Result<CellFit> {
    match mode {
        FitMode::Vm => {
            let sums = DirectionalSums::from_angles(thetas);
            let fit = fit_vm_from_sums(&sums, config.kappa_estimator)?;
            Ok(CellFit {
                mixture: VonMisesMixture::single(fit.dist),
                report: None,
            })
        }
        FitMode::Vmm => {
            let (mixture, report) = fit_vmm(thetas, config)?;
            Ok(CellFit {
                mixture,
                report: Some(report),
            })
        }
    }
}

/// One lattice cell.
#[derive(Debug, Clone)]
pub struct CellModel {
    pub col: usize,
    pub row: usize,
    /// `None` while the cell has never been observed.
    pub mixture: Option<VonMisesMixture>,
    pub n_obs: usize,
    pub report: Option<EmReport>,
    // sufficient statistics for unimodal online updates
    sums: DirectionalSums,
    // headings kept for mixture refits; empty for maps read from disk
    retained: Vec<Angle>,
}

/// Cells compare by parameters and counts only.
impl PartialEq for CellModel {
    fn eq(&self, other: &Self) -> bool {
        self.col == other.col
            && self.row == other.row
            && self.mixture == other.mixture
            && self.n_obs == other.n_obs
    }
}

impl CellModel {
    fn unobserved(col: usize, row: usize) -> Self {
        CellModel {
            col,
            row,
            mixture: None,
            n_obs: 0,
            report: None,
            sums: DirectionalSums::default(),
            retained: Vec::new(),
        }
    }

    pub fn is_observed(&self) -> bool {
        self.n_obs > 0
    }

    /// Density at `theta`; uniform for an unobserved cell.
    pub fn pdf(&self, theta: Angle) -> f64 {
        match &self.mixture {
            Some(m) => m.pdf(theta),
            None => 1.0 / TAU,
        }
    }

    fn fitted(col: usize, row: usize, thetas: Vec<Angle>, mode: FitMode, config: &EmConfig) -> Result<Self> {
        if thetas.is_empty() {
            return Ok(Self::unobserved(col, row));
        }
        let fit = fit_cell(&thetas, mode, config)?;
        Ok(CellModel {
            col,
            row,
            mixture: Some(fit.mixture),
            n_obs: thetas.len(),
            report: fit.report,
            sums: DirectionalSums::from_angles(&thetas),
            retained: if mode == FitMode::Vmm { thetas } else { Vec::new() },
        })
    }
}

/// Result of a density lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub density: f64,
    /// `false` for unobserved cells and points outside the grid.
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalGridMap {
    pub spec: GridSpec,
    pub mode: FitMode,
    cells: Vec<CellModel>,
    /// Set when a build saw no observation inside the grid.
    pub empty: bool,
}

impl DirectionalGridMap {
    /// A map with every cell unobserved.
    pub fn empty(spec: GridSpec, mode: FitMode) -> Self {
        let cells = (0..spec.n_cells())
            .map(|i| {
                let (c, r) = spec.col_row(i);
                CellModel::unobserved(c, r)
            })
            .collect();
        DirectionalGridMap {
            spec,
            mode,
            cells,
            empty: true,
        }
    }

    /// Buckets observations by cell and fits every non-empty cell.
    pub fn build(
        observations: &[Observation],
        spec: GridSpec,
        mode: FitMode,
        config: &EmConfig,
    ) -> Result<Self> {
        let store = ObservationStore::with_grid(spec, observations.to_vec());
        Self::build_from_store(&store, mode, config)
    }

    pub fn build_from_store(store: &ObservationStore, mode: FitMode, config: &EmConfig) -> Result<Self> {
        config.validate()?;
        let spec = *store
            .grid()
            .ok_or_else(|| Error::domain("observation store is not bound to a grid"))?;
        let cells = store
            .cells()
            .into_par_iter()
            .enumerate()
            .map(|(i, thetas)| {
                let (c, r) = spec.col_row(i);
                CellModel::fitted(c, r, thetas, mode, config)
            })
            .collect::<Result<Vec<_>>>()?;
        let empty = cells.iter().all(|c| !c.is_observed());
        Ok(DirectionalGridMap {
            spec,
            mode,
            cells,
            empty,
        })
    }

    pub fn cells(&self) -> &[CellModel] {
        &self.cells
    }

    pub fn cell(&self, col: usize, row: usize) -> Option<&CellModel> {
        (col < self.spec.n_cols && row < self.spec.n_rows)
            .then(|| &self.cells[self.spec.index(col, row)])
    }

    pub fn cell_at(&self, x: f64, y: f64) -> Option<&CellModel> {
        let (c, r) = self.spec.cell_of(x, y)?;
        self.cell(c, r)
    }

    /// Density of moving in direction `theta` at `(x, y)`.
    pub fn query(&self, x: f64, y: f64, theta: Angle) -> Query {
        match self.cell_at(x, y) {
            Some(cell) if cell.is_observed() => Query {
                density: cell.pdf(theta),
                observed: true,
            },
            _ => Query {
                density: 1.0 / TAU,
                observed: false,
            },
        }
    }

    /// Folds new observations into the map. Unimodal cells accumulate
    /// sufficient statistics, so the result matches a batch build over all
    /// data seen so far. Mixture cells re-run EM from their current
    /// parameters over the retained and new headings; a fresh clustered fit
    /// is also tried when the warm start stalls or the cluster count changed,
    /// and the lower negative log-likelihood wins.
    pub fn update_online(&self, store: &ObservationStore, config: &EmConfig) -> Result<Self> {
        config.validate()?;
        match store.grid() {
            Some(g) if *g == self.spec => {}
            _ => {
                return Err(Error::domain(
                    "observation store grid does not match the map grid",
                ))
            }
        }
        let mode = self.mode;
        let cells = self
            .cells
            .par_iter()
            .zip(store.cells().into_par_iter())
            .map(|(cell, new)| {
                if new.is_empty() {
                    return Ok(cell.clone());
                }
                match mode {
                    FitMode::Vm => update_vm(cell, &new, config),
                    FitMode::Vmm => update_vmm(cell, new, config),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let empty = cells.iter().all(|c| !c.is_observed());
        Ok(DirectionalGridMap {
            spec: self.spec,
            mode,
            cells,
            empty,
        })
    }

    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "DGM v1 {} {} {} {} {} {} {}\n",
            s.n_cols,
            s.n_rows,
            fmt_f(s.x_min),
            fmt_f(s.y_min),
            fmt_f(s.x_max),
            fmt_f(s.y_max),
            self.mode
        );
        let mut written = 0;
        for cell in &self.cells {
            let Some(mix) = &cell.mixture else { continue };
            written += 1;
            let _ = write!(out, "cell {} {} {} M={}", cell.col, cell.row, cell.n_obs, mix.len());
            for c in mix.components() {
                let _ = write!(
                    out,
                    " ({} {} {})",
                    fmt_f(c.alpha),
                    fmt_f(c.dist.mu().radians()),
                    fmt_f(c.dist.kappa())
                );
            }
            out.push('\n');
        }
        let _ = writeln!(out, "end {written}");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        parse_map(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn update_vm(cell: &CellModel, new: &[Angle], config: &EmConfig) -> Result<CellModel> {
    let mut sums = cell.sums;
    sums.merge(&DirectionalSums::from_angles(new));
    let fit = fit_vm_from_sums(&sums, config.kappa_estimator)?;
    Ok(CellModel {
        col: cell.col,
        row: cell.row,
        mixture: Some(VonMisesMixture::single(fit.dist)),
        n_obs: cell.n_obs + new.len(),
        report: None,
        sums,
        retained: Vec::new(),
    })
}

fn update_vmm(cell: &CellModel, new: Vec<Angle>, config: &EmConfig) -> Result<CellModel> {
    let n_obs = cell.n_obs + new.len();
    let mut data = cell.retained.clone();
    data.extend(new);
    let (mixture, report) = match &cell.mixture {
        None => fit_vmm(&data, config)?,
        Some(current) => {
            let warm = fit_vmm_warm(&data, current, config)?;
            let stalled = warm.1.final_nll() >= warm.1.nll_trace[0];
            let clusters = dbscan_circular(&data, config.dbscan_eps, config.dbscan_min_pts)
                .n_clusters
                .max(1);
            if stalled || clusters != current.len() {
                let fresh = fit_vmm(&data, config)?;
                if fresh.1.final_nll() < warm.1.final_nll() {
                    fresh
                } else {
                    warm
                }
            } else {
                warm
            }
        }
    };
    Ok(CellModel {
        col: cell.col,
        row: cell.row,
        mixture: Some(mixture),
        n_obs,
        report: Some(report),
        sums: DirectionalSums::from_angles(&data),
        retained: data,
    })
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_map(text: &str) -> Result<DirectionalGridMap> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty map file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 9 || h[0] != "DGM" {
        return Err(Error::parse(
            1,
            "expected header 'DGM v1 n_cols n_rows x_min y_min x_max y_max mode'",
        ));
    }
    if h[1] != "v1" {
        return Err(Error::parse(1, format!("unsupported map version '{}'", h[1])));
    }
    let count = |i: usize, name: &str| -> Result<usize> {
        h[i].parse()
            .map_err(|_| Error::parse(1, format!("{name} '{}' is not a count", h[i])))
    };
    let real = |i: usize, name: &str| -> Result<f64> {
        h[i].parse()
            .map_err(|_| Error::parse(1, format!("{name} '{}' is not a number", h[i])))
    };
    let spec = GridSpec::new(
        real(4, "x_min")?,
        real(5, "y_min")?,
        real(6, "x_max")?,
        real(7, "y_max")?,
        count(2, "n_cols")?,
        count(3, "n_rows")?,
    )
    .map_err(|e| Error::parse(1, e.to_string()))?;
    let mode: FitMode = h[8].parse().map_err(|e: Error| Error::parse(1, e.to_string()))?;

    let mut map = DirectionalGridMap::empty(spec, mode);
    let mut cells_read = 0usize;
    let mut end = None;
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if end.is_some() {
            return Err(Error::parse(ln, "content after 'end' line"));
        }
        if let Some(rest) = line.strip_prefix("end") {
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| Error::parse(ln, "end line must carry the cell count"))?;
            if n != cells_read {
                return Err(Error::parse(
                    ln,
                    format!("end line declares {n} cells but {cells_read} were read"),
                ));
            }
            end = Some(ln);
            continue;
        }
        let cell = parse_cell(line, ln, &spec)?;
        let idx = spec.index(cell.col, cell.row);
        if map.cells[idx].is_observed() {
            return Err(Error::parse(ln, format!("duplicate cell ({}, {})", cell.col, cell.row)));
        }
        map.cells[idx] = cell;
        cells_read += 1;
    }
    if end.is_none() {
        let last = text.lines().count();
        return Err(Error::parse(last + 1, "truncated map: missing 'end' line"));
    }
    map.empty = cells_read == 0;
    Ok(map)
}

fn parse_cell(line: &str, ln: usize, spec: &GridSpec) -> Result<CellModel> {
    let err = |msg: String| Error::parse(ln, msg);
    let tokens: Vec<&str> = line
        .split(|c: char| c.is_whitespace() || c == '(' || c == ')')
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.len() < 5 || tokens[0] != "cell" {
        return Err(err("expected 'cell col row n_obs M=m (alpha mu kappa)...'".into()));
    }
    let int = |i: usize, name: &str| -> Result<usize> {
        tokens[i]
            .parse()
            .map_err(|_| err(format!("{name} '{}' is not a count", tokens[i])))
    };
    let (col, row, n_obs) = (int(1, "col")?, int(2, "row")?, int(3, "n_obs")?);
    if col >= spec.n_cols || row >= spec.n_rows {
        return Err(err(format!("cell ({col}, {row}) outside the grid")));
    }
    if n_obs == 0 {
        return Err(err("observed cell with n_obs = 0".into()));
    }
    let m: usize = tokens[4]
        .strip_prefix("M=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| err(format!("expected M=<count>, found '{}'", tokens[4])))?;
    if m == 0 || tokens.len() != 5 + 3 * m {
        return Err(err(format!(
            "M={m} requires {} component values, found {}",
            3 * m,
            tokens.len() - 5
        )));
    }
    let mut comps = Vec::with_capacity(m);
    for k in 0..m {
        let v = |j: usize, name: &str| -> Result<f64> {
            let t = tokens[5 + 3 * k + j];
            t.parse()
                .map_err(|_| err(format!("component {k}: {name} '{t}' is not a number")))
        };
        let mu = wrap(v(1, "mu")?).map_err(|e| err(format!("component {k}: {e}")))?;
        let dist = VonMises::new(mu, v(2, "kappa")?)
            .map_err(|e| err(format!("component {k}: {e}")))?;
        comps.push(MixtureComponent {
            alpha: v(0, "alpha")?,
            dist,
        });
    }
    let mixture = VonMisesMixture::new(comps).map_err(|e| err(e.to_string()))?;
    // unimodal statistics implied by the stored parameters
    let sums = match mixture.components() {
        [only] => {
            let r = bessel::ratio_unchecked(only.dist.kappa()) * n_obs as f64;
            let [c, s] = only.dist.mu().unit();
            DirectionalSums {
                weight: n_obs as f64,
                sum_cos: r * c,
                sum_sin: r * s,
            }
        }
        _ => DirectionalSums::default(),
    };
    Ok(CellModel {
        col,
        row,
        mixture: Some(mixture),
        n_obs,
        report: None,
        sums,
        retained: Vec::new(),
    })
}

/// Circular regions for fitting at chosen locations instead of on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet {
    pub sites: Vec<(f64, f64)>,
    pub radius: f64,
}

impl SiteSet {
    pub fn new(sites: Vec<(f64, f64)>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::domain("site radius must be positive"));
        }
        if sites.is_empty() {
            return Err(Error::domain("at least one site is required"));
        }
        Ok(SiteSet { sites, radius })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteModel {
    pub site: (f64, f64),
    pub mixture: Option<VonMisesMixture>,
    pub n_obs: usize,
    pub report: Option<EmReport>,
}

/// Fits each site from the observations within `radius` of it.
pub fn build_at_sites(
    observations: &[Observation],
    sites: &SiteSet,
    mode: FitMode,
    config: &EmConfig,
) -> Result<Vec<SiteModel>> {
    config.validate()?;
    let store = ObservationStore::new(None, observations.to_vec());
    sites
        .sites
        .par_iter()
        .map(|&(sx, sy)| {
            let thetas: Vec<Angle> = store
                .observations()
                .iter()
                .filter(|o| (o.x - sx).hypot(o.y - sy) <= sites.radius)
                .map(|o| o.theta)
                .collect();
            if thetas.is_empty() {
                return Ok(SiteModel {
                    site: (sx, sy),
                    mixture: None,
                    n_obs: 0,
                    report: None,
                });
            }
            let fit = fit_cell(&thetas, mode, config)?;
            Ok(SiteModel {
                site: (sx, sy),
                mixture: Some(fit.mixture),
                n_obs: thetas.len(),
                report: fit.report,
            })
        })
        .collect()
}
