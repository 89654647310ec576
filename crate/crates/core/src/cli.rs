//! The `dgm` command-line tool.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! data and I/O errors. Data goes to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::circular::wrap;
use crate::dgm::{DirectionalGridMap, FitMode, GridSpec};
use crate::error::Error;
use crate::eval::{compare, compare_groups, MetricReport, DEFAULT_FOLDS};
use crate::ingest::{load_csv, LoadOptions, ObservationStore, DEFAULT_MIN_STEP};
use crate::plot::{render_svg, Normalize, PlotSpec};
use crate::synth::{self, SceneKind, SceneSpec};
use crate::vmm::{find_modes, EmConfig};

#[derive(Debug, Parser)]
#[command(name = "dgm", version, about = "Directional grid maps of motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene as a track CSV plus a ground-truth sidecar.
    Synth(SynthArgs),
    /// Fit a grid map from a track or observation CSV.
    Build(BuildArgs),
    /// Look up a density or the modes at a location.
    Query(QueryArgs),
    /// Cross-validated comparison of the unimodal and mixture models.
    Eval(EvalArgs),
    /// Render a map as an SVG grid of polar plots.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Vm,
    Vmm,
}

impl From<ModeArg> for FitMode {
    fn from(m: ModeArg) -> FitMode {
        match m {
            ModeArg::Vm => FitMode::Vm,
            ModeArg::Vmm => FitMode::Vmm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    Cell,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    PerCell,
    Global,
}

fn parse_scene(s: &str) -> Result<SceneKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// unimodal, multimodal, kuka_loop or human_l_path
    #[arg(long, value_parser = parse_scene)]
    pub scene: SceneKind,
    /// Track CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth CSV; defaults to the output path with a `.truth.csv` suffix.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Heading noise standard deviation, radians.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Goal perturbation standard deviation for kuka_loop, metres.
    #[arg(long)]
    pub goal_sigma: Option<f64>,
}

/// Options shared by the commands that fit models.
#[derive(Debug, Args, Default)]
pub struct FitArgs {
    /// TOML file with defaults for any of the options below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// EM convergence tolerance.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// DBSCAN radius in radians.
    #[arg(long)]
    pub dbscan_eps: Option<f64>,
    #[arg(long)]
    pub min_pts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// x_min,y_min,x_max,y_max,n_cols,n_rows
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<GridSpec>,
    /// Minimum displacement (metres) for a heading to be extracted from tracks.
    #[arg(long)]
    pub min_step: Option<f64>,
    /// Invalid CSV rows tolerated before the load fails.
    #[arg(long)]
    pub error_budget: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("what").required(true).args(["theta", "modes"]))]
pub struct QueryArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub y: f64,
    /// Direction in radians.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Print the modes of the cell instead of a density.
    #[arg(long)]
    pub modes: bool,
    /// Print values with full round-trip precision.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Scope::Cell)]
    pub scope: Scope,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Fill the timing columns (otherwise `NA`, keeping output reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 80.0)]
    pub cell_size: f64,
    #[arg(long, default_value_t = 360, value_parser = clap::value_parser!(u32).range(36..))]
    pub samples: u32,
    #[arg(long, value_enum, default_value_t = NormalizeArg::PerCell)]
    pub normalize: NormalizeArg,
    #[arg(long, default_value = "#1f4e99")]
    pub stroke: String,
    #[arg(long, default_value = "#8fb3e8")]
    pub fill: String,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

type Outcome = std::result::Result<(), Failure>;

/// Settings after merging the config file under the command-line flags.
#[derive(Debug, Clone)]
struct Settings {
    em: EmConfig,
    mode: Option<FitMode>,
    grid: Option<GridSpec>,
    folds: usize,
    min_step: f64,
    error_budget: usize,
}

fn config_table(path: &Path) -> std::result::Result<toml::Table, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

const CONFIG_KEYS: [&str; 10] = [
    "seed",
    "mode",
    "epsilon",
    "dbscan_eps",
    "dbscan_min_pts",
    "max_iterations",
    "grid",
    "folds",
    "min_step",
    "error_budget",
];

fn settings(fit: &FitArgs, folds: Option<usize>) -> std::result::Result<Settings, Failure> {
    let table = match &fit.config {
        Some(p) => config_table(p)?,
        None => toml::Table::new(),
    };
    if let Some(k) = table.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(usage(format!("unknown config key '{k}'")));
    }
    let float = |k: &str| -> std::result::Result<Option<f64>, Failure> {
        match table.get(k) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(usage(format!("config key '{k}' must be a number"))),
        }
    };
    let int = |k: &str| -> std::result::Result<Option<u64>, Failure> {
        match table.get(k) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(usage(format!("config key '{k}' must be a non-negative integer"))),
        }
    };
    let string = |k: &str| -> std::result::Result<Option<String>, Failure> {
        match table.get(k) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(usage(format!("config key '{k}' must be a string"))),
        }
    };

    let defaults = EmConfig::default();
    let em = EmConfig {
        seed: fit.seed.or(int("seed")?).unwrap_or(defaults.seed),
        epsilon: fit.epsilon.or(float("epsilon")?).unwrap_or(defaults.epsilon),
        dbscan_eps: fit.dbscan_eps.or(float("dbscan_eps")?).unwrap_or(defaults.dbscan_eps),
        dbscan_min_pts: fit
            .min_pts
            .or(int("dbscan_min_pts")?.map(|v| v as usize))
            .unwrap_or(defaults.dbscan_min_pts),
        max_iterations: fit
            .max_iterations
            .or(int("max_iterations")?.map(|v| v as usize))
            .unwrap_or(defaults.max_iterations),
        ..defaults
    };
    em.validate().map_err(usage)?;
    let mode = match fit.mode {
        Some(m) => Some(m.into()),
        None => string("mode")?
            .map(|s| s.parse::<FitMode>())
            .transpose()
            .map_err(usage)?,
    };
    let grid = match fit.grid {
        Some(g) => Some(g),
        None => string("grid")?
            .map(|s| s.parse::<GridSpec>())
            .transpose()
            .map_err(usage)?,
    };
    let folds = folds
        .or(int("folds")?.map(|v| v as usize))
        .unwrap_or(DEFAULT_FOLDS);
    if folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let min_step = fit.min_step.or(float("min_step")?).unwrap_or(DEFAULT_MIN_STEP);
    if !(min_step >= 0.0) {
        return Err(usage("--min-step must be non-negative"));
    }
    Ok(Settings {
        em,
        mode,
        grid,
        folds,
        min_step,
        error_budget: fit
            .error_budget
            .or(int("error_budget")?.map(|v| v as usize))
            .unwrap_or(0),
    })
}

fn create(path: &Path) -> std::result::Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn default_truth_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into());
    out.with_file_name(format!("{stem}.truth.csv"))
}

fn cmd_synth(a: &SynthArgs, err: &mut dyn Write) -> Outcome {
    let mut spec = SceneSpec::new(a.scene, a.seed);
    if let Some(n) = a.agents {
        spec.n_agents = n;
    }
    if let Some(n) = a.steps {
        spec.steps_per_agent = n;
    }
    if let Some(s) = a.noise {
        spec.noise_sigma = s;
    }
    if let Some(s) = a.goal_sigma {
        spec.goal_sigma = s;
    }
    spec.validate().map_err(usage)?;
    let scene = synth::generate(&spec).map_err(data)?;
    crate::ingest::write_tracks_csv(create(&a.out)?, &scene.points).map_err(data)?;
    let truth = a.truth.clone().unwrap_or_else(|| default_truth_path(&a.out));
    synth::write_truth_csv(create(&truth)?, &scene.segments).map_err(data)?;
    let _ = writeln!(
        err,
        "wrote {} points to {} and {} segments to {}",
        scene.points.len(),
        a.out.display(),
        scene.segments.len(),
        truth.display()
    );
    Ok(())
}

fn load_store(
    input: &Path,
    s: &Settings,
    grid: Option<GridSpec>,
    err: &mut dyn Write,
) -> std::result::Result<ObservationStore, Failure> {
    let loaded = load_csv(
        input,
        LoadOptions {
            error_budget: s.error_budget,
        },
    )
    .map_err(|e| data(format!("{}: {e}", input.display())))?;
    for (line, msg) in &loaded.rejected {
        let _ = writeln!(err, "warning: {}: line {line}: {msg} (skipped)", input.display());
    }
    Ok(ObservationStore::new(grid, loaded.records.into_observations(s.min_step)))
}

fn cmd_build(a: &BuildArgs, err: &mut dyn Write) -> Outcome {
    let s = settings(&a.fit, None)?;
    let grid = s.grid.ok_or_else(|| usage("--grid is required"))?;
    let mode = s.mode.unwrap_or(FitMode::Vmm);
    let store = load_store(&a.input, &s, Some(grid), err)?;
    let map = DirectionalGridMap::build_from_store(&store, mode, &s.em).map_err(data)?;
    if map.empty {
        let _ = writeln!(err, "warning: no observation fell inside the grid");
    }
    for c in map.cells().iter().filter(|c| c.is_observed()) {
        let m = c.mixture.as_ref().map_or(0, |m| m.len());
        match &c.report {
            Some(r) => {
                let _ = writeln!(
                    err,
                    "cell {} {}: n={} M={} iterations={} converged={}",
                    c.col, c.row, c.n_obs, m, r.iterations, r.converged
                );
            }
            None => {
                let _ = writeln!(err, "cell {} {}: n={} M={}", c.col, c.row, c.n_obs, m);
            }
        }
    }
    map.save(&a.out).map_err(data)
}

fn cmd_query(a: &QueryArgs, out: &mut dyn Write) -> Outcome {
    let map = DirectionalGridMap::load(&a.map).map_err(|e| data(format!("{}: {e}", a.map.display())))?;
    let fmt = |v: f64| if a.exact { format!("{v}") } else { format!("{v:.10}") };
    if a.modes {
        if let Some(mix) = map.cell_at(a.x, a.y).and_then(|c| c.mixture.as_ref()) {
            for m in find_modes(mix).modes {
                writeln!(out, "{}", fmt(m.radians())).map_err(data)?;
            }
        }
        return Ok(());
    }
    let theta = wrap(a.theta.expect("clap requires --theta or --modes")).map_err(usage)?;
    let q = map.query(a.x, a.y, theta);
    writeln!(out, "{},{}", fmt(q.density), q.observed).map_err(data)
}

fn metric_row(r: &MetricReport, timing: bool) -> String {
    let t = if timing {
        format!("{:.3},{:.3}", r.fit_ms_mean, r.fit_ms_sd)
    } else {
        "NA,NA".into()
    };
    format!(
        "{},{:.6},{:.6},{:.6},{t}",
        r.method, r.enll, r.apd, r.mse_closest_mode
    )
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let s = settings(&a.fit, a.folds)?;
    let grid = match a.scope {
        Scope::Cell => Some(s.grid.ok_or_else(|| usage("--scope cell requires --grid"))?),
        Scope::Global => None,
    };
    let store = load_store(&a.input, &s, grid, err)?;
    let (vm, vmm) = match a.scope {
        Scope::Cell => compare_groups(&store.cells(), &s.em, s.folds, s.em.seed),
        Scope::Global => {
            let all: Vec<_> = store.observations().iter().map(|o| o.theta).collect();
            compare(&all, &s.em, s.folds, s.em.seed)
        }
    }
    .map_err(data)?;
    writeln!(out, "method,enll,apd,mse_closest_mode,fit_ms_mean,fit_ms_sd").map_err(data)?;
    for r in [vm, vmm] {
        if s.mode.is_none_or(|m| m == r.method) {
            writeln!(out, "{}", metric_row(&r, a.timing)).map_err(data)?;
        }
    }
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> Outcome {
    let map = DirectionalGridMap::load(&a.map).map_err(|e| data(format!("{}: {e}", a.map.display())))?;
    let spec = PlotSpec {
        cell_size_px: a.cell_size,
        samples_per_lobe: a.samples as usize,
        normalize: match a.normalize {
            NormalizeArg::PerCell => Normalize::PerCell,
            NormalizeArg::Global => Normalize::Global,
        },
        stroke: a.stroke.clone(),
        fill: a.fill.clone(),
    };
    let svg = render_svg(&map, &spec).map_err(usage)?;
    std::fs::write(&a.out, svg).map_err(|e| data(format!("{}: {e}", a.out.display())))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return 2;
            }
            let _ = write!(out, "{text}");
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a, err),
        Command::Build(a) => cmd_build(a, err),
        Command::Query(a) => cmd_query(a, out),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}
