//! Write an SVG of polar lobes for the crosswalk scene.
//! Usage: cargo run --example polar_plot -- [out.svg]

use dirgrid::dgm::{DirectionalGridMap, FitMode};
use dirgrid::ingest::{headings_from_tracks, ObservationStore, DEFAULT_MIN_STEP};
use dirgrid::plot::{render_svg, Normalize, PlotSpec};
use dirgrid::synth::{generate, street_grid, SceneKind, SceneSpec};
use dirgrid::vmm::EmConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "crosswalk.svg".into());
    let scene = generate(&SceneSpec::new(SceneKind::Multimodal, 1))?;
    let store = ObservationStore::with_grid(street_grid(), headings_from_tracks(&scene.points, DEFAULT_MIN_STEP));
    let map = DirectionalGridMap::build_from_store(&store, FitMode::Vmm, &EmConfig::default())?;
    let spec = PlotSpec { cell_size_px: 120.0, normalize: Normalize::PerCell, ..PlotSpec::default() };
    let svg = render_svg(&map, &spec)?;
    std::fs::write(&out, &svg)?;
    println!("wrote {out} ({} bytes, {} lobes)", svg.len(), svg.matches("<path").count());
    Ok(())
}
