//! Grow a map chunk by chunk as a person walks an L-shaped path, starting
//! from the uniform state.

use dirgrid::circular::wrap;
use dirgrid::dgm::{DirectionalGridMap, FitMode, GridSpec};
use dirgrid::ingest::{headings_from_tracks, ObservationStore, DEFAULT_MIN_STEP};
use dirgrid::synth::{generate, SceneKind, SceneSpec};
use dirgrid::vmm::EmConfig;

fn main() -> dirgrid::Result<()> {
    let scene = generate(&SceneSpec::new(SceneKind::HumanLPath, 5))?;
    let obs = headings_from_tracks(&scene.points, DEFAULT_MIN_STEP);
    let grid = GridSpec::new(0.0, 0.0, 12.0, 12.0, 4, 4)?;
    let cfg = EmConfig::default();

    // probe on the second leg, facing north
    let (px, py, north) = (11.0, 7.0, wrap(std::f64::consts::FRAC_PI_2)?);
    let mut map = DirectionalGridMap::empty(grid, FitMode::Vmm);
    println!("start: p(north)={:.4}", map.query(px, py, north).density);
    for (i, chunk) in obs.chunks(obs.len().div_ceil(4).max(1)).enumerate() {
        map = map.update_online(&ObservationStore::with_grid(grid, chunk.to_vec()), &cfg)?;
        let observed = map.cells().iter().filter(|c| c.is_observed()).count();
        let q = map.query(px, py, north);
        println!("after chunk {}: {observed} cells observed, p(north)={:.4} observed={}", i + 1, q.density, q.observed);
    }
    Ok(())
}
