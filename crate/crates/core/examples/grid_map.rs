//! Build unimodal and mixture grid maps of a street scene with a two-way
//! crosswalk and compare them cell by cell.

use dirgrid::dgm::{DirectionalGridMap, FitMode};
use dirgrid::ingest::{headings_from_tracks, ObservationStore, DEFAULT_MIN_STEP};
use dirgrid::synth::{generate, street_grid, SceneKind, SceneSpec};
use dirgrid::vmm::{find_modes, EmConfig};

fn main() -> dirgrid::Result<()> {
    let scene = generate(&SceneSpec::new(SceneKind::Multimodal, 1))?;
    let obs = headings_from_tracks(&scene.points, DEFAULT_MIN_STEP);
    let store = ObservationStore::with_grid(street_grid(), obs);
    let cfg = EmConfig::default();

    let vm = DirectionalGridMap::build_from_store(&store, FitMode::Vm, &cfg)?;
    let vmm = DirectionalGridMap::build_from_store(&store, FitMode::Vmm, &cfg)?;
    println!("{} observations, {} outside the grid", store.len(), store.outside_count());
    println!("cell    n   VM modes   VMM modes");
    for (a, b) in vm.cells().iter().zip(vmm.cells()) {
        let (Some(ma), Some(mb)) = (&a.mixture, &b.mixture) else { continue };
        let fmt = |m| {
            find_modes(m).modes.iter().map(|t| format!("{:+.2}", t.radians())).collect::<Vec<_>>().join(" ")
        };
        println!("({},{}) {:>4}   {:<9}  {}", a.col, a.row, a.n_obs, fmt(ma), fmt(mb));
    }

    let q = vmm.query(5.0, 3.0, dirgrid::circular::wrap(std::f64::consts::FRAC_PI_2)?);
    println!("density heading north on the crosswalk: {:.4}", q.density);
    print!("{}", vmm.to_text().lines().take(3).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
