//! Load a track CSV and slice the observations by time, track and cell.

use dirgrid::circular::fit_vm;
use dirgrid::ingest::{read_csv, write_tracks_csv, LoadOptions, ObservationStore, DEFAULT_MIN_STEP};
use dirgrid::synth::{generate, street_grid, SceneKind, SceneSpec};

fn main() -> dirgrid::Result<()> {
    let scene = generate(&SceneSpec::new(SceneKind::Multimodal, 2))?;
    let mut csv = Vec::new();
    write_tracks_csv(&mut csv, &scene.points)?;
    // one broken row, tolerated by the error budget
    csv.extend_from_slice(b"1e9,agent000,not-a-number,1\n");

    let loaded = read_csv(csv.as_slice(), LoadOptions { error_budget: 1 })?;
    for (line, why) in &loaded.rejected {
        println!("skipped line {line}: {why}");
    }
    let store = ObservationStore::with_grid(street_grid(), loaded.records.into_observations(DEFAULT_MIN_STEP));
    println!("{} observations from {} tracks", store.len(), store.track_ids().count());

    for (route, &(t0, t1)) in scene.route_windows.iter().enumerate() {
        let slice = store.slice_spatial(t0, t1)?;
        let fit = fit_vm(&slice)?;
        println!("route {route} window [{t0}, {t1}]: n={} mean heading {:+.3}", slice.len(), fit.dist.mu().radians());
    }
    let track = store.slice_track("agent001")?;
    println!("agent001: {} headings", track.len());
    let cell = store.slice_cell(2, 1)?;
    let early = store.slice_cell_window(2, 1, 0.0, scene.route_windows[1].1)?;
    println!("crosswalk cell: {} headings in total, {} before the return crossing", cell.len(), early.len());
    Ok(())
}
