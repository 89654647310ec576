//! A manipulator repeating a perturbed square loop, modelled at the four
//! corners instead of on a grid.

use dirgrid::dgm::{build_at_sites, FitMode};
use dirgrid::ingest::{headings_from_tracks, DEFAULT_MIN_STEP};
use dirgrid::synth::{generate, kuka_sites, SceneKind, SceneSpec};
use dirgrid::vmm::{find_modes, EmConfig};

fn main() -> dirgrid::Result<()> {
    let scene = generate(&SceneSpec::new(SceneKind::KukaLoop, 11))?;
    let obs = headings_from_tracks(&scene.points, DEFAULT_MIN_STEP);
    let sites = kuka_sites();
    for s in build_at_sites(&obs, &sites, FitMode::Vmm, &EmConfig::default())? {
        let Some(mix) = &s.mixture else {
            println!("site {:?}: no data", s.site);
            continue;
        };
        let modes: Vec<String> = find_modes(mix).modes.iter().map(|m| format!("{:+.0}", m.degrees())).collect();
        println!("site {:?}: n={} M={} modes (deg) {}", s.site, s.n_obs, mix.len(), modes.join(" "));
    }
    Ok(())
}
