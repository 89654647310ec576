//! Cross-validated comparison of the unimodal and mixture models, per cell
//! and pooled over the scene.

use dirgrid::eval::{compare, compare_groups, kl_divergence, DEFAULT_FOLDS, DEFAULT_KL_GRID};
use dirgrid::ingest::{headings_from_tracks, ObservationStore, DEFAULT_MIN_STEP};
use dirgrid::synth::{generate, street_grid, SceneKind, SceneSpec};
use dirgrid::vmm::{fit_vmm, EmConfig, VonMisesMixture};

fn main() -> dirgrid::Result<()> {
    let cfg = EmConfig::default();
    println!("scene       method  enll     apd     mse");
    for kind in [SceneKind::Unimodal, SceneKind::Multimodal] {
        let scene = generate(&SceneSpec::new(kind, 1))?;
        let store = ObservationStore::with_grid(street_grid(), headings_from_tracks(&scene.points, DEFAULT_MIN_STEP));
        let (vm, vmm) = compare_groups(&store.cells(), &cfg, DEFAULT_FOLDS, 1)?;
        for r in [vm, vmm] {
            println!("{:<11} {:<6} {:+.4}  {:.4}  {:.4}", kind.name(), r.method, r.enll, r.apd, r.mse_closest_mode);
        }
    }

    // pooling every cell hides the structure a grid keeps
    let scene = generate(&SceneSpec::new(SceneKind::Multimodal, 1))?;
    let all: Vec<_> = headings_from_tracks(&scene.points, DEFAULT_MIN_STEP).into_iter().map(|o| o.theta).collect();
    let (vm, vmm) = compare(&all, &cfg, DEFAULT_FOLDS, 1)?;
    println!("pooled: VM enll {:.4}, VMM enll {:.4}", vm.enll, vmm.enll);
    let (fit, _) = fit_vmm(&all, &cfg)?;
    println!("KL(fit || uniform) = {:.4}", kl_divergence(&fit, &VonMisesMixture::uniform(), DEFAULT_KL_GRID));
    Ok(())
}
