//! Directional grid maps: per-cell von Mises and von Mises mixture models
//! of the direction of motion over a spatial lattice.

pub mod bessel;
pub mod circular;
pub mod cli;
pub mod dbscan;
pub mod dgm;
pub mod em;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod plot;
pub mod synth;
pub mod vmf;
pub mod vmm;

pub use error::{Error, Result};
