//! Shared fixtures for the benchmarks.

use hsi_core::synth::{generate_scene, Scene, SceneSpec};

/// Seeded synthetic scene at 20 dB with `p` endmembers.
pub fn scene(height: usize, width: usize, bands: usize, p: usize) -> Scene {
    generate_scene(&SceneSpec {
        height,
        width,
        bands,
        p,
        snr_db: Some(20.0),
        ..SceneSpec::default()
    })
    .expect("valid scene spec")
}
