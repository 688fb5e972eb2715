//! Synthetic scenes and simulated network outputs.

pub mod corrupt;
pub mod presets;
pub mod rng;
pub mod scene;

pub use corrupt::{
    jitter_region, simulate_instances, simulate_semantic, simulate_semantic_labels, CorruptionSpec,
    InstanceCorruption, SemanticCorruption,
};
pub use rng::SplitMix64;
pub use scene::{generate_scene, BandSpec, ObjectSpec, Scene, SceneInstance, SceneSpec, Shape};
