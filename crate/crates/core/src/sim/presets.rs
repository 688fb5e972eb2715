//! Built-in scene and corruption configurations.

use super::corrupt::CorruptionSpec;
use super::scene::SceneSpec;

pub const CITYSCAPES_SCENE_TOML: &str = include_str!("../../presets/cityscapes_scene.toml");
pub const TABLE1_SCENE_TOML: &str = include_str!("../../presets/table1_scene.toml");
pub const CITYSCAPES_CORRUPTION_TOML: &str = include_str!("../../presets/cityscapes_corruption.toml");
pub const IDENTITY_CORRUPTION_TOML: &str = include_str!("../../presets/identity_corruption.toml");

/// 256x128 street scene with fifteen objects over the ten foreground classes.
pub fn cityscapes_scene() -> SceneSpec {
    SceneSpec::from_toml_str(CITYSCAPES_SCENE_TOML).expect("bundled preset parses")
}

/// 512x256 scene, many placements of few templates.
pub fn table1_scene() -> SceneSpec {
    SceneSpec::from_toml_str(TABLE1_SCENE_TOML).expect("bundled preset parses")
}

pub fn cityscapes_corruption() -> CorruptionSpec {
    CorruptionSpec::from_toml_str(CITYSCAPES_CORRUPTION_TOML).expect("bundled preset parses")
}

pub fn identity_corruption() -> CorruptionSpec {
    CorruptionSpec::from_toml_str(IDENTITY_CORRUPTION_TOML).expect("bundled preset parses")
}

pub fn scene_by_name(name: &str) -> Option<SceneSpec> {
    match name {
        "cityscapes" => Some(cityscapes_scene()),
        "table1" => Some(table1_scene()),
        _ => None,
    }
}

pub fn corruption_by_name(name: &str) -> Option<CorruptionSpec> {
    match name {
        "cityscapes" => Some(cityscapes_corruption()),
        "identity" => Some(identity_corruption()),
        _ => None,
    }
}
