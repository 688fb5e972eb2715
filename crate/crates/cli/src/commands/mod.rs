//! The four batch commands. Each returns `Err` only for invalid invocations
//! (unreadable manifest, bad spec, unknown catalog); per-image problems are
//! collected in the returned summary instead.

pub mod eval;
pub mod fuse;
pub mod pseudo;
pub mod simulate;

use anyhow::{Context, Result};
use segfuse::{fuse, ClassCatalog, FusionOutput, FusionPolicy};
use serde::{Deserialize, Serialize};

use crate::manifest::{DatasetManifest, ManifestEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub image_id: String,
    pub error: String,
}

impl Failure {
    pub fn new(image_id: &str, err: &anyhow::Error) -> Self {
        log::error!("{image_id}: {err:#}");
        Self {
            image_id: image_id.to_string(),
            error: format!("{err:#}"),
        }
    }
}

pub(crate) fn fuse_entry(
    m: &DatasetManifest,
    e: &ManifestEntry,
    catalog: &ClassCatalog,
    policy: &FusionPolicy,
) -> Result<FusionOutput> {
    let semantic = e.load_semantic(m)?;
    let segments = e.load_segments(m, semantic.dims())?;
    fuse(&segments, semantic.as_source(), catalog, policy).with_context(|| format!("fusing `{}`", e.image_id))
}

pub(crate) fn prepare_out_dir(dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
