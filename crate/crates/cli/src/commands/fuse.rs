use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use segfuse::FusionPolicy;
use serde::{Deserialize, Serialize};

use super::{fuse_entry, prepare_out_dir, Failure};
use crate::io::{par_map, write_atomic, write_json};
use crate::manifest::DatasetManifest;

pub const SUMMARY_FILE: &str = "fuse_summary.json";

#[derive(Debug, Clone)]
pub struct FuseOptions {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub catalog: Option<String>,
    pub policy: FusionPolicy,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseRecord {
    pub image_id: String,
    /// Fraction of pixels left unclaimed by segments, before filling.
    pub hole_fraction: f64,
    pub segments: usize,
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuseSummary {
    pub catalog: String,
    pub entries: usize,
    pub images: Vec<FuseRecord>,
    pub failures: Vec<Failure>,
    pub mean_hole_fraction: Option<f64>,
}

impl FuseSummary {
    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Writes `<out>/<image_id>.png` for every entry plus `fuse_summary.json`.
pub fn run(opts: &FuseOptions) -> Result<FuseSummary> {
    opts.policy.validate()?;
    let m = DatasetManifest::load(&opts.manifest)?;
    let catalog = m.catalog(opts.catalog.as_deref())?;
    catalog.require_fusion_capable()?;
    prepare_out_dir(&opts.out_dir)?;

    let results = par_map(opts.jobs, &m.entries, |_, e| {
        let t = Instant::now();
        let r = (|| {
            let out = fuse_entry(&m, e, &catalog, &opts.policy)?;
            write_atomic(
                &opts.out_dir.join(format!("{}.png", e.image_id)),
                &out.fused.to_png_bytes()?,
            )?;
            Ok(FuseRecord {
                image_id: e.image_id.clone(),
                hole_fraction: out.foreground.hole_fraction(),
                segments: out.foreground.fates().len(),
                retained: out.foreground.retained(),
            })
        })();
        log::info!("fuse {} in {:.1} ms", e.image_id, t.elapsed().as_secs_f64() * 1e3);
        r.map_err(|err| Failure::new(&e.image_id, &err))
    })?;

    let mut images = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => images.push(rec),
            Err(f) => failures.push(f),
        }
    }
    let mean_hole_fraction = (!images.is_empty())
        .then(|| images.iter().map(|r| r.hole_fraction).sum::<f64>() / images.len() as f64);
    let summary = FuseSummary {
        catalog: catalog.name().to_string(),
        entries: m.entries.len(),
        images,
        failures,
        mean_hole_fraction,
    };
    write_json(&opts.out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}
