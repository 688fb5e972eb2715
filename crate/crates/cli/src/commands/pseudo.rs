use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use segfuse::{make_pseudo_gt, FusionPolicy, PseudoCounts, PseudoSidecar};
use serde::{Deserialize, Serialize};

use super::{fuse_entry, prepare_out_dir, Failure};
use crate::io::{par_map, write_atomic, write_json};
use crate::manifest::DatasetManifest;

pub const SUMMARY_FILE: &str = "pseudo_summary.json";

#[derive(Debug, Clone)]
pub struct PseudoOptions {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub catalog: Option<String>,
    pub policy: FusionPolicy,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSummary {
    pub catalog: String,
    pub entries: usize,
    pub images: Vec<PseudoSidecar>,
    pub failures: Vec<Failure>,
    /// Pixel counts over all successful images.
    pub counts: PseudoCounts,
    pub ignore_fraction: f64,
    pub fg_fraction: f64,
}

impl PseudoSummary {
    pub fn failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Writes `<out>/<image_id>.png`, a `<image_id>.json` sidecar per entry, and
/// `pseudo_summary.json`.
pub fn run(opts: &PseudoOptions) -> Result<PseudoSummary> {
    opts.policy.validate()?;
    let m = DatasetManifest::load(&opts.manifest)?;
    let catalog = m.catalog(opts.catalog.as_deref())?;
    catalog.require_fusion_capable()?;
    prepare_out_dir(&opts.out_dir)?;

    let results = par_map(opts.jobs, &m.entries, |_, e| {
        let t = Instant::now();
        let r = (|| {
            let out = fuse_entry(&m, e, &catalog, &opts.policy)?;
            let pseudo = make_pseudo_gt(&out.foreground, &out.semantic, &catalog)?;
            let counts = PseudoCounts::of(&out.foreground, &pseudo, catalog.ignore_id());
            let sidecar = PseudoSidecar::new(&e.image_id, &counts);
            write_atomic(
                &opts.out_dir.join(format!("{}.png", e.image_id)),
                &pseudo.to_png_bytes()?,
            )?;
            write_json(&opts.out_dir.join(format!("{}.json", e.image_id)), &sidecar)?;
            Ok((sidecar, counts))
        })();
        log::info!(
            "pseudo-gt {} in {:.1} ms",
            e.image_id,
            t.elapsed().as_secs_f64() * 1e3
        );
        r.map_err(|err| Failure::new(&e.image_id, &err))
    })?;

    let mut images = Vec::new();
    let mut failures = Vec::new();
    let mut counts = PseudoCounts::default();
    for r in results {
        match r {
            Ok((side, c)) => {
                counts.add(&c);
                images.push(side);
            }
            Err(f) => failures.push(f),
        }
    }
    let summary = PseudoSummary {
        catalog: catalog.name().to_string(),
        entries: m.entries.len(),
        images,
        failures,
        ignore_fraction: counts.ignore_fraction(),
        fg_fraction: counts.fg_fraction(),
        counts,
    };
    write_json(&opts.out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}
