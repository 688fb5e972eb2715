use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use segfuse::sim::{
    generate_scene, presets, simulate_instances, simulate_semantic, simulate_semantic_labels, CorruptionSpec,
    SceneSpec, SplitMix64,
};
use segfuse::{ClassCatalog, SegmentManifest};
use serde::{Deserialize, Serialize};

use crate::io::{par_map, write_atomic};
use crate::manifest::{DatasetManifest, ManifestEntry, MANIFEST_FILE};

#[derive(Debug, Clone)]
pub enum SpecSource {
    Preset(String),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SemanticFormat {
    /// `probs/<id>.pvol` probability volumes.
    #[default]
    Probs,
    /// `semantic/<id>.png` argmax label maps.
    Labels,
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub out_dir: PathBuf,
    pub n_scenes: usize,
    /// Overrides the scene spec's own seed.
    pub seed: Option<u64>,
    pub scene: SpecSource,
    pub corruption: SpecSource,
    pub catalog: String,
    pub semantic_format: SemanticFormat,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub scenes: usize,
    pub seed: u64,
    /// Ground-truth instances per class over all scenes.
    pub instance_counts: BTreeMap<String, u32>,
}

pub fn load_scene(src: &SpecSource) -> Result<SceneSpec> {
    match src {
        SpecSource::Preset(n) => {
            presets::scene_by_name(n).with_context(|| format!("unknown scene preset `{n}`"))
        }
        SpecSource::File(p) => {
            SceneSpec::load(p).with_context(|| format!("loading scene spec {}", p.display()))
        }
    }
}

pub fn load_corruption(src: &SpecSource) -> Result<CorruptionSpec> {
    match src {
        SpecSource::Preset(n) => {
            presets::corruption_by_name(n).with_context(|| format!("unknown corruption preset `{n}`"))
        }
        SpecSource::File(p) => {
            CorruptionSpec::load(p).with_context(|| format!("loading corruption spec {}", p.display()))
        }
    }
}

/// Seeds of scene `i`: layout, semantic corruption, instance corruption.
pub fn scene_seeds(base: u64, i: usize) -> [u64; 3] {
    [0, 1, 2].map(|k| SplitMix64::derive_seed(base, &[i as u64, k]))
}

pub fn image_id(i: usize) -> String {
    format!("{i:06}")
}

fn make_dirs(out: &Path, format: SemanticFormat) -> Result<()> {
    let sem = match format {
        SemanticFormat::Probs => "probs",
        SemanticFormat::Labels => "semantic",
    };
    for d in ["gt", "segments", sem] {
        let p = out.join(d);
        fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(())
}

/// Writes `gt/`, `segments/`, `probs/` (or `semantic/`) and a
/// `manifest.json` listing every scene with its instance counts.
pub fn run(opts: &SimulateOptions) -> Result<SimulateSummary> {
    let catalog = ClassCatalog::by_name(&opts.catalog)?;
    let spec = load_scene(&opts.scene)?;
    let corruption = load_corruption(&opts.corruption)?;
    spec.validate(&catalog)?;
    corruption.validate(&catalog)?;
    catalog.require_fusion_capable()?;
    let base = opts.seed.unwrap_or(spec.seed);
    make_dirs(&opts.out_dir, opts.semantic_format)?;

    let indices: Vec<usize> = (0..opts.n_scenes).collect();
    let entries = par_map(opts.jobs, &indices, |_, &i| -> Result<ManifestEntry> {
        let t = Instant::now();
        let id = image_id(i);
        let [s_scene, s_sem, s_inst] = scene_seeds(base, i);
        let scene = generate_scene(
            &SceneSpec {
                seed: s_scene,
                ..spec.clone()
            },
            &catalog,
        )?;
        let gt_rel = format!("gt/{id}.png");
        write_atomic(&opts.out_dir.join(&gt_rel), &scene.gt.to_png_bytes()?)?;

        let semantic = match opts.semantic_format {
            SemanticFormat::Probs => {
                let v = simulate_semantic(&scene.gt, &scene.instances, &catalog, &corruption, s_sem)?;
                let rel = format!("probs/{id}.pvol");
                let mut buf = Vec::new();
                v.write(&mut buf)?;
                write_atomic(&opts.out_dir.join(&rel), &buf)?;
                rel
            }
            SemanticFormat::Labels => {
                let l = simulate_semantic_labels(&scene.gt, &scene.instances, &catalog, &corruption, s_sem)?;
                let rel = format!("semantic/{id}.png");
                write_atomic(&opts.out_dir.join(&rel), &l.to_png_bytes()?)?;
                rel
            }
        };

        let segments = simulate_instances(&scene.instances, spec.dims(), &catalog, &corruption, s_inst)?;
        let sm = SegmentManifest {
            image_id: id.clone(),
            width: spec.width,
            height: spec.height,
            segments,
        };
        let seg_rel = format!("segments/{id}.json");
        let mut json = sm.to_json()?;
        json.push('\n');
        write_atomic(&opts.out_dir.join(&seg_rel), json.as_bytes())?;

        let instance_counts = scene
            .class_counts()
            .into_iter()
            .map(|(c, n)| (catalog.get(c).expect("scene class").name.clone(), n))
            .collect();
        log::info!("simulate {id} in {:.1} ms", t.elapsed().as_secs_f64() * 1e3);
        Ok(ManifestEntry {
            image_id: id,
            gt: Some(gt_rel),
            semantic,
            segments: Some(seg_rel),
            instance_counts,
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut instance_counts = BTreeMap::new();
    for e in &entries {
        for (c, n) in &e.instance_counts {
            *instance_counts.entry(c.clone()).or_insert(0) += n;
        }
    }
    DatasetManifest::save(&opts.out_dir.join(MANIFEST_FILE), catalog.name(), entries)?;
    Ok(SimulateSummary {
        scenes: opts.n_scenes,
        seed: base,
        instance_counts,
    })
}
