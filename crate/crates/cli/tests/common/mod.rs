#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use segfuse::FusionPolicy;
use segfuse_cli::commands::{eval, fuse, pseudo, simulate};
use sha2::{Digest, Sha256};

pub fn simulate_opts(
    out: &Path,
    n: usize,
    seed: u64,
    scene: &str,
    corruption: &str,
) -> simulate::SimulateOptions {
    simulate::SimulateOptions {
        out_dir: out.to_path_buf(),
        n_scenes: n,
        seed: Some(seed),
        scene: simulate::SpecSource::Preset(scene.into()),
        corruption: simulate::SpecSource::Preset(corruption.into()),
        catalog: "cityscapes19".into(),
        semantic_format: simulate::SemanticFormat::Probs,
        jobs: 2,
    }
}

pub fn fuse_opts(manifest: &Path, out: &Path) -> fuse::FuseOptions {
    fuse::FuseOptions {
        manifest: manifest.to_path_buf(),
        out_dir: out.to_path_buf(),
        catalog: None,
        policy: FusionPolicy::default(),
        jobs: 2,
    }
}

pub fn pseudo_opts(manifest: &Path, out: &Path) -> pseudo::PseudoOptions {
    pseudo::PseudoOptions {
        manifest: manifest.to_path_buf(),
        out_dir: out.to_path_buf(),
        catalog: None,
        policy: FusionPolicy::default(),
        jobs: 2,
    }
}

pub fn eval_opts(manifest: &Path, pred: &Path, out: &Path) -> eval::EvalOptions {
    eval::EvalOptions {
        manifest: manifest.to_path_buf(),
        pred_dir: pred.to_path_buf(),
        out_dir: out.to_path_buf(),
        catalog: None,
        remap: None,
        require: Vec::new(),
        jobs: 2,
    }
}

/// Relative path -> SHA-256 of every file below `root`.
pub fn tree_hashes(root: &Path) -> BTreeMap<PathBuf, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, String>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let digest = Sha256::digest(fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), hex);
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// One digest over the whole tree, names included.
pub fn tree_hash(root: &Path) -> String {
    let mut h = Sha256::new();
    for (p, d) in tree_hashes(root) {
        h.update(p.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(d.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_manifest(path: &Path, catalog: &str, entries: serde_json::Value) {
    let body = serde_json::json!({ "catalog": catalog, "entries": entries });
    fs::write(path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
}
