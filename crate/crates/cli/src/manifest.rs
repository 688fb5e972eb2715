use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use segfuse::{ClassCatalog, InstanceSegment, LabelMap, ProbVolume, SegmentManifest};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<String>,
    /// A `.pvol` probability volume or a `.png` label map.
    pub semantic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<String>,
    /// Ground-truth instances per class name, written by `simulate`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub instance_counts: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub catalog: String,
    pub entries: Vec<ManifestEntry>,
}

/// A dataset listing. Entry paths are relative to `root`, the directory
/// holding the manifest file.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub catalog_name: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Reads a manifest and checks that image ids are unique and every
    /// referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let file: ManifestFile =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self {
            root,
            catalog_name: file.catalog,
            entries: file.entries,
        };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.image_id.is_empty() || e.image_id.contains(['/', '\\']) {
                bail!("invalid image id `{}`", e.image_id);
            }
            if !seen.insert(&e.image_id) {
                bail!("duplicate image id `{}`", e.image_id);
            }
            for rel in std::iter::once(&e.semantic).chain(&e.gt).chain(&e.segments) {
                let p = self.root.join(rel);
                if !p.is_file() {
                    bail!("entry `{}` references missing file {}", e.image_id, p.display());
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn catalog(&self, override_name: Option<&str>) -> Result<ClassCatalog> {
        let name = override_name.unwrap_or(&self.catalog_name);
        ClassCatalog::by_name(name).with_context(|| format!("loading catalog `{name}`"))
    }

    pub fn save(path: &Path, catalog: &str, entries: Vec<ManifestEntry>) -> Result<()> {
        let file = ManifestFile {
            catalog: catalog.to_string(),
            entries,
        };
        crate::io::write_atomic(path, serde_json::to_string_pretty(&file)?.as_bytes())
    }
}

/// Dense input of one entry.
pub enum Semantic {
    Probs(ProbVolume),
    Labels(LabelMap),
}

impl Semantic {
    pub fn as_source(&self) -> segfuse::SemanticSource<'_> {
        match self {
            Semantic::Probs(p) => segfuse::SemanticSource::Probs(p),
            Semantic::Labels(l) => segfuse::SemanticSource::Labels(l),
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        self.as_source().dims()
    }
}

impl ManifestEntry {
    pub fn load_semantic(&self, m: &DatasetManifest) -> Result<Semantic> {
        let p = m.resolve(&self.semantic);
        let is_png = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        Ok(if is_png {
            Semantic::Labels(LabelMap::load_png(&p).with_context(|| format!("reading {}", p.display()))?)
        } else {
            Semantic::Probs(ProbVolume::load(&p).with_context(|| format!("reading {}", p.display()))?)
        })
    }

    /// Segments of this entry; an entry without a segments file has none.
    pub fn load_segments(&self, m: &DatasetManifest, dims: (u32, u32)) -> Result<Vec<InstanceSegment>> {
        let Some(rel) = &self.segments else {
            return Ok(Vec::new());
        };
        let p = m.resolve(rel);
        let sm = SegmentManifest::load(&p).with_context(|| format!("reading {}", p.display()))?;
        if sm.image_id != self.image_id {
            bail!("segment file {} is for image `{}`", p.display(), sm.image_id);
        }
        if sm.dims() != dims {
            bail!(
                "segments are {}x{} but the semantic prediction is {}x{}",
                sm.width,
                sm.height,
                dims.0,
                dims.1
            );
        }
        Ok(sm.segments)
    }

    pub fn load_gt(&self, m: &DatasetManifest) -> Result<LabelMap> {
        let Some(rel) = &self.gt else {
            bail!("entry `{}` has no ground truth", self.image_id);
        };
        let p = m.resolve(rel);
        LabelMap::load_png(&p).with_context(|| format!("reading {}", p.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn rejects_duplicates_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.png", "");
        let dup = write(
            dir.path(),
            "dup.json",
            r#"{"catalog":"cityscapes19","entries":[
                {"image_id":"x","semantic":"a.png"},{"image_id":"x","semantic":"a.png"}]}"#,
        );
        assert!(DatasetManifest::load(&dup)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        let missing = write(
            dir.path(),
            "missing.json",
            r#"{"catalog":"cityscapes19","entries":[{"image_id":"x","semantic":"b.png"}]}"#,
        );
        assert!(DatasetManifest::load(&missing)
            .unwrap_err()
            .to_string()
            .contains("missing"));
        let unknown = write(
            dir.path(),
            "unknown.json",
            r#"{"catalog":"cityscapes19","entries":[],"extra":1}"#,
        );
        assert!(DatasetManifest::load(&unknown).is_err());
        let ok = write(
            dir.path(),
            "ok.json",
            r#"{"catalog":"camvid11","entries":[{"image_id":"x","semantic":"a.png"}]}"#,
        );
        let m = DatasetManifest::load(&ok).unwrap();
        assert_eq!(m.catalog(None).unwrap().len(), 11);
        assert_eq!(m.catalog(Some("cityscapes19")).unwrap().len(), 19);
    }
}
