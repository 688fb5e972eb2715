//! Semantic class universes.
//!
//! A [`ClassCatalog`] lists the class ids a label map may contain, the role
//! each class plays (shape-defined foreground "things" versus texture-defined
//! background "stuff"), and the sentinel id used for pixels that are excluded
//! from training and evaluation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ignore id used by the bundled catalogs.
pub const DEFAULT_IGNORE_ID: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Foreground,
    Background,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Foreground => f.write_str("foreground"),
            Role::Background => f.write_str("background"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub id: u8,
    pub name: String,
    pub role: Role,
}

/// An ordered set of classes plus an ignore sentinel.
///
/// Entry order defines channel order in probability volumes and row/column
/// order in confusion matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCatalog {
    name: String,
    entries: Vec<ClassEntry>,
    ignore_id: u8,
    index: [Option<u8>; 256],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    name: Option<String>,
    #[serde(default = "default_ignore")]
    ignore_id: u8,
    classes: Vec<ClassEntry>,
}

fn default_ignore() -> u8 {
    DEFAULT_IGNORE_ID
}

const CITYSCAPES: [(&str, Role); 19] = [
    ("road", Role::Background),
    ("sidewalk", Role::Background),
    ("building", Role::Background),
    ("wall", Role::Background),
    ("fence", Role::Background),
    ("pole", Role::Background),
    ("traffic light", Role::Foreground),
    ("traffic sign", Role::Foreground),
    ("vegetation", Role::Background),
    ("terrain", Role::Background),
    ("sky", Role::Background),
    ("person", Role::Foreground),
    ("rider", Role::Foreground),
    ("car", Role::Foreground),
    ("truck", Role::Foreground),
    ("bus", Role::Foreground),
    ("train", Role::Foreground),
    ("motorcycle", Role::Foreground),
    ("bicycle", Role::Foreground),
];

const CAMVID: [(&str, Role); 11] = [
    ("building", Role::Background),
    ("vegetation", Role::Background),
    ("sky", Role::Background),
    ("car", Role::Foreground),
    ("sign", Role::Foreground),
    ("road", Role::Background),
    ("pedestrian", Role::Foreground),
    ("fence", Role::Background),
    ("pole", Role::Background),
    ("sidewalk", Role::Background),
    ("cyclist", Role::Foreground),
];

impl ClassCatalog {
    pub fn new(name: impl Into<String>, entries: Vec<ClassEntry>, ignore_id: u8) -> Result<Self> {
        let mut index = [None; 256];
        for (i, e) in entries.iter().enumerate() {
            if e.id == ignore_id {
                return Err(Error::Catalog(format!(
                    "class `{}` uses the ignore id {ignore_id}",
                    e.name
                )));
            }
            if index[e.id as usize].is_some() {
                return Err(Error::Catalog(format!("duplicate class id {}", e.id)));
            }
            index[e.id as usize] = Some(i as u8);
        }
        if entries.is_empty() {
            return Err(Error::Catalog("catalog has no classes".into()));
        }
        Ok(Self {
            name: name.into(),
            entries,
            ignore_id,
            index,
        })
    }

    /// The 19 Cityscapes evaluation classes in train-id order (road=0 … bicycle=18).
    pub fn cityscapes19() -> Self {
        Self::bundled("cityscapes19", &CITYSCAPES)
    }

    /// The 11-class CamVid subset.
    pub fn camvid11() -> Self {
        Self::bundled("camvid11", &CAMVID)
    }

    fn bundled(name: &str, table: &[(&str, Role)]) -> Self {
        let entries = table
            .iter()
            .enumerate()
            .map(|(i, (n, r))| ClassEntry {
                id: i as u8,
                name: (*n).to_string(),
                role: *r,
            })
            .collect();
        Self::new(name, entries, DEFAULT_IGNORE_ID).expect("bundled catalog is valid")
    }

    /// Parses a catalog from TOML:
    ///
    /// ```toml
    /// name = "mini"
    /// ignore_id = 255
    /// classes = [
    ///   { id = 0, name = "road", role = "background" },
    ///   { id = 1, name = "car", role = "foreground" },
    /// ]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: CatalogFile = toml::from_str(text)?;
        Self::new(
            file.name.unwrap_or_else(|| "custom".into()),
            file.classes,
            file.ignore_id,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Resolves `cityscapes19`, `camvid11` or `custom:<path>`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "cityscapes19" => Ok(Self::cityscapes19()),
            "camvid11" => Ok(Self::camvid11()),
            other => match other.strip_prefix("custom:") {
                Some(path) => Self::load(Path::new(path)),
                None => Err(Error::Catalog(format!("unknown catalog `{other}`"))),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ignore_id(&self) -> u8 {
        self.ignore_id
    }

    /// Position of `id` in entry order.
    #[inline]
    pub fn index_of(&self, id: u8) -> Option<usize> {
        self.index[id as usize].map(usize::from)
    }

    pub fn contains(&self, id: u8) -> bool {
        self.index[id as usize].is_some()
    }

    pub fn get(&self, id: u8) -> Option<&ClassEntry> {
        self.index_of(id).map(|i| &self.entries[i])
    }

    pub fn role(&self, id: u8) -> Option<Role> {
        self.get(id).map(|e| e.role)
    }

    pub fn is_foreground(&self, id: u8) -> bool {
        self.role(id) == Some(Role::Foreground)
    }

    pub fn is_background(&self, id: u8) -> bool {
        self.role(id) == Some(Role::Background)
    }

    pub fn id_by_name(&self, name: &str) -> Option<u8> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn ids_with_role(&self, role: Role) -> impl Iterator<Item = u8> + '_ {
        self.entries.iter().filter(move |e| e.role == role).map(|e| e.id)
    }

    /// Fusion needs at least one class of each role.
    pub fn require_fusion_capable(&self) -> Result<()> {
        for role in [Role::Foreground, Role::Background] {
            if self.ids_with_role(role).next().is_none() {
                return Err(Error::Catalog(format!(
                    "catalog `{}` has no {role} class",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Lookup table from class id to role, with `None` for unknown ids.
    pub(crate) fn role_table(&self) -> [Option<Role>; 256] {
        let mut table = [None; 256];
        for e in &self.entries {
            table[e.id as usize] = Some(e.role);
        }
        table
    }
}
