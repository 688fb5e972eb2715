//! Pseudo ground truth for self-training on unlabeled images.
//!
//! Same as the fused map, except that hole pixels whose semantic prediction is
//! a foreground class become ignore: inside holes only background predictions
//! of the dense network are trusted.

use serde::{Deserialize, Serialize};

use crate::catalog::{ClassCatalog, Role};
use crate::error::{Error, Result};
use crate::fusion::ForegroundMap;
use crate::label_map::LabelMap;

pub fn make_pseudo_gt(fg: &ForegroundMap, semantic: &LabelMap, catalog: &ClassCatalog) -> Result<LabelMap> {
    semantic.ensure_dims(fg.dims())?;
    let roles = catalog.role_table();
    let ignore = catalog.ignore_id();
    let mut out = fg.labels().data().to_vec();
    for (i, (o, &s)) in out.iter_mut().zip(semantic.data()).enumerate() {
        if !fg.is_hole(i) {
            continue;
        }
        *o = match roles[s as usize] {
            Some(Role::Background) => s,
            Some(Role::Foreground) => ignore,
            None => {
                return Err(Error::Catalog(format!(
                    "semantic label {s} at pixel {i} is not in catalog `{}`",
                    catalog.name()
                )))
            }
        };
    }
    LabelMap::new(semantic.width(), semantic.height(), out)
}

/// Pixel accounting of one pseudo-GT map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoCounts {
    pub fg_assigned: u64,
    pub bg_filled: u64,
    pub ignored: u64,
}

impl PseudoCounts {
    pub fn of(fg: &ForegroundMap, pseudo: &LabelMap, ignore_id: u8) -> Self {
        let mut c = PseudoCounts::default();
        for (i, &v) in pseudo.data().iter().enumerate() {
            if !fg.is_hole(i) {
                c.fg_assigned += 1;
            } else if v == ignore_id {
                c.ignored += 1;
            } else {
                c.bg_filled += 1;
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.fg_assigned + self.bg_filled + self.ignored
    }

    pub fn add(&mut self, other: &PseudoCounts) {
        self.fg_assigned += other.fg_assigned;
        self.bg_filled += other.bg_filled;
        self.ignored += other.ignored;
    }

    pub fn ignore_fraction(&self) -> f64 {
        ratio(self.ignored, self.total())
    }

    pub fn fg_fraction(&self) -> f64 {
        ratio(self.fg_assigned, self.total())
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// JSON sidecar written next to each pseudo-GT label map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoSidecar {
    pub image_id: String,
    pub ignore_fraction: f64,
    pub fg_fraction: f64,
}

impl PseudoSidecar {
    pub fn new(image_id: impl Into<String>, counts: &PseudoCounts) -> Self {
        Self {
            image_id: image_id.into(),
            ignore_fraction: counts.ignore_fraction(),
            fg_fraction: counts.fg_fraction(),
        }
    }
}
