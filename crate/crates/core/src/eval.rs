//! Per-class IoU evaluation from an accumulated confusion matrix.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::{ClassCatalog, Role};
use crate::error::{Error, Result};
use crate::label_map::LabelMap;

/// Pixel counts indexed `[gt][pred]` by catalog entry position.
/// Ground-truth ignore pixels are never counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, gt: usize) -> u64 {
        self.counts[gt * self.classes..(gt + 1) * self.classes]
            .iter()
            .sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..self.classes).map(|g| self.get(g, pred)).sum()
    }

    /// Adds one image's pixel pairs.
    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap, catalog: &ClassCatalog) -> Result<()> {
        if catalog.len() != self.classes {
            return Err(Error::Catalog(format!(
                "matrix has {} classes, catalog `{}` has {}",
                self.classes,
                catalog.name(),
                catalog.len()
            )));
        }
        pred.ensure_dims(gt.dims())?;
        let mut index = [u16::MAX; 256];
        for (i, e) in catalog.entries().iter().enumerate() {
            index[e.id as usize] = i as u16;
        }
        let ignore = catalog.ignore_id();
        for (px, (&g, &p)) in gt.data().iter().zip(pred.data()).enumerate() {
            if g == ignore {
                continue;
            }
            let gi = index[g as usize];
            let pi = index[p as usize];
            if gi == u16::MAX || pi == u16::MAX {
                let bad = if gi == u16::MAX { g } else { p };
                let which = if gi == u16::MAX {
                    "ground truth"
                } else {
                    "prediction"
                };
                return Err(Error::Catalog(format!(
                    "{which} label {bad} at pixel {px} is not in catalog `{}`",
                    catalog.name()
                )));
            }
            self.counts[gi as usize * self.classes + pi as usize] += 1;
        }
        Ok(())
    }

    /// Element-wise sum.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::size(self.classes, other.classes));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

pub fn confusion(pred: &LabelMap, gt: &LabelMap, catalog: &ClassCatalog) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::zeros(catalog.len());
    cm.accumulate(pred, gt, catalog)?;
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub class_id: u8,
    pub name: String,
    pub role: Role,
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    /// `None` when the class appears in neither ground truth nor prediction.
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub catalog: String,
    pub per_class: Vec<ClassIou>,
    pub miou: f64,
    pub fg_miou: Option<f64>,
    pub bg_miou: Option<f64>,
    pub pixel_accuracy: f64,
    pub pixels: u64,
}

impl EvalReport {
    pub fn iou(&self, class_id: u8) -> Option<f64> {
        self.per_class
            .iter()
            .find(|c| c.class_id == class_id)
            .and_then(|c| c.iou)
    }

    pub fn undefined_classes(&self) -> impl Iterator<Item = &ClassIou> {
        self.per_class.iter().filter(|c| c.iou.is_none())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text table: one column per class in catalog order, then mIoU.
    /// Values are percentages with one decimal; undefined classes print `-`.
    pub fn to_table(&self) -> String {
        let cols: Vec<(String, String)> = self
            .per_class
            .iter()
            .map(|c| {
                let v = c
                    .iou
                    .map_or_else(|| "-".to_string(), |v| format!("{:.1}", v * 100.0));
                let head = if c.role == Role::Foreground {
                    format!("{}*", c.name)
                } else {
                    c.name.clone()
                };
                (head, v)
            })
            .chain(std::iter::once((
                "mIoU".to_string(),
                format!("{:.1}", self.miou * 100.0),
            )))
            .collect();
        let mut header = String::new();
        let mut row = String::new();
        for (h, v) in &cols {
            let w = h.len().max(v.len());
            let _ = write!(header, "{h:>w$} ");
            let _ = write!(row, "{v:>w$} ");
        }
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", v * 100.0));
        let mut out = String::new();
        let _ = writeln!(out, "{}", header.trim_end());
        let _ = writeln!(out, "{}", row.trim_end());
        let _ = writeln!(
            out,
            "foreground mIoU {}  background mIoU {}  pixel accuracy {:.1}  pixels {}",
            fmt(self.fg_miou),
            fmt(self.bg_miou),
            self.pixel_accuracy * 100.0,
            self.pixels
        );
        let _ = writeln!(out, "(* foreground class; - undefined, excluded from means)");
        out.push_str(&reference::footer(&self.catalog));
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn iou_report(cm: &ConfusionMatrix, catalog: &ClassCatalog) -> Result<EvalReport> {
    if cm.classes() != catalog.len() {
        return Err(Error::Catalog(format!(
            "matrix has {} classes, catalog `{}` has {}",
            cm.classes(),
            catalog.name(),
            catalog.len()
        )));
    }
    let per_class: Vec<ClassIou> = catalog
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let tp = cm.get(i, i);
            let fp = cm.col_sum(i) - tp;
            let fn_ = cm.row_sum(i) - tp;
            let union = tp + fp + fn_;
            ClassIou {
                class_id: e.id,
                name: e.name.clone(),
                role: e.role,
                true_positive: tp,
                false_positive: fp,
                false_negative: fn_,
                iou: (union > 0).then(|| tp as f64 / union as f64),
            }
        })
        .collect();
    let miou = mean(per_class.iter().filter_map(|c| c.iou)).ok_or(Error::EmptyEvaluation)?;
    let role_mean = |role| mean(per_class.iter().filter(|c| c.role == role).filter_map(|c| c.iou));
    let total = cm.total();
    Ok(EvalReport {
        catalog: catalog.name().to_string(),
        fg_miou: role_mean(Role::Foreground),
        bg_miou: role_mean(Role::Background),
        per_class,
        miou,
        pixel_accuracy: if total == 0 {
            0.0
        } else {
            cm.trace() as f64 / total as f64
        },
        pixels: total,
    })
}

/// Single-pass class substitution applied to predictions before scoring.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Remapping {
    table: BTreeMap<u8, u8>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RemapFile {
    #[serde(default)]
    rules: Vec<RemapRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RemapRule {
    from: u8,
    to: u8,
}

impl Remapping {
    /// Every target must be a class of `target` or its ignore id.
    pub fn new(pairs: impl IntoIterator<Item = (u8, u8)>, target: &ClassCatalog) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (from, to) in pairs {
            if to != target.ignore_id() && !target.contains(to) {
                return Err(Error::Catalog(format!(
                    "remap target {to} is not in catalog `{}`",
                    target.name()
                )));
            }
            if table.insert(from, to).is_some() {
                return Err(Error::Catalog(format!("class {from} is remapped twice")));
            }
        }
        Ok(Self { table })
    }

    /// Checks every source id belongs to `source`.
    pub fn check_domain(&self, source: &ClassCatalog) -> Result<()> {
        match self.table.keys().find(|&&k| !source.contains(k)) {
            Some(k) => Err(Error::Catalog(format!(
                "remap source {k} is not in catalog `{}`",
                source.name()
            ))),
            None => Ok(()),
        }
    }

    /// ```toml
    /// rules = [ { from = 19, to = 5 } ]
    /// ```
    pub fn from_toml_str(text: &str, target: &ClassCatalog) -> Result<Self> {
        let file: RemapFile = toml::from_str(text)?;
        Self::new(file.rules.into_iter().map(|r| (r.from, r.to)), target)
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, from: u8) -> Option<u8> {
        self.table.get(&from).copied()
    }
}

pub fn remap_labels(pred: &LabelMap, mapping: &Remapping) -> LabelMap {
    let mut lut = [0u8; 256];
    for (i, v) in lut.iter_mut().enumerate() {
        *v = mapping.get(i as u8).unwrap_or(i as u8);
    }
    let data = pred.data().iter().map(|&v| lut[v as usize]).collect();
    LabelMap::new(pred.width(), pred.height(), data).expect("same size")
}

/// Published full-scale results obtained with trained networks on licensed
/// data. They cannot be reproduced by this crate and are kept for reference
/// in reports only. Values are IoU percentages in catalog order.
pub mod reference {
    use std::fmt::Write as _;

    #[derive(Debug, Clone, Copy)]
    pub struct ReferenceRow {
        pub method: &'static str,
        pub per_class: &'static [f64],
        pub miou: f64,
    }

    /// Cityscapes validation, 19 classes, models trained on synthetic data.
    pub const CITYSCAPES_VAL: [ReferenceRow; 3] = [
        ReferenceRow {
            method: "segmentation only (GTA5+VEIS)",
            per_class: &[
                66.2, 21.6, 72.3, 15.7, 18.3, 12.3, 22.3, 23.8, 78.4, 11.3, 74.6, 48.7, 13.3, 75.1, 14.3,
                21.2, 2.1, 24.2, 7.3,
            ],
            miou: 32.8,
        },
        ReferenceRow {
            method: "detection + segmentation fusion",
            per_class: &[
                71.9, 23.8, 75.5, 23.4, 14.9, 9.3, 26.7, 42.5, 80.1, 34.0, 76.3, 52.2, 28.5, 76.2, 19.6,
                31.6, 6.9, 18.1, 9.8,
            ],
            miou: 38.0,
        },
        ReferenceRow {
            method: "fusion + pseudo-GT self-training",
            per_class: &[
                79.8, 29.3, 77.8, 24.2, 21.6, 6.9, 23.5, 44.2, 80.5, 38.0, 76.2, 52.7, 22.2, 83.0, 32.3,
                41.3, 27.0, 19.3, 27.7,
            ],
            miou: 42.5,
        },
    ];

    /// CamVid, 11 classes.
    pub const CAMVID: [ReferenceRow; 2] = [
        ReferenceRow {
            method: "detection + segmentation fusion",
            per_class: &[66.3, 55.0, 61.9, 73.4, 37.4, 82.7, 41.4, 23.9, 9.2, 57.7, 14.9],
            miou: 47.6,
        },
        ReferenceRow {
            method: "fusion + pseudo-GT self-training",
            per_class: &[72.3, 55.2, 72.6, 73.1, 37.4, 83.9, 39.9, 33.2, 1.2, 55.5, 12.8],
            miou: 48.8,
        },
    ];

    pub fn rows_for(catalog: &str) -> &'static [ReferenceRow] {
        match catalog {
            "cityscapes19" => &CITYSCAPES_VAL,
            "camvid11" => &CAMVID,
            _ => &[],
        }
    }

    pub(crate) fn footer(catalog: &str) -> String {
        let rows = rows_for(catalog);
        if rows.is_empty() {
            return String::new();
        }
        let mut s = String::from(
            "reference mIoU with trained networks on real validation data (not reproducible here):\n",
        );
        for r in rows {
            let _ = writeln!(s, "  {:<34} {:.1}", r.method, r.miou);
        }
        s
    }
}
