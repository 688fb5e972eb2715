//! Procedural urban layouts with automatic instance annotation.
//!
//! A scene is a stack of horizontal background bands with foreground sprites
//! standing on them. Every placed sprite gets a unique id in placement order;
//! later sprites occlude earlier ones, and each instance keeps only its
//! visible pixels, so the instance masks partition the foreground.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::label_map::LabelMap;
use crate::rle::BinaryMask;
use crate::segment::InstanceSegment;

use super::rng::SplitMix64;

/// Silhouette template in pixel units at scale 1. The origin is the anchor
/// point on the ground (bottom centre of the object); `y` points up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Disc { cx: f64, cy: f64, r: f64 },
    Union(Vec<Shape>),
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Rect { x0, y0, x1, y1 } => *x0 <= x && x < *x1 && *y0 <= y && y < *y1,
            Shape::Disc { cx, cy, r } => (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r,
            Shape::Union(parts) => parts.iter().any(|s| s.contains(x, y)),
        }
    }

    /// `(xmin, ymin, xmax, ymax)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Rect { x0, y0, x1, y1 } => (*x0, *y0, *x1, *y1),
            Shape::Disc { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
            Shape::Union(parts) => parts.iter().map(Shape::bounds).fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |a, b| (a.0.min(b.0), a.1.min(b.1), a.2.max(b.2), a.3.max(b.3)),
            ),
        }
    }

    fn check(&self, path: &str) -> Result<()> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            Shape::Rect { x0, y0, x1, y1 } => {
                if !finite(&[*x0, *y0, *x1, *y1]) || x0 >= x1 || y0 >= y1 {
                    return Err(Error::spec(path, "rect needs x0 < x1 and y0 < y1"));
                }
            }
            Shape::Disc { cx, cy, r } => {
                if !finite(&[*cx, *cy, *r]) || *r <= 0.0 {
                    return Err(Error::spec(path, "disc needs a positive radius"));
                }
            }
            Shape::Union(parts) => {
                if parts.is_empty() {
                    return Err(Error::spec(path, "union is empty"));
                }
                for (i, p) in parts.iter().enumerate() {
                    p.check(&format!("{path}.union[{i}]"))?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub class: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub class: String,
    pub count: u32,
    /// Bands the object may stand on; its base row is drawn uniformly from them.
    pub anchor: Vec<String>,
    #[serde(default = "unit_range")]
    pub scale: [f64; 2],
    /// Extra horizontal stretch applied on top of `scale`.
    #[serde(default = "unit_range")]
    pub aspect: [f64; 2],
    pub templates: Vec<Shape>,
}

fn unit_range() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub seed: u64,
    /// Top to bottom.
    pub bands: Vec<BandSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
}

/// Band and object classes resolved to ids.
#[derive(Debug, Clone)]
struct Resolved {
    band_ids: Vec<u8>,
    band_rows: Vec<(u32, u32)>,
    object_ids: Vec<u8>,
    /// Per object, indices into `band_rows`.
    anchors: Vec<Vec<usize>>,
}

impl SceneSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            Error::spec(
                e.span().map_or_else(String::new, |s| format!("byte {}", s.start)),
                e.message(),
            )
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// Per-class instance counts, by class name.
    pub fn instance_counts(&self) -> BTreeMap<String, u32> {
        let mut m = BTreeMap::new();
        for o in &self.objects {
            *m.entry(o.class.clone()).or_insert(0) += o.count;
        }
        m
    }

    pub fn validate(&self, catalog: &ClassCatalog) -> Result<()> {
        self.resolve(catalog).map(|_| ())
    }

    fn resolve(&self, catalog: &ClassCatalog) -> Result<Resolved> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::spec("width", "image must be non-empty"));
        }
        if self.bands.is_empty() {
            return Err(Error::spec("bands", "at least one band is required"));
        }
        let mut band_ids = Vec::new();
        let mut cum = 0.0;
        let mut band_rows = Vec::new();
        let mut top = 0u32;
        for (i, b) in self.bands.iter().enumerate() {
            let path = format!("bands[{i}]");
            let id = catalog.id_by_name(&b.class).ok_or_else(|| {
                Error::spec(format!("{path}.class"), format!("unknown class `{}`", b.class))
            })?;
            if !catalog.is_background(id) {
                return Err(Error::spec(
                    format!("{path}.class"),
                    "bands must be background classes",
                ));
            }
            if b.fraction.is_nan() || b.fraction < 0.0 {
                return Err(Error::spec(format!("{path}.fraction"), "must be non-negative"));
            }
            cum += b.fraction;
            let bottom = if i + 1 == self.bands.len() {
                self.height
            } else {
                ((cum * self.height as f64).round() as u32).min(self.height)
            };
            if bottom <= top {
                return Err(Error::spec(format!("{path}.fraction"), "band covers zero rows"));
            }
            band_ids.push(id);
            band_rows.push((top, bottom));
            top = bottom;
        }
        if (cum - 1.0).abs() > 1e-9 {
            return Err(Error::spec(
                "bands",
                format!("fractions sum to {cum}, expected 1"),
            ));
        }

        let mut object_ids = Vec::new();
        let mut anchors = Vec::new();
        for (i, o) in self.objects.iter().enumerate() {
            let path = format!("objects[{i}]");
            let id = catalog.id_by_name(&o.class).ok_or_else(|| {
                Error::spec(format!("{path}.class"), format!("unknown class `{}`", o.class))
            })?;
            if !catalog.is_foreground(id) {
                return Err(Error::spec(
                    format!("{path}.class"),
                    "objects must be foreground classes",
                ));
            }
            for (name, r) in [("scale", o.scale), ("aspect", o.aspect)] {
                if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                    return Err(Error::spec(format!("{path}.{name}"), "need 0 < lo <= hi"));
                }
            }
            let mut a = Vec::new();
            for (j, name) in o.anchor.iter().enumerate() {
                let k =
                    self.bands.iter().position(|b| &b.class == name).ok_or_else(|| {
                        Error::spec(format!("{path}.anchor[{j}]"), format!("no band `{name}`"))
                    })?;
                a.push(k);
            }
            if o.count > 0 && a.is_empty() {
                return Err(Error::spec(
                    format!("{path}.anchor"),
                    "at least one anchor band is required",
                ));
            }
            if o.count > 0 && o.templates.is_empty() {
                return Err(Error::spec(
                    format!("{path}.templates"),
                    "at least one template is required",
                ));
            }
            for (j, t) in o.templates.iter().enumerate() {
                t.check(&format!("{path}.templates[{j}]"))?;
            }
            object_ids.push(id);
            anchors.push(a);
        }
        Ok(Resolved {
            band_ids,
            band_rows,
            object_ids,
            anchors,
        })
    }
}

/// One annotated object. Its segment holds the visible (post-occlusion)
/// region with score 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneInstance {
    pub id: u32,
    pub segment: InstanceSegment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub gt: LabelMap,
    pub instances: Vec<SceneInstance>,
}

impl Scene {
    /// Instance counts per class id, including fully occluded instances.
    pub fn class_counts(&self) -> BTreeMap<u8, u32> {
        let mut m = BTreeMap::new();
        for i in &self.instances {
            *m.entry(i.segment.class_id).or_insert(0) += 1;
        }
        m
    }
}

pub fn generate_scene(spec: &SceneSpec, catalog: &ClassCatalog) -> Result<Scene> {
    let res = spec.resolve(catalog)?;
    let (w, h) = spec.dims();
    let (wu, hu) = (w as usize, h as usize);
    let mut rng = SplitMix64::new(spec.seed);

    let mut gt = vec![0u8; wu * hu];
    for (&id, &(top, bottom)) in res.band_ids.iter().zip(&res.band_rows) {
        gt[top as usize * wu..bottom as usize * wu].fill(id);
    }

    let mut slots: Vec<usize> = spec
        .objects
        .iter()
        .enumerate()
        .flat_map(|(i, o)| std::iter::repeat_n(i, o.count as usize))
        .collect();
    rng.shuffle(&mut slots);

    let mut owner = vec![0u32; wu * hu];
    for (k, &obj) in slots.iter().enumerate() {
        let id = k as u32 + 1;
        let o = &spec.objects[obj];
        let shape = &o.templates[rng.index(o.templates.len())];
        let s = rng.range(o.scale[0], o.scale[1]);
        let a = rng.range(o.aspect[0], o.aspect[1]);
        let (sx, sy) = (s * a, s);
        let anchors = &res.anchors[obj];
        let (top, bottom) = res.band_rows[anchors[rng.index(anchors.len())]];
        let base_row = top + rng.below((bottom - top) as u64) as u32;
        let cx = rng.range(0.0, w as f64);
        // ground line is the bottom edge of the base row
        let ground = base_row as f64 + 1.0;

        let (bx0, by0, bx1, by1) = shape.bounds();
        let px0 = ((cx + bx0 * sx).floor().max(0.0)) as u32;
        let px1 = ((cx + bx1 * sx).ceil().min(w as f64)) as u32;
        let py0 = ((ground - by1 * sy).floor().max(0.0)) as u32;
        let py1 = ((ground - by0 * sy).ceil().min(h as f64)) as u32;
        for py in py0..py1 {
            let ty = (ground - (py as f64 + 0.5)) / sy;
            for px in px0..px1 {
                let tx = (px as f64 + 0.5 - cx) / sx;
                if shape.contains(tx, ty) {
                    owner[py as usize * wu + px as usize] = id;
                }
            }
        }
    }

    let mut visible: Vec<Vec<usize>> = vec![Vec::new(); slots.len()];
    for (p, &id) in owner.iter().enumerate() {
        if id != 0 {
            let obj = slots[id as usize - 1];
            gt[p] = res.object_ids[obj];
            visible[id as usize - 1].push(p);
        }
    }

    let instances = slots
        .iter()
        .zip(visible)
        .enumerate()
        .map(|(k, (&obj, pixels))| {
            let mask = BinaryMask::from_indices(pixels, w, h);
            Ok(SceneInstance {
                id: k as u32 + 1,
                segment: InstanceSegment::new(mask, res.object_ids[obj], 1.0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Scene {
        gt: LabelMap::new(w, h, gt)?,
        instances,
    })
}
