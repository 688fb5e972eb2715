//! Corruption models standing in for trained networks.
//!
//! The semantic model keeps object shapes but may relabel a whole object as a
//! confusable class, which is how texture-driven segmentation fails under
//! domain shift. The instance model keeps every surviving object's class and
//! only degrades its outline, drops some objects and adds a few false ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{ClassCatalog, Role};
use crate::error::{Error, Result};
use crate::label_map::LabelMap;
use crate::prob::ProbVolume;
use crate::rle::BinaryMask;
use crate::segment::InstanceSegment;

use super::rng::SplitMix64;
use super::scene::SceneInstance;

/// Weight given to each non-winning channel is `u * OFF_CLASS_WEIGHT` with
/// `u` uniform in `[0, 1)`; the winning channel gets 1 before normalization.
pub const OFF_CLASS_WEIGHT: f64 = 0.02;

/// Default confusable-class table, by class name.
pub const DEFAULT_CONFUSIONS: &[(&str, &[&str])] = &[
    ("car", &["truck", "bus"]),
    ("truck", &["car", "bus"]),
    ("bus", &["car", "truck", "train"]),
    ("train", &["bus"]),
    ("person", &["rider"]),
    ("rider", &["person"]),
    ("motorcycle", &["bicycle"]),
    ("bicycle", &["motorcycle"]),
    ("traffic light", &["traffic sign"]),
    ("traffic sign", &["traffic light"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticCorruption {
    /// Probability that an object is relabeled as a confusable class.
    #[serde(default)]
    pub fg_confusion: f64,
    /// Per-class overrides of `fg_confusion`, by class name.
    #[serde(default)]
    pub fg_confusion_per_class: BTreeMap<String, f64>,
    /// Rounds of random boundary growth/shrinkage, in pixels.
    #[serde(default)]
    pub boundary_jitter: u32,
    /// Per-pixel probability that a background pixel takes another background class.
    #[serde(default)]
    pub bg_noise: f64,
    /// Replaces the default confusable table when present.
    #[serde(default)]
    pub confusions: Option<BTreeMap<String, Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceCorruption {
    #[serde(default)]
    pub miss_rate: f64,
    /// Mean of the Poisson number of false segments per image.
    #[serde(default)]
    pub spurious_rate: f64,
    #[serde(default)]
    pub mask_jitter: u32,
    /// Standard deviation of the gaussian noise added to the true IoU score.
    #[serde(default)]
    pub score_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub semantic: SemanticCorruption,
    pub instance: InstanceCorruption,
}

impl CorruptionSpec {
    /// No corruption at all: the simulated networks reproduce ground truth.
    pub fn identity() -> Self {
        Self {
            semantic: SemanticCorruption {
                fg_confusion: 0.0,
                fg_confusion_per_class: BTreeMap::new(),
                boundary_jitter: 0,
                bg_noise: 0.0,
                confusions: None,
            },
            instance: InstanceCorruption {
                miss_rate: 0.0,
                spurious_rate: 0.0,
                mask_jitter: 0,
                score_noise: 0.0,
            },
        }
    }

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

    pub fn validate(&self, catalog: &ClassCatalog) -> Result<()> {
        self.resolve(catalog).map(|_| ())
    }

    fn resolve(&self, catalog: &ClassCatalog) -> Result<Resolved> {
        let prob = |path: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::spec(path, format!("{v} is not a probability")))
            }
        };
        let s = &self.semantic;
        let i = &self.instance;
        prob("semantic.fg_confusion", s.fg_confusion)?;
        prob("semantic.bg_noise", s.bg_noise)?;
        prob("instance.miss_rate", i.miss_rate)?;
        if !(i.spurious_rate >= 0.0 && i.spurious_rate <= 100.0) {
            return Err(Error::spec("instance.spurious_rate", "must be in [0, 100]"));
        }
        if !(i.score_noise >= 0.0 && i.score_noise.is_finite()) {
            return Err(Error::spec("instance.score_noise", "must be non-negative"));
        }

        let fg_id = |path: String, name: &str| -> Result<u8> {
            match catalog.id_by_name(name) {
                Some(id) if catalog.is_foreground(id) => Ok(id),
                Some(_) => Err(Error::spec(path, format!("`{name}` is not a foreground class"))),
                None => Err(Error::spec(path, format!("unknown class `{name}`"))),
            }
        };

        let mut flip_prob = [0.0; 256];
        for id in catalog.ids_with_role(Role::Foreground) {
            flip_prob[id as usize] = s.fg_confusion;
        }
        for (name, &p) in &s.fg_confusion_per_class {
            let path = format!("semantic.fg_confusion_per_class.{name}");
            prob(&path, p)?;
            flip_prob[fg_id(path, name)? as usize] = p;
        }

        let mut confusable: Vec<Vec<u8>> = vec![Vec::new(); 256];
        match &s.confusions {
            Some(table) => {
                for (from, tos) in table {
                    let path = format!("semantic.confusions.{from}");
                    let f = fg_id(path.clone(), from)?;
                    for (k, to) in tos.iter().enumerate() {
                        confusable[f as usize].push(fg_id(format!("{path}[{k}]"), to)?);
                    }
                }
            }
            None => {
                // default entries naming classes outside the catalog are skipped
                for (from, tos) in DEFAULT_CONFUSIONS {
                    if let Some(f) = catalog.id_by_name(from).filter(|&f| catalog.is_foreground(f)) {
                        confusable[f as usize] = tos
                            .iter()
                            .filter_map(|t| catalog.id_by_name(t))
                            .filter(|&t| catalog.is_foreground(t))
                            .collect();
                    }
                }
            }
        }

        Ok(Resolved {
            flip_prob,
            confusable,
            background: catalog.ids_with_role(Role::Background).collect(),
            foreground: catalog.ids_with_role(Role::Foreground).collect(),
        })
    }
}

struct Resolved {
    flip_prob: [f64; 256],
    confusable: Vec<Vec<u8>>,
    background: Vec<u8>,
    foreground: Vec<u8>,
}

/// Randomly grows and shrinks a region, one pixel ring per step.
///
/// At each step every pixel outside the region with a 4-neighbour inside it
/// joins with probability 1/2, and every region pixel with an in-image
/// 4-neighbour outside it leaves with probability 1/2. Both rings are taken
/// from the region as it was at the start of the step; random draws happen in
/// row-major order over the step's bounding box. Returns sorted row-major
/// indices.
pub fn jitter_region(
    pixels: &[usize],
    width: u32,
    height: u32,
    steps: u32,
    rng: &mut SplitMix64,
) -> Vec<usize> {
    if steps == 0 || pixels.is_empty() {
        let mut v = pixels.to_vec();
        v.sort_unstable();
        return v;
    }
    let (w, h) = (width as usize, height as usize);
    let pad = steps as usize;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for &p in pixels {
        let (x, y) = (p % w, p / w);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let bx0 = x0.saturating_sub(pad);
    let by0 = y0.saturating_sub(pad);
    let bx1 = (x1 + pad + 1).min(w);
    let by1 = (y1 + pad + 1).min(h);
    let (bw, bh) = (bx1 - bx0, by1 - by0);
    let mut cur = vec![false; bw * bh];
    for &p in pixels {
        cur[(p / w - by0) * bw + (p % w - bx0)] = true;
    }
    let mut next = cur.clone();
    for _ in 0..steps {
        next.copy_from_slice(&cur);
        for y in 0..bh {
            for x in 0..bw {
                let i = y * bw + x;
                let mut inside = 0;
                let mut outside = 0;
                let mut visit = |j: usize| {
                    if cur[j] {
                        inside += 1
                    } else {
                        outside += 1
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < bw {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - bw);
                }
                if y + 1 < bh {
                    visit(i + bw);
                }
                // neighbours beyond the box but inside the image are outside the region
                let gx = bx0 + x;
                let gy = by0 + y;
                outside += ((x == 0 && gx > 0) as u32)
                    + ((x + 1 == bw && gx + 1 < w) as u32)
                    + ((y == 0 && gy > 0) as u32)
                    + ((y + 1 == bh && gy + 1 < h) as u32);
                if cur[i] {
                    if outside > 0 && rng.bernoulli(0.5) {
                        next[i] = false;
                    }
                } else if inside > 0 && rng.bernoulli(0.5) {
                    next[i] = true;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| (by0 + i / bw) * w + bx0 + i % bw)
        .collect()
}

fn iou_sorted(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn sorted_pixels(mask: &BinaryMask) -> Vec<usize> {
    let mut v: Vec<usize> = mask.row_major_indices().collect();
    v.sort_unstable();
    v
}

/// Background label underneath foreground pixels: nearest non-foreground
/// pixel in the same column (below wins ties), else in the same row (right
/// wins ties), else the first background class.
fn background_layer(gt: &LabelMap, roles: &[Option<Role>; 256], fallback: u8) -> Vec<u8> {
    let (w, h) = (gt.width() as usize, gt.height() as usize);
    let src = gt.data();
    let is_fg = |v: u8| roles[v as usize] == Some(Role::Foreground);
    let mut out = src.to_vec();
    for p in 0..w * h {
        if !is_fg(src[p]) {
            continue;
        }
        let (x, y) = (p % w, p / w);
        let mut found = None;
        for d in 1..h {
            if y + d < h && !is_fg(src[(y + d) * w + x]) {
                found = Some(src[(y + d) * w + x]);
            } else if y >= d && !is_fg(src[(y - d) * w + x]) {
                found = Some(src[(y - d) * w + x]);
            }
            if found.is_some() {
                break;
            }
        }
        if found.is_none() {
            for d in 1..w {
                if x + d < w && !is_fg(src[y * w + x + d]) {
                    found = Some(src[y * w + x + d]);
                } else if x >= d && !is_fg(src[y * w + x - d]) {
                    found = Some(src[y * w + x - d]);
                }
                if found.is_some() {
                    break;
                }
            }
        }
        out[p] = found.unwrap_or(fallback);
    }
    out
}

/// Dense prediction mimicking a segmentation network trained on synthetic
/// data.
///
/// Objects are painted in id order over the background layer: each one may
/// be relabeled (probability from `fg_confusion`) and has its outline
/// perturbed by [`jitter_region`] with `boundary_jitter` steps. Background
/// pixels then flip to a different background class with probability
/// `bg_noise`. The result is a near one-hot volume whose argmax is the
/// corrupted label map.
pub fn simulate_semantic(
    gt: &LabelMap,
    instances: &[SceneInstance],
    catalog: &ClassCatalog,
    spec: &CorruptionSpec,
    seed: u64,
) -> Result<ProbVolume> {
    let res = spec.resolve(catalog)?;
    catalog.require_fusion_capable()?;
    let labels = corrupt_semantic_labels(gt, instances, catalog, spec, &res, seed)?;
    let mut rng = SplitMix64::new(SplitMix64::derive_seed(seed, &[1]));
    let c = catalog.len();
    let mut data = Vec::with_capacity(labels.len() * c);
    let mut weights = vec![0f64; c];
    for &v in labels.data() {
        let target = catalog.index_of(v).expect("validated label");
        let mut sum = 0.0;
        for (ch, wgt) in weights.iter_mut().enumerate() {
            *wgt = if ch == target {
                1.0
            } else {
                rng.uniform() * OFF_CLASS_WEIGHT
            };
            sum += *wgt;
        }
        data.extend(weights.iter().map(|&x| (x / sum) as f32));
    }
    ProbVolume::new(gt.width(), gt.height(), c as u32, data)
}

fn corrupt_semantic_labels(
    gt: &LabelMap,
    instances: &[SceneInstance],
    catalog: &ClassCatalog,
    spec: &CorruptionSpec,
    res: &Resolved,
    seed: u64,
) -> Result<LabelMap> {
    gt.validate(catalog)?;
    if gt.data().contains(&catalog.ignore_id()) {
        return Err(Error::Invalid(
            "ground truth for simulation contains ignore pixels".into(),
        ));
    }
    let roles = catalog.role_table();
    let (w, h) = gt.dims();
    let mut rng = SplitMix64::new(SplitMix64::derive_seed(seed, &[0]));
    let mut out = background_layer(gt, &roles, res.background[0]);
    let sem = &spec.semantic;

    for inst in instances {
        let seg = &inst.segment;
        if seg.mask.dims() != gt.dims() {
            return Err(Error::dims(gt.dims(), seg.mask.dims()));
        }
        seg.check_class(catalog)?;
        let pixels = sorted_pixels(&seg.mask);
        if pixels.is_empty() {
            continue;
        }
        let mut label = seg.class_id;
        let options = &res.confusable[label as usize];
        if rng.bernoulli(res.flip_prob[label as usize]) && !options.is_empty() {
            label = options[rng.index(options.len())];
        }
        for p in jitter_region(&pixels, w, h, sem.boundary_jitter, &mut rng) {
            out[p] = label;
        }
    }

    if sem.bg_noise > 0.0 && res.background.len() > 1 {
        let n = res.background.len();
        for v in out.iter_mut() {
            if roles[*v as usize] == Some(Role::Background) && rng.bernoulli(sem.bg_noise) {
                let cur = res.background.iter().position(|b| b == v).unwrap();
                let k = rng.index(n - 1);
                *v = res.background[if k >= cur { k + 1 } else { k }];
            }
        }
    }
    LabelMap::new(w, h, out)
}

/// Label map that [`simulate_semantic`] encodes (its argmax), without
/// building the probability volume.
pub fn simulate_semantic_labels(
    gt: &LabelMap,
    instances: &[SceneInstance],
    catalog: &ClassCatalog,
    spec: &CorruptionSpec,
    seed: u64,
) -> Result<LabelMap> {
    let res = spec.resolve(catalog)?;
    catalog.require_fusion_capable()?;
    corrupt_semantic_labels(gt, instances, catalog, spec, &res, seed)
}

/// Detector output mimicking an instance segmentation network: classes are
/// never changed, only outlines, presence and scores.
///
/// Each ground-truth instance is missed with `miss_rate`; survivors get
/// `mask_jitter` steps of [`jitter_region`] and a score of
/// `clamp(IoU(jittered, visible) + score_noise * N(0, 1), 0, 1)`. Then a
/// Poisson(`spurious_rate`) number of false rectangles with a random
/// foreground class are appended, scored by their best IoU against a ground
/// truth instance of that class plus the same noise.
pub fn simulate_instances(
    instances: &[SceneInstance],
    dims: (u32, u32),
    catalog: &ClassCatalog,
    spec: &CorruptionSpec,
    seed: u64,
) -> Result<Vec<InstanceSegment>> {
    let res = spec.resolve(catalog)?;
    catalog.require_fusion_capable()?;
    let ic = &spec.instance;
    let (w, h) = dims;
    let mut rng = SplitMix64::new(seed);
    let noisy = |rng: &mut SplitMix64, iou: f64| {
        let noise = if ic.score_noise > 0.0 {
            ic.score_noise * rng.gaussian()
        } else {
            0.0
        };
        (iou + noise).clamp(0.0, 1.0)
    };

    let mut gt_pixels = Vec::with_capacity(instances.len());
    let mut out = Vec::new();
    for inst in instances {
        let seg = &inst.segment;
        if seg.mask.dims() != dims {
            return Err(Error::dims(dims, seg.mask.dims()));
        }
        seg.check_class(catalog)?;
        let pixels = sorted_pixels(&seg.mask);
        if pixels.is_empty() || rng.bernoulli(ic.miss_rate) {
            gt_pixels.push((seg.class_id, pixels));
            continue;
        }
        let jittered = jitter_region(&pixels, w, h, ic.mask_jitter, &mut rng);
        if !jittered.is_empty() {
            let score = noisy(&mut rng, iou_sorted(&jittered, &pixels));
            out.push(InstanceSegment::new(
                BinaryMask::from_indices(jittered.iter().copied(), w, h),
                seg.class_id,
                score,
            )?);
        }
        gt_pixels.push((seg.class_id, pixels));
    }

    let spurious = rng.poisson(ic.spurious_rate);
    for _ in 0..spurious {
        let class_id = res.foreground[rng.index(res.foreground.len())];
        let rw = 2 + rng.below((w / 8).max(1) as u64) as u32;
        let rh = 2 + rng.below((h / 8).max(1) as u64) as u32;
        let (rw, rh) = (rw.min(w), rh.min(h));
        let x0 = rng.below((w - rw + 1) as u64) as u32;
        let y0 = rng.below((h - rh + 1) as u64) as u32;
        let pixels: Vec<usize> = (y0..y0 + rh)
            .flat_map(|y| (x0..x0 + rw).map(move |x| y as usize * w as usize + x as usize))
            .collect();
        let best = gt_pixels
            .iter()
            .filter(|(c, _)| *c == class_id)
            .map(|(_, g)| iou_sorted(&pixels, g))
            .fold(0.0, f64::max);
        let score = noisy(&mut rng, best);
        out.push(InstanceSegment::new(
            BinaryMask::from_indices(pixels, w, h),
            class_id,
            score,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::argmax_labels;
    use crate::sim::presets;
    use crate::sim::scene::generate_scene;

    const CAR: u8 = 13;
    const TRUCK: u8 = 14;

    fn scene(seed: u64) -> crate::sim::scene::Scene {
        let mut s = presets::cityscapes_scene();
        s.seed = seed;
        generate_scene(&s, &ClassCatalog::cityscapes19()).unwrap()
    }

    fn single_car_scene(seed: u64) -> crate::sim::scene::Scene {
        let mut s = presets::cityscapes_scene();
        s.seed = seed;
        s.objects.retain(|o| o.class == "car");
        s.objects[0].count = 1;
        generate_scene(&s, &ClassCatalog::cityscapes19()).unwrap()
    }

    #[test]
    fn identity_semantic() {
        let c = ClassCatalog::cityscapes19();
        let sc = scene(3);
        let v = simulate_semantic(&sc.gt, &sc.instances, &c, &CorruptionSpec::identity(), 9).unwrap();
        assert_eq!(argmax_labels(&v, &c).unwrap(), sc.gt);
    }

    #[test]
    fn forced_flip_car_to_truck() {
        let c = ClassCatalog::cityscapes19();
        let mut spec = CorruptionSpec::identity();
        spec.semantic.fg_confusion = 1.0;
        spec.semantic.confusions = Some(BTreeMap::from([("car".to_string(), vec!["truck".to_string()])]));
        for seed in 0..5 {
            let sc = scene(seed);
            let labels = argmax_labels(
                &simulate_semantic(&sc.gt, &sc.instances, &c, &spec, seed).unwrap(),
                &c,
            )
            .unwrap();
            for (p, &g) in sc.gt.data().iter().enumerate() {
                if g == CAR {
                    assert_eq!(labels.data()[p], TRUCK);
                } else {
                    assert_eq!(labels.data()[p], g);
                }
            }
        }
    }

    #[test]
    fn flip_rate_matches_probability() {
        // 1000 single-car scenes at fg_confusion 0.5; a binomial(1000, 0.5)
        // proportion has sd 0.0158, so +-0.05 is over three sd.
        let c = ClassCatalog::cityscapes19();
        let mut spec = CorruptionSpec::identity();
        spec.semantic.fg_confusion = 0.5;
        let mut flipped = 0;
        let mut total = 0;
        for seed in 0..1000u64 {
            let sc = single_car_scene(seed);
            let car = &sc.instances[0].segment;
            let Some(p) = car.mask.row_major_indices().next() else {
                continue;
            };
            let labels = simulate_semantic_labels(&sc.gt, &sc.instances, &c, &spec, seed).unwrap();
            total += 1;
            if labels.data()[p] != CAR {
                flipped += 1;
            }
        }
        assert_eq!(total, 1000);
        let rate = flipped as f64 / total as f64;
        assert!((rate - 0.5).abs() <= 0.05, "{rate}");
    }

    #[test]
    fn labels_match_volume_argmax() {
        let c = ClassCatalog::cityscapes19();
        let spec = presets::cityscapes_corruption();
        let sc = scene(11);
        let v = simulate_semantic(&sc.gt, &sc.instances, &c, &spec, 5).unwrap();
        let l = simulate_semantic_labels(&sc.gt, &sc.instances, &c, &spec, 5).unwrap();
        assert_eq!(argmax_labels(&v, &c).unwrap(), l);
    }

    #[test]
    fn identity_instances() {
        let c = ClassCatalog::cityscapes19();
        let sc = scene(4);
        let segs =
            simulate_instances(&sc.instances, sc.gt.dims(), &c, &CorruptionSpec::identity(), 1).unwrap();
        let visible: Vec<&InstanceSegment> = sc
            .instances
            .iter()
            .map(|i| &i.segment)
            .filter(|s| s.mask.area() > 0)
            .collect();
        assert_eq!(segs.len(), visible.len());
        for (a, b) in segs.iter().zip(visible) {
            assert_eq!(a, b);
            assert_eq!(a.score, 1.0);
        }
    }

    #[test]
    fn full_miss_rate_is_empty() {
        let c = ClassCatalog::cityscapes19();
        let mut spec = CorruptionSpec::identity();
        spec.instance.miss_rate = 1.0;
        let sc = scene(4);
        assert!(simulate_instances(&sc.instances, sc.gt.dims(), &c, &spec, 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn classes_survive_unchanged() {
        let c = ClassCatalog::cityscapes19();
        let mut spec = presets::cityscapes_corruption();
        spec.instance.spurious_rate = 0.0;
        for seed in 0..30 {
            let sc = scene(seed);
            let segs = simulate_instances(&sc.instances, sc.gt.dims(), &c, &spec, seed).unwrap();
            // every output overlaps a gt instance of the same class
            for s in &segs {
                let px: Vec<usize> = sorted_pixels(&s.mask);
                let best = sc
                    .instances
                    .iter()
                    .map(|i| {
                        (
                            i.segment.class_id,
                            iou_sorted(&px, &sorted_pixels(&i.segment.mask)),
                        )
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                assert_eq!(best.0, s.class_id);
            }
        }
    }

    fn disc6() -> Vec<usize> {
        // disc of diameter 6 centred in a 12x12 image
        let mut v = Vec::new();
        for y in 0..12usize {
            for x in 0..12usize {
                let (dx, dy) = (x as f64 + 0.5 - 6.0, y as f64 + 0.5 - 6.0);
                if dx * dx + dy * dy <= 9.0 {
                    v.push(y * 12 + x);
                }
            }
        }
        v
    }

    /// Exact expected IoU after one jitter step: intersection A - R, union
    /// A + D, with R ~ Bin(inner, 1/2) and D ~ Bin(outer, 1/2) independent.
    fn expected_one_step_iou(region: &[usize], w: usize, h: usize) -> f64 {
        let set: std::collections::HashSet<usize> = region.iter().copied().collect();
        let nbrs = |p: usize| {
            let (x, y) = (p % w, p / w);
            let mut v = Vec::new();
            if x > 0 {
                v.push(p - 1)
            }
            if x + 1 < w {
                v.push(p + 1)
            }
            if y > 0 {
                v.push(p - w)
            }
            if y + 1 < h {
                v.push(p + w)
            }
            v
        };
        let inner = region
            .iter()
            .filter(|&&p| nbrs(p).iter().any(|q| !set.contains(q)))
            .count();
        let outer = (0..w * h)
            .filter(|p| !set.contains(p) && nbrs(*p).iter().any(|q| set.contains(q)))
            .count();
        let binom = |n: usize| -> Vec<f64> {
            let mut row = vec![1.0f64];
            for _ in 0..n {
                let mut next = vec![0.0; row.len() + 1];
                for (k, v) in row.iter().enumerate() {
                    next[k] += v / 2.0;
                    next[k + 1] += v / 2.0;
                }
                row = next;
            }
            row
        };
        let (pr, pd) = (binom(inner), binom(outer));
        let a = region.len() as f64;
        let mut e = 0.0;
        for (r, wr) in pr.iter().enumerate() {
            for (d, wd) in pd.iter().enumerate() {
                e += wr * wd * (a - r as f64) / (a + d as f64);
            }
        }
        e
    }

    #[test]
    fn jitter_iou_on_small_disc() {
        let disc = disc6();
        assert_eq!(disc.len(), 32);
        let expected = expected_one_step_iou(&disc, 12, 12);
        assert!((0.5..=0.95).contains(&expected), "{expected}");

        let c = ClassCatalog::cityscapes19();
        let inst = vec![SceneInstance {
            id: 1,
            segment: InstanceSegment::new(BinaryMask::from_indices(disc.iter().copied(), 12, 12), CAR, 1.0)
                .unwrap(),
        }];
        let mut spec = CorruptionSpec::identity();
        spec.instance.mask_jitter = 1;
        let mut sum = 0.0;
        for seed in 0..1000 {
            let out = simulate_instances(&inst, (12, 12), &c, &spec, seed).unwrap();
            let px = if out.is_empty() {
                vec![]
            } else {
                sorted_pixels(&out[0].mask)
            };
            let iou = iou_sorted(&px, &disc);
            // zero score noise: score is the true IoU
            if let Some(s) = out.first() {
                assert_eq!(s.score, iou);
            }
            sum += iou;
        }
        let mean = sum / 1000.0;
        assert!((0.5..=0.95).contains(&mean), "{mean}");
        assert!((mean - expected).abs() < 0.01, "mean {mean} vs exact {expected}");
    }

    #[test]
    fn jitter_zero_steps_is_identity() {
        let mut rng = SplitMix64::new(0);
        let d = disc6();
        assert_eq!(jitter_region(&d, 12, 12, 0, &mut rng), d);
    }

    #[test]
    fn jitter_respects_image_border() {
        let mut rng = SplitMix64::new(1);
        for _ in 0..50 {
            let out = jitter_region(&[0, 1, 4, 5], 4, 4, 2, &mut rng);
            assert!(out.iter().all(|&p| p < 16));
        }
        // a full-image region has no in-image outside neighbours and never shrinks
        let all: Vec<usize> = (0..16).collect();
        assert_eq!(jitter_region(&all, 4, 4, 3, &mut rng), all);
    }

    #[test]
    fn spec_validation() {
        let c = ClassCatalog::cityscapes19();
        let mut s = CorruptionSpec::identity();
        s.semantic.fg_confusion = 1.5;
        assert!(
            matches!(s.validate(&c), Err(Error::Spec { ref path, .. }) if path == "semantic.fg_confusion")
        );
        let mut s = CorruptionSpec::identity();
        s.semantic.confusions = Some(BTreeMap::from([("car".to_string(), vec!["road".to_string()])]));
        assert!(
            matches!(s.validate(&c), Err(Error::Spec { ref path, .. }) if path == "semantic.confusions.car[0]")
        );
        let mut s = CorruptionSpec::identity();
        s.instance.score_noise = -1.0;
        assert!(s.validate(&c).is_err());
        assert!(CorruptionSpec::from_toml_str("[semantic]\n[instance]\nmiss = 0.1\n").is_err());
    }

    #[test]
    fn deterministic_outputs() {
        let c = ClassCatalog::cityscapes19();
        let spec = presets::cityscapes_corruption();
        let sc = scene(8);
        let a = simulate_instances(&sc.instances, sc.gt.dims(), &c, &spec, 77).unwrap();
        let b = simulate_instances(&sc.instances, sc.gt.dims(), &c, &spec, 77).unwrap();
        assert_eq!(a, b);
        let va = simulate_semantic(&sc.gt, &sc.instances, &c, &spec, 77).unwrap();
        let vb = simulate_semantic(&sc.gt, &sc.instances, &c, &spec, 77).unwrap();
        assert_eq!(va, vb);
    }
}
