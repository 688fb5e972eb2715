//! Combination of ranked instance segments with a dense semantic prediction.
//!
//! Segments are visited from most to least confident. Each one keeps only the
//! pixels no earlier segment has claimed, so the surviving regions are
//! disjoint and detections get hard priority. Pixels nobody claims are holes;
//! [`fill_holes`] gives them the semantic argmax label.

use log::warn;

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::label_map::LabelMap;
use crate::prob::{argmax_labels, ProbVolume};
use crate::segment::InstanceSegment;

/// Optional segment-discarding thresholds. Both are disabled by default.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FusionPolicy {
    /// Segments scoring strictly below this are skipped.
    pub score_threshold: Option<f64>,
    /// Segments whose surviving pixels fall below this fraction of their
    /// original area are dropped entirely.
    pub min_remaining_fraction: Option<f64>,
}

impl FusionPolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("score_threshold", self.score_threshold),
            ("min_remaining_fraction", self.min_remaining_fraction),
        ] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Invalid(format!("{name} {v} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Why a segment did not contribute pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentFate {
    Kept { pixels: u64 },
    BelowScore,
    TooOccluded { surviving: u64 },
    Empty,
}

/// Result of [`resolve_instances`]: foreground labels with holes marked by
/// the ignore id, plus the index of the segment that owns each pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundMap {
    labels: LabelMap,
    provenance: Vec<Option<u32>>,
    fates: Vec<SegmentFate>,
    hole_value: u8,
}

impl ForegroundMap {
    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn dims(&self) -> (u32, u32) {
        self.labels.dims()
    }

    /// Index into the input segment list of the owner of each pixel.
    pub fn provenance(&self) -> &[Option<u32>] {
        &self.provenance
    }

    /// Per input segment, in input order.
    pub fn fates(&self) -> &[SegmentFate] {
        &self.fates
    }

    pub fn hole_value(&self) -> u8 {
        self.hole_value
    }

    #[inline]
    pub fn is_hole(&self, index: usize) -> bool {
        self.provenance[index].is_none()
    }

    pub fn hole_count(&self) -> usize {
        self.provenance.iter().filter(|p| p.is_none()).count()
    }

    pub fn hole_fraction(&self) -> f64 {
        if self.provenance.is_empty() {
            return 0.0;
        }
        self.hole_count() as f64 / self.provenance.len() as f64
    }

    pub fn retained(&self) -> usize {
        self.fates
            .iter()
            .filter(|f| matches!(f, SegmentFate::Kept { .. }))
            .count()
    }
}

pub fn resolve_instances(
    segments: &[InstanceSegment],
    dims: (u32, u32),
    catalog: &ClassCatalog,
    policy: &FusionPolicy,
) -> Result<ForegroundMap> {
    policy.validate()?;
    for s in segments {
        if s.mask.dims() != dims {
            return Err(Error::dims(dims, s.mask.dims()));
        }
        s.check_class(catalog)?;
    }

    let mut order: Vec<usize> = (0..segments.len()).collect();
    // stable: equal scores keep input order
    order.sort_by(|&a, &b| segments[b].score.total_cmp(&segments[a].score));

    let n = dims.0 as usize * dims.1 as usize;
    let hole = catalog.ignore_id();
    let mut labels = vec![hole; n];
    let mut provenance: Vec<Option<u32>> = vec![None; n];
    let mut fates = vec![SegmentFate::Empty; segments.len()];
    let mut surviving = Vec::new();

    for idx in order {
        let seg = &segments[idx];
        if let Some(t) = policy.score_threshold {
            if seg.score < t {
                fates[idx] = SegmentFate::BelowScore;
                continue;
            }
        }
        let area = seg.mask.area();
        if area == 0 {
            warn!(
                "segment {idx} (class {}) has an empty mask, skipping",
                seg.class_id
            );
            continue;
        }
        surviving.clear();
        surviving.extend(seg.mask.row_major_indices().filter(|&p| provenance[p].is_none()));
        let kept = surviving.len() as u64;
        if let Some(f) = policy.min_remaining_fraction {
            if (kept as f64) < f * area as f64 {
                fates[idx] = SegmentFate::TooOccluded { surviving: kept };
                continue;
            }
        }
        for &p in &surviving {
            labels[p] = seg.class_id;
            provenance[p] = Some(idx as u32);
        }
        fates[idx] = SegmentFate::Kept { pixels: kept };
    }

    Ok(ForegroundMap {
        labels: LabelMap::new(dims.0, dims.1, labels)?,
        provenance,
        fates,
        hole_value: hole,
    })
}

/// Copies claimed pixels from `fg` and takes `semantic` everywhere else.
pub fn fill_holes(fg: &ForegroundMap, semantic: &LabelMap) -> Result<LabelMap> {
    semantic.ensure_dims(fg.dims())?;
    let mut out = fg.labels.data().to_vec();
    for (i, (o, &s)) in out.iter_mut().zip(semantic.data()).enumerate() {
        if fg.is_hole(i) {
            if s == fg.hole_value {
                return Err(Error::Invalid(format!(
                    "semantic prediction carries the ignore id at hole pixel {i}"
                )));
            }
            *o = s;
        }
    }
    LabelMap::new(fg.labels.width(), fg.labels.height(), out)
}

/// Dense semantic input: either a probability volume (reduced by argmax) or
/// an already-decided label map.
#[derive(Debug, Clone, Copy)]
pub enum SemanticSource<'a> {
    Probs(&'a ProbVolume),
    Labels(&'a LabelMap),
}

impl SemanticSource<'_> {
    pub fn labels(&self, catalog: &ClassCatalog) -> Result<LabelMap> {
        match self {
            SemanticSource::Probs(p) => argmax_labels(p, catalog),
            SemanticSource::Labels(l) => {
                l.validate(catalog)?;
                Ok((*l).clone())
            }
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        match self {
            SemanticSource::Probs(p) => p.dims(),
            SemanticSource::Labels(l) => l.dims(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub fused: LabelMap,
    pub foreground: ForegroundMap,
    /// The semantic argmax used to fill holes.
    pub semantic: LabelMap,
}

pub fn fuse(
    segments: &[InstanceSegment],
    semantic_source: SemanticSource<'_>,
    catalog: &ClassCatalog,
    policy: &FusionPolicy,
) -> Result<FusionOutput> {
    let semantic = semantic_source.labels(catalog)?;
    let foreground = resolve_instances(segments, semantic.dims(), catalog, policy)?;
    let fused = fill_holes(&foreground, &semantic)?;
    Ok(FusionOutput {
        fused,
        foreground,
        semantic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rle::BinaryMask;

    const CAR: u8 = 13;
    const PERSON: u8 = 11;
    const ROAD: u8 = 0;
    const BUILDING: u8 = 2;
    const SKY: u8 = 10;
    const HOLE: u8 = 255;

    fn seg(pixels: &[usize], class_id: u8, score: f64, w: u32, h: u32) -> InstanceSegment {
        InstanceSegment::new(
            BinaryMask::from_indices(pixels.iter().copied(), w, h),
            class_id,
            score,
        )
        .unwrap()
    }

    /// Sort by score (stable), subtract the running union of earlier kept
    /// segments, apply the fraction check against original area.
    fn oracle(segs: &[(Vec<usize>, u8, f64)], n: usize, min_frac: Option<f64>) -> Vec<u8> {
        let mut idx: Vec<usize> = (0..segs.len()).collect();
        idx.sort_by(|&a, &b| segs[b].2.partial_cmp(&segs[a].2).unwrap());
        let mut out = vec![HOLE; n];
        let mut union = std::collections::HashSet::new();
        for i in idx {
            let (px, c, _) = &segs[i];
            let own: std::collections::HashSet<usize> = px.iter().copied().collect();
            let rest: Vec<usize> = own.difference(&union).copied().collect();
            if let Some(f) = min_frac {
                if (rest.len() as f64) < f * own.len() as f64 {
                    continue;
                }
            }
            for p in rest {
                out[p] = *c;
                union.insert(p);
            }
        }
        out
    }

    fn ab() -> Vec<(Vec<usize>, u8, f64)> {
        vec![(vec![5, 6, 9, 10], CAR, 0.9), (vec![6, 7, 10, 11], PERSON, 0.7)]
    }

    fn ab_segments() -> Vec<InstanceSegment> {
        ab().iter().map(|(p, c, s)| seg(p, *c, *s, 4, 4)).collect()
    }

    #[test]
    fn empty_list_is_all_holes() {
        let c = ClassCatalog::cityscapes19();
        let fg = resolve_instances(&[], (4, 4), &c, &FusionPolicy::default()).unwrap();
        assert_eq!(fg.hole_count(), 16);
        assert!(fg.labels().data().iter().all(|&v| v == HOLE));
    }

    #[test]
    fn overlapping_pair() {
        let c = ClassCatalog::cityscapes19();
        let expected = oracle(&ab(), 16, None);
        let fg = resolve_instances(&ab_segments(), (4, 4), &c, &FusionPolicy::default()).unwrap();
        assert_eq!(fg.labels().data(), &expected[..]);
        for p in [5, 6, 9, 10] {
            assert_eq!(expected[p], CAR);
        }
        for p in [7, 11] {
            assert_eq!(expected[p], PERSON);
        }
        assert_eq!(fg.hole_count(), 10);
        assert_eq!(
            fg.fates(),
            [SegmentFate::Kept { pixels: 4 }, SegmentFate::Kept { pixels: 2 }]
        );
        assert_eq!(fg.provenance()[7], Some(1));
    }

    #[test]
    fn input_order_does_not_matter_without_ties() {
        let c = ClassCatalog::cityscapes19();
        let mut segs = ab_segments();
        segs.reverse();
        let fg = resolve_instances(&segs, (4, 4), &c, &FusionPolicy::default()).unwrap();
        assert_eq!(fg.labels().data(), &oracle(&ab(), 16, None)[..]);
    }

    #[test]
    fn min_fraction_drops_occluded() {
        let c = ClassCatalog::cityscapes19();
        let policy = FusionPolicy {
            min_remaining_fraction: Some(0.6),
            ..Default::default()
        };
        let expected = oracle(&ab(), 16, Some(0.6));
        let fg = resolve_instances(&ab_segments(), (4, 4), &c, &policy).unwrap();
        assert_eq!(fg.labels().data(), &expected[..]);
        assert_eq!(fg.labels().count(PERSON), 0);
        assert_eq!(fg.fates()[1], SegmentFate::TooOccluded { surviving: 2 });
    }

    #[test]
    fn score_threshold_skips() {
        let c = ClassCatalog::cityscapes19();
        let policy = FusionPolicy {
            score_threshold: Some(0.8),
            ..Default::default()
        };
        let fg = resolve_instances(&ab_segments(), (4, 4), &c, &policy).unwrap();
        assert_eq!(fg.fates()[1], SegmentFate::BelowScore);
        assert_eq!(fg.hole_count(), 12);
    }

    #[test]
    fn equal_scores_keep_input_order() {
        let c = ClassCatalog::cityscapes19();
        let segs = vec![seg(&[0, 1], PERSON, 0.5, 2, 1), seg(&[1], CAR, 0.5, 2, 1)];
        let fg = resolve_instances(&segs, (2, 1), &c, &FusionPolicy::default()).unwrap();
        assert_eq!(fg.labels().data(), [PERSON, PERSON]);
        let swapped = vec![segs[1].clone(), segs[0].clone()];
        let fg = resolve_instances(&swapped, (2, 1), &c, &FusionPolicy::default()).unwrap();
        assert_eq!(fg.labels().data(), [PERSON, CAR]);
    }

    #[test]
    fn errors() {
        let c = ClassCatalog::cityscapes19();
        let bg = vec![seg(&[0], ROAD, 0.9, 2, 2)];
        assert!(matches!(
            resolve_instances(&bg, (2, 2), &c, &FusionPolicy::default()),
            Err(Error::ClassRole { class_id: ROAD })
        ));
        let wrong = vec![seg(&[0], CAR, 0.9, 3, 2)];
        assert!(matches!(
            resolve_instances(&wrong, (2, 2), &c, &FusionPolicy::default()),
            Err(Error::Size { .. })
        ));
        let bad_policy = FusionPolicy {
            score_threshold: Some(1.5),
            ..Default::default()
        };
        assert!(resolve_instances(&[], (2, 2), &c, &bad_policy).is_err());
    }

    #[test]
    fn empty_mask_is_skipped() {
        let c = ClassCatalog::cityscapes19();
        let segs = vec![seg(&[], CAR, 0.9, 2, 2)];
        let fg = resolve_instances(&segs, (2, 2), &c, &FusionPolicy::default()).unwrap();
        assert_eq!(fg.fates(), [SegmentFate::Empty]);
        assert_eq!(fg.hole_count(), 4);
    }

    #[test]
    fn fill_holes_cases() {
        let c = ClassCatalog::cityscapes19();
        // zero holes: semantic unused
        let full = vec![seg(&[0, 1, 2, 3], CAR, 1.0, 2, 2)];
        let fg = resolve_instances(&full, (2, 2), &c, &FusionPolicy::default()).unwrap();
        let sem = LabelMap::new(2, 2, vec![ROAD, SKY, SKY, ROAD]).unwrap();
        assert_eq!(fill_holes(&fg, &sem).unwrap().data(), [CAR; 4]);

        // all holes: identity fill
        let fg = resolve_instances(&[], (2, 2), &c, &FusionPolicy::default()).unwrap();
        assert_eq!(fill_holes(&fg, &sem).unwrap(), sem);

        // per-pixel case split
        let fg =
            resolve_instances(&[seg(&[0], CAR, 0.8, 2, 2)], (2, 2), &c, &FusionPolicy::default()).unwrap();
        let sem = LabelMap::new(2, 2, vec![ROAD, ROAD, SKY, PERSON]).unwrap();
        let expected: Vec<u8> = (0..4)
            .map(|i| {
                if fg.is_hole(i) {
                    sem.data()[i]
                } else {
                    fg.labels().data()[i]
                }
            })
            .collect();
        assert_eq!(expected, [CAR, ROAD, SKY, PERSON]);
        assert_eq!(fill_holes(&fg, &sem).unwrap().data(), &expected[..]);

        assert!(fill_holes(&fg, &LabelMap::filled(3, 2, ROAD)).is_err());
        assert!(fill_holes(&fg, &LabelMap::filled(2, 2, HOLE)).is_err());
    }

    #[test]
    fn fuse_examples() {
        let c = ClassCatalog::cityscapes19();
        let p = FusionPolicy::default();

        let road = LabelMap::filled(4, 4, ROAD);
        let out = fuse(&[], SemanticSource::Labels(&road), &c, &p).unwrap();
        assert_eq!(out.fused, road);

        let building = LabelMap::filled(4, 4, BUILDING);
        let out = fuse(&ab_segments(), SemanticSource::Labels(&building), &c, &p).unwrap();
        let expected: Vec<u8> = oracle(&ab(), 16, None)
            .into_iter()
            .map(|v| if v == HOLE { BUILDING } else { v })
            .collect();
        assert_eq!(out.fused.data(), &expected[..]);

        let car = vec![seg(&(0..16).collect::<Vec<_>>(), CAR, 0.4, 4, 4)];
        let probs = ProbVolume::one_hot(&LabelMap::filled(4, 4, SKY), &c).unwrap();
        let out = fuse(&car, SemanticSource::Probs(&probs), &c, &p).unwrap();
        assert_eq!(out.fused, LabelMap::filled(4, 4, CAR));
        assert_eq!(out.semantic, LabelMap::filled(4, 4, SKY));
    }
}
