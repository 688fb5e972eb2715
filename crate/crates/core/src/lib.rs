//! Semantic segmentation by fusing instance detections with dense
//! predictions.
//!
//! Instance segments are resolved by descending confidence into a
//! foreground map with holes, and the holes are filled from the argmax of a
//! dense semantic prediction. The same foreground map yields pseudo ground
//! truth in which unreliable foreground predictions become ignore pixels.
//! Around that core sit the label-map, RLE and probability-volume formats,
//! a per-class IoU evaluator, and a scene simulator with corruption models
//! that stand in for trained networks.

pub mod catalog;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod label_map;
pub mod prob;
pub mod pseudo;
pub mod rle;
pub mod segment;
pub mod sim;

pub use catalog::{ClassCatalog, ClassEntry, Role};
pub use error::{Error, Result};
pub use eval::{confusion, iou_report, remap_labels, ClassIou, ConfusionMatrix, EvalReport, Remapping};
pub use fusion::{
    fill_holes, fuse, resolve_instances, ForegroundMap, FusionOutput, FusionPolicy, SegmentFate,
    SemanticSource,
};
pub use label_map::LabelMap;
pub use prob::{argmax_labels, ProbVolume};
pub use pseudo::{make_pseudo_gt, PseudoCounts, PseudoSidecar};
pub use rle::{rle_decode, rle_encode, BinaryMask};
pub use segment::{InstanceSegment, SegmentManifest};
