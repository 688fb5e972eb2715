use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::rle::BinaryMask;

/// One detected object: a binary mask, a class and a confidence score.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSegment {
    pub mask: BinaryMask,
    pub class_id: u8,
    pub score: f64,
}

impl InstanceSegment {
    pub fn new(mask: BinaryMask, class_id: u8, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Invalid(format!("score {score} outside [0, 1]")));
        }
        Ok(Self {
            mask,
            class_id,
            score,
        })
    }

    /// Checks the class is a foreground class of `catalog`.
    pub fn check_class(&self, catalog: &ClassCatalog) -> Result<()> {
        match catalog.role(self.class_id) {
            Some(crate::Role::Foreground) => Ok(()),
            Some(crate::Role::Background) => Err(Error::ClassRole {
                class_id: self.class_id,
            }),
            None => Err(Error::Catalog(format!(
                "segment class {} is not in catalog `{}`",
                self.class_id,
                catalog.name()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRecord {
    class_id: u8,
    score: f64,
    rle: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFile {
    image_id: String,
    width: u32,
    height: u32,
    segments: Vec<SegmentRecord>,
}

/// The detections for one image, as stored in a segment manifest JSON file:
/// `{image_id, width, height, segments: [{class_id, score, rle: [...]}]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentManifest {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub segments: Vec<InstanceSegment>,
}

impl SegmentManifest {
    pub fn new(
        image_id: impl Into<String>,
        dims: (u32, u32),
        segments: Vec<InstanceSegment>,
    ) -> Result<Self> {
        for s in &segments {
            if s.mask.dims() != dims {
                return Err(Error::dims(dims, s.mask.dims()));
            }
        }
        Ok(Self {
            image_id: image_id.into(),
            width: dims.0,
            height: dims.1,
            segments,
        })
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SegmentFile = serde_json::from_str(text)?;
        let segments = file
            .segments
            .into_iter()
            .map(|r| {
                let mask = BinaryMask::from_runs(file.width, file.height, r.rle)?;
                InstanceSegment::new(mask, r.class_id, r.score)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.image_id, (file.width, file.height), segments)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SegmentFile {
            image_id: self.image_id.clone(),
            width: self.width,
            height: self.height,
            segments: self
                .segments
                .iter()
                .map(|s| SegmentRecord {
                    class_id: s.class_id,
                    score: s.score,
                    rle: s.mask.runs().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
