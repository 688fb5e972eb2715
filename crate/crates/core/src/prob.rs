//! Dense per-pixel class probabilities and their binary file format.
//!
//! A `.pvol` file is a 16-byte header (`b"PVOL"`, then width, height and
//! channel count as little-endian `u32`) followed by `width * height *
//! channels` little-endian `f32` values. Pixels are stored row-major and the
//! channels of one pixel are contiguous, in catalog entry order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::label_map::LabelMap;

pub const PVOL_MAGIC: &[u8; 4] = b"PVOL";
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbVolume {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<f32>,
}

impl ProbVolume {
    /// Validates shape and that every pixel is a probability vector.
    pub fn new(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Result<Self> {
        let v = Self::new_unchecked(width, height, channels, data)?;
        v.validate()?;
        Ok(v)
    }

    fn new_unchecked(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Result<Self> {
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::size(expected, data.len()));
        }
        if channels == 0 {
            return Err(Error::Invalid("probability volume has no channels".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Exact one-hot volume for a label map.
    pub fn one_hot(labels: &LabelMap, catalog: &ClassCatalog) -> Result<Self> {
        let c = catalog.len();
        let mut data = vec![0f32; labels.len() * c];
        for (px, &v) in labels.data().iter().enumerate() {
            let ch = catalog.index_of(v).ok_or_else(|| {
                Error::Catalog(format!("label value {v} is not in catalog `{}`", catalog.name()))
            })?;
            data[px * c + ch] = 1.0;
        }
        Self::new_unchecked(labels.width(), labels.height(), c as u32, data)
    }

    pub fn validate(&self) -> Result<()> {
        for (px, p) in self.data.chunks_exact(self.channels as usize).enumerate() {
            let mut sum = 0f64;
            for &v in p {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Invalid(format!("pixel {px} has invalid probability {v}")));
                }
                sum += v as f64;
            }
            if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                return Err(Error::Invalid(format!("pixel {px} probabilities sum to {sum}")));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Probability vector of pixel `index` (row-major).
    pub fn pixel(&self, index: usize) -> &[f32] {
        let c = self.channels as usize;
        &self.data[index * c..(index + 1) * c]
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut r = BufReader::new(reader);
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| Error::Corrupt("truncated PVOL header".into()))?;
        if &header[..4] != PVOL_MAGIC {
            return Err(Error::Corrupt("missing PVOL magic".into()));
        }
        let field = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let (width, height, channels) = (field(4), field(8), field(12));
        let n = width as usize * height as usize * channels as usize;
        let mut bytes = Vec::with_capacity(n * 4);
        r.read_to_end(&mut bytes)?;
        if bytes.len() != n * 4 {
            return Err(Error::Corrupt(format!(
                "PVOL payload is {} bytes, header implies {}",
                bytes.len(),
                n * 4
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(width, height, channels, data)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + self.data.len() * 4);
        buf.extend_from_slice(PVOL_MAGIC);
        for v in [self.width, self.height, self.channels] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// Per-pixel argmax over channels. Channel `i` is the catalog's `i`-th entry;
/// ties resolve to the lowest class id.
pub fn argmax_labels(probs: &ProbVolume, catalog: &ClassCatalog) -> Result<LabelMap> {
    let c = probs.channels as usize;
    if c != catalog.len() {
        return Err(Error::Catalog(format!(
            "volume has {c} channels but catalog `{}` has {} classes",
            catalog.name(),
            catalog.len()
        )));
    }
    let ids: Vec<u8> = catalog.entries().iter().map(|e| e.id).collect();
    let labels = probs
        .data
        .chunks_exact(c)
        .map(|p| {
            let mut best = 0;
            for ch in 1..c {
                if p[ch] > p[best] || (p[ch] == p[best] && ids[ch] < ids[best]) {
                    best = ch;
                }
            }
            ids[best]
        })
        .collect();
    LabelMap::new(probs.width, probs.height, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ClassEntry, Role};

    fn two_class() -> ClassCatalog {
        ClassCatalog::new(
            "two",
            vec![
                ClassEntry {
                    id: 0,
                    name: "road".into(),
                    role: Role::Background,
                },
                ClassEntry {
                    id: 1,
                    name: "car".into(),
                    role: Role::Foreground,
                },
            ],
            255,
        )
        .unwrap()
    }

    #[test]
    fn argmax_one_hot_road() {
        let c = ClassCatalog::cityscapes19();
        let mut p = vec![0f32; 19];
        p[0] = 1.0;
        let v = ProbVolume::new(1, 1, 19, p).unwrap();
        assert_eq!(argmax_labels(&v, &c).unwrap().data(), [0]);
    }

    #[test]
    fn argmax_uniform_picks_lowest_id() {
        let c = ClassCatalog::cityscapes19();
        let v = ProbVolume::new(1, 1, 19, vec![1.0 / 19.0; 19]);
        // 19 copies of fl(1/19) do not sum to exactly 1 but stay within tolerance
        let v = v.unwrap();
        assert_eq!(argmax_labels(&v, &c).unwrap().data(), [0]);
    }

    #[test]
    fn argmax_tie_uses_class_id_not_channel() {
        let c = ClassCatalog::new(
            "rev",
            vec![
                ClassEntry {
                    id: 5,
                    name: "a".into(),
                    role: Role::Background,
                },
                ClassEntry {
                    id: 2,
                    name: "b".into(),
                    role: Role::Foreground,
                },
            ],
            255,
        )
        .unwrap();
        let v = ProbVolume::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(argmax_labels(&v, &c).unwrap().data(), [2]);
    }

    #[test]
    fn argmax_two_pixels() {
        let v = ProbVolume::new(2, 1, 2, vec![0.2, 0.8, 0.6, 0.4]).unwrap();
        // exhaustive comparison oracle per pixel
        let oracle: Vec<u8> = v
            .data()
            .chunks(2)
            .map(|p| if p[1] > p[0] { 1 } else { 0 })
            .collect();
        assert_eq!(oracle, [1, 0]);
        assert_eq!(argmax_labels(&v, &two_class()).unwrap().data(), oracle);
    }

    #[test]
    fn channel_mismatch_is_catalog_error() {
        let v = ProbVolume::new(1, 1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            argmax_labels(&v, &ClassCatalog::cityscapes19()),
            Err(Error::Catalog(_))
        ));
    }

    #[test]
    fn rejects_invalid_probabilities() {
        assert!(ProbVolume::new(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(ProbVolume::new(1, 1, 2, vec![1.5, -0.5]).is_err());
        assert!(ProbVolume::new(1, 1, 2, vec![f32::NAN, 1.0]).is_err());
        assert!(ProbVolume::new(1, 1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn pvol_round_trip_and_header() {
        let v = ProbVolume::new(2, 1, 2, vec![0.25, 0.75, 1.0, 0.0]).unwrap();
        let mut bytes = Vec::new();
        v.write(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"PVOL");
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 16);
        assert_eq!(ProbVolume::read(&bytes[..]).unwrap(), v);

        assert!(ProbVolume::read(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ProbVolume::read(&bad[..]).is_err());
    }

    #[test]
    fn one_hot_argmax_is_identity() {
        let c = ClassCatalog::cityscapes19();
        let m = LabelMap::new(3, 1, vec![2, 13, 18]).unwrap();
        let v = ProbVolume::one_hot(&m, &c).unwrap();
        assert_eq!(argmax_labels(&v, &c).unwrap(), m);
    }
}
