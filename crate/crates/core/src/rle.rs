//! Uncompressed run-length encoding of binary instance masks.
//!
//! Runs are counted in column-major pixel order (pixel `(x, y)` sits at
//! position `x * height + y`) and alternate zeros, ones, zeros, ... starting
//! with a zeros-run that may be empty.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl BinaryMask {
    /// Wraps runs after checking they cover exactly `width * height` pixels
    /// and that no run other than the leading zeros-run is empty.
    pub fn from_runs(width: u32, height: u32, runs: Vec<u32>) -> Result<Self> {
        let area = width as u64 * height as u64;
        let total: u64 = runs.iter().map(|&r| r as u64).sum();
        if total != area {
            return Err(Error::Corrupt(format!(
                "runs sum to {total} but mask has {area} pixels"
            )));
        }
        if runs.is_empty() {
            return Err(Error::Corrupt("empty run list".into()));
        }
        if let Some(pos) = runs.iter().skip(1).position(|&r| r == 0) {
            return Err(Error::Corrupt(format!("run {} is empty", pos + 1)));
        }
        Ok(Self { width, height, runs })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            runs: vec![width * height],
        }
    }

    /// Builds a mask from a row-major boolean raster.
    pub fn from_row_major(bits: &[bool], width: u32, height: u32) -> Result<Self> {
        let (w, h) = (width as usize, height as usize);
        if bits.len() != w * h {
            return Err(Error::size(w * h, bits.len()));
        }
        Ok(encode_iter(
            (0..w).flat_map(|x| (0..h).map(move |y| bits[y * w + x])),
            width,
            height,
        ))
    }

    /// Builds a mask from row-major pixel indices (any order, duplicates allowed).
    pub fn from_indices(indices: impl IntoIterator<Item = usize>, width: u32, height: u32) -> Self {
        let mut bits = vec![false; width as usize * height as usize];
        for i in indices {
            bits[i] = true;
        }
        Self::from_row_major(&bits, width, height).expect("length matches by construction")
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

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| r as u64).sum()
    }

    /// Iterates over set pixels as column-major `(start, len)` ranges.
    pub fn ones_ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut pos = 0usize;
        self.runs.iter().enumerate().filter_map(move |(i, &r)| {
            let start = pos;
            pos += r as usize;
            (i % 2 == 1).then_some((start, r as usize))
        })
    }

    /// Row-major indices of set pixels, ordered column-major.
    pub fn row_major_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let h = self.height as usize;
        let w = self.width as usize;
        self.ones_ranges()
            .flat_map(move |(start, len)| (start..start + len).map(move |p| (p % h) * w + p / h))
    }

    pub fn to_row_major(&self) -> Vec<bool> {
        let mut out = vec![false; self.width as usize * self.height as usize];
        for i in self.row_major_indices() {
            out[i] = true;
        }
        out
    }
}

fn encode_iter(bits: impl Iterator<Item = bool>, width: u32, height: u32) -> BinaryMask {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for b in bits {
        if b != current {
            runs.push(count);
            count = 0;
            current = b;
        }
        count += 1;
    }
    runs.push(count);
    BinaryMask { width, height, runs }
}

/// Encodes a column-major bit sequence.
pub fn rle_encode(bits: &[bool], width: u32, height: u32) -> Result<BinaryMask> {
    let expected = width as usize * height as usize;
    if bits.len() != expected {
        return Err(Error::size(expected, bits.len()));
    }
    Ok(encode_iter(bits.iter().copied(), width, height))
}

/// Expands a mask back into its column-major bit sequence.
pub fn rle_decode(mask: &BinaryMask) -> Result<Vec<bool>> {
    let area = mask.width as usize * mask.height as usize;
    let mut out = Vec::with_capacity(area);
    let mut value = false;
    for &r in &mask.runs {
        if out.len() + r as usize > area {
            return Err(Error::Corrupt(format!(
                "runs overflow a {}x{} mask",
                mask.width, mask.height
            )));
        }
        out.resize(out.len() + r as usize, value);
        value = !value;
    }
    if out.len() != area {
        return Err(Error::Corrupt(format!(
            "runs cover {} of {area} pixels",
            out.len()
        )));
    }
    Ok(out)
}
