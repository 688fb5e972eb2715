use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Cursor, Seek, Write};
use std::path::Path;

use crate::catalog::ClassCatalog;
use crate::error::{Error, Result};

/// Row-major raster of class ids (or the catalog's ignore id).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::size(expected, data.len()));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn ensure_dims(&self, dims: (u32, u32)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::dims(dims, self.dims()));
        }
        Ok(())
    }

    /// Checks that every pixel is a class of `catalog` or its ignore id.
    pub fn validate(&self, catalog: &ClassCatalog) -> Result<()> {
        if let Some(&v) = self
            .data
            .iter()
            .find(|&&v| v != catalog.ignore_id() && !catalog.contains(v))
        {
            return Err(Error::Catalog(format!(
                "label value {v} is not in catalog `{}`",
                catalog.name()
            )));
        }
        Ok(())
    }

    pub fn count(&self, value: u8) -> usize {
        self.data.iter().filter(|&&v| v == value).count()
    }

    /// Decodes an 8-bit single-channel PNG.
    pub fn read_png<R: BufRead + Seek>(reader: R) -> Result<Self> {
        let decoder = png::Decoder::new(reader);
        let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
        let info = reader.info();
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::Png(format!(
                "expected 8-bit grayscale label map, got {:?} {:?}",
                info.color_type, info.bit_depth
            )));
        }
        let (width, height) = (info.width, info.height);
        let mut buf = vec![
            0;
            reader
                .output_buffer_size()
                .ok_or_else(|| Error::Png("image too large".into()))?
        ];
        let frame = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Png(e.to_string()))?;
        buf.truncate(frame.buffer_size());
        Self::new(width, height, buf)
    }

    pub fn write_png<W: Write>(&self, writer: W) -> Result<()> {
        let mut encoder = png::Encoder::new(writer, self.width, self.height);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut w = encoder.write_header().map_err(|e| Error::Png(e.to_string()))?;
        w.write_image_data(&self.data)
            .map_err(|e| Error::Png(e.to_string()))?;
        w.finish().map_err(|e| Error::Png(e.to_string()))
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Self::read_png(BufReader::new(File::open(path)?))
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_png(Cursor::new(bytes))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_png(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// PNG bytes in memory.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_png(&mut buf)?;
        Ok(buf)
    }
}
