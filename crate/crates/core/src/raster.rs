//! Float rasters and Portable Float Map (PFM) I/O.
//!
//! In memory, rows are stored top to bottom. PFM files store scanlines bottom
//! to top; the reader and writer convert between the two. The sign of the
//! scale field selects the byte order of the payload (negative = little
//! endian), and its magnitude is carried through unchanged.

use std::fs;
use std::path::Path;

use crate::error::{Error, PfmError, Result};

/// A dense `width × height × channels` image of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FloatRaster {
    /// Builds a raster from interleaved row-major data (top row first).
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("raster channels must be 1 or 3, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "raster data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("raster sample {i} is {}", data[i])));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        assert!(channels == 1 || channels == 3);
        assert!(value.is_finite());
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Single-channel raster from a per-pixel function.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f32) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Per-pixel mean over channels.
    pub fn luminance(&self, x: usize, y: usize) -> f32 {
        if self.channels == 1 {
            return self.get(x, y, 0);
        }
        let base = (y * self.width + x) * self.channels;
        self.data[base..base + self.channels].iter().sum::<f32>() / self.channels as f32
    }

    pub fn same_shape(&self, other: &FloatRaster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

/// Encodes `raster` as a PFM byte stream. `scale` must be non-zero; a
/// negative value produces a little-endian payload.
pub fn write_pfm(raster: &FloatRaster, scale: f32) -> Result<Vec<u8>> {
    if scale == 0.0 || !scale.is_finite() {
        return Err(PfmError::ZeroScale.into());
    }
    if let Some(i) = raster.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "cannot encode sample {i} ({})",
            raster.data[i]
        )));
    }
    let magic = if raster.channels == 3 { "PF" } else { "Pf" };
    let header = format!("{magic}\n{} {}\n{scale:?}\n", raster.width, raster.height);
    let row_len = raster.width * raster.channels;
    let mut out = Vec::with_capacity(header.len() + raster.data.len() * 4);
    out.extend_from_slice(header.as_bytes());
    let little = scale < 0.0;
    for row in raster.data.chunks_exact(row_len.max(1)).rev() {
        for v in row {
            if little {
                out.extend_from_slice(&v.to_le_bytes());
            } else {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses a PFM byte stream. Rows are returned top to bottom.
pub fn read_pfm(bytes: &[u8]) -> Result<FloatRaster> {
    Ok(read_pfm_with_scale(bytes)?.0)
}

/// Like [`read_pfm`], also returning the signed scale field.
pub fn read_pfm_with_scale(bytes: &[u8]) -> Result<(FloatRaster, f32)> {
    let channels = match bytes.get(..2) {
        Some(b"Pf") => 1,
        Some(b"PF") => 3,
        _ => return Err(PfmError::BadMagic.into()),
    };
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let width: usize = cursor
        .token("width")?
        .parse()
        .map_err(|_| malformed("width is not an integer"))?;
    let height: usize = cursor
        .token("height")?
        .parse()
        .map_err(|_| malformed("height is not an integer"))?;
    let scale: f32 = cursor
        .token("scale")?
        .parse()
        .map_err(|_| malformed("scale is not a number"))?;
    if scale == 0.0 {
        return Err(PfmError::ZeroScale.into());
    }
    if !scale.is_finite() {
        return Err(malformed("scale is not finite").into());
    }
    // exactly one whitespace byte separates the scale from the payload
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(malformed("missing separator after scale").into()),
    }
    let count = width * height * channels;
    let payload = &bytes[cursor.pos..];
    if payload.len() < count * 4 {
        return Err(PfmError::Truncated {
            expected: count * 4,
            found: payload.len(),
        }
        .into());
    }
    let little = scale < 0.0;
    let row_len = width * channels;
    let mut data = vec![0f32; count];
    for (file_row, chunk) in payload[..count * 4].chunks_exact((row_len * 4).max(1)).enumerate() {
        let mem_row = height - 1 - file_row;
        for (i, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            let v = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            if !v.is_finite() {
                return Err(PfmError::NonFinite {
                    index: file_row * row_len + i,
                }
                .into());
            }
            data[mem_row * row_len + i] = v;
        }
    }
    Ok((FloatRaster::new(width, height, channels, data)?, scale))
}

fn malformed(msg: &str) -> PfmError {
    PfmError::MalformedHeader(msg.to_string())
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn token(&mut self, what: &str) -> std::result::Result<&'a str, PfmError> {
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
            if self.pos - start > 32 {
                return Err(malformed(&format!("{what} field too long")));
            }
        }
        if start == self.pos {
            return Err(malformed(&format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| malformed(&format!("{what} is not ASCII")))
    }
}

/// Writes a little-endian PFM file.
pub fn write_pfm_file(path: impl AsRef<Path>, raster: &FloatRaster) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_pfm(raster, -1.0)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pfm_file(path: impl AsRef<Path>) -> Result<FloatRaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pfm(&bytes).map_err(|e| e.context(path.display().to_string()))
}
