//! Grayscale raster images: loading (PGM P5, PNG), saving (PGM P5) and
//! flattening to the signal vector used by the reconstruction pipelines.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Default sample precision in bits.
pub const DEFAULT_PRECISION: u32 = 8;

/// Row-major grid of real intensities in `[0, 2^p - 1]`.
///
/// Pixel `(row, col)` sits at continuous coordinate `(x = col, y = row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    precision_bits: u32,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image, validating dimensions and intensity range.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_precision(width, height, DEFAULT_PRECISION, data)
    }

    pub fn with_precision(
        width: usize,
        height: usize,
        precision_bits: u32,
        data: Vec<f64>,
    ) -> Result<Self> {
        check_dims(width, height)?;
        if !(1..=16).contains(&precision_bits) {
            return Err(Error::InvalidParameter(format!(
                "precision {precision_bits} bits"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        let peak = peak_value(precision_bits);
        if let Some(v) = data.iter().find(|v| !(0.0..=peak).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {v} outside [0, {peak}]"
            )));
        }
        Ok(Self {
            width,
            height,
            precision_bits,
            data,
        })
    }

    /// Builds an 8-bit image from arbitrary reals, clamping into range.
    /// Non-finite values map to 0.
    pub fn from_clamped(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let peak = peak_value(DEFAULT_PRECISION);
        let data = data
            .into_iter()
            .map(|v| {
                if v.is_finite() {
                    v.clamp(0.0, peak)
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self::new(width, height, data)
    }

    /// Constant-valued 8-bit image.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// Largest representable intensity, `2^p - 1`.
    pub fn peak(&self) -> f64 {
        peak_value(self.precision_bits)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Row-major flattening, `N = width * height`.
    pub fn as_vector(&self) -> Vec<f64> {
        self.data.clone()
    }

    /// Inverse of [`GrayImage::as_vector`].
    pub fn from_vector(width: usize, height: usize, v: &[f64]) -> Result<Self> {
        Self::new(width, height, v.to_vec())
    }

    /// Bilinear sample at continuous coordinate `(x, y)`, exact on pixel
    /// centers.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Result<f64> {
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        if !(0.0..=xmax).contains(&x) || !(0.0..=ymax).contains(&y) {
            return Err(Error::OutsideDomain(x, y));
        }
        let c0 = (x.floor() as usize).min(self.width - 2);
        let r0 = (y.floor() as usize).min(self.height - 2);
        let fx = x - c0 as f64;
        let fy = y - r0 as f64;
        let v00 = self.get(r0, c0);
        let v01 = self.get(r0, c0 + 1);
        let v10 = self.get(r0 + 1, c0);
        let v11 = self.get(r0 + 1, c0 + 1);
        if fx == 0.0 && fy == 0.0 {
            return Ok(v00);
        }
        let top = v00 + fx * (v01 - v00);
        let bottom = v10 + fx * (v11 - v10);
        Ok(top + fy * (bottom - top))
    }

    /// Intensities quantized to bytes, rounding half away from zero.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Copy with every intensity quantized to the nearest integer.
    pub fn quantized(&self) -> GrayImage {
        GrayImage {
            data: self.data.iter().map(|v| v.round()).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn peak_value(bits: u32) -> f64 {
    ((1u32 << bits) - 1) as f64
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidDimensions { width, height });
    }
    Ok(())
}

/// Luma of an 8-bit RGB triple with weights 0.299/0.587/0.114, rounded.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// Loads a binary PGM (P5) or an 8-bit grayscale/RGB PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Decodes an in-memory PGM P5 or PNG file.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        decode_png(bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "expected binary PGM (P5) or PNG".into(),
        ))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedImage("truncated PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedImage("bad PGM header number".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PGM maxval {maxval} (only 8-bit supported)"
        )));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::MalformedImage(
            "missing whitespace after maxval".into(),
        ));
    }
    pos += 1;
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    let n = width
        .checked_mul(height)
        .ok_or(Error::InvalidDimensions { width, height })?;
    let body = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::MalformedImage("truncated PGM pixel data".into()))?;
    GrayImage::new(width, height, body.iter().map(|&b| b as f64).collect())
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::MalformedImage(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::MalformedImage(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!(
            "PNG bit depth {:?}",
            info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    let buf = &buf[..info.buffer_size()];
    let data: Vec<f64> = match info.color_type {
        png::ColorType::Grayscale => buf.iter().map(|&b| b as f64).collect(),
        png::ColorType::Rgb => buf
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]) as f64)
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {other:?}"
            )))
        }
    };
    GrayImage::new(width, height, data)
}

/// Serializes to binary PGM P5 bytes.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_bytes());
    out
}

/// Writes a binary PGM P5 file.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}
