//! Image decoding, size normalization and the RGB to YCbCr conversion.
//!
//! PPM (P6, maxval 255) is parsed here directly so that tests can use small
//! hand-written fixtures. PNG and JPEG go through the `image` crate behind the
//! [`ImageDecoder`] trait.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// A dense row-major scalar field, used for colour planes, smoothed
/// luminance and detector responses alike.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Field {
        assert_eq!(data.len(), width * height, "field data does not match its dimensions");
        Field { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Field {
        Field::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Field {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Field::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Value at a possibly out-of-range coordinate, mirrored back into the
    /// field (half-sample symmetric reflection).
    #[inline]
    pub fn get_reflected(&self, x: isize, y: isize) -> f64 {
        self.get(reflect(x, self.width), reflect(y, self.height))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Field::new(self.width, self.height, data)
    }
}

/// Mirror `i` into `0..n` with the edge sample repeated (`d c b a | a b c d`).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut r = i.rem_euclid(period);
    if r >= n {
        r = period - 1 - r;
    }
    r as usize
}

/// Decoded RGB image with channels scaled into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<RasterImage> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension);
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        if pixels.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter("channel value outside [0, 1]".into()));
        }
        Ok(RasterImage { width, height, pixels })
    }

    /// Builds an image from 8-bit RGB triples.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<RasterImage> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension);
        }
        if bytes.len() < width * height * 3 {
            return Err(Error::CorruptImage("pixel data is truncated".into()));
        }
        let pixels = bytes[..width * height * 3]
            .chunks_exact(3)
            .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
            .collect();
        Ok(RasterImage { width, height, pixels })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<RasterImage> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        RasterImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    /// 8-bit RGB bytes, rounding each channel to the nearest level.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flatten()
            .map(|&c| (c * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Serializes as binary PPM (P6, maxval 255).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_rgb8());
        out
    }
}

/// Luma and chroma planes; Y lies in `[16, 235.03]`, Cb and Cr in `[16, 240]`.
#[derive(Debug, Clone, PartialEq)]
pub struct YCbCrPlanes {
    pub y: Field,
    pub cb: Field,
    pub cr: Field,
}

impl YCbCrPlanes {
    pub fn width(&self) -> usize {
        self.y.width()
    }

    pub fn height(&self) -> usize {
        self.y.height()
    }
}

/// Turns an encoded byte stream into a [`RasterImage`].
pub trait ImageDecoder: Send + Sync {
    fn decode(&self, bytes: &[u8]) -> Result<RasterImage>;
}

/// Binary PPM only.
#[derive(Debug, Clone, Copy, Default)]
pub struct PpmDecoder;

impl ImageDecoder for PpmDecoder {
    fn decode(&self, bytes: &[u8]) -> Result<RasterImage> {
        let header = parse_ppm_header(bytes)?;
        RasterImage::from_rgb8(header.width, header.height, &bytes[header.data_offset..])
    }
}

/// PPM natively, everything else the `image` crate recognizes (PNG and JPEG
/// in this build).
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardDecoder;

impl ImageDecoder for StandardDecoder {
    fn decode(&self, bytes: &[u8]) -> Result<RasterImage> {
        if bytes.starts_with(b"P6") {
            return PpmDecoder.decode(bytes);
        }
        let decoded = image::load_from_memory(bytes).map_err(map_image_error)?;
        let rgb = decoded.to_rgb8();
        RasterImage::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
    }
}

fn map_image_error(err: image::ImageError) -> Error {
    match err {
        image::ImageError::Unsupported(e) => Error::UnsupportedFormat(e.to_string()),
        e => Error::CorruptImage(e.to_string()),
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    StandardDecoder.decode(bytes)
}

pub fn decode_file(path: impl AsRef<Path>) -> Result<RasterImage> {
    let bytes = std::fs::read(path)?;
    decode_image(&bytes)
}

/// Reads only enough of a file to learn its dimensions.
pub fn probe_dimensions(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let bytes = std::fs::read(path)?;
    let (w, h) = if bytes.starts_with(b"P6") {
        let header = parse_ppm_header(&bytes)?;
        if bytes.len() < header.data_offset + header.width * header.height * 3 {
            return Err(Error::CorruptImage("pixel data is truncated".into()));
        }
        (header.width, header.height)
    } else {
        let reader = image::ImageReader::new(Cursor::new(&bytes))
            .with_guessed_format()
            .map_err(Error::Io)?;
        if reader.format().is_none() {
            return Err(Error::UnsupportedFormat("unrecognized file signature".into()));
        }
        let (w, h) = reader.into_dimensions().map_err(map_image_error)?;
        (w as usize, h as usize)
    };
    if w == 0 || h == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok((w, h))
}

struct PpmHeader {
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_ppm_header(bytes: &[u8]) -> Result<PpmHeader> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::UnsupportedFormat("not a binary PPM (P6) stream".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while !matches!(bytes.get(pos), Some(b'\n') | None) {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::CorruptImage("PPM header is truncated".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptImage("PPM header field is not a number".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptImage("PPM header field out of range".into()))?;
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::CorruptImage("PPM header is truncated".into())),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("PPM maxval {maxval} (only 255 is read)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(PpmHeader { width, height, data_offset: pos })
}

/// Resamples to `k`×`k` with bilinear interpolation, sampling at pixel
/// centres. An image that is already `k`×`k` is returned unchanged.
pub fn resize_to_square(img: &RasterImage, k: usize) -> Result<RasterImage> {
    if k == 0 {
        return Err(Error::InvalidParameter("target size k must be positive".into()));
    }
    if img.width == k && img.height == k {
        return Ok(img.clone());
    }
    let xs = sample_positions(img.width, k);
    let ys = sample_positions(img.height, k);
    let mut pixels = Vec::with_capacity(k * k);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            let p00 = img.pixel(x0, y0);
            let p10 = img.pixel(x1, y0);
            let p01 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            let mut out = [0.0; 3];
            for c in 0..3 {
                let top = p00[c] + (p10[c] - p00[c]) * tx;
                let bottom = p01[c] + (p11[c] - p01[c]) * tx;
                out[c] = (top + (bottom - top) * ty).clamp(0.0, 1.0);
            }
            pixels.push(out);
        }
    }
    Ok(RasterImage { width: k, height: k, pixels })
}

/// For each destination index: the two source indices and the blend weight.
fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

pub const YCBCR_MATRIX: [[f64; 3]; 3] = [
    [65.481, 128.553, 24.996],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
];

pub const YCBCR_OFFSET: [f64; 3] = [16.0, 128.0, 128.0];

#[inline]
pub fn rgb_to_ycbcr_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let mut out = YCBCR_OFFSET;
    for (row, o) in YCBCR_MATRIX.iter().zip(out.iter_mut()) {
        *o += row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2];
    }
    out
}

pub fn rgb_to_ycbcr(img: &RasterImage) -> YCbCrPlanes {
    let n = img.width * img.height;
    let (mut y, mut cb, mut cr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &p in &img.pixels {
        let [a, b, c] = rgb_to_ycbcr_pixel(p);
        y.push(a);
        cb.push(b);
        cr.push(c);
    }
    YCbCrPlanes {
        y: Field::new(img.width, img.height, y),
        cb: Field::new(img.width, img.height, cb),
        cr: Field::new(img.width, img.height, cr),
    }
}
