//! Palette quantization and binary signatures.
//!
//! Every feature region gets a normalized histogram over a fixed colour
//! palette. Each histogram value `h` becomes an `m`-bit block with the single
//! bit `ceil((h + 0.05) * m)` set (clamped into `1..=m`), and an image
//! signature is the region-major concatenation of those blocks.

use std::fmt;

use bitvec::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureRegion;
use crate::imaging::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ImageId(pub u32);

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorPalette {
    colors: Vec<[f64; 3]>,
}

impl ColorPalette {
    pub fn new(colors: Vec<[f64; 3]>) -> Result<ColorPalette> {
        if colors.len() < 2 {
            return Err(Error::InvalidPalette("a palette needs at least two colours".into()));
        }
        if colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidPalette("colour component outside [0, 1]".into()));
        }
        for (i, a) in colors.iter().enumerate() {
            if let Some(j) = colors[..i].iter().position(|b| b == a) {
                return Err(Error::InvalidPalette(format!("colours {j} and {i} are identical")));
            }
        }
        Ok(ColorPalette { colors })
    }

    pub fn colors(&self) -> &[[f64; 3]] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// One colour per line, three space-separated components.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for [r, g, b] in &self.colors {
            out.push_str(&format!("{r} {g} {b}\n"));
        }
        out
    }

    /// Parses [`ColorPalette::to_text`] output. Blank lines and `#` comments
    /// are ignored.
    pub fn from_text(text: &str) -> Result<ColorPalette> {
        let mut colors = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidPalette(format!("line {}: {e}", lineno + 1)))?;
            let [r, g, b] = values[..] else {
                return Err(Error::InvalidPalette(format!(
                    "line {}: expected 3 components, found {}",
                    lineno + 1,
                    values.len()
                )));
            };
            colors.push([r, g, b]);
        }
        ColorPalette::new(colors)
    }
}

/// The shipped 32-colour palette: a 4x4x2 RGB lattice, red-major then
/// green then blue.
pub fn default_palette() -> ColorPalette {
    const RG: [f64; 4] = [0.125, 0.375, 0.625, 0.875];
    const B: [f64; 2] = [0.25, 0.75];
    let mut colors = Vec::with_capacity(32);
    for r in RG {
        for g in RG {
            for b in B {
                colors.push([r, g, b]);
            }
        }
    }
    ColorPalette { colors }
}

/// Index of the palette colour closest in RGB; ties go to the lower index.
pub fn nearest_palette_color(pixel: [f64; 3], palette: &ColorPalette) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in palette.colors.iter().enumerate() {
        let d = (pixel[0] - c[0]).powi(2) + (pixel[1] - c[1]).powi(2) + (pixel[2] - c[2]).powi(2);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionHistogram {
    pub values: Vec<f64>,
}

impl RegionHistogram {
    /// Normalizes raw counts to unit sum.
    pub fn from_counts(counts: &[u64]) -> Result<RegionHistogram> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyRegion);
        }
        Ok(RegionHistogram {
            values: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }
}

/// Palette histogram of the pixels with `(x - cx)^2 + (y - cy)^2 <= r^2`
/// that fall inside the image.
pub fn region_histogram(
    img: &RasterImage,
    region: &FeatureRegion,
    palette: &ColorPalette,
) -> Result<RegionHistogram> {
    let (cx, cy) = region.center;
    let r = region.radius;
    if !(r >= 0.0 && r.is_finite() && cx.is_finite() && cy.is_finite()) {
        return Err(Error::EmptyRegion);
    }
    let x_lo = (cx - r).ceil().max(0.0);
    let y_lo = (cy - r).ceil().max(0.0);
    let x_hi = (cx + r).floor().min(img.width() as f64 - 1.0);
    let y_hi = (cy + r).floor().min(img.height() as f64 - 1.0);
    if x_lo > x_hi || y_lo > y_hi {
        return Err(Error::EmptyRegion);
    }
    let mut counts = vec![0u64; palette.len()];
    for y in y_lo as usize..=y_hi as usize {
        for x in x_lo as usize..=x_hi as usize {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                counts[nearest_palette_color(img.pixel(x, y), palette)] += 1;
            }
        }
    }
    RegionHistogram::from_counts(&counts)
}

/// One `m`-bit block, bit 1 first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureBlock {
    pub bits: BitVec<u8, Msb0>,
}

impl SignatureBlock {
    pub fn width(&self) -> usize {
        self.bits.len()
    }

    /// 1-indexed positions of the set bits.
    pub fn set_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones().map(|i| i + 1)
    }
}

/// 1-indexed bit position for histogram value `h` in an `m`-bit block.
#[inline]
pub fn block_position(h: f64, m: usize) -> usize {
    let raw = ((h + 0.05) * m as f64).ceil();
    raw.clamp(1.0, m as f64) as usize
}

/// Whether `h` needed clamping to fit into `m` bits.
pub fn is_clamped(h: f64, m: usize) -> bool {
    let raw = ((h + 0.05) * m as f64).ceil();
    raw < 1.0 || raw > m as f64
}

pub fn encode_block(h: f64, m: usize) -> SignatureBlock {
    let mut bits = bitvec![u8, Msb0; 0; m];
    bits.set(block_position(h, m) - 1, true);
    SignatureBlock { bits }
}

/// `sum over set bits of 100 * position / m`.
pub fn block_weight(block: &SignatureBlock, m: usize) -> f64 {
    let positions: usize = block.set_positions().sum();
    100.0 * positions as f64 / m as f64
}

/// The stored unit: `regions * palette_size` blocks of `block_width` bits,
/// region-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSignature {
    id: ImageId,
    regions: usize,
    palette_size: usize,
    block_width: usize,
    bits: BitVec<u8, Msb0>,
}

impl ImageSignature {
    pub fn from_histograms(
        id: ImageId,
        histograms: &[RegionHistogram],
        block_width: usize,
    ) -> Result<ImageSignature> {
        if block_width < 2 {
            return Err(Error::InvalidParameter("block width m must be at least 2".into()));
        }
        let Some(first) = histograms.first() else {
            return Err(Error::InvalidParameter("a signature needs at least one region".into()));
        };
        let n = first.values.len();
        if histograms.iter().any(|h| h.values.len() != n) {
            return Err(Error::InvalidParameter("histograms differ in palette size".into()));
        }
        let mut bits = bitvec![u8, Msb0; 0; histograms.len() * n * block_width];
        for (b, &h) in histograms.iter().flat_map(|h| h.values.iter()).enumerate() {
            bits.set(b * block_width + block_position(h, block_width) - 1, true);
        }
        Ok(ImageSignature { id, regions: histograms.len(), palette_size: n, block_width, bits })
    }

    /// Rebuilds a signature from its packed hexadecimal form.
    pub fn from_hex(
        id: ImageId,
        regions: usize,
        palette_size: usize,
        block_width: usize,
        hex: &str,
    ) -> Result<ImageSignature> {
        let nbits = regions * palette_size * block_width;
        if hex.len() != 2 * nbits.div_ceil(8) {
            return Err(Error::Corrupt(format!(
                "signature of image {id} has {} hex digits, expected {}",
                hex.len(),
                2 * nbits.div_ceil(8)
            )));
        }
        let bytes = (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
            .collect::<std::result::Result<Vec<u8>, _>>()
            .map_err(|e| Error::Corrupt(format!("signature of image {id}: {e}")))?;
        let mut bits = BitVec::<u8, Msb0>::from_vec(bytes);
        if bits[nbits..].any() {
            return Err(Error::Corrupt(format!("signature of image {id} has padding bits set")));
        }
        bits.truncate(nbits);
        Ok(ImageSignature { id, regions, palette_size, block_width, bits })
    }

    /// Packed bits as lowercase hex, bit 1 of block 1 in the top bit of the
    /// first byte, zero padded to a whole byte.
    pub fn to_hex(&self) -> String {
        let mut padded = self.bits.clone();
        padded.set_uninitialized(false);
        padded.as_raw_slice().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn id(&self) -> ImageId {
        self.id
    }

    pub fn with_id(mut self, id: ImageId) -> ImageSignature {
        self.id = id;
        self
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn palette_size(&self) -> usize {
        self.palette_size
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    pub fn bit_len(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &BitSlice<u8, Msb0> {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn block(&self, region: usize, color: usize) -> SignatureBlock {
        let m = self.block_width;
        let start = (region * self.palette_size + color) * m;
        SignatureBlock { bits: self.bits[start..start + m].to_bitvec() }
    }

    pub fn blocks(&self) -> impl Iterator<Item = SignatureBlock> + '_ {
        self.bits.chunks(self.block_width).map(|c| SignatureBlock { bits: c.to_bitvec() })
    }

    pub fn is_compatible(&self, other: &ImageSignature) -> bool {
        self.palette_size == other.palette_size && self.block_width == other.block_width
    }
}

pub fn image_signature(
    id: ImageId,
    regions: &[FeatureRegion],
    img: &RasterImage,
    palette: &ColorPalette,
    block_width: usize,
) -> Result<ImageSignature> {
    let histograms = regions
        .iter()
        .map(|r| region_histogram(img, r, palette))
        .collect::<Result<Vec<_>>>()?;
    ImageSignature::from_histograms(id, &histograms, block_width)
}

/// Per-colour weights aggregated over all regions.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// For every palette colour, the sum over regions of that colour's block
/// weight. Positions are summed as integers first, so the result does not
/// depend on region order.
pub fn signature_weights(sig: &ImageSignature) -> WeightVector {
    let (n, m) = (sig.palette_size, sig.block_width);
    let mut position_sums = vec![0u64; n];
    for i in sig.bits.iter_ones() {
        let block = i / m;
        position_sums[block % n] += (i % m + 1) as u64;
    }
    WeightVector {
        weights: position_sums.iter().map(|&s| 100.0 * s as f64 / m as f64).collect(),
    }
}
