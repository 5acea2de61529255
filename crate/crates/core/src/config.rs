//! Flat `key = value` configuration covering every tunable of the engine.
//!
//! Unknown keys are rejected and missing keys take their defaults. The
//! canonical rendering from [`Config::to_text`] lists every key in a fixed
//! order, so it can be embedded verbatim into index and report files.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::features::{ResponseThreshold, ScaleSpaceParams};
use crate::signatures::{default_palette, ColorPalette};

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSetting {
    /// Quarter of the median pairwise distance over a sample.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PaletteSource {
    Default,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Images are resampled to `size` x `size` before feature extraction.
    pub size: usize,
    pub features: ScaleSpaceParams,
    /// Bits per signature block (`m`).
    pub block_width: usize,
    pub palette: PaletteSource,
    pub theta: ThetaSetting,
    pub theta_sample: usize,
    pub k_edge: u32,
    pub cutoffs: Vec<usize>,
    pub sample: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            size: 256,
            features: ScaleSpaceParams::default(),
            block_width: 10,
            palette: PaletteSource::Default,
            theta: ThetaSetting::Auto,
            theta_sample: 100,
            k_edge: 2,
            cutoffs: vec![20],
            sample: 200,
            seed: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "size",
    "alpha",
    "sigma_d_levels",
    "sigma_ratio",
    "threshold_mode",
    "threshold",
    "neighborhood_radius",
    "max_regions",
    "block_width",
    "palette",
    "theta",
    "theta_sample",
    "k_edge",
    "cutoffs",
    "sample",
    "seed",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl Config {
    /// Parses `key = value` lines on top of the defaults, then validates.
    pub fn parse(text: &str) -> Result<Config> {
        let mut config = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", lineno + 1)));
            };
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Config> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key. Does not validate cross-key constraints.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "size" => self.size = parse_num(key, value)?,
            "alpha" => self.features.alpha = parse_num(key, value)?,
            "sigma_d_levels" => self.features.sigma_d_levels = parse_list(key, value)?,
            "sigma_ratio" => self.features.sigma_ratio = parse_num(key, value)?,
            "threshold_mode" => {
                let t = self.threshold_value();
                self.features.response_threshold = match value {
                    "relative" => ResponseThreshold::RelativeToMax(t),
                    "absolute" => ResponseThreshold::Absolute(t),
                    _ => return Err(Error::Config(format!("threshold_mode must be relative or absolute, got {value:?}"))),
                }
            }
            "threshold" => {
                let t = parse_num(key, value)?;
                self.features.response_threshold = match self.features.response_threshold {
                    ResponseThreshold::RelativeToMax(_) => ResponseThreshold::RelativeToMax(t),
                    ResponseThreshold::Absolute(_) => ResponseThreshold::Absolute(t),
                }
            }
            "neighborhood_radius" => self.features.neighborhood_radius = parse_num(key, value)?,
            "max_regions" => self.features.max_regions = parse_num(key, value)?,
            "block_width" => self.block_width = parse_num(key, value)?,
            "palette" => {
                self.palette = match value {
                    "default" => PaletteSource::Default,
                    path => PaletteSource::File(PathBuf::from(path)),
                }
            }
            "theta" => {
                self.theta = match value {
                    "auto" => ThetaSetting::Auto,
                    v => ThetaSetting::Fixed(parse_num(key, v)?),
                }
            }
            "theta_sample" => self.theta_sample = parse_num(key, value)?,
            "k_edge" => self.k_edge = parse_num(key, value)?,
            "cutoffs" => self.cutoffs = parse_list(key, value)?,
            "sample" => self.sample = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    fn threshold_value(&self) -> f64 {
        match self.features.response_threshold {
            ResponseThreshold::RelativeToMax(t) | ResponseThreshold::Absolute(t) => t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.size == 0 {
            return bad("size must be positive");
        }
        self.features.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.block_width < 2 {
            return bad("block_width must be at least 2");
        }
        if let ThetaSetting::Fixed(t) = self.theta {
            if !(t > 0.0 && t.is_finite()) {
                return bad("theta must be positive");
            }
        }
        if self.theta_sample < 2 {
            return bad("theta_sample must be at least 2");
        }
        if self.k_edge == 0 {
            return bad("k_edge must be at least 1");
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return bad("cutoffs must be a non-empty list of positive counts");
        }
        if self.sample == 0 {
            return bad("sample must be positive");
        }
        Ok(())
    }

    /// One `key = value` line per key, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let f = &self.features;
        let (mode, t) = match f.response_threshold {
            ResponseThreshold::RelativeToMax(t) => ("relative", t),
            ResponseThreshold::Absolute(t) => ("absolute", t),
        };
        let palette = match &self.palette {
            PaletteSource::Default => "default".to_string(),
            PaletteSource::File(p) => p.display().to_string(),
        };
        let theta = match self.theta {
            ThetaSetting::Auto => "auto".to_string(),
            ThetaSetting::Fixed(t) => t.to_string(),
        };
        let values = [
            self.size.to_string(),
            f.alpha.to_string(),
            join(&f.sigma_d_levels),
            f.sigma_ratio.to_string(),
            mode.to_string(),
            t.to_string(),
            f.neighborhood_radius.to_string(),
            f.max_regions.to_string(),
            self.block_width.to_string(),
            palette,
            theta,
            self.theta_sample.to_string(),
            self.k_edge.to_string(),
            join(&self.cutoffs),
            self.sample.to_string(),
            self.seed.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn load_palette(&self) -> Result<ColorPalette> {
        match &self.palette {
            PaletteSource::Default => Ok(default_palette()),
            PaletteSource::File(p) => ColorPalette::from_text(&std::fs::read_to_string(p)?),
        }
    }
}
