//! Harris-Laplace feature regions.
//!
//! A weighted luminance `L = (6 G*Y + 2 G*Cb + 2 G*Cr) / 10` is built at each
//! differentiation scale. The Harris measure `Det(M) - alpha Tr(M)^2` of the
//! scale-normalized second-moment matrix picks interest points, and the
//! scale-normalized Laplacian of Gaussian picks each point's radius.

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_ycbcr, Field, RasterImage, YCbCrPlanes};

/// How the minimum Harris response of an interest point is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseThreshold {
    /// Fraction of the largest response in the field being searched.
    RelativeToMax(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSpaceParams {
    pub alpha: f64,
    /// Differentiation scales, strictly increasing.
    pub sigma_d_levels: Vec<f64>,
    /// Integration scale divided by differentiation scale.
    pub sigma_ratio: f64,
    pub response_threshold: ResponseThreshold,
    /// Half-width of the square neighbourhood a point must strictly dominate.
    pub neighborhood_radius: usize,
    pub max_regions: usize,
}

impl Default for ScaleSpaceParams {
    fn default() -> Self {
        ScaleSpaceParams {
            alpha: 0.05,
            sigma_d_levels: (0..5).map(|i| 1.2 * 1.44f64.powi(i)).collect(),
            sigma_ratio: 1.4,
            response_threshold: ResponseThreshold::RelativeToMax(0.01),
            neighborhood_radius: 1,
            max_regions: 5,
        }
    }
}

impl ScaleSpaceParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if self.sigma_d_levels.is_empty() {
            return bad("at least one differentiation scale is required");
        }
        if self.sigma_d_levels.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("differentiation scales must be positive");
        }
        if self.sigma_d_levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("differentiation scales must be strictly increasing");
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio.is_finite()) {
            return bad("sigma ratio must be positive");
        }
        if self.neighborhood_radius == 0 {
            return bad("neighbourhood radius must be at least 1");
        }
        if self.max_regions == 0 {
            return bad("max_regions must be at least 1");
        }
        match self.response_threshold {
            ResponseThreshold::RelativeToMax(f) if !(0.0..=1.0).contains(&f) => {
                bad("relative threshold must lie in [0, 1]")
            }
            ResponseThreshold::Absolute(t) if !t.is_finite() => bad("threshold must be finite"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterestPoint {
    pub x: usize,
    pub y: usize,
    /// Differentiation scale the point was detected at.
    pub scale: f64,
    pub response: f64,
}

/// A feature circle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRegion {
    pub center: (f64, f64),
    pub radius: f64,
}

impl FeatureRegion {
    /// The region used when nothing is detected: the inscribed circle.
    pub fn whole_image(width: usize, height: usize) -> FeatureRegion {
        FeatureRegion {
            center: (width as f64 / 2.0, height as f64 / 2.0),
            radius: width.min(height) as f64 / 2.0,
        }
    }
}

/// Sampled Gaussian truncated at `ceil(3 sigma)` and renormalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with reflective boundaries.
pub fn gaussian_blur(field: &Field, sigma: f64) -> Field {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (field.width(), field.height());

    let mut tmp = Field::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                acc += kv * field.get_reflected(x as isize + i as isize - r, y as isize);
            }
            tmp.set(x, y, acc);
        }
    }
    let mut out = Field::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                acc += kv * tmp.get_reflected(x as isize, y as isize + i as isize - r);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// `L(x, y, sigma_d) = (6 G*Y + 2 G*Cb + 2 G*Cr) / 10`.
pub fn smoothed_luminance(planes: &YCbCrPlanes, sigma_d: f64) -> Field {
    // the blur is linear, so mix first and blur once
    let y = &planes.y;
    let mixed = Field::from_fn(y.width(), y.height(), |x, yy| {
        (6.0 * y.get(x, yy) + 2.0 * planes.cb.get(x, yy) + 2.0 * planes.cr.get(x, yy)) / 10.0
    });
    gaussian_blur(&mixed, sigma_d)
}

fn central_differences(l: &Field) -> (Field, Field) {
    let dx = Field::from_fn(l.width(), l.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        (l.get_reflected(x + 1, y) - l.get_reflected(x - 1, y)) / 2.0
    });
    let dy = Field::from_fn(l.width(), l.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        (l.get_reflected(x, y + 1) - l.get_reflected(x, y - 1)) / 2.0
    });
    (dx, dy)
}

/// Pointwise `Det(M) - alpha Tr(M)^2` with
/// `M = sigma_d^2 G(sigma_i) * [Lx^2, LxLy; LxLy, Ly^2]`.
pub fn harris_response(l: &Field, sigma_i: f64, sigma_d: f64, alpha: f64) -> Field {
    let (lx, ly) = central_differences(l);
    let norm = sigma_d * sigma_d;
    let a = gaussian_blur(&lx.zip_map(&lx, |p, q| p * q), sigma_i);
    let b = gaussian_blur(&ly.zip_map(&ly, |p, q| p * q), sigma_i);
    let c = gaussian_blur(&lx.zip_map(&ly, |p, q| p * q), sigma_i);
    Field::from_fn(l.width(), l.height(), |x, y| {
        let (a, b, c) = (norm * a.get(x, y), norm * b.get(x, y), norm * c.get(x, y));
        let det = a * b - c * c;
        let tr = a + b;
        det - alpha * tr * tr
    })
}

fn resolve_threshold(response: &Field, threshold: ResponseThreshold) -> Option<f64> {
    match threshold {
        ResponseThreshold::Absolute(t) => Some(t),
        ResponseThreshold::RelativeToMax(f) => {
            let max = response.max();
            (max > 0.0).then_some(f * max)
        }
    }
}

fn detection_order(a: &InterestPoint, b: &InterestPoint) -> std::cmp::Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.y.cmp(&b.y))
        .then(a.x.cmp(&b.x))
        .then(a.scale.total_cmp(&b.scale))
}

/// All strict neighbourhood maxima at or above the threshold, in detection
/// order, without truncation.
fn local_maxima(response: &Field, scale: f64, params: &ScaleSpaceParams) -> Vec<InterestPoint> {
    let Some(threshold) = resolve_threshold(response, params.response_threshold) else {
        return Vec::new();
    };
    let (w, h) = (response.width(), response.height());
    let r = params.neighborhood_radius;
    let mut points = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = response.get(x, y);
            if v < threshold {
                continue;
            }
            let strict_max = (y.saturating_sub(r)..=(y + r).min(h - 1)).all(|ny| {
                (x.saturating_sub(r)..=(x + r).min(w - 1))
                    .all(|nx| (nx == x && ny == y) || response.get(nx, ny) < v)
            });
            if strict_max {
                points.push(InterestPoint { x, y, scale, response: v });
            }
        }
    }
    points.sort_by(detection_order);
    points
}

/// Strict local maxima of `response` over the `(2r+1)^2` neighbourhood that
/// clear the response threshold, strongest first, ties by `(y, x)`, at most
/// `max_regions` of them.
pub fn detect_interest_points(
    response: &Field,
    scale: f64,
    params: &ScaleSpaceParams,
) -> Vec<InterestPoint> {
    let mut points = local_maxima(response, scale, params);
    points.truncate(params.max_regions);
    points
}

/// Smoothed luminance at every differentiation scale.
#[derive(Debug, Clone)]
pub struct ScaleSpace {
    levels: Vec<(f64, Field)>,
}

impl ScaleSpace {
    pub fn new(planes: &YCbCrPlanes, sigma_d_levels: &[f64]) -> ScaleSpace {
        let levels = sigma_d_levels
            .iter()
            .map(|&s| (s, smoothed_luminance(planes, s)))
            .collect();
        ScaleSpace { levels }
    }

    pub fn levels(&self) -> &[(f64, Field)] {
        &self.levels
    }

    /// `sigma^2 |Lxx + Lyy|` at `(x, y)` for every level.
    pub fn log_responses(&self, x: usize, y: usize) -> Vec<f64> {
        let (x, y) = (x as isize, y as isize);
        self.levels
            .iter()
            .map(|(s, l)| {
                let lap = l.get_reflected(x + 1, y)
                    + l.get_reflected(x - 1, y)
                    + l.get_reflected(x, y + 1)
                    + l.get_reflected(x, y - 1)
                    - 4.0 * l.get_reflected(x, y);
                s * s * lap.abs()
            })
            .collect()
    }

    /// `sqrt(2)` times the scale with the strongest interior LoG maximum,
    /// falling back to the detection scale when no level beats both of its
    /// neighbours. Clamped to half the shorter image side.
    pub fn characteristic_radius(&self, point: &InterestPoint) -> f64 {
        let values = self.log_responses(point.x, point.y);
        let mut best: Option<(usize, f64)> = None;
        for i in 1..values.len().saturating_sub(1) {
            let v = values[i];
            if v > values[i - 1] && v > values[i + 1] && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        let sigma = best.map_or(point.scale, |(i, _)| self.levels[i].0);
        let (w, h) = match self.levels.first() {
            Some((_, l)) => (l.width(), l.height()),
            None => return std::f64::consts::SQRT_2 * sigma,
        };
        let limit = w.min(h) as f64 / 2.0;
        (std::f64::consts::SQRT_2 * sigma).min(limit)
    }
}

pub fn select_characteristic_radius(
    point: &InterestPoint,
    planes: &YCbCrPlanes,
    params: &ScaleSpaceParams,
) -> f64 {
    ScaleSpace::new(planes, &params.sigma_d_levels).characteristic_radius(point)
}

/// Harris detection at every level, pooled, with cross-level suppression:
/// a point survives only if no stronger survivor lies within
/// `sqrt(2) * max(scale_a, scale_b)`.
pub fn detect_multiscale(
    space: &ScaleSpace,
    params: &ScaleSpaceParams,
) -> Vec<InterestPoint> {
    let mut pooled = Vec::new();
    for (sigma_d, l) in space.levels() {
        let response = harris_response(l, params.sigma_ratio * sigma_d, *sigma_d, params.alpha);
        pooled.extend(local_maxima(&response, *sigma_d, params));
    }
    pooled.sort_by(detection_order);

    let mut kept: Vec<InterestPoint> = Vec::new();
    for p in pooled {
        if kept.len() == params.max_regions {
            break;
        }
        let suppressed = kept.iter().any(|q| {
            let dx = p.x as f64 - q.x as f64;
            let dy = p.y as f64 - q.y as f64;
            let reach = std::f64::consts::SQRT_2 * p.scale.max(q.scale);
            dx * dx + dy * dy <= reach * reach
        });
        if !suppressed {
            kept.push(p);
        }
    }
    kept
}

/// Full pipeline from a size-normalized image to at most `max_regions`
/// feature circles, never fewer than one.
pub fn extract_feature_regions(
    img: &RasterImage,
    params: &ScaleSpaceParams,
) -> Result<Vec<FeatureRegion>> {
    params.validate()?;
    let planes = rgb_to_ycbcr(img);
    let space = ScaleSpace::new(&planes, &params.sigma_d_levels);
    let points = detect_multiscale(&space, params);
    if points.is_empty() {
        return Ok(vec![FeatureRegion::whole_image(img.width(), img.height())]);
    }
    Ok(points
        .iter()
        .map(|p| FeatureRegion {
            center: (p.x as f64, p.y as f64),
            radius: space.characteristic_radius(p),
        })
        .collect())
}

/// Dark image with a bright axis-aligned square covering pixels
/// `[x0, x0 + side) x [y0, y0 + side)`.
pub fn synthetic_square(size: usize, x0: usize, y0: usize, side: usize) -> RasterImage {
    RasterImage::from_fn(size, size, |x, y| {
        let inside = (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y);
        if inside {
            [0.9, 0.9, 0.9]
        } else {
            [0.1, 0.1, 0.1]
        }
    })
    .expect("valid synthetic image")
}
