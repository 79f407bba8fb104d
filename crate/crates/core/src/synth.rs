//! Synthetic clustered scatterplot stimuli.
//!
//! # Random stream
//!
//! Generation draws from a single `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)`, in this fixed order:
//!
//! 1. For each center: two `f64` uniforms in `[0, 1)` (x then y), mapped to
//!    the safe zone `[S, X - S] x [S, Y - S]`.
//! 2. For each cluster in index order, for each of its share of points: two
//!    `StandardNormal` `f64` draws (x then y), scaled by `S` and offset by the
//!    center. Draws landing outside `[0, X) x [0, Y)` are dropped and not
//!    redrawn.
//! 3. For each noise point: two `f64` uniforms (x then y) scaled to the
//!    image.
//!
//! Replaying this order reproduces a dataset exactly.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distance::CenterSet;
use crate::serde_util::SchemaVersion;
use crate::{Error, Result, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GenParams<T> {
    pub width: u32,
    pub height: u32,
    pub cluster_count: usize,
    /// Standard deviation of each isotropic normal cluster, in pixels.
    pub distribution_size: T,
    pub point_count: usize,
    /// Signal-to-noise ratio; `10` means one noise point per ten signal points.
    pub snr: T,
}

impl<T: Scalar> GenParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param(
                "width/height",
                "image dimensions must be positive",
            ));
        }
        if self.cluster_count == 0 {
            return Err(Error::param(
                "cluster_count",
                "at least one cluster is required",
            ));
        }
        let s = self.distribution_size;
        if !(s.is_finite() && s > T::zero()) {
            return Err(Error::param("distribution_size", "must be finite and > 0"));
        }
        if !(self.snr.is_finite() && self.snr > T::zero()) {
            return Err(Error::param("snr", "must be finite and > 0"));
        }
        let half = T::from_count(self.width.min(self.height) as usize) / T::lit(2.0);
        if s > half {
            return Err(Error::param(
                "distribution_size",
                format!("safe zone is empty: S = {s} exceeds min(X, Y) / 2 = {half}"),
            ));
        }
        Ok(())
    }

    /// Noise point count, `N / snr` rounded half up.
    pub fn noise_count(&self) -> usize {
        let exact = T::from_count(self.point_count) / self.snr;
        (exact + T::lit(0.5))
            .floor()
            .to_usize()
            .expect("noise count fits in usize")
    }

    /// Points allotted to cluster `index` before discards; the remainder of
    /// `N / C` goes to the lowest-indexed clusters.
    pub fn cluster_share(&self, index: usize) -> usize {
        let base = self.point_count / self.cluster_count;
        base + usize::from(index < self.point_count % self.cluster_count)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RenderParams<T> {
    /// Area of each filled circle, in square pixels.
    pub point_area: T,
    /// Opacity in `(0, 1]`.
    pub opacity: T,
}

impl<T: Scalar> RenderParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.point_area.is_finite() && self.point_area > T::zero()) {
            return Err(Error::param("point_area", "must be finite and > 0"));
        }
        if !(self.opacity > T::zero() && self.opacity <= T::one()) {
            return Err(Error::param("opacity", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn radius(&self) -> T {
        (self.point_area / T::lit(std::f64::consts::PI)).sqrt()
    }
}

/// Where a point came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    Cluster(usize),
    Noise,
}

// Serialized as the cluster index, or the string "noise".
impl Serialize for Origin {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Origin::Cluster(i) => s.serialize_u64(*i as u64),
            Origin::Noise => s.serialize_str("noise"),
        }
    }
}

impl<'de> Deserialize<'de> for Origin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct OriginVisitor;

        impl Visitor<'_> for OriginVisitor {
            type Value = Origin;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a cluster index or \"noise\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Origin, E> {
                Ok(Origin::Cluster(v as usize))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Origin, E> {
                usize::try_from(v)
                    .map(Origin::Cluster)
                    .map_err(|_| E::invalid_value(de::Unexpected::Signed(v), &self))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Origin, E> {
                match v {
                    "noise" => Ok(Origin::Noise),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        d.deserialize_any(OriginVisitor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Point<T> {
    pub x: T,
    pub y: T,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "RawDataset<T>")]
pub struct Dataset<T> {
    schema: SchemaVersion,
    pub params: GenParams<T>,
    pub centers: Vec<[T; 2]>,
    pub points: Vec<Point<T>>,
}

#[derive(Deserialize)]
#[serde(bound = "T: Scalar")]
struct RawDataset<T> {
    #[serde(default)]
    #[allow(dead_code)]
    schema: SchemaVersion,
    params: GenParams<T>,
    centers: Vec<[T; 2]>,
    points: Vec<Point<T>>,
}

impl<T: Scalar> TryFrom<RawDataset<T>> for Dataset<T> {
    type Error = Error;

    fn try_from(raw: RawDataset<T>) -> Result<Self> {
        Dataset::new(raw.params, raw.centers, raw.points)
    }
}

impl<T: Scalar> Dataset<T> {
    /// Wraps externally supplied data. Parameters must be valid and all
    /// coordinates finite; positions are not otherwise constrained.
    pub fn new(params: GenParams<T>, centers: Vec<[T; 2]>, points: Vec<Point<T>>) -> Result<Self> {
        params.validate()?;
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::data("centers", "non-finite coordinate"));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::data("points", "non-finite coordinate"));
        }
        Ok(Self {
            schema: SchemaVersion,
            params,
            centers,
            points,
        })
    }

    pub fn center_set(&self) -> Result<CenterSet<T>> {
        CenterSet::new(self.centers.clone())
    }

    pub fn noise_points(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.origin == Origin::Noise)
            .count()
    }

    /// Per-cluster retained point counts.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centers.len()];
        for p in &self.points {
            if let Origin::Cluster(i) = p.origin {
                if let Some(s) = sizes.get_mut(i) {
                    *s += 1;
                }
            }
        }
        sizes
    }

    /// Uniform random subsample of `n` points without replacement, keeping
    /// the original point order. Returns a copy unchanged when `n` is at
    /// least the current point count.
    pub fn subsample(&self, n: usize, seed: u64) -> Self {
        let mut out = self.clone();
        if n >= self.points.len() {
            return out;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = index::sample(&mut rng, self.points.len(), n).into_vec();
        keep.sort_unstable();
        out.points = keep.into_iter().map(|i| self.points[i]).collect();
        out
    }
}

fn in_bounds<T: Scalar>(x: T, y: T, w: T, h: T) -> bool {
    x >= T::zero() && x < w && y >= T::zero() && y < h
}

/// Clamps a coordinate that rounding pushed onto the open upper bound.
fn below<T: Scalar>(v: T, bound: T) -> T {
    if v < bound {
        v
    } else {
        bound - bound * T::epsilon()
    }
}

/// Cluster centers `generate_dataset` would produce for `seed`, without
/// drawing any points. Cheap enough for rejection sampling over seeds.
pub fn generate_centers<T: Scalar>(params: &GenParams<T>, seed: u64) -> Result<Vec<[T; 2]>> {
    params.validate()?;
    Ok(draw_centers(params, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn draw_centers<T: Scalar>(params: &GenParams<T>, rng: &mut ChaCha8Rng) -> Vec<[T; 2]> {
    let w = T::from_count(params.width as usize);
    let h = T::from_count(params.height as usize);
    let s = params.distribution_size;
    let two = T::lit(2.0);
    (0..params.cluster_count)
        .map(|_| {
            let ux = T::lit(rng.random::<f64>());
            let uy = T::lit(rng.random::<f64>());
            let x = (s + ux * (w - two * s)).max(s).min(w - s);
            let y = (s + uy * (h - two * s)).max(s).min(h - s);
            [x, y]
        })
        .collect()
}

/// Generates a clustered dataset. Deterministic for a fixed `(params, seed)`.
pub fn generate_dataset<T: Scalar>(params: &GenParams<T>, seed: u64) -> Result<Dataset<T>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = T::from_count(params.width as usize);
    let h = T::from_count(params.height as usize);
    let s = params.distribution_size;
    let centers = draw_centers(params, &mut rng);

    let mut points = Vec::with_capacity(params.point_count + params.noise_count());
    for (i, c) in centers.iter().enumerate() {
        for _ in 0..params.cluster_share(i) {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            let x = c[0] + s * T::lit(zx);
            let y = c[1] + s * T::lit(zy);
            if in_bounds(x, y, w, h) {
                points.push(Point {
                    x,
                    y,
                    origin: Origin::Cluster(i),
                });
            }
        }
    }

    for _ in 0..params.noise_count() {
        let x = below(T::lit(rng.random::<f64>() * params.width as f64), w);
        let y = below(T::lit(rng.random::<f64>() * params.height as f64), h);
        points.push(Point {
            x,
            y,
            origin: Origin::Noise,
        });
    }

    Dataset::new(params.clone(), centers, points)
}

/// Grayscale stimulus, row-major, `1.0` = white background, `0.0` = full ink.
#[derive(Clone, Debug, PartialEq)]
pub struct StimulusImage<T> {
    width: u32,
    height: u32,
    intensity: Vec<T>,
}

impl<T: Scalar> StimulusImage<T> {
    pub fn white(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            intensity: vec![T::one(); width as usize * height as usize],
        }
    }

    pub fn from_intensity(width: u32, height: u32, intensity: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("image", "dimensions must be positive"));
        }
        if intensity.len() != width as usize * height as usize {
            return Err(Error::param(
                "image",
                "intensity length does not match dimensions",
            ));
        }
        if intensity
            .iter()
            .any(|v| v.is_nan() || *v < T::zero() || *v > T::one())
        {
            return Err(Error::param("image", "intensities must lie in [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            intensity,
        })
    }

    /// Maps 8-bit gray levels with `255 -> 1.0`.
    pub fn from_gray8(width: u32, height: u32, levels: &[u8]) -> Result<Self> {
        let scale = T::lit(255.0);
        let intensity = levels
            .iter()
            .map(|v| T::from_count(*v as usize) / scale)
            .collect();
        Self::from_intensity(width, height, intensity)
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.intensity
            .iter()
            .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn intensity(&self) -> &[T] {
        &self.intensity
    }

    pub fn get(&self, x: u32, y: u32) -> T {
        self.intensity[y as usize * self.width as usize + x as usize]
    }
}

/// Renders each point as a filled disk of area `P` composited with opacity
/// `O` over a white background.
///
/// A pixel is covered by a disk when its center lies within `sqrt(P / pi)` of
/// the point. A pixel covered `k` times ends with intensity `(1 - O)^k`, which
/// makes the result independent of point order.
pub fn rasterize<T: Scalar>(
    dataset: &Dataset<T>,
    render: &RenderParams<T>,
) -> Result<StimulusImage<T>> {
    render.validate()?;
    let (w, h) = (dataset.params.width, dataset.params.height);
    if w == 0 || h == 0 {
        return Err(Error::param(
            "width/height",
            "image dimensions must be positive",
        ));
    }
    let mut hits = vec![0u32; w as usize * h as usize];
    let r2 = render.point_area / T::lit(std::f64::consts::PI);
    let r = r2.sqrt();
    let half = T::lit(0.5);
    let (wf, hf) = (w as f64, h as f64);

    for p in &dataset.points {
        let lo_x = (p.x - r - half).floor().as_f64().max(0.0);
        let hi_x = (p.x + r - half).ceil().as_f64().min(wf - 1.0);
        let lo_y = (p.y - r - half).floor().as_f64().max(0.0);
        let hi_y = (p.y + r - half).ceil().as_f64().min(hf - 1.0);
        if lo_x > hi_x || lo_y > hi_y {
            continue;
        }
        for py in lo_y as usize..=hi_y as usize {
            let dy = T::from_count(py) + half - p.y;
            for px in lo_x as usize..=hi_x as usize {
                let dx = T::from_count(px) + half - p.x;
                if dx * dx + dy * dy <= r2 {
                    hits[py * w as usize + px] += 1;
                }
            }
        }
    }

    let keep = T::one() - render.opacity;
    let intensity = hits
        .into_iter()
        .map(|k| {
            if k == 0 {
                T::one()
            } else {
                keep.powi(k as i32)
            }
        })
        .collect();
    Ok(StimulusImage {
        width: w,
        height: h,
        intensity,
    })
}

/// Fraction of the image that `n` points of area `p` would ink if spread
/// without overlap, `n * p / (x * y)`. Not capped at 1.
pub fn max_visual_density<T: Scalar>(n: usize, p: T, x: u32, y: u32) -> Result<T> {
    if x == 0 || y == 0 {
        return Err(Error::param(
            "width/height",
            "image dimensions must be positive",
        ));
    }
    if !(p.is_finite() && p >= T::zero()) {
        return Err(Error::param("point_area", "must be finite and >= 0"));
    }
    Ok(T::from_count(n) * p / (T::from_count(x as usize) * T::from_count(y as usize)))
}
