//! Geo-referenced rasters, simplex vectors, belief maps and the frame
//! transforms between patch pixels and the planar world frame.
//!
//! Pixel convention: `u` is the row, `v` the column, origin at the top-left
//! pixel centre. A pose's heading rotates the `(u, v)` axes counter-clockwise
//! onto the world `(x, y)` axes, so at heading 0 rows run along `x`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Clamp applied to simplex entries wherever a logarithm, square root or
/// reciprocal would otherwise blow up.
pub const EPS_CLAMP: f64 = 1e-12;

/// Tolerance on the unit-sum constraint of a [`SimplexVec`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPose {
    pub x: f64,
    pub y: f64,
    heading: f64,
}

impl WorldPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn set_heading(&mut self, heading: f64) {
        self.heading = normalize_angle(heading);
    }

    pub fn distance(&self, other: &WorldPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl Default for WorldPose {
    fn default() -> Self {
        Self::origin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelCoord {
    pub u: usize,
    pub v: usize,
}

impl PixelCoord {
    pub fn new(u: usize, v: usize) -> Self {
        Self { u, v }
    }
}

/// Maps a continuous patch pixel position to world metres.
pub fn patch_to_world_f(pose: &WorldPose, scale: f64, row: f64, col: f64) -> (f64, f64) {
    let (s, c) = pose.heading.sin_cos();
    let x = pose.x + (c * row - s * col) / scale;
    let y = pose.y + (s * row + c * col) / scale;
    (x, y)
}

/// Maps a world position to continuous patch pixel coordinates `(row, col)`.
pub fn world_to_patch_f(pose: &WorldPose, scale: f64, x: f64, y: f64) -> (f64, f64) {
    let (s, c) = pose.heading.sin_cos();
    let dx = (x - pose.x) * scale;
    let dy = (y - pose.y) * scale;
    (c * dx + s * dy, -s * dx + c * dy)
}

pub fn patch_to_world(pose: &WorldPose, scale: f64, p: PixelCoord) -> (f64, f64) {
    patch_to_world_f(pose, scale, p.u as f64, p.v as f64)
}

pub fn world_to_patch(pose: &WorldPose, scale: f64, x: f64, y: f64) -> (f64, f64) {
    world_to_patch_f(pose, scale, x, y)
}

/// Geo-reference of a grid: pose of pixel (0, 0), scale in pixel/m and size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchFrame {
    pub pose: WorldPose,
    pub scale: f64,
    pub height: usize,
    pub width: usize,
}

impl PatchFrame {
    pub fn to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        world_to_patch_f(&self.pose, self.scale, x, y)
    }

    pub fn to_world(&self, row: f64, col: f64) -> (f64, f64) {
        patch_to_world_f(&self.pose, self.scale, row, col)
    }

    /// Nearest in-bounds pixel of a world point, if any.
    pub fn nearest_pixel(&self, x: f64, y: f64) -> Option<PixelCoord> {
        let (r, c) = self.to_pixel(x, y);
        let (r, c) = (r.round(), c.round());
        if r < 0.0 || c < 0.0 || r > (self.height - 1) as f64 || c > (self.width - 1) as f64 {
            return None;
        }
        Some(PixelCoord::new(r as usize, c as usize))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (r, c) = self.to_pixel(x, y);
        r >= 0.0 && c >= 0.0 && r <= (self.height - 1) as f64 && c <= (self.width - 1) as f64
    }
}

/// Multi-channel 2D grid, row-major and channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    pub scale: f64,
    pub geo_pose: WorldPose,
}

impl Raster {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
        scale: f64,
        geo_pose: WorldPose,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::arg(format!(
                "raster dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::arg(format!(
                "raster payload has {} values, expected {}",
                data.len(),
                height * width * channels
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::arg(format!("raster scale must be positive, got {scale}")));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::arg(format!("non-finite raster value at index {i}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
            scale,
            geo_pose,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
            1.0,
            WorldPose::origin(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Applies `f` to every value, keeping geometry and geo-reference.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            data: self.data.iter().map(|&x| f(x)).collect(),
            ..self.clone()
        }
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn frame(&self) -> PatchFrame {
        PatchFrame {
            pose: self.geo_pose,
            scale: self.scale,
            height: self.height,
            width: self.width,
        }
    }

    pub fn with_geo(mut self, scale: f64, geo_pose: WorldPose) -> Self {
        self.scale = scale;
        self.geo_pose = geo_pose;
        self
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            })
    }

    /// Per-channel (min, max) over all pixels.
    pub fn channel_ranges(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (r, &x) in out.iter_mut().zip(px) {
                r.0 = r.0.min(x);
                r.1 = r.1.max(x);
            }
        }
        out
    }

    /// Rotates the grid by `quarter_turns` x 90 degrees counter-clockwise.
    pub fn rotate90(&self, quarter_turns: u8) -> Raster {
        let q = quarter_turns % 4;
        if q == 0 {
            return self.clone();
        }
        let (h, w, ch) = (self.height, self.width, self.channels);
        let (oh, ow) = if q % 2 == 1 { (w, h) } else { (h, w) };
        let mut data = vec![0.0; self.data.len()];
        for r in 0..oh {
            for c in 0..ow {
                let (sr, sc) = match q {
                    1 => (c, w - 1 - r),
                    2 => (h - 1 - r, w - 1 - c),
                    _ => (h - 1 - c, r),
                };
                let dst = (r * ow + c) * ch;
                data[dst..dst + ch].copy_from_slice(self.pixel(sr, sc));
            }
        }
        Raster {
            height: oh,
            width: ow,
            channels: ch,
            data,
            scale: self.scale,
            geo_pose: self.geo_pose,
        }
    }
}

/// Channel-wise bilinear interpolation at a continuous `(row, col)`.
pub fn bilinear_sample(raster: &Raster, row: f64, col: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; raster.channels];
    bilinear_sample_into(raster, row, col, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`bilinear_sample`].
pub fn bilinear_sample_into(raster: &Raster, row: f64, col: f64, out: &mut [f64]) -> Result<()> {
    let max_r = (raster.height - 1) as f64;
    let max_c = (raster.width - 1) as f64;
    if !(row >= 0.0 && row <= max_r && col >= 0.0 && col <= max_c) {
        return Err(Error::range(format!(
            "sample ({row}, {col}) outside raster {}x{}",
            raster.height, raster.width
        )));
    }
    let r0 = (row.floor() as usize).min(raster.height - 1);
    let c0 = (col.floor() as usize).min(raster.width - 1);
    let r1 = (r0 + 1).min(raster.height - 1);
    let c1 = (c0 + 1).min(raster.width - 1);
    let fr = row - r0 as f64;
    let fc = col - c0 as f64;
    let p00 = raster.pixel(r0, c0);
    let p01 = raster.pixel(r0, c1);
    let p10 = raster.pixel(r1, c0);
    let p11 = raster.pixel(r1, c1);
    for (ch, o) in out.iter_mut().enumerate().take(raster.channels) {
        let top = if fc == 0.0 {
            p00[ch]
        } else {
            (1.0 - fc) * p00[ch] + fc * p01[ch]
        };
        let bottom = if fc == 0.0 {
            p10[ch]
        } else {
            (1.0 - fc) * p10[ch] + fc * p11[ch]
        };
        *o = if fr == 0.0 {
            top
        } else {
            (1.0 - fr) * top + fr * bottom
        };
    }
    Ok(())
}

/// A discrete probability distribution over `C` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVec(Vec<f64>);

impl SimplexVec {
    /// Validates nonnegativity and unit sum (within [`SIMPLEX_TOL`]).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, SIMPLEX_TOL)?;
        Ok(Self(probs))
    }

    /// Accepts a vector that is a simplex up to `tol`, then renormalizes it.
    pub fn with_tolerance(mut probs: Vec<f64>, tol: f64) -> Result<Self> {
        check_simplex(&probs, tol)?;
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        Ok(Self(probs))
    }

    /// Accepts a vector that is a simplex up to `tol` and keeps it unchanged.
    pub(crate) fn checked(probs: Vec<f64>, tol: f64) -> Result<Self> {
        check_simplex(&probs, tol)?;
        Ok(Self(probs))
    }

    /// Normalizes a nonnegative vector with positive sum.
    pub fn from_unnormalized(mut v: Vec<f64>) -> Result<Self> {
        if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::arg("cannot normalize: entries must be finite and >= 0"));
        }
        let s: f64 = v.iter().sum();
        if s <= 0.0 {
            return Err(Error::arg("cannot normalize a zero vector"));
        }
        v.iter_mut().for_each(|x| *x /= s);
        Ok(Self(v))
    }

    pub fn uniform(c: usize) -> Self {
        Self(vec![1.0 / c as f64; c])
    }

    pub fn one_hot(c: usize, k: usize) -> Self {
        let mut v = vec![0.0; c];
        v[k] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SimplexVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_simplex(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::arg("simplex vector must be non-empty"));
    }
    if let Some((i, x)) = p.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::arg(format!("simplex entry {i} = {x} is not a nonnegative number")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::arg(format!("simplex entries sum to {s}, not 1")));
    }
    Ok(())
}

/// H x W grid of simplex vectors produced by the map encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl BeliefMap {
    /// Builds a belief map, validating every pixel at [`SIMPLEX_TOL`].
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(height, width, channels, data, SIMPLEX_TOL)
    }

    /// Builds a belief map validating each pixel at `tol`; pixels are kept as given.
    pub fn with_tolerance(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::arg("belief map dimensions must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::arg(format!(
                "belief map payload has {} values, expected {}",
                data.len(),
                height * width * channels
            )));
        }
        for (i, px) in data.chunks_exact(channels).enumerate() {
            check_simplex(px, tol).map_err(|e| {
                Error::arg(format!("belief pixel ({}, {}): {e}", i / width, i % width))
            })?;
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Internal constructor for encoder output that is a simplex by construction.
    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn uniform(height: usize, width: usize, channels: usize) -> Self {
        Self::from_parts_unchecked(
            height,
            width,
            channels,
            vec![1.0 / channels as f64; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, u: usize, v: usize) -> &[f64] {
        let i = (u * self.width + v) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn in_bounds(&self, p: PixelCoord) -> bool {
        p.u < self.height && p.v < self.width
    }
}

/// The belief stored at a pixel; no interpolation.
pub fn belief_at(bm: &BeliefMap, p: PixelCoord) -> Result<SimplexVec> {
    if !bm.in_bounds(p) {
        return Err(Error::range(format!(
            "pixel ({}, {}) outside belief map {}x{}",
            p.u, p.v, bm.height, bm.width
        )));
    }
    Ok(SimplexVec(bm.pixel(p.u, p.v).to_vec()))
}
