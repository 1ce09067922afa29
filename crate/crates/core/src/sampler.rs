//! Cross-scale data tuples `(M, O, P)` and the observation augmentation family.
//!
//! A tuple is sampled by drawing a map patch at a random centre and rotation
//! from the map source, drawing pixel coordinates inside a keep-in margin of
//! the patch, lifting them to world coordinates and cropping axis-aligned
//! observations from the observation source around those points.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{
    bilinear_sample_into, patch_to_world, patch_to_world_f, world_to_patch_f, PixelCoord, Raster,
    WorldPose,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DataTuple {
    pub map_patch: Raster,
    pub observations: Vec<Raster>,
    pub coords: Vec<PixelCoord>,
    pub patch_pose: WorldPose,
}

impl DataTuple {
    pub fn new(
        map_patch: Raster,
        observations: Vec<Raster>,
        coords: Vec<PixelCoord>,
    ) -> Result<Self> {
        if observations.is_empty() || observations.len() != coords.len() {
            return Err(Error::arg(format!(
                "tuple has {} observations and {} coordinates",
                observations.len(),
                coords.len()
            )));
        }
        if let Some(p) = coords
            .iter()
            .find(|p| p.u >= map_patch.height() || p.v >= map_patch.width())
        {
            return Err(Error::range(format!(
                "coordinate ({}, {}) outside map patch",
                p.u, p.v
            )));
        }
        let patch_pose = map_patch.geo_pose;
        Ok(Self {
            map_patch,
            observations,
            coords,
            patch_pose,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.observations.len()
    }

    /// World position of observation `j`.
    pub fn obs_world(&self, j: usize) -> (f64, f64) {
        patch_to_world(&self.patch_pose, self.map_patch.scale, self.coords[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub patch_size: usize,
    pub obs_size: usize,
    pub n_obs: usize,
    /// Keep-in border of the patch for observation coordinates, map pixels.
    pub margin: usize,
    pub seed: u64,
    /// Fixed patch rotation (radians); `None` draws it uniformly in `[0, 2pi)`.
    pub rotation: Option<f64>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            patch_size: 512,
            obs_size: 224,
            n_obs: 6,
            margin: 28,
            seed: 0,
            rotation: None,
        }
    }
}

impl SampleConfig {
    /// Half-width of an observation footprint in map pixels.
    pub fn footprint_half_width(&self, map_scale: f64, obs_scale: f64) -> f64 {
        (self.obs_size as f64 / 2.0) * map_scale / obs_scale
    }

    pub fn validate(&self, map_scale: f64, obs_scale: f64) -> Result<()> {
        if self.patch_size < 8 || self.obs_size < 8 {
            return Err(Error::arg("patch_size and obs_size must be >= 8"));
        }
        if self.n_obs == 0 {
            return Err(Error::arg("n_obs must be >= 1"));
        }
        let hw = self.footprint_half_width(map_scale, obs_scale);
        if (self.margin as f64) < hw.ceil() {
            return Err(Error::arg(format!(
                "margin {} is smaller than the observation half-width {hw:.2} map pixels",
                self.margin
            )));
        }
        if 2 * self.margin >= self.patch_size {
            return Err(Error::arg("margin leaves no room for observations"));
        }
        Ok(())
    }
}

/// Crops an `size x size` observation centred on a world point.
///
/// The crop is axis-aligned with the source raster; pixel `size / 2` sits on
/// the requested point.
pub fn extract_obs(obs_src: &Raster, x: f64, y: f64, size: usize) -> Result<Raster> {
    let (rc, cc) = world_to_patch_f(&obs_src.geo_pose, obs_src.scale, x, y);
    let half = (size / 2) as f64;
    let (r0, c0) = (rc - half, cc - half);
    let ch = obs_src.channels();
    let mut data = vec![0.0; size * size * ch];
    for i in 0..size {
        for j in 0..size {
            let dst = (i * size + j) * ch;
            bilinear_sample_into(
                obs_src,
                r0 + i as f64,
                c0 + j as f64,
                &mut data[dst..dst + ch],
            )?;
        }
    }
    let (ox, oy) = patch_to_world_f(&obs_src.geo_pose, obs_src.scale, r0, c0);
    Raster::new(
        size,
        size,
        ch,
        data,
        obs_src.scale,
        WorldPose::new(ox, oy, obs_src.geo_pose.heading()),
    )
}

/// Largest distance (map pixels) from the patch centre that sampling may touch.
fn sampling_radius(cfg: &SampleConfig, hw: f64) -> f64 {
    let c = (cfg.patch_size / 2) as f64;
    let far = (cfg.patch_size - 1) as f64 - c;
    let corner = c.max(far).hypot(c.max(far));
    let obs_reach = std::f64::consts::SQRT_2 * ((c - cfg.margin as f64).max(0.0) + hw);
    corner.max(obs_reach)
}

const MAX_CENTER_DRAWS: usize = 100;

/// Samples one data tuple. Deterministic given the RNG state.
pub fn sample_tuple(
    map_src: &Raster,
    obs_src: &Raster,
    cfg: &SampleConfig,
    rng: &mut impl Rng,
) -> Result<DataTuple> {
    cfg.validate(map_src.scale, obs_src.scale)?;
    if map_src.channels() == 0 || obs_src.channels() == 0 {
        return Err(Error::arg("sources must have channels"));
    }
    let hw = cfg.footprint_half_width(map_src.scale, obs_src.scale);
    let reach = sampling_radius(cfg, hw) + 1.0;
    let lo = reach.ceil() as isize;
    let hi_r = map_src.height() as isize - 1 - lo;
    let hi_c = map_src.width() as isize - 1 - lo;
    if hi_r < lo || hi_c < lo {
        return Err(Error::arg(format!(
            "map source {}x{} is too small for a rotated {} px patch",
            map_src.height(),
            map_src.width(),
            cfg.patch_size
        )));
    }

    for _ in 0..MAX_CENTER_DRAWS {
        let cr = rng.gen_range(lo..=hi_r) as f64;
        let cc = rng.gen_range(lo..=hi_c) as f64;
        let phi = match cfg.rotation {
            Some(a) => a,
            None => rng.gen_range(0.0..std::f64::consts::TAU),
        };
        let coords: Vec<PixelCoord> = (0..cfg.n_obs)
            .map(|_| {
                PixelCoord::new(
                    rng.gen_range(cfg.margin..cfg.patch_size - cfg.margin),
                    rng.gen_range(cfg.margin..cfg.patch_size - cfg.margin),
                )
            })
            .collect();
        match build_tuple(map_src, obs_src, cfg, (cr, cc), phi, coords) {
            Ok(t) => return Ok(t),
            // the observation source may cover less than the map source
            Err(Error::Range(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::arg(
        "observation source does not cover the map source well enough to sample",
    ))
}

fn build_tuple(
    map_src: &Raster,
    obs_src: &Raster,
    cfg: &SampleConfig,
    center: (f64, f64),
    phi: f64,
    coords: Vec<PixelCoord>,
) -> Result<DataTuple> {
    let s = cfg.patch_size;
    let half = (s / 2) as f64;
    let (sin, cos) = phi.sin_cos();
    let ch = map_src.channels();
    let mut data = vec![0.0; s * s * ch];
    for u in 0..s {
        let du = u as f64 - half;
        for v in 0..s {
            let dv = v as f64 - half;
            let (r, c) = if phi == 0.0 {
                (center.0 + du, center.1 + dv)
            } else {
                (center.0 + cos * du - sin * dv, center.1 + sin * du + cos * dv)
            };
            let dst = (u * s + v) * ch;
            bilinear_sample_into(map_src, r, c, &mut data[dst..dst + ch])?;
        }
    }
    // Patch pixel (0,0) in world coordinates; the patch frame is the source
    // frame rotated by phi about the centre pixel.
    let r0 = center.0 + cos * (-half) - sin * (-half);
    let c0 = center.1 + sin * (-half) + cos * (-half);
    let (ox, oy) = patch_to_world_f(&map_src.geo_pose, map_src.scale, r0, c0);
    let pose = WorldPose::new(ox, oy, map_src.geo_pose.heading() + phi);
    let map_patch = Raster::new(s, s, ch, data, map_src.scale, pose)?;

    let observations = coords
        .iter()
        .map(|&p| {
            let (x, y) = patch_to_world(&pose, map_src.scale, p);
            extract_obs(obs_src, x, y, cfg.obs_size)
        })
        .collect::<Result<Vec<_>>>()?;
    DataTuple::new(map_patch, observations, coords)
}

/// Samples `n` tuples, tuple `i` using its own RNG stream derived from `cfg.seed`.
pub fn sample_dataset(
    map_src: &Raster,
    obs_src: &Raster,
    cfg: &SampleConfig,
    n: usize,
) -> Result<Vec<DataTuple>> {
    (0..n)
        .map(|i| sample_tuple(map_src, obs_src, cfg, &mut tuple_rng(cfg.seed, i as u64)))
        .collect()
}

/// RNG stream for tuple `i` of a dataset.
pub fn tuple_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub enable_c4: bool,
    /// Multiplier range.
    pub brightness: (f64, f64),
    /// Multiplier range about the image mean.
    pub contrast: (f64, f64),
    /// Multiplier range on HSV saturation (3-channel rasters only).
    pub saturation: (f64, f64),
    /// Additive hue shift range in turns (3-channel rasters only).
    pub hue: (f64, f64),
    /// Output is clamped to this range after jitter.
    pub value_range: Option<(f64, f64)>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enable_c4: true,
            brightness: (0.95, 1.05),
            contrast: (0.95, 1.05),
            saturation: (0.95, 1.05),
            hue: (-0.0125, 0.0125),
            value_range: None,
        }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        Self {
            enable_c4: false,
            brightness: (1.0, 1.0),
            contrast: (1.0, 1.0),
            saturation: (1.0, 1.0),
            hue: (0.0, 0.0),
            value_range: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |r: (f64, f64), positive: bool| {
            r.0 <= r.1 && r.0.is_finite() && r.1.is_finite() && (!positive || r.0 > 0.0)
        };
        if !ok(self.brightness, true) || !ok(self.contrast, true) {
            return Err(Error::arg("brightness/contrast ranges must be positive intervals"));
        }
        if !ok(self.saturation, false) || self.saturation.0 < 0.0 || !ok(self.hue, false) {
            return Err(Error::arg("invalid saturation or hue range"));
        }
        if let Some((lo, hi)) = self.value_range {
            if !(lo < hi) {
                return Err(Error::arg("value range must satisfy lo < hi"));
            }
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut impl Rng) -> AugmentParams {
        let q = if self.enable_c4 { rng.gen_range(0..4u8) } else { 0 };
        let mut pick = |r: (f64, f64)| if r.0 == r.1 { r.0 } else { rng.gen_range(r.0..r.1) };
        AugmentParams {
            quarter_turns: q,
            brightness: pick(self.brightness),
            contrast: pick(self.contrast),
            saturation: pick(self.saturation),
            hue: pick(self.hue),
        }
    }
}

/// One concrete draw from the augmentation family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub quarter_turns: u8,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            quarter_turns: 0,
            brightness: 1.0,
            contrast: 1.0,
            saturation: 1.0,
            hue: 0.0,
        }
    }
}

/// Draws augmentation parameters and applies them.
pub fn augment(obs: &Raster, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<Raster> {
    let params = cfg.draw(rng);
    apply_augment(obs, &params, cfg.value_range)
}

/// Applies a C4 rotation, then brightness, contrast, saturation and hue.
pub fn apply_augment(
    obs: &Raster,
    p: &AugmentParams,
    value_range: Option<(f64, f64)>,
) -> Result<Raster> {
    if !p.quarter_turns.is_multiple_of(4) && obs.height() != obs.width() {
        return Err(Error::arg("C4 rotation requires a square observation"));
    }
    let mut out = obs.rotate90(p.quarter_turns);
    let ch = out.channels();
    let data = out.data_mut();
    if p.brightness != 1.0 {
        data.iter_mut().for_each(|x| *x *= p.brightness);
    }
    if p.contrast != 1.0 {
        let m = data.iter().sum::<f64>() / data.len() as f64;
        data.iter_mut().for_each(|x| *x = (*x - m) * p.contrast + m);
    }
    if ch == 3 && (p.saturation != 1.0 || p.hue != 0.0) {
        for px in data.chunks_exact_mut(3) {
            let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
            let h = (h + p.hue).rem_euclid(1.0);
            let s = (s * p.saturation).clamp(0.0, 1.0);
            let (r, g, b) = hsv_to_rgb(h, s, v);
            px[0] = r;
            px[1] = g;
            px[2] = b;
        }
    }
    if let Some((lo, hi)) = value_range {
        data.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
    }
    Ok(out)
}

/// Hue in turns `[0, 1)`; defined for nonnegative inputs.
fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    if max <= 0.0 {
        return (0.0, 0.0, max);
    }
    let s = (d / max).min(1.0);
    if d == 0.0 {
        return (0.0, s, max);
    }
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    (h / 6.0, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match (i as i64).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// `b` tuples drawn without replacement, with two augmented views per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub tuple_indices: Vec<usize>,
    /// `views[i][j]` are the two views of observation `j` of tuple `i`.
    pub views: Vec<Vec<[Raster; 2]>>,
}

impl Minibatch {
    pub fn n_views(&self) -> usize {
        self.views.iter().map(|v| 2 * v.len()).sum()
    }
}

pub fn make_minibatch(
    dataset: &[DataTuple],
    b: usize,
    aug: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<Minibatch> {
    if b == 0 || b > dataset.len() {
        return Err(Error::arg(format!(
            "cannot draw {b} tuples from a dataset of {}",
            dataset.len()
        )));
    }
    let idx = index::sample(rng, dataset.len(), b).into_vec();
    minibatch_from_indices(dataset, &idx, aug, rng)
}

pub(crate) fn minibatch_from_indices(
    dataset: &[DataTuple],
    idx: &[usize],
    aug: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<Minibatch> {
    aug.validate()?;
    let mut views = Vec::with_capacity(idx.len());
    for &i in idx {
        let t = &dataset[i];
        let mut per = Vec::with_capacity(t.n_obs());
        for o in &t.observations {
            per.push([augment(o, aug, rng)?, augment(o, aug, rng)?]);
        }
        views.push(per);
    }
    Ok(Minibatch {
        tuple_indices: idx.to_vec(),
        views,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, ch: usize, scale: f64) -> Raster {
        let data = (0..h * w * ch).map(|i| i as f64).collect();
        Raster::new(h, w, ch, data, scale, WorldPose::origin()).unwrap()
    }

    fn small_cfg() -> SampleConfig {
        SampleConfig {
            patch_size: 16,
            obs_size: 8,
            n_obs: 3,
            margin: 2,
            seed: 1,
            rotation: None,
        }
    }

    #[test]
    fn zero_rotation_patch_is_exact_crop() {
        let map = ramp(64, 64, 2, 1.0);
        let obs = ramp(256, 256, 1, 4.0);
        let cfg = SampleConfig {
            rotation: Some(0.0),
            ..small_cfg()
        };
        let t = sample_tuple(&map, &obs, &cfg, &mut tuple_rng(3, 0)).unwrap();
        let (r0, c0) = world_to_patch_f(&map.geo_pose, 1.0, t.patch_pose.x, t.patch_pose.y);
        assert_eq!(r0.fract(), 0.0);
        assert_eq!(c0.fract(), 0.0);
        let (r0, c0) = (r0 as usize, c0 as usize);
        for u in 0..16 {
            for v in 0..16 {
                assert_eq!(t.map_patch.pixel(u, v), map.pixel(r0 + u, c0 + v));
            }
        }
    }

    #[test]
    fn observations_reextract_bit_exactly() {
        let map = ramp(64, 64, 2, 1.0);
        let obs = ramp(256, 256, 3, 4.0);
        let mut rng = tuple_rng(5, 0);
        for _ in 0..5 {
            let t = sample_tuple(&map, &obs, &small_cfg(), &mut rng).unwrap();
            for j in 0..t.n_obs() {
                let (x, y) = t.obs_world(j);
                assert_eq!(extract_obs(&obs, x, y, 8).unwrap(), t.observations[j]);
            }
        }
    }

    #[test]
    fn too_small_source_is_rejected() {
        let map = ramp(20, 20, 1, 1.0);
        let obs = ramp(80, 80, 1, 4.0);
        assert!(matches!(
            sample_tuple(&map, &obs, &small_cfg(), &mut tuple_rng(0, 0)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn margin_must_cover_footprint() {
        let cfg = SampleConfig {
            margin: 0,
            ..small_cfg()
        };
        assert!(cfg.validate(1.0, 4.0).is_err());
        assert!(small_cfg().validate(1.0, 4.0).is_ok());
    }

    #[test]
    fn sampling_never_leaves_the_sources() {
        use rand::Rng;
        let mut meta = ChaCha8Rng::seed_from_u64(99);
        let map = ramp(72, 80, 1, 1.0);
        let obs = ramp(72 * 2, 80 * 2, 1, 2.0);
        let mut ok = 0;
        for i in 0..10_000u64 {
            let patch = meta.gen_range(8..=40usize);
            let obs_size = meta.gen_range(8..=16usize);
            let hw = (obs_size as f64 / 2.0) / 2.0;
            let margin = meta.gen_range(hw.ceil() as usize..=hw.ceil() as usize + 3);
            let cfg = SampleConfig {
                patch_size: patch,
                obs_size,
                n_obs: 2,
                margin,
                seed: i,
                rotation: None,
            };
            match sample_tuple(&map, &obs, &cfg, &mut tuple_rng(i, 0)) {
                Ok(t) => {
                    ok += 1;
                    assert_eq!(t.map_patch.height(), patch);
                }
                // only configuration errors are acceptable, never range errors
                Err(Error::Argument(_)) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(ok > 1000);
    }

    #[test]
    fn coordinates_are_uniform_in_margin_interior() {
        let map = ramp(64, 64, 1, 1.0);
        let obs = ramp(256, 256, 1, 4.0);
        let cfg = SampleConfig {
            n_obs: 1,
            ..small_cfg()
        };
        // 12x12 interior cells, grouped into 3x3 blocks of 4x4 cells
        let mut counts = [0usize; 9];
        for i in 0..1000u64 {
            let t = sample_tuple(&map, &obs, &cfg, &mut tuple_rng(17, i)).unwrap();
            let p = t.coords[0];
            assert!((2..14).contains(&p.u) && (2..14).contains(&p.v));
            counts[((p.u - 2) / 4) * 3 + (p.v - 2) / 4] += 1;
        }
        let expected = 1000.0 / 9.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square, 8 degrees of freedom, p = 0.01
        assert!(chi2 < 20.09, "chi2 = {chi2}");
    }

    #[test]
    fn identity_augmentation() {
        let o = ramp(6, 6, 3, 1.0);
        let mut rng = tuple_rng(0, 0);
        assert_eq!(augment(&o, &AugmentConfig::identity(), &mut rng).unwrap(), o);
    }

    #[test]
    fn four_quarter_turns_compose_to_identity() {
        let o = ramp(5, 5, 2, 1.0);
        let p = AugmentParams {
            quarter_turns: 1,
            ..AugmentParams::identity()
        };
        let mut x = o.clone();
        for _ in 0..4 {
            x = apply_augment(&x, &p, None).unwrap();
        }
        assert_eq!(x, o);
    }

    #[test]
    fn brightness_doubles_values() {
        let o = ramp(4, 4, 2, 1.0);
        let p = AugmentParams {
            brightness: 2.0,
            ..AugmentParams::identity()
        };
        let out = apply_augment(&o, &p, None).unwrap();
        for (a, b) in out.data().iter().zip(o.data()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn hsv_round_trip_and_skip_for_other_channel_counts() {
        for &(r, g, b) in &[(0.2, 0.5, 0.9), (0.9, 0.1, 0.3), (0.4, 0.4, 0.4), (0.0, 0.0, 0.0)] {
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            assert!((r - r2).abs() < 1e-12 && (g - g2).abs() < 1e-12 && (b - b2).abs() < 1e-12);
        }
        let o = ramp(4, 4, 2, 1.0);
        let p = AugmentParams {
            hue: 0.3,
            saturation: 0.2,
            ..AugmentParams::identity()
        };
        assert_eq!(apply_augment(&o, &p, None).unwrap(), o);
    }

    #[test]
    fn jitter_is_clamped_and_shape_preserved() {
        let o = Raster::new(4, 4, 3, vec![0.5; 48], 1.0, WorldPose::origin()).unwrap();
        let cfg = AugmentConfig {
            brightness: (1.5, 3.0),
            value_range: Some((0.0, 1.0)),
            ..AugmentConfig::default()
        };
        let mut rng = tuple_rng(1, 1);
        for _ in 0..20 {
            let a = augment(&o, &cfg, &mut rng).unwrap();
            assert_eq!((a.height(), a.width(), a.channels()), (4, 4, 3));
            assert!(a.data().iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn c4_requires_square() {
        let o = ramp(4, 5, 1, 1.0);
        let p = AugmentParams {
            quarter_turns: 1,
            ..AugmentParams::identity()
        };
        assert!(apply_augment(&o, &p, None).is_err());
    }

    fn tiny_dataset(n: usize) -> Vec<DataTuple> {
        let map = ramp(64, 64, 2, 1.0);
        let obs = ramp(256, 256, 3, 4.0);
        sample_dataset(&map, &obs, &small_cfg(), n).unwrap()
    }

    #[test]
    fn minibatch_counts_and_coverage() {
        let ds = tiny_dataset(5);
        let mut rng = tuple_rng(0, 0);
        let mb = make_minibatch(&ds, 5, &AugmentConfig::default(), &mut rng).unwrap();
        let mut idx = mb.tuple_indices.clone();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
        assert_eq!(mb.n_views(), 5 * 3 * 2);
        assert!(make_minibatch(&ds, 6, &AugmentConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn minibatch_paper_shape() {
        let map = ramp(64, 64, 2, 1.0);
        let obs = ramp(256, 256, 3, 4.0);
        let cfg = SampleConfig {
            n_obs: 6,
            ..small_cfg()
        };
        let ds = sample_dataset(&map, &obs, &cfg, 10).unwrap();
        let mb = make_minibatch(&ds, 8, &AugmentConfig::default(), &mut tuple_rng(2, 0)).unwrap();
        assert_eq!(mb.tuple_indices.len(), 8);
        assert_eq!(mb.views.iter().map(|v| v.len()).sum::<usize>(), 48);
        assert_eq!(mb.n_views(), 96);
    }

    #[test]
    fn minibatch_deterministic() {
        let ds = tiny_dataset(6);
        let a = make_minibatch(&ds, 3, &AugmentConfig::default(), &mut tuple_rng(8, 0)).unwrap();
        let b = make_minibatch(&ds, 3, &AugmentConfig::default(), &mut tuple_rng(8, 0)).unwrap();
        assert_eq!(a, b);
    }
}
