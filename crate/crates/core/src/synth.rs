//! Seeded synthetic multi-modal world: a latent terrain-class field rendered
//! into a coarse, blurred map modality and a fine, textured observation
//! modality with unrelated channel signatures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{Raster, WorldPose};

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub seed: u64,
    /// Extent along x (rows) and y (columns), metres.
    pub world_size: (f64, f64),
    pub num_terrains: usize,
    pub map_scale: f64,
    pub obs_scale: f64,
    pub map_channels: usize,
    pub obs_channels: usize,
    pub noise_sigma_map: f64,
    pub noise_sigma_obs: f64,
    /// Box-blur radius applied to the map modality, map pixels.
    pub blur_radius_map: usize,
    /// Period of the sinusoidal observation texture, observation pixels.
    pub texture_period_obs: f64,
    /// Peak amplitude of the observation texture (per class, drawn in `[0, max]`).
    pub texture_amplitude_obs: f64,
    pub n_blobs: usize,
    /// Range of Gaussian bump widths, metres.
    pub blob_sigma: (f64, f64),
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            world_size: (256.0, 256.0),
            num_terrains: 4,
            map_scale: 1.0,
            obs_scale: 4.0,
            map_channels: 3,
            obs_channels: 3,
            noise_sigma_map: 0.02,
            noise_sigma_obs: 0.05,
            blur_radius_map: 4,
            texture_period_obs: 6.0,
            texture_amplitude_obs: 0.08,
            n_blobs: 60,
            blob_sigma: (8.0, 32.0),
        }
    }
}

impl WorldSpec {
    /// Integer ratio between observation and map scale.
    pub fn scale_ratio(&self) -> Result<usize> {
        let r = self.obs_scale / self.map_scale;
        let ri = r.round();
        if (r - ri).abs() > 1e-9 {
            return Err(Error::arg(format!(
                "obs_scale / map_scale must be an integer, got {r}"
            )));
        }
        Ok(ri as usize)
    }

    pub fn map_dims(&self) -> (usize, usize) {
        (
            (self.world_size.0 * self.map_scale).round() as usize,
            (self.world_size.1 * self.map_scale).round() as usize,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.map_scale > 0.0 && self.obs_scale > 0.0) {
            return Err(Error::arg("scales must be positive"));
        }
        let r = self.scale_ratio()?;
        if r < 2 {
            return Err(Error::arg(format!(
                "observation scale must be at least twice the map scale, ratio is {r}"
            )));
        }
        let (h, w) = self.map_dims();
        if h < 2 || w < 2 {
            return Err(Error::arg("world has zero area at map resolution"));
        }
        if self.num_terrains < 2 || self.num_terrains > 255 {
            return Err(Error::arg("number of terrains must be in [2, 255]"));
        }
        if self.map_channels == 0 || self.obs_channels == 0 {
            return Err(Error::arg("channel counts must be positive"));
        }
        if self.noise_sigma_map < 0.0 || self.noise_sigma_obs < 0.0 {
            return Err(Error::arg("noise sigmas must be >= 0"));
        }
        if !(self.texture_period_obs > 0.0) || self.texture_amplitude_obs < 0.0 {
            return Err(Error::arg("texture period must be > 0 and amplitude >= 0"));
        }
        if self.n_blobs == 0 || !(self.blob_sigma.0 > 0.0 && self.blob_sigma.1 >= self.blob_sigma.0)
        {
            return Err(Error::arg("need at least one blob with a valid width range"));
        }
        Ok(())
    }
}

/// Per-class sinusoid added to every observation channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texture {
    pub amplitude: f64,
    pub direction: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    /// Class index per observation pixel, row-major.
    pub terrain: Vec<u8>,
    pub terrain_dims: (usize, usize),
    pub map_raster: Raster,
    pub obs_raster: Raster,
    /// `K x D_m`, row per class.
    pub signatures_map: Vec<Vec<f64>>,
    /// `K x D_o`, row per class.
    pub signatures_obs: Vec<Vec<f64>>,
    pub textures: Vec<Texture>,
    pub texture_period: f64,
}

impl World {
    pub fn terrain_at(&self, row: usize, col: usize) -> u8 {
        self.terrain[row * self.terrain_dims.1 + col]
    }

    /// Class of the terrain cell nearest to a world point, if inside.
    pub fn terrain_at_world(&self, x: f64, y: f64) -> Option<u8> {
        let frame = self.obs_raster.frame();
        let (r, c) = frame.to_pixel(x, y);
        let (r, c) = (r.round(), c.round());
        if r < 0.0 || c < 0.0 {
            return None;
        }
        let (r, c) = (r as usize, c as usize);
        (r < self.terrain_dims.0 && c < self.terrain_dims.1).then(|| self.terrain_at(r, c))
    }

    /// Deterministic texture term at an observation pixel for a class.
    pub fn texture_at(&self, class: usize, row: usize, col: usize) -> f64 {
        texture_value(&self.textures[class], self.texture_period, row, col)
    }

    /// Fraction of terrain cells per class.
    pub fn class_histogram(&self, k: usize) -> Vec<f64> {
        let mut h = vec![0usize; k];
        for &t in &self.terrain {
            h[t as usize] += 1;
        }
        let n = self.terrain.len() as f64;
        h.into_iter().map(|c| c as f64 / n).collect()
    }
}

#[inline]
fn texture_value(t: &Texture, period: f64, row: usize, col: usize) -> f64 {
    let (s, c) = t.direction.sin_cos();
    let arg = (row as f64 * c + col as f64 * s) / period;
    t.amplitude * (std::f64::consts::TAU * arg + t.phase).sin()
}

const MIN_CLASS_FRACTION: f64 = 0.01;
const MAX_ATTEMPTS: u64 = 16;

/// Generates a world; deterministic for a fixed spec.
pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let sub_seed = spec.seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let world = generate_attempt(spec, sub_seed)?;
        let hist = world.class_histogram(spec.num_terrains);
        if hist.iter().all(|&f| f >= MIN_CLASS_FRACTION) {
            return Ok(world);
        }
    }
    Err(Error::arg(format!(
        "could not generate a terrain with all {} classes present",
        spec.num_terrains
    )))
}

fn generate_attempt(spec: &WorldSpec, seed: u64) -> Result<World> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratio = spec.scale_ratio()?;
    let (hm, wm) = spec.map_dims();
    let (ho, wo) = (hm * ratio, wm * ratio);
    let k = spec.num_terrains;

    // Smooth field at map resolution: sum of signed Gaussian bumps.
    let mut field = vec![0.0f64; hm * wm];
    for _ in 0..spec.n_blobs {
        let cx = rng.gen_range(0.0..hm as f64);
        let cy = rng.gen_range(0.0..wm as f64);
        let sigma = rng.gen_range(spec.blob_sigma.0..=spec.blob_sigma.1) * spec.map_scale;
        let amp: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.5..1.0);
        let reach = 4.0 * sigma;
        let r0 = ((cx - reach).floor().max(0.0)) as usize;
        let r1 = ((cx + reach).ceil() as usize).min(hm - 1);
        let c0 = ((cy - reach).floor().max(0.0)) as usize;
        let c1 = ((cy + reach).ceil() as usize).min(wm - 1);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for r in r0..=r1 {
            let dr = r as f64 - cx;
            for c in c0..=c1 {
                let dc = c as f64 - cy;
                field[r * wm + c] += amp * (-(dr * dr + dc * dc) * inv).exp();
            }
        }
    }

    let mut sorted = field.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let thresholds: Vec<f64> = (1..k)
        .map(|i| sorted[(i * sorted.len() / k).min(sorted.len() - 1)])
        .collect();
    let classify = |x: f64| thresholds.iter().take_while(|&&t| x >= t).count() as u8;

    // Terrain at observation resolution by bilinear upsampling of the field.
    let mut terrain = vec![0u8; ho * wo];
    let inv_ratio = 1.0 / ratio as f64;
    for i in 0..ho {
        let fr = (i as f64 * inv_ratio).min((hm - 1) as f64);
        let r0 = fr.floor() as usize;
        let r1 = (r0 + 1).min(hm - 1);
        let tr = fr - r0 as f64;
        for j in 0..wo {
            let fc = (j as f64 * inv_ratio).min((wm - 1) as f64);
            let c0 = fc.floor() as usize;
            let c1 = (c0 + 1).min(wm - 1);
            let tc = fc - c0 as f64;
            let top = (1.0 - tc) * field[r0 * wm + c0] + tc * field[r0 * wm + c1];
            let bot = (1.0 - tc) * field[r1 * wm + c0] + tc * field[r1 * wm + c1];
            terrain[i * wo + j] = classify((1.0 - tr) * top + tr * bot);
        }
    }

    let signatures_map: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..spec.map_channels).map(|_| rng.gen_range(0.1..0.9)).collect())
        .collect();
    let signatures_obs: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..spec.obs_channels).map(|_| rng.gen_range(0.2..0.8)).collect())
        .collect();
    let textures: Vec<Texture> = (0..k)
        .map(|_| Texture {
            amplitude: rng.gen_range(0.0..=spec.texture_amplitude_obs),
            direction: rng.gen_range(0.0..std::f64::consts::PI),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        })
        .collect();

    // Map modality: class at the map pixel centre, noise, then box blur.
    let dm = spec.map_channels;
    let mut map = vec![0.0f64; hm * wm * dm];
    for u in 0..hm {
        for v in 0..wm {
            let cls = terrain[(u * ratio) * wo + v * ratio] as usize;
            let px = &mut map[(u * wm + v) * dm..(u * wm + v + 1) * dm];
            for (ch, p) in px.iter_mut().enumerate() {
                let n: f64 = rng.sample(StandardNormal);
                *p = signatures_map[cls][ch] + spec.noise_sigma_map * n;
            }
        }
    }
    if spec.blur_radius_map > 0 {
        box_blur(&mut map, hm, wm, dm, spec.blur_radius_map);
    }

    // Observation modality: signature + texture + noise.
    let dobs = spec.obs_channels;
    let mut obs = vec![0.0f64; ho * wo * dobs];
    for i in 0..ho {
        for j in 0..wo {
            let cls = terrain[i * wo + j] as usize;
            let tex = texture_value(&textures[cls], spec.texture_period_obs, i, j);
            let px = &mut obs[(i * wo + j) * dobs..(i * wo + j + 1) * dobs];
            for (ch, p) in px.iter_mut().enumerate() {
                let n: f64 = rng.sample(StandardNormal);
                *p = signatures_obs[cls][ch] + tex + spec.noise_sigma_obs * n;
            }
        }
    }

    let map_raster = Raster::new(hm, wm, dm, map, spec.map_scale, WorldPose::origin())?;
    let obs_raster = Raster::new(ho, wo, dobs, obs, spec.obs_scale, WorldPose::origin())?;
    Ok(World {
        terrain,
        terrain_dims: (ho, wo),
        map_raster,
        obs_raster,
        signatures_map,
        signatures_obs,
        textures,
        texture_period: spec.texture_period_obs,
    })
}

/// Separable box blur with edge replication, in place.
pub fn box_blur(data: &mut [f64], h: usize, w: usize, ch: usize, radius: usize) {
    let norm = 1.0 / (2 * radius + 1) as f64;
    let mut line = Vec::new();
    let mut tmp = vec![0.0; h.max(w)];
    for c in 0..ch {
        for r in 0..h {
            line.clear();
            line.extend((0..w).map(|x| data[(r * w + x) * ch + c]));
            blur_line(&line, radius, norm, &mut tmp[..w]);
            for x in 0..w {
                data[(r * w + x) * ch + c] = tmp[x];
            }
        }
        for x in 0..w {
            line.clear();
            line.extend((0..h).map(|r| data[(r * w + x) * ch + c]));
            blur_line(&line, radius, norm, &mut tmp[..h]);
            for r in 0..h {
                data[(r * w + x) * ch + c] = tmp[r];
            }
        }
    }
}

fn blur_line(src: &[f64], radius: usize, norm: f64, out: &mut [f64]) {
    let n = src.len() as isize;
    let at = |i: isize| src[i.clamp(0, n - 1) as usize];
    let r = radius as isize;
    let mut acc: f64 = (-r..=r).map(at).sum();
    for i in 0..n {
        out[i as usize] = acc * norm;
        acc += at(i + r + 1) - at(i - r);
    }
}
