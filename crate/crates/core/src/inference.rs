//! Dirichlet observation model over belief maps, likelihood heat maps,
//! recall evaluation and the segmentation / profile renderings.

use std::io::Write;

use statrs::function::gamma::ln_gamma as statrs_ln_gamma;

use crate::encoders::{encode_map, encode_obs, MapEncoderParams, ObsEncoderParams};
use crate::error::{Error, Result};
use crate::sampler::DataTuple;
use crate::types::{BeliefMap, PixelCoord, SimplexVec, EPS_CLAMP};

/// `ln Γ(x)`; exact for small positive integers so that the uniform
/// Dirichlet normalizer is exactly `ln (C-1)!`.
pub fn ln_gamma(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=30.0).contains(&x) {
        let mut f = 1.0f64;
        for i in 2..x as u32 {
            f *= i as f64;
        }
        f.ln()
    } else {
        statrs_ln_gamma(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletModel {
    theta: f64,
}

impl DirichletModel {
    pub const DEFAULT_THETA: f64 = 5.0;

    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta < 0.0 {
            return Err(Error::arg(format!("theta must be finite and >= 0, got {theta}")));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Concentration `1 + θ z`.
    pub fn alpha(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&p| 1.0 + self.theta * p).collect()
    }
}

impl Default for DirichletModel {
    fn default() -> Self {
        Self {
            theta: Self::DEFAULT_THETA,
        }
    }
}

/// Dirichlet log-density of `y` with concentration `alpha`.
pub fn dirichlet_logpdf(y: &SimplexVec, alpha: &[f64]) -> Result<f64> {
    if alpha.len() != y.len() {
        return Err(Error::arg(format!(
            "concentration has {} entries, observation has {}",
            alpha.len(),
            y.len()
        )));
    }
    if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::arg("concentrations must be finite and > 0"));
    }
    let total: f64 = alpha.iter().sum();
    let norm = ln_gamma(total) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    let kernel: f64 = alpha
        .iter()
        .zip(y.as_slice())
        .map(|(&a, &p)| (a - 1.0) * p.max(EPS_CLAMP).ln())
        .sum();
    Ok(norm + kernel)
}

/// Per-pixel Dirichlet parameters of a belief map, precomputed so that a
/// log-density query costs `C` multiply-adds.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletField {
    height: usize,
    width: usize,
    channels: usize,
    /// `α - 1 = θ z` per pixel and channel.
    excess: Vec<f64>,
    log_norm: Vec<f64>,
}

impl DirichletField {
    pub fn new(bm: &BeliefMap, model: DirichletModel) -> Self {
        let c = bm.channels();
        let theta = model.theta();
        let ln_total = ln_gamma(c as f64 + theta);
        let excess: Vec<f64> = bm.data().iter().map(|&z| theta * z).collect();
        let log_norm = excess
            .chunks_exact(c)
            .map(|e| ln_total - e.iter().map(|&x| ln_gamma(1.0 + x)).sum::<f64>())
            .collect();
        Self {
            height: bm.height(),
            width: bm.width(),
            channels: c,
            excess,
            log_norm,
        }
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

    /// Clamped `ln y`, the observation-dependent part of every query.
    pub fn log_obs(&self, y: &SimplexVec) -> Result<Vec<f64>> {
        if y.len() != self.channels {
            return Err(Error::arg(format!(
                "observation has {} channels, belief map has {}",
                y.len(),
                self.channels
            )));
        }
        Ok(y.as_slice().iter().map(|p| p.max(EPS_CLAMP).ln()).collect())
    }

    /// Log-density at pixel `(u, v)` given `ln y` from [`Self::log_obs`].
    #[inline]
    pub fn logpdf_at(&self, u: usize, v: usize, log_y: &[f64]) -> f64 {
        let i = u * self.width + v;
        let e = &self.excess[i * self.channels..(i + 1) * self.channels];
        self.log_norm[i] + e.iter().zip(log_y).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn heat_map(&self, y: &SimplexVec) -> Result<HeatMap> {
        let log_y = self.log_obs(y)?;
        let c = self.channels;
        let log_density = self
            .excess
            .chunks_exact(c)
            .zip(&self.log_norm)
            .map(|(e, n)| n + e.iter().zip(&log_y).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok(HeatMap {
            height: self.height,
            width: self.width,
            log_density,
        })
    }
}

/// Per-pixel log-density of one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    height: usize,
    width: usize,
    log_density: Vec<f64>,
}

impl HeatMap {
    pub fn new(height: usize, width: usize, log_density: Vec<f64>) -> Result<Self> {
        if log_density.len() != height * width {
            return Err(Error::arg("heat map size does not match its dimensions"));
        }
        if log_density.iter().any(|x| !x.is_finite()) {
            return Err(Error::range("heat map contains non-finite values"));
        }
        Ok(Self {
            height,
            width,
            log_density,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.log_density
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.log_density[u * self.width + v]
    }

    /// First pixel attaining the maximum.
    pub fn argmax(&self) -> PixelCoord {
        let mut best = 0;
        for (i, &x) in self.log_density.iter().enumerate() {
            if x > self.log_density[best] {
                best = i;
            }
        }
        PixelCoord::new(best / self.width, best % self.width)
    }

    /// Min-max normalized 8-bit intensities; a constant map renders black.
    pub fn to_gray8(&self) -> Vec<u8> {
        let (lo, hi) = self
            .log_density
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let span = hi - lo;
        self.log_density
            .iter()
            .map(|&x| {
                if span > 0.0 {
                    ((x - lo) / span * 255.0).round() as u8
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Log-density of `y` at every pixel of `bm` under `Dirichlet(1 + θ Z[u,v])`.
pub fn likelihood_map(bm: &BeliefMap, y: &SimplexVec, model: DirichletModel) -> Result<HeatMap> {
    if y.len() != bm.channels() {
        return Err(Error::arg(format!(
            "observation has {} channels, belief map has {}",
            y.len(),
            bm.channels()
        )));
    }
    DirichletField::new(bm, model).heat_map(y)
}

/// Whether `truth` lies in the top `k_percent` of the heat map. Ties favour
/// the truth pixel: only strictly larger values count against it.
pub fn recall_at_k(heat: &HeatMap, truth: PixelCoord, k_percent: f64) -> Result<bool> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(Error::arg(format!("k must be in (0, 100], got {k_percent}")));
    }
    if truth.u >= heat.height || truth.v >= heat.width {
        return Err(Error::range(format!(
            "truth pixel ({}, {}) outside {}x{} heat map",
            truth.u, truth.v, heat.height, heat.width
        )));
    }
    let budget = (k_percent * (heat.height * heat.width) as f64 / 100.0).ceil() as usize;
    let t = heat.get(truth.u, truth.v);
    let above = heat.log_density.iter().filter(|&&x| x > t).count();
    Ok(above < budget)
}

/// Fraction of a tuple's observations recalled at each `k` (percent) when
/// its map patch is encoded and every observation is scored against it.
pub fn tuple_recall(
    map: &MapEncoderParams,
    obs: &ObsEncoderParams,
    t: &DataTuple,
    model: DirichletModel,
    ks: &[f64],
) -> Result<Vec<f64>> {
    let field = DirichletField::new(&encode_map(map, &t.map_patch)?, model);
    let mut hits = vec![0usize; ks.len()];
    for (o, &p) in t.observations.iter().zip(&t.coords) {
        let heat = field.heat_map(&encode_obs(obs, o)?)?;
        for (h, &k) in hits.iter_mut().zip(ks) {
            *h += recall_at_k(&heat, p, k)? as usize;
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / t.n_obs() as f64).collect())
}

/// Mean of [`tuple_recall`] over `tuples`.
pub fn mean_recall(
    map: &MapEncoderParams,
    obs: &ObsEncoderParams,
    tuples: &[DataTuple],
    model: DirichletModel,
    ks: &[f64],
) -> Result<Vec<f64>> {
    if tuples.is_empty() {
        return Err(Error::arg("recall needs at least one tuple"));
    }
    let mut sum = vec![0.0; ks.len()];
    for t in tuples {
        for (s, r) in sum.iter_mut().zip(tuple_recall(map, obs, t, model, ks)?) {
            *s += r;
        }
    }
    Ok(sum.into_iter().map(|s| s / tuples.len() as f64).collect())
}

/// Candidate concentrations for [`select_theta`].
pub const THETA_GRID: [f64; 10] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];

/// The `theta` from `grid` with the best mean recall on `val`, compared by
/// recall at `ks[0]`, then `ks[1]` and so on; earlier grid entries win ties.
/// Returns the winner and its recalls.
pub fn select_theta(
    map: &MapEncoderParams,
    obs: &ObsEncoderParams,
    val: &[DataTuple],
    grid: &[f64],
    ks: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::arg("theta candidates must be > 0; theta = 0 ties every pixel"));
    }
    let recalls = grid
        .iter()
        .map(|&theta| mean_recall(map, obs, val, DirichletModel::new(theta)?, ks))
        .collect::<Result<Vec<_>>>()?;
    best_theta(grid, &recalls)
}

/// The winner of [`select_theta`] given the mean recalls of every grid
/// entry, for callers that stream validation data themselves.
pub fn best_theta(grid: &[f64], recalls: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    if grid.len() != recalls.len() {
        return Err(Error::arg(format!(
            "{} theta candidates but {} recall vectors",
            grid.len(),
            recalls.len()
        )));
    }
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for (&theta, r) in grid.iter().zip(recalls) {
        let better = match best {
            None => true,
            Some((_, b)) => r.partial_cmp(b) == Some(std::cmp::Ordering::Greater),
        };
        if better {
            best = Some((theta, r));
        }
    }
    best.map(|(t, r)| (t, r.clone()))
        .ok_or_else(|| Error::arg("theta grid is empty"))
}

/// Per-pixel argmax class (lowest index on ties), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassGrid {
    pub height: usize,
    pub width: usize,
    pub classes: Vec<u8>,
}

pub fn segmentation_render(bm: &BeliefMap) -> ClassGrid {
    let classes = bm
        .data()
        .chunks_exact(bm.channels())
        .map(|z| {
            let mut best = 0;
            for (c, &p) in z.iter().enumerate() {
                if p > z[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    ClassGrid {
        height: bm.height(),
        width: bm.width(),
        classes,
    }
}

/// Belief values sampled along a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefProfile {
    /// Nearest pixel of each sample.
    pub pixels: Vec<PixelCoord>,
    /// Channel values of each sample.
    pub values: Vec<Vec<f64>>,
}

impl BeliefProfile {
    /// CSV with columns `sample,u,v,c0,c1,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let c = self.values.first().map_or(0, Vec::len);
        let mut header = vec!["sample".to_string(), "u".into(), "v".into()];
        header.extend((0..c).map(|i| format!("c{i}")));
        let csv_err = |e: csv::Error| Error::Config(format!("writing profile csv: {e}"));
        w.write_record(&header).map_err(csv_err)?;
        for (i, (p, vals)) in self.pixels.iter().zip(&self.values).enumerate() {
            let mut rec = vec![i.to_string(), p.u.to_string(), p.v.to_string()];
            rec.extend(vals.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::io("profile csv", e))?;
        Ok(())
    }
}

/// Nearest-pixel belief values at `samples` evenly spaced points from `from`
/// to `to` inclusive.
pub fn belief_profile(
    bm: &BeliefMap,
    from: PixelCoord,
    to: PixelCoord,
    samples: usize,
) -> Result<BeliefProfile> {
    for p in [from, to] {
        if !bm.in_bounds(p) {
            return Err(Error::range(format!(
                "profile endpoint ({}, {}) outside {}x{} belief map",
                p.u,
                p.v,
                bm.height(),
                bm.width()
            )));
        }
    }
    if samples == 0 {
        return Err(Error::arg("profile needs at least one sample"));
    }
    let (u0, v0) = (from.u as f64, from.v as f64);
    let (du, dv) = (to.u as f64 - u0, to.v as f64 - v0);
    let mut pixels = Vec::with_capacity(samples);
    let mut values = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = if samples == 1 {
            0.0
        } else {
            i as f64 / (samples - 1) as f64
        };
        let p = PixelCoord::new((u0 + t * du).round() as usize, (v0 + t * dv).round() as usize);
        values.push(bm.pixel(p.u, p.v).to_vec());
        pixels.push(p);
    }
    Ok(BeliefProfile { pixels, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};
    use std::f64::consts::PI;

    fn random_simplex(rng: &mut impl Rng, c: usize) -> SimplexVec {
        let v: Vec<f64> = (0..c).map(|_| Exp1.sample(rng)).collect();
        SimplexVec::from_unnormalized(v).unwrap()
    }

    fn random_bm(rng: &mut impl Rng, h: usize, w: usize, c: usize) -> BeliefMap {
        let data = (0..h * w).flat_map(|_| random_simplex(rng, c).into_vec()).collect();
        BeliefMap::new(h, w, c, data).unwrap()
    }

    #[test]
    fn theta_selection_on_uninformative_encoders() {
        use crate::types::{Raster, WorldPose};
        let map = MapEncoderParams::zeros(3, 2, 4).unwrap();
        let obs = ObsEncoderParams::zeros(2, 4, 4, vec![(0.0, 1.0); 2]).unwrap();
        let patch = Raster::new(6, 6, 2, (0..72).map(|i| i as f64 / 72.0).collect(), 1.0, WorldPose::origin()).unwrap();
        let o = Raster::filled(4, 4, 2, 0.5).unwrap();
        let t = DataTuple::new(patch, vec![o.clone(), o], vec![PixelCoord::new(1, 1), PixelCoord::new(4, 2)]).unwrap();
        let ts = [t];
        // uniform beliefs tie every pixel, so recall is perfect for any theta
        assert_eq!(mean_recall(&map, &obs, &ts, DirichletModel::new(5.0).unwrap(), &[1.0, 5.0]).unwrap(), vec![1.0, 1.0]);
        let (theta, r) = select_theta(&map, &obs, &ts, &[20.0, 5.0], &[1.0]).unwrap();
        assert_eq!((theta, r), (20.0, vec![1.0]));
        assert!(select_theta(&map, &obs, &ts, &[0.0, 5.0], &[1.0]).is_err());
        assert!(select_theta(&map, &obs, &ts, &[], &[1.0]).is_err());
        assert!(mean_recall(&map, &obs, &[], DirichletModel::default(), &[1.0]).is_err());
        let grid = [1.0, 2.0, 5.0];
        let r = [vec![0.2, 0.5], vec![0.3, 0.1], vec![0.3, 0.1]];
        assert_eq!(best_theta(&grid, &r).unwrap(), (2.0, vec![0.3, 0.1]));
        assert!(best_theta(&grid, &r[..2]).is_err());
    }

    #[test]
    fn uniform_dirichlet_is_ln_two_for_three_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let y = random_simplex(&mut rng, 3);
            assert_eq!(dirichlet_logpdf(&y, &[1.0; 3]).unwrap(), 2f64.ln());
        }
    }

    #[test]
    fn symmetric_two_class_density() {
        // B(3.5, 3.5) = Γ(3.5)² / Γ(7) with Γ(3.5) = 15√π / 8 and Γ(7) = 720
        let g35 = 15.0 * PI.sqrt() / 8.0;
        let expected = (720.0 / (g35 * g35) * 0.5f64.powi(5)).ln();
        let m = DirichletModel::new(5.0).unwrap();
        let y = SimplexVec::new(vec![0.5, 0.5]).unwrap();
        let lp = dirichlet_logpdf(&y, &m.alpha(&[0.5, 0.5])).unwrap();
        assert!((lp - expected).abs() < 1e-12);
        assert!((lp - 0.7116).abs() < 1e-4);
        assert!((lp.exp() - 2.0372).abs() < 1e-4);
    }

    #[test]
    fn monte_carlo_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..3 {
            let theta = rng.gen_range(0.0..5.0);
            let z = random_simplex(&mut rng, 3);
            let alpha = DirichletModel::new(theta).unwrap().alpha(z.as_slice());
            let n = 1_000_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let y = random_simplex(&mut rng, 3);
                sum += dirichlet_logpdf(&y, &alpha).unwrap().exp();
            }
            // uniform draws on the 2-simplex have density (C-1)! = 2
            let integral = sum / n as f64 / 2.0;
            assert!((integral - 1.0).abs() < 0.02, "integral {integral}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let y = SimplexVec::uniform(2);
        assert!(dirichlet_logpdf(&y, &[1.0, 0.0]).is_err());
        assert!(dirichlet_logpdf(&y, &[1.0, 1.0, 1.0]).is_err());
        assert!(DirichletModel::new(-1.0).is_err());
        assert!(DirichletModel::new(f64::NAN).is_err());
    }

    #[test]
    fn integer_ln_gamma_agrees_with_statrs() {
        for n in 1..=30 {
            let x = n as f64;
            assert!((ln_gamma(x) - statrs_ln_gamma(x)).abs() < 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn field_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bm = random_bm(&mut rng, 6, 7, 4);
        let y = random_simplex(&mut rng, 4);
        let m = DirichletModel::new(2.5).unwrap();
        let heat = likelihood_map(&bm, &y, m).unwrap();
        for u in 0..6 {
            for v in 0..7 {
                let direct = dirichlet_logpdf(&y, &m.alpha(bm.pixel(u, v))).unwrap();
                assert!((heat.get(u, v) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_theta_gives_constant_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bm = random_bm(&mut rng, 5, 5, 5);
        let y = random_simplex(&mut rng, 5);
        let heat = likelihood_map(&bm, &y, DirichletModel::new(0.0).unwrap()).unwrap();
        let expected = 24f64.ln();
        assert!(heat.data().iter().all(|&x| x == expected));
    }

    #[test]
    fn matching_pixel_is_maximal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut data: Vec<f64> = (0..8 * 8)
            .flat_map(|_| random_simplex(&mut rng, 3).into_vec())
            .collect();
        // flatten the random beliefs so that none is sharper than the target
        for z in data.chunks_exact_mut(3) {
            for p in z.iter_mut() {
                *p = 0.5 * *p + 0.5 / 3.0;
            }
        }
        let y = vec![0.9, 0.06, 0.04];
        data[(3 * 8 + 5) * 3..(3 * 8 + 6) * 3].copy_from_slice(&y);
        let bm = BeliefMap::new(8, 8, 3, data).unwrap();
        let heat = likelihood_map(&bm, &SimplexVec::new(y).unwrap(), DirichletModel::default())
            .unwrap();
        let best = heat.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(heat.get(3, 5), best);
        assert_eq!(heat.argmax(), PixelCoord::new(3, 5));
    }

    #[test]
    fn identical_observations_give_identical_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let bm = random_bm(&mut rng, 4, 4, 3);
        let y = random_simplex(&mut rng, 3);
        let m = DirichletModel::default();
        assert_eq!(
            likelihood_map(&bm, &y, m).unwrap(),
            likelihood_map(&bm, &y.clone(), m).unwrap()
        );
        assert!(likelihood_map(&bm, &SimplexVec::uniform(4), m).is_err());
    }

    #[test]
    fn density_at_matching_pixel_grows_with_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let y = random_simplex(&mut rng, 4);
            let mut prev = f64::NEG_INFINITY;
            for step in 0..40 {
                let theta = step as f64 * 0.5;
                let m = DirichletModel::new(theta).unwrap();
                let lp = dirichlet_logpdf(&y, &m.alpha(y.as_slice())).unwrap();
                assert!(lp >= prev - 1e-12, "theta {theta}: {lp} < {prev}");
                prev = lp;
            }
        }
    }

    fn heat(h: usize, w: usize, v: Vec<f64>) -> HeatMap {
        HeatMap::new(h, w, v).unwrap()
    }

    #[test]
    fn recall_fixtures() {
        let mut vals: Vec<f64> = (0..16).map(|i| i as f64).collect();
        vals.reverse();
        let hm = heat(4, 4, vals);
        // argmax at (0, 0)
        assert!(recall_at_k(&hm, PixelCoord::new(0, 0), 1.0).unwrap());
        // (0, 2) holds the third largest value; 12.5% of 16 is 2 pixels
        assert!(!recall_at_k(&hm, PixelCoord::new(0, 2), 12.5).unwrap());
        assert!(recall_at_k(&hm, PixelCoord::new(0, 1), 12.5).unwrap());
        assert!(recall_at_k(&hm, PixelCoord::new(0, 2), 18.75).unwrap());

        let flat = heat(4, 4, vec![1.0; 16]);
        assert!(recall_at_k(&flat, PixelCoord::new(3, 3), 1.0).unwrap());

        assert!(recall_at_k(&hm, PixelCoord::new(0, 0), 0.0).is_err());
        assert!(recall_at_k(&hm, PixelCoord::new(0, 0), 100.5).is_err());
        assert!(recall_at_k(&hm, PixelCoord::new(4, 0), 5.0).is_err());
    }

    #[test]
    fn heat_map_rejects_non_finite() {
        assert!(HeatMap::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(HeatMap::new(1, 2, vec![0.0]).is_err());
    }

    #[test]
    fn gray_rendering_spans_full_range() {
        let g = heat(1, 3, vec![-4.0, -2.0, 0.0]).to_gray8();
        assert_eq!(g, vec![0, 128, 255]);
        assert_eq!(heat(1, 2, vec![3.0, 3.0]).to_gray8(), vec![0, 0]);
    }

    #[test]
    fn segmentation_fixtures() {
        let mut data = Vec::new();
        for i in 0..6 {
            data.extend(SimplexVec::one_hot(3, i % 3).into_vec());
        }
        let g = segmentation_render(&BeliefMap::new(2, 3, 3, data).unwrap());
        assert_eq!(g.classes, vec![0, 1, 2, 0, 1, 2]);
        let u = segmentation_render(&BeliefMap::uniform(3, 3, 4));
        assert!(u.classes.iter().all(|&c| c == 0));
    }

    fn two_region_bm(h: usize, w: usize, boundary: usize) -> BeliefMap {
        let mut data = Vec::new();
        for _ in 0..h {
            for v in 0..w {
                data.extend(if v < boundary { [0.8, 0.2] } else { [0.3, 0.7] });
            }
        }
        BeliefMap::new(h, w, 2, data).unwrap()
    }

    #[test]
    fn profile_fixtures() {
        let bm = two_region_bm(10, 20, 12);
        let p = belief_profile(&bm, PixelCoord::new(2, 3), PixelCoord::new(2, 3), 5).unwrap();
        assert!(p.values.iter().all(|v| v == &p.values[0]));

        let flat = BeliefMap::uniform(5, 9, 3);
        let p = belief_profile(&flat, PixelCoord::new(1, 0), PixelCoord::new(1, 8), 9).unwrap();
        assert!(p.values.iter().all(|v| v == &vec![1.0 / 3.0; 3]));

        // one sample per column: the step sits at the boundary column
        let p = belief_profile(&bm, PixelCoord::new(5, 0), PixelCoord::new(5, 19), 20).unwrap();
        let step = p.values.iter().position(|v| v[0] < 0.5).unwrap();
        assert!((step as i64 - 12).abs() <= 1);
        assert!(p.values[..step].iter().all(|v| v[0] == 0.8));
        assert!(p.values[step..].iter().all(|v| v[1] == 0.7));

        assert!(belief_profile(&bm, PixelCoord::new(10, 0), PixelCoord::new(0, 0), 3).is_err());
    }

    #[test]
    fn profile_csv_layout() {
        let bm = two_region_bm(2, 4, 2);
        let p = belief_profile(&bm, PixelCoord::new(0, 0), PixelCoord::new(0, 3), 2).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sample,u,v,c0,c1");
        assert_eq!(lines[1], "0,0,0,0.8,0.2");
        assert_eq!(lines[2], "1,0,3,0.3,0.7");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn recall_is_monotone_in_k(
                vals in prop::collection::vec(-10.0f64..10.0, 36),
                u in 0usize..6, v in 0usize..6,
                k1 in 0.1f64..100.0, dk in 0.0f64..50.0,
            ) {
                let hm = HeatMap::new(6, 6, vals).unwrap();
                let t = PixelCoord::new(u, v);
                let k2 = (k1 + dk).min(100.0);
                if recall_at_k(&hm, t, k1).unwrap() {
                    prop_assert!(recall_at_k(&hm, t, k2).unwrap());
                }
                prop_assert!(recall_at_k(&hm, t, 100.0).unwrap());
            }
        }
    }
}
